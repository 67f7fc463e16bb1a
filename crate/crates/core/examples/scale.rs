//! Scales a testbed fundamental diagram (10 cm drones at 0.5 m/s) to 2 m
//! vehicles cruising at 10 m/s.

use uamfd::fd::{FdSummary, ScaleFactors};

fn main() -> Result<(), uamfd::fd::FitError> {
    let testbed = FdSummary { v_f: 0.349, k_c: 1.045, q_max: 0.221 };
    let f = ScaleFactors::from_reference(0.1, 2.0, 0.5, 10.0)?;
    let real = testbed.scale(f);
    println!("delta_eta = {}, delta_v = {}", f.delta_eta, f.delta_v);
    println!("v_f'   = {:.2} m/s", real.v_f);
    println!("k_c'   = {:.1} per km2", real.k_c_per_km2());
    println!("q_max' = {:.0} per km per h", real.q_max_per_km_h());
    Ok(())
}
