//! Edie flow and density per sphere cell for one simulated run.

use uamfd::control::{ControlConfig, ControlLaw};
use uamfd::measure::{self, MeasureConfig};
use uamfd::scenario::{ScenarioConfig, ScenarioKind};
use uamfd::sim::{self, SimConfig};

fn main() -> uamfd::Result<()> {
    let cfg = SimConfig {
        dt: 0.1,
        n_steps: 500,
        cruise_speed: 0.5,
        scenario: ScenarioConfig::new(ScenarioKind::Random, 8, 1),
        control: ControlConfig::new(ControlLaw::StopAndYield, 0.5),
    };
    let mut records = sim::run(&cfg)?;
    records.sort_by(|a, b| a.id.cmp(&b.id).then(a.time.total_cmp(&b.time)));

    let m = measure::accumulate(&records, &MeasureConfig::new(7, 0.1, 15.0))?;
    println!("window {:?} s, {} drone-steps in window", m.window, m.total_steps());
    println!("{:>4} {:>10} {:>10} {:>8}", "cell", "k (1/m2)", "q (1/ms)", "speed");
    for s in m.samples.iter().filter(|s| s.k > 0.0) {
        println!("{:>4} {:>10.4} {:>10.4} {:>8.3}", s.region_id, s.k, s.q, s.q / s.k);
    }
    Ok(())
}
