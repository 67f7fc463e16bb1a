//! Percentile filter and Drake fit on a noisy synthetic sample cloud.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uamfd::fd::{self, FdPoint, FilterConfig};

fn main() -> Result<(), fd::FitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // an upper envelope following Drake's curve, with congested scatter below it
    let cloud: Vec<FdPoint> = (0..600)
        .map(|_| {
            let k: f64 = rng.random_range(0.02..2.5);
            let q = fd::drake_eval(k, 0.43, 1.0) * rng.random_range(0.6..1.02);
            FdPoint { k, q }
        })
        .collect();

    let kept = fd::percentile_filter(&cloud, &FilterConfig::default())?;
    let fit = fd::fit_drake(&kept)?;
    println!("kept {} of {} samples", kept.len(), cloud.len());
    println!("v_f = {:.4} m/s, alpha = {:.4} m2", fit.v_f, fit.alpha);
    println!("analytic  k_c = {:.3}, q_max = {:.4}", fit.k_c_analytic, fit.q_max_analytic);
    println!("empirical k_c = {:.3}, q_max = {:.4}", fit.k_c_empirical, fit.q_max_empirical);
    println!("r2 = {:.3}, rmse = {:.4}", fit.r2, fit.rmse);
    println!("low-density envelope slope = {:.4}", fd::envelope_slope(&cloud, 0.1)?);
    Ok(())
}
