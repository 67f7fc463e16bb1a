//! The full protocol grid: 3 scenarios, 2 control laws with 2 spacings each,
//! fleets of 2 to 8 drones and 4 replications, pooled per configuration.
//!
//! `cargo run --release --example sweep -- <out dir>`

use std::path::PathBuf;

use uamfd::cli::{self, SweepConfig};

fn main() -> uamfd::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("sweep-out"));
    let cfg = SweepConfig::default();
    let outcome = cli::run_sweep(&cfg, &dir, true)?;
    print!("{}", cli::format_report_text(&outcome.report));
    let violations: usize = outcome.results.iter().filter_map(|r| r.replay.as_ref()).map(|r| r.violations()).sum();
    println!("{} trajectories, {violations} replay violations", cfg.n_trajectories());
    Ok(())
}
