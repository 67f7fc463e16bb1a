//! Runs a stop-and-yield and a circular-detour simulation and replays both
//! against the control rules.

use uamfd::control::{ControlConfig, ControlLaw};
use uamfd::scenario::{ScenarioConfig, ScenarioKind};
use uamfd::sim::{self, SimConfig};

fn main() -> uamfd::Result<()> {
    for law in [ControlLaw::StopAndYield, ControlLaw::CircularDetour] {
        let cfg = SimConfig {
            dt: 0.1,
            n_steps: 500,
            cruise_speed: 0.5,
            scenario: ScenarioConfig::new(ScenarioKind::Stations, 8, 7),
            control: ControlConfig::new(law, 0.6),
        };
        let records = sim::run(&cfg)?;
        let report = sim::replay_check(&records, &cfg)?;
        println!(
            "{}: {} records, {} drone-steps replayed, {} violations",
            law.short_name(),
            records.len(),
            report.checked_steps,
            report.violations()
        );
    }
    Ok(())
}
