//! Flight plans for the three traffic scenarios.

use uamfd::geom;
use uamfd::scenario::{self, ScenarioConfig, ScenarioKind};

fn main() -> uamfd::Result<()> {
    for kind in [ScenarioKind::Random, ScenarioKind::Zoned, ScenarioKind::Stations] {
        let mut cfg = ScenarioConfig::new(kind, 3, 42);
        cfg.n_flights = 5;
        println!("scenario {} ({kind:?})", kind.number());
        for plan in scenario::gen_plans(&cfg)? {
            let legs: Vec<String> = plan
                .legs()
                .map(|(o, d)| geom::gc_distance(o, d, cfg.radius).map(|l| format!("{l:.2}")))
                .collect::<Result<_, _>>()?;
            println!("  drone {}: leg lengths [{}] m", plan.drone_id, legs.join(", "));
        }
    }
    Ok(())
}
