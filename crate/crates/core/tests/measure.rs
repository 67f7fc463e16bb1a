use proptest::prelude::*;
use uamfd::control::{ControlConfig, ControlLaw};
use uamfd::io::TrajectoryRecord;
use uamfd::measure::{self, AreaMode, MeasureConfig, RegionPartition};
use uamfd::scenario::{ScenarioConfig, ScenarioKind};
use uamfd::sim::{self, SimConfig};
use uamfd::Vec3;

fn records() -> impl Strategy<Value = (ControlLaw, Vec<TrajectoryRecord>)> {
    (
        prop_oneof![Just(ScenarioKind::Random), Just(ScenarioKind::Zoned), Just(ScenarioKind::Stations)],
        prop_oneof![Just(ControlLaw::StopAndYield), Just(ControlLaw::CircularDetour)],
        1usize..7,
        any::<u64>(),
    )
        .prop_map(|(kind, law, n, seed)| {
            let cfg = SimConfig {
                dt: 0.1,
                n_steps: 300,
                cruise_speed: 0.5,
                scenario: ScenarioConfig::new(kind, n, seed),
                control: ControlConfig::new(law, 0.5),
            };
            let mut r = sim::run(&cfg).unwrap();
            r.sort_by(|a, b| a.id.cmp(&b.id).then(a.time.total_cmp(&b.time)));
            (law, r)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flow_never_exceeds_cruise_speed((law, recs) in records(), m_bar in 1usize..12) {
        let m = measure::accumulate(&recs, &MeasureConfig::new(m_bar, 0.1, 5.0)).unwrap();
        for s in &m.samples {
            prop_assert!(s.k >= 0.0);
            prop_assert!(s.q.abs() <= 0.5 * s.k + 1e-9, "cell {}: q {} k {}", s.region_id, s.q, s.k);
            // a detour heading may point away from the destination
            if law == ControlLaw::StopAndYield {
                prop_assert!(s.q >= 0.0);
            }
        }
    }

    #[test]
    fn trimming_more_never_adds_time((_, recs) in records(), m_bar in 1usize..12, a in 0.0f64..10.0, extra in 0.0f64..10.0) {
        let a = (a * 10.0).round() / 10.0;
        let b = a + (extra * 10.0).round() / 10.0;
        let ma = measure::accumulate(&recs, &MeasureConfig::new(m_bar, 0.1, a)).unwrap();
        let mb = measure::accumulate(&recs, &MeasureConfig::new(m_bar, 0.1, b)).unwrap();
        for (x, y) in ma.cell_steps.iter().zip(&mb.cell_steps) {
            prop_assert!(y <= x);
        }
    }

    #[test]
    fn cell_time_is_conserved((_, recs) in records(), m_bar in 1usize..12, trim in 0.0f64..20.0) {
        let m = measure::accumulate(&recs, &MeasureConfig::new(m_bar, 0.1, trim)).unwrap();
        let (start, end) = m.window;
        let inside = |t: f64| t >= start - 1e-6 && t <= end + 1e-6;
        let pairs = recs
            .windows(2)
            .filter(|w| w[0].id == w[1].id && inside(w[0].time) && inside(w[1].time))
            .count() as u64;
        prop_assert_eq!(m.total_steps(), pairs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn every_point_lands_in_one_cell(v in prop::array::uniform3(-1.0f64..1.0), m_bar in 1usize..40, r in 0.1f64..10.0) {
        let p = Vec3::new(v[0], v[1], v[2]);
        prop_assume!(p.norm() > 1e-3);
        let p = p.normalized().unwrap() * r;
        let part = RegionPartition::new(m_bar, r, AreaMode::Exact).unwrap();
        let cell = part.cell_of(p);
        prop_assert!(cell < part.n_cells());
        let (t, f) = measure::cell_bins(p, m_bar);
        prop_assert_eq!(cell, t * m_bar + f);
        let total: f64 = part.areas().iter().sum();
        let sphere = 4.0 * std::f64::consts::PI * r * r;
        prop_assert!((total - sphere).abs() <= 1e-9 * sphere);
    }
}
