use proptest::prelude::*;
use uamfd::geom::{self, Vec3};

const TOL: f64 = 1e-9;

fn direction() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("not too short", |a| Vec3::new(a[0], a[1], a[2]).norm() > 0.1)
        .prop_map(|a| Vec3::new(a[0], a[1], a[2]).normalized().unwrap())
}

fn on_sphere() -> impl Strategy<Value = (Vec3, f64)> {
    (direction(), 0.1f64..100.0).prop_map(|(d, r)| (d * r, r))
}

fn angle(a: Vec3, b: Vec3) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn slerp_stays_on_sphere_and_is_proportional(
        (p1, r) in on_sphere(),
        d2 in direction(),
        ell in 0.0f64..=1.0,
    ) {
        let p2 = d2 * r;
        prop_assume!(angle(p1, p2) < std::f64::consts::PI - 1e-3);
        let s = geom::slerp(p1, p2, ell).unwrap();
        prop_assert!((s.norm() - r).abs() <= TOL * r);
        let total = geom::gc_distance(p1, p2, r).unwrap();
        let part = geom::gc_distance(p1, s, r).unwrap();
        prop_assert!((part - ell * total).abs() <= TOL * r.max(1.0));
    }

    #[test]
    fn slerp_endpoints_are_exact((p1, r) in on_sphere(), d2 in direction()) {
        let p2 = d2 * r;
        prop_assume!(angle(p1, p2) < std::f64::consts::PI - 1e-3);
        prop_assert_eq!(geom::slerp(p1, p2, 0.0).unwrap(), p1);
        prop_assert_eq!(geom::slerp(p1, p2, 1.0).unwrap(), p2);
    }

    #[test]
    fn rotated_tangent_stays_tangent((p, _r) in on_sphere(), v in direction(), psi in -10.0f64..10.0) {
        let n = p.normalized().unwrap();
        let t = v - n * v.dot(n);
        prop_assume!(t.norm() > 1e-3);
        let t = t.normalized().unwrap();
        let out = geom::rodrigues_rotate(t, n, psi).unwrap();
        prop_assert!(out.dot(n).abs() <= TOL);
        prop_assert!((out.norm() - 1.0).abs() <= TOL);
    }

    #[test]
    fn rodrigues_composes(v in direction(), axis in direction(), a in -7.0f64..7.0, b in -7.0f64..7.0) {
        let twice = geom::rodrigues_rotate(geom::rodrigues_rotate(v, axis, a).unwrap(), axis, b).unwrap();
        let once = geom::rodrigues_rotate(v, axis, a + b).unwrap();
        prop_assert!((twice - once).norm() <= TOL);
    }

    #[test]
    fn triangle_inequality((p1, r) in on_sphere(), d2 in direction(), d3 in direction()) {
        let (p2, p3) = (d2 * r, d3 * r);
        let ab = geom::gc_distance(p1, p2, r).unwrap();
        let bc = geom::gc_distance(p2, p3, r).unwrap();
        let ac = geom::gc_distance(p1, p3, r).unwrap();
        prop_assert!(ac <= ab + bc + TOL * r);
    }

    #[test]
    fn step_along_keeps_norm_and_arc((p, r) in on_sphere(), v in direction(), frac in 0.0f64..0.9) {
        let n = p.normalized().unwrap();
        prop_assume!((v - n * v.dot(n)).norm() > 1e-3);
        let arc = frac * std::f64::consts::PI * r;
        let q = geom::step_along(p, v, arc, r).unwrap();
        prop_assert!((q.norm() - r).abs() <= TOL * r);
        prop_assert!((geom::gc_distance(p, q, r).unwrap() - arc).abs() <= TOL * r);
    }

    #[test]
    fn spherical_round_trip((p, r) in on_sphere()) {
        let back = geom::from_spherical(geom::to_spherical(p), r);
        prop_assert!((back - p).norm() <= TOL * r);
        let c = geom::to_spherical(p);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&c.theta));
        prop_assert!((0.0..std::f64::consts::TAU).contains(&c.phi));
    }
}
