//! Great-circle distance, slerp and Rodrigues rotation on the unit sphere.

use std::f64::consts::FRAC_PI_2;

use uamfd::geom::{self, Vec3};

fn main() -> Result<(), geom::GeometryError> {
    let a = Vec3::new(1.0, 0.0, 0.0);
    let b = Vec3::new(0.0, 1.0, 0.0);
    println!("arc a-b: {:.6} m", geom::gc_distance(a, b, 1.0)?);

    for ell in [0.0, 0.25, 0.5, 1.0] {
        let p = geom::slerp(a, b, ell)?;
        println!("slerp({ell:.2}) = ({:.4}, {:.4}, {:.4})", p.x, p.y, p.z);
    }

    let heading = geom::tangent_dir(a, b)?;
    let turned = geom::rodrigues_rotate(heading, a, FRAC_PI_2)?;
    println!("heading {heading:?} turned left by 90 deg: {turned:?}");

    let next = geom::step_along(a, turned, 0.05, 1.0)?;
    println!("one 5 cm step along it lands at {next:?}");
    Ok(())
}
