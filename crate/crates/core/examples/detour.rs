//! One circular-detour decision: a neighbour sits right on the nominal path.

use uamfd::control::{self, ControlDecision};
use uamfd::geom::{self, Vec3};

fn main() -> Result<(), geom::GeometryError> {
    let me = Vec3::new(1.0, 0.0, 0.0);
    let destination = Vec3::new(0.0, 1.0, 0.0);
    let ahead = geom::slerp(me, destination, 0.2)?;
    let positions = [Some(me), Some(ahead)];

    let conflicts = control::detect_conflicts(0, &positions, 0.5);
    println!("conflicts of drone 0 at spacing 0.5: {conflicts:?}");

    let nominal = geom::tangent_dir(me, destination)?;
    match control::circular_detour(0, &conflicts, &positions, destination, 64)? {
        ControlDecision::Proceed(d) => {
            let turn = d.dot(nominal).clamp(-1.0, 1.0).acos().to_degrees();
            println!("detour heading {d:?}, {turn:.1} deg off the nominal heading");
        }
        ControlDecision::Halt => println!("no safe heading, holding position"),
    }
    Ok(())
}
