//! Drone traffic on a spherical airspace and its macroscopic flow-density
//! relation.
//!
//! * [`geom`]: great-circle geometry on a sphere.
//! * [`scenario`]: origin/destination generation and leg discretisation.
//! * [`control`]: stop-and-yield and circular-detour conflict resolution.
//! * [`sim`]: synchronous fixed-step simulation and replay checking.
//! * [`measure`]: Edie flow and density per spherical cell.
//! * [`fd`]: percentile filtering, Drake fit and scaling.
//! * [`io`]: trajectory CSV, sample CSV and TOML artifacts.
//! * [`cli`]: the `uamfd` command-line front end.

pub mod cli;
pub mod control;
pub mod error;
pub mod fd;
pub mod geom;
pub mod io;
pub mod measure;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use geom::Vec3;
