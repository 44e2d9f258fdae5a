//! Joint mesh extraction and seamless stitching onto the parts.

pub mod blend;
pub mod bridge;
pub mod corr;
pub mod mc;
pub mod stitch;

pub use blend::{conjugate_gradient, harmonic_deform, poisson_blend, remove_redundant, SolveStats};
pub use bridge::bridge_loops;
pub use corr::{loop_correspondence, loop_metric, LoopCorrespondence};
pub use mc::{marching_cubes, ScalarField, ISO};
pub use stitch::{stitch, StitchFlags, StitchResult};
