//! Skeletal joints plus surface anchors for point-cloud human motion capture.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom3`]: rotation algebra (Rodrigues, swing/twist solvers, chordal mean).
//! * [`body`]: the 24-joint body, its synthetic template and forward kinematics.
//! * [`cloud`]: point-cloud primitives and scan simulation.
//! * [`labels`]: hierarchical joint/anchor labeling of scans.
//! * [`sparkle`]: the joints-plus-anchors representation and its geometric estimators.
//! * [`solver`]: pose initialisation from bone vectors and anchors, then damped least squares.
//! * [`multiview`]: rotation calibration and confidence-weighted fusion of views.
//! * [`track`]: person segmentation, identity association and MOT metrics.
//! * [`metrics`]: joint, vertex and angle errors.
//! * [`pipeline`]: dataset synthesis and the end-to-end commands behind the `mocap` binary.

pub mod body;
pub mod cloud;
pub mod error;
pub mod geom3;
pub mod labels;
pub mod metrics;
pub mod multiview;
pub mod pipeline;
pub mod solver;
pub mod sparkle;
pub mod track;

pub use error::{Error, Result};
