//! End-to-end orchestration behind the `mocap` command line: dataset
//! synthesis, labeling, fitting, solving, fusion, tracking, ablations and
//! evaluation.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod manifest;
pub mod motion;
pub mod reconstruct;
pub mod simulate;

pub use commands::CommandOptions;
pub use config::RunConfig;
pub use manifest::SequenceManifest;
pub use reconstruct::{
    combine, estimate_views, finish, reconstruct, FrameEstimates, FrameInput, MissingInput, Model,
    ReconstructOptions, Reconstruction, ViewInput,
};
