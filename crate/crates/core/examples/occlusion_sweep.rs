//! A short synthetic sequence through the command pipeline: simulate, then
//! solve occluded copies at increasing ratios.

use mocap_core::pipeline::commands::{cmd_ablate_occlusion, cmd_simulate};
use mocap_core::pipeline::{CommandOptions, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::default();
    cfg.sequence.frames = 5;
    cfg.scene.frames = 2;
    let config = dir.path().join("run.json");
    std::fs::write(&config, cfg.to_json()?)?;

    let mut opts = CommandOptions::new(dir.path().join("data"));
    opts.config = Some(config);
    opts.oracle_labels = true;
    println!("{}", cmd_simulate(&opts)?);
    println!("{}", cmd_ablate_occlusion(&opts)?);
    Ok(())
}
