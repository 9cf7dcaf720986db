use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mocap_core::error::Error;
use mocap_core::pipeline::commands::*;

#[derive(Parser, Debug)]
#[command(name = "mocap", version, about = "Synthetic point-cloud motion capture: simulate, label, fit, solve, fuse, track, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration (defaults apply to omitted keys).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the configuration seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Dataset directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "data")]
    out: PathBuf,

    /// Overrides the views with N sensors evenly spaced on a horizontal ring.
    #[arg(long, global = true, value_name = "N")]
    views: Option<usize>,

    /// Generate ground-truth labels on the fly instead of reading label files.
    #[arg(long, global = true)]
    oracle_labels: bool,

    /// Report the closed-form initial pose without the least-squares refinement.
    #[arg(long, global = true)]
    skip_refine: bool,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Synthesize motion, scans, the tracking scene and the manifest.
    Simulate,
    /// Write per-point joint and anchor labels for every scan.
    Label,
    /// Fit the joint-to-anchor mapping and export the anchor set.
    Fit,
    /// Reconstruct poses from view 0.
    Solve,
    /// Reconstruct poses from all views with confidence-weighted fusion.
    Fuse,
    /// Segment and track the people of the simulated scene.
    Track,
    /// Solve occluded copies of view 0 at every configured ratio.
    AblateOcclusion,
    /// Recompute evaluation reports from stored results.
    Eval,
    /// Check every registered file against its recorded hash.
    Verify,
}

fn run(cli: &Cli) -> Result<String, Error> {
    let opts = CommandOptions {
        config: cli.config.clone(),
        seed: cli.seed,
        out: cli.out.clone(),
        views: cli.views,
        oracle_labels: cli.oracle_labels,
        skip_refine: cli.skip_refine,
    };
    match cli.command {
        Command::Simulate => cmd_simulate(&opts),
        Command::Label => cmd_label(&opts),
        Command::Fit => cmd_fit(&opts),
        Command::Solve => cmd_solve(&opts),
        Command::Fuse => cmd_fuse(&opts),
        Command::Track => cmd_track(&opts),
        Command::AblateOcclusion => cmd_ablate_occlusion(&opts),
        Command::Eval => cmd_eval(&opts),
        Command::Verify => cmd_verify(&opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("{}", serde_json::json!({ "error": "validation", "message": e.to_string() }));
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code())
        }
    }
}
