//! `wavelab`: run canned blow-up experiments from TOML configs.
//!
//! One subcommand per experiment pipeline; the subcommand wins over the
//! `experiment` key in the config, so a single config can drive several
//! pipelines.  Flags override individual config keys.  `replay` re-runs a
//! recorded manifest and byte-compares the artifacts.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use wavelab::harness::{
    default_out_dir, replay, run_experiment_at, ExperimentConfig, ExperimentKind, Manifest,
};

#[derive(Parser)]
#[command(name = "wavelab", version, about = "Semilinear wave blow-up laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the nonlinearity exponent p
    #[arg(long)]
    p: Option<f64>,
    /// Override the pipeline's main grid resolution
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    /// Override the time-step safety factor
    #[arg(long)]
    cfl: Option<f64>,
    /// Override the slab cutoff ε
    #[arg(long)]
    cutoff: Option<f64>,
    /// Override the damping constant μ of the H functional
    #[arg(long)]
    mu: Option<f64>,
    /// Override the center-ODE coupling constant c₁
    #[arg(long)]
    c1: Option<f64>,
    /// Override the run seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $WAVELAB_OUT/<experiment>_<confighash>)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Radial PDE run: solution trajectory and blow-up graph
    Simulate(RunArgs),
    /// Evolve a profile in the self-similar slab
    Similarity(RunArgs),
    /// Similarity run plus Lyapunov functional readout
    Diagnose(RunArgs),
    /// Fit a multi-soliton sum to a synthetic slab frame
    Decompose(RunArgs),
    /// Integrate the soliton-center ODE system
    Centers(RunArgs),
    /// Classify a blow-up point: energy level, cone, corner, speed, sign
    Geometry(RunArgs),
    /// Shrinking-ball energy estimate along a radial run
    Energy(RunArgs),
    /// Re-run a recorded experiment and byte-compare its artifacts
    Replay {
        /// Path to a manifest.json written by a previous run
        manifest: PathBuf,
    },
}

fn apply_overrides(
    config: &mut ExperimentConfig,
    kind: ExperimentKind,
    args: &RunArgs,
) -> Result<()> {
    config.experiment = kind;
    if let Some(p) = args.p {
        config.equation.p = p;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }

    use ExperimentKind::*;
    if let Some(n) = args.grid_n {
        match kind {
            Simulate | Geometry | Energy => {
                section(&mut config.radial, "radial", "--grid-n")?.n = n;
            }
            Similarity | Diagnose => {
                section(&mut config.similarity, "similarity", "--grid-n")?.n = n;
            }
            Decompose => {
                section(&mut config.decompose, "decompose", "--grid-n")?.grid_n = n;
            }
            Centers => bail!("--grid-n does not apply to `centers` (no grid)"),
        }
    }
    if let Some(cfl) = args.cfl {
        match kind {
            Simulate | Geometry | Energy => {
                section(&mut config.radial, "radial", "--cfl")?.cfl = cfl;
            }
            Similarity | Diagnose => {
                section(&mut config.similarity, "similarity", "--cfl")?.cfl = cfl;
            }
            Decompose | Centers => bail!("--cfl does not apply to `{kind}`"),
        }
    }
    if let Some(eps) = args.cutoff {
        match kind {
            Similarity | Diagnose => {
                section(&mut config.similarity, "similarity", "--cutoff")?.eps = eps;
            }
            Decompose => {
                section(&mut config.decompose, "decompose", "--cutoff")?.eps = eps;
            }
            _ => bail!("--cutoff applies only to slab experiments, not `{kind}`"),
        }
    }
    if let Some(mu) = args.mu {
        match kind {
            Similarity | Diagnose => {
                section(&mut config.similarity, "similarity", "--mu")?.mu = Some(mu);
            }
            _ => bail!("--mu applies only to `similarity` and `diagnose`, not `{kind}`"),
        }
    }
    if let Some(c1) = args.c1 {
        match kind {
            Centers => section(&mut config.centers, "centers", "--c1")?.c1 = c1,
            _ => bail!("--c1 applies only to `centers`, not `{kind}`"),
        }
    }
    Ok(())
}

fn section<'a, T>(opt: &'a mut Option<T>, name: &str, flag: &str) -> Result<&'a mut T> {
    opt.as_mut()
        .with_context(|| format!("{flag} given but the config has no [{name}] section"))
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    apply_overrides(&mut config, kind, args)?;
    let dir = default_out_dir(&config);
    let manifest: Manifest = run_experiment_at(&config, &dir)
        .with_context(|| format!("running `{kind}`"))?;
    println!("{kind}: wrote {} artifacts to {}", manifest.outputs.len(), dir.display());
    for art in &manifest.outputs {
        println!("  {}  sha256:{}", art.path, &art.sha256[..12]);
    }
    println!("manifest: {}", dir.join("manifest.json").display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => run(ExperimentKind::Simulate, &a),
        Command::Similarity(a) => run(ExperimentKind::Similarity, &a),
        Command::Diagnose(a) => run(ExperimentKind::Diagnose, &a),
        Command::Decompose(a) => run(ExperimentKind::Decompose, &a),
        Command::Centers(a) => run(ExperimentKind::Centers, &a),
        Command::Geometry(a) => run(ExperimentKind::Geometry, &a),
        Command::Energy(a) => run(ExperimentKind::Energy, &a),
        Command::Replay { manifest } => {
            let report = replay(&manifest)
                .with_context(|| format!("replaying {}", manifest.display()))?;
            println!(
                "replay ok: {} artifacts, {} bytes byte-identical",
                report.artifacts, report.bytes_compared
            );
            Ok(())
        }
    }
}
