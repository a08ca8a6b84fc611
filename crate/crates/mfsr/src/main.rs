//! Thin subcommand front-end over the library's harness.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfsr::config::{parse_config_file, ExperimentConfig};
use mfsr::error::Error;
use mfsr::flow::FlowConfig;
use mfsr::harness;
use mfsr::tv::TvVariant;

#[derive(Parser)]
#[command(name = "mfsr", version, about = "Multi-frame super-resolution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOverrides {
    /// Experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct SolverOverrides {
    /// Regularization weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Inner CG relative tolerance.
    #[arg(long)]
    cg_eps: Option<f64>,
    /// Inner CG iteration cap.
    #[arg(long)]
    cg_max_iters: Option<usize>,
    /// Outer MM iteration cap.
    #[arg(long)]
    mm_max_iters: Option<usize>,
    /// TV variant: classic | smoothed | logweighted.
    #[arg(long)]
    tv: Option<String>,
    /// Smoothing eps for the smoothed variant.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct FlowOverrides {
    /// Smoothness weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Relaxation sweeps per pyramid level.
    #[arg(long)]
    iters: Option<usize>,
    /// Coarse-to-fine levels (1 = single scale).
    #[arg(long)]
    pyramid_levels: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate low-resolution frames into the output directory.
    Simulate {
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Estimate the global shift between two PGM frames.
    Flow {
        frame_a: PathBuf,
        frame_b: PathBuf,
        #[command(flatten)]
        common: CommonOverrides,
        #[command(flatten)]
        flow: FlowOverrides,
        /// Where to write vx/vy diagnostics and the shift report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct the scene from a simulated run directory.
    Reconstruct {
        #[command(flatten)]
        common: CommonOverrides,
        #[command(flatten)]
        solver: SolverOverrides,
    },
    /// Run only the interpolation+fusion baseline.
    Fuse {
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Summarize a run directory.
    Report {
        /// Run directory containing manifest.txt.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ConfigSyntax { .. } | Error::ConfigValue { .. } | Error::UnsupportedVariant(_) => 2,
        Error::Numerical(_) => 4,
        _ => 3,
    }
}

fn load_config(common: &CommonOverrides, require: bool) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => parse_config_file(path)?,
        None if require => {
            return Err(Error::ConfigValue {
                key: "--config".into(),
                msg: "this command requires a config file".into(),
            })
        }
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = common.master_seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn apply_solver_overrides(cfg: &mut ExperimentConfig, ov: &SolverOverrides) -> Result<(), Error> {
    if let Some(v) = ov.lambda {
        cfg.solver.lambda = v;
    }
    if let Some(v) = ov.cg_eps {
        cfg.solver.cg_eps = v;
    }
    if let Some(v) = ov.cg_max_iters {
        cfg.solver.cg_max_iters = v;
    }
    if let Some(v) = ov.mm_max_iters {
        cfg.solver.mm_max_iters = v;
    }
    if let Some(name) = &ov.tv {
        cfg.solver.tv = match name.to_ascii_lowercase().as_str() {
            "classic" => TvVariant::Classic,
            "smoothed" => TvVariant::Smoothed {
                eps: ov.eps.unwrap_or(1.0),
            },
            "logweighted" => TvVariant::LogWeighted,
            other => {
                return Err(Error::ConfigValue {
                    key: "--tv".into(),
                    msg: format!("unknown variant `{other}`"),
                })
            }
        };
    } else if let Some(eps) = ov.eps {
        if let TvVariant::Smoothed { .. } = cfg.solver.tv {
            cfg.solver.tv = TvVariant::Smoothed { eps };
        }
    }
    cfg.solver.validate()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load_config(&common, true)?;
            let report = harness::cmd_simulate(&cfg)?;
            println!(
                "wrote {} frames and {}",
                report.frame_paths.len(),
                report.manifest_path.display()
            );
            Ok(())
        }
        Command::Flow {
            frame_a,
            frame_b,
            common,
            flow,
            out,
        } => {
            let cfg = load_config(&common, false)?;
            let flow_cfg = FlowConfig {
                alpha: flow.alpha.unwrap_or(cfg.flow.alpha),
                iterations: flow.iters.unwrap_or(cfg.flow.iterations),
                pyramid_levels: flow.pyramid_levels.unwrap_or(cfg.flow.pyramid_levels),
            };
            let report = harness::cmd_flow(&frame_a, &frame_b, &flow_cfg, out.as_deref())?;
            print!("{}", report.render());
            Ok(())
        }
        Command::Reconstruct { common, solver } => {
            let mut cfg = load_config(&common, true)?;
            apply_solver_overrides(&mut cfg, &solver)?;
            let report = harness::cmd_reconstruct(&cfg)?;
            println!(
                "reconstructed {} outer iterations, final objective {}",
                report.mm.trace.len() - 1,
                harness::fmt_g12(*report.mm.trace.last().expect("trace")),
            );
            if let (Some(mm), Some(fu)) = (report.mm_mse, report.fusion_mse) {
                println!(
                    "mse vs truth: mm {} fusion {}",
                    harness::fmt_g12(mm),
                    harness::fmt_g12(fu)
                );
            }
            Ok(())
        }
        Command::Fuse { common } => {
            let cfg = load_config(&common, true)?;
            harness::cmd_fuse(&cfg)?;
            println!("wrote fused.pgm");
            Ok(())
        }
        Command::Report { dir } => {
            let text = harness::cmd_report(&dir)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
