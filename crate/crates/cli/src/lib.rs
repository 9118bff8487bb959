//! `pednet` command-line pipeline: infer pedestrian graphs from streets,
//! render masks, refine against class rasters, evaluate and lint.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod http;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Context, PipelineInputs};
use crate::config::PipelineConfig;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "pednet",
    version,
    about = "Pedestrian path network inference and refinement"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set refine.iterations=100`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Serve imagery tiles from the cache only.
    #[arg(long, global = true)]
    pub offline: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Streets GeoJSON to hypothesized pedestrian graph.
    Infer {
        streets: PathBuf,
        #[arg(long)]
        known_crossings: Option<PathBuf>,
    },
    /// Pedestrian graph GeoJSON to label and class-probability masks.
    Rasterize { graph: PathBuf },
    /// Fit a hypothesis to class rasters.
    Refine {
        hypothesis: PathBuf,
        /// Directory holding sidewalk.png, crossing.png and corner_bulb.png.
        #[arg(long)]
        masks: PathBuf,
    },
    /// Score a predicted graph against ground truth.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long, requires = "gt_labels")]
        pred_labels: Option<PathBuf>,
        #[arg(long, requires = "pred_labels")]
        gt_labels: Option<PathBuf>,
    },
    /// Check a pedestrian graph for annotation errors.
    Lint {
        graph: PathBuf,
        #[arg(long)]
        streets: PathBuf,
    },
    /// infer, refine and eval in one run.
    Pipeline {
        streets: PathBuf,
        /// Ground-truth pedestrian graph; masks are rendered from it when
        /// `--masks` is absent.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        known_crossings: Option<PathBuf>,
    },
}

/// Resolves configuration from the common flags.
pub fn load_config(common: &CommonArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(j) = common.jobs {
        cfg.jobs = Some(j);
    }
    if common.offline {
        cfg.tiles.offline = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed invocation; messages for the user go to stderr.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli.common)?;
    let ctx = Context {
        config,
        out_dir: cli.common.out_dir.clone(),
    };
    let go = || -> Result<(), CliError> {
        match &cli.command {
            Command::Infer {
                streets,
                known_crossings,
            } => {
                let p = commands::cmd_infer(&ctx, streets, known_crossings.as_deref())?;
                eprintln!("wrote {}", p.display());
            }
            Command::Rasterize { graph } => {
                let p = commands::cmd_rasterize(&ctx, graph)?;
                eprintln!("wrote {}", p.display());
            }
            Command::Refine { hypothesis, masks } => {
                let p = commands::cmd_refine(&ctx, hypothesis, masks)?;
                eprintln!("wrote {}", p.display());
            }
            Command::Eval {
                pred,
                gt,
                pred_labels,
                gt_labels,
            } => {
                let labels = pred_labels.as_deref().zip(gt_labels.as_deref());
                let p = commands::cmd_eval(&ctx, pred, gt, labels)?;
                eprintln!("wrote {}", p.display());
            }
            Command::Lint { graph, streets } => {
                let (p, n) = commands::cmd_lint(&ctx, graph, streets)?;
                eprintln!("{n} violation(s); wrote {}", p.display());
            }
            Command::Pipeline {
                streets,
                gt,
                masks,
                known_crossings,
            } => {
                let inputs = PipelineInputs {
                    streets,
                    ground_truth: gt.as_deref(),
                    masks: masks.as_deref(),
                    known_crossings: known_crossings.as_deref(),
                };
                let p = commands::cmd_pipeline(&ctx, &inputs)?;
                eprintln!("wrote {}", p.display());
            }
        }
        Ok(())
    };
    match ctx.config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::new("InvalidConfig", e.to_string()))?
            .install(go),
        None => go(),
    }
}
