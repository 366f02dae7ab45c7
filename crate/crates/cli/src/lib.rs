//! Command-line front end for `qonn-core`: trains benchmark networks from a
//! JSON config, cross-checks the engine against the Fock oracle and writes
//! plot-ready CSV.

// `!(x < y)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
mod output;
mod reports;
mod train;
mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, SynthTargets, TaskConfig, ValidateConfig};
use crate::error::{config, Result};

#[derive(Debug, Parser)]
#[command(name = "qonn", version, about = "Photon-subtraction optical neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalOpts {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Leave wall-clock fields out of metrics.json so reruns are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "QONN_THREADS")]
    pub threads: Option<usize>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute the task named in the config.
    Run,
    /// Compare engine moments with the Fock oracle on random circuits.
    Validate,
    /// Term, matching and flop counts of an expectation plan.
    PlanStats(PlanStatsArgs),
    /// CSV sweep of the closed-form activation functions.
    ReportActivation,
    /// CSV of cubic-phase target moments.
    SynthTargets(SynthArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct PlanStatsArgs {
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Subtractions per layer, on modes 0, 1, ... (wrapping).
    #[arg(long)]
    pub per_layer: Option<usize>,
    /// Readout modes 0, 1, ... (wrapping).
    #[arg(long)]
    pub observables: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub cutoff: Option<usize>,
}

/// Resolved global options handed to every command.
#[derive(Debug, Clone)]
pub(crate) struct Context {
    pub seed: u64,
    pub deterministic: bool,
    pub out: PathBuf,
}

fn load(global: &GlobalOpts) -> Result<Option<RunConfig>> {
    global.config.as_deref().map(RunConfig::load).transpose()
}

fn context(global: &GlobalOpts, cfg: Option<&RunConfig>) -> Context {
    let seed = global.seed.or(cfg.map(|c| c.training.seed)).unwrap_or(0);
    let out =
        global.out.clone().or_else(|| cfg.map(|c| c.output_dir.clone())).unwrap_or_else(|| PathBuf::from("qonn-out"));
    Context { seed, deterministic: global.deterministic, out }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs one parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    configure_threads(cli.global.threads)?;
    let cfg = load(&cli.global)?;
    let ctx = context(&cli.global, cfg.as_ref());
    match cli.command {
        Command::Run => {
            let cfg = cfg.ok_or_else(|| config("`run` needs --config"))?;
            run_task(&cfg, &ctx)
        }
        Command::Validate => {
            let v = match cfg.as_ref().map(|c| &c.task) {
                Some(TaskConfig::Validate(v)) => v.clone(),
                Some(other) => return Err(config(format!("config task is `{}`, not `validate`", other.name()))),
                None => ValidateConfig::default(),
            };
            validate::run(&v, &ctx)
        }
        Command::PlanStats(args) => {
            let arch = match (&cfg, args.modes) {
                (_, Some(_)) => reports::arch_from_flags(&args)?,
                (Some(c), None) => c.architecture()?,
                (None, None) => return Err(config("plan-stats needs --config or --modes/--layers/--per-layer")),
            };
            reports::plan_stats(&arch, &ctx)
        }
        Command::ReportActivation => {
            let a = match cfg.as_ref().map(|c| &c.task) {
                Some(TaskConfig::ReportActivation(a)) => a.clone(),
                Some(other) => {
                    return Err(config(format!("config task is `{}`, not `report-activation`", other.name())))
                }
                None => Default::default(),
            };
            reports::activation(&a, &ctx)
        }
        Command::SynthTargets(args) => {
            let mut t = match cfg.as_ref().map(|c| &c.task) {
                Some(TaskConfig::Synth {
                    dataset: qonn_core::training::DatasetKind::CubicPhase { gamma, samples, cutoff },
                }) => SynthTargets { gamma: *gamma, samples: *samples, cutoff: *cutoff },
                Some(other) => return Err(config(format!("config task is `{}`, not `synth`", other.name()))),
                None => SynthTargets::default(),
            };
            t.gamma = args.gamma.unwrap_or(t.gamma);
            t.samples = args.samples.unwrap_or(t.samples);
            t.cutoff = args.cutoff.unwrap_or(t.cutoff);
            reports::synth_targets(&t, &ctx)
        }
    }
}

fn run_task(cfg: &RunConfig, ctx: &Context) -> Result<()> {
    match &cfg.task {
        TaskConfig::Curvefit { dataset } | TaskConfig::Classify { dataset } | TaskConfig::Synth { dataset } => {
            train::run(cfg, dataset, ctx)
        }
        TaskConfig::Validate(v) => validate::run(v, ctx),
        TaskConfig::PlanStats(_) => reports::plan_stats(&cfg.architecture()?, ctx),
        TaskConfig::ReportActivation(a) => reports::activation(a, ctx),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit status.
/// Failures are reported on stderr as one JSON object.
pub fn main_with_args() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let report = e.report();
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| report.message.clone()));
            report.exit_code
        }
    }
}
