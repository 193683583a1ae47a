//! Command-line surface. [`run`] is the whole program minus process exit, so
//! tests drive it in-process.

mod commands;
mod runner;

pub use commands::gradcheck_instance;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wowflow_core::{FlowConfig, KernelSpec, ReweightConfig};

use crate::data_io::DataError;

pub const TOOL: &str = "wowflow";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Core(#[from] wowflow_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("gradient check failed: max relative error {error:e} ≥ tolerance {tol:e}")]
    GradcheckFailed { error: f64, tol: f64 },
    #[error("rerun differs from the manifest in: {}", .0.join(", "))]
    RerunMismatch(Vec<String>),
}

impl CliError {
    /// 0 success, 1 runtime failure, 2 usage error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = TOOL, version, about = "WoW gradient flows of sliced-Wasserstein MMD on labeled datasets")]
pub struct Cli {
    /// Worker threads for the pairwise kernel loops (results do not depend on it).
    #[arg(long, global = true, env = "WOWFLOW_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Flow seeded blobs onto a mixture of rings.
    Rings(RingsArgs),
    /// Flow one labeled dataset onto another and align the classes.
    Flow(FlowArgs),
    /// Learn a few points per class that summarize a dataset.
    Distill(DistillArgs),
    /// Exact WoW distance, class assignment and cost matrix between two datasets.
    Match(MatchArgs),
    /// Compare the analytic WoW gradient with finite differences.
    Gradcheck(GradcheckArgs),
    /// Re-run a recorded run and check its outputs bit for bit.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rings(_) => "rings",
            Command::Flow(_) => "flow",
            Command::Distill(_) => "distill",
            Command::Match(_) => "match",
            Command::Gradcheck(_) => "gradcheck",
            Command::Rerun(_) => "rerun",
        }
    }
}

fn parse_kernel(s: &str) -> std::result::Result<String, String> {
    s.parse::<KernelSpec>().map(|k| k.to_string()).map_err(|e| format!("{e}\n  kernels: {}", wowflow_core::kernels::kernel_syntax()))
}

fn parse_momentum(s: &str) -> std::result::Result<f64, String> {
    let m: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..1.0).contains(&m) {
        Ok(m)
    } else {
        Err(format!("momentum must lie in [0, 1), got {m}"))
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be positive and finite, got {x}"))
    }
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(_) => Err(format!("`{s}` is not a positive integer")),
    }
}

/// Flags shared by every flow-running command.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FlowFlags {
    /// riesz:r=<0..2> | gaussian:h=<h> | laplace:h=<h> | imq:c=<c>
    #[arg(long, default_value = "riesz:r=1", value_parser = parse_kernel)]
    pub kernel: String,
    /// Step size τ.
    #[arg(long, default_value_t = 0.1, value_parser = parse_positive)]
    pub lr: f64,
    /// Heavy-ball momentum m in [0, 1).
    #[arg(long, default_value_t = 0.0, value_parser = parse_momentum)]
    pub momentum: f64,
    #[arg(long, default_value_t = 5000)]
    pub iters: usize,
    /// Slicing directions per iteration.
    #[arg(long, default_value_t = 500, value_parser = parse_count)]
    pub projections: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record the objective every this many steps (also the reweighting period).
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    pub snapshot_every: usize,
    /// Write a snapshot every this many steps (the final state is always written).
    #[arg(long, default_value_t = 100, value_parser = parse_count)]
    pub record_every: usize,
    /// Keep one set of directions for the whole run instead of resampling each step.
    #[arg(long)]
    pub fixed_projections: bool,
}

impl FlowFlags {
    pub fn flow_config(&self) -> Result<FlowConfig> {
        let kernel: KernelSpec = self.kernel.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
        let mut cfg = FlowConfig::new(kernel, self.lr, self.iters, self.projections, self.seed);
        cfg.momentum = self.momentum;
        cfg.snapshot_every = self.snapshot_every;
        cfg.resample_projections = !self.fixed_projections;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReweightFlags {
    /// Let mixture weights evolve by mirror-Sinkhorn phases every --snapshot-every steps.
    #[arg(long)]
    pub reweight: bool,
    #[arg(long, default_value_t = ReweightConfig::default().eta, value_parser = parse_positive)]
    pub reweight_eta: f64,
    #[arg(long, default_value_t = ReweightConfig::default().tau_penalty, value_parser = parse_positive)]
    pub reweight_tau: f64,
    #[arg(long, default_value_t = ReweightConfig::default().inner_steps, value_parser = parse_count)]
    pub reweight_steps: usize,
}

impl ReweightFlags {
    pub fn config(&self) -> Option<ReweightConfig> {
        self.reweight.then(|| ReweightConfig {
            eta: self.reweight_eta,
            tau_penalty: self.reweight_tau,
            inner_steps: self.reweight_steps,
            ..ReweightConfig::default()
        })
    }
}

/// How datasets named on the command line are read.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct InputFlags {
    /// Images drawn per label from IDX inputs (default: the rarest label's count).
    #[arg(long, value_parser = parse_count)]
    pub idx_per_class: Option<usize>,
    /// Truncate CSV classes to the smallest class instead of failing.
    #[arg(long)]
    pub allow_ragged: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RingsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub reweight: ReweightFlags,
    #[arg(long, default_value_t = 80, value_parser = parse_count)]
    pub n_per_ring: usize,
    #[arg(long, default_value_t = 3, value_parser = parse_count)]
    pub rings: usize,
    /// Source blobs (default: one per ring).
    #[arg(long, value_parser = parse_count)]
    pub sources: Option<usize>,
    /// Standard deviation of each source blob.
    #[arg(long, default_value_t = 0.4)]
    pub spread: f64,
    /// Directions used for the per-ring SW₂ in trace.csv.
    #[arg(long, default_value_t = 2000, value_parser = parse_count)]
    pub eval_projections: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FlowArgs {
    /// CSV file or idx:IMAGES:LABELS.
    #[arg(long)]
    pub source: String,
    /// CSV file or idx:IMAGES:LABELS.
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub reweight: ReweightFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DistillArgs {
    /// CSV file or idx:IMAGES:LABELS.
    #[arg(long)]
    pub target: String,
    /// Synthetic points per class.
    #[arg(long, value_parser = parse_count)]
    pub per_class: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MatchArgs {
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputFlags,
    /// Seed for IDX sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write match.txt and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: String,
    /// Number of clouds.
    #[arg(long = "C", default_value_t = 3, value_parser = parse_count)]
    #[serde(rename = "C")]
    pub clouds: usize,
    /// Points per cloud.
    #[arg(long, default_value_t = 5, value_parser = parse_count)]
    pub n: usize,
    #[arg(long, default_value_t = 2, value_parser = parse_count)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64, value_parser = parse_count)]
    pub projections: usize,
    /// Pass threshold on the max relative error.
    #[arg(long, default_value_t = 1e-4, value_parser = parse_positive)]
    pub tol: f64,
    /// Also write report.json and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RerunArgs {
    /// manifest.json of the run to repeat.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fresh output directory for the repeat.
    #[arg(long)]
    pub out: PathBuf,
}

/// Spells out a serialized configuration as command-line flags.
pub fn canonical_args(command: &str, config: &serde_json::Value) -> Vec<String> {
    let mut args = vec![TOOL.to_string(), command.to_string()];
    if let serde_json::Value::Object(map) = config {
        for (key, value) in map {
            match value {
                serde_json::Value::Null | serde_json::Value::Bool(false) => {}
                serde_json::Value::Bool(true) => args.push(format!("--{key}")),
                serde_json::Value::String(s) => args.extend([format!("--{key}"), s.clone()]),
                other => args.extend([format!("--{key}"), other.to_string()]),
            }
        }
    }
    args
}

fn init_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        // A pool may already exist when `run` is called more than once in a process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Parses `argv` (program name first) and runs the command, printing reports to `out`.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{}", e.render()).map_err(CliError::io("<stdout>"))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    init_threads(cli.threads);
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Rings(a) => commands::rings(&a, out),
        Command::Flow(a) => commands::flow(&a, out),
        Command::Distill(a) => commands::distill(&a, out),
        Command::Match(a) => commands::match_datasets(&a, out),
        Command::Gradcheck(a) => commands::gradcheck(&a, out),
        Command::Rerun(a) => commands::rerun(&a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(args)
    }

    #[test]
    fn canonical_args_reparse_to_the_same_config() {
        let cli = parse(&["wowflow", "rings", "--kernel", "gaussian:h=0.05", "--lr", "0.3", "--reweight", "--out", "x"]).unwrap();
        let Command::Rings(a) = cli.command else { panic!() };
        let config = serde_json::to_value(&a).unwrap();
        let argv = canonical_args("rings", &config);
        let Command::Rings(b) = parse(&argv.iter().map(String::as_str).collect::<Vec<_>>()).unwrap().command else {
            panic!()
        };
        assert_eq!(a, b);
        assert_eq!(serde_json::from_value::<RingsArgs>(config).unwrap(), a);
    }

    #[test]
    fn gradcheck_flag_names_match_config_keys() {
        let Command::Gradcheck(a) = parse(&["wowflow", "gradcheck", "--kernel", "imq:c=1", "--C", "4"]).unwrap().command else {
            panic!()
        };
        assert_eq!(a.clouds, 4);
        let argv = canonical_args("gradcheck", &serde_json::to_value(&a).unwrap());
        assert!(argv.windows(2).any(|w| w == ["--C", "4"]));
        let Command::Gradcheck(b) = parse(&argv.iter().map(String::as_str).collect::<Vec<_>>()).unwrap().command else {
            panic!()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn usage_errors() {
        for bad in [
            vec!["wowflow", "rings", "--kernel", "cauchy:h=1", "--out", "x"],
            vec!["wowflow", "rings", "--momentum", "1.0", "--out", "x"],
            vec!["wowflow", "gradcheck", "--kernel", "gaussian:h=0"],
            vec!["wowflow", "rings", "--lr", "-1", "--out", "x"],
            vec!["wowflow", "frobnicate"],
        ] {
            let err = run(bad.clone(), &mut Vec::new()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad:?}: {err}");
        }
    }

    #[test]
    fn help_is_not_an_error() {
        let mut out = Vec::new();
        run(["wowflow", "--help"], &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("rings"));
    }
}
