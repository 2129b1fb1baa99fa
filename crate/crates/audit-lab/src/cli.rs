//! The `audit-lab` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use audit_core::instance::{
    population_summary, AuditInstance, ClassifierSpec, LowerBoundInstance, MixtureSpecJson,
    MixtureAuditInstance, SummaryMode,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::config::{ExperimentConfig, Mode, OutputFormat};
use crate::dataset::{ingest_path, Dataset};
use crate::error::{HarnessError, Result};
use crate::lower_bound::run_lower_bound_check;
use crate::results::{emit_results, render};
use crate::sweep::{run_blackbox_sweep, run_mixture_sweep};

#[derive(Debug, Parser)]
#[command(name = "audit-lab", about = "Cost-aware equalized-odds audit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DatasetName {
    Adult,
    Law,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed_offset: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// τ sweep of Baseline and RS-Audit on a tabular instance.
    Blackbox(RunArgs),
    /// ε sweep of RS-Audit and Exp-Audit on separated Gaussian mixtures.
    Mixture(RunArgs),
    /// Exact and scaling checks on the lower-bound instance pairs.
    LowerBound(RunArgs),
    /// Convert a raw Adult or Law School CSV into a dataset file.
    Ingest {
        #[arg(long, value_enum)]
        dataset: DatasetName,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Population quantities of an instance under a classifier, as JSON.
    Summarize {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        /// Monte Carlo draws when no closed form exists.
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Instance files accepted by `summarize`.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum InstanceFile {
    Mixture(MixtureSpecJson),
    LowerBound(LowerBoundInstance),
    Dataset { path: PathBuf },
}

fn load_config(args: &RunArgs, mode: Mode) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if cfg.mode != mode {
        return Err(HarnessError::Config(format!(
            "config mode {:?} does not match the {mode:?} command",
            cfg.mode
        )));
    }
    if let Some(o) = args.seed_offset {
        cfg.seed_offset = o;
    }
    if let Some(p) = &args.out {
        cfg.output = Some(p.clone());
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    Ok(cfg)
}

fn write_rows(cfg: &ExperimentConfig, rows: &[crate::ResultRow]) -> Result<()> {
    match &cfg.output {
        Some(path) => emit_results(rows, path, cfg.format),
        None => {
            std::io::stdout().write_all(&render(rows, cfg.format)?)?;
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn summarize(instance: &Path, classifier: &Path, n: usize, seed: u64) -> Result<String> {
    let inst: Box<dyn AuditInstance> = match read_json::<InstanceFile>(instance)? {
        InstanceFile::Mixture(spec) => Box::new(MixtureAuditInstance::from_spec(spec)?),
        InstanceFile::LowerBound(i) => Box::new(i),
        InstanceFile::Dataset { path } => {
            let path = if path.is_relative() {
                instance.parent().unwrap_or(Path::new(".")).join(path)
            } else {
                path
            };
            Box::new(Dataset::read(&path)?.instance()?)
        }
    };
    let clf = read_json::<ClassifierSpec>(classifier)?.build();
    let summary = population_summary(inst.as_ref(), clf.as_ref(), SummaryMode::Auto { n, seed })?;
    Ok(serde_json::to_string_pretty(&summary)? + "\n")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Blackbox(args) => {
            let cfg = load_config(&args, Mode::Blackbox)?;
            write_rows(&cfg, &run_blackbox_sweep(&cfg)?)
        }
        Command::Mixture(args) => {
            let cfg = load_config(&args, Mode::Mixture)?;
            write_rows(&cfg, &run_mixture_sweep(&cfg)?)
        }
        Command::LowerBound(args) => {
            let cfg = load_config(&args, Mode::LowerBoundCheck)?;
            let (report, rows) = run_lower_bound_check(&cfg)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            match &cfg.output {
                Some(path) => {
                    emit_results(&rows, path, cfg.format)?;
                    std::fs::write(path.with_extension("report.json"), text)?;
                }
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Ingest { dataset, path, out } => {
            let name = match dataset {
                DatasetName::Adult => "adult",
                DatasetName::Law => "law",
            };
            let ds = ingest_path(name, &path)?;
            ds.write(&out)?;
            log::info!("{} rows written to {}", ds.rows.len(), out.display());
            Ok(())
        }
        Command::Summarize {
            instance,
            classifier,
            mc_samples,
            seed,
        } => {
            let text = summarize(&instance, &classifier, mc_samples, seed)?;
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("audit-lab: {e}");
            e.exit_code()
        }
    }
}
