//! Command-line robustness verifier for fully-connected ReLU networks.
//!
//! Exit codes: 0 = property holds (or no property was asked), 1 = unknown,
//! 2 = input or configuration error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use relucert_cli::formats::{Dataset, Query, Verdict};
use relucert_cli::{
    error_term_for_export, run_query, run_robustness_suite, ModeChoice, RunConfig, TOOL_NAME,
    VERSION,
};
use relucert_core::bounds::{AlphaPolicy, Concretization, EngineConfig, Mode};
use relucert_core::mip::export_lp_text;
use relucert_core::network::{load_network, Network};
use relucert_core::oracle::{enumerate_network_extremes, sample_extremes};

/// Environment variable overriding the default per-neuron MIP budget.
/// Precedence: command-line flag, then this variable, then the built-in 500.
const BUDGET_ENV: &str = "RELUCERT_MIP_BUDGET_MS";

#[derive(Parser)]
#[command(name = TOOL_NAME, version = VERSION, about = "Bound tightening and robustness certification for ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound a query objective and decide its property.
    Verify(VerifyArgs),
    /// Prove robustness of labeled points under epsilon perturbations.
    Suite(SuiteArgs),
    /// Write one relaxation-error subproblem as an LP-format MIP file.
    ExportMip(ExportArgs),
    /// Exact range of a tiny network by phase enumeration (debugging aid).
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Interval,
    Symbolic,
    Minimip,
    Deepmip,
    Cascade,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConcretizeArg {
    /// Closed-form box concretization at every depth.
    Box,
    /// One-ReLU-deep exact solves at every depth (DeepMIP default).
    Mip,
}

#[derive(Args)]
struct EngineArgs {
    /// Bound computation mode.
    #[arg(long, value_enum, default_value = "cascade")]
    mode: ModeArg,
    /// Alpha heuristic for lower triangle edges: crown, zero, one, or
    /// file:PATH with per-layer values {"1": [..], "2": [..]}.
    #[arg(long, default_value = "crown")]
    alpha: String,
    /// Per-neuron MIP time budget in milliseconds.
    #[arg(long)]
    mip_budget_ms: Option<u64>,
    /// DeepMIP concretization strategy.
    #[arg(long, value_enum, default_value = "mip")]
    concretize: ConcretizeArg,
    /// Relative convergence tolerance of the shallow solver.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Seed for witness search and sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Run all four modes and emit a bound-comparison table.
    #[arg(long)]
    compare: bool,
    /// Include per-layer neuron bounds in the report.
    #[arg(long)]
    verbose: bool,
    /// Write the JSON report here in addition to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    network: PathBuf,
    /// Labeled dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Perturbation radius.
    #[arg(long)]
    epsilon: f64,
    #[command(flatten)]
    engine: EngineArgs,
    /// Wall-clock cap per point and mode, applied between competitor
    /// queries; a capped point counts as unsolved.
    #[arg(long)]
    per_query_timeout_ms: Option<u64>,
    /// Write the JSON summary here in addition to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Activation layer whose relaxation error to export.
    #[arg(long)]
    layer: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Output neuron to range.
    #[arg(long, default_value_t = 0)]
    out_index: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_alpha(text: &str) -> Result<AlphaPolicy> {
    match text {
        "crown" => Ok(AlphaPolicy::CrownHeuristic),
        "zero" => Ok(AlphaPolicy::FixedZero),
        "one" => Ok(AlphaPolicy::FixedOne),
        other => {
            let path = other.strip_prefix("file:").ok_or_else(|| {
                anyhow!("unknown alpha policy {other:?} (crown|zero|one|file:PATH)")
            })?;
            let text =
                fs::read_to_string(path).with_context(|| format!("reading alpha file {path}"))?;
            let raw: BTreeMap<String, Vec<f64>> =
                serde_json::from_str(&text).context("alpha file must map layer index to values")?;
            let mut map = BTreeMap::new();
            for (k, v) in raw {
                let layer: usize = k.parse().with_context(|| format!("bad layer key {k:?}"))?;
                map.insert(layer, v);
            }
            let policy = AlphaPolicy::Explicit(map);
            policy.validate().map_err(|e| anyhow!("{e}"))?;
            Ok(policy)
        }
    }
}

fn budget_from(args: &EngineArgs) -> Result<u64> {
    if let Some(ms) = args.mip_budget_ms {
        return Ok(ms);
    }
    if let Ok(text) = std::env::var(BUDGET_ENV) {
        return text
            .parse()
            .with_context(|| format!("{BUDGET_ENV}={text:?} is not a duration in ms"));
    }
    Ok(EngineConfig::default().mip_budget_ms)
}

fn run_config(args: &EngineArgs) -> Result<RunConfig> {
    let choice = match args.mode {
        ModeArg::Interval => ModeChoice::Single(Mode::Interval),
        ModeArg::Symbolic => ModeChoice::Single(Mode::Symbolic),
        ModeArg::Minimip => ModeChoice::Single(Mode::MiniMip),
        ModeArg::Deepmip => ModeChoice::Single(Mode::DeepMip),
        ModeArg::Cascade => ModeChoice::Cascade,
    };
    let engine = EngineConfig {
        mode: Mode::Symbolic, // replaced per executed mode
        alpha: parse_alpha(&args.alpha)?,
        mip_budget_ms: budget_from(args)?,
        concretization: match args.concretize {
            ConcretizeArg::Box => Concretization::Box,
            ConcretizeArg::Mip => Concretization::ShallowMip,
        },
        tolerance: args.tol,
    };
    if args.workers > 0 {
        // Ignore the error if a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build_global();
    }
    Ok(RunConfig {
        engine,
        choice,
        compare: false,
        seed: args.seed,
        workers: args.workers,
        verbose: false,
    })
}

fn read_network(path: &Path) -> Result<Network> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading network {}", path.display()))?;
    load_network(&text).map_err(|e| anyhow!("loading network {}: {e}", path.display()))
}

fn read_query(path: &Path) -> Result<Query> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading query {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("parsing query {}: {e}", path.display()))
}

fn emit(json: &str, report_path: Option<&Path>) -> Result<()> {
    println!("{json}");
    if let Some(path) = report_path {
        // Atomic per-report write: temp file in place, then rename.
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, json).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let net = read_network(&args.network)?;
    let query = read_query(&args.query)?;
    let mut rc = run_config(&args.engine)?;
    rc.compare = args.compare;
    rc.verbose = args.verbose;
    let report = run_query(&net, &query, &rc)?;
    emit(
        &serde_json::to_string_pretty(&report)?,
        args.report.as_deref(),
    )?;
    Ok(match report.verdict {
        Some(Verdict::Unknown) => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_suite(args: SuiteArgs) -> Result<ExitCode> {
    let net = read_network(&args.network)?;
    let text = fs::read_to_string(&args.data)
        .with_context(|| format!("reading dataset {}", args.data.display()))?;
    let dataset: Dataset = serde_json::from_str(&text)
        .map_err(|e| anyhow!("parsing dataset {}: {e}", args.data.display()))?;
    if args.epsilon < 0.0 || !args.epsilon.is_finite() {
        bail!("epsilon must be finite and non-negative");
    }
    let rc = run_config(&args.engine)?;
    let modes: Vec<Mode> = match rc.choice {
        ModeChoice::Single(m) => vec![m],
        ModeChoice::Cascade => Mode::ALL.to_vec(),
    };
    let report = run_robustness_suite(
        &net,
        &dataset,
        args.epsilon,
        &modes,
        &rc,
        args.per_query_timeout_ms,
    )?;
    emit(
        &serde_json::to_string_pretty(&report)?,
        args.report.as_deref(),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(args: ExportArgs) -> Result<ExitCode> {
    let net = read_network(&args.network)?;
    let query = read_query(&args.query)?;
    let term = error_term_for_export(&net, &query, args.layer)?;
    let text = export_lp_text(&term.problem);
    fs::write(&args.out, &text).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote layer-{} error subproblem ({} variables, {} relu terms) to {}",
        args.layer,
        term.problem.dim(),
        term.problem.relu_terms.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    let net = read_network(&args.network)?;
    let query = read_query(&args.query)?;
    let dom = query
        .domain
        .to_box(None)
        .map_err(|e| anyhow!("invalid query domain: {e}"))?;
    let (lo, hi) =
        enumerate_network_extremes(&net, &dom, args.out_index).map_err(|e| anyhow!("{e}"))?;
    let (slo, shi) = sample_extremes(&net, &dom, args.out_index, args.samples, args.seed);
    println!(
        "{}",
        serde_json::json!({
            "exact": {"min": lo, "max": hi},
            "sampled": {"min": slo, "max": shi, "samples": args.samples, "seed": args.seed},
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Suite(args) => cmd_suite(args),
        Command::ExportMip(args) => cmd_export(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
