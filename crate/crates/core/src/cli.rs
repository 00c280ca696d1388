//! The `ctxfuse` command line: `run`, `sweep` and `report`.
//!
//! Exit codes: 0 on success, 1 on invalid input (including missing input files),
//! 2 on other I/O failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gating::GateKind;
use crate::optimizer::{pareto_sweep_gates, JointWeights};
use crate::profile::{ProfileDataset, SystemProfile};
use crate::report::{
    aggregate_by_context, load_steps_csv, to_json_string, write_pareto_csv, write_scenario_csv,
    write_steps_csv,
};
use crate::runtime::{run_trace, RunParams, DEFAULT_T_C};
use crate::scenario::{bundled_scenario, generate_trace, parse_segments, SimulationTrace};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "CTXFUSE_OUT";

#[derive(Debug, Parser)]
#[command(name = "ctxfuse", version, about = "Context-aware sensor fusion simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the controller over one trace.
    Run(RunArgs),
    /// Sweep lambda_e (and optionally gates) over one trace.
    Sweep(SweepArgs),
    /// Aggregate a steps.csv per context.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Profile JSON path or bundled profile name.
    #[arg(long, default_value = ProfileDataset::DEFAULT)]
    pub profile: String,
    /// Trace JSONL path.
    #[arg(long, conflicts_with = "generate")]
    pub trace: Option<PathBuf>,
    /// Generate a trace from segments, e.g. `fog:30,snow:60`. Without --trace or
    /// --generate the bundled scenario is used.
    #[arg(long)]
    pub generate: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Context identification interval in steps.
    #[arg(long, default_value_t = DEFAULT_T_C)]
    pub tc: usize,
    /// Candidate margin; defaults to the profile's value.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "ctxfuse-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "estimator")]
    pub gate: GateKind,
    #[arg(long = "lambda-e", default_value_t = 0.0)]
    pub lambda_e: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Comma-separated lambda_e values.
    #[arg(long)]
    pub lambdas: String,
    /// Comma-separated gates.
    #[arg(long, default_value = "estimator")]
    pub gates: String,
    /// Format of the table printed to stdout.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// steps.csv from a previous run.
    #[arg(long)]
    pub steps: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = "ctxfuse-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

/// Content hash of an input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub source: String,
    pub sha256: String,
}

/// Everything needed to re-run an experiment bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest<A: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: A,
    pub seed: u64,
    pub profile: InputDigest,
    pub trace: InputDigest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Resolves `--profile` as a file path first, then as a bundled name.
pub fn resolve_profile(arg: &str) -> Result<(SystemProfile, InputDigest)> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let profile = SystemProfile::from_json_str(&text, &path.display().to_string())?;
        return Ok((
            profile,
            InputDigest {
                source: path.display().to_string(),
                sha256: sha256_hex(text.as_bytes()),
            },
        ));
    }
    if let Some(text) = ProfileDataset::source(arg) {
        let profile = SystemProfile::from_json_str(text, &format!("bundled:{arg}"))?;
        return Ok((
            profile,
            InputDigest {
                source: format!("bundled:{arg}"),
                sha256: sha256_hex(text.as_bytes()),
            },
        ));
    }
    Err(Error::Config(format!(
        "profile `{arg}` is neither a file nor a bundled profile ({})",
        ProfileDataset::names().join(", ")
    )))
}

fn resolve_trace(common: &CommonArgs, profile: &SystemProfile) -> Result<(SimulationTrace, String)> {
    if let Some(path) = &common.trace {
        if !path.is_file() {
            return Err(Error::Config(format!("trace `{}` not found", path.display())));
        }
        return Ok((SimulationTrace::load(path)?, path.display().to_string()));
    }
    if let Some(spec) = &common.generate {
        let segments = parse_segments(spec)?;
        return Ok((
            generate_trace(&segments, profile, common.seed)?,
            format!("generate:{spec}"),
        ));
    }
    Ok((bundled_scenario(profile)?, "bundled-scenario".into()))
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn base_params(common: &CommonArgs, profile: &SystemProfile, gate: GateKind, lambda_e: f64) -> Result<RunParams> {
    let gamma = common.gamma.unwrap_or(profile.optimizer_params().gamma);
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::invalid("--gamma", "must be >= 0"));
    }
    if common.tc == 0 {
        return Err(Error::invalid("--tc", "must be >= 1"));
    }
    Ok(RunParams {
        gate,
        weights: JointWeights::new(lambda_e)?,
        gamma,
        t_c: common.tc,
        seed: common.seed,
    })
}

fn parse_list<T>(raw: &str, field: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid(field, "list is empty"));
    }
    Ok(items)
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let (profile, profile_digest) = resolve_profile(&args.common.profile)?;
    let params = base_params(&args.common, &profile, args.gate, args.lambda_e)?;
    let (trace, trace_source) = resolve_trace(&args.common, &profile)?;
    let out = run_trace(&trace, &profile, &params)?;

    let dir = &args.common.out;
    create_out_dir(dir)?;
    let mut steps = Vec::new();
    write_steps_csv(&out.records, &mut steps)?;
    write_out(dir, "steps.csv", &steps)?;
    write_out(dir, "summary.json", to_json_string(&out.summary).as_bytes())?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "run",
        args: args.clone(),
        seed: args.common.seed,
        profile: profile_digest,
        trace: InputDigest {
            source: trace_source,
            sha256: sha256_hex(trace.to_jsonl().as_bytes()),
        },
    };
    write_out(dir, "manifest.json", to_json_string(&manifest).as_bytes())?;
    println!(
        "{} steps, avg loss {}, avg energy {} J, {} switches -> {}",
        out.summary.steps,
        out.summary.avg_loss,
        out.summary.avg_energy_j,
        out.summary.switch_count,
        dir.display()
    );
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let lambdas = parse_list(&args.lambdas, "--lambdas", |s| {
        s.parse::<f64>()
            .map_err(|_| Error::invalid("--lambdas", format!("`{s}` is not a number")))
    })?;
    let gates = parse_list(&args.gates, "--gates", |s| s.parse::<GateKind>())?;
    let (profile, profile_digest) = resolve_profile(&args.common.profile)?;
    let base = base_params(&args.common, &profile, gates[0], 0.0)?;
    for l in &lambdas {
        JointWeights::new(*l)?;
    }
    let (trace, trace_source) = resolve_trace(&args.common, &profile)?;
    let points = pareto_sweep_gates(&trace, &profile, &gates, &lambdas, &base)?;

    let dir = &args.common.out;
    create_out_dir(dir)?;
    let mut csv = Vec::new();
    write_pareto_csv(&points, &mut csv)?;
    write_out(dir, "pareto.csv", &csv)?;
    let json = to_json_string(&points);
    write_out(dir, "pareto.json", json.as_bytes())?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "sweep",
        args: args.clone(),
        seed: args.common.seed,
        profile: profile_digest,
        trace: InputDigest {
            source: trace_source,
            sha256: sha256_hex(trace.to_jsonl().as_bytes()),
        },
    };
    write_out(dir, "manifest.json", to_json_string(&manifest).as_bytes())?;
    match args.format {
        OutputFormat::Csv => print!("{}", String::from_utf8_lossy(&csv)),
        OutputFormat::Json => print!("{json}"),
    }
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    if !args.steps.is_file() {
        return Err(Error::Config(format!("steps file `{}` not found", args.steps.display())));
    }
    let records = load_steps_csv(&args.steps)?;
    let rows = aggregate_by_context(&records);
    create_out_dir(&args.out)?;
    let mut csv = Vec::new();
    write_scenario_csv(&rows, &mut csv)?;
    write_out(&args.out, "scenario.csv", &csv)?;
    match args.format {
        OutputFormat::Csv => print!("{}", String::from_utf8_lossy(&csv)),
        OutputFormat::Json => print!("{}", to_json_string(&rows)),
    }
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        2
    } else {
        1
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
