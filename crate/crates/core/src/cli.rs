//! Command-line front end.

use crate::metrics::MetricsReport;
use crate::output::{self, OutputError, RunManifest, SweepRow, SweepSpec, MANIFEST_FILE};
use crate::runner::{self, RepetitionOutput, RunError};
use crate::scenario::{
    build_scenario, AccessScheme, AssociationPolicy, Carrier, ConfigError, PowerConstraintPreset, RawConfig, ScenarioConfig,
};
use crate::seed::derive_seed;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mmshare", version, about = "Multi-operator mmWave spectrum access simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run repetitions for one or more access schemes.
    Run(RunArgs),
    /// Run one experiment per value of a swept parameter.
    Sweep(SweepArgs),
    /// Regenerate a result directory from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (TOML). Built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// hybrid, licensed, pooled or all.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// joint or carrier-only.
    #[arg(long)]
    pub policy: Option<String>,
    /// i, ii or iii; replaces antenna and power values from the file.
    #[arg(long)]
    pub preset: Option<String>,
    /// BSs per km² per operator.
    #[arg(long)]
    pub bs_density: Option<f64>,
    /// UEs per km² per operator.
    #[arg(long)]
    pub ue_density: Option<f64>,
    /// Total high-band width, e.g. 2e9, 2GHz, 500MHz.
    #[arg(long)]
    pub high_band_width: Option<String>,
    /// Exit with status 3 if any repetition fails to converge.
    #[arg(long)]
    pub strict_convergence: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// bs_density, ue_density, high_band_width, preset or policy.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown sweep axis '{0}' (expected bs_density, ue_density, high_band_width, preset or policy)")]
    UnknownAxis(String),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot create {path}: {source}")]
    CreateDir { path: String, source: std::io::Error },
    #[error("{0} repetition(s) did not converge")]
    NonConvergence(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Argument(_) | CliError::UnknownAxis(_) => EXIT_CONFIG,
            CliError::NonConvergence(_) => EXIT_NONCONVERGED,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Parse a bandwidth such as `2e9`, `2GHz`, `500 MHz`; bare numbers are Hz.
pub fn parse_hz(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let (num, scale) = [("ghz", 1e9), ("mhz", 1e6), ("khz", 1e3), ("hz", 1.0)]
        .iter()
        .find_map(|(suf, k)| lower.strip_suffix(suf).map(|n| (n.trim().to_string(), *k)))
        .unwrap_or((lower.clone(), 1.0));
    let v: f64 = num
        .parse()
        .map_err(|_| CliError::Argument(format!("cannot parse bandwidth '{t}'")))?;
    let hz = v * scale;
    if !(hz.is_finite() && hz > 0.0) {
        return Err(CliError::Argument(format!("bandwidth must be positive, got '{t}'")));
    }
    Ok(hz)
}

fn parse_f64(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Argument(format!("cannot parse {what} '{s}'")))
}

pub fn parse_schemes(s: &str) -> Result<Vec<AccessScheme>, CliError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(AccessScheme::ALL.to_vec());
    }
    s.split(',')
        .map(|x| AccessScheme::parse(x).ok_or_else(|| CliError::Argument(format!("unknown scheme '{x}'"))))
        .collect()
}

fn parse_policy(s: &str) -> Result<AssociationPolicy, CliError> {
    AssociationPolicy::parse(s).ok_or_else(|| CliError::Argument(format!("unknown policy '{s}'")))
}

fn parse_preset(s: &str) -> Result<PowerConstraintPreset, CliError> {
    PowerConstraintPreset::parse(s).ok_or_else(|| CliError::Argument(format!("unknown preset '{s}'")))
}

/// Run controls after merging flags over the `[run]` table.
#[derive(Debug, Clone)]
pub struct RunControls {
    pub schemes: Vec<AccessScheme>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub strict: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results").join(chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Load the scenario document and apply flags; flags win.
pub fn merged_raw(args: &RunArgs) -> Result<RawConfig, CliError> {
    let mut raw = match &args.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    if let Some(p) = &args.preset {
        raw.set_preset(parse_preset(p)?);
    }
    if let Some(p) = &args.policy {
        raw.association_mut().policy = Some(parse_policy(p)?);
    }
    if let Some(v) = args.bs_density {
        raw.bs_density = Some(v);
    }
    if let Some(v) = args.ue_density {
        raw.ue_density = Some(v);
    }
    if let Some(w) = &args.high_band_width {
        raw.carrier_mut(Carrier::High).total_bandwidth_hz = Some(parse_hz(w)?);
    }
    if let Some(s) = args.seed {
        raw.rng_seed = Some(s);
    }
    if let Some(r) = args.reps {
        raw.repetitions = Some(r);
    }
    Ok(raw)
}

pub fn run_controls(args: &RunArgs, raw: &RawConfig) -> Result<RunControls, CliError> {
    let file = raw.run.clone().unwrap_or_default();
    let schemes = match &args.scheme {
        Some(s) => parse_schemes(s)?,
        None => file.schemes.unwrap_or_else(|| AccessScheme::ALL.to_vec()),
    };
    if schemes.is_empty() {
        return Err(CliError::Argument("no schemes selected".into()));
    }
    let threads = args.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::Argument("--threads must be at least 1".into()));
    }
    Ok(RunControls {
        schemes,
        threads,
        out: args
            .out
            .clone()
            .or(file.output_dir.map(PathBuf::from))
            .unwrap_or_else(default_out_dir),
        strict: args.strict_convergence || file.strict_convergence.unwrap_or(false),
    })
}

/// Apply one sweep value to a raw document.
pub fn apply_axis(raw: &RawConfig, axis: &str, value: &str) -> Result<RawConfig, CliError> {
    let mut out = raw.clone();
    match axis {
        "bs_density" => {
            // keep the UE-per-BS ratio of the base scenario
            let base = build_scenario(raw)?;
            let v = parse_f64(value, "BS density")?;
            out.bs_density = Some(v);
            out.ue_density = Some(v * base.ue_density / base.bs_density);
        }
        "ue_density" => out.ue_density = Some(parse_f64(value, "UE density")?),
        "high_band_width" => out.carrier_mut(Carrier::High).total_bandwidth_hz = Some(parse_hz(value)?),
        "preset" => out.set_preset(parse_preset(value)?),
        "policy" => out.association_mut().policy = Some(parse_policy(value)?),
        other => return Err(CliError::UnknownAxis(other.to_string())),
    }
    Ok(out)
}

/// Seed of sweep point `index`.
pub fn sweep_point_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, &[("sweep_point", index as u64)])
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(p).map_err(|source| CliError::CreateDir {
        path: p.display().to_string(),
        source,
    })
}

fn nonconverged(outputs: &[RepetitionOutput], label: &str) -> Vec<String> {
    outputs
        .iter()
        .flat_map(|o| o.runs.iter())
        .filter(|r| !r.converged)
        .map(|r| format!("{label}{}:{}", r.scheme, r.repetition))
        .collect()
}

fn execute(
    cfg: &ScenarioConfig,
    seed: u64,
    ctl: &RunControls,
    dir: &Path,
) -> Result<(Vec<RepetitionOutput>, MetricsReport), CliError> {
    let outputs = runner::run_repetitions(cfg, &ctl.schemes, cfg.repetitions, seed, ctl.threads)?;
    let report = runner::report(cfg, seed, &outputs);
    output::write_run_outputs(dir, &ctl.schemes, &outputs, &report)?;
    Ok((outputs, report))
}

fn manifest(command: &str, cfg: &ScenarioConfig, ctl: &RunControls, sweep: Option<SweepSpec>) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        schemes: ctl.schemes.clone(),
        seed: cfg.rng_seed,
        repetitions: cfg.repetitions,
        threads: ctl.threads,
        strict_convergence: ctl.strict,
        sweep,
        config_fingerprint: format!("{:016x}", cfg.fingerprint()),
        config: cfg.to_toml(),
        output_dir: ctl.out.clone(),
        started_at: now(),
        finished_at: None,
        status: "running".to_string(),
        nonconverged: Vec::new(),
    }
}

fn finish(mut m: RunManifest, bad: Vec<String>, strict: bool) -> Result<(), CliError> {
    m.finished_at = Some(now());
    m.status = if bad.is_empty() { "complete" } else { "nonconverged" }.to_string();
    let n = bad.len();
    m.nonconverged = bad;
    m.write(&m.output_dir.clone())?;
    if strict && n > 0 {
        return Err(CliError::NonConvergence(n));
    }
    if n > 0 {
        eprintln!("warning: {n} repetition(s) hit the iteration limit");
    }
    Ok(())
}

fn print_summary(report: &MetricsReport, schemes: &[AccessScheme]) {
    for &s in schemes {
        let Some(st) = report.scheme(s) else { continue };
        let p = |q| st.percentile(q).map(|v| format!("{:.4}", v / 1e9)).unwrap_or_else(|_| "NA".into());
        eprintln!("{s:>9}: p5 {} p50 {} p95 {} Gb/s", p(5.0), p(50.0), p(95.0));
    }
}

pub fn cmd_run(raw: &RawConfig, ctl: &RunControls) -> Result<(), CliError> {
    let cfg = build_scenario(raw)?;
    create_dir(&ctl.out)?;
    let m = manifest("run", &cfg, ctl, None);
    m.write(&ctl.out)?;
    let (outputs, report) = execute(&cfg, cfg.rng_seed, ctl, &ctl.out)?;
    print_summary(&report, &ctl.schemes);
    finish(m, nonconverged(&outputs, ""), ctl.strict)
}

fn point_dir_name(axis: &str, index: usize, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{axis}_{index:02}_{clean}")
}

pub fn cmd_sweep(raw: &RawConfig, axis: &str, values: &[String], ctl: &RunControls) -> Result<(), CliError> {
    // validate every point before running anything
    let points: Vec<ScenarioConfig> = values
        .iter()
        .map(|v| build_scenario(&apply_axis(raw, axis, v)?).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let base = build_scenario(raw)?;
    create_dir(&ctl.out)?;
    let m = manifest(
        "sweep",
        &base,
        ctl,
        Some(SweepSpec {
            axis: axis.to_string(),
            values: values.to_vec(),
        }),
    );
    m.write(&ctl.out)?;
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut bad = Vec::new();
    for (idx, (value, cfg)) in values.iter().zip(&points).enumerate() {
        let dir = ctl.out.join(point_dir_name(axis, idx, value));
        create_dir(&dir)?;
        let seed = sweep_point_seed(base.rng_seed, idx);
        eprintln!("{axis} = {value}");
        let (outputs, report) = execute(cfg, seed, ctl, &dir)?;
        print_summary(&report, &ctl.schemes);
        rows.extend(output::sweep_rows(axis, value, &ctl.schemes, &report));
        bad.extend(nonconverged(&outputs, &format!("{value}/")));
    }
    output::write_sweep_summary(&ctl.out.join(output::SWEEP_SUMMARY_FILE), &rows)?;
    finish(m, bad, ctl.strict)
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<(), CliError> {
    let m = RunManifest::read(&args.manifest)?;
    let raw = RawConfig::from_toml(&m.config)?;
    let ctl = RunControls {
        schemes: m.schemes.clone(),
        threads: args.threads.or(m.threads),
        out: args.out.clone().unwrap_or_else(default_out_dir),
        strict: m.strict_convergence,
    };
    match (m.command.as_str(), &m.sweep) {
        ("run", _) => cmd_run(&raw, &ctl),
        ("sweep", Some(s)) => cmd_sweep(&raw, &s.axis, &s.values, &ctl),
        (other, _) => Err(CliError::Argument(format!(
            "{}: cannot replay command '{other}'",
            args.manifest.display()
        ))),
    }
}

fn dispatch(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.command {
        Command::Run(a) => {
            let raw = merged_raw(&a)?;
            let ctl = run_controls(&a, &raw)?;
            cmd_run(&raw, &ctl)?;
            Ok(ctl.out)
        }
        Command::Sweep(a) => {
            let raw = merged_raw(&a.run)?;
            let ctl = run_controls(&a.run, &raw)?;
            cmd_sweep(&raw, &a.axis, &a.values, &ctl)?;
            Ok(ctl.out)
        }
        Command::Replay(a) => {
            cmd_replay(&a)?;
            Ok(a.out.unwrap_or_default())
        }
    }
}

/// Parse `args` and run; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(dir) => {
            if !dir.as_os_str().is_empty() {
                eprintln!("results in {}", dir.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Path of the manifest inside a result directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
