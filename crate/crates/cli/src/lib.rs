//! Scenario runner for hidden-feedback spectrum sharing: loads config files,
//! runs learning and transmission sweeps, and writes CSV or JSON tables.

pub mod config;
pub mod output;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hfss_core::channel::ChannelState;
use hfss_core::pr_link::{PolicyKind, PowerPolicy, PrLink, RateFunction};
use hfss_core::scalar::db_to_linear;
use hfss_core::sim::{policy_curve, run_full};
pub use hfss_core::Scenario;
use thiserror::Error;

use crate::config::{inclusive_range, normalized_text, resolve_seed, LoadedConfig};
use crate::output::{flatten, fmt_num, write_csv, write_json};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable or invalid config, bad flags.
    #[error("{0}")]
    Config(String),
    /// The scenario ran but could not complete.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hfss",
    version,
    about = "Probe a primary link, bound its penalty, and plan CR transmission"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write the result table.
    Run(RunArgs),
    /// Emit PR power and rate against CR interference power.
    Policies(PolicyArgs),
    /// Check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,
    /// Overrides the config and HFSS_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, value_parser = parse_policy)]
    pub policy: PolicyKind,
    #[arg(long, alias = "Q", default_value_t = 100.0)]
    pub q: f64,
    #[arg(long, default_value_t = 10.0)]
    pub snr_target: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma_threshold: f64,
    #[arg(long, default_value_t = 4.0)]
    pub mu: f64,
    /// PR SNR gap in dB.
    #[arg(long, default_value_t = 0.0)]
    pub gap_db: f64,
    #[arg(long, default_value_t = 0.0)]
    pub bit_granularity: f64,
    #[arg(long)]
    pub gap_in_policy: bool,
    #[arg(long, default_value_t = 1.0)]
    pub h_p: f64,
    #[arg(long, default_value_t = 0.5)]
    pub h_cp: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_p2: f64,
    /// CR power range `START:STOP[:STEP]`; 100 steps by default.
    #[arg(long, default_value = "0:10")]
    pub sweep: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse()
        .map_err(|_| format!("unknown policy `{s}`; expected cp, tci or wf"))
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Policies(a) => cmd_policies(&a),
        Command::Validate { config } => cmd_validate(&config),
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    LoadedConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => fs::File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn violations_text(sc: &Scenario) -> Option<String> {
    let v = sc.violations();
    if v.is_empty() {
        return None;
    }
    Some(
        v.iter()
            .map(|e| format!("  - {e}"))
            .collect::<Vec<_>>()
            .join("\n"),
    )
}

pub fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let loaded = load(&a.config)?;
    let mut sc = loaded.scenario;
    sc.seed = resolve_seed(a.seed, loaded.seed).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(v) = violations_text(&sc) {
        return Err(CliError::Config(format!(
            "{}: invalid scenario\n{v}",
            a.config.display()
        )));
    }
    let res = run_full(&sc).map_err(|e| CliError::Runtime(e.to_string()))?;
    let table = flatten(&res, &sc);
    let mut w = sink(a.out.as_deref())?;
    let io_err = |e: io::Error| CliError::Runtime(format!("write failed: {e}"));
    match a.format {
        OutFormat::Csv => write_csv(&table, &mut w)
            .map_err(|e| CliError::Runtime(format!("write failed: {e}")))?,
        OutFormat::Json => write_json(&table, &mut w).map_err(io_err)?,
    }
    w.flush().map_err(io_err)
}

pub fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let loaded = load(path)?;
    let mut sc = loaded.scenario;
    sc.seed = resolve_seed(None, loaded.seed).map_err(|e| CliError::Config(e.to_string()))?;
    print!("{}", normalized_text(&sc));
    match violations_text(&sc) {
        Some(v) => Err(CliError::Config(format!(
            "{}: invalid scenario\n{v}",
            path.display()
        ))),
        None => Ok(()),
    }
}

/// Parse `START:STOP[:STEP]`.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| format!("bad number `{t}` in sweep `{s}`"))
    };
    let (start, stop) = match parts.as_slice() {
        [a, b] | [a, b, _] => (num(a)?, num(b)?),
        _ => return Err(format!("sweep `{s}` must be START:STOP[:STEP]")),
    };
    let step = match parts.get(2) {
        Some(t) => num(t)?,
        None if stop > start => (stop - start) / 100.0,
        None => 1.0,
    };
    inclusive_range(start, stop, step).map_err(|r| format!("sweep `{s}`: {r}"))
}

pub fn cmd_policies(a: &PolicyArgs) -> Result<(), CliError> {
    let grid = parse_sweep(&a.sweep).map_err(CliError::Config)?;
    let policy = match a.policy {
        PolicyKind::Cp => PowerPolicy::ConstantPower { q: a.q },
        PolicyKind::Tci => PowerPolicy::TruncatedInversion {
            snr_target: a.snr_target,
            gamma_threshold: a.gamma_threshold,
        },
        PolicyKind::Wf => PowerPolicy::WaterFilling { mu: a.mu },
    };
    let rate_fn = RateFunction::new(db_to_linear(a.gap_db), a.bit_granularity)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let link = PrLink::new(policy, rate_fn).with_gap_in_policy(a.gap_in_policy);
    link.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let ch = ChannelState {
        h_p: a.h_p,
        h_cp: a.h_cp,
        sigma_p2: a.sigma_p2,
        ..ChannelState::reference()
    };
    ch.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let mut w = csv::Writer::from_writer(sink(a.out.as_deref())?);
    let err = |e: csv::Error| CliError::Runtime(format!("write failed: {e}"));
    w.write_record(["p_c", "p_p", "r_p"]).map_err(err)?;
    for (p_c, s) in policy_curve(&link, &ch, &grid) {
        w.write_record([fmt_num(p_c), fmt_num(s.p_p), fmt_num(s.r_p)])
            .map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("write failed: {e}")))
}
