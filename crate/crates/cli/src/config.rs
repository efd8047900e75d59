//! Scenario files: flat `key = value` text with dotted section prefixes.
//!
//! ```text
//! # Case I
//! policy.kind = cp
//! policy.q = 100
//! rate.gamma_gap_db = 3
//! sweep.probe_powers = 1..20
//! ```
//!
//! Values are numbers, bare words, comma lists (`1, 2.5, 4`) or inclusive
//! ranges (`1..20`, `0..8:0.5`). Every error names the key it came from.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hfss_core::channel::ChannelState;
use hfss_core::pr_link::{PolicyKind, PowerPolicy, PrLink, RateFunction};
use hfss_core::protocol::TimingConfig;
use hfss_core::scalar::{db_to_linear, linear_to_db};
use hfss_core::sensing::SensingConfig;
use hfss_core::sim::{ScheduleConfig, DEFAULT_TRIALS};
use hfss_core::supervised::PenaltyBudget;
use hfss_core::Scenario;
use thiserror::Error;

use crate::output::fmt_num;

pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "HFSS_SEED";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` is set twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {reason} (got `{value}`)")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

const KEYS: &[&str] = &[
    "scenario.id",
    "seed",
    "channel.h_p",
    "channel.h_c",
    "channel.h_cp",
    "channel.h_pc",
    "channel.h_pc_tilde",
    "channel.sigma_p2",
    "channel.sigma_c2",
    "policy.kind",
    "policy.q",
    "policy.snr_target",
    "policy.gamma_threshold",
    "policy.mu",
    "policy.gap_in_policy",
    "rate.gamma_gap_db",
    "rate.bit_granularity",
    "cr.gamma_gap_db",
    "sensing.m_samples",
    "sensing.p_max",
    "sensing.zeta",
    "timing.tau_p",
    "timing.tau_pc",
    "timing.tau_cp",
    "timing.tau_max",
    "timing.t_p",
    "timing.block_len",
    "timing.resensing_len",
    "timing.data_len",
    "variation.ratio_lo",
    "variation.ratio_hi",
    "sweep.probe_powers",
    "sweep.data_powers",
    "plan.probe_power",
    "plan.cr_power_cap",
    "budget.kind",
    "budget.value",
    "mc.trials",
];

/// Raw key/value pairs in file order.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    text: body.to_string(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    text: body.to_string(),
                });
            }
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey(k.to_string()));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    line: line_no,
                    key: k.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn has_section(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| parse_num(key, v)).transpose()
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn required(&self, key: &str) -> Result<f64, ConfigError> {
        self.num(key)?
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| bad(key, v, "expected a non-negative integer"))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            None | Some("false") | Some("off") | Some("no") => Ok(false),
            Some("true") | Some("on") | Some("yes") => Ok(true),
            Some(v) => Err(bad(key, v, "expected true or false")),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get(key).map_or(Ok(Vec::new()), |v| parse_list(key, v))
    }
}

fn parse_num(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| bad(key, v, "expected a number"))?;
    if x.is_nan() {
        return Err(bad(key, v, "expected a number"));
    }
    Ok(x)
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if let Some((start, rest)) = v.split_once("..") {
        let (stop, step) = match rest.split_once(':') {
            Some((stop, step)) => (stop, parse_num(key, step.trim())?),
            None => (rest, 1.0),
        };
        let (start, stop) = (parse_num(key, start.trim())?, parse_num(key, stop.trim())?);
        return inclusive_range(start, stop, step).map_err(|reason| bad(key, v, reason));
    }
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// `start, start + step, ...` up to and including `stop` (within rounding).
pub fn inclusive_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, &'static str> {
    if !(start.is_finite() && stop.is_finite()) {
        return Err("range ends must be finite");
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err("range step must be positive");
    }
    if stop < start {
        return Err("range is reversed");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 10_000_000 {
        return Err("range has too many points");
    }
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

/// Scenario with the seed resolution left to the caller.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub scenario: Scenario,
    pub seed: Option<u64>,
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        build(&RawConfig::parse(text)?)
    }
}

/// Flag, then config, then `HFSS_SEED`, then [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, ConfigError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| bad(SEED_ENV, &v, "expected a non-negative integer")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn build(raw: &RawConfig) -> Result<LoadedConfig, ConfigError> {
    let d = ChannelState::<f64>::reference();
    let channel = ChannelState {
        h_p: raw.num_or("channel.h_p", d.h_p)?,
        h_c: raw.num_or("channel.h_c", d.h_c)?,
        h_cp: raw.num_or("channel.h_cp", d.h_cp)?,
        h_pc: raw.num_or("channel.h_pc", d.h_pc)?,
        h_pc_tilde: raw.num_or("channel.h_pc_tilde", d.h_pc_tilde)?,
        sigma_p2: raw.num_or("channel.sigma_p2", d.sigma_p2)?,
        sigma_c2: raw.num_or("channel.sigma_c2", d.sigma_c2)?,
    };

    let kind_text = raw
        .get("policy.kind")
        .ok_or_else(|| ConfigError::Missing("policy.kind".into()))?;
    let kind: PolicyKind = kind_text
        .parse()
        .map_err(|_| bad("policy.kind", kind_text, "expected cp, tci or wf"))?;
    let policy_keys: &[&str] = match kind {
        PolicyKind::Cp => &["policy.q"],
        PolicyKind::Tci => &["policy.snr_target", "policy.gamma_threshold"],
        PolicyKind::Wf => &["policy.mu"],
    };
    for k in [
        "policy.q",
        "policy.snr_target",
        "policy.gamma_threshold",
        "policy.mu",
    ] {
        if raw.get(k).is_some() && !policy_keys.contains(&k) {
            return Err(bad(
                k,
                raw.get(k).unwrap_or_default(),
                format!("not a parameter of the {kind} policy"),
            ));
        }
    }
    let policy = match kind {
        PolicyKind::Cp => PowerPolicy::ConstantPower {
            q: raw.required("policy.q")?,
        },
        PolicyKind::Tci => PowerPolicy::TruncatedInversion {
            snr_target: raw.required("policy.snr_target")?,
            gamma_threshold: raw.required("policy.gamma_threshold")?,
        },
        PolicyKind::Wf => PowerPolicy::WaterFilling {
            mu: raw.required("policy.mu")?,
        },
    };
    let rate_fn = RateFunction {
        gamma_gap: db_to_linear(raw.num_or("rate.gamma_gap_db", 0.0)?),
        bit_granularity: raw.num_or("rate.bit_granularity", 0.0)?,
    };
    let link = PrLink::new(policy, rate_fn).with_gap_in_policy(raw.flag("policy.gap_in_policy")?);

    let id = raw.get("scenario.id").unwrap_or("scenario");
    let mut sc = Scenario::new(id, channel, link);
    sc.gamma_gap_c = db_to_linear(raw.num_or("cr.gamma_gap_db", 0.0)?);

    if raw.has_section("sensing.") {
        sc.sensing = Some(SensingConfig {
            m_samples: raw
                .count("sensing.m_samples")?
                .ok_or_else(|| ConfigError::Missing("sensing.m_samples".into()))?,
            sigma_c2: channel.sigma_c2,
            p_max: raw.required("sensing.p_max")?,
            zeta: raw.required("sensing.zeta")?,
        });
    }
    if raw.has_section("timing.") {
        sc.schedule = Some(ScheduleConfig {
            timing: TimingConfig {
                tau_p: raw.required("timing.tau_p")?,
                tau_pc: raw.required("timing.tau_pc")?,
                tau_cp: raw.required("timing.tau_cp")?,
                tau_max: raw.required("timing.tau_max")?,
                t_p: raw.required("timing.t_p")?,
            },
            block_len: raw.required("timing.block_len")?,
            resensing_len: raw.required("timing.resensing_len")?,
            data_len: raw.required("timing.data_len")?,
        });
    }
    if raw.has_section("variation.") {
        sc.ratio_bounds = Some((
            raw.required("variation.ratio_lo")?,
            raw.required("variation.ratio_hi")?,
        ));
    }
    sc.probe_powers = raw.list("sweep.probe_powers")?;
    sc.data_powers = raw.list("sweep.data_powers")?;
    sc.plan_probe_power = raw.num("plan.probe_power")?;
    sc.cr_power_cap = raw.num("plan.cr_power_cap")?;
    if raw.has_section("budget.") {
        let value = raw.required("budget.value")?;
        let kind = raw
            .get("budget.kind")
            .ok_or_else(|| ConfigError::Missing("budget.kind".into()))?;
        sc.budget = Some(match kind {
            "rate_loss" => PenaltyBudget::RateLoss { max_bits: value },
            "power_penalty" => PenaltyBudget::PowerPenalty { max_db: value },
            other => {
                return Err(bad(
                    "budget.kind",
                    other,
                    "expected rate_loss or power_penalty",
                ))
            }
        });
    }
    sc.trials = raw.count("mc.trials")?.unwrap_or(DEFAULT_TRIALS);
    let seed = raw
        .get("seed")
        .map(|v| {
            v.parse::<u64>()
                .map_err(|_| bad("seed", v, "expected a non-negative integer"))
        })
        .transpose()?;
    Ok(LoadedConfig { scenario: sc, seed })
}

fn list_text(xs: &[f64]) -> String {
    xs.iter()
        .map(|&x| fmt_num(x))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Every setting of `sc`, defaults included, as `key = value` lines in key
/// order. Parsing the result yields the same scenario.
pub fn normalized(sc: &Scenario) -> Vec<(&'static str, String)> {
    let mut out: Vec<(&'static str, String)> = Vec::new();
    let ch = &sc.channel;
    out.push(("scenario.id", sc.id.clone()));
    out.push(("seed", sc.seed.to_string()));
    for (k, v) in [
        ("channel.h_p", ch.h_p),
        ("channel.h_c", ch.h_c),
        ("channel.h_cp", ch.h_cp),
        ("channel.h_pc", ch.h_pc),
        ("channel.h_pc_tilde", ch.h_pc_tilde),
        ("channel.sigma_p2", ch.sigma_p2),
        ("channel.sigma_c2", ch.sigma_c2),
    ] {
        out.push((k, fmt_num(v)));
    }
    out.push(("policy.kind", sc.link.policy.kind().as_str().to_string()));
    match sc.link.policy {
        PowerPolicy::ConstantPower { q } => out.push(("policy.q", fmt_num(q))),
        PowerPolicy::TruncatedInversion {
            snr_target,
            gamma_threshold,
        } => {
            out.push(("policy.snr_target", fmt_num(snr_target)));
            out.push(("policy.gamma_threshold", fmt_num(gamma_threshold)));
        }
        PowerPolicy::WaterFilling { mu } => out.push(("policy.mu", fmt_num(mu))),
    }
    out.push(("policy.gap_in_policy", sc.link.gap_in_policy.to_string()));
    out.push((
        "rate.gamma_gap_db",
        fmt_num(linear_to_db(sc.link.rate_fn.gamma_gap)),
    ));
    out.push((
        "rate.bit_granularity",
        fmt_num(sc.link.rate_fn.bit_granularity),
    ));
    out.push(("cr.gamma_gap_db", fmt_num(linear_to_db(sc.gamma_gap_c))));
    if let Some(s) = &sc.sensing {
        out.push(("sensing.m_samples", s.m_samples.to_string()));
        out.push(("sensing.p_max", fmt_num(s.p_max)));
        out.push(("sensing.zeta", fmt_num(s.zeta)));
    }
    if let Some(s) = &sc.schedule {
        let t = &s.timing;
        for (k, v) in [
            ("timing.tau_p", t.tau_p),
            ("timing.tau_pc", t.tau_pc),
            ("timing.tau_cp", t.tau_cp),
            ("timing.tau_max", t.tau_max),
            ("timing.t_p", t.t_p),
            ("timing.block_len", s.block_len),
            ("timing.resensing_len", s.resensing_len),
            ("timing.data_len", s.data_len),
        ] {
            out.push((k, fmt_num(v)));
        }
    }
    if let Some((lo, hi)) = sc.ratio_bounds {
        out.push(("variation.ratio_lo", fmt_num(lo)));
        out.push(("variation.ratio_hi", fmt_num(hi)));
    }
    out.push(("sweep.probe_powers", list_text(&sc.probe_powers)));
    if !sc.data_powers.is_empty() {
        out.push(("sweep.data_powers", list_text(&sc.data_powers)));
    }
    if let Some(p) = sc.plan_probe_power {
        out.push(("plan.probe_power", fmt_num(p)));
    }
    if let Some(p) = sc.cr_power_cap {
        out.push(("plan.cr_power_cap", fmt_num(p)));
    }
    if let Some(b) = &sc.budget {
        out.push(("budget.kind", b.name().to_string()));
        out.push(("budget.value", fmt_num(b.value())));
    }
    out.push(("mc.trials", sc.trials.to_string()));
    out.sort_by_key(|(k, _)| *k);
    out
}

pub fn normalized_text(sc: &Scenario) -> String {
    let mut s = String::new();
    for (k, v) in normalized(sc) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}
