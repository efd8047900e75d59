//! Scenario driver: runs the sense / probe / re-sense / transmit protocol
//! against the PR forward model over sweeps of probe and data powers.
//!
//! Randomness only enters through noisy power sensing. Each sweep point and
//! Monte-Carlo trial draws from its own ChaCha stream keyed by
//! `(seed, stream id)`, so results do not depend on evaluation order and the
//! sweeps run in parallel.

use rand::distr::StandardUniform;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::estimator::{estimate, GainEstimate, Imperfections, ProbeRecord};
use crate::pr_link::{PolicyKind, PrLink, PrState};
use crate::protocol::{verify_coverage, BlockSchedule, TimingConfig};
use crate::scalar::{linear_to_db, Scalar};
use crate::sensing::{sense_power, PrObservation, SensingConfig};
use crate::supervised::{
    cr_rate, plan_transmission, predicted_penalty, PenaltyBudget, PenaltyUnit, PlanContext, TxPlan,
};

pub const DEFAULT_TRIALS: usize = 1000;

/// Timing inputs for laying out the CR block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig<T> {
    pub timing: TimingConfig<T>,
    pub block_len: T,
    pub resensing_len: T,
    pub data_len: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub id: String,
    pub channel: ChannelState<T>,
    pub link: PrLink<T>,
    /// SNR gap of the CR link.
    pub gamma_gap_c: T,
    /// Noisy power sensing; `None` observes powers exactly.
    pub sensing: Option<SensingConfig<T>>,
    pub schedule: Option<ScheduleConfig<T>>,
    /// Range of the sensing-path gain ratio between the sensing stages.
    pub ratio_bounds: Option<(T, T)>,
    pub probe_powers: Vec<T>,
    pub data_powers: Vec<T>,
    /// Probe whose estimate drives planning; defaults to the tightest bounded
    /// upper bound in the sweep.
    pub plan_probe_power: Option<T>,
    pub budget: Option<PenaltyBudget<T>>,
    pub cr_power_cap: Option<T>,
    /// Monte-Carlo trials for calibration runs.
    pub trials: usize,
    pub seed: u64,
}

impl<T: Scalar> ScenarioConfig<T> {
    /// A noiseless scenario with empty sweeps.
    pub fn new(id: impl Into<String>, channel: ChannelState<T>, link: PrLink<T>) -> Self {
        Self {
            id: id.into(),
            channel,
            link,
            gamma_gap_c: T::one(),
            sensing: None,
            schedule: None,
            ratio_bounds: None,
            probe_powers: Vec::new(),
            data_powers: Vec::new(),
            plan_probe_power: None,
            budget: None,
            cr_power_cap: None,
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), Err)
    }

    /// Every violated invariant across the whole scenario.
    pub fn violations(&self) -> Vec<Error> {
        let mut v = self.channel.violations();
        v.extend(self.link.policy.violations());
        v.extend(self.link.rate_fn.violations());
        if !(self.gamma_gap_c >= T::one() && self.gamma_gap_c.is_finite()) {
            v.push(Error::InvalidParameter {
                name: "gamma_gap_c",
                value: self.gamma_gap_c.as_f64(),
                reason: "SNR gap must be finite and at least 1 (0 dB)",
            });
        }
        if let Some(s) = &self.sensing {
            v.extend(s.violations());
        }
        if let Some(s) = &self.schedule {
            v.extend(s.timing.violations());
        }
        if let Some((lo, hi)) = self.ratio_bounds {
            if !(lo > T::zero() && hi >= lo && hi.is_finite()) {
                v.push(Error::InvalidParameter {
                    name: "ratio_bounds",
                    value: lo.as_f64(),
                    reason: "need 0 < ratio_lo <= ratio_hi",
                });
            }
        }
        if self.probe_powers.is_empty() {
            v.push(Error::InvalidSweep("probe power sweep is empty"));
        }
        if self
            .probe_powers
            .iter()
            .any(|&p| !(p > T::zero() && p.is_finite()))
        {
            v.push(Error::InvalidSweep(
                "probe powers must be finite and positive",
            ));
        }
        if self.data_powers.is_empty() && self.budget.is_none() {
            v.push(Error::InvalidSweep(
                "data power sweep is empty and no budget is set",
            ));
        }
        if self
            .data_powers
            .iter()
            .any(|&p| !(p >= T::zero() && p.is_finite()))
        {
            v.push(Error::InvalidSweep(
                "data powers must be finite and non-negative",
            ));
        }
        if let Some(p) = self.plan_probe_power {
            if !self.probe_powers.contains(&p) {
                v.push(Error::InvalidSweep(
                    "planning probe power is not part of the probe sweep",
                ));
            }
        }
        if let Some(b) = &self.budget {
            if let Err(e) = b.validate() {
                v.push(e);
            }
            if let Err(e) = b.check_policy(self.link.policy.kind()) {
                v.push(e);
            }
        }
        if let Some(cap) = self.cr_power_cap {
            if !(cap >= T::zero()) {
                v.push(Error::InvalidParameter {
                    name: "cr_power_cap",
                    value: cap.as_f64(),
                    reason: "power cap must be non-negative",
                });
            }
        }
        v
    }

    fn imperfections(&self) -> Imperfections<'_, T> {
        Imperfections {
            sensing: self.sensing.as_ref(),
            ratio_bounds: self.ratio_bounds,
        }
    }
}

/// Why a probe yielded no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReprobeReason {
    /// The PR was silent before probing; no estimate is needed.
    PrInactive,
    /// The PR rate dropped to zero under the probe; probe with less power.
    PrOutage,
    /// Noisy powers did not clear the confidence margin.
    InsufficientSnr,
}

impl ReprobeReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ReprobeReason::PrInactive => "pr_inactive",
            ReprobeReason::PrOutage => "reprobe_pr_outage",
            ReprobeReason::InsufficientSnr => "reprobe_insufficient_snr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeOutcome<T> {
    Estimate(GainEstimate<T>),
    Reprobe(ReprobeReason),
}

impl<T: Scalar> ProbeOutcome<T> {
    pub fn estimate(&self) -> Option<&GainEstimate<T>> {
        match self {
            ProbeOutcome::Estimate(e) => Some(e),
            ProbeOutcome::Reprobe(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningPoint<T> {
    pub p_c: T,
    /// What the CR observed.
    pub record: ProbeRecord<T>,
    pub outcome: ProbeOutcome<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionPoint<T> {
    pub p_c_d: T,
    /// Loss from the forward model; `None` where it is undefined (TCI outage).
    pub penalty_actual: Option<T>,
    /// Loss predicted from the gain upper bound.
    pub penalty_predicted: T,
    pub r_c: T,
    pub pr_outage: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningChoice<T> {
    pub p_c: T,
    pub estimate: GainEstimate<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub scenario_id: String,
    pub seed: u64,
    pub version: &'static str,
    pub policy: PolicyKind,
    pub penalty_unit: PenaltyUnit,
    pub learning: Vec<LearningPoint<T>>,
    pub planning: Option<PlanningChoice<T>>,
    pub transmission: Vec<TransmissionPoint<T>>,
    pub plan: Option<TxPlan<T>>,
    pub schedule: Option<BlockSchedule<T>>,
}

impl<T: Scalar> SweepResult<T> {
    fn empty(cfg: &ScenarioConfig<T>) -> Self {
        let policy = cfg.link.policy.kind();
        Self {
            scenario_id: cfg.id.clone(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            policy,
            penalty_unit: PenaltyUnit::for_policy(policy),
            learning: Vec::new(),
            planning: None,
            transmission: Vec::new(),
            plan: None,
            schedule: None,
        }
    }
}

/// ChaCha stream for one independent unit of randomness.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const CALIBRATION_STREAMS: u64 = 1 << 63;

fn observe<T: Scalar>(
    cfg: &ScenarioConfig<T>,
    p_c: T,
    stream: u64,
) -> (ProbeRecord<T>, PrState<T>, PrState<T>)
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    let ch = &cfg.channel;
    let before = cfg.link.respond(ch, T::zero());
    let after = cfg.link.respond(ch, p_c);
    let q0 = ch.h_pc_tilde * before.p_p;
    let q1 = ch.h_pc_tilde * after.p_p;
    let (q0, q1) = match &cfg.sensing {
        Some(s) => {
            let mut rng = stream_rng(cfg.seed, stream);
            let a = sense_power(q0, s, &mut rng);
            let b = sense_power(q1, s, &mut rng);
            (a, b)
        }
        None => (q0, q1),
    };
    let rec = ProbeRecord::new(
        PrObservation::new(q0, before.r_p),
        PrObservation::new(q1, after.r_p),
        p_c,
    );
    (rec, before, after)
}

fn learn<T: Scalar>(cfg: &ScenarioConfig<T>, p_c: T, stream: u64) -> Result<LearningPoint<T>>
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    let (record, _, _) = observe(cfg, p_c, stream);
    let outcome = if record.before.r <= T::zero() {
        ProbeOutcome::Reprobe(ReprobeReason::PrInactive)
    } else if record.after.r <= T::zero() {
        ProbeOutcome::Reprobe(ReprobeReason::PrOutage)
    } else {
        match estimate(&record, &cfg.link.rate_fn, cfg.imperfections()) {
            Ok(e) => ProbeOutcome::Estimate(e),
            Err(Error::InsufficientSnr { .. }) => {
                ProbeOutcome::Reprobe(ReprobeReason::InsufficientSnr)
            }
            Err(e) => return Err(e),
        }
    };
    Ok(LearningPoint {
        p_c,
        record,
        outcome,
    })
}

/// Probe at every configured power and record the resulting estimate.
pub fn run_learning_sweep<T: Scalar>(cfg: &ScenarioConfig<T>) -> Result<SweepResult<T>>
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    cfg.validate()?;
    let mut out = SweepResult::empty(cfg);
    if let Some(s) = &cfg.schedule {
        if !verify_coverage(&s.timing) {
            return Err(Error::CoverageViolation);
        }
        out.schedule = Some(BlockSchedule::plan(
            &s.timing,
            s.block_len,
            s.resensing_len,
            s.data_len,
        )?);
    }
    out.learning = cfg
        .probe_powers
        .par_iter()
        .enumerate()
        .map(|(i, &p_c)| learn(cfg, p_c, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(out)
}

/// Estimate used for planning: the configured probe, or the nearest smaller
/// probe with a bounded estimate when that one had to be re-probed.
pub fn select_planning_estimate<T: Scalar>(
    cfg: &ScenarioConfig<T>,
    learning: &[LearningPoint<T>],
) -> Result<PlanningChoice<T>> {
    let bounded = |lp: &LearningPoint<T>| lp.outcome.estimate().filter(|e| e.is_bounded()).copied();
    match cfg.plan_probe_power {
        Some(target) => learning
            .iter()
            .filter(|lp| lp.p_c <= target)
            .filter_map(|lp| bounded(lp).map(|e| (lp.p_c, e)))
            .max_by(|a, b| a.0.partial_cmp(&b.0).expect("finite probe powers"))
            .map(|(p_c, estimate)| PlanningChoice { p_c, estimate })
            .ok_or(Error::NoUsableProbe {
                probe_power: target.as_f64(),
            }),
        None => learning
            .iter()
            .filter_map(|lp| bounded(lp).map(|e| (lp.p_c, e)))
            .min_by(|a, b| a.1.upper.partial_cmp(&b.1.upper).expect("finite bounds"))
            .map(|(p_c, estimate)| PlanningChoice { p_c, estimate })
            .ok_or(Error::NoUsableProbe {
                probe_power: cfg
                    .probe_powers
                    .iter()
                    .copied()
                    .fold(T::zero(), T::max)
                    .as_f64(),
            }),
    }
}

fn transmit_point<T: Scalar>(
    cfg: &ScenarioConfig<T>,
    gain_upper: T,
    r0_observed: T,
    p: T,
) -> TransmissionPoint<T> {
    let ch = &cfg.channel;
    let kind = cfg.link.policy.kind();
    let before = cfg.link.respond(ch, T::zero());
    let during = cfg.link.respond(ch, p);
    let pr_outage = during.in_outage();
    let penalty_actual = if kind.is_variable_rate() {
        Some(before.r_p - during.r_p)
    } else if !pr_outage && before.p_p > T::zero() {
        Some(linear_to_db(during.p_p / before.p_p))
    } else {
        None
    };
    TransmissionPoint {
        p_c_d: p,
        penalty_actual,
        penalty_predicted: predicted_penalty(kind, gain_upper, p, r0_observed),
        r_c: cr_rate(ch, &cfg.link, cfg.gamma_gap_c, p),
        pr_outage,
    }
}

/// Evaluate actual and predicted PR penalty and CR rate over the data
/// power sweep, predicting from `gain_est.upper`.
pub fn run_transmission_sweep<T: Scalar>(
    cfg: &ScenarioConfig<T>,
    gain_est: &GainEstimate<T>,
) -> Vec<TransmissionPoint<T>> {
    let r0 = cfg.link.respond(&cfg.channel, T::zero()).r_p;
    cfg.data_powers
        .par_iter()
        .map(|&p| transmit_point(cfg, gain_est.upper, r0, p))
        .collect()
}

/// Learning sweep, planning-estimate selection, transmission sweep and, when
/// a budget is configured, the budgeted transmission plan.
pub fn run_full<T: Scalar>(cfg: &ScenarioConfig<T>) -> Result<SweepResult<T>>
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    let mut out = run_learning_sweep(cfg)?;
    if cfg.data_powers.is_empty() && cfg.budget.is_none() {
        return Ok(out);
    }
    let choice = select_planning_estimate(cfg, &out.learning)?;
    out.transmission = run_transmission_sweep(cfg, &choice.estimate);
    if let Some(budget) = &cfg.budget {
        let ctx = PlanContext {
            ch: &cfg.channel,
            link: &cfg.link,
            gamma_gap_c: cfg.gamma_gap_c,
            r0: cfg.link.respond(&cfg.channel, T::zero()).r_p,
            outage_power: cfg.link.outage_threshold(&cfg.channel),
            power_cap: cfg.cr_power_cap,
        };
        out.plan = Some(plan_transmission(&choice.estimate, budget, ctx)?);
    }
    out.planning = Some(choice);
    Ok(out)
}

/// Per-side miss counts of the noisy-power interval across independent
/// trials at one probe power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport<T> {
    pub p_c: T,
    pub truth: T,
    pub trials: usize,
    /// Trials where sensing did not clear the margin; no interval produced.
    pub skipped: usize,
    /// True value below the lower bound.
    pub lower_violations: usize,
    /// True value above the upper bound.
    pub upper_violations: usize,
    /// Guaranteed per-side coverage, `1 - Q(zeta)`.
    pub one_sided_confidence: T,
}

impl<T: Scalar> CalibrationReport<T> {
    pub fn evaluated(&self) -> usize {
        self.trials - self.skipped
    }

    pub fn lower_violation_rate(&self) -> f64 {
        self.lower_violations as f64 / self.evaluated().max(1) as f64
    }

    pub fn upper_violation_rate(&self) -> f64 {
        self.upper_violations as f64 / self.evaluated().max(1) as f64
    }
}

/// Repeat the probe at `p_c` over `trials` independent sensing draws.
pub fn run_noise_calibration<T: Scalar>(
    cfg: &ScenarioConfig<T>,
    p_c: T,
    trials: usize,
) -> Result<CalibrationReport<T>>
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    let sensing = cfg.sensing.ok_or(Error::InvalidParameter {
        name: "sensing",
        value: f64::NAN,
        reason: "calibration needs noisy sensing",
    })?;
    let truth = cfg.channel.normalized_cross_gain();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| learn(cfg, p_c, CALIBRATION_STREAMS | t as u64).map(|lp| lp.outcome))
        .collect::<Result<Vec<_>>>()?;
    let mut report = CalibrationReport {
        p_c,
        truth,
        trials,
        skipped: 0,
        lower_violations: 0,
        upper_violations: 0,
        one_sided_confidence: sensing.one_sided_confidence(),
    };
    for o in outcomes {
        match o {
            ProbeOutcome::Estimate(e) => {
                report.lower_violations += usize::from(truth < e.lower);
                report.upper_violations += usize::from(truth > e.upper);
            }
            ProbeOutcome::Reprobe(_) => report.skipped += 1,
        }
    }
    Ok(report)
}

/// PR power and rate as functions of CR interference power.
pub fn policy_curve<T: Scalar>(
    link: &PrLink<T>,
    ch: &ChannelState<T>,
    grid: &[T],
) -> Vec<(T, PrState<T>)> {
    grid.iter().map(|&p| (p, link.respond(ch, p))).collect()
}

/// `n + 1` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace<T: Scalar>(start: T, stop: T, n: usize) -> Vec<T> {
    if n == 0 {
        return vec![start];
    }
    let step = (stop - start) / T::from_usize(n).unwrap_or_else(T::one);
    (0..=n)
        .map(|i| {
            if i == n {
                stop
            } else {
                start + step * T::from_usize(i).unwrap_or_else(T::zero)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimateKind;
    use crate::pr_link::{PowerPolicy, RateFunction};
    use crate::scalar::db_to_linear;

    fn case_one() -> ScenarioConfig<f64> {
        let link = PrLink::new(
            PowerPolicy::ConstantPower { q: 100.0 },
            RateFunction::new(db_to_linear(3.0), 1.0).unwrap(),
        );
        let mut cfg = ScenarioConfig::new("case1", ChannelState::reference(), link);
        cfg.probe_powers = (1..=20).map(f64::from).collect();
        cfg.data_powers = (1..=100).map(f64::from).collect();
        cfg.plan_probe_power = Some(10.0);
        cfg
    }

    fn case_two() -> ScenarioConfig<f64> {
        let link = PrLink::new(
            PowerPolicy::TruncatedInversion {
                snr_target: 10.0,
                gamma_threshold: 0.1,
            },
            RateFunction::shannon(),
        );
        let mut cfg = ScenarioConfig::new("case2", ChannelState::reference(), link);
        cfg.sensing = Some(SensingConfig::new(500, 1.0, 100.0, 2.3).unwrap());
        cfg.probe_powers = (1..=17).map(f64::from).collect();
        cfg.data_powers = (1..=17).map(f64::from).collect();
        cfg.plan_probe_power = Some(10.0);
        cfg.seed = 7;
        cfg
    }

    #[test]
    fn case_one_intervals_contain_truth() {
        let out = run_learning_sweep(&case_one()).unwrap();
        for lp in &out.learning {
            let e = lp
                .outcome
                .estimate()
                .expect("PR keeps a positive rate up to p_c = 20");
            assert_eq!(e.kind, EstimateKind::Granularity);
            assert!(e.contains(0.5), "p_c = {}: {e:?}", lp.p_c);
        }
    }

    #[test]
    fn noiseless_continuous_is_exact() {
        let mut cfg = case_one();
        cfg.link.rate_fn = RateFunction::continuous(2.0);
        let out = run_learning_sweep(&cfg).unwrap();
        for lp in &out.learning {
            let e = lp.outcome.estimate().unwrap();
            assert!((e.point().unwrap() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn full_run_is_deterministic() {
        let a = run_full(&case_two()).unwrap();
        let b = run_full(&case_two()).unwrap();
        assert_eq!(a, b);
        let mut other = case_two();
        other.seed = 8;
        assert_ne!(run_full(&other).unwrap().learning, a.learning);
    }

    #[test]
    fn budget_only_emits_plan() {
        let mut cfg = case_one();
        cfg.data_powers.clear();
        cfg.budget = Some(PenaltyBudget::RateLoss { max_bits: 1.0 });
        let out = run_full(&cfg).unwrap();
        assert!(out.transmission.is_empty());
        let plan = out.plan.unwrap();
        assert!(plan.p_c_d <= 2.0);
    }

    #[test]
    fn outage_probe_falls_back_to_smaller_power() {
        let link = PrLink::new(
            PowerPolicy::WaterFilling { mu: 4.0 },
            RateFunction::shannon(),
        );
        let mut cfg = ScenarioConfig::new("wf", ChannelState::reference(), link);
        cfg.probe_powers = vec![2.0, 4.0, 8.0];
        cfg.data_powers = vec![1.0];
        cfg.plan_probe_power = Some(8.0);
        let out = run_full(&cfg).unwrap();
        assert_eq!(
            out.learning[2].outcome,
            ProbeOutcome::Reprobe(ReprobeReason::PrOutage)
        );
        assert_eq!(out.planning.unwrap().p_c, 4.0);
        cfg.probe_powers = vec![8.0];
        assert!(matches!(run_full(&cfg), Err(Error::NoUsableProbe { .. })));
    }

    #[test]
    fn schedule_is_attached_when_timing_given() {
        let mut cfg = case_one();
        cfg.schedule = Some(ScheduleConfig {
            timing: TimingConfig::new(5e-5, 5e-5, 5e-5, 1e-4, 1e-3).unwrap(),
            block_len: 1e-2,
            resensing_len: 1e-3,
            data_len: 5e-3,
        });
        let out = run_learning_sweep(&cfg).unwrap();
        assert!(out.schedule.unwrap().is_contiguous());
    }

    #[test]
    fn validation_collects_everything() {
        let mut cfg = case_one();
        cfg.probe_powers.clear();
        cfg.data_powers.clear();
        cfg.budget = Some(PenaltyBudget::PowerPenalty { max_db: 1.0 });
        cfg.channel.sigma_p2 = -1.0;
        let v = cfg.violations();
        assert!(v.iter().any(|e| matches!(e, Error::BudgetMismatch { .. })));
        assert!(v.iter().any(|e| matches!(
            e,
            Error::InvalidParameter {
                name: "sigma_p2",
                ..
            }
        )));
        assert!(v.iter().any(|e| matches!(e, Error::InvalidSweep(_))));
    }

    #[test]
    fn tci_transmission_marks_outage() {
        let mut cfg = case_two();
        cfg.data_powers = vec![10.0, 18.0, 30.0];
        let pts = run_transmission_sweep(&cfg, &GainEstimate::exact(0.5));
        assert!(!pts[0].pr_outage && pts[0].penalty_actual.is_some());
        assert!(pts[1].pr_outage && pts[1].penalty_actual.is_none());
        assert!(pts[2].pr_outage);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.0, 8.0, 4);
        assert_eq!(g, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(linspace(1.0, 1.0, 0), vec![1.0]);
    }
}
