//! Supervised CR data transmission: predict the PR performance loss caused
//! by a CR data power, invert a loss budget into a maximum CR power, and
//! evaluate the CR rate under the PR's feedback interference.

use std::fmt;

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::estimator::GainEstimate;
use crate::pr_link::{PolicyKind, PrLink};
use crate::scalar::{db_to_linear, linear_to_db, Scalar};

/// Tolerated PR loss. Rate loss applies to variable-rate PRs (CP, WF),
/// power penalty to constant-rate PRs (TCI).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyBudget<T> {
    RateLoss { max_bits: T },
    PowerPenalty { max_db: T },
}

impl<T: Scalar> PenaltyBudget<T> {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyBudget::RateLoss { .. } => "rate_loss",
            PenaltyBudget::PowerPenalty { .. } => "power_penalty",
        }
    }

    pub fn value(&self) -> T {
        match *self {
            PenaltyBudget::RateLoss { max_bits } => max_bits,
            PenaltyBudget::PowerPenalty { max_db } => max_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.value();
        if v >= T::zero() && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "budget",
                value: v.as_f64(),
                reason: "penalty budget must be finite and non-negative",
            })
        }
    }

    pub fn check_policy(&self, kind: PolicyKind) -> Result<()> {
        let ok = match self {
            PenaltyBudget::RateLoss { .. } => kind.is_variable_rate(),
            PenaltyBudget::PowerPenalty { .. } => !kind.is_variable_rate(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BudgetMismatch {
                budget: self.name(),
                policy: kind.as_str(),
            })
        }
    }
}

/// Unit of a PR penalty value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyUnit {
    /// Rate loss in bps/Hz.
    Bits,
    /// Extra PR transmit power in dB.
    Db,
}

impl PenaltyUnit {
    pub fn for_policy(kind: PolicyKind) -> Self {
        if kind.is_variable_rate() {
            PenaltyUnit::Bits
        } else {
            PenaltyUnit::Db
        }
    }
}

impl fmt::Display for PenaltyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyUnit::Bits => "bps/Hz",
            PenaltyUnit::Db => "dB",
        })
    }
}

/// Planned CR data stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxPlan<T> {
    pub p_c_d: T,
    pub predicted_penalty: T,
    pub r_c_d: T,
    pub budget: PenaltyBudget<T>,
}

fn log2_1p<T: Scalar>(x: T) -> T {
    x.ln_1p() / T::LN_2()
}

/// Upper bound on the rate loss of a constant-power PR, `log2(1 + g p)`.
/// Independent of the PR power and SNR gap.
pub fn rate_penalty_cp_bound<T: Scalar>(gain: T, p_c_d: T) -> T {
    log2_1p(gain * p_c_d)
}

/// Exact rate loss of a water-filling PR whose pre-interference rate is
/// `r0`; saturates at `r0` once the PR is driven into outage.
pub fn rate_penalty_wf<T: Scalar>(gain: T, p_c_d: T, r0: T) -> T {
    if gain == T::zero() {
        return T::zero();
    }
    let knee = (T::lit(2.0).powf(r0) - T::one()) / gain;
    if p_c_d <= knee {
        log2_1p(gain * p_c_d)
    } else {
        r0
    }
}

/// Extra power in dB a TCI PR spends to hold its rate, `10 log10(1 + g p)`.
/// Fails when `p_c_d` reaches a known outage threshold.
pub fn power_penalty_tci<T: Scalar>(gain: T, p_c_d: T, outage_power: Option<T>) -> Result<T> {
    if let Some(threshold) = outage_power {
        if p_c_d >= threshold {
            return Err(Error::PrOutage {
                power: p_c_d.as_f64(),
                threshold: threshold.as_f64(),
            });
        }
    }
    Ok(linear_to_db(T::one() + gain * p_c_d))
}

/// Penalty predicted for the policy family, in [`PenaltyUnit::for_policy`]
/// units. `r0` is only read for WF.
pub fn predicted_penalty<T: Scalar>(kind: PolicyKind, gain: T, p_c_d: T, r0: T) -> T {
    match kind {
        PolicyKind::Cp => rate_penalty_cp_bound(gain, p_c_d),
        PolicyKind::Wf => rate_penalty_wf(gain, p_c_d, r0),
        PolicyKind::Tci => linear_to_db(T::one() + gain * p_c_d),
    }
}

/// Largest CR power whose predicted penalty, using `gain_upper`, meets the
/// budget. Returns `+inf` when `gain_upper` is zero.
pub fn max_power_for_budget<T: Scalar>(gain_upper: T, budget: &PenaltyBudget<T>) -> T {
    if gain_upper <= T::zero() {
        return T::infinity();
    }
    let factor = match *budget {
        PenaltyBudget::RateLoss { max_bits } => T::lit(2.0).powf(max_bits) - T::one(),
        PenaltyBudget::PowerPenalty { max_db } => db_to_linear(max_db) - T::one(),
    };
    factor / gain_upper
}

/// CR achievable rate with single-user decoding at CR-Rx, treating the
/// PR signal, whose power reacts to `p_c_d`, as noise.
pub fn cr_rate<T: Scalar>(ch: &ChannelState<T>, link: &PrLink<T>, gamma_gap_c: T, p_c_d: T) -> T {
    let p_p = link.respond(ch, p_c_d).p_p;
    log2_1p(ch.h_c * p_c_d / (gamma_gap_c * (ch.sigma_c2 + ch.h_pc * p_p)))
}

/// `p / (sigma_c2 + h_pc P_p(gamma(p)))`; the CR rate increases in `p`
/// exactly when this does.
pub fn feedback_sinr_ratio<T: Scalar>(ch: &ChannelState<T>, link: &PrLink<T>, p_c_d: T) -> T {
    p_c_d / (ch.sigma_c2 + ch.h_pc * link.respond(ch, p_c_d).p_p)
}

/// Central difference with relative step `rel_step` (absolute for `x = 0`).
pub fn central_difference<T: Scalar>(f: impl Fn(T) -> T, x: T, rel_step: T) -> T {
    let h = if x == T::zero() {
        rel_step
    } else {
        x.abs() * rel_step
    };
    (f(x + h) - f(x - h)) / (h + h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneQuantity {
    SinrRatio,
    CrRate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityViolation<T> {
    pub index: usize,
    pub p_prev: T,
    pub p: T,
    pub quantity: MonotoneQuantity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport<T> {
    pub points: usize,
    pub first_violation: Option<MonotonicityViolation<T>>,
}

impl<T> MonotonicityReport<T> {
    pub fn is_monotone(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Check that both the SINR ratio and the CR rate strictly increase across
/// a strictly increasing grid of CR data powers.
pub fn check_monotonicity<T: Scalar>(
    ch: &ChannelState<T>,
    link: &PrLink<T>,
    gamma_gap_c: T,
    grid: &[T],
) -> Result<MonotonicityReport<T>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSweep(
            "monotonicity grid must be strictly increasing",
        ));
    }
    let mut prev: Option<(T, T, T)> = None;
    for (index, &p) in grid.iter().enumerate() {
        let f = feedback_sinr_ratio(ch, link, p);
        let r = cr_rate(ch, link, gamma_gap_c, p);
        if let Some((p_prev, f_prev, r_prev)) = prev {
            let quantity = if !(f > f_prev) {
                Some(MonotoneQuantity::SinrRatio)
            } else if !(r > r_prev) {
                Some(MonotoneQuantity::CrRate)
            } else {
                None
            };
            if let Some(quantity) = quantity {
                return Ok(MonotonicityReport {
                    points: grid.len(),
                    first_violation: Some(MonotonicityViolation {
                        index,
                        p_prev,
                        p,
                        quantity,
                    }),
                });
            }
        }
        prev = Some((p, f, r));
    }
    Ok(MonotonicityReport {
        points: grid.len(),
        first_violation: None,
    })
}

/// Inputs the planner needs besides the gain estimate.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a, T> {
    pub ch: &'a ChannelState<T>,
    pub link: &'a PrLink<T>,
    pub gamma_gap_c: T,
    /// PR rate observed before probing; used by the WF predictor.
    pub r0: T,
    /// Known CR power at which the PR enters outage.
    pub outage_power: Option<T>,
    /// Hard cap on CR power; required when the learned upper bound is zero.
    pub power_cap: Option<T>,
}

/// Budget the CR data power against the estimate's upper bound, so the
/// actual PR loss stays within budget whenever the true gain does not
/// exceed that bound.
pub fn plan_transmission<T: Scalar>(
    estimate: &GainEstimate<T>,
    budget: &PenaltyBudget<T>,
    ctx: PlanContext<'_, T>,
) -> Result<TxPlan<T>> {
    budget.validate()?;
    let kind = ctx.link.policy.kind();
    budget.check_policy(kind)?;
    let gain = estimate.upper;
    let mut p = max_power_for_budget(gain, budget);
    if let Some(cap) = ctx.power_cap {
        p = p.min(cap);
    }
    if !p.is_finite() {
        return Err(Error::UnboundedPower);
    }
    let mut penalty = predicted_penalty(kind, gain, p, ctx.r0);
    // rounding in the inversion can overshoot the budget by an ulp
    let shrink = T::one() - T::lit(4.0) * T::epsilon();
    while penalty > budget.value() && p > T::zero() {
        p *= shrink;
        penalty = predicted_penalty(kind, gain, p, ctx.r0);
    }
    if kind == PolicyKind::Tci {
        power_penalty_tci(gain, p, ctx.outage_power)?;
    }
    Ok(TxPlan {
        p_c_d: p,
        predicted_penalty: penalty,
        r_c_d: cr_rate(ctx.ch, ctx.link, ctx.gamma_gap_c, p),
        budget: *budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pr_link::{PowerPolicy, RateFunction};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cp_bound_values() {
        assert!(close(rate_penalty_cp_bound(0.5, 2.0), 1.0, 1e-15));
        assert_eq!(rate_penalty_cp_bound(0.5, 0.0), 0.0);
        assert!(close(rate_penalty_cp_bound(0.5, 10.0), 6f64.log2(), 1e-15));
        assert!(close(rate_penalty_cp_bound(0.5, 10.0), 2.585, 1e-3));
    }

    #[test]
    fn wf_penalty_piecewise() {
        assert!(close(rate_penalty_wf(0.5, 14.0, 3.0), 3.0, 1e-15));
        assert!(close(rate_penalty_wf(0.5, 14.0 + 1e-9, 3.0), 3.0, 1e-15));
        assert_eq!(rate_penalty_wf(0.5, 0.0, 3.0), 0.0);
        assert_eq!(rate_penalty_wf(0.5, 100.0, 3.0), 3.0);
    }

    #[test]
    fn tci_power_penalty() {
        assert!(close(
            power_penalty_tci(0.5, 2.0, None).unwrap(),
            3.010_299_956_639_812,
            1e-12
        ));
        assert_eq!(power_penalty_tci(0.5, 0.0, None).unwrap(), 0.0);
        assert!(close(
            power_penalty_tci(0.5, 18.0, None).unwrap(),
            10.0,
            1e-12
        ));
        assert!(matches!(
            power_penalty_tci(0.5, 18.0, Some(18.0)),
            Err(Error::PrOutage { .. })
        ));
    }

    #[test]
    fn budget_inversion() {
        let rate = PenaltyBudget::RateLoss { max_bits: 1.0 };
        assert!(close(max_power_for_budget(0.5, &rate), 2.0, 1e-12));
        let pow = PenaltyBudget::PowerPenalty { max_db: 3.0103 };
        assert!(close(max_power_for_budget(0.5, &pow), 2.0, 1e-4));
        assert_eq!(
            max_power_for_budget(0.5, &PenaltyBudget::RateLoss { max_bits: 0.0 }),
            0.0
        );
        assert!(max_power_for_budget(0.0, &rate).is_infinite());
    }

    #[test]
    fn budget_policy_match() {
        let rate = PenaltyBudget::RateLoss { max_bits: 1.0 };
        let pow = PenaltyBudget::PowerPenalty { max_db: 1.0 };
        assert!(rate.check_policy(PolicyKind::Cp).is_ok());
        assert!(rate.check_policy(PolicyKind::Wf).is_ok());
        assert!(rate.check_policy(PolicyKind::Tci).is_err());
        assert!(pow.check_policy(PolicyKind::Tci).is_ok());
        assert!(pow.check_policy(PolicyKind::Cp).is_err());
    }

    #[test]
    fn cr_rate_cases() {
        let ch = ChannelState::reference();
        let cp = PrLink::new(
            PowerPolicy::ConstantPower { q: 100.0 },
            RateFunction::new(2.0, 1.0).unwrap(),
        );
        assert!(close(cr_rate(&ch, &cp, 1.0, 51.0), 1.0, 1e-15));
        assert_eq!(cr_rate(&ch, &cp, 1.0, 0.0), 0.0);
        let tci = PrLink::new(
            PowerPolicy::TruncatedInversion {
                snr_target: 10.0,
                gamma_threshold: 0.1,
            },
            RateFunction::shannon(),
        );
        assert!(close(
            cr_rate(&ch, &tci, 1.0, 10.0),
            (41.0_f64 / 31.0).log2(),
            1e-12
        ));
        assert!(close(cr_rate(&ch, &tci, 1.0, 10.0), 0.4034, 1e-4));
    }

    #[test]
    fn monotonicity_reports() {
        let ch = ChannelState::reference();
        let cp = PrLink::new(
            PowerPolicy::ConstantPower { q: 100.0 },
            RateFunction::shannon(),
        );
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        assert!(check_monotonicity(&ch, &cp, 1.0, &grid)
            .unwrap()
            .is_monotone());
        assert!(check_monotonicity(&ch, &cp, 1.0, &[3.0])
            .unwrap()
            .is_monotone());
        assert!(check_monotonicity(&ch, &cp, 1.0, &[3.0, 3.0]).is_err());
        // strongly coupled TCI feedback still leaves the ratio increasing
        let steep = ChannelState {
            h_cp: 1.0,
            h_pc: 10.0,
            sigma_c2: 1e-3,
            ..ch
        };
        let tci = PrLink::new(
            PowerPolicy::TruncatedInversion {
                snr_target: 10.0,
                gamma_threshold: 0.0,
            },
            RateFunction::shannon(),
        );
        let r = check_monotonicity(&steep, &tci, 1.0, &grid).unwrap();
        assert!(r.is_monotone(), "TCI ratio still increases: {r:?}");
    }

    #[test]
    fn central_difference_of_square() {
        let d = central_difference(|x: f64| x * x, 3.0, 1e-6);
        assert!(close(d, 6.0, 1e-6));
    }

    #[test]
    fn planner_respects_budget_and_upper_bound() {
        let ch = ChannelState::reference();
        let cp = PrLink::new(
            PowerPolicy::ConstantPower { q: 100.0 },
            RateFunction::new(2.0, 1.0).unwrap(),
        );
        let est = GainEstimate {
            lower: 0.1,
            upper: 0.8,
            ..GainEstimate::exact(0.5)
        };
        let ctx = PlanContext {
            ch: &ch,
            link: &cp,
            gamma_gap_c: 1.0,
            r0: 5.0,
            outage_power: None,
            power_cap: None,
        };
        let plan =
            plan_transmission(&est, &PenaltyBudget::RateLoss { max_bits: 1.0 }, ctx).unwrap();
        assert!(close(plan.p_c_d, 1.25, 1e-12));
        assert!(plan.predicted_penalty <= 1.0);
        assert!(
            plan_transmission(&est, &PenaltyBudget::PowerPenalty { max_db: 1.0 }, ctx).is_err()
        );
        let zero = GainEstimate::exact(0.0);
        assert_eq!(
            plan_transmission(&zero, &PenaltyBudget::RateLoss { max_bits: 1.0 }, ctx),
            Err(Error::UnboundedPower)
        );
        let capped = PlanContext {
            power_cap: Some(7.0),
            ..ctx
        };
        let p =
            plan_transmission(&zero, &PenaltyBudget::RateLoss { max_bits: 1.0 }, capped).unwrap();
        assert_eq!(p.p_c_d, 7.0);
    }

    #[test]
    fn planner_refuses_tci_outage() {
        let ch = ChannelState::reference();
        let tci = PrLink::new(
            PowerPolicy::TruncatedInversion {
                snr_target: 10.0,
                gamma_threshold: 0.1,
            },
            RateFunction::shannon(),
        );
        let ctx = PlanContext {
            ch: &ch,
            link: &tci,
            gamma_gap_c: 1.0,
            r0: tci.respond(&ch, 0.0).r_p,
            outage_power: tci.outage_threshold(&ch),
            power_cap: None,
        };
        let est = GainEstimate::exact(0.5);
        let ok =
            plan_transmission(&est, &PenaltyBudget::PowerPenalty { max_db: 3.0 }, ctx).unwrap();
        assert!(ok.predicted_penalty <= 3.0);
        let err = plan_transmission(&est, &PenaltyBudget::PowerPenalty { max_db: 12.0 }, ctx);
        assert!(matches!(err, Err(Error::PrOutage { .. })));
    }
}
