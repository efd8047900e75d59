//! Active learning of `h_cp / sigma_p2` from the PR's reaction to a probe.
//!
//! Before the probe the CR observes `(q0, r0)`; after a probe of power
//! `p_c` it observes `(q1, r1)`. Since the received power ratio equals the
//! PR transmit power ratio, and the rate pins down the PR receiver SNR,
//!
//! ```text
//! h_cp / sigma_p2 = (R^-1(r0) q1 / (R^-1(r1) q0) - 1) / p_c
//! ```
//!
//! Every estimator here is this identity evaluated on bounds for each
//! factor: SNR brackets for discrete rates, `±zeta sqrt(c_hat)` for noisy
//! powers, and a ratio range for the sensing-path gain drifting between the
//! two sensing stages.

use std::fmt;

use crate::error::{Error, Result};
use crate::pr_link::RateFunction;
use crate::scalar::Scalar;
use crate::sensing::{PrObservation, SensingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateKind {
    /// Perfect observations, continuous rates.
    Exact,
    /// Discrete PR rates.
    Granularity,
    /// Noisy power measurements.
    Noise,
    /// Sensing-path gain varies between the two sensing stages.
    Variation,
    /// More than one of the above at once.
    Composite,
}

impl EstimateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateKind::Exact => "exact",
            EstimateKind::Granularity => "granularity",
            EstimateKind::Noise => "noise",
            EstimateKind::Variation => "variation",
            EstimateKind::Composite => "composite",
        }
    }
}

impl fmt::Display for EstimateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnostic {
    /// The PR reported zero rate after the probe, so no upper bound exists.
    /// Re-probe with a smaller power.
    PrOutageAfterProbe,
}

/// Bounds on `h_cp / sigma_p2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate<T> {
    pub lower: T,
    /// `+inf` when the observations do not bound the gain from above.
    pub upper: T,
    pub kind: EstimateKind,
    /// Probability that the whole interval contains the true value.
    pub confidence: T,
    /// Probability that each bound, taken alone, holds.
    pub one_sided_confidence: T,
    pub diagnostic: Option<Diagnostic>,
}

impl<T: Scalar> GainEstimate<T> {
    pub fn exact(value: T) -> Self {
        Self {
            lower: value,
            upper: value,
            kind: EstimateKind::Exact,
            confidence: T::one(),
            one_sided_confidence: T::one(),
            diagnostic: None,
        }
    }

    fn interval(lower: T, upper: T, kind: EstimateKind) -> Self {
        Self {
            lower,
            upper,
            kind,
            confidence: T::one(),
            one_sided_confidence: T::one(),
            diagnostic: None,
        }
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, x: T) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }

    /// The point value for exact estimates.
    pub fn point(&self) -> Option<T> {
        (self.lower == self.upper).then_some(self.lower)
    }
}

/// Observations bracketing one CR probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRecord<T> {
    pub before: PrObservation<T>,
    pub after: PrObservation<T>,
    pub p_c: T,
}

impl<T: Scalar> ProbeRecord<T> {
    pub fn new(before: PrObservation<T>, after: PrObservation<T>, p_c: T) -> Self {
        Self { before, after, p_c }
    }

    fn check_probe(&self) -> Result<()> {
        positive("p_c", self.p_c)
    }

    fn check_powers(&self) -> Result<()> {
        positive("q0", self.before.q)?;
        positive("q1", self.after.q)
    }

    fn check_rates(&self) -> Result<()> {
        positive("r0", self.before.r)?;
        positive("r1", self.after.r)
    }
}

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveObservation {
            name,
            value: v.as_f64(),
        })
    }
}

fn require_continuous<T: Scalar>(rate_fn: &RateFunction<T>) -> Result<()> {
    if rate_fn.is_continuous() {
        Ok(())
    } else {
        Err(Error::DiscreteRate {
            granularity: rate_fn.bit_granularity.as_f64(),
        })
    }
}

/// Closed range used for each factor of the estimation identity.
#[derive(Debug, Clone, Copy)]
struct Range<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Range<T> {
    fn point(x: T) -> Self {
        Self { lo: x, hi: x }
    }

    fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }
}

/// Factors of the estimation identity, each as a range.
struct Factors<T> {
    snr0: Range<T>,
    snr1: Range<T>,
    q0: Range<T>,
    q1: Range<T>,
    ratio: Range<T>,
}

impl<T: Scalar> Factors<T> {
    /// Interval for `h_cp / sigma_p2`. The identity is increasing in `snr0`,
    /// `q1` and `ratio` and decreasing in `snr1` and `q0`, so each bound
    /// takes the matching endpoints.
    fn bounds(&self, p_c: T) -> (T, T) {
        let lo_den = self.snr1.hi * self.q0.hi;
        let lower = if lo_den > T::zero() {
            (self.snr0.lo * self.q1.lo * self.ratio.lo / lo_den - T::one()) / p_c
        } else {
            T::zero()
        };
        let hi_den = self.snr1.lo * self.q0.lo;
        let upper = if hi_den > T::zero() {
            (self.snr0.hi * self.q1.hi * self.ratio.hi / hi_den - T::one()) / p_c
        } else {
            T::infinity()
        };
        (lower.max(T::zero()), upper.max(T::zero()))
    }
}

/// Point estimate from perfect observations with a continuous rate map.
pub fn estimate_exact<T: Scalar>(
    rec: &ProbeRecord<T>,
    rate_fn: &RateFunction<T>,
) -> Result<GainEstimate<T>> {
    require_continuous(rate_fn)?;
    rec.check_probe()?;
    rec.check_powers()?;
    rec.check_rates()?;
    let ratio =
        rate_fn.inverse(rec.before.r) * rec.after.q / (rate_fn.inverse(rec.after.r) * rec.before.q);
    point_from_ratio(ratio, rec.p_c)
}

/// Constant-power PR: the received power does not change, only rates count.
pub fn estimate_cp<T: Scalar>(
    rec: &ProbeRecord<T>,
    rate_fn: &RateFunction<T>,
) -> Result<GainEstimate<T>> {
    require_continuous(rate_fn)?;
    rec.check_probe()?;
    rec.check_rates()?;
    let ratio = rate_fn.inverse(rec.before.r) / rate_fn.inverse(rec.after.r);
    point_from_ratio(ratio, rec.p_c)
}

/// Truncated-inversion PR: the rate does not change, only powers count.
pub fn estimate_tci<T: Scalar>(rec: &ProbeRecord<T>) -> Result<GainEstimate<T>> {
    rec.check_probe()?;
    rec.check_powers()?;
    point_from_ratio(rec.after.q / rec.before.q, rec.p_c)
}

fn point_from_ratio<T: Scalar>(ratio: T, p_c: T) -> Result<GainEstimate<T>> {
    // a handful of ulps of slack for observations that are nominally equal
    let slack = T::lit(64.0) * T::epsilon();
    if !(ratio >= T::one() - slack) {
        return Err(Error::InconsistentObservations {
            ratio: ratio.as_f64(),
        });
    }
    Ok(GainEstimate::exact((ratio - T::one()).max(T::zero()) / p_c))
}

/// Interval from discrete PR rates. Each observed rate `r` means the PR
/// receiver SNR lay in `[gap (2^r - 1), gap (2^(r+b) - 1))`.
pub fn estimate_granularity_interval<T: Scalar>(
    rec: &ProbeRecord<T>,
    rate_fn: &RateFunction<T>,
) -> Result<GainEstimate<T>> {
    if rate_fn.is_continuous() {
        return Err(Error::InvalidParameter {
            name: "bit_granularity",
            value: 0.0,
            reason: "granularity interval needs a discrete rate map",
        });
    }
    rec.check_probe()?;
    positive("q0", rec.before.q)?;
    let f = Factors {
        snr0: bracket(rate_fn, rec.before.r),
        snr1: bracket(rate_fn, rec.after.r),
        q0: Range::point(rec.before.q),
        q1: Range::point(rec.after.q.max(T::zero())),
        ratio: Range::point(T::one()),
    };
    Ok(finish(
        f,
        rec,
        EstimateKind::Granularity,
        T::one(),
        T::one(),
    ))
}

fn bracket<T: Scalar>(rate_fn: &RateFunction<T>, r: T) -> Range<T> {
    let (lo, hi) = rate_fn.snr_bracket(r.max(T::zero()));
    Range::new(lo, hi)
}

fn finish<T: Scalar>(
    f: Factors<T>,
    rec: &ProbeRecord<T>,
    kind: EstimateKind,
    confidence: T,
    one_sided: T,
) -> GainEstimate<T> {
    let (lower, upper) = f.bounds(rec.p_c);
    let mut est = GainEstimate::interval(lower, upper, kind);
    est.confidence = confidence;
    est.one_sided_confidence = one_sided;
    if rec.after.r <= T::zero() {
        est.upper = T::infinity();
        est.diagnostic = Some(Diagnostic::PrOutageAfterProbe);
    }
    est
}

fn noisy_power<T: Scalar>(q_hat: T, margin: T) -> Result<Range<T>> {
    if q_hat > margin && q_hat.is_finite() {
        Ok(Range::new(q_hat - margin, q_hat + margin))
    } else {
        Err(Error::InsufficientSnr {
            observed: q_hat.as_f64(),
            margin: margin.as_f64(),
        })
    }
}

/// Interval from noisy power estimates `q_hat`. Each one-sided bound holds
/// with probability at least `1 - Q(zeta)`; the interval as a whole with at
/// least `1 - 2 Q(zeta)`.
pub fn estimate_noise_interval<T: Scalar>(
    rec: &ProbeRecord<T>,
    rate_fn: &RateFunction<T>,
    cfg: &SensingConfig<T>,
) -> Result<GainEstimate<T>> {
    require_continuous(rate_fn)?;
    rec.check_probe()?;
    rec.check_rates()?;
    let margin = cfg.margin();
    let f = Factors {
        snr0: Range::point(rate_fn.inverse(rec.before.r)),
        snr1: Range::point(rate_fn.inverse(rec.after.r)),
        q0: noisy_power(rec.before.q, margin)?,
        q1: noisy_power(rec.after.q, margin)?,
        ratio: Range::point(T::one()),
    };
    Ok(finish(
        f,
        rec,
        EstimateKind::Noise,
        cfg.two_sided_confidence(),
        cfg.one_sided_confidence(),
    ))
}

/// Interval when the sensing-path gain changes between the two sensing
/// stages by an unknown ratio `h_pc_tilde(before) / h_pc_tilde(after)` in
/// `[ratio_lo, ratio_hi]`. Observations are otherwise perfect.
pub fn estimate_variation_interval<T: Scalar>(
    rec: &ProbeRecord<T>,
    rate_fn: &RateFunction<T>,
    ratio_lo: T,
    ratio_hi: T,
) -> Result<GainEstimate<T>> {
    require_continuous(rate_fn)?;
    rec.check_probe()?;
    rec.check_powers()?;
    rec.check_rates()?;
    let ratio = ratio_range(ratio_lo, ratio_hi)?;
    let f = Factors {
        snr0: Range::point(rate_fn.inverse(rec.before.r)),
        snr1: Range::point(rate_fn.inverse(rec.after.r)),
        q0: Range::point(rec.before.q),
        q1: Range::point(rec.after.q),
        ratio,
    };
    Ok(finish(f, rec, EstimateKind::Variation, T::one(), T::one()))
}

fn ratio_range<T: Scalar>(lo: T, hi: T) -> Result<Range<T>> {
    if !(lo > T::zero() && lo.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "ratio_lo",
            value: lo.as_f64(),
            reason: "gain ratio bounds must be positive",
        });
    }
    if !(hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "ratio_hi",
            value: hi.as_f64(),
            reason: "upper ratio bound must be finite and not below the lower bound",
        });
    }
    Ok(Range::new(lo, hi))
}

/// Which imperfections to account for in [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Imperfections<'a, T> {
    /// Present when the powers in the record are noisy estimates.
    pub sensing: Option<&'a SensingConfig<T>>,
    /// Range of the sensing-path gain ratio between stages.
    pub ratio_bounds: Option<(T, T)>,
}

/// Pick the estimator matching the active imperfections. Discrete rates are
/// read off the rate map. With two or more effects every factor is bounded
/// at once, which keeps the interval sound; the result is tagged
/// [`EstimateKind::Composite`].
pub fn estimate<T: Scalar>(
    rec: &ProbeRecord<T>,
    rate_fn: &RateFunction<T>,
    imp: Imperfections<'_, T>,
) -> Result<GainEstimate<T>> {
    let discrete = !rate_fn.is_continuous();
    let effects = usize::from(discrete)
        + usize::from(imp.sensing.is_some())
        + usize::from(imp.ratio_bounds.is_some());
    match (effects, discrete, imp.sensing, imp.ratio_bounds) {
        (0, ..) => estimate_exact(rec, rate_fn),
        (1, true, ..) => estimate_granularity_interval(rec, rate_fn),
        (1, _, Some(cfg), _) => estimate_noise_interval(rec, rate_fn, cfg),
        (1, _, _, Some((lo, hi))) => estimate_variation_interval(rec, rate_fn, lo, hi),
        _ => estimate_composite(rec, rate_fn, imp),
    }
}

fn estimate_composite<T: Scalar>(
    rec: &ProbeRecord<T>,
    rate_fn: &RateFunction<T>,
    imp: Imperfections<'_, T>,
) -> Result<GainEstimate<T>> {
    rec.check_probe()?;
    let snr = |r: T| {
        if rate_fn.is_continuous() {
            Range::point(rate_fn.inverse(r))
        } else {
            bracket(rate_fn, r)
        }
    };
    if rate_fn.is_continuous() {
        rec.check_rates()?;
    }
    let (q0, q1, conf, one_sided) = match imp.sensing {
        Some(cfg) => {
            let m = cfg.margin();
            (
                noisy_power(rec.before.q, m)?,
                noisy_power(rec.after.q, m)?,
                cfg.two_sided_confidence(),
                cfg.one_sided_confidence(),
            )
        }
        None => {
            positive("q0", rec.before.q)?;
            (
                Range::point(rec.before.q),
                Range::point(rec.after.q.max(T::zero())),
                T::one(),
                T::one(),
            )
        }
    };
    let ratio = match imp.ratio_bounds {
        Some((lo, hi)) => ratio_range(lo, hi)?,
        None => Range::point(T::one()),
    };
    let f = Factors {
        snr0: snr(rec.before.r),
        snr1: snr(rec.after.r),
        q0,
        q1,
        ratio,
    };
    Ok(finish(f, rec, EstimateKind::Composite, conf, one_sided))
}
