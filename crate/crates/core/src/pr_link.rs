//! Primary-link transmit adaptation: how the PR sets power and rate from
//! its effective channel gain. Seen from the CR, this is the hidden feedback
//! that reacts to any interference the CR injects.

use std::fmt;
use std::str::FromStr;

use crate::channel::{ChannelState, EffectiveGain};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// PR power control policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerPolicy<T> {
    /// Constant power `q` regardless of channel.
    ConstantPower { q: T },
    /// Truncated channel inversion: hold receiver SNR at `snr_target`, go
    /// into outage when the effective gain is not above `gamma_threshold`.
    TruncatedInversion { snr_target: T, gamma_threshold: T },
    /// Water-filling with water level `mu`.
    WaterFilling { mu: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Cp,
    Tci,
    Wf,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Cp => "cp",
            PolicyKind::Tci => "tci",
            PolicyKind::Wf => "wf",
        }
    }

    /// Whether the PR varies its rate (CP, WF) rather than its power at a
    /// fixed rate (TCI).
    pub fn is_variable_rate(self) -> bool {
        !matches!(self, PolicyKind::Tci)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cp" => Ok(PolicyKind::Cp),
            "tci" => Ok(PolicyKind::Tci),
            "wf" => Ok(PolicyKind::Wf),
            other => Err(format!("unknown policy `{other}` (expected cp, tci or wf)")),
        }
    }
}

impl<T: Scalar> PowerPolicy<T> {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PowerPolicy::ConstantPower { .. } => PolicyKind::Cp,
            PowerPolicy::TruncatedInversion { .. } => PolicyKind::Tci,
            PowerPolicy::WaterFilling { .. } => PolicyKind::Wf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), Err)
    }

    pub fn violations(&self) -> Vec<Error> {
        let positive = |name, v: T| {
            (!(v > T::zero() && v.is_finite())).then_some(Error::InvalidParameter {
                name,
                value: v.as_f64(),
                reason: "must be finite and strictly positive",
            })
        };
        match *self {
            PowerPolicy::ConstantPower { q } => positive("q", q).into_iter().collect(),
            PowerPolicy::TruncatedInversion {
                snr_target,
                gamma_threshold,
            } => {
                let mut v: Vec<Error> = positive("snr_target", snr_target).into_iter().collect();
                if !(gamma_threshold >= T::zero() && gamma_threshold.is_finite()) {
                    v.push(Error::InvalidParameter {
                        name: "gamma_threshold",
                        value: gamma_threshold.as_f64(),
                        reason: "must be finite and non-negative",
                    });
                }
                v
            }
            PowerPolicy::WaterFilling { mu } => positive("mu", mu).into_iter().collect(),
        }
    }

    /// Transmit power at effective gain `gamma`. Both thresholds are strict:
    /// a gain exactly at the threshold is an outage.
    pub fn power(&self, gamma: T) -> T {
        match *self {
            PowerPolicy::ConstantPower { q } => q,
            PowerPolicy::TruncatedInversion {
                snr_target,
                gamma_threshold,
            } => {
                if gamma > gamma_threshold && gamma > T::zero() {
                    snr_target / gamma
                } else {
                    T::zero()
                }
            }
            PowerPolicy::WaterFilling { mu } => {
                if gamma > mu.recip() {
                    mu - gamma.recip()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// SNR-gap rate map `log2(1 + snr / gap)`, optionally floored to a multiple
/// of `bit_granularity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunction<T> {
    pub gamma_gap: T,
    /// Zero means continuous rates.
    pub bit_granularity: T,
}

impl<T: Scalar> RateFunction<T> {
    pub fn new(gamma_gap: T, bit_granularity: T) -> Result<Self> {
        let rf = Self {
            gamma_gap,
            bit_granularity,
        };
        rf.validate()?;
        Ok(rf)
    }

    pub fn continuous(gamma_gap: T) -> Self {
        Self {
            gamma_gap,
            bit_granularity: T::zero(),
        }
    }

    /// Shannon rate: unit gap, continuous.
    pub fn shannon() -> Self {
        Self::continuous(T::one())
    }

    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), Err)
    }

    pub fn violations(&self) -> Vec<Error> {
        let mut v = Vec::new();
        if !(self.gamma_gap >= T::one() && self.gamma_gap.is_finite()) {
            v.push(Error::InvalidParameter {
                name: "gamma_gap",
                value: self.gamma_gap.as_f64(),
                reason: "SNR gap must be finite and at least 1 (0 dB)",
            });
        }
        if !(self.bit_granularity >= T::zero() && self.bit_granularity.is_finite()) {
            v.push(Error::InvalidParameter {
                name: "bit_granularity",
                value: self.bit_granularity.as_f64(),
                reason: "bit granularity must be finite and non-negative",
            });
        }
        v
    }

    pub fn is_continuous(&self) -> bool {
        self.bit_granularity == T::zero()
    }

    pub fn continuous_rate(&self, snr: T) -> T {
        if snr > T::zero() {
            (snr / self.gamma_gap).ln_1p() / T::LN_2()
        } else {
            T::zero()
        }
    }

    /// Rate in bps/Hz at receiver SNR `snr`.
    pub fn rate(&self, snr: T) -> T {
        let r = self.continuous_rate(snr);
        if self.is_continuous() {
            r
        } else {
            (r / self.bit_granularity).floor() * self.bit_granularity
        }
    }

    /// SNR achieving rate `r` on the continuous curve: `gap * (2^r - 1)`.
    pub fn inverse(&self, r: T) -> T {
        self.gamma_gap * (T::lit(2.0).powf(r) - T::one())
    }

    /// Half-open SNR interval `[lo, hi)` mapping to the observed rate `r`.
    /// For a continuous map the interval degenerates to the single point
    /// `inverse(r)`.
    pub fn snr_bracket(&self, r: T) -> (T, T) {
        let lo = self.inverse(r);
        if self.is_continuous() {
            (lo, lo)
        } else {
            (lo, self.inverse(r + self.bit_granularity))
        }
    }
}

/// PR transmit power and rate after adaptation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrState<T> {
    pub p_p: T,
    pub r_p: T,
}

impl<T: Scalar> PrState<T> {
    pub fn in_outage(&self) -> bool {
        self.p_p == T::zero()
    }
}

/// A PR link: power policy plus rate map. With `gap_in_policy` set, TCI and
/// WF decisions see `gamma / gamma_gap` instead of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrLink<T> {
    pub policy: PowerPolicy<T>,
    pub rate_fn: RateFunction<T>,
    pub gap_in_policy: bool,
}

impl<T: Scalar> PrLink<T> {
    pub fn new(policy: PowerPolicy<T>, rate_fn: RateFunction<T>) -> Self {
        Self {
            policy,
            rate_fn,
            gap_in_policy: false,
        }
    }

    pub fn with_gap_in_policy(mut self, on: bool) -> Self {
        self.gap_in_policy = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        self.rate_fn.validate()
    }

    fn policy_gain(&self, gamma: T) -> T {
        if self.gap_in_policy {
            gamma / self.rate_fn.gamma_gap
        } else {
            gamma
        }
    }

    pub fn power(&self, gamma: EffectiveGain<T>) -> T {
        self.policy.power(self.policy_gain(gamma.value()))
    }

    pub fn rate(&self, gamma: EffectiveGain<T>) -> T {
        let p = self.power(gamma);
        if p > T::zero() {
            self.rate_fn.rate(gamma.value() * p)
        } else {
            T::zero()
        }
    }

    /// Forward model: the PR's reaction to CR interference power `p_c`.
    pub fn respond(&self, ch: &ChannelState<T>, p_c: T) -> PrState<T> {
        let gamma = ch.effective_gain(p_c);
        let p_p = self.power(gamma);
        let r_p = if p_p > T::zero() {
            self.rate_fn.rate(gamma.value() * p_p)
        } else {
            T::zero()
        };
        PrState { p_p, r_p }
    }

    /// Smallest CR power at which the PR stops transmitting, if any. The PR
    /// transmits for every `p_c` strictly below the returned value.
    pub fn outage_threshold(&self, ch: &ChannelState<T>) -> Option<T> {
        let scale = if self.gap_in_policy {
            self.rate_fn.gamma_gap
        } else {
            T::one()
        };
        // gamma / scale > g_min  <=>  p_c < (h_p / (scale * g_min) - sigma_p2) / h_cp
        let g_min = match self.policy {
            PowerPolicy::ConstantPower { .. } => return None,
            PowerPolicy::TruncatedInversion {
                gamma_threshold, ..
            } => gamma_threshold,
            PowerPolicy::WaterFilling { mu } => mu.recip(),
        };
        if g_min == T::zero() {
            return None;
        }
        let headroom = ch.h_p / (scale * g_min) - ch.sigma_p2;
        if headroom <= T::zero() {
            return Some(T::zero());
        }
        if ch.h_cp == T::zero() {
            return None;
        }
        Some(headroom / ch.h_cp)
    }
}

pub fn pr_power<T: Scalar>(policy: &PowerPolicy<T>, gamma: EffectiveGain<T>) -> T {
    policy.power(gamma.value())
}

pub fn pr_rate<T: Scalar>(
    policy: &PowerPolicy<T>,
    rate_fn: &RateFunction<T>,
    gamma: EffectiveGain<T>,
) -> T {
    PrLink::new(*policy, *rate_fn).rate(gamma)
}

pub fn pr_respond<T: Scalar>(
    policy: &PowerPolicy<T>,
    rate_fn: &RateFunction<T>,
    ch: &ChannelState<T>,
    p_c: T,
) -> PrState<T> {
    PrLink::new(*policy, *rate_fn).respond(ch, p_c)
}
