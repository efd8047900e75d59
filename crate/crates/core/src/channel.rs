//! Two-link block-fading channel: one primary (PR) link sharing a band with
//! one cognitive (CR) link. All gains and powers are linear.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Power gains and noise variances for one fading block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState<T> {
    /// PR-Tx to PR-Rx.
    pub h_p: T,
    /// CR-Tx to CR-Rx.
    pub h_c: T,
    /// CR-Tx to PR-Rx. This is what the CR wants to learn.
    pub h_cp: T,
    /// PR-Tx to CR-Rx.
    pub h_pc: T,
    /// PR-Tx to CR-Tx, the path over which the CR senses the PR.
    pub h_pc_tilde: T,
    /// Noise variance at PR-Rx.
    pub sigma_p2: T,
    /// Noise variance at CR-Rx and CR-Tx.
    pub sigma_c2: T,
}

impl<T: Scalar> ChannelState<T> {
    pub fn new(
        h_p: T,
        h_c: T,
        h_cp: T,
        h_pc: T,
        h_pc_tilde: T,
        sigma_p2: T,
        sigma_c2: T,
    ) -> Result<Self> {
        let ch = Self {
            h_p,
            h_c,
            h_cp,
            h_pc,
            h_pc_tilde,
            sigma_p2,
            sigma_c2,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Unit direct and sensing gains, cross gains of 0.5 and unit noise.
    pub fn reference() -> Self {
        let one = T::one();
        let half = T::lit(0.5);
        Self {
            h_p: one,
            h_c: one,
            h_cp: half,
            h_pc: half,
            h_pc_tilde: one,
            sigma_p2: one,
            sigma_c2: one,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), Err)
    }

    /// Every violated invariant, in field order.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        for (name, v) in [
            ("h_p", self.h_p),
            ("h_c", self.h_c),
            ("h_cp", self.h_cp),
            ("h_pc", self.h_pc),
            ("h_pc_tilde", self.h_pc_tilde),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                out.push(Error::InvalidParameter {
                    name,
                    value: v.as_f64(),
                    reason: "channel gains must be finite and non-negative",
                });
            }
        }
        for (name, v) in [("sigma_p2", self.sigma_p2), ("sigma_c2", self.sigma_c2)] {
            if !(v > T::zero()) || !v.is_finite() {
                out.push(Error::InvalidParameter {
                    name,
                    value: v.as_f64(),
                    reason: "noise variances must be finite and strictly positive",
                });
            }
        }
        out
    }

    /// Noise plus CR interference at PR-Rx.
    pub fn pr_noise_plus_interference(&self, p_c: T) -> T {
        self.sigma_p2 + self.h_cp * p_c
    }

    pub fn effective_gain(&self, p_c: T) -> EffectiveGain<T> {
        EffectiveGain(self.h_p / self.pr_noise_plus_interference(p_c))
    }

    /// The quantity the CR learns: `h_cp / sigma_p2`.
    pub fn normalized_cross_gain(&self) -> T {
        self.h_cp / self.sigma_p2
    }
}

/// PR direct gain over noise-plus-interference at PR-Rx, `h_p / N_p`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EffectiveGain<T>(pub T);

impl<T: Scalar> EffectiveGain<T> {
    pub fn value(self) -> T {
        self.0
    }
}

pub fn effective_gain<T: Scalar>(ch: &ChannelState<T>, p_c: T) -> EffectiveGain<T> {
    ch.effective_gain(p_c)
}
