//! Received-power sensing at CR-Tx: sample generation, the sample-mean
//! power estimator and its variance bound, and the Gaussian tail `Q`.

use num_complex::Complex;
use rand::distr::StandardUniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// What the CR sees of the PR at one sensing stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrObservation<T> {
    /// Received PR power. A noisy estimate may be slightly negative.
    pub q: T,
    /// PR rate in bps/Hz.
    pub r: T,
}

impl<T> PrObservation<T> {
    pub fn new(q: T, r: T) -> Self {
        Self { q, r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingConfig<T> {
    /// Samples per sensing stage.
    pub m_samples: usize,
    /// Noise variance at CR-Tx.
    pub sigma_c2: T,
    /// Upper bound on the PR transmit power.
    pub p_max: T,
    /// Confidence parameter; each one-sided bound holds with probability at
    /// least `1 - Q(zeta)`.
    pub zeta: T,
}

impl<T: Scalar> SensingConfig<T> {
    pub fn new(m_samples: usize, sigma_c2: T, p_max: T, zeta: T) -> Result<Self> {
        let cfg = Self {
            m_samples,
            sigma_c2,
            p_max,
            zeta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), Err)
    }

    pub fn violations(&self) -> Vec<Error> {
        let mut v = Vec::new();
        if self.m_samples == 0 {
            v.push(Error::InvalidParameter {
                name: "m_samples",
                value: 0.0,
                reason: "at least one sample is required",
            });
        }
        for (name, x) in [("sigma_c2", self.sigma_c2), ("p_max", self.p_max)] {
            if !(x > T::zero() && x.is_finite()) {
                v.push(Error::InvalidParameter {
                    name,
                    value: x.as_f64(),
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if !(self.zeta >= T::zero() && self.zeta.is_finite()) {
            v.push(Error::InvalidParameter {
                name: "zeta",
                value: self.zeta.as_f64(),
                reason: "must be finite and non-negative",
            });
        }
        v
    }

    pub fn c_hat(&self) -> T {
        c_hat(self)
    }

    /// Half-width `zeta * sqrt(c_hat)` applied to each power estimate.
    pub fn margin(&self) -> T {
        self.zeta * self.c_hat().sqrt()
    }

    pub fn one_sided_confidence(&self) -> T {
        T::one() - q_function(self.zeta)
    }

    /// Union bound over the two sides.
    pub fn two_sided_confidence(&self) -> T {
        T::one() - T::lit(2.0) * q_function(self.zeta)
    }
}

/// Variance bound on the power estimate, valid whenever the true received
/// power is at most `p_max`: `2 sigma^2 (sigma^2 + 2 p_max) / M`.
pub fn c_hat<T: Scalar>(cfg: &SensingConfig<T>) -> T {
    let m = T::from_usize(cfg.m_samples).unwrap_or_else(T::infinity);
    T::lit(2.0) * cfg.sigma_c2 * (cfg.sigma_c2 + T::lit(2.0) * cfg.p_max) / m
}

/// `M` received samples of a PR signal with power `true_q` plus CSCG noise
/// of variance `sigma_c2`, reproducible from `seed`.
///
/// The signal component has constant modulus `sqrt(true_q)` and a uniformly
/// random phase per sample.
pub fn simulate_samples<T: Scalar>(true_q: T, cfg: &SensingConfig<T>, seed: u64) -> Vec<Complex<T>>
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_samples_with(true_q, cfg, &mut rng)
}

pub fn simulate_samples_with<T: Scalar, R: Rng + ?Sized>(
    true_q: T,
    cfg: &SensingConfig<T>,
    rng: &mut R,
) -> Vec<Complex<T>>
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    let amp = true_q.max(T::zero()).sqrt();
    let noise_sd = (cfg.sigma_c2 / T::lit(2.0)).sqrt();
    (0..cfg.m_samples)
        .map(|_| {
            let phase: T = rng.sample::<T, _>(StandardUniform) * T::TAU();
            let signal = Complex::from_polar(amp, phase);
            let nr: T = rng.sample(StandardNormal);
            let ni: T = rng.sample(StandardNormal);
            signal + Complex::new(nr * noise_sd, ni * noise_sd)
        })
        .collect()
}

/// Sample-mean power minus the known noise variance. Not clamped, so the
/// result can be negative.
pub fn estimate_power<T: Scalar>(samples: &[Complex<T>], sigma_c2: T) -> T {
    if samples.is_empty() {
        return -sigma_c2;
    }
    let n = T::from_usize(samples.len()).unwrap_or_else(T::infinity);
    let total = samples.iter().fold(T::zero(), |acc, s| acc + s.norm_sqr());
    total / n - sigma_c2
}

/// Draw `M` samples and return the power estimate directly.
pub fn sense_power<T: Scalar, R: Rng + ?Sized>(true_q: T, cfg: &SensingConfig<T>, rng: &mut R) -> T
where
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    estimate_power(&simulate_samples_with(true_q, cfg, rng), cfg.sigma_c2)
}

/// Standard Gaussian tail probability `P(X > x)`.
pub fn q_function<T: Scalar>(x: T) -> T {
    T::lit(0.5 * libm::erfc(x.as_f64() / std::f64::consts::SQRT_2))
}
