//! Block timing between the unsynchronised PR and CR links.
//!
//! All times are in seconds. `t = 0` is when PR-Tx starts a block; the CR
//! takes the arrival of that block at CR-Tx (delay `tau_pc`) as its own
//! reference. A probe sent `lead` seconds ahead of that reference reaches
//! PR-Rx at `tau_pc + tau_cp - lead`, while the PR training signal occupies
//! `[tau_p, tau_p + t_p]` there.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig<T> {
    /// PR-Tx to PR-Rx.
    pub tau_p: T,
    /// PR-Tx to CR-Tx.
    pub tau_pc: T,
    /// CR-Tx to PR-Rx.
    pub tau_cp: T,
    /// Known bound on every propagation delay.
    pub tau_max: T,
    /// PR training duration.
    pub t_p: T,
}

impl<T: Scalar> TimingConfig<T> {
    pub fn new(tau_p: T, tau_pc: T, tau_cp: T, tau_max: T, t_p: T) -> Result<Self> {
        let cfg = Self {
            tau_p,
            tau_pc,
            tau_cp,
            tau_max,
            t_p,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), Err)
    }

    pub fn violations(&self) -> Vec<Error> {
        let mut v = Vec::new();
        if !(self.tau_max >= T::zero() && self.tau_max.is_finite()) {
            v.push(Error::InvalidParameter {
                name: "tau_max",
                value: self.tau_max.as_f64(),
                reason: "delay bound must be finite and non-negative",
            });
        }
        for (name, d) in [
            ("tau_p", self.tau_p),
            ("tau_pc", self.tau_pc),
            ("tau_cp", self.tau_cp),
        ] {
            if !(d >= T::zero() && d <= self.tau_max) {
                v.push(Error::InvalidParameter {
                    name,
                    value: d.as_f64(),
                    reason: "delay must lie in [0, tau_max]",
                });
            }
        }
        if !(self.tau_p <= self.tau_pc + self.tau_cp) {
            v.push(Error::InvalidParameter {
                name: "tau_p",
                value: self.tau_p.as_f64(),
                reason: "direct PR delay cannot exceed the relayed path tau_pc + tau_cp",
            });
        }
        if !(self.t_p > T::zero() && self.t_p.is_finite()) {
            v.push(Error::InvalidParameter {
                name: "t_p",
                value: self.t_p.as_f64(),
                reason: "training duration must be finite and positive",
            });
        }
        v
    }
}

/// How far ahead of its PR-derived reference the CR starts probing.
pub fn probe_lead<T: Scalar>(cfg: &TimingConfig<T>) -> T {
    T::lit(2.0) * cfg.tau_max
}

pub fn probe_duration<T: Scalar>(cfg: &TimingConfig<T>) -> T {
    cfg.t_p + T::lit(2.0) * cfg.tau_max
}

/// Closed time window `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub start: T,
    pub end: T,
}

impl<T: Scalar> Window<T> {
    pub fn duration(&self) -> T {
        self.end - self.start
    }

    /// Containment, tolerant to rounding at the scale `tol`.
    pub fn covers(&self, other: &Window<T>, tol: T) -> bool {
        self.start <= other.start + tol && self.end + tol >= other.end
    }
}

/// Arrival window of the PR training signal at PR-Rx.
pub fn training_window<T: Scalar>(cfg: &TimingConfig<T>) -> Window<T> {
    Window {
        start: cfg.tau_p,
        end: cfg.tau_p + cfg.t_p,
    }
}

/// Arrival window at PR-Rx of a probe with the given lead and duration.
pub fn probe_window<T: Scalar>(cfg: &TimingConfig<T>, lead: T, duration: T) -> Window<T> {
    let start = cfg.tau_pc + cfg.tau_cp - lead;
    Window {
        start,
        end: start + duration,
    }
}

/// Whether the probe overlaps the whole PR training signal at PR-Rx when
/// sent with the given lead and duration.
pub fn verify_coverage_with<T: Scalar>(cfg: &TimingConfig<T>, lead: T, duration: T) -> bool {
    let probe = probe_window(cfg, lead, duration);
    let training = training_window(cfg);
    let scale = cfg.tau_max.abs() + cfg.t_p.abs() + lead.abs() + duration.abs();
    probe.covers(&training, T::lit(16.0) * T::epsilon() * scale)
}

/// Coverage with the lead and duration from [`probe_lead`] and
/// [`probe_duration`].
pub fn verify_coverage<T: Scalar>(cfg: &TimingConfig<T>) -> bool {
    verify_coverage_with(cfg, probe_lead(cfg), probe_duration(cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sensing,
    Probing,
    Resensing,
    Data,
}

/// Four contiguous CR stages on the CR clock.
///
/// Block `0` is sensed, the probe straddles the start of block `1` so that
/// PR-Rx measures it during training, the PR applies its new power and rate
/// from block `2`, which the CR re-senses before transmitting data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSchedule<T> {
    pub sensing: Window<T>,
    pub probing: Window<T>,
    pub resensing: Window<T>,
    pub data: Window<T>,
    /// Transmitted probe, a sub-window of `probing`.
    pub probe: Window<T>,
    pub probe_lead: T,
    pub probe_duration: T,
}

impl<T: Scalar> BlockSchedule<T> {
    /// Lay out the stages for PR blocks of length `block_len`.
    pub fn plan(
        cfg: &TimingConfig<T>,
        block_len: T,
        resensing_len: T,
        data_len: T,
    ) -> Result<Self> {
        cfg.validate()?;
        let lead = probe_lead(cfg);
        let duration = probe_duration(cfg);
        if !(lead > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tau_max",
                value: cfg.tau_max.as_f64(),
                reason: "a block schedule needs a positive probe lead",
            });
        }
        let sensing_end = block_len - lead;
        if !(sensing_end > cfg.t_p) {
            return Err(Error::InvalidParameter {
                name: "block_len",
                value: block_len.as_f64(),
                reason: "block too short to sense PR data before probing",
            });
        }
        if !(duration <= block_len + lead) {
            return Err(Error::InvalidParameter {
                name: "block_len",
                value: block_len.as_f64(),
                reason: "probe would run into the adapted block",
            });
        }
        for (name, v) in [("resensing_len", resensing_len), ("data_len", data_len)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v.as_f64(),
                    reason: "stage length must be positive",
                });
            }
        }
        let adapted = block_len + block_len;
        let resensing_end = adapted + resensing_len;
        Ok(Self {
            sensing: Window {
                start: cfg.t_p,
                end: sensing_end,
            },
            probing: Window {
                start: sensing_end,
                end: adapted,
            },
            resensing: Window {
                start: adapted,
                end: resensing_end,
            },
            data: Window {
                start: resensing_end,
                end: resensing_end + data_len,
            },
            probe: Window {
                start: sensing_end,
                end: sensing_end + duration,
            },
            probe_lead: lead,
            probe_duration: duration,
        })
    }

    pub fn stages(&self) -> [(Stage, Window<T>); 4] {
        [
            (Stage::Sensing, self.sensing),
            (Stage::Probing, self.probing),
            (Stage::Resensing, self.resensing),
            (Stage::Data, self.data),
        ]
    }

    pub fn is_contiguous(&self) -> bool {
        let s = self.stages();
        s.windows(2).all(|w| w[0].1.end == w[1].1.start) && s.iter().all(|(_, w)| w.end > w.start)
    }
}
