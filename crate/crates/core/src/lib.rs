//! Active learning of the secondary-to-primary interference gain from the
//! primary link's own power/rate adaptation, and supervised secondary
//! transmission planned against the learned gain.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`). The aliases at the
//! bottom of this file fix the scalar to `f64`, which is what the CLI and the
//! simulation driver use.
//!
//! Module map:
//!
//! - [`channel`]: link gains, noise variances and the effective PR gain.
//! - [`pr_link`]: CP / TCI / WF power policies and the PR rate map.
//! - [`sensing`]: noisy received-power estimation and the Gaussian tail.
//! - [`estimator`]: point and interval estimates of `h_cp / sigma_p^2`.
//! - [`supervised`]: PR penalty prediction, budget inversion, CR rate.
//! - [`protocol`]: probe timing and the four-stage CR block schedule.
//! - [`sim`]: scenario sweeps tying everything together.

// `!(x > 0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimator;
pub mod pr_link;
pub mod protocol;
pub mod scalar;
pub mod sensing;
pub mod sim;
pub mod supervised;

pub use channel::{effective_gain, ChannelState, EffectiveGain};
pub use error::{Error, Result};
pub use estimator::{EstimateKind, GainEstimate, ProbeRecord};
pub use pr_link::{PolicyKind, PowerPolicy, PrLink, PrState, RateFunction};
pub use protocol::{BlockSchedule, TimingConfig};
pub use scalar::Scalar;
pub use sensing::{PrObservation, SensingConfig};
pub use sim::{ScenarioConfig, SweepResult};
pub use supervised::{PenaltyBudget, TxPlan};

pub type Channel = ChannelState<f64>;
pub type ChannelF32 = ChannelState<f32>;
pub type Policy = PowerPolicy<f64>;
pub type PolicyF32 = PowerPolicy<f32>;
pub type Link = PrLink<f64>;
pub type LinkF32 = PrLink<f32>;
pub type Rate = RateFunction<f64>;
pub type RateF32 = RateFunction<f32>;
pub type Estimate = GainEstimate<f64>;
pub type EstimateF32 = GainEstimate<f32>;
pub type Scenario = ScenarioConfig<f64>;
pub type Sweep = SweepResult<f64>;
