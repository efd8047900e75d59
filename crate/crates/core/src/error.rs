use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by the numeric core. Offending values are carried as
/// `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("observation `{name}` = {value} must be strictly positive")]
    NonPositiveObservation { name: &'static str, value: f64 },

    #[error("observations are inconsistent: implied gain ratio {ratio} is below 1")]
    InconsistentObservations { ratio: f64 },

    #[error(
        "exact estimation requires a continuous rate function (bit granularity {granularity})"
    )]
    DiscreteRate { granularity: f64 },

    #[error(
        "insufficient SNR for the noise interval: observed power {observed} must exceed the margin {margin}; \
         increase the sample count or lower zeta"
    )]
    InsufficientSnr { observed: f64, margin: f64 },

    #[error(
        "CR power {power} drives the PR into transmit outage (threshold {threshold}); \
         power penalty is undefined there, budget a rate loss instead"
    )]
    PrOutage { power: f64, threshold: f64 },

    #[error("budget `{budget}` does not apply to a {policy} primary link")]
    BudgetMismatch {
        budget: &'static str,
        policy: &'static str,
    },

    #[error("learned gain is zero, so the budget does not bound CR power; configure a power cap")]
    UnboundedPower,

    #[error("no probe produced a usable estimate (probe power {probe_power}); re-probe with a smaller power")]
    NoUsableProbe { probe_power: f64 },

    #[error("probe schedule does not cover the PR training signal")]
    CoverageViolation,

    #[error("invalid sweep: {0}")]
    InvalidSweep(&'static str),
}
