//! Collaborative nested sampling.
//!
//! Analyses many data sets at once with nested sampling, sharing physical
//! model evaluations between runs through joint likelihood-constrained draws.
//! The number of model evaluations grows sub-linearly with the number of data
//! sets whenever their likelihood contours overlap.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: the Gaussian emission-line model, its prior transform, the
//!   Gaussian log-likelihood and the analytic no-line evidence; plus the
//!   [`Model`] trait that splits a likelihood into a slow prediction and a fast
//!   per-data-set comparison.
//! * [`region`]: RadFriends contour reconstruction and uniform sampling from
//!   the resulting union of balls.
//! * [`sampler`]: the shared live-point table, per-data-set queues, superset and
//!   focused draws.
//! * [`cluster`]: splitting data sets into groups that no longer share live
//!   points.
//! * [`integrator`]: per-data-set evidence bookkeeping and the run loop.
//! * [`simulate`]: the toy spectroscopic survey and signal-free null surveys.

pub mod cluster;
pub mod error;
pub mod integrator;
mod kdtree;
pub mod model;
pub mod region;
pub mod sampler;
pub mod simulate;
pub mod stats;

pub use cluster::{ClusterPartition, ClusterTracker};
pub use error::{Error, Result};
pub use integrator::{
    run_all, RunConfig, RunFailure, RunOutcome, RunReport, RunResult, RunState, RunTelemetry,
};
pub use model::{Dataset, LineModel, Model, PhysicalParams, UnitPoint};
pub use region::Region;
pub use sampler::{LivePoint, MembershipTable, PointId, QueueEntry, Sampler, SamplerConfig};
pub use simulate::{generate_null, generate_survey, SurveySpec, TruthRow};

/// Numerically stable `ln(exp(a) + exp(b))`.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}
