//! Per-data-set nested sampling bookkeeping and the collaborative run loop.
//!
//! Every data set keeps its own volume ladder, evidence accumulator and dead
//! point archive. The run loop advances all unconverged data sets one
//! iteration at a time, cluster by cluster, and retires each data set as soon
//! as its remaining-evidence bound drops below the tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::ClusterTracker;
use crate::error::{Error, Result};
use crate::logaddexp;
use crate::model::Model;
use crate::region::DEFAULT_BOOTSTRAP_ROUNDS;
use crate::sampler::{DrawCounters, PointId, Sampler, SamplerConfig};
use crate::stats::systematic_resample;

/// Settings for a collaborative run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_live: usize,
    pub superset_attempts: usize,
    pub bootstrap_rounds: usize,
    pub seed: u64,
    /// Stop once the remaining evidence could raise ln Z by less than this.
    pub convergence_dlogz: f64,
    pub posterior_resample_size: usize,
    /// Split the data sets into independent runs of at most this many.
    pub chunk_size: Option<usize>,
    /// Draw each shrinkage factor from Beta(n_live, 1) instead of using its
    /// expectation.
    pub stochastic_ladder: bool,
    /// Compare predictions with data sets on the rayon pool. Results do not
    /// depend on this flag.
    pub parallel: bool,
    /// Cluster rebuild cadence in iterations; `None` means `n_live / 10`.
    pub rebuild_every: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_live: 400,
            superset_attempts: 10,
            bootstrap_rounds: DEFAULT_BOOTSTRAP_ROUNDS,
            seed: 1,
            convergence_dlogz: 0.5,
            posterior_resample_size: 1000,
            chunk_size: None,
            stochastic_ladder: false,
            parallel: false,
            rebuild_every: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_live", self.n_live),
            ("superset_attempts", self.superset_attempts),
            ("bootstrap_rounds", self.bootstrap_rounds),
            ("posterior_resample_size", self.posterior_resample_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.n_live < 2 {
            return Err(Error::Config("n_live must be at least 2".into()));
        }
        if !(self.convergence_dlogz > 0.0 && self.convergence_dlogz.is_finite()) {
            return Err(Error::Config(format!(
                "convergence_dlogz must be positive, got {}",
                self.convergence_dlogz
            )));
        }
        if self.chunk_size == Some(0) {
            return Err(Error::Config("chunk_size must be positive".into()));
        }
        if self.rebuild_every == Some(0) {
            return Err(Error::Config("rebuild_every must be positive".into()));
        }
        Ok(())
    }

    fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            n_live: self.n_live,
            superset_attempts: self.superset_attempts,
            bootstrap_rounds: self.bootstrap_rounds,
            parallel: self.parallel,
        }
    }
}

/// A removed point with its share of the prior volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadPoint {
    pub point_id: PointId,
    pub loglike: f64,
    pub ln_weight: f64,
}

/// Nested sampling state of one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub dataset: usize,
    pub n_live: usize,
    pub iteration: usize,
    pub ln_volume: f64,
    pub dead: Vec<DeadPoint>,
    pub ln_z: f64,
    /// Information (KL divergence of posterior from prior) in nats.
    pub info_h: f64,
    pub converged: bool,
}

impl RunState {
    pub fn new(dataset: usize, n_live: usize) -> Self {
        Self {
            dataset,
            n_live,
            iteration: 0,
            ln_volume: 0.0,
            dead: Vec::new(),
            ln_z: f64::NEG_INFINITY,
            info_h: 0.0,
            converged: false,
        }
    }

    /// Expected log shrinkage per iteration, `-1/n_live`.
    pub fn expected_ln_shrinkage(&self) -> f64 {
        -1.0 / self.n_live as f64
    }

    /// Records the next dead point; the volume shrinks by `exp(ln_shrinkage)`.
    pub fn record(&mut self, point_id: PointId, loglike: f64, ln_shrinkage: f64) {
        // w = V_{i-1} - V_i = V_{i-1} (1 - t)
        let ln_weight = self.ln_volume + (-ln_shrinkage.exp_m1()).ln();
        self.ln_volume += ln_shrinkage;
        self.iteration += 1;
        self.accumulate(loglike, ln_weight);
        self.dead.push(DeadPoint {
            point_id,
            loglike,
            ln_weight,
        });
    }

    /// Adds `L w` to the evidence and updates the information.
    fn accumulate(&mut self, loglike: f64, ln_weight: f64) {
        let ln_wl = loglike + ln_weight;
        if ln_wl == f64::NEG_INFINITY || ln_wl.is_nan() {
            return;
        }
        let ln_z_new = logaddexp(self.ln_z, ln_wl);
        let old = if self.ln_z == f64::NEG_INFINITY {
            0.0
        } else {
            (self.ln_z - ln_z_new).exp() * (self.info_h + self.ln_z)
        };
        self.info_h = (ln_wl - ln_z_new).exp() * loglike + old - ln_z_new;
        self.ln_z = ln_z_new;
    }

    /// Increase of ln Z if every remaining point had the highest live
    /// likelihood.
    pub fn remaining_dlogz(&self, max_live_loglike: f64) -> f64 {
        let remainder = max_live_loglike + self.ln_volume;
        if remainder == f64::NEG_INFINITY {
            return 0.0;
        }
        logaddexp(self.ln_z, remainder) - self.ln_z
    }

    pub fn ln_z_err(&self) -> f64 {
        (self.info_h.max(0.0) / self.n_live as f64).sqrt()
    }
}

/// Convergence test: `ln(Z + L_max V) - ln Z < dlogz`.
pub fn check_converged(state: &RunState, max_live_loglike: f64, dlogz: f64) -> bool {
    state.remaining_dlogz(max_live_loglike) < dlogz
}

/// Evidence and posterior of one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub dataset: usize,
    pub ln_z: f64,
    pub ln_z_err: f64,
    pub info_h: f64,
    /// Physical coordinates of the weighted posterior samples.
    pub samples: Vec<Vec<f64>>,
    /// Normalised importance weights, aligned with `samples`.
    pub weights: Vec<f64>,
    /// Systematic resample of `samples` to equal weights.
    pub equal_weighted: Vec<Vec<f64>>,
    pub n_iterations: usize,
    pub model_evaluations_attributed: f64,
    /// Remaining-evidence bound on the change of ln Z when the run stopped.
    pub remaining_dlogz: f64,
}

/// Why a data set produced no result.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub dataset: usize,
    pub reason: String,
}

pub type RunOutcome = std::result::Result<RunResult, RunFailure>;

/// Adds the remaining live points, each carrying `V / n_live`, and builds
/// the weighted and equal-weight posteriors.
///
/// `live` must be sorted ascending in log-likelihood.
pub fn finalize<R: Rng + ?Sized>(
    mut state: RunState,
    live: &[(f64, PointId)],
    physical: impl Fn(PointId) -> Vec<f64>,
    resample_size: usize,
    attributed: f64,
    rng: &mut R,
) -> RunResult {
    let max_live = live.last().map_or(f64::NEG_INFINITY, |&(l, _)| l);
    let remaining_dlogz = state.remaining_dlogz(max_live);
    let ln_share = state.ln_volume - (live.len() as f64).ln();
    let mut entries: Vec<(PointId, f64, f64)> = state
        .dead
        .iter()
        .map(|d| (d.point_id, d.loglike, d.ln_weight))
        .collect();
    for &(loglike, id) in live {
        state.accumulate(loglike, ln_share);
        entries.push((id, loglike, ln_share));
    }
    let mut weights: Vec<f64> = entries
        .iter()
        .map(|&(_, l, w)| (l + w - state.ln_z).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    let samples: Vec<Vec<f64>> = entries.iter().map(|&(id, _, _)| physical(id)).collect();
    let equal_weighted = systematic_resample(&weights, resample_size, rng)
        .into_iter()
        .map(|i| samples[i].clone())
        .collect();
    RunResult {
        dataset: state.dataset,
        ln_z: state.ln_z,
        ln_z_err: state.ln_z_err(),
        info_h: state.info_h,
        samples,
        weights,
        equal_weighted,
        n_iterations: state.iteration,
        model_evaluations_attributed: attributed,
        remaining_dlogz,
    }
}

/// Counters gathered over a whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunTelemetry {
    pub draws: DrawCounters,
    /// Collaborative iterations (the longest data set's iteration count).
    pub iterations: usize,
    /// Points stored in the shared table.
    pub stored_points: usize,
    /// Largest number of simultaneous clusters.
    pub max_clusters: usize,
    /// Number of independent runs (chunks).
    pub chunks: usize,
}

impl RunTelemetry {
    /// Unique physical model evaluations.
    pub fn total_evaluations(&self) -> u64 {
        self.draws.total()
    }

    fn merge(&mut self, other: &RunTelemetry) {
        self.draws.initial += other.draws.initial;
        self.draws.superset += other.draws.superset;
        self.draws.focused += other.draws.focused;
        self.iterations = self.iterations.max(other.iterations);
        self.stored_points += other.stored_points;
        self.max_clusters = self.max_clusters.max(other.max_clusters);
        self.chunks += other.chunks;
    }
}

/// Per-data-set outcomes, in input order, plus run telemetry.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcomes: Vec<RunOutcome>,
    pub telemetry: RunTelemetry,
}

/// Stream offset for posterior resampling, kept apart from the sampler's.
const RESAMPLE_STREAM: u64 = 1 << 40;
/// Stream offset for the stochastic volume ladder.
const LADDER_STREAM: u64 = 1 << 41;

/// Analyses all data sets, collaboratively within each chunk.
pub fn run_all<M: Model>(model: &M, data: &[M::Data], config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Precondition("no datasets to analyse".into()));
    }
    let chunk = config.chunk_size.unwrap_or(data.len());
    let mut report = RunReport {
        outcomes: Vec::with_capacity(data.len()),
        telemetry: RunTelemetry::default(),
    };
    for (c, part) in data.chunks(chunk).enumerate() {
        let offset = c * chunk;
        let cfg = RunConfig {
            seed: config.seed.wrapping_add(c as u64),
            ..config.clone()
        };
        let sub = run_collaborative(model, part, &cfg)?;
        report
            .outcomes
            .extend(sub.outcomes.into_iter().map(|o| match o {
                Ok(mut r) => {
                    r.dataset += offset;
                    Ok(r)
                }
                Err(mut f) => {
                    f.dataset += offset;
                    Err(f)
                }
            }));
        report.telemetry.merge(&sub.telemetry);
    }
    Ok(report)
}

fn run_collaborative<M: Model>(
    model: &M,
    data: &[M::Data],
    config: &RunConfig,
) -> Result<RunReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ladder_rng = ChaCha8Rng::seed_from_u64(config.seed);
    ladder_rng.set_stream(LADDER_STREAM);
    let mut sampler = Sampler::initialize(model, data, config.sampler(), &mut rng)?;
    let n = data.len();
    let mut states: Vec<RunState> = (0..n).map(|d| RunState::new(d, config.n_live)).collect();
    let mut outcomes: Vec<Option<RunOutcome>> = vec![None; n];
    let mut tracker = match config.rebuild_every {
        Some(k) => ClusterTracker::with_rebuild_every(sampler.table(), k),
        None => ClusterTracker::new(sampler.table()),
    };
    let mut telemetry = RunTelemetry {
        chunks: 1,
        ..Default::default()
    };

    loop {
        let groups: Vec<Vec<usize>> = tracker.groups().map(<[usize]>::to_vec).collect();
        if groups.is_empty() {
            break;
        }
        telemetry.max_clusters = telemetry.max_clusters.max(groups.len());
        telemetry.iterations += 1;
        let mut replacements = Vec::new();
        for group in &groups {
            sampler.fill_queues(group, &mut rng)?;
            replacements.extend(sampler.pop_and_replace(group)?);
        }
        let ln_shrinkage = if config.stochastic_ladder {
            None
        } else {
            Some(-1.0 / config.n_live as f64)
        };
        for r in &replacements {
            let t = ln_shrinkage.unwrap_or_else(|| {
                let u: f64 = ladder_rng.random();
                u.ln() / config.n_live as f64
            });
            states[r.dataset].record(r.dead_id, r.dead_loglike, t);
        }

        let mut retired = Vec::new();
        for &d in groups.iter().flatten() {
            let table = sampler.table();
            let outcome = if sampler.is_invalid(d) {
                Some(Err(RunFailure {
                    dataset: d,
                    reason: "likelihood returned NaN".into(),
                }))
            } else {
                let max_live = table.max_loglike(d).unwrap_or(f64::NEG_INFINITY);
                if check_converged(&states[d], max_live, config.convergence_dlogz) {
                    let mut state =
                        std::mem::replace(&mut states[d], RunState::new(d, config.n_live));
                    state.converged = true;
                    let mut resample_rng = ChaCha8Rng::seed_from_u64(config.seed);
                    resample_rng.set_stream(RESAMPLE_STREAM + d as u64);
                    Some(Ok(finalize(
                        state,
                        table.live(d),
                        |id| sampler.point(id).physical.clone(),
                        config.posterior_resample_size,
                        sampler.attributed_evaluations(d),
                        &mut resample_rng,
                    )))
                } else {
                    None
                }
            };
            if let Some(o) = outcome {
                outcomes[d] = Some(o);
                sampler.retire(d);
                retired.push(d);
            }
        }
        tracker.maintain(sampler.table(), &replacements, &retired);
    }

    telemetry.draws = sampler.counters();
    telemetry.stored_points = sampler.n_points();
    Ok(RunReport {
        outcomes: outcomes
            .into_iter()
            .enumerate()
            .map(|(d, o)| {
                o.unwrap_or_else(|| {
                    Err(RunFailure {
                        dataset: d,
                        reason: "run ended without converging".into(),
                    })
                })
            })
            .collect(),
        telemetry,
    })
}
