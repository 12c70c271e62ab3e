//! The collaborative constrained sampler.
//!
//! All data sets draw from one append-only table of points. Each data set
//! holds `n_live` live point ids and a FIFO queue of accepted candidates.
//! A candidate at queue position `j` (1-based) is accepted only if its
//! log-likelihood beats the `j`-th smallest value among the data set's live
//! points and the entries already queued, so every queued entry is still
//! above the likelihood threshold when its turn comes.
//!
//! Points are ordered by log-likelihood, with equal values broken by a fixed
//! pseudo-random label per point (see [`tie_label`]). A point's id is the
//! index of the model evaluation that produced it, so every candidate, kept
//! or not, carries a fresh label. Exact ties are common
//! in practice: a line model whose line falls outside the observed range
//! reproduces the no-line likelihood bit for bit over a large part of the
//! prior. Random labels order such a plateau as if it had an infinitesimal
//! random slope, which keeps the volume ladder valid and lets plateau points
//! be shared between data sets.
//!
//! Candidates come from two kinds of draw. A superset draw samples the
//! RadFriends region of all unique live points of a cluster and offers the
//! candidate to every data set in it. A focused draw restricts both the region
//! and the likelihood evaluation to data sets whose queues are still empty.
//! Either way the physical model runs once per candidate.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Model, UnitPoint};
use crate::region::{Region, DEFAULT_BOOTSTRAP_ROUNDS};

/// Index of the model evaluation that produced a point. Ids of stored points
/// are increasing but not contiguous: rejected candidates use up an id too.
pub type PointId = usize;

/// Below this many data sets a draw compares serially even in parallel mode.
const PARALLEL_MIN_TARGETS: usize = 64;

/// Consecutive rejections of one data set before a warning is logged.
const REJECTION_WARNING: u64 = 10_000;

/// A point that was accepted by at least one data set.
#[derive(Debug, Clone)]
pub struct LivePoint {
    pub id: PointId,
    pub unit: UnitPoint,
    pub physical: Vec<f64>,
    loglikes: Vec<(usize, f64)>,
}

impl LivePoint {
    /// Log-likelihood for `dataset`, if it was stored.
    pub fn loglike(&self, dataset: usize) -> Option<f64> {
        self.loglikes
            .iter()
            .find(|(d, _)| *d == dataset)
            .map(|&(_, l)| l)
    }

    pub fn loglikes(&self) -> &[(usize, f64)] {
        &self.loglikes
    }
}

/// An accepted candidate waiting to become live for one data set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEntry {
    pub point_id: PointId,
    pub loglike: f64,
}

/// Tie-break label of a point: a fixed hash of its id, so it is independent
/// of the point's position and likelihood.
pub fn tie_label(id: PointId) -> u64 {
    let mut z = (id as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Total order on `(loglike, id)`: likelihood first, then the tie label.
pub fn rank_cmp(a: &(f64, PointId), b: &(f64, PointId)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| tie_label(a.1).cmp(&tie_label(b.1)))
        .then(a.1.cmp(&b.1))
}

#[derive(Debug, Clone, Default)]
struct Slot {
    /// Sorted ascending by [`rank_cmp`].
    live: Vec<(f64, PointId)>,
    queue: VecDeque<QueueEntry>,
    active: bool,
}

/// Which live points and queued candidates belong to which data set.
#[derive(Debug, Clone)]
pub struct MembershipTable {
    n_live: usize,
    slots: Vec<Slot>,
    /// Number of active data sets each point is live in; absent means zero.
    counts: HashMap<PointId, u32>,
}

impl MembershipTable {
    /// Builds a table from explicit live sets, one per data set.
    pub fn from_live_sets(n_live: usize, sets: Vec<Vec<(f64, PointId)>>) -> Result<Self> {
        let mut table = Self {
            n_live,
            slots: Vec::with_capacity(sets.len()),
            counts: HashMap::new(),
        };
        for (d, mut live) in sets.into_iter().enumerate() {
            if live.len() != n_live {
                return Err(Error::Structural(format!(
                    "dataset {d} has {} live points, expected {n_live}",
                    live.len()
                )));
            }
            live.sort_by(rank_cmp);
            for &(_, id) in &live {
                *table.counts.entry(id).or_insert(0) += 1;
            }
            table.slots.push(Slot {
                live,
                queue: VecDeque::new(),
                active: true,
            });
        }
        Ok(table)
    }

    pub fn n_live(&self) -> usize {
        self.n_live
    }

    pub fn n_datasets(&self) -> usize {
        self.slots.len()
    }

    pub fn is_active(&self, dataset: usize) -> bool {
        self.slots[dataset].active
    }

    pub fn active_datasets(&self) -> Vec<usize> {
        (0..self.slots.len())
            .filter(|&d| self.slots[d].active)
            .collect()
    }

    /// Live `(loglike, id)` pairs of a data set, ascending in loglike.
    pub fn live(&self, dataset: usize) -> &[(f64, PointId)] {
        &self.slots[dataset].live
    }

    pub fn live_ids(&self, dataset: usize) -> impl Iterator<Item = PointId> + '_ {
        self.slots[dataset].live.iter().map(|&(_, id)| id)
    }

    pub fn queue(&self, dataset: usize) -> &VecDeque<QueueEntry> {
        &self.slots[dataset].queue
    }

    /// The current likelihood threshold of a data set.
    pub fn min_loglike(&self, dataset: usize) -> Option<f64> {
        self.slots[dataset].live.first().map(|&(l, _)| l)
    }

    pub fn max_loglike(&self, dataset: usize) -> Option<f64> {
        self.slots[dataset].live.last().map(|&(l, _)| l)
    }

    /// Number of active data sets `id` is live in.
    pub fn multiplicity(&self, id: PointId) -> u32 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    /// Sorted, deduplicated live ids over `datasets`.
    pub fn unique_live_ids(&self, datasets: &[usize]) -> Vec<PointId> {
        let mut ids: Vec<PointId> = datasets.iter().flat_map(|&d| self.live_ids(d)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Whether candidate point `id` with log-likelihood `candidate` would be
    /// accepted at the end of the data set's queue.
    pub fn queue_accept(&self, candidate: f64, id: PointId, dataset: usize) -> bool {
        let slot = &self.slots[dataset];
        if !slot.active {
            return false;
        }
        let j = slot.queue.len() + 1;
        let mut queued: Vec<(f64, PointId)> =
            slot.queue.iter().map(|e| (e.loglike, e.point_id)).collect();
        queued.sort_by(rank_cmp);
        match jth_smallest(&slot.live, &queued, j) {
            Some(threshold) => rank_cmp(&(candidate, id), &threshold).is_gt(),
            None => false,
        }
    }

    /// Appends an entry to a queue. Callers check [`Self::queue_accept`] first.
    pub fn push_queue(&mut self, dataset: usize, entry: QueueEntry) {
        self.slots[dataset].queue.push_back(entry);
    }

    /// Moves the head of each queue into the live set, evicting the lowest
    /// live point.
    pub fn pop_and_replace(&mut self, datasets: &[usize]) -> Result<Vec<Replacement>> {
        if let Some(&d) = datasets
            .iter()
            .find(|&&d| !self.slots[d].active || self.slots[d].queue.is_empty())
        {
            return Err(Error::Contract(format!(
                "dataset {d} has no queued replacement"
            )));
        }
        let mut out = Vec::with_capacity(datasets.len());
        for &d in datasets {
            let slot = &mut self.slots[d];
            let (dead_loglike, dead_id) = slot.live.remove(0);
            let entry = slot.queue.pop_front().expect("checked non-empty");
            let item = (entry.loglike, entry.point_id);
            let pos = slot.live.partition_point(|x| rank_cmp(x, &item).is_lt());
            slot.live.insert(pos, item);

            let dead_vanished = decrement(&mut self.counts, dead_id);
            let c = self.counts.entry(entry.point_id).or_insert(0);
            *c += 1;
            out.push(Replacement {
                dataset: d,
                dead_id,
                dead_loglike,
                promoted_id: entry.point_id,
                promoted_loglike: entry.loglike,
                dead_vanished,
                promoted_new: *c == 1,
            });
        }
        Ok(out)
    }

    /// Removes a data set from all further consideration. Returns how many
    /// points stopped being live anywhere.
    pub fn retire(&mut self, dataset: usize) -> usize {
        let slot = &mut self.slots[dataset];
        if !slot.active {
            return 0;
        }
        slot.active = false;
        slot.queue.clear();
        let live = std::mem::take(&mut slot.live);
        live.iter()
            .filter(|&&(_, id)| decrement(&mut self.counts, id))
            .count()
    }
}

/// Returns whether the count reached zero.
fn decrement(counts: &mut HashMap<PointId, u32>, id: PointId) -> bool {
    match counts.get_mut(&id) {
        Some(c) if *c > 1 => {
            *c -= 1;
            false
        }
        Some(_) => {
            counts.remove(&id);
            true
        }
        None => false,
    }
}

/// `j`-th smallest (1-based) of the union of two ascending sequences.
fn jth_smallest(
    live: &[(f64, PointId)],
    queued: &[(f64, PointId)],
    j: usize,
) -> Option<(f64, PointId)> {
    let (mut a, mut b) = (0, 0);
    let mut last = None;
    for _ in 0..j {
        let take_live = match (live.get(a), queued.get(b)) {
            (Some(x), Some(y)) => rank_cmp(x, y).is_le(),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => return None,
        };
        if take_live {
            last = Some(live[a]);
            a += 1;
        } else {
            last = Some(queued[b]);
            b += 1;
        }
    }
    last
}

/// One data set's dead point and its replacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replacement {
    pub dataset: usize,
    pub dead_id: PointId,
    pub dead_loglike: f64,
    pub promoted_id: PointId,
    pub promoted_loglike: f64,
    /// The dead point is no longer live for any data set.
    pub dead_vanished: bool,
    /// The promoted point was not live for any data set before.
    pub promoted_new: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub n_live: usize,
    pub superset_attempts: usize,
    pub bootstrap_rounds: usize,
    /// Compare a prediction against many data sets on the rayon pool.
    pub parallel: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_live: 400,
            superset_attempts: 10,
            bootstrap_rounds: DEFAULT_BOOTSTRAP_ROUNDS,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DrawCounters {
    pub initial: u64,
    pub superset: u64,
    pub focused: u64,
}

impl DrawCounters {
    /// Unique physical model evaluations so far.
    pub fn total(&self) -> u64 {
        self.initial + self.superset + self.focused
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawKind {
    Superset,
    Focused,
}

/// Result of one constrained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawOutcome {
    /// Data sets whose queue received the candidate.
    pub accepted: Vec<usize>,
    /// Id of the stored point, if anyone accepted it.
    pub point: Option<PointId>,
}

/// Joint constrained sampler over many data sets.
pub struct Sampler<'a, M: Model> {
    model: &'a M,
    data: &'a [M::Data],
    config: SamplerConfig,
    points: Vec<LivePoint>,
    table: MembershipTable,
    counters: DrawCounters,
    attributed: Vec<f64>,
    rejections: Vec<u64>,
    invalid: Vec<bool>,
}

impl<'a, M: Model> Sampler<'a, M> {
    /// Draws `n_live` points from the prior and evaluates each once against
    /// every data set; all data sets start with the same live points.
    pub fn initialize<R: Rng + ?Sized>(
        model: &'a M,
        data: &'a [M::Data],
        config: SamplerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if config.n_live < 2 {
            return Err(Error::Config(format!(
                "n_live must be at least 2, got {}",
                config.n_live
            )));
        }
        if data.is_empty() {
            return Err(Error::Precondition("no datasets".into()));
        }
        if config.bootstrap_rounds == 0 {
            return Err(Error::Config("bootstrap_rounds must be positive".into()));
        }
        let n = data.len();
        let mut sampler = Self {
            model,
            data,
            config,
            points: Vec::with_capacity(config.n_live),
            table: MembershipTable {
                n_live: config.n_live,
                slots: vec![
                    Slot {
                        active: true,
                        ..Slot::default()
                    };
                    n
                ],
                counts: HashMap::new(),
            },
            counters: DrawCounters::default(),
            attributed: vec![0.0; n],
            rejections: vec![0; n],
            invalid: vec![false; n],
        };
        let all: Vec<usize> = (0..n).collect();
        for _ in 0..config.n_live {
            let coords: Vec<f64> = (0..model.ndim()).map(|_| rng.random()).collect();
            let unit = UnitPoint::new(coords).expect("uniform draws lie in the unit cube");
            let (physical, loglikes) = sampler.evaluate(&unit, &all);
            let id = sampler.counters.total() as PointId;
            sampler.counters.initial += 1;
            for (d, &l) in loglikes.iter().enumerate() {
                sampler.table.slots[d].live.push((l, id));
            }
            sampler.table.counts.insert(id, n as u32);
            sampler.points.push(LivePoint {
                id,
                unit,
                physical,
                loglikes: loglikes.into_iter().enumerate().collect(),
            });
        }
        for slot in &mut sampler.table.slots {
            slot.live.sort_by(rank_cmp);
        }
        Ok(sampler)
    }

    pub fn table(&self) -> &MembershipTable {
        &self.table
    }

    /// A stored point.
    ///
    /// # Panics
    /// If no point with this id was stored.
    pub fn point(&self, id: PointId) -> &LivePoint {
        let i = self
            .points
            .binary_search_by_key(&id, |p| p.id)
            .unwrap_or_else(|_| panic!("point {id} was never stored"));
        &self.points[i]
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn counters(&self) -> DrawCounters {
        self.counters
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Model evaluations charged to a data set: each evaluation is split
    /// evenly over the data sets it was compared against.
    pub fn attributed_evaluations(&self, dataset: usize) -> f64 {
        self.attributed[dataset]
    }

    /// Whether a data set ever produced a NaN log-likelihood.
    pub fn is_invalid(&self, dataset: usize) -> bool {
        self.invalid[dataset]
    }

    /// Runs the physical model once and compares with each target.
    fn evaluate(&mut self, unit: &UnitPoint, targets: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let physical = self.model.transform(unit.as_slice());
        let prediction = self.model.predict(&physical);
        let (model, data) = (self.model, self.data);
        let compare = |&d: &usize| model.log_likelihood(&prediction, &data[d]);
        let mut loglikes: Vec<f64> =
            if self.config.parallel && targets.len() >= PARALLEL_MIN_TARGETS {
                targets.par_iter().map(compare).collect()
            } else {
                targets.iter().map(compare).collect()
            };
        let share = 1.0 / targets.len() as f64;
        for (&d, l) in targets.iter().zip(loglikes.iter_mut()) {
            self.attributed[d] += share;
            if l.is_nan() {
                self.invalid[d] = true;
                *l = f64::NEG_INFINITY;
            }
        }
        (physical, loglikes)
    }

    /// Fits a RadFriends region to the unique live points of `datasets`.
    pub fn fit_region<R: Rng + ?Sized>(&self, datasets: &[usize], rng: &mut R) -> Result<Region> {
        let ids = self.table.unique_live_ids(datasets);
        let pts: Vec<&[f64]> = ids
            .iter()
            .map(|&id| self.point(id).unit.as_slice())
            .collect();
        Region::fit(&pts, self.config.bootstrap_rounds, rng)
    }

    /// Samples `region`, evaluates the model once and offers the candidate to
    /// every data set in `targets`.
    pub fn draw_from<R: Rng + ?Sized>(
        &mut self,
        region: &Region,
        targets: &[usize],
        kind: DrawKind,
        rng: &mut R,
    ) -> DrawOutcome {
        let unit = region.sample(rng);
        let (physical, loglikes) = self.evaluate(&unit, targets);
        let id = self.counters.total() as PointId;
        match kind {
            DrawKind::Superset => self.counters.superset += 1,
            DrawKind::Focused => self.counters.focused += 1,
        }
        let accepted: Vec<(usize, f64)> = targets
            .iter()
            .zip(&loglikes)
            .filter(|&(&d, &l)| self.table.queue_accept(l, id, d))
            .map(|(&d, &l)| (d, l))
            .collect();
        for &d in targets {
            if accepted.iter().any(|&(a, _)| a == d) {
                self.rejections[d] = 0;
            } else {
                self.rejections[d] += 1;
                if self.rejections[d] == REJECTION_WARNING {
                    log::warn!("dataset {d}: {REJECTION_WARNING} consecutive candidates rejected");
                }
            }
        }
        if accepted.is_empty() {
            return DrawOutcome {
                accepted: Vec::new(),
                point: None,
            };
        }
        for &(d, l) in &accepted {
            self.table.push_queue(
                d,
                QueueEntry {
                    point_id: id,
                    loglike: l,
                },
            );
        }
        let accepted_ids = accepted.iter().map(|&(d, _)| d).collect();
        self.points.push(LivePoint {
            id,
            unit,
            physical,
            loglikes: accepted,
        });
        DrawOutcome {
            accepted: accepted_ids,
            point: Some(id),
        }
    }

    /// One draw from the joint region of all data sets in `cluster`.
    pub fn superset_draw<R: Rng + ?Sized>(
        &mut self,
        cluster: &[usize],
        rng: &mut R,
    ) -> Result<DrawOutcome> {
        let region = self.fit_region(cluster, rng)?;
        Ok(self.draw_from(&region, cluster, DrawKind::Superset, rng))
    }

    /// One draw restricted to `needy` data sets.
    pub fn focused_draw<R: Rng + ?Sized>(
        &mut self,
        needy: &[usize],
        rng: &mut R,
    ) -> Result<DrawOutcome> {
        if needy.is_empty() {
            return Err(Error::Precondition("focused draw needs a data set".into()));
        }
        let region = self.fit_region(needy, rng)?;
        Ok(self.draw_from(&region, needy, DrawKind::Focused, rng))
    }

    /// Draws until every queue in `cluster` holds at least one entry.
    ///
    /// Superset draws come first, up to `superset_attempts`; the remaining
    /// empty queues are then served by focused draws. The live sets do not
    /// change inside this call, so the superset region is fitted once and
    /// reused for focused draws until the set of needy data sets has halved:
    /// a region built on more live points still covers every needy contour.
    pub fn fill_queues<R: Rng + ?Sized>(&mut self, cluster: &[usize], rng: &mut R) -> Result<()> {
        let empty = |table: &MembershipTable, d: &usize| table.queue(*d).is_empty();
        let mut needy: Vec<usize> = cluster
            .iter()
            .copied()
            .filter(|d| empty(&self.table, d))
            .collect();
        if needy.is_empty() {
            return Ok(());
        }
        let region = self.fit_region(cluster, rng)?;
        for _ in 0..self.config.superset_attempts {
            self.draw_from(&region, cluster, DrawKind::Superset, rng);
            needy.retain(|d| empty(&self.table, d));
            if needy.is_empty() {
                return Ok(());
            }
        }
        // the superset region covers every needy contour until refitted
        let (mut region, mut fitted_for) = (region, cluster.len());
        while !needy.is_empty() {
            if 2 * needy.len() <= fitted_for {
                region = self.fit_region(&needy, rng)?;
                fitted_for = needy.len();
            }
            self.draw_from(&region, &needy, DrawKind::Focused, rng);
            needy.retain(|d| empty(&self.table, d));
        }
        Ok(())
    }

    /// Advances every data set in `cluster` by one dead point.
    pub fn pop_and_replace(&mut self, cluster: &[usize]) -> Result<Vec<Replacement>> {
        self.table.pop_and_replace(cluster)
    }

    pub fn retire(&mut self, dataset: usize) -> usize {
        self.table.retire(dataset)
    }
}
