//! RadFriends: likelihood-contour reconstruction as a union of balls.
//!
//! The live points are standardised by their per-axis standard deviation. A
//! radius is calibrated by bootstrap cross-validation: each round resamples
//! the points with replacement, and the points never drawn are matched to
//! their nearest drawn neighbour. The region is the union of balls of the
//! largest such distance, over all rounds, around every point.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::model::UnitPoint;

/// Axis scale substituted when the points do not vary along an axis.
pub const DEGENERATE_SCALE: f64 = 1e-10;

pub const DEFAULT_BOOTSTRAP_ROUNDS: usize = 10;

/// A union of equal balls, in standardised coordinates, around a point set.
#[derive(Debug, Clone)]
pub struct Region {
    dim: usize,
    /// Centres in unit-cube coordinates, row-major.
    centers: Vec<f64>,
    /// Centres divided by `scales`.
    scaled: Vec<f64>,
    scales: Vec<f64>,
    radius: f64,
    tree: KdTree,
}

impl Region {
    /// Builds a region from explicit parts.
    pub fn new<P: AsRef<[f64]>>(centers: &[P], scales: Vec<f64>, radius: f64) -> Result<Self> {
        let dim = scales.len();
        if dim == 0 {
            return Err(Error::Precondition("region needs at least one axis".into()));
        }
        if centers.is_empty() {
            return Err(Error::Precondition(
                "region needs at least one center".into(),
            ));
        }
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Domain("axis scales must be positive".into()));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("invalid radius {radius}")));
        }
        let mut flat = Vec::with_capacity(centers.len() * dim);
        for c in centers {
            let c = c.as_ref();
            if c.len() != dim {
                return Err(Error::Structural(format!(
                    "center has {} coordinates, expected {dim}",
                    c.len()
                )));
            }
            flat.extend_from_slice(c);
        }
        let scaled: Vec<f64> = flat
            .chunks_exact(dim)
            .flat_map(|c| c.iter().zip(&scales).map(|(x, s)| x / s))
            .collect();
        let tree = KdTree::build(&scaled, dim);
        Ok(Self {
            dim,
            centers: flat,
            scaled,
            scales,
            radius,
            tree,
        })
    }

    /// Fits the region to `points`.
    ///
    /// Each bootstrap round draws `points.len()` indices uniformly with
    /// replacement from `rng`, in order; nothing else is consumed from it.
    pub fn fit<P: AsRef<[f64]>, R: Rng + ?Sized>(
        points: &[P],
        bootstrap_rounds: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::Precondition(format!(
                "RadFriends needs at least 2 points, got {n}"
            )));
        }
        if bootstrap_rounds == 0 {
            return Err(Error::Precondition(
                "bootstrap_rounds must be at least 1".into(),
            ));
        }
        let scales = axis_scales(points)?;
        let mut region = Self::new(points, scales, 0.0)?;
        region.radius = region.bootstrap_radius(bootstrap_rounds, rng);
        Ok(region)
    }

    fn bootstrap_radius<R: Rng + ?Sized>(&self, rounds: usize, rng: &mut R) -> f64 {
        let n = self.len();
        let mut kept = vec![false; n];
        let mut radius_sq: f64 = 0.0;
        let mut any_left_out = false;
        for _ in 0..rounds {
            kept.iter_mut().for_each(|k| *k = false);
            for _ in 0..n {
                kept[rng.random_range(0..n)] = true;
            }
            for i in (0..n).filter(|&i| !kept[i]) {
                any_left_out = true;
                let d = self
                    .tree
                    .nearest_sq_above(self.scaled_center(i), &kept, radius_sq);
                radius_sq = radius_sq.max(d);
            }
        }
        if !any_left_out {
            // every round drew all points: fall back to leave-one-out
            let mut others = vec![true; n];
            for i in 0..n {
                others[i] = false;
                let d = self
                    .tree
                    .nearest_sq_above(self.scaled_center(i), &others, radius_sq);
                radius_sq = radius_sq.max(d);
                others[i] = true;
            }
        }
        radius_sq.sqrt()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of centres.
    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn axis_scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    fn scaled_center(&self, i: usize) -> &[f64] {
        &self.scaled[i * self.dim..(i + 1) * self.dim]
    }

    fn standardise(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.scales).map(|(x, s)| x / s).collect()
    }

    /// Standardised euclidean distance between two unit-cube points.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.scales)
            .map(|((x, y), s)| ((x - y) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Whether `u` lies within `radius` of some centre.
    pub fn contains(&self, u: &[f64]) -> bool {
        self.multiplicity(u, 0) > 0
    }

    /// Number of centres within `radius` of `u`, saturating above `limit`.
    pub fn multiplicity(&self, u: &[f64], limit: usize) -> usize {
        let q = self.standardise(u);
        self.tree.count_within(&q, self.radius * self.radius, limit)
    }

    /// Draws a point uniformly from the region intersected with the unit cube.
    ///
    /// A centre is picked at random and a point drawn uniformly from its ball;
    /// candidates outside the cube are rejected and the rest are accepted with
    /// probability `1/m`, where `m` is the number of balls covering them.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitPoint {
        let dim = self.dim;
        let r_sq = self.radius * self.radius;
        let mut q = vec![0.0; dim];
        let mut u = vec![0.0; dim];
        loop {
            let c = rng.random_range(0..self.len());
            let center = self.scaled_center(c);
            let mut norm: f64 = 0.0;
            for x in q.iter_mut() {
                *x = rng.sample::<f64, _>(StandardNormal);
                norm += *x * *x;
            }
            if norm == 0.0 {
                continue;
            }
            let rad = self.radius * rng.random::<f64>().powf(1.0 / dim as f64) / norm.sqrt();
            let mut inside = true;
            for k in 0..dim {
                q[k] = center[k] + q[k] * rad;
                u[k] = q[k] * self.scales[k];
                inside &= (0.0..=1.0).contains(&u[k]);
            }
            if !inside {
                continue;
            }
            // accept with probability 1/m  <=>  m <= 1/v
            let v: f64 = rng.random();
            let limit = if v > 0.0 {
                (1.0 / v).min(usize::MAX as f64 / 2.0) as usize
            } else {
                usize::MAX / 2
            };
            let m = self.tree.count_within(&q, r_sq, limit);
            if m >= 1 && m <= limit {
                return UnitPoint::new(u).expect("candidate checked inside the unit cube");
            }
        }
    }
}

/// Per-axis population standard deviation, with degenerate axes replaced by
/// [`DEGENERATE_SCALE`].
pub fn axis_scales<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<f64>> {
    let dim = points
        .first()
        .map(|p| p.as_ref().len())
        .ok_or_else(|| Error::Precondition("no points".into()))?;
    let n = points.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::Structural("points differ in dimension".into()));
        }
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for p in points {
        for ((v, x), m) in var.iter_mut().zip(p.as_ref()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    Ok(var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                DEGENERATE_SCALE
            }
        })
        .collect())
}
