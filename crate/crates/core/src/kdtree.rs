//! Static k-d tree over a fixed point set, used for the nearest-neighbour and
//! fixed-radius counting queries behind RadFriends.

const LEAF: usize = 8;

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    dim: usize,
    /// Coordinates in tree order.
    pts: Vec<f64>,
    /// Tree position to original index.
    orig: Vec<usize>,
    /// Split axis of the internal node whose pivot sits at this position.
    axis: Vec<u8>,
}

impl KdTree {
    /// `coords` is row-major with `dim` columns.
    pub(crate) fn build(coords: &[f64], dim: usize) -> Self {
        let n = coords.len() / dim;
        let mut idx: Vec<usize> = (0..n).collect();
        let mut axis = vec![0u8; n];
        build_rec(coords, dim, &mut idx, 0, &mut axis);
        let mut pts = Vec::with_capacity(coords.len());
        for &i in &idx {
            pts.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        Self {
            dim,
            pts,
            orig: idx,
            axis,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.orig.len()
    }

    fn point(&self, pos: usize) -> &[f64] {
        &self.pts[pos * self.dim..(pos + 1) * self.dim]
    }

    /// Squared distance from `q` to the closest point whose original index
    /// is flagged in `allowed`, or infinity if none is.
    #[cfg(test)]
    pub(crate) fn nearest_sq(&self, q: &[f64], allowed: &[bool]) -> f64 {
        self.nearest_sq_above(q, allowed, f64::NEG_INFINITY)
    }

    /// Like [`Self::nearest_sq`], but may stop as soon as some allowed point
    /// lies within `floor`; the result is then some value `<= floor`.
    pub(crate) fn nearest_sq_above(&self, q: &[f64], allowed: &[bool], floor: f64) -> f64 {
        let mut best = f64::INFINITY;
        self.nearest_rec(q, allowed, floor, 0, self.len(), &mut best);
        best
    }

    fn nearest_rec(
        &self,
        q: &[f64],
        allowed: &[bool],
        floor: f64,
        lo: usize,
        hi: usize,
        best: &mut f64,
    ) {
        if *best <= floor {
            return;
        }
        if hi - lo <= LEAF {
            for pos in lo..hi {
                if allowed[self.orig[pos]] {
                    let d = dist_sq(q, self.point(pos));
                    if d < *best {
                        *best = d;
                    }
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        if allowed[self.orig[mid]] {
            let d = dist_sq(q, self.point(mid));
            if d < *best {
                *best = d;
            }
        }
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.point(mid)[ax];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(q, allowed, floor, near.0, near.1, best);
        if diff * diff < *best {
            self.nearest_rec(q, allowed, floor, far.0, far.1, best);
        }
    }

    /// Number of points within squared distance `r_sq` of `q` (inclusive),
    /// saturating once it exceeds `limit`.
    pub(crate) fn count_within(&self, q: &[f64], r_sq: f64, limit: usize) -> usize {
        let mut count = 0;
        self.count_rec(q, r_sq, limit, 0, self.len(), &mut count);
        count
    }

    fn count_rec(
        &self,
        q: &[f64],
        r_sq: f64,
        limit: usize,
        lo: usize,
        hi: usize,
        count: &mut usize,
    ) {
        if *count > limit {
            return;
        }
        if hi - lo <= LEAF {
            for pos in lo..hi {
                if dist_sq(q, self.point(pos)) <= r_sq {
                    *count += 1;
                    if *count > limit {
                        return;
                    }
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        if dist_sq(q, self.point(mid)) <= r_sq {
            *count += 1;
        }
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.point(mid)[ax];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.count_rec(q, r_sq, limit, near.0, near.1, count);
        if diff * diff <= r_sq {
            self.count_rec(q, r_sq, limit, far.0, far.1, count);
        }
    }
}

fn build_rec(coords: &[f64], dim: usize, idx: &mut [usize], offset: usize, axis: &mut [u8]) {
    let n = idx.len();
    if n <= LEAF {
        return;
    }
    // split on the axis of largest spread
    let mut best_axis = 0;
    let mut best_spread = f64::NEG_INFINITY;
    for ax in 0..dim {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx.iter() {
            let v = coords[i * dim + ax];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > best_spread {
            best_spread = hi - lo;
            best_axis = ax;
        }
    }
    let mid = n / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        coords[a * dim + best_axis].total_cmp(&coords[b * dim + best_axis])
    });
    axis[offset + mid] = best_axis as u8;
    let (left, rest) = idx.split_at_mut(mid);
    build_rec(coords, dim, left, offset, axis);
    build_rec(coords, dim, &mut rest[1..], offset + mid + 1, axis);
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
