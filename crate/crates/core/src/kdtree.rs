//! Static 2-D kd-tree for nearest-vertex queries in UV space.
//!
//! Ties on squared distance resolve to the lowest point index, matching a
//! linear scan that keeps the first minimum.

use std::cmp::Ordering;

use crate::geom::Uv;

pub struct KdTree<'a> {
    points: &'a [Uv],
    /// Point indices laid out as an implicit balanced tree: the median of
    /// `order[lo..hi]` sits at `(lo + hi) / 2`.
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Uv]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self { points, order }
    }

    /// Index of the nearest point and its squared distance.
    ///
    /// Panics on an empty tree.
    pub fn nearest(&self, q: Uv) -> (usize, f64) {
        assert!(!self.order.is_empty(), "nearest() on an empty kd-tree");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.order.len(), 0, &mut best);
        best
    }

    fn search(&self, q: Uv, lo: usize, hi: usize, axis: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        let d2 = dist2(p, q);
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, near.0, near.1, 1 - axis, best);
        // `<=` keeps equal-distance candidates reachable for the index tie-break.
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, 1 - axis, best);
        }
    }
}

pub(crate) fn dist2(a: Uv, b: Uv) -> f64 {
    let du = a[0] - b[0];
    let dv = a[1] - b[1];
    du * du + dv * dv
}

fn build(points: &[Uv], order: &mut [usize], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].partial_cmp(&points[b][axis]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(points, left, 1 - axis);
    build(points, &mut right[1..], 1 - axis);
}
