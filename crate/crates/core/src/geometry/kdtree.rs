//! Static k-d tree over a point cloud.
//!
//! Queries are contractually identical to a linear scan: `radius_search`
//! returns every identifier within the radius in ascending-identifier
//! order, and `knn_search` orders by ascending distance with ties broken
//! by ascending identifier.

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// Immutable spatial index over the points of a [`PointCloud`].
pub struct SpatialIndex<'a> {
    points: &'a [Point3],
    /// Point identifiers rearranged so each subtree span is median-split
    /// along the axis cycling with depth.
    order: Vec<usize>,
}

impl<'a> SpatialIndex<'a> {
    pub fn build(cloud: &'a PointCloud) -> Self {
        let points = cloud.points();
        let mut order: Vec<usize> = (0..points.len()).collect();
        build_recursive(points, &mut order, 0);
        Self { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// All identifiers with Euclidean distance ≤ `r` from `query`,
    /// ascending by identifier.
    pub fn radius_search(&self, query: &Point3, r: f64) -> Vec<usize> {
        debug_assert!(r > 0.0, "radius must be positive");
        let mut hits = Vec::new();
        let r2 = r * r;
        self.radius_recursive(&self.order, 0, query, r2, &mut hits);
        hits.sort_unstable();
        hits
    }

    /// The `k` nearest identifiers with their distances, ascending by
    /// distance then identifier.
    pub fn knn_search(&self, query: &Point3, k: usize) -> Result<Vec<(usize, f64)>> {
        if k > self.points.len() {
            return Err(Error::KnnOutOfBounds {
                k,
                size: self.points.len(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut best = KnnHeap::new(k);
        self.knn_recursive(&self.order, 0, query, &mut best);
        Ok(best.into_sorted())
    }

    fn radius_recursive(&self, span: &[usize], depth: usize, query: &Point3, r2: f64, hits: &mut Vec<usize>) {
        if span.len() <= LEAF_SIZE {
            for &id in span {
                if (self.points[id] - query).norm_squared() <= r2 {
                    hits.push(id);
                }
            }
            return;
        }
        let axis = depth % 3;
        let mid = span.len() / 2;
        let pivot = self.points[span[mid]];
        if (pivot - query).norm_squared() <= r2 {
            hits.push(span[mid]);
        }
        let delta = query[axis] - pivot[axis];
        let (near, far) = if delta <= 0.0 {
            (&span[..mid], &span[mid + 1..])
        } else {
            (&span[mid + 1..], &span[..mid])
        };
        self.radius_recursive(near, depth + 1, query, r2, hits);
        if delta * delta <= r2 {
            self.radius_recursive(far, depth + 1, query, r2, hits);
        }
    }

    fn knn_recursive(&self, span: &[usize], depth: usize, query: &Point3, best: &mut KnnHeap) {
        if span.len() <= LEAF_SIZE {
            for &id in span {
                best.offer(id, (self.points[id] - query).norm_squared());
            }
            return;
        }
        let axis = depth % 3;
        let mid = span.len() / 2;
        let pivot = self.points[span[mid]];
        best.offer(span[mid], (pivot - query).norm_squared());
        let delta = query[axis] - pivot[axis];
        let (near, far) = if delta <= 0.0 {
            (&span[..mid], &span[mid + 1..])
        } else {
            (&span[mid + 1..], &span[..mid])
        };
        self.knn_recursive(near, depth + 1, query, best);
        // The far side can still hold an equal-distance, lower-id point, so
        // only prune on a strict bound violation.
        if !best.is_full() || delta * delta <= best.worst().0 {
            self.knn_recursive(far, depth + 1, query, best);
        }
    }
}

fn build_recursive(points: &[Point3], span: &mut [usize], depth: usize) {
    if span.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % 3;
    let mid = span.len() / 2;
    span.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then_with(|| a.cmp(&b))
    });
    let (lo, rest) = span.split_at_mut(mid);
    build_recursive(points, lo, depth + 1);
    build_recursive(points, &mut rest[1..], depth + 1);
}

/// Fixed-capacity worst-out collector for the k current best candidates.
struct KnnHeap {
    k: usize,
    // (distance², id), kept as a binary max-heap under (d², id) order.
    entries: Vec<(f64, usize)>,
}

impl KnnHeap {
    fn new(k: usize) -> Self {
        Self {
            k,
            entries: Vec::with_capacity(k + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.entries.len() == self.k
    }

    fn worst(&self) -> (f64, usize) {
        self.entries[0]
    }

    fn offer(&mut self, id: usize, d2: f64) {
        if self.is_full() {
            let (wd, wid) = self.worst();
            if d2 > wd || (d2 == wd && id > wid) {
                return;
            }
            self.pop_worst();
        }
        self.entries.push((d2, id));
        self.sift_up(self.entries.len() - 1);
    }

    fn pop_worst(&mut self) {
        let last = self.entries.len() - 1;
        self.entries.swap(0, last);
        self.entries.pop();
        self.sift_down(0);
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if greater(self.entries[i], self.entries[parent]) {
                self.entries.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut top = i;
            if l < self.entries.len() && greater(self.entries[l], self.entries[top]) {
                top = l;
            }
            if r < self.entries.len() && greater(self.entries[r], self.entries[top]) {
                top = r;
            }
            if top == i {
                break;
            }
            self.entries.swap(i, top);
            i = top;
        }
    }

    fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut out: Vec<(f64, usize)> = self.entries;
        out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        out.into_iter().map(|(d2, id)| (id, d2.sqrt())).collect()
    }
}

fn greater(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}
