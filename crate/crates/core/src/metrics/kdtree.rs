//! Exact nearest-neighbour search.
//!
//! An implicit kd-tree: indices are partitioned in place, the node of range
//! `[lo, hi)` sits at `mid = (lo + hi) / 2` and splits on the axis of widest
//! spread. Results are ordered by `(squared distance, point index)`, so ties
//! resolve to the lowest index.

use crate::cloud::Point3;

const BUCKET: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_squared: f64,
}

impl Neighbor {
    #[inline]
    fn key(&self) -> (f64, usize) {
        (self.distance_squared, self.index)
    }

    #[inline]
    fn before(&self, other: &Neighbor) -> bool {
        self.key() < other.key()
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    order: Vec<u32>,
    axes: Vec<u8>,
}

/// Sorted k-best list.
struct Best {
    k: usize,
    items: Vec<Neighbor>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best { k, items: Vec::with_capacity(k + 1) }
    }

    #[inline]
    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].distance_squared
        }
    }

    #[inline]
    fn offer(&mut self, n: Neighbor) {
        if self.items.len() == self.k && !n.before(&self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|x| x.before(&n));
        self.items.insert(pos, n);
        self.items.truncate(self.k);
    }
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            axes: vec![0; points.len()],
        };
        tree.build(0, points.len());
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= BUCKET {
            return;
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            let p = self.points[i as usize];
            for a in 0..3 {
                min[a] = min[a].min(p.axis(a));
                max[a] = max[a].max(p.axis(a));
            }
        }
        let axis = (0..3).max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b]))).unwrap();
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a as usize].axis(axis).total_cmp(&points[b as usize].axis(axis))
        });
        self.axes[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    fn search(&self, q: &Point3, lo: usize, hi: usize, best: &mut Best) {
        if hi - lo <= BUCKET {
            for &i in &self.order[lo..hi] {
                let d = q.distance_squared(&self.points[i as usize]);
                best.offer(Neighbor { index: i as usize, distance_squared: d });
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid] as usize;
        let axis = self.axes[mid] as usize;
        best.offer(Neighbor { index: i, distance_squared: q.distance_squared(&self.points[i]) });
        let delta = q.axis(axis) - self.points[i].axis(axis);
        let (near, far) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, near.0, near.1, best);
        // equal distances must still be visited for the index tie-break
        if delta * delta <= best.worst() {
            self.search(q, far.0, far.1, best);
        }
    }

    /// The `k` closest points, nearest first.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut best = Best::new(k.min(self.points.len()));
        self.search(q, 0, self.points.len(), &mut best);
        best.items
    }

    pub fn nearest(&self, q: &Point3) -> Option<Neighbor> {
        self.knn(q, 1).into_iter().next()
    }

    /// Nearest point other than the indexed point `index` itself.
    pub fn nearest_other(&self, index: usize) -> Option<Neighbor> {
        let q = self.points[index];
        self.knn(&q, 2).into_iter().find(|n| n.index != index)
    }
}

/// Exhaustive reference search with the same ordering.
pub fn brute_force_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Neighbor { index, distance_squared: q.distance_squared(p) })
        .collect();
    all.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap());
    all.truncate(k);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for n in [1usize, 2, 9, 100, 3000, 10_000] {
            let pts: Vec<Point3> = (0..n)
                .map(|_| Point3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-2.0..2.0)))
                .collect();
            let tree = KdTree::new(&pts);
            for _ in 0..200 {
                let q = Point3::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-3.0..3.0));
                for k in [1, 3, 8] {
                    assert_eq!(tree.knn(&q, k), brute_force_knn(&pts, &q, k));
                }
            }
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        // integer lattice with duplicates: many exact ties
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point3> = (0..2000)
            .map(|_| Point3::new(rng.random_range(0..6) as f64, rng.random_range(0..6) as f64, rng.random_range(0..3) as f64))
            .collect();
        let tree = KdTree::new(&pts);
        for i in 0..300 {
            let q = Point3::new((i % 7) as f64 - 0.5, (i % 5) as f64, (i % 3) as f64 + 0.5);
            assert_eq!(tree.knn(&q, 5), brute_force_knn(&pts, &q, 5));
            assert_eq!(tree.nearest(&pts[i]).unwrap().index, pts.iter().position(|p| *p == pts[i]).unwrap());
        }
    }

    #[test]
    fn nearest_other_skips_self() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest_other(0).unwrap().index, 2);
        assert_eq!(tree.nearest_other(1).unwrap().distance_squared, 9.0);
        let single = KdTree::new(&pts[..1]);
        assert!(single.nearest_other(0).is_none());
        assert!(KdTree::new(&[]).nearest(&Point3::ORIGIN).is_none());
    }
}
