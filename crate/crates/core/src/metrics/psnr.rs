//! Point-to-plane PSNR.
//!
//! For one direction `A -> B`: every `a` is paired with its nearest `b`, the
//! error is the squared projection of `a - b` on the normal fitted at `b` in
//! `B`, and the peak is the largest nearest-neighbour distance inside `A`.
//! The symmetric value is the smaller of the two directions.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::metrics::kdtree::KdTree;
use crate::metrics::normals::{fit_normal, NormalEstimate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalPsnr {
    pub mse: f64,
    /// Peak value: largest intra-cloud nearest-neighbour distance of the source.
    pub peak: f64,
    pub psnr_db: f64,
    /// Points whose target normal was degenerate and fell back to
    /// point-to-point distance.
    pub degenerate_normals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsnrReport {
    pub forward: DirectionalPsnr,
    pub backward: DirectionalPsnr,
    /// `min(forward, backward)`; `+inf` when both MSEs are zero.
    pub psnr_db: f64,
}

/// Largest distance from a point to its nearest other point.
pub fn peak_distance(tree: &KdTree) -> Result<f64> {
    if tree.len() < 2 {
        return Err(Error::Metric("peak distance is undefined for fewer than two points".into()));
    }
    let mut peak2 = 0.0f64;
    for i in 0..tree.len() {
        peak2 = peak2.max(tree.nearest_other(i).map_or(0.0, |n| n.distance_squared));
    }
    Ok(peak2.sqrt())
}

pub(crate) fn psnr_db(peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

fn directional(source: &KdTree, target: &KdTree, k: usize) -> Result<DirectionalPsnr> {
    let peak = peak_distance(source)?;
    let tpts = target.points();
    let mut normals: Vec<Option<NormalEstimate>> = vec![None; tpts.len()];
    let mut sum = 0.0;
    let mut degenerate = 0;
    for p in source.points() {
        let q = target.nearest(p).expect("target is non-empty");
        let est = *normals[q.index].get_or_insert_with(|| {
            let at = tpts[q.index];
            fit_normal(tpts, &target.knn(&at, k), &at)
        });
        let d = *p - tpts[q.index];
        if est.degenerate {
            degenerate += 1;
            sum += d.dot(&d);
        } else {
            let e = d.dot(&est.normal);
            sum += e * e;
        }
    }
    let mse = sum / source.len() as f64;
    if peak == 0.0 && mse > 0.0 {
        return Err(Error::Metric("all source points coincide, the peak value is zero".into()));
    }
    Ok(DirectionalPsnr { mse, peak, psnr_db: psnr_db(peak, mse), degenerate_normals: degenerate })
}

pub fn psnr_report(original: &PointCloud, decoded: &PointCloud, k: usize) -> Result<PsnrReport> {
    for (name, c) in [("original", original), ("decoded", decoded)] {
        if c.len() < 2 {
            return Err(Error::Metric(format!("{name} cloud has {} points, PSNR needs at least two", c.len())));
        }
    }
    if k == 0 {
        return Err(Error::Metric("k must be positive".into()));
    }
    let a = KdTree::new(&original.points);
    let b = KdTree::new(&decoded.points);
    let forward = directional(&a, &b, k)?;
    let backward = directional(&b, &a, k)?;
    Ok(PsnrReport { forward, backward, psnr_db: forward.psnr_db.min(backward.psnr_db) })
}

pub fn psnr_point_to_plane(original: &PointCloud, decoded: &PointCloud, k: usize) -> Result<f64> {
    Ok(psnr_report(original, decoded, k)?.psnr_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point3;
    use crate::metrics::kdtree::Neighbor;
    use rand::{Rng, SeedableRng};

    /// O(n^2) reference: exhaustive neighbours, exhaustive peaks, same plane fit.
    fn oracle(p: &[Point3], q: &[Point3], k: usize) -> f64 {
        fn knn(pts: &[Point3], at: &Point3, k: usize) -> Vec<Neighbor> {
            let mut v: Vec<Neighbor> =
                pts.iter().enumerate().map(|(index, x)| Neighbor { index, distance_squared: at.distance_squared(x) }).collect();
            v.sort_by(|a, b| (a.distance_squared, a.index).partial_cmp(&(b.distance_squared, b.index)).unwrap());
            v.truncate(k);
            v
        }
        fn one_way(src: &[Point3], dst: &[Point3], k: usize) -> f64 {
            let mut peak2 = 0.0f64;
            for (i, a) in src.iter().enumerate() {
                let d = src.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, b)| a.distance_squared(b)).fold(f64::INFINITY, f64::min);
                peak2 = peak2.max(d);
            }
            let mut sum = 0.0;
            for a in src {
                let nn = knn(dst, a, 1)[0].index;
                let at = dst[nn];
                let est = fit_normal(dst, &knn(dst, &at, k), &at);
                let d = *a - at;
                sum += if est.degenerate { d.dot(&d) } else { d.dot(&est.normal).powi(2) };
            }
            psnr_db(peak2.sqrt(), sum / src.len() as f64)
        }
        one_way(p, q, k).min(one_way(q, p, k))
    }

    fn cloud(points: Vec<Point3>) -> PointCloud {
        PointCloud::new(points)
    }

    #[test]
    fn identical_clouds_are_infinite() {
        let pts: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64, (i * i) as f64 * 0.1, 0.0)).collect();
        assert_eq!(psnr_point_to_plane(&cloud(pts.clone()), &cloud(pts), 8).unwrap(), f64::INFINITY);
    }

    #[test]
    fn translated_square_along_its_normal() {
        let p = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let q: Vec<Point3> = p.iter().map(|&x| x + Point3::new(0.0, 0.0, 0.001)).collect();
        let r = psnr_report(&cloud(p.clone()), &cloud(q.clone()), 3).unwrap();
        assert!((r.forward.mse - 1e-6).abs() < 1e-15);
        assert!((r.backward.mse - 1e-6).abs() < 1e-15);
        assert_eq!(r.forward.peak, 1.0);
        let expected = 10.0 * (1.0f64 / 1e-6).log10();
        assert!((r.psnr_db - expected).abs() < 1e-6, "{}", r.psnr_db);
        assert!((r.psnr_db - oracle(&p, &q, 3)).abs() < 1e-9);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for trial in 0..25 {
            let n = rng.random_range(2..200);
            let p: Vec<Point3> = (0..n)
                .map(|_| Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-0.5..0.5)))
                .collect();
            let noise = rng.random_range(1e-4..1e-1);
            let m = rng.random_range(2..200);
            let q: Vec<Point3> = (0..m)
                .map(|i| {
                    p[i % n] + Point3::new(rng.random_range(-noise..noise), rng.random_range(-noise..noise), rng.random_range(-noise..noise))
                })
                .collect();
            let k = rng.random_range(3..10);
            let fast = psnr_point_to_plane(&cloud(p.clone()), &cloud(q.clone()), k).unwrap();
            let slow = oracle(&p, &q, k);
            assert!((fast - slow).abs() <= 1e-9, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn symmetric_under_swap() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p: Vec<Point3> = (0..100).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
        let q: Vec<Point3> = (0..80).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
        let ab = psnr_point_to_plane(&cloud(p.clone()), &cloud(q.clone()), 8).unwrap();
        let ba = psnr_point_to_plane(&cloud(q), &cloud(p), 8).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn single_point_errors() {
        let one = cloud(vec![Point3::ORIGIN]);
        let two = cloud(vec![Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)]);
        assert!(psnr_point_to_plane(&one, &two, 8).is_err());
        assert!(psnr_point_to_plane(&two, &one, 8).is_err());
    }
}
