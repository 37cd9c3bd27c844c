//! Least-squares plane normals from k-nearest neighbourhoods.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::metrics::kdtree::{KdTree, Neighbor};

pub const DEFAULT_K: usize = 8;

/// Second-largest eigenvalue below this fraction of the largest means the
/// neighbourhood is (numerically) a line or a point.
const RANK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEstimate {
    /// Unit normal, oriented so it points toward the origin (the sensor).
    pub normal: Point3,
    /// The neighbourhood had rank < 2; `normal` is arbitrary and callers fall
    /// back to point-to-point distance.
    pub degenerate: bool,
}

/// Plane fit through `neighbors`, oriented toward the origin as seen from `at`.
pub fn fit_normal(points: &[Point3], neighbors: &[Neighbor], at: &Point3) -> NormalEstimate {
    let fallback = NormalEstimate { normal: Point3::new(0.0, 0.0, 1.0), degenerate: true };
    if neighbors.len() < 3 {
        return fallback;
    }
    let n = neighbors.len() as f64;
    let mut mean = Point3::ORIGIN;
    for nb in neighbors {
        mean = mean + points[nb.index];
    }
    mean = mean * (1.0 / n);
    let mut cov = Matrix3::<f64>::zeros();
    for nb in neighbors {
        let d = points[nb.index] - mean;
        let v = nalgebra::Vector3::new(d.x, d.y, d.z);
        cov += v * v.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l_mid, l_max) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(l_max > 0.0) || l_mid <= RANK_EPS * l_max {
        return fallback;
    }
    let v = eig.eigenvectors.column(order[0]);
    let mut normal = Point3::new(v[0], v[1], v[2]);
    normal = normal * (1.0 / normal.norm());
    if normal.dot(at) > 0.0 {
        normal = normal * -1.0;
    }
    NormalEstimate { normal, degenerate: false }
}

/// Normal of the plane through the `k` points of `cloud` nearest to `at`.
pub fn estimate_normal(cloud: &PointCloud, at: Point3, k: usize) -> Result<NormalEstimate> {
    if cloud.len() < 3 {
        return Err(Error::Metric(format!("normal estimation needs at least 3 points, cloud has {}", cloud.len())));
    }
    if k < 3 {
        return Err(Error::Metric(format!("normal estimation needs k >= 3, got {k}")));
    }
    let tree = KdTree::new(&cloud.points);
    Ok(fit_normal(&cloud.points, &tree.knn(&at, k), &at))
}
