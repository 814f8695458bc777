//! Surface normals from local PCA.

use nalgebra::{Matrix3, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::{Metric, SpatialIndex};
use crate::scalar::Real;

/// Relative spread below which a neighborhood counts as a line.
const COLLINEAR_TOL: f64 = 1e-9;

/// Estimate an undirected normal for every point from the covariance of the
/// point and its `k_norm` nearest neighbors.
///
/// The normal is the eigenvector of the smallest eigenvalue, flipped so that
/// its largest-magnitude component is positive. Collinear neighborhoods get
/// `None`.
pub fn estimate_normals<T: Real>(cloud: &PointCloud<T>, k_norm: usize) -> Result<PointCloud<T>> {
    if k_norm < 3 {
        return Err(Error::Config(format!("k_norm must be at least 3, got {k_norm}")));
    }
    cloud.ensure_non_empty()?;
    if cloud.len() < k_norm + 1 {
        return Err(Error::InvalidCloud(format!(
            "normal estimation needs at least {} points, cloud has {}",
            k_norm + 1,
            cloud.len()
        )));
    }
    let index = SpatialIndex::build(cloud, Metric::Xyz)?;
    let pts = cloud.points();
    let normals = pts
        .iter()
        .map(|p| {
            let hood = index.knn(p, k_norm + 1);
            let neighbors: Vec<Vector3<T>> = hood.iter().map(|n| pts[n.index].coords).collect();
            fit_normal(&neighbors)
        })
        .collect();
    cloud.clone().with_normals(normals)
}

/// Smallest-variance direction of a point set, canonicalized.
pub fn fit_normal<T: Real>(points: &[Vector3<T>]) -> Option<Vector3<T>> {
    if points.len() < 3 {
        return None;
    }
    let n = T::from_usize(points.len()).unwrap();
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mid = eig.eigenvalues[order[1]].max(T::zero()).sqrt();
    let top = eig.eigenvalues[order[2]].max(T::zero()).sqrt();
    if mid <= T::lit(COLLINEAR_TOL) * top.max(T::one()) {
        return None;
    }
    let v: Vector3<T> = eig.eigenvectors.column(order[0]).into_owned();
    Some(canonicalize(v.normalize()))
}

/// Flip `n` so that its largest-magnitude component (first on ties) is positive.
pub fn canonicalize<T: Real>(n: Vector3<T>) -> Vector3<T> {
    let mut lead = 0;
    for i in 1..3 {
        if n[i].abs() > n[lead].abs() {
            lead = i;
        }
    }
    if n[lead] < T::zero() {
        -n
    } else {
        n
    }
}

/// Angle between two undirected lines, in degrees, folded into [0, 90].
pub fn undirected_angle_deg<T: Real>(a: &Vector3<T>, b: &Vector3<T>) -> T {
    let c = a.dot(b).abs().min(T::one());
    c.acos() * T::lit(180.0) / T::pi()
}
