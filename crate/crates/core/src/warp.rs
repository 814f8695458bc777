//! Gaussian RBF warp with an xy-plane kernel metric.
//!
//! A point `x` moves to `x + phi(x) W`, where `phi_k(x) = exp(-d_k^2 / sigma_k^2)`
//! and `d_k` is the xy distance from `x` to anchor `c_k`. Displacements are
//! fully 3D. There is no rigid or affine term.

use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameters of a K-anchor warp: 2K center coordinates, K bandwidths and a
/// K x 3 coefficient matrix, 6K scalars in total.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpParams<T: Real> {
    pub centers: Vec<[T; 2]>,
    pub sigmas: Vec<T>,
    pub weights: Vec<[T; 3]>,
}

impl<T: Real> WarpParams<T> {
    pub fn new(centers: Vec<[T; 2]>, sigmas: Vec<T>, weights: Vec<[T; 3]>) -> Result<Self> {
        let p = Self {
            centers,
            sigmas,
            weights,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero-displacement warp on the given anchors.
    pub fn identity(grid: &AnchorGrid<T>, sigma: T) -> Result<Self> {
        let k = grid.centers.len();
        Self::new(grid.centers.clone(), vec![sigma; k], vec![[T::zero(); 3]; k])
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.centers.len();
        if k == 0 {
            return Err(Error::InvalidParams("warp needs at least one anchor".into()));
        }
        if self.sigmas.len() != k || self.weights.len() != k {
            return Err(Error::InvalidParams(format!(
                "{} centers, {} sigmas, {} weight rows",
                k,
                self.sigmas.len(),
                self.weights.len()
            )));
        }
        if let Some((i, s)) = self
            .sigmas
            .iter()
            .enumerate()
            .find(|(_, s)| !(**s > T::zero()) || !s.is_finite())
        {
            return Err(Error::InvalidParams(format!("sigma[{i}] = {s} is not positive")));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn param_count(&self) -> usize {
        6 * self.k()
    }

    /// Flat layout `[centers (2K) | sigmas (K) | weights (3K)]`.
    pub fn to_flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend(self.centers.iter().flatten());
        v.extend(&self.sigmas);
        v.extend(self.weights.iter().flatten());
        v
    }

    pub fn from_flat(flat: &[T]) -> Result<Self> {
        if flat.is_empty() || !flat.len().is_multiple_of(6) {
            return Err(Error::InvalidParams(format!(
                "flat parameter vector of length {} is not 6K",
                flat.len()
            )));
        }
        let k = flat.len() / 6;
        let centers = flat[..2 * k].chunks(2).map(|c| [c[0], c[1]]).collect();
        let sigmas = flat[2 * k..3 * k].to_vec();
        let weights = flat[3 * k..].chunks(3).map(|w| [w[0], w[1], w[2]]).collect();
        Self::new(centers, sigmas, weights)
    }

    pub fn is_identity(&self) -> bool {
        self.weights.iter().flatten().all(|w| *w == T::zero())
    }

    pub fn cast<U: Real>(&self) -> WarpParams<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        WarpParams {
            centers: self.centers.iter().map(|p| [c(p[0]), c(p[1])]).collect(),
            sigmas: self.sigmas.iter().map(|&s| c(s)).collect(),
            weights: self.weights.iter().map(|w| [c(w[0]), c(w[1]), c(w[2])]).collect(),
        }
    }
}

/// Squared xy distance from `x` to anchor `c`.
#[inline]
pub fn xy_dist_sq<T: Real>(x: &Point3<T>, c: &[T; 2]) -> T {
    let dx = x.x - c[0];
    let dy = x.y - c[1];
    dx * dx + dy * dy
}

/// Kernel values `phi_k(x)` for every anchor.
pub fn kernel_row<T: Real>(x: &Point3<T>, params: &WarpParams<T>) -> Vec<T> {
    let mut row = vec![T::zero(); params.k()];
    kernel_row_into(x, params, &mut row);
    row
}

pub(crate) fn kernel_row_into<T: Real>(x: &Point3<T>, params: &WarpParams<T>, row: &mut [T]) {
    for ((r, c), s) in row.iter_mut().zip(&params.centers).zip(&params.sigmas) {
        *r = (-xy_dist_sq(x, c) / (*s * *s)).exp();
    }
}

/// `x + phi(x) W`.
pub fn warp_point<T: Real>(x: &Point3<T>, params: &WarpParams<T>) -> Point3<T> {
    let mut out = *x;
    for ((c, s), w) in params.centers.iter().zip(&params.sigmas).zip(&params.weights) {
        let phi = (-xy_dist_sq(x, c) / (*s * *s)).exp();
        out.x += phi * w[0];
        out.y += phi * w[1];
        out.z += phi * w[2];
    }
    out
}

pub(crate) fn warp_points<T: Real>(points: &[Point3<T>], params: &WarpParams<T>) -> Vec<Point3<T>> {
    points.iter().map(|p| warp_point(p, params)).collect()
}

/// Warp every point; ids, track lengths and normals are carried over
/// unchanged (normals should be re-estimated if needed).
pub fn warp_cloud<T: Real>(cloud: &PointCloud<T>, params: &WarpParams<T>) -> Result<PointCloud<T>> {
    params.validate()?;
    cloud.with_points(warp_points(cloud.points(), params))
}

/// Uniform sqrt(K) x sqrt(K) grid over the joint xy bounding box, corners
/// included.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGrid<T: Real> {
    pub centers: Vec<[T; 2]>,
    pub side: usize,
    /// Grid step along x and y.
    pub spacing: [T; 2],
}

impl<T: Real> AnchorGrid<T> {
    /// Bandwidth at which neighboring kernels overlap at about `e^-1`.
    pub fn default_sigma(&self) -> T {
        let s = self.spacing[0].max(self.spacing[1]);
        if s > T::zero() {
            s
        } else {
            T::one()
        }
    }
}

pub fn make_anchor_grid<T: Real>(
    reference: &PointCloud<T>,
    source: &PointCloud<T>,
    k: usize,
) -> Result<AnchorGrid<T>> {
    let side = (k as f64).sqrt().round() as usize;
    if k == 0 || side * side != k {
        return Err(Error::Config(format!("K = {k} is not a positive perfect square")));
    }
    let (lo_a, hi_a) = reference.xy_bounds().ok_or(Error::EmptyCloud)?;
    let (lo_b, hi_b) = source.xy_bounds().ok_or(Error::EmptyCloud)?;
    let lo = [lo_a[0].min(lo_b[0]), lo_a[1].min(lo_b[1])];
    let hi = [hi_a[0].max(hi_b[0]), hi_a[1].max(hi_b[1])];
    Ok(grid_over(lo, hi, side))
}

pub(crate) fn grid_over<T: Real>(lo: [T; 2], hi: [T; 2], side: usize) -> AnchorGrid<T> {
    let two = T::lit(2.0);
    let (coords, spacing): (Vec<Vec<T>>, Vec<T>) = (0..2)
        .map(|d| {
            if side == 1 {
                (vec![(lo[d] + hi[d]) / two], hi[d] - lo[d])
            } else {
                let step = (hi[d] - lo[d]) / T::from_usize(side - 1).unwrap();
                let cs = (0..side)
                    .map(|i| {
                        if i + 1 == side {
                            hi[d]
                        } else {
                            lo[d] + step * T::from_usize(i).unwrap()
                        }
                    })
                    .collect();
                (cs, step)
            }
        })
        .unzip();
    let mut centers = Vec::with_capacity(side * side);
    for &x in &coords[0] {
        for &y in &coords[1] {
            centers.push([x, y]);
        }
    }
    AnchorGrid {
        centers,
        side,
        spacing: [spacing[0], spacing[1]],
    }
}
