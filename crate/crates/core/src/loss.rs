//! Registration objective: clamped squared Chamfer distance plus a motion
//! regularizer, with gradients over all 6K warp parameters.
//!
//! Gradients treat each point's nearest-neighbor correspondence as fixed at
//! its current value. Terms whose squared distance has reached the clamp
//! contribute nothing.

use nalgebra::{Point3, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::{Metric, SpatialIndex};
use crate::scalar::Real;
use crate::warp::{warp_points, xy_dist_sq, WarpParams};

/// Loss components and the correspondences they were computed with.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<T> {
    pub total: T,
    pub chamfer: T,
    pub regularizer: T,
    /// For each reference point, the id of its nearest warped source point.
    pub ref_to_src: Vec<u32>,
    /// For each source point, the id of its nearest reference point.
    pub src_to_ref: Vec<u32>,
    /// Whether each term reached the clamp: source terms first, then
    /// reference terms.
    pub clamped: Vec<bool>,
}

#[inline]
fn clamp<T: Real>(v: T, delta: T) -> T {
    v.min(delta)
}

/// Symmetric clamped squared Chamfer distance (3D metric).
pub fn chamfer_sq<T: Real>(x: &PointCloud<T>, y: &PointCloud<T>, delta_reg: T) -> Result<T> {
    x.ensure_non_empty()?;
    y.ensure_non_empty()?;
    let ix = SpatialIndex::build(x, Metric::Xyz)?;
    let iy = SpatialIndex::build(y, Metric::Xyz)?;
    Ok(one_way(x.points(), &iy, delta_reg) + one_way(y.points(), &ix, delta_reg))
}

fn one_way<T: Real>(from: &[Point3<T>], to: &SpatialIndex<T>, delta: T) -> T {
    let mut sum = T::zero();
    for p in from {
        sum += clamp(to.nearest(p).dist_sq, delta);
    }
    sum / T::from_usize(from.len()).unwrap()
}

/// `(1/K) sum_k |w_k| / sigma_k^2`.
pub fn motion_regularizer<T: Real>(params: &WarpParams<T>) -> Result<T> {
    params.validate()?;
    Ok(regularizer_unchecked(params))
}

fn regularizer_unchecked<T: Real>(params: &WarpParams<T>) -> T {
    let mut sum = T::zero();
    for (w, s) in params.weights.iter().zip(&params.sigmas) {
        sum += Vector3::new(w[0], w[1], w[2]).norm() / (*s * *s);
    }
    sum / T::from_usize(params.k()).unwrap()
}

/// Loss of `reference` against `source` warped by `params`.
pub fn total_loss<T: Real>(
    reference: &PointCloud<T>,
    source: &PointCloud<T>,
    params: &WarpParams<T>,
    lambda_reg: T,
    delta_reg: T,
) -> Result<LossValue<T>> {
    Objective::new(reference, source, lambda_reg, delta_reg)?.loss(params)
}

/// Gradient of [`total_loss`] in the flat `[centers | sigmas | weights]` layout.
pub fn loss_gradient<T: Real>(
    reference: &PointCloud<T>,
    source: &PointCloud<T>,
    params: &WarpParams<T>,
    lambda_reg: T,
    delta_reg: T,
) -> Result<Vec<T>> {
    let (_, grad) = Objective::new(reference, source, lambda_reg, delta_reg)?.loss_and_gradient(params)?;
    Ok(grad)
}

/// A registration problem with the reference index built once, for repeated
/// evaluation inside an optimizer.
#[derive(Debug, Clone)]
pub struct Objective<'a, T: Real> {
    reference: &'a PointCloud<T>,
    source: &'a PointCloud<T>,
    ref_index: SpatialIndex<T>,
    lambda_reg: T,
    delta_reg: T,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(reference: &'a PointCloud<T>, source: &'a PointCloud<T>, lambda_reg: T, delta_reg: T) -> Result<Self> {
        reference.ensure_non_empty()?;
        source.ensure_non_empty()?;
        if !(delta_reg > T::zero()) || lambda_reg < T::zero() {
            return Err(Error::Config(format!(
                "need delta_reg > 0 and lambda_reg >= 0 (got {delta_reg}, {lambda_reg})"
            )));
        }
        Ok(Self {
            reference,
            source,
            ref_index: SpatialIndex::build(reference, Metric::Xyz)?,
            lambda_reg,
            delta_reg,
        })
    }

    pub fn reference(&self) -> &PointCloud<T> {
        self.reference
    }

    pub fn source(&self) -> &PointCloud<T> {
        self.source
    }

    pub fn loss(&self, params: &WarpParams<T>) -> Result<LossValue<T>> {
        params.validate()?;
        let warped = warp_points(self.source.points(), params);
        Ok(self.evaluate(&warped, params, None))
    }

    /// Loss and its gradient over the flat parameter layout.
    pub fn loss_and_gradient(&self, params: &WarpParams<T>) -> Result<(LossValue<T>, Vec<T>)> {
        params.validate()?;
        let src = self.source.points();
        let k = params.k();
        let n = src.len();

        let mut phi = vec![T::zero(); n * k];
        let mut warped = Vec::with_capacity(n);
        for (j, x) in src.iter().enumerate() {
            let row = &mut phi[j * k..(j + 1) * k];
            crate::warp::kernel_row_into(x, params, row);
            let mut p = *x;
            for (f, w) in row.iter().zip(&params.weights) {
                p.x += *f * w[0];
                p.y += *f * w[1];
                p.z += *f * w[2];
            }
            warped.push(p);
        }

        // dL/dp_j for every warped source point.
        let mut point_grad = vec![Vector3::zeros(); n];
        let value = self.evaluate(&warped, params, Some(&mut point_grad));

        let mut grad = vec![T::zero(); 6 * k];
        let (gc, rest) = grad.split_at_mut(2 * k);
        let (gs, gw) = rest.split_at_mut(k);
        let two = T::lit(2.0);
        for (j, x) in src.iter().enumerate() {
            let g = point_grad[j];
            if g == Vector3::zeros() {
                continue;
            }
            for i in 0..k {
                let f = phi[j * k + i];
                let w = &params.weights[i];
                gw[3 * i] += f * g.x;
                gw[3 * i + 1] += f * g.y;
                gw[3 * i + 2] += f * g.z;
                // dL/dphi_ji
                let s = f * (w[0] * g.x + w[1] * g.y + w[2] * g.z);
                let sigma = params.sigmas[i];
                let inv_s2 = T::one() / (sigma * sigma);
                let c = &params.centers[i];
                gc[2 * i] += s * two * (x.x - c[0]) * inv_s2;
                gc[2 * i + 1] += s * two * (x.y - c[1]) * inv_s2;
                gs[i] += s * two * xy_dist_sq(x, c) * inv_s2 / sigma;
            }
        }

        if self.lambda_reg > T::zero() {
            let scale = self.lambda_reg / T::from_usize(k).unwrap();
            for i in 0..k {
                let w = &params.weights[i];
                let norm = Vector3::new(w[0], w[1], w[2]).norm();
                let sigma = params.sigmas[i];
                let s2 = sigma * sigma;
                if norm > T::zero() {
                    for d in 0..3 {
                        gw[3 * i + d] += scale * w[d] / (norm * s2);
                    }
                }
                gs[i] -= scale * two * norm / (s2 * sigma);
            }
        }
        Ok((value, grad))
    }

    fn evaluate(
        &self,
        warped: &[Point3<T>],
        params: &WarpParams<T>,
        mut point_grad: Option<&mut [Vector3<T>]>,
    ) -> LossValue<T> {
        let delta = self.delta_reg;
        let two = T::lit(2.0);
        let refs = self.reference.points();
        let ref_ids = self.reference.ids();
        let inv_ns = T::one() / T::from_usize(warped.len()).unwrap();
        let inv_nr = T::one() / T::from_usize(refs.len()).unwrap();

        let mut clamped = Vec::with_capacity(warped.len() + refs.len());
        let mut src_to_ref = Vec::with_capacity(warped.len());
        let mut src_sum = T::zero();
        for (j, p) in warped.iter().enumerate() {
            let nn = self.ref_index.nearest(p);
            src_to_ref.push(nn.id);
            clamped.push(nn.dist_sq >= delta);
            src_sum += clamp(nn.dist_sq, delta);
            if let Some(g) = point_grad.as_deref_mut() {
                if nn.dist_sq < delta {
                    g[j] += (p - refs[nn.index]) * (two * inv_ns);
                }
            }
        }

        let warped_index = SpatialIndex::from_points(warped, self.source.ids(), Metric::Xyz)
            .expect("source checked non-empty");
        let mut ref_to_src = Vec::with_capacity(refs.len());
        let mut ref_sum = T::zero();
        for r in refs {
            let nn = warped_index.nearest(r);
            ref_to_src.push(nn.id);
            clamped.push(nn.dist_sq >= delta);
            ref_sum += clamp(nn.dist_sq, delta);
            if let Some(g) = point_grad.as_deref_mut() {
                if nn.dist_sq < delta {
                    g[nn.index] += (warped[nn.index] - r) * (two * inv_nr);
                }
            }
        }
        debug_assert_eq!(ref_ids.len(), ref_to_src.len());

        let chamfer = ref_sum * inv_nr + src_sum * inv_ns;
        let regularizer = regularizer_unchecked(params);
        LossValue {
            total: chamfer + self.lambda_reg * regularizer,
            chamfer,
            regularizer,
            ref_to_src,
            src_to_ref,
            clamped,
        }
    }
}
