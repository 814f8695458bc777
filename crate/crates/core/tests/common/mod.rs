//! Oracles shared by the integration suites. Nothing here calls into the
//! library's warp, loss or index code.

#![allow(dead_code)]

pub mod fixtures;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfmchange::{PointCloud, WarpParams};

/// Plain-array registration problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub reference: Vec<[f64; 3]>,
    pub source: Vec<[f64; 3]>,
    pub k: usize,
    /// `[centers (2K) | sigmas (K) | weights (3K)]`.
    pub theta: Vec<f64>,
    pub lambda_reg: f64,
    pub delta_reg: f64,
}

impl Instance {
    pub fn clouds(&self) -> (PointCloud<f64>, PointCloud<f64>) {
        (PointCloud::from_xyz(&self.reference), PointCloud::from_xyz(&self.source))
    }

    pub fn params(&self) -> WarpParams<f64> {
        WarpParams::from_flat(&self.theta).unwrap()
    }
}

/// Random instance with at most 200 points per cloud and K in {1, 4}. The
/// source is a displaced, noisy copy of the reference plus a few far
/// outliers, so both clamped and unclamped terms occur.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ref = rng.random_range(20..=200);
    let n_src = rng.random_range(20..=200);
    let k = if rng.random_bool(0.5) { 1 } else { 4 };
    let point = |rng: &mut ChaCha8Rng| {
        [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), rng.random_range(0.0..4.0)]
    };
    let reference: Vec<[f64; 3]> = (0..n_ref).map(|_| point(&mut rng)).collect();
    let shift = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)];
    let mut source = Vec::with_capacity(n_src);
    for i in 0..n_src {
        if i % 10 == 9 {
            let p = point(&mut rng);
            source.push([p[0], p[1], p[2] + 15.0]);
        } else {
            let r = reference[rng.random_range(0..n_ref)];
            source.push([
                r[0] + shift[0] + rng.random_range(-0.3..0.3),
                r[1] + shift[1] + rng.random_range(-0.3..0.3),
                r[2] + shift[2] + rng.random_range(-0.3..0.3),
            ]);
        }
    }
    let mut theta = Vec::with_capacity(6 * k);
    for _ in 0..k {
        theta.push(rng.random_range(0.0..20.0));
        theta.push(rng.random_range(0.0..20.0));
    }
    for _ in 0..k {
        theta.push(rng.random_range(3.0..12.0));
    }
    for _ in 0..3 * k {
        theta.push(rng.random_range(-1.0..1.0));
    }
    Instance {
        reference,
        source,
        k,
        theta,
        lambda_reg: 0.01,
        delta_reg: 10.0,
    }
}

pub fn oracle_warp(p: &[f64; 3], theta: &[f64], k: usize) -> [f64; 3] {
    let mut out = *p;
    for j in 0..k {
        let (cx, cy) = (theta[2 * j], theta[2 * j + 1]);
        let s = theta[2 * k + j];
        let d2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
        let phi = (-d2 / (s * s)).exp();
        for a in 0..3 {
            out[a] += phi * theta[3 * k + 3 * j + a];
        }
    }
    out
}

fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Exhaustive nearest neighbor, lowest index on ties.
pub fn nearest(q: &[f64; 3], cloud: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in cloud.iter().enumerate() {
        let d = dist_sq(q, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Loss and the discrete state it depends on: each nearest neighbor and
/// whether each term is clamped.
pub fn oracle_loss(inst: &Instance, theta: &[f64]) -> (f64, Vec<usize>) {
    let k = inst.k;
    let warped: Vec<[f64; 3]> = inst.source.iter().map(|p| oracle_warp(p, theta, k)).collect();
    let mut pattern = Vec::new();
    let mut one_way = |from: &[[f64; 3]], to: &[[f64; 3]]| {
        let mut sum = 0.0;
        for q in from {
            let (i, d) = nearest(q, to);
            pattern.push(i);
            pattern.push(usize::from(d >= inst.delta_reg));
            sum += d.min(inst.delta_reg);
        }
        sum / from.len() as f64
    };
    let chamfer = one_way(&warped, &inst.reference) + one_way(&inst.reference, &warped);
    let mut reg = 0.0;
    for j in 0..k {
        let w = &theta[3 * k + 3 * j..3 * k + 3 * j + 3];
        let s = theta[2 * k + j];
        reg += (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt() / (s * s);
    }
    (chamfer + inst.lambda_reg * reg / k as f64, pattern)
}

/// Outcome of comparing one analytic gradient with central differences.
#[derive(Debug, Clone, Copy, Default)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences with step `h`, skipping parameters whose
/// correspondences or clamp states change within `guard` of the current
/// value.
pub fn fd_check(inst: &Instance, analytic: &[f64], h: f64, guard: f64) -> FdReport {
    let (_, base) = oracle_loss(inst, &inst.theta);
    let mut report = FdReport::default();
    let mut theta = inst.theta.clone();
    for i in 0..theta.len() {
        let orig = theta[i];
        let mut switches = false;
        for g in [guard, -guard, h, -h] {
            theta[i] = orig + g;
            switches |= oracle_loss(inst, &theta).1 != base;
        }
        if switches {
            theta[i] = orig;
            report.excluded += 1;
            continue;
        }
        theta[i] = orig + h;
        let plus = oracle_loss(inst, &theta).0;
        theta[i] = orig - h;
        let minus = oracle_loss(inst, &theta).0;
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        report.max_rel_error = report.max_rel_error.max(rel_error(analytic[i], numeric));
        report.checked += 1;
    }
    report
}

pub fn to_point(p: &[f64; 3]) -> Point3<f64> {
    Point3::new(p[0], p[1], p[2])
}
