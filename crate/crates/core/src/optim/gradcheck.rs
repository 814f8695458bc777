//! Finite-difference validation of the network's reverse mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::Result;
use crate::loss::Objective;
use crate::warp::make_anchor_grid;

use super::network::{network_input, PointEncoderNet};
use super::{raw_gradient, theta_from_raw};

/// A small registration problem to differentiate the network through.
#[derive(Debug, Clone)]
pub struct GradCheckInstance {
    pub reference: PointCloud<f64>,
    pub source: PointCloud<f64>,
    pub anchors: Vec<[f64; 2]>,
    /// Network input, N x 3 row-major.
    pub input: Vec<f64>,
    pub lambda_reg: f64,
    pub delta_reg: f64,
    /// Number of weights compared.
    pub samples: usize,
    /// Central-difference half step. Below about 1e-5 the rounding error of
    /// the summed loss dominates the difference quotient.
    pub step: f64,
    pub seed: u64,
}

impl GradCheckInstance {
    /// Anchors on the grid over both clouds, the whole source as input.
    pub fn new(reference: PointCloud<f64>, source: PointCloud<f64>, k: usize, seed: u64) -> Result<Self> {
        let grid = make_anchor_grid(&reference, &source, k)?;
        let input = network_input(&source, usize::MAX, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self {
            reference,
            source,
            anchors: grid.centers,
            input,
            lambda_reg: 0.01,
            delta_reg: 10.0,
            samples: 200,
            step: 1e-4,
            seed,
        })
    }
}

/// Max relative error between backpropagated and central-difference
/// gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Weights compared.
    pub checked: usize,
    /// Sampled weights skipped because a ReLU, pooling winner, correspondence
    /// or clamp flipped within one step.
    pub skipped: usize,
}

/// Relative error with a floor of 1e-6 on the denominator, so gradients at
/// round-off level do not dominate.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

struct Eval {
    loss: f64,
    pattern: Vec<u32>,
}

fn evaluate(net: &PointEncoderNet<f64>, obj: &Objective<f64>, inst: &GradCheckInstance) -> Result<(Eval, Vec<f64>)> {
    let fwd = net.forward(&inst.input);
    let theta = theta_from_raw(&inst.anchors, &fwd.output)?;
    let (value, mut d_raw) = obj.loss_and_gradient(&theta)?;
    let mut pattern = fwd.pattern();
    pattern.extend(&value.ref_to_src);
    pattern.extend(&value.src_to_ref);
    pattern.extend(value.clamped.iter().map(|&c| u32::from(c)));
    raw_gradient(&fwd.output, &mut d_raw);
    let grad = net.backward(&fwd, &d_raw);
    Ok((
        Eval {
            loss: value.total,
            pattern,
        },
        grad,
    ))
}

/// Compare backpropagated weight gradients against central differences on
/// `inst.samples` randomly chosen weights.
pub fn network_gradient_check(net: &PointEncoderNet<f64>, inst: &GradCheckInstance) -> Result<GradCheckReport> {
    let obj = Objective::new(&inst.reference, &inst.source, inst.lambda_reg, inst.delta_reg)?;
    let (base, grad) = evaluate(net, &obj, inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for _ in 0..inst.samples {
        let i = rng.random_range(0..net.param_count());
        let orig = net.params()[i];
        probe.params_mut()[i] = orig + inst.step;
        let (plus, _) = evaluate(&probe, &obj, inst)?;
        probe.params_mut()[i] = orig - inst.step;
        let (minus, _) = evaluate(&probe, &obj, inst)?;
        probe.params_mut()[i] = orig;
        if plus.pattern != base.pattern || minus.pattern != base.pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * inst.step);
        report.max_rel_error = report.max_rel_error.max(relative_error(grad[i], numeric));
        report.checked += 1;
    }
    Ok(report)
}
