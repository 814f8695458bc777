//! Minimizing the registration loss, either directly over the warp
//! parameters or through a point-encoder network whose output is the warp.
//!
//! Both modes share the same Adam implementation, the same parameter layout
//! `[center offsets (2K) | raw sigmas (K) | weights (3K)]` and the same
//! softplus positivity mechanism for bandwidths.

mod adam;
mod direct;
mod gradcheck;
mod network;

use std::fmt;
use std::time::Duration;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use direct::optimize_direct;
pub use gradcheck::{network_gradient_check, relative_error, GradCheckInstance, GradCheckReport};
pub use network::{optimize_network, NetForward, NetWidths, PointEncoderNet};

use crate::error::{Error, Result};
use crate::loss::LossValue;
use crate::scalar::{sigmoid, softplus, softplus_inv, Real};
use crate::warp::{AnchorGrid, WarpParams};

/// One row of a loss trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub chamfer: f64,
    pub regularizer: f64,
    pub total: f64,
}

impl LossRecord {
    pub fn from_value<T: Real>(v: &LossValue<T>) -> Self {
        Self {
            chamfer: v.chamfer.to_f64_lossy(),
            regularizer: v.regularizer.to_f64_lossy(),
            total: v.total.to_f64_lossy(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.chamfer.is_finite() && self.regularizer.is_finite() && self.total.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    Network,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Direct => "direct",
            Mode::Network => "network",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Mode::Direct),
            "network" => Ok(Mode::Network),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected direct|network)"))),
        }
    }
}

/// Registration hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    pub k_anchors: usize,
    pub lambda_reg: f64,
    /// Clamp on squared distances, m^2.
    pub delta_reg: f64,
    pub adam: AdamConfig,
    pub grad_clip: f64,
    /// Maximum number of source points fed to the network.
    pub n_net: usize,
    pub widths: NetWidths,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            k_anchors: 36,
            lambda_reg: 0.01,
            delta_reg: 10.0,
            adam: AdamConfig::default(),
            grad_clip: 1e3,
            n_net: 512,
            widths: NetWidths::default(),
        }
    }
}

/// Result of an optimization run.
#[derive(Debug, Clone)]
pub struct OptimizationReport<T: Real> {
    pub mode: Mode,
    /// Loss at the start of each step, before its update.
    pub trace: Vec<LossRecord>,
    pub params: WarpParams<T>,
    /// Loss of `params`, i.e. after the last update.
    pub final_loss: LossRecord,
    pub steps: usize,
    pub elapsed: Duration,
}

/// Warp parameters from the shared raw layout.
pub(crate) fn theta_from_raw<T: Real>(anchors: &[[T; 2]], raw: &[T]) -> Result<WarpParams<T>> {
    let k = anchors.len();
    if raw.len() != 6 * k {
        return Err(Error::ShapeMismatch {
            expected: 6 * k,
            actual: raw.len(),
        });
    }
    let centers = anchors
        .iter()
        .zip(raw[..2 * k].chunks(2))
        .map(|(a, o)| [a[0] + o[0], a[1] + o[1]])
        .collect();
    let sigmas = raw[2 * k..3 * k].iter().map(|&s| softplus(s)).collect();
    let weights = raw[3 * k..].chunks(3).map(|w| [w[0], w[1], w[2]]).collect();
    WarpParams::new(centers, sigmas, weights)
}

/// Raw layout reproducing `params` relative to `anchors`.
pub(crate) fn raw_from_theta<T: Real>(anchors: &[[T; 2]], params: &WarpParams<T>) -> Vec<T> {
    let mut raw = Vec::with_capacity(params.param_count());
    for (a, c) in anchors.iter().zip(&params.centers) {
        raw.push(c[0] - a[0]);
        raw.push(c[1] - a[1]);
    }
    raw.extend(params.sigmas.iter().map(|&s| softplus_inv(s)));
    raw.extend(params.weights.iter().flatten());
    raw
}

/// Map a gradient over `[centers | sigmas | weights]` to the raw layout.
pub(crate) fn raw_gradient<T: Real>(raw: &[T], theta_grad: &mut [T]) {
    let k = raw.len() / 6;
    for i in 0..k {
        theta_grad[2 * k + i] *= sigmoid(raw[2 * k + i]);
    }
}

pub(crate) fn initial_raw<T: Real>(grid: &AnchorGrid<T>) -> Vec<T> {
    let k = grid.centers.len();
    let mut raw = vec![T::zero(); 6 * k];
    let s = softplus_inv(grid.default_sigma());
    raw[2 * k..3 * k].iter_mut().for_each(|r| *r = s);
    raw
}

pub(crate) fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        Err(Error::Config("optimization needs at least one step".into()))
    } else {
        Ok(())
    }
}
