use std::time::Instant;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::scalar::Real;
use crate::warp::WarpParams;

use super::{
    check_steps, clip_global_norm, raw_from_theta, raw_gradient, theta_from_raw, AdamState, LossRecord, Mode,
    OptimizationReport, RegistrationConfig,
};

/// Adam directly on the 6K warp parameters, starting from `init`.
///
/// Bandwidths are optimized through `sigma = softplus(raw)`; centers and
/// weights are optimized as they are.
pub fn optimize_direct<T: Real>(
    reference: &PointCloud<T>,
    source: &PointCloud<T>,
    init: &WarpParams<T>,
    steps: usize,
    config: &RegistrationConfig,
) -> Result<OptimizationReport<T>> {
    check_steps(steps)?;
    init.validate()?;
    let started = Instant::now();
    let reference = reference.sorted_by_id();
    let source = source.sorted_by_id();
    let objective = Objective::new(&reference, &source, T::lit(config.lambda_reg), T::lit(config.delta_reg))?;

    // Offsets are taken relative to the initial centers.
    let anchors = init.centers.clone();
    let mut raw = raw_from_theta(&anchors, init);
    let mut adam = AdamState::new(raw.len(), config.adam);
    let clip = T::lit(config.grad_clip);
    let mut trace = Vec::with_capacity(steps);

    for step in 0..steps {
        let params = theta_from_raw(&anchors, &raw)?;
        let (value, mut grad) = objective.loss_and_gradient(&params)?;
        let record = LossRecord::from_value(&value);
        trace.push(record);
        if !record.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, trace });
        }
        raw_gradient(&raw, &mut grad);
        clip_global_norm(&mut grad, clip);
        adam.step(&mut raw, &grad)?;
    }

    let params = theta_from_raw(&anchors, &raw)?;
    let final_loss = LossRecord::from_value(&objective.loss(&params)?);
    if !final_loss.is_finite() {
        return Err(Error::Diverged { step: steps, trace });
    }
    Ok(OptimizationReport {
        mode: Mode::Direct,
        trace,
        params,
        final_loss,
        steps,
        elapsed: started.elapsed(),
    })
}
