//! Registration followed by change detection, as run by the `pipeline`
//! command.

use crate::change::{detect_changes, fov_filter, CameraTrajectory, ChangeMap};
use crate::cloud::PointCloud;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::optim::{optimize_direct, optimize_network, Mode, OptimizationReport};
use crate::warp::{make_anchor_grid, warp_cloud, warp_point, WarpParams};

/// Warp `source` onto `reference` with the optimizer selected by
/// `config.mode`.
///
/// With `trajectories = Some((traj_ref, traj_src))` and
/// `config.crop_to_overlap`, each cloud is first restricted to points inside
/// the other traversal's frustums. Structure seen by only one traversal has
/// no counterpart to align to and otherwise pulls the warp toward it.
pub fn register(
    reference: &PointCloud<f64>,
    source: &PointCloud<f64>,
    trajectories: Option<(&CameraTrajectory, &CameraTrajectory)>,
    config: &PipelineConfig,
) -> Result<OptimizationReport<f64>> {
    config.validate()?;
    reference.ensure_non_empty()?;
    source.ensure_non_empty()?;
    let (reference, source) = match trajectories {
        Some((traj_ref, traj_src)) if config.crop_to_overlap => {
            let r = fov_filter(reference, traj_src)?;
            let s = fov_filter(source, traj_ref)?;
            if r.is_empty() || s.is_empty() {
                return Err(Error::InvalidCloud(
                    "traversals do not overlap: no point lies inside the other traversal's frustums".into(),
                ));
            }
            (r, s)
        }
        _ => (reference.clone(), source.clone()),
    };
    let reg = config.registration();
    match config.mode {
        Mode::Direct => {
            let grid = make_anchor_grid(&reference, &source, config.k_anchors)?;
            let init = WarpParams::identity(&grid, grid.default_sigma())?;
            optimize_direct(&reference, &source, &init, config.steps, &reg)
        }
        Mode::Network => optimize_network(&reference, &source, config.steps, config.seed, &reg),
    }
}

/// Source cloud and camera centers moved by `params`. Orientations are kept:
/// the warp is a translation field and carries no rotation.
pub fn apply_warp(
    source: &PointCloud<f64>,
    traj_src: &CameraTrajectory,
    params: &WarpParams<f64>,
) -> Result<(PointCloud<f64>, CameraTrajectory)> {
    let cloud = warp_cloud(source, params)?;
    let traj = traj_src.map_centers(|c| warp_point(c, params));
    Ok((cloud, traj))
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub registration: OptimizationReport<f64>,
    pub src_warped: PointCloud<f64>,
    pub traj_src_warped: CameraTrajectory,
    pub changes: ChangeMap<f64>,
}

/// Register, warp the source traversal, and compare.
pub fn run_pipeline(
    reference: &PointCloud<f64>,
    source: &PointCloud<f64>,
    traj_ref: &CameraTrajectory,
    traj_src: &CameraTrajectory,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    traj_ref.ensure_non_empty()?;
    traj_src.ensure_non_empty()?;
    let registration = register(reference, source, Some((traj_ref, traj_src)), config)?;
    let (src_warped, traj_src_warped) = apply_warp(source, traj_src, &registration.params)?;
    let changes = detect_changes(reference, &src_warped, traj_ref, &traj_src_warped, &config.change())?;
    Ok(PipelineOutput {
        registration,
        src_warped,
        traj_src_warped,
        changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::change::ChangeLabel;
    use crate::synth::{generate_scene, Recipe};

    #[test]
    fn small_scene_end_to_end() {
        let scene = generate_scene(&Recipe::small(), 3).unwrap();
        let config = PipelineConfig {
            steps: 300,
            ..Default::default()
        };
        let out = run_pipeline(&scene.reference, &scene.source, &scene.traj_ref, &scene.traj_src, &config).unwrap();
        assert_eq!(out.registration.trace.len(), 300);
        assert!(out.registration.final_loss.total < out.registration.trace[0].total);
        assert_eq!(out.changes.len(), scene.reference.len() + scene.source.len());
        assert!(out.changes.count(ChangeLabel::Appeared) > 0);
        assert!(out.changes.count(ChangeLabel::Disappeared) > 0);
    }

    #[test]
    fn disjoint_traversals_are_rejected() {
        let scene = generate_scene(&Recipe::small(), 3).unwrap();
        let far = scene.traj_src.map_centers(|c| c + nalgebra::Vector3::new(0.0, 0.0, -1e4));
        let r = register(&scene.reference, &scene.source, Some((&scene.traj_ref, &far)), &PipelineConfig::default());
        assert!(matches!(r, Err(Error::InvalidCloud(_))));
    }
}
