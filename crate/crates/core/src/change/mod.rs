//! Point-level change detection between two registered traversals.
//!
//! Each direction compares a track-length-subsampled cloud against the full
//! cloud of the other traversal: the subsampled source yields *appeared*
//! candidates, the subsampled reference yields *disappeared* ones. Responses
//! are smoothed, thresholded, stripped of isolated points, restricted to what
//! the other traversal's cameras could have seen, and finally grown back to
//! nearby points of the pre-subsampling cloud.

mod camera;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Point3;

pub use camera::{CameraFrame, CameraTrajectory};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::ground::remove_ground;
use crate::index::{Metric, SpatialIndex};
use crate::normals::estimate_normals;
use crate::scalar::Real;

/// Detection parameters. Distances in meters, angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeConfig {
    /// Minimum track length kept by subsampling (inclusive).
    pub tau_ss: u16,
    /// Clamp on the change response.
    pub delta_cd: f64,
    /// Neighbors averaged by the mean filter, excluding the point itself.
    pub k_mean: usize,
    /// Minimum filtered response of a changed point.
    pub tau_cd: f64,
    pub normal_tol_deg: f64,
    pub r_iso: f64,
    pub n_iso: usize,
    pub r_pop: f64,
    pub k_norm: usize,
    pub ground_cell: f64,
    pub h_ground: f64,
}

impl Default for ChangeConfig {
    fn default() -> Self {
        Self {
            tau_ss: 7,
            delta_cd: 10.0,
            k_mean: 7,
            tau_cd: 2.0,
            normal_tol_deg: 40.0,
            r_iso: 2.0,
            n_iso: 5,
            r_pop: 1.0,
            k_norm: 16,
            ground_cell: 4.0,
            h_ground: 0.5,
        }
    }
}

impl ChangeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta_cd", self.delta_cd),
            ("ground_cell", self.ground_cell),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("tau_cd", self.tau_cd),
            ("r_iso", self.r_iso),
            ("r_pop", self.r_pop),
            ("h_ground", self.h_ground),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.normal_tol_deg >= 0.0 && self.normal_tol_deg <= 90.0) {
            return Err(Error::Config(format!(
                "normal_tol_deg must lie in [0, 90], got {}",
                self.normal_tol_deg
            )));
        }
        if self.k_norm < 3 {
            return Err(Error::Config(format!("k_norm must be at least 3, got {}", self.k_norm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChangeLabel {
    Unchanged,
    Appeared,
    Disappeared,
}

impl ChangeLabel {
    pub fn code(self) -> u8 {
        match self {
            ChangeLabel::Unchanged => 0,
            ChangeLabel::Appeared => 1,
            ChangeLabel::Disappeared => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ChangeLabel::Unchanged),
            1 => Some(ChangeLabel::Appeared),
            2 => Some(ChangeLabel::Disappeared),
            _ => None,
        }
    }
}

impl fmt::Display for ChangeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChangeLabel::Unchanged => "unchanged",
            ChangeLabel::Appeared => "appeared",
            ChangeLabel::Disappeared => "disappeared",
        })
    }
}

/// Which traversal a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Ref,
    Src,
}

impl Origin {
    pub fn code(self) -> u8 {
        match self {
            Origin::Ref => 0,
            Origin::Src => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Origin::Ref),
            1 => Some(Origin::Src),
            _ => None,
        }
    }

    /// The only label a changed point of this origin can carry.
    pub fn change_label(self) -> ChangeLabel {
        match self {
            Origin::Ref => ChangeLabel::Disappeared,
            Origin::Src => ChangeLabel::Appeared,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEntry<T: Real> {
    pub origin: Origin,
    /// Id within the origin cloud.
    pub id: u32,
    pub position: Point3<T>,
    /// Filtered change response in `[0, delta_cd]`; 0 for points that were
    /// never compared.
    pub response: T,
    pub label: ChangeLabel,
}

/// Per-point change labels over both traversals: every reference point, then
/// every source point, each in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeMap<T: Real> {
    pub entries: Vec<ChangeEntry<T>>,
}

impl<T: Real> ChangeMap<T> {
    /// All points of both clouds, unchanged, response 0.
    pub fn unchanged(reference: &PointCloud<T>, source: &PointCloud<T>) -> Self {
        let mut entries = Vec::with_capacity(reference.len() + source.len());
        for (origin, cloud) in [(Origin::Ref, reference), (Origin::Src, source)] {
            entries.extend(cloud.points().iter().zip(cloud.ids()).map(|(p, &id)| ChangeEntry {
                origin,
                id,
                position: *p,
                response: T::zero(),
                label: ChangeLabel::Unchanged,
            }));
        }
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, label: ChangeLabel) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn changed(&self) -> impl Iterator<Item = &ChangeEntry<T>> {
        self.entries.iter().filter(|e| e.label != ChangeLabel::Unchanged)
    }

    /// Check the label/origin and response-range invariants.
    pub fn validate(&self, delta_cd: T) -> Result<()> {
        for e in &self.entries {
            if e.label != ChangeLabel::Unchanged && e.label != e.origin.change_label() {
                return Err(Error::InvalidCloud(format!(
                    "point {} from {:?} labeled {}",
                    e.id, e.origin, e.label
                )));
            }
            if !(e.response >= T::zero() && e.response <= delta_cd) {
                return Err(Error::InvalidCloud(format!(
                    "response {} of point {} outside [0, {delta_cd}]",
                    e.response, e.id
                )));
            }
        }
        Ok(())
    }
}

/// Points with track length `>= tau_ss`, ids preserved.
pub fn subsample_by_track<T: Real>(cloud: &PointCloud<T>, tau_ss: u16) -> Result<PointCloud<T>> {
    let tracks = cloud.track_lengths().ok_or(Error::MissingTrackLengths)?;
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| tracks[i] >= tau_ss).collect();
    Ok(cloud.select(&keep))
}

/// Distance from each query point to its nearest normal-compatible target
/// point, clamped at `delta_cd`. A point with an invalid normal on either
/// side is compatible with everything.
pub fn change_response<T: Real>(
    query: &PointCloud<T>,
    target: &PointCloud<T>,
    delta_cd: T,
    normal_tol_deg: T,
) -> Result<Vec<T>> {
    target.ensure_non_empty()?;
    let index = SpatialIndex::build(target, Metric::Xyz)?;
    responses_with_index(query, target, &index, delta_cd, normal_tol_deg)
}

fn responses_with_index<T: Real>(
    query: &PointCloud<T>,
    target: &PointCloud<T>,
    index: &SpatialIndex<T>,
    delta_cd: T,
    normal_tol_deg: T,
) -> Result<Vec<T>> {
    let qn = query.normals().ok_or(Error::MissingNormals)?;
    let tn = target.normals().ok_or(Error::MissingNormals)?;
    // Compare |cos| against cos(tol) instead of taking acos per candidate.
    let cos_tol = (normal_tol_deg * T::pi() / T::lit(180.0)).cos();
    let bound = delta_cd * delta_cd;
    Ok(query
        .points()
        .iter()
        .zip(qn)
        .map(|(p, n)| {
            let hit = match n {
                None => index.nearest_where(p, Some(bound), |_| true),
                Some(n) => index.nearest_where(p, Some(bound), |j| match &tn[j] {
                    None => true,
                    Some(m) => n.dot(m).abs() >= cos_tol,
                }),
            };
            hit.map_or(delta_cd, |h| h.distance().min(delta_cd))
        })
        .collect())
}

/// Candidates of one direction: the subsampled cloud and its raw responses.
#[derive(Debug, Clone)]
pub struct Candidates<T: Real> {
    pub cloud: PointCloud<T>,
    pub responses: Vec<T>,
}

/// Subsampled source against full reference (appeared candidates) and
/// subsampled reference against full source (disappeared candidates).
///
/// Both clouds need track lengths and normals.
pub fn dual_threshold_compare<T: Real>(
    reference: &PointCloud<T>,
    src_warped: &PointCloud<T>,
    config: &ChangeConfig,
) -> Result<(Candidates<T>, Candidates<T>)> {
    let delta = T::lit(config.delta_cd);
    let tol = T::lit(config.normal_tol_deg);
    let one_way = |query: &PointCloud<T>, target: &PointCloud<T>| -> Result<Candidates<T>> {
        let sub = subsample_by_track(query, config.tau_ss)?;
        sub.ensure_non_empty()?;
        let responses = change_response(&sub, target, delta, tol)?;
        Ok(Candidates { cloud: sub, responses })
    };
    Ok((one_way(src_warped, reference)?, one_way(reference, src_warped)?))
}

/// Replace each response by the mean over the point and its `k` nearest
/// neighbors in the same cloud (fewer when the cloud is smaller).
pub fn mean_filter<T: Real>(cloud: &PointCloud<T>, responses: &[T], k: usize) -> Result<Vec<T>> {
    if responses.len() != cloud.len() {
        return Err(Error::ShapeMismatch {
            expected: cloud.len(),
            actual: responses.len(),
        });
    }
    if k == 0 || cloud.is_empty() {
        return Ok(responses.to_vec());
    }
    let index = SpatialIndex::build(cloud, Metric::Xyz)?;
    Ok(cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // Duplicates of p may outrank p itself, so drop self explicitly.
            let mut sum = responses[i];
            let mut n = 1usize;
            for nb in index.knn(p, k + 1).iter().filter(|nb| nb.index != i).take(k) {
                sum += responses[nb.index];
                n += 1;
            }
            sum / T::from_usize(n).unwrap()
        })
        .collect())
}

/// Ids of points with response `>= tau_cd` that have at least `n_iso` other
/// such points within `r_iso`.
pub fn threshold_and_suppress<T: Real>(
    cloud: &PointCloud<T>,
    responses: &[T],
    tau_cd: T,
    r_iso: T,
    n_iso: usize,
) -> Result<Vec<u32>> {
    Ok(suppressed_indices(cloud, responses, tau_cd, r_iso, n_iso)?
        .into_iter()
        .map(|i| cloud.ids()[i])
        .collect())
}

fn suppressed_indices<T: Real>(
    cloud: &PointCloud<T>,
    responses: &[T],
    tau_cd: T,
    r_iso: T,
    n_iso: usize,
) -> Result<Vec<usize>> {
    if responses.len() != cloud.len() {
        return Err(Error::ShapeMismatch {
            expected: cloud.len(),
            actual: responses.len(),
        });
    }
    let high: Vec<usize> = (0..cloud.len()).filter(|&i| responses[i] >= tau_cd).collect();
    if high.is_empty() {
        return Ok(high);
    }
    let high_cloud = cloud.select(&high);
    let index = SpatialIndex::build(&high_cloud, Metric::Xyz)?;
    Ok(high
        .iter()
        .enumerate()
        .filter(|(j, _)| index.count_within(&high_cloud.points()[*j], r_iso, |m| m != *j) >= n_iso)
        .map(|(_, &i)| i)
        .collect())
}

fn to_f64<T: Real>(p: &Point3<T>) -> Point3<f64> {
    Point3::new(p.x.to_f64_lossy(), p.y.to_f64_lossy(), p.z.to_f64_lossy())
}

/// Positions of `cloud` seen by at least one frame of `traj`.
pub fn fov_mask<T: Real>(cloud: &PointCloud<T>, traj: &CameraTrajectory) -> Result<Vec<bool>> {
    traj.ensure_non_empty()?;
    Ok(cloud.points().iter().map(|p| traj.sees(&to_f64(p))).collect())
}

/// Candidates inside at least one frustum of `other_traj`.
pub fn fov_filter<T: Real>(candidates: &PointCloud<T>, other_traj: &CameraTrajectory) -> Result<PointCloud<T>> {
    let mask = fov_mask(candidates, other_traj)?;
    let keep: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    Ok(candidates.select(&keep))
}

/// Union of `changed` and every point of `original_full` within `r_pop` of
/// a changed point, ordered by id. The second value maps each output point
/// to the index of its nearest changed point (ties to the lower id).
pub fn repopulate_with_parents<T: Real>(
    changed: &PointCloud<T>,
    original_full: &PointCloud<T>,
    r_pop: T,
) -> Result<(PointCloud<T>, Vec<usize>)> {
    let mut chosen: BTreeMap<u32, (Point3<T>, usize)> = BTreeMap::new();
    for (i, (p, &id)) in changed.points().iter().zip(changed.ids()).enumerate() {
        chosen.insert(id, (*p, i));
    }
    if !changed.is_empty() && r_pop > T::zero() {
        let index = SpatialIndex::build(changed, Metric::Xyz)?;
        let r2 = r_pop * r_pop;
        for (p, &id) in original_full.points().iter().zip(original_full.ids()) {
            if chosen.contains_key(&id) {
                continue;
            }
            if let Some(nb) = index.nearest_where(p, Some(r2), |_| true) {
                chosen.insert(id, (*p, nb.index));
            }
        }
    }
    let ids: Vec<u32> = chosen.keys().copied().collect();
    let (points, parents): (Vec<_>, Vec<_>) = chosen.into_values().unzip();
    Ok((PointCloud::new(points).with_ids(ids)?, parents))
}

/// `changed` grown by the points of `original_full` within `r_pop`.
pub fn repopulate<T: Real>(changed: &PointCloud<T>, original_full: &PointCloud<T>, r_pop: T) -> Result<PointCloud<T>> {
    Ok(repopulate_with_parents(changed, original_full, r_pop)?.0)
}

/// Changed points of one direction with their filtered responses.
#[derive(Debug, Clone)]
pub struct DirectionResult<T: Real> {
    pub ids: Vec<u32>,
    pub responses: Vec<T>,
    /// Filtered responses of every subsampled candidate, by id.
    pub candidate_responses: BTreeMap<u32, T>,
}

fn detect_direction<T: Real>(
    query_full: &PointCloud<T>,
    target_full: &PointCloud<T>,
    other_traj: &CameraTrajectory,
    config: &ChangeConfig,
) -> Result<DirectionResult<T>> {
    let sub = subsample_by_track(query_full, config.tau_ss)?;
    sub.ensure_non_empty()?;
    let raw = change_response(&sub, target_full, T::lit(config.delta_cd), T::lit(config.normal_tol_deg))?;
    let filtered = mean_filter(&sub, &raw, config.k_mean)?;
    let kept = suppressed_indices(&sub, &filtered, T::lit(config.tau_cd), T::lit(config.r_iso), config.n_iso)?;
    let kept_cloud = sub.select(&kept);
    let visible = fov_mask(&kept_cloud, other_traj)?;
    let changed_idx: Vec<usize> = (0..kept.len()).filter(|&j| visible[j]).collect();
    let changed = kept_cloud.select(&changed_idx);
    let changed_resp: Vec<T> = changed_idx.iter().map(|&j| filtered[kept[j]]).collect();

    let (grown, parents) = repopulate_with_parents(&changed, query_full, T::lit(config.r_pop))?;
    // Additions must pass the same visibility test as the points they grew from.
    let grown_visible = fov_mask(&grown, other_traj)?;
    let mut ids = Vec::new();
    let mut responses = Vec::new();
    for (j, &id) in grown.ids().iter().enumerate() {
        if grown_visible[j] {
            ids.push(id);
            responses.push(changed_resp[parents[j]]);
        }
    }
    Ok(DirectionResult {
        ids,
        responses,
        candidate_responses: sub.ids().iter().copied().zip(filtered).collect(),
    })
}

/// Full comparison of two registered traversals.
///
/// `traj_ref` gates appeared candidates (source points) and `traj_src`
/// gates disappeared ones. Ground points are reported unchanged.
pub fn detect_changes<T: Real>(
    reference: &PointCloud<T>,
    src_warped: &PointCloud<T>,
    traj_ref: &CameraTrajectory,
    traj_src: &CameraTrajectory,
    config: &ChangeConfig,
) -> Result<ChangeMap<T>> {
    config.validate()?;
    for c in [reference, src_warped] {
        c.ensure_non_empty()?;
        if c.track_lengths().is_none() {
            return Err(Error::MissingTrackLengths);
        }
    }
    traj_ref.ensure_non_empty()?;
    traj_src.ensure_non_empty()?;
    let cell = T::lit(config.ground_cell);
    let h = T::lit(config.h_ground);
    let (ref_obj, _) = remove_ground(reference, cell, h)?;
    let (src_obj, _) = remove_ground(src_warped, cell, h)?;
    let ref_obj = estimate_normals(&ref_obj, config.k_norm)?;
    let src_obj = estimate_normals(&src_obj, config.k_norm)?;

    let appeared = detect_direction(&src_obj, &ref_obj, traj_ref, config)?;
    let disappeared = detect_direction(&ref_obj, &src_obj, traj_src, config)?;

    let mut map = ChangeMap::unchanged(reference, src_warped);
    let apply = |map: &mut ChangeMap<T>, origin: Origin, dir: &DirectionResult<T>| {
        let changed: BTreeMap<u32, T> = dir.ids.iter().copied().zip(dir.responses.iter().copied()).collect();
        for e in map.entries.iter_mut().filter(|e| e.origin == origin) {
            if let Some(r) = changed.get(&e.id) {
                e.label = origin.change_label();
                e.response = *r;
            } else if let Some(r) = dir.candidate_responses.get(&e.id) {
                e.response = *r;
            }
        }
    };
    apply(&mut map, Origin::Src, &appeared);
    apply(&mut map, Origin::Ref, &disappeared);
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};

    fn with_normal(pts: &[[f64; 3]], n: Option<[f64; 3]>) -> PointCloud<f64> {
        PointCloud::from_xyz(pts)
            .with_normals(vec![n.map(|v| Vector3::new(v[0], v[1], v[2])); pts.len()])
            .unwrap()
    }

    #[test]
    fn table_defaults() {
        let c = ChangeConfig::default();
        assert_eq!(c.tau_ss, 7);
        assert_eq!(c.delta_cd, 10.0);
        assert_eq!(c.k_mean, 7);
        assert_eq!(c.tau_cd, 2.0);
        assert_eq!(c.normal_tol_deg, 40.0);
        c.validate().unwrap();
    }

    #[test]
    fn subsample_is_inclusive() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
            .with_track_lengths(vec![3, 7, 9])
            .unwrap();
        assert_eq!(subsample_by_track(&c, 7).unwrap().ids(), &[1, 2]);
        assert_eq!(subsample_by_track(&c, 0).unwrap(), c);
        assert!(subsample_by_track(&c, 10).unwrap().is_empty());
        assert!(matches!(
            subsample_by_track(&PointCloud::<f64>::from_xyz(&[[0.0; 3]]), 1),
            Err(Error::MissingTrackLengths)
        ));
    }

    #[test]
    fn response_examples() {
        let z = Some([0.0, 0.0, 1.0]);
        let q = with_normal(&[[0.0, 0.0, 0.0]], z);
        let same = with_normal(&[[0.0, 0.0, 0.0]], z);
        assert_eq!(change_response(&q, &same, 10.0, 40.0).unwrap(), vec![0.0]);
        let at3 = with_normal(&[[3.0, 0.0, 0.0], [20.0, 0.0, 0.0]], z);
        assert_eq!(change_response(&q, &at3, 10.0, 40.0).unwrap(), vec![3.0]);
        let far = with_normal(&[[30.0, 0.0, 0.0]], z);
        assert_eq!(change_response(&q, &far, 10.0, 40.0).unwrap(), vec![10.0]);

        let mut mixed = PointCloud::from_xyz(&[[1.0, 0.0, 0.0], [0.0, 4.0, 0.0]]);
        mixed = mixed
            .with_normals(vec![Some(Vector3::x()), Some(Vector3::z())])
            .unwrap();
        assert_eq!(change_response(&q, &mixed, 10.0, 40.0).unwrap(), vec![4.0]);
        // Invalid query normal: every target is admissible.
        let q_invalid = with_normal(&[[0.0, 0.0, 0.0]], None);
        assert_eq!(change_response(&q_invalid, &mixed, 10.0, 40.0).unwrap(), vec![1.0]);
        // Flipped normal is the same undirected line.
        let flipped = with_normal(&[[2.0, 0.0, 0.0]], Some([0.0, 0.0, -1.0]));
        assert_eq!(change_response(&q, &flipped, 10.0, 40.0).unwrap(), vec![2.0]);
        let empty = PointCloud::<f64>::new(vec![]).with_normals(vec![]).unwrap();
        assert!(matches!(change_response(&q, &empty, 10.0, 40.0), Err(Error::EmptyCloud)));
    }

    #[test]
    fn mean_filter_examples() {
        let pts: Vec<[f64; 3]> = (0..8).map(|i| [i as f64, 0.0, 0.0]).collect();
        let c = PointCloud::from_xyz(&pts);
        let mut r = vec![0.0; 8];
        r[0] = 8.0;
        assert_eq!(mean_filter(&c, &r, 7).unwrap()[0], 1.0);
        assert_eq!(mean_filter(&c, &r, 0).unwrap(), r);
        assert_eq!(mean_filter(&c, &[3.0; 8], 7).unwrap(), vec![3.0; 8]);
        // Fewer than k + 1 points: mean over all of them.
        let small = c.select(&[0, 1]);
        assert_eq!(mean_filter(&small, &[8.0, 0.0], 7).unwrap(), vec![4.0, 4.0]);
    }

    #[test]
    fn suppression_examples() {
        let pts: Vec<[f64; 3]> = (0..100).map(|i| [(i % 10) as f64 * 0.5, (i / 10) as f64 * 0.5, 0.0]).collect();
        let c = PointCloud::from_xyz(&pts);
        assert_eq!(threshold_and_suppress(&c, &[10.0; 100], 2.0, 2.0, 5).unwrap().len(), 100);
        assert!(threshold_and_suppress(&c, &[1.9; 100], 2.0, 2.0, 5).unwrap().is_empty());
        let lone = PointCloud::from_xyz(&[[0.0; 3], [50.0, 0.0, 0.0]]);
        assert!(threshold_and_suppress(&lone, &[10.0, 10.0], 2.0, 2.0, 5).unwrap().is_empty());
    }

    #[test]
    fn repopulate_examples() {
        let full = PointCloud::from_xyz(&[
            [0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0],
            [0.0, 0.5, 0.0],
            [-0.5, 0.0, 0.0],
            [0.0, -0.5, 0.0],
            [0.0, 0.0, 0.9],
            [5.0, 0.0, 0.0],
        ]);
        let changed = full.select(&[0]);
        assert_eq!(repopulate(&changed, &full, 0.0).unwrap(), changed);
        let grown = repopulate(&changed, &full, 1.0).unwrap();
        assert_eq!(grown.ids(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(grown.points()[5], full.points()[5]);
    }

    #[test]
    fn identical_traversals_have_no_changes() {
        // Two parallel walls with a camera between them.
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..10 {
                pts.push([i as f64 * 0.5, 5.0, 1.0 + j as f64 * 0.5]);
                pts.push([i as f64 * 0.5, -5.0, 1.0 + j as f64 * 0.5]);
            }
        }
        for i in 0..40 {
            for j in 0..20 {
                pts.push([i as f64 * 0.5, -5.0 + j as f64 * 0.5, 0.0]);
            }
        }
        let n = pts.len();
        let c = PointCloud::from_xyz(&pts).with_track_lengths(vec![9; n]).unwrap();
        let cam = CameraFrame::looking(0, Point3::new(-5.0, 0.0, 1.5), UnitQuaternion::identity(), 60.0, 45.0, 640, 480, 100.0);
        let traj = CameraTrajectory::new(vec![cam]).unwrap();
        let map = detect_changes(&c, &c, &traj, &traj, &ChangeConfig::default()).unwrap();
        assert_eq!(map.len(), 2 * n);
        assert_eq!(map.changed().count(), 0);
        map.validate(10.0).unwrap();
    }
}
