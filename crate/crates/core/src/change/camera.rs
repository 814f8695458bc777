//! Camera frames along a traversal, with a symmetric pinhole frustum.
//!
//! Camera axes: +x forward (optical axis), +y left, +z up. An identity
//! orientation therefore looks down world +x. Image coordinates grow right
//! (`u`) and down (`v`).

use nalgebra::{Point3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub id: u64,
    /// Capture time, seconds.
    pub t: f64,
    pub center: Point3<f64>,
    /// Camera-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    /// Horizontal half-angle, degrees.
    pub hfov_deg: f64,
    /// Vertical half-angle, degrees.
    pub vfov_deg: f64,
    pub fx: f64,
    pub fy: f64,
    pub px: f64,
    pub py: f64,
    /// Maximum visibility distance, meters.
    pub range: f64,
}

impl CameraFrame {
    /// Frame with intrinsics derived from the half-angles for a `width` x
    /// `height` image with a centered principal point.
    pub fn looking(
        id: u64,
        center: Point3<f64>,
        orientation: UnitQuaternion<f64>,
        hfov_deg: f64,
        vfov_deg: f64,
        width: u32,
        height: u32,
        range: f64,
    ) -> Self {
        let px = width as f64 / 2.0;
        let py = height as f64 / 2.0;
        Self {
            id,
            t: id as f64,
            center,
            orientation,
            hfov_deg,
            vfov_deg,
            fx: px / hfov_deg.to_radians().tan(),
            fy: py / vfov_deg.to_radians().tan(),
            px,
            py,
            range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Trajectory(format!("frame {}: {msg}", self.id)));
        let q = self.orientation.quaternion();
        if (q.norm() - 1.0).abs() > 1e-6 {
            return bad(format!("quaternion norm {} is not 1", q.norm()));
        }
        for (name, a) in [("hfov", self.hfov_deg), ("vfov", self.vfov_deg)] {
            if !(a > 0.0 && a < 90.0) {
                return bad(format!("{name} half-angle {a} outside (0, 90) degrees"));
            }
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return bad(format!("range {} must be positive", self.range));
        }
        let finite = [self.t, self.fx, self.fy, self.px, self.py]
            .iter()
            .chain(self.center.coords.iter())
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite value".into());
        }
        Ok(())
    }

    /// World point in camera coordinates.
    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&(p - self.center))
    }

    /// In front of the camera, inside both half-angles, and within range.
    pub fn sees(&self, p: &Point3<f64>) -> bool {
        let q = self.to_camera(p);
        q.x > 0.0
            && q.y.abs() <= q.x * self.hfov_deg.to_radians().tan()
            && q.z.abs() <= q.x * self.vfov_deg.to_radians().tan()
            && (p - self.center).norm() <= self.range
    }

    /// Pixel coordinates `(u, v)` for a point in front of the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        let q = self.to_camera(p);
        (q.x > 0.0).then(|| (self.px - self.fx * q.y / q.x, self.py - self.fy * q.z / q.x))
    }
}

/// Frames of one traversal, ordered by strictly increasing id.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraTrajectory {
    frames: Vec<CameraFrame>,
}

impl CameraTrajectory {
    pub fn new(frames: Vec<CameraFrame>) -> Result<Self> {
        for f in &frames {
            f.validate()?;
        }
        if let Some(w) = frames.windows(2).find(|w| w[1].id <= w[0].id) {
            return Err(Error::Trajectory(format!(
                "frame ids must increase strictly ({} follows {})",
                w[1].id, w[0].id
            )));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[CameraFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.frames.is_empty() {
            Err(Error::Trajectory("trajectory has no frames".into()))
        } else {
            Ok(())
        }
    }

    /// Whether any frame sees `p`.
    pub fn sees(&self, p: &Point3<f64>) -> bool {
        self.frames.iter().any(|f| f.sees(p))
    }

    /// Same frames with every center moved by `f`; orientations unchanged.
    pub fn map_centers<F: Fn(&Point3<f64>) -> Point3<f64>>(&self, f: F) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|fr| CameraFrame {
                center: f(&fr.center),
                ..fr.clone()
            })
            .collect();
        Self { frames }
    }
}
