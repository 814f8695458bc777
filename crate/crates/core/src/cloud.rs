//! Point cloud container.

use std::collections::HashSet;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

const UNIT_TOL: f64 = 1e-6;

/// A set of 3D points with optional per-point attributes.
///
/// `ids` are stable provenance indices into the file the cloud came from and
/// survive subsetting and warping. A normal slot holding `None` marks a point
/// whose neighborhood was too degenerate to define a surface direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T: Real> {
    points: Vec<Point3<T>>,
    normals: Option<Vec<Option<Vector3<T>>>>,
    track_lengths: Option<Vec<u16>>,
    ids: Vec<u32>,
}

impl<T: Real> Default for PointCloud<T> {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            normals: None,
            track_lengths: None,
            ids: Vec::new(),
        }
    }
}

impl<T: Real> PointCloud<T> {
    /// Cloud with ids assigned by position (0, 1, 2, ...).
    pub fn new(points: Vec<Point3<T>>) -> Self {
        let ids = (0..points.len() as u32).collect();
        Self {
            points,
            normals: None,
            track_lengths: None,
            ids,
        }
    }

    pub fn from_xyz(xyz: &[[T; 3]]) -> Self {
        Self::new(xyz.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    pub fn with_ids(mut self, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != self.points.len() {
            return Err(Error::InvalidCloud(format!(
                "{} ids for {} points",
                ids.len(),
                self.points.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::InvalidCloud(format!("duplicate id {dup}")));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn with_track_lengths(mut self, tracks: Vec<u16>) -> Result<Self> {
        if tracks.len() != self.points.len() {
            return Err(Error::InvalidCloud(format!(
                "{} track lengths for {} points",
                tracks.len(),
                self.points.len()
            )));
        }
        self.track_lengths = Some(tracks);
        Ok(self)
    }

    pub fn with_normals(mut self, normals: Vec<Option<Vector3<T>>>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::InvalidCloud(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        let tol = T::lit(UNIT_TOL);
        for (i, n) in normals.iter().enumerate() {
            if let Some(n) = n {
                if (n.norm() - T::one()).abs() > tol {
                    return Err(Error::InvalidCloud(format!(
                        "normal {i} is not unit length (|n| = {})",
                        n.norm()
                    )));
                }
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn normals(&self) -> Option<&[Option<Vector3<T>>]> {
        self.normals.as_deref()
    }

    pub fn track_lengths(&self) -> Option<&[u16]> {
        self.track_lengths.as_deref()
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }

    /// Subset by position, preserving ids and attributes.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            track_lengths: self
                .track_lengths
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
        }
    }

    /// Same attributes, new positions.
    pub fn with_points(&self, points: Vec<Point3<T>>) -> Result<Self> {
        if points.len() != self.points.len() {
            return Err(Error::ShapeMismatch {
                expected: self.points.len(),
                actual: points.len(),
            });
        }
        Ok(Self {
            points,
            ..self.clone()
        })
    }

    /// Same cloud with points reordered by ascending id.
    pub fn sorted_by_id(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| self.ids[i]);
        self.select(&order)
    }

    /// Concatenate two clouds with disjoint ids.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let mut ids = self.ids.clone();
        ids.extend_from_slice(&other.ids);
        let mut out = Self::new(points).with_ids(ids)?;
        if let (Some(a), Some(b)) = (&self.track_lengths, &other.track_lengths) {
            out.track_lengths = Some(a.iter().chain(b).copied().collect());
        }
        if let (Some(a), Some(b)) = (&self.normals, &other.normals) {
            out.normals = Some(a.iter().chain(b).copied().collect());
        }
        Ok(out)
    }

    /// Axis-aligned xy bounds `(min, max)`; `None` for an empty cloud.
    pub fn xy_bounds(&self) -> Option<([T; 2], [T; 2])> {
        let first = self.points.first()?;
        let mut lo = [first.x, first.y];
        let mut hi = lo;
        for p in &self.points {
            lo[0] = lo[0].min(p.x);
            lo[1] = lo[1].min(p.y);
            hi[0] = hi[0].max(p.x);
            hi[1] = hi[1].max(p.y);
        }
        Some((lo, hi))
    }

    pub fn centroid(&self) -> Option<Point3<T>> {
        if self.is_empty() {
            return None;
        }
        let mut acc = Vector3::zeros();
        for p in &self.points {
            acc += p.coords;
        }
        Some(Point3::from(acc / T::from_usize(self.len()).unwrap()))
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        let conv = |x: T| U::lit(x.to_f64_lossy());
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| Point3::new(conv(p.x), conv(p.y), conv(p.z)))
                .collect(),
            normals: self.normals.as_ref().map(|ns| {
                ns.iter()
                    .map(|n| n.map(|n| Vector3::new(conv(n.x), conv(n.y), conv(n.z))))
                    .collect()
            }),
            track_lengths: self.track_lengths.clone(),
            ids: self.ids.clone(),
        }
    }
}
