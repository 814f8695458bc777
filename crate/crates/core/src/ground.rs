//! Ground removal by per-cell lowest-z bands.

use std::collections::HashMap;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Split a cloud into (kept, ground).
///
/// The xy plane is tiled with square cells of side `cell`. A point is ground
/// when its z lies within `h_ground` of the lowest z in its cell.
pub fn remove_ground<T: Real>(
    cloud: &PointCloud<T>,
    cell: T,
    h_ground: T,
) -> Result<(PointCloud<T>, PointCloud<T>)> {
    if cell <= T::zero() || h_ground < T::zero() {
        return Err(Error::Config(format!(
            "ground removal needs cell > 0 and h_ground >= 0 (got {cell}, {h_ground})"
        )));
    }
    if cloud.is_empty() {
        return Ok((cloud.clone(), cloud.clone()));
    }
    let key = |x: T, y: T| -> (i64, i64) {
        (
            (x / cell).floor().to_i64().unwrap_or(i64::MIN),
            (y / cell).floor().to_i64().unwrap_or(i64::MIN),
        )
    };
    let mut lowest: HashMap<(i64, i64), T> = HashMap::new();
    for p in cloud.points() {
        lowest
            .entry(key(p.x, p.y))
            .and_modify(|z| *z = z.min(p.z))
            .or_insert(p.z);
    }
    let (mut kept, mut ground) = (Vec::new(), Vec::new());
    for (i, p) in cloud.points().iter().enumerate() {
        if p.z - lowest[&key(p.x, p.y)] <= h_ground {
            ground.push(i);
        } else {
            kept.push(i);
        }
    }
    Ok((cloud.select(&kept), cloud.select(&ground)))
}
