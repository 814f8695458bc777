//! Camera trajectories as comma-separated text, one frame per line:
//! `frame_id,t,cx,cy,cz,qw,qx,qy,qz,hfov_deg,vfov_deg,fx,fy,px,py,range_m`.
//! Blank lines and lines starting with `#` are ignored.

use std::path::Path;

use nalgebra::{Point3, Quaternion, UnitQuaternion};

use super::{read_text, write_atomic};
use crate::change::{CameraFrame, CameraTrajectory};
use crate::error::{Error, Result};

const FIELDS: usize = 16;
const HEADER: &str = "# frame_id,t,cx,cy,cz,qw,qx,qy,qz,hfov_deg,vfov_deg,fx,fy,px,py,range_m\n";
/// Quaternions further than this from unit norm are rejected rather than
/// renormalized.
const QUAT_TOL: f64 = 1e-3;

pub fn decode_trajectory(text: &str, path: &Path) -> Result<CameraTrajectory> {
    let mut frames = Vec::new();
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let start = offset;
        offset += raw.len();
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            offset: start as u64,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != FIELDS {
            return Err(err(format!("expected {FIELDS} fields, found {}", fields.len())));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| err(format!("frame id {:?} is not a non-negative integer", fields[0])))?;
        let mut v = [0.0f64; FIELDS - 1];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| err(format!("{f:?} is not a number")))?;
        }
        let q = Quaternion::new(v[4], v[5], v[6], v[7]);
        let norm = q.norm();
        if !((norm - 1.0).abs() <= QUAT_TOL) {
            return Err(Error::Trajectory(format!(
                "frame {id}: quaternion norm {norm} is not within {QUAT_TOL} of 1"
            )));
        }
        // Exactly unit quaternions are kept bit-for-bit.
        let orientation = if norm == 1.0 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        frames.push(CameraFrame {
            id,
            t: v[0],
            center: Point3::new(v[1], v[2], v[3]),
            orientation,
            hfov_deg: v[8],
            vfov_deg: v[9],
            fx: v[10],
            fy: v[11],
            px: v[12],
            py: v[13],
            range: v[14],
        });
    }
    CameraTrajectory::new(frames)
}

pub fn encode_trajectory(traj: &CameraTrajectory) -> String {
    let mut out = String::from(HEADER);
    for f in traj.frames() {
        let q = f.orientation.quaternion();
        let c = f.center;
        out += &format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            f.id, f.t, c.x, c.y, c.z, q.w, q.i, q.j, q.k, f.hfov_deg, f.vfov_deg, f.fx, f.fy, f.px, f.py, f.range
        );
    }
    out
}

pub fn read_trajectory(path: &Path) -> Result<CameraTrajectory> {
    decode_trajectory(&read_text(path)?, path)
}

pub fn write_trajectory(traj: &CameraTrajectory, path: &Path) -> Result<()> {
    write_atomic(path, encode_trajectory(traj).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn p() -> &'static Path {
        Path::new("traj.csv")
    }

    fn line(id: u64, q: [f64; 4]) -> String {
        format!("{id},0.5,1,2,3,{},{},{},{},30,20,800,600,400,300,100\n", q[0], q[1], q[2], q[3])
    }

    #[test]
    fn round_trip() {
        let yaw = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.3);
        let frames = (0..3)
            .map(|i| CameraFrame::looking(i * 2, Point3::new(i as f64 / 3.0, -1.0, 2.5), yaw, 40.0, 30.0, 1024, 768, 100.0))
            .collect();
        let traj = CameraTrajectory::new(frames).unwrap();
        let back = decode_trajectory(&encode_trajectory(&traj), p()).unwrap();
        for (a, b) in traj.frames().iter().zip(back.frames()) {
            assert_eq!(a.center, b.center);
            assert_eq!((a.fx, a.fy, a.t, a.range), (b.fx, b.fy, b.t, b.range));
            assert!(a.orientation.angle_to(&b.orientation) < 1e-12);
        }
    }

    #[test]
    fn identity_frame_looks_along_x() {
        let traj = decode_trajectory(&line(0, [1.0, 0.0, 0.0, 0.0]), p()).unwrap();
        let f = &traj.frames()[0];
        assert!(f.sees(&Point3::new(50.0, 2.0, 3.0)));
        assert!(!f.sees(&Point3::new(-50.0, 2.0, 3.0)));
    }

    #[test]
    fn near_unit_quaternion_is_renormalized() {
        let traj = decode_trajectory(&line(0, [1.0005, 0.0, 0.0, 0.0]), p()).unwrap();
        assert!((traj.frames()[0].orientation.quaternion().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            decode_trajectory(&line(0, [0.9, 0.0, 0.0, 0.0]), p()),
            Err(Error::Trajectory(_))
        ));
        let shuffled = line(1, [1.0, 0.0, 0.0, 0.0]) + &line(0, [1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(decode_trajectory(&shuffled, p()), Err(Error::Trajectory(_))));
        let short = "# comment\n\n0,1,2\n";
        match decode_trajectory(short, p()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 11),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            decode_trajectory(&line(0, [1.0, 0.0, 0.0, 0.0]).replace("800", "x"), p()),
            Err(Error::Parse { .. })
        ));
    }
}
