//! Oracles and metrics: brute-force nearest neighbor, per-point 3D scores,
//! projected 2D change masks and mIOU.
//!
//! Conventions for empty sets: precision is 1 when nothing is predicted,
//! recall is 1 when nothing is true, F1 is 0 when precision and recall are
//! both 0, and a class IoU is 1 when the union is empty.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::change::{CameraFrame, ChangeLabel, ChangeMap, Origin};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::{Metric, Neighbor};
use crate::scalar::Real;

/// Exhaustive nearest neighbor with the index's distance formula and tie
/// rule (lowest id).
pub fn brute_force_nn<T: Real>(q: &Point3<T>, cloud: &PointCloud<T>, metric: Metric) -> Result<Neighbor<T>> {
    cloud.ensure_non_empty()?;
    let qa = [q.x, q.y, q.z];
    let mut best: Option<Neighbor<T>> = None;
    for (i, (p, &id)) in cloud.points().iter().zip(cloud.ids()).enumerate() {
        let d = metric.dist_sq(&qa, &[p.x, p.y, p.z]);
        let better = match &best {
            None => true,
            Some(b) => d < b.dist_sq || (d == b.dist_sq && id < b.id),
        };
        if better {
            best = Some(Neighbor {
                index: i,
                id,
                dist_sq: d,
            });
        }
    }
    Ok(best.unwrap())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merged(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Confusion,
}

impl From<Confusion> for Scores {
    fn from(c: Confusion) -> Self {
        Self {
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            counts: c,
        }
    }
}

/// Per-point scores for each direction and both together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eval3d {
    /// Over source points.
    pub appeared: Scores,
    /// Over reference points.
    pub disappeared: Scores,
    pub combined: Scores,
}

/// Compare predicted labels with the truth entry by entry. Both maps must
/// list the same `(origin, id)` pairs in the same order.
pub fn eval_3d<T: Real, U: Real>(pred: &ChangeMap<T>, truth: &ChangeMap<U>) -> Result<Eval3d> {
    if pred.len() != truth.len() {
        return Err(Error::Eval(format!(
            "prediction has {} points, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut app = Confusion::default();
    let mut dis = Confusion::default();
    for (p, t) in pred.entries.iter().zip(&truth.entries) {
        if p.origin != t.origin || p.id != t.id {
            return Err(Error::Eval(format!(
                "point mismatch: predicted {:?}/{} against truth {:?}/{}",
                p.origin, p.id, t.origin, t.id
            )));
        }
        let label = t.origin.change_label();
        let c = match t.origin {
            Origin::Src => &mut app,
            Origin::Ref => &mut dis,
        };
        c.add(p.label == label, t.label == label);
    }
    Ok(Eval3d {
        appeared: app.into(),
        disappeared: dis.into(),
        combined: app.merged(&dis).into(),
    })
}

/// Row-major binary image; `true` marks changed pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// Set every pixel `(i, j)` with `(i - u)^2 + (j - v)^2 <= r^2`.
    pub fn stamp_disc(&mut self, u: f64, v: f64, radius: u32) {
        let r = radius as f64;
        let clamp = |x: f64, hi: u32| x.max(0.0).min(hi as f64 - 1.0);
        if u + r < 0.0 || v + r < 0.0 || u - r > self.width as f64 - 1.0 || v - r > self.height as f64 - 1.0 {
            return;
        }
        let (i0, i1) = (clamp((u - r).ceil(), self.width) as u32, clamp((u + r).floor(), self.width) as u32);
        let (j0, j1) = (clamp((v - r).ceil(), self.height) as u32, clamp((v + r).floor(), self.height) as u32);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let (di, dj) = (i as f64 - u, j as f64 - v);
                if di * di + dj * dj <= r * r {
                    self.set(i, j, true);
                }
            }
        }
    }
}

/// Union of discs around every changed point with depth in `(0, range_m]`
/// as seen from `frame`.
pub fn project_changes<T: Real>(
    changes: &ChangeMap<T>,
    frame: &CameraFrame,
    width: u32,
    height: u32,
    radius_px: u32,
    range_m: f64,
) -> Mask {
    let mut mask = Mask::new(width, height);
    for e in changes.changed() {
        let p = Point3::new(
            e.position.x.to_f64_lossy(),
            e.position.y.to_f64_lossy(),
            e.position.z.to_f64_lossy(),
        );
        if (p - frame.center).norm() > range_m {
            continue;
        }
        if let Some((u, v)) = frame.project(&p) {
            mask.stamp_disc(u, v, radius_px);
        }
    }
    mask
}

/// `(changed IoU, unchanged IoU)` of one mask pair.
pub fn class_iou(pred: &Mask, truth: &Mask) -> Result<(f64, f64)> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(Error::Eval(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            pred.width, pred.height, truth.width, truth.height
        )));
    }
    let (mut inter, mut union) = ([0u64; 2], [0u64; 2]);
    for (&p, &t) in pred.data.iter().zip(&truth.data) {
        for (c, class) in [true, false].into_iter().enumerate() {
            let (a, b) = (p == class, t == class);
            inter[c] += u64::from(a && b);
            union[c] += u64::from(a || b);
        }
    }
    let iou = |c: usize| ratio_or_one(inter[c], union[c]);
    Ok((iou(0), iou(1)))
}

/// Per-pair mean of the two class IoUs.
pub fn pair_iou(pred: &Mask, truth: &Mask) -> Result<f64> {
    let (c, u) = class_iou(pred, truth)?;
    Ok((c + u) / 2.0)
}

/// Mean over pairs of [`pair_iou`].
pub fn miou(pred: &[Mask], truth: &[Mask]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Eval(format!(
            "{} predicted masks against {} truth masks",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Eval("no mask pairs".into()));
    }
    let mut sum = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        sum += pair_iou(p, t)?;
    }
    Ok(sum / pred.len() as f64)
}

/// Metrics of one scene, for JSON and CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub scene: String,
    pub eval_3d: Option<Eval3d>,
    /// IoU of each image pair, in frame order.
    pub pair_iou: Vec<f64>,
    pub miou: Option<f64>,
}

impl EvalResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Header `scene,direction,precision,recall,f1,iou`; 3D rows leave `iou`
    /// empty, the `image` row carries the mIOU only.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,direction,precision,recall,f1,iou\n");
        if let Some(e) = &self.eval_3d {
            for (name, s) in [
                (ChangeLabel::Appeared.to_string(), e.appeared),
                (ChangeLabel::Disappeared.to_string(), e.disappeared),
                ("combined".to_string(), e.combined),
            ] {
                out += &format!("{},{name},{},{},{},\n", self.scene, s.precision, s.recall, s.f1);
            }
        }
        if let Some(m) = self.miou {
            out += &format!("{},image,,,,{m}\n", self.scene);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn map(labels: &[(Origin, ChangeLabel)]) -> ChangeMap<f64> {
        let mut entries = Vec::new();
        for (i, (o, l)) in labels.iter().enumerate() {
            entries.push(crate::change::ChangeEntry {
                origin: *o,
                id: i as u32,
                position: Point3::new(i as f64, 0.0, 0.0),
                response: 0.0,
                label: *l,
            });
        }
        ChangeMap { entries }
    }

    #[test]
    fn brute_force_conventions() {
        let c = PointCloud::from_xyz(&[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        let n = brute_force_nn(&Point3::origin(), &c, Metric::Xyz).unwrap();
        assert_eq!((n.id, n.dist_sq), (0, 1.0));
        let one = PointCloud::from_xyz(&[[5.0, 5.0, 5.0]]);
        assert_eq!(brute_force_nn(&Point3::origin(), &one, Metric::Xyz).unwrap().id, 0);
        assert!(brute_force_nn(&Point3::origin(), &PointCloud::<f64>::new(vec![]), Metric::Xyz).is_err());
    }

    #[test]
    fn eval_conventions() {
        use ChangeLabel::*;
        use Origin::*;
        let truth = map(&[(Src, Appeared), (Src, Appeared), (Src, Unchanged), (Ref, Disappeared)]);
        let e = eval_3d(&truth, &truth).unwrap();
        assert_eq!((e.combined.precision, e.combined.recall), (1.0, 1.0));

        let none = map(&[(Src, Unchanged), (Src, Unchanged), (Src, Unchanged), (Ref, Unchanged)]);
        let e = eval_3d(&none, &truth).unwrap();
        assert_eq!((e.appeared.precision, e.appeared.recall, e.appeared.f1), (1.0, 0.0, 0.0));

        let half = map(&[(Src, Appeared), (Src, Unchanged), (Src, Unchanged), (Ref, Unchanged)]);
        let e = eval_3d(&half, &truth).unwrap();
        assert_eq!((e.appeared.precision, e.appeared.recall), (1.0, 0.5));
        assert_eq!(e.appeared.counts, Confusion { tp: 1, fp: 0, fn_: 1, tn: 1 });

        let short = map(&[(Src, Appeared)]);
        assert!(eval_3d(&short, &truth).is_err());
        let swapped = map(&[(Ref, Unchanged), (Src, Unchanged), (Src, Unchanged), (Ref, Unchanged)]);
        assert!(eval_3d(&swapped, &truth).is_err());
    }

    #[test]
    fn disc_on_axis() {
        let frame = CameraFrame::looking(0, Point3::origin(), UnitQuaternion::identity(), 45.0, 36.869_897_645_844_02, 1024, 768, 100.0);
        let m = map(&[(Origin::Src, ChangeLabel::Appeared)]);
        let mut at50 = m.clone();
        at50.entries[0].position = Point3::new(50.0, 0.0, 0.0);
        let mask = project_changes(&at50, &frame, 1024, 768, 20, 100.0);
        assert_eq!(mask.count(), 1257);
        assert!(mask.get(512, 384) && mask.get(532, 384) && !mask.get(533, 384));
        let mut at150 = m;
        at150.entries[0].position = Point3::new(150.0, 0.0, 0.0);
        assert_eq!(project_changes(&at150, &frame, 1024, 768, 20, 100.0).count(), 0);
    }

    #[test]
    fn disc_clipped_at_border() {
        let mut m = Mask::new(10, 10);
        m.stamp_disc(0.0, 0.0, 2);
        // Quarter disc of radius 2 including the axes: (0..=2, 0..=2) minus (2,1),(1,2),(2,2).
        assert_eq!(m.count(), 6);
        let mut far = Mask::new(10, 10);
        far.stamp_disc(-50.0, 4.0, 3);
        assert_eq!(far.count(), 0);
    }

    #[test]
    fn iou_conventions() {
        let empty = Mask::new(4, 4);
        assert_eq!(class_iou(&empty, &empty).unwrap(), (1.0, 1.0));
        let one = std::slice::from_ref(&empty);
        assert_eq!(miou(one, one).unwrap(), 1.0);
        assert!(miou(one, &[]).is_err());
        assert!(class_iou(&empty, &Mask::new(4, 5)).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = EvalResult {
            scene: "s".into(),
            eval_3d: None,
            pair_iou: vec![0.5],
            miou: Some(0.5),
        };
        assert_eq!(r.to_csv(), "scene,direction,precision,recall,f1,iou\ns,image,,,,0.5\n");
        assert_eq!(EvalResult::from_json(&r.to_json().unwrap()).unwrap(), r);
    }
}
