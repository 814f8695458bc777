//! Deterministic synthetic street scenes with known warps and changes.
//!
//! A straight road runs along +x. Box buildings line both sides, the ground
//! is a gentle slope, and each traversal drives the road with one camera
//! looking left and one looking right per station. A surface point belongs
//! to a traversal's cloud when at least one of its frames sees the point and
//! the point faces that frame; its track length is the number of such frames
//! plus jitter. The source traversal is then moved by a smooth RBF warp and
//! Gaussian noise.

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::change::{CameraFrame, CameraTrajectory, ChangeEntry, ChangeLabel, ChangeMap, Origin};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::warp::{grid_over, warp_point, WarpParams};

/// Scene generation parameters. Lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub name: String,
    /// Station x range of each traversal.
    pub traj_ref: [f64; 2],
    pub traj_src: [f64; 2],
    pub station_spacing: f64,
    pub camera_height: f64,
    pub image_size: [u32; 2],
    pub focal: f64,
    pub camera_range: f64,
    /// Extra scenery beyond the stations at both ends.
    pub margin: f64,
    pub face_spacing: f64,
    pub ground_spacing: f64,
    pub ground_halfwidth: f64,
    pub ground_slope: f64,
    pub setback: [f64; 2],
    pub building_length: [f64; 2],
    pub building_gap: [f64; 2],
    pub building_depth: [f64; 2],
    pub building_height: [f64; 2],
    /// Low-track points per cloud, present in one traversal only.
    pub clutter: usize,
    /// Retention probability for points with track length >= 7, and below.
    pub keep_stable: f64,
    pub keep_unstable: f64,
    pub noise_sigma: f64,
    /// Largest displacement of the ground-truth warp over the scene.
    pub drift_max: f64,
    /// Ground-truth warp anchors per side.
    pub warp_side: usize,
    pub appear: usize,
    pub disappear: usize,
    /// Structures seen only by the source traversal.
    pub outside: usize,
    /// Points per injected structure.
    pub change_points: usize,
    /// Injected structure size (along road, across, height).
    pub change_size: [f64; 3],
    /// Distance from the road axis to the near face of injected structures.
    pub change_offset: f64,
    /// Drop points whose surface faces away from a frame. Off by default:
    /// the detector's visibility test is a plain frustum, and with culling
    /// on, back-facing surfaces inside the other traversal's frustums become
    /// false detections.
    pub cull_backfaces: bool,
}

impl Recipe {
    /// Two appeared, two disappeared and one source-only structure.
    pub fn acceptance() -> Self {
        Self {
            name: "acceptance".into(),
            traj_ref: [0.0, 100.0],
            traj_src: [0.0, 140.0],
            station_spacing: 1.0,
            camera_height: 2.5,
            image_size: [1024, 768],
            focal: 512.0,
            camera_range: 100.0,
            margin: 25.0,
            face_spacing: 1.25,
            ground_spacing: 3.0,
            ground_halfwidth: 24.0,
            ground_slope: 0.01,
            setback: [14.0, 20.0],
            building_length: [10.0, 20.0],
            building_gap: [3.0, 8.0],
            building_depth: [8.0, 12.0],
            building_height: [8.0, 16.0],
            clutter: 60,
            keep_stable: 0.98,
            keep_unstable: 0.8,
            noise_sigma: 0.05,
            drift_max: 1.5,
            warp_side: 3,
            appear: 2,
            disappear: 2,
            outside: 1,
            change_points: 400,
            change_size: [6.0, 3.0, 8.0],
            change_offset: 6.5,
            cull_backfaces: false,
        }
    }

    /// No changes, identical trajectories.
    pub fn drift() -> Self {
        Self {
            name: "drift".into(),
            traj_src: [0.0, 100.0],
            appear: 0,
            disappear: 0,
            outside: 0,
            ..Self::acceptance()
        }
    }

    /// A short street for fast tests: one appeared, one disappeared.
    pub fn small() -> Self {
        Self {
            name: "small".into(),
            traj_ref: [0.0, 40.0],
            traj_src: [0.0, 40.0],
            margin: 15.0,
            clutter: 20,
            appear: 1,
            disappear: 1,
            outside: 0,
            change_points: 300,
            ..Self::acceptance()
        }
    }

    /// `default` is the acceptance recipe.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "default" | "acceptance" => Ok(Self::acceptance()),
            "drift" => Ok(Self::drift()),
            "small" => Ok(Self::small()),
            other => Err(Error::Config(format!(
                "unknown recipe {other:?} (expected default|acceptance|drift|small)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("recipe {}: {m}", self.name)));
        let positive = [
            self.station_spacing,
            self.camera_height,
            self.focal,
            self.camera_range,
            self.face_spacing,
            self.ground_spacing,
            self.ground_halfwidth,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("spacings, camera parameters and extents must be positive");
        }
        let ranges = [
            self.traj_ref,
            self.traj_src,
            self.setback,
            self.building_length,
            self.building_gap,
            self.building_depth,
            self.building_height,
        ];
        if ranges.iter().any(|r| !(r[0] <= r[1])) {
            return bad("ranges must be ordered");
        }
        if self.building_length[0] <= 0.0 || self.building_height[0] <= 0.0 || self.building_depth[0] <= 0.0 {
            return bad("building sizes must be positive");
        }
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return bad("image size must be positive");
        }
        if !(0.0..=1.0).contains(&self.keep_stable) || !(0.0..=1.0).contains(&self.keep_unstable) {
            return bad("retention probabilities must lie in [0, 1]");
        }
        if self.noise_sigma < 0.0 || self.drift_max < 0.0 || self.warp_side == 0 {
            return bad("noise, drift and warp grid must be non-negative");
        }
        if self.appear + self.disappear + self.outside > 0
            && (self.change_points == 0 || self.change_size.iter().any(|s| *s <= 0.0))
        {
            return bad("injected structures need points and a positive size");
        }
        if self.change_offset + self.change_size[1] >= self.setback[0] {
            return bad("injected structures must stand clear of the buildings");
        }
        Ok(())
    }
}

/// A generated scene pair with ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub recipe: Recipe,
    pub seed: u64,
    pub reference: PointCloud<f64>,
    /// Source cloud in its own (drifted) frame.
    pub source: PointCloud<f64>,
    /// Maps reference-frame positions to the source frame.
    pub gt_warp: WarpParams<f64>,
    /// Ground-truth labels over both clouds. Positions are in the reference
    /// frame: source entries sit where the point was before the drift.
    pub truth: ChangeMap<f64>,
    pub traj_ref: CameraTrajectory,
    /// Source frames, centers in the source frame.
    pub traj_src: CameraTrajectory,
    /// For each source point, the reference point sampled from the same
    /// surface location, if any.
    pub src_counterpart: Vec<Option<u32>>,
}

#[derive(Debug, Clone, Copy)]
struct Face {
    origin: Point3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
    normal: Vector3<f64>,
}

impl Face {
    fn area(&self) -> f64 {
        self.a.norm() * self.b.norm()
    }

    fn at(&self, s: f64, t: f64) -> Point3<f64> {
        self.origin + self.a * s + self.b * t
    }
}

/// Axis-aligned box standing on z = `min[2]`.
fn box_faces(min: [f64; 3], max: [f64; 3]) -> Vec<Face> {
    let [x0, y0, z0] = min;
    let [x1, y1, z1] = max;
    let (dx, dy, dz) = (x1 - x0, y1 - y0, z1 - z0);
    let f = |o: [f64; 3], a: [f64; 3], b: [f64; 3], n: [f64; 3]| Face {
        origin: Point3::new(o[0], o[1], o[2]),
        a: Vector3::new(a[0], a[1], a[2]),
        b: Vector3::new(b[0], b[1], b[2]),
        normal: Vector3::new(n[0], n[1], n[2]),
    };
    vec![
        f([x0, y0, z0], [dx, 0.0, 0.0], [0.0, 0.0, dz], [0.0, -1.0, 0.0]),
        f([x0, y1, z0], [dx, 0.0, 0.0], [0.0, 0.0, dz], [0.0, 1.0, 0.0]),
        f([x0, y0, z0], [0.0, dy, 0.0], [0.0, 0.0, dz], [-1.0, 0.0, 0.0]),
        f([x1, y0, z0], [0.0, dy, 0.0], [0.0, 0.0, dz], [1.0, 0.0, 0.0]),
        f([x0, y0, z1], [dx, 0.0, 0.0], [0.0, dy, 0.0], [0.0, 0.0, 1.0]),
    ]
}

/// Left- and right-looking frames at every station in `xs`.
fn make_trajectory(recipe: &Recipe, xs: [f64; 2]) -> Result<CameraTrajectory> {
    let [w, h] = recipe.image_size;
    let hfov = (w as f64 / 2.0 / recipe.focal).atan().to_degrees();
    let vfov = (h as f64 / 2.0 / recipe.focal).atan().to_degrees();
    let n = ((xs[1] - xs[0]) / recipe.station_spacing).floor() as u64 + 1;
    let left = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    let right = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -std::f64::consts::FRAC_PI_2);
    let mut frames = Vec::with_capacity(2 * n as usize);
    for i in 0..n {
        let x = xs[0] + i as f64 * recipe.station_spacing;
        let c = Point3::new(x, 0.0, recipe.camera_height);
        for (j, q) in [left, right].into_iter().enumerate() {
            let mut f = CameraFrame::looking(2 * i + j as u64, c, q, hfov, vfov, w, h, recipe.camera_range);
            f.fx = recipe.focal;
            f.fy = recipe.focal;
            // 10 m/s along the road.
            f.t = x / 10.0;
            frames.push(f);
        }
    }
    CameraTrajectory::new(frames)
}

/// Frames that see `p` (and, when culling, that `p`'s surface faces).
fn observers(traj: &CameraTrajectory, p: &Point3<f64>, n: &Vector3<f64>, cull: bool) -> u16 {
    let c = traj
        .frames()
        .iter()
        .filter(|f| (!cull || n.dot(&(f.center - p)) > 0.0) && f.sees(p))
        .count();
    c.min(u16::MAX as usize) as u16
}

fn jitter_track<R: Rng>(rng: &mut R, count: u16) -> u16 {
    (count as i32 + rng.random_range(-1..=1)).max(2) as u16
}

/// A world point and what each traversal made of it.
struct Sample {
    pos: Point3<f64>,
    normal: Vector3<f64>,
    /// Track lengths in ref / src, `None` when absent from that cloud.
    track: [Option<u16>; 2],
    /// Truth label if the point is in the corresponding cloud.
    label: ChangeLabel,
}

struct Builder<'a> {
    recipe: &'a Recipe,
    trajs: [CameraTrajectory; 2],
    samples: Vec<Sample>,
}

impl Builder<'_> {
    fn keep<R: Rng>(&self, rng: &mut R, track: u16) -> bool {
        let p = if track >= 7 {
            self.recipe.keep_stable
        } else {
            self.recipe.keep_unstable
        };
        rng.random::<f64>() < p
    }

    /// Static surface point, reconstructed by each traversal independently.
    fn add_static<R: Rng>(&mut self, rng: &mut R, pos: Point3<f64>, normal: Vector3<f64>) {
        let mut track = [None, None];
        for (k, traj) in self.trajs.iter().enumerate() {
            let n = observers(traj, &pos, &normal, self.recipe.cull_backfaces);
            if n > 0 {
                let t = jitter_track(rng, n);
                if self.keep(rng, t) {
                    track[k] = Some(t);
                }
            }
        }
        if track.iter().any(Option::is_some) {
            self.samples.push(Sample {
                pos,
                normal,
                track,
                label: ChangeLabel::Unchanged,
            });
        }
    }

    fn sample_faces<R: Rng>(&mut self, rng: &mut R, faces: &[Face], spacing: f64) {
        for face in faces {
            let na = (face.a.norm() / spacing).ceil().max(1.0) as usize;
            let nb = (face.b.norm() / spacing).ceil().max(1.0) as usize;
            for i in 0..na {
                for j in 0..nb {
                    let s = (i as f64 + 0.5 + rng.random_range(-0.35..0.35)) / na as f64;
                    let t = (j as f64 + 0.5 + rng.random_range(-0.35..0.35)) / nb as f64;
                    self.add_static(rng, face.at(s, t), face.normal);
                }
            }
        }
    }

    /// Exactly `count` points on the faces of a structure that exists only
    /// in traversal `which` (0 ref, 1 src), all seen by that traversal.
    fn add_exclusive<R: Rng>(
        &mut self,
        rng: &mut R,
        faces: &[Face],
        which: usize,
        count: usize,
        label: ChangeLabel,
    ) -> Result<()> {
        let traj = &self.trajs[which];
        let total: f64 = faces.iter().map(Face::area).sum();
        let mut added = 0;
        let mut attempts = 0usize;
        while added < count {
            attempts += 1;
            if attempts > 10_000 * count {
                return Err(Error::Config(format!(
                    "recipe {}: injected structure is not visible enough to place {count} points",
                    self.recipe.name
                )));
            }
            let mut pick = rng.random::<f64>() * total;
            let face = faces
                .iter()
                .find(|f| {
                    pick -= f.area();
                    pick < 0.0
                })
                .unwrap_or(faces.last().unwrap());
            let pos = face.at(rng.random(), rng.random());
            let n = observers(traj, &pos, &face.normal, self.recipe.cull_backfaces);
            if n == 0 {
                continue;
            }
            let mut track = [None, None];
            track[which] = Some(jitter_track(rng, n));
            self.samples.push(Sample {
                pos,
                normal: face.normal,
                track,
                label,
            });
            added += 1;
        }
        Ok(())
    }
}

/// Draw a scene. Pure function of `(recipe, seed)`.
pub fn generate_scene(recipe: &Recipe, seed: u64) -> Result<SyntheticScene> {
    recipe.validate()?;
    // Independent streams so that changing one part of a recipe does not
    // reshuffle the others.
    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(s);
        r
    };
    let mut layout_rng = stream(1);
    let mut sample_rng = stream(2);
    let mut change_rng = stream(3);
    let mut clutter_rng = stream(4);
    let mut warp_rng = stream(5);
    let mut noise_rng = stream(6);

    let traj_ref = make_trajectory(recipe, recipe.traj_ref)?;
    let traj_src_world = make_trajectory(recipe, recipe.traj_src)?;
    let x_lo = recipe.traj_ref[0].min(recipe.traj_src[0]) - recipe.margin;
    let x_hi = recipe.traj_ref[1].max(recipe.traj_src[1]) + recipe.margin;
    let ground_z = |x: f64| recipe.ground_slope * x;

    let mut b = Builder {
        recipe,
        trajs: [traj_ref.clone(), traj_src_world.clone()],
        samples: Vec::new(),
    };

    // Buildings on both sides.
    let mut buildings = Vec::new();
    for side in [1.0, -1.0] {
        let mut x = x_lo + layout_rng.random_range(0.0..recipe.building_gap[1]);
        while x < x_hi {
            let len = layout_rng.random_range(recipe.building_length[0]..=recipe.building_length[1]);
            let setback = layout_rng.random_range(recipe.setback[0]..=recipe.setback[1]);
            let depth = layout_rng.random_range(recipe.building_depth[0]..=recipe.building_depth[1]);
            let height = layout_rng.random_range(recipe.building_height[0]..=recipe.building_height[1]);
            let (y0, y1) = if side > 0.0 {
                (setback, setback + depth)
            } else {
                (-setback - depth, -setback)
            };
            let z0 = ground_z(x);
            buildings.push(box_faces([x, y0, z0], [x + len, y1, z0 + height]));
            x += len + layout_rng.random_range(recipe.building_gap[0]..=recipe.building_gap[1]);
        }
    }
    for faces in &buildings {
        b.sample_faces(&mut sample_rng, faces, recipe.face_spacing);
    }

    // Ground.
    let up = Vector3::new(-recipe.ground_slope, 0.0, 1.0).normalize();
    let nx = ((x_hi - x_lo) / recipe.ground_spacing).ceil() as usize;
    let ny = (2.0 * recipe.ground_halfwidth / recipe.ground_spacing).ceil() as usize;
    for i in 0..nx {
        for j in 0..ny {
            let x = x_lo + (i as f64 + 0.5 + sample_rng.random_range(-0.35..0.35)) * recipe.ground_spacing;
            let y = -recipe.ground_halfwidth
                + (j as f64 + 0.5 + sample_rng.random_range(-0.35..0.35)) * recipe.ground_spacing;
            b.add_static(&mut sample_rng, Point3::new(x, y, ground_z(x)), up);
        }
    }

    // Injected changes, spread along the stretch both traversals cover.
    let [cx, cy, cz] = recipe.change_size;
    let lo = recipe.traj_ref[0].max(recipe.traj_src[0]) + 10.0;
    let hi = recipe.traj_ref[1].min(recipe.traj_src[1]) - 10.0;
    let n_changes = recipe.appear + recipe.disappear;
    if n_changes > 0 && (hi - lo) < n_changes as f64 * (cx + 4.0) {
        return Err(Error::Config(format!(
            "recipe {}: not enough road for {n_changes} injected structures",
            recipe.name
        )));
    }
    let mut kinds = Vec::with_capacity(n_changes);
    for i in 0..recipe.appear.max(recipe.disappear) {
        if i < recipe.appear {
            kinds.push(true);
        }
        if i < recipe.disappear {
            kinds.push(false);
        }
    }
    for i in 0..n_changes {
        let center = lo + (hi - lo) * (i as f64 + 0.5) / n_changes as f64 + change_rng.random_range(-1.0..1.0);
        // Sides +, -, -, +, ... so that interleaved kinds land on both sides.
        let side = if i % 4 == 0 || i % 4 == 3 { 1.0 } else { -1.0 };
        let x0 = center - cx / 2.0;
        let (y0, y1) = if side > 0.0 {
            (recipe.change_offset, recipe.change_offset + cy)
        } else {
            (-recipe.change_offset - cy, -recipe.change_offset)
        };
        let faces = box_faces([x0, y0, ground_z(x0)], [x0 + cx, y1, ground_z(x0) + cz]);
        let appear = kinds[i];
        let (which, label) = if appear {
            (1, ChangeLabel::Appeared)
        } else {
            (0, ChangeLabel::Disappeared)
        };
        b.add_exclusive(&mut change_rng, &faces, which, recipe.change_points, label)?;
    }

    // Structures beyond the reference traversal's view: ordinary static
    // scenery that only the source traversal happens to see.
    for i in 0..recipe.outside {
        let reach = recipe.traj_ref[1] + recipe.change_offset + cy + 6.0;
        let x0 = reach + i as f64 * (cx + 6.0);
        if x0 + cx > recipe.traj_src[1] {
            return Err(Error::Config(format!(
                "recipe {}: source traversal too short for source-only structures",
                recipe.name
            )));
        }
        let y0 = recipe.change_offset;
        let faces = box_faces([x0, y0, ground_z(x0)], [x0 + cx, y0 + cy, ground_z(x0) + cz]);
        let before = b.samples.len();
        b.sample_faces(&mut change_rng, &faces, recipe.face_spacing / 2.0);
        if b.samples[before..].iter().any(|s| s.track[0].is_some()) {
            return Err(Error::Config(format!(
                "recipe {}: source-only structure is visible to the reference traversal",
                recipe.name
            )));
        }
    }

    // Clutter: low-track points floating near surfaces, one cloud each.
    let surface: Vec<(Point3<f64>, Vector3<f64>)> = b
        .samples
        .iter()
        .filter(|s| s.label == ChangeLabel::Unchanged && s.normal.z.abs() < 0.5)
        .map(|s| (s.pos, s.normal))
        .collect();
    for which in 0..2 {
        if surface.is_empty() {
            break;
        }
        let mut added = 0;
        let mut attempts = 0;
        while added < recipe.clutter && attempts < 100 * recipe.clutter.max(1) {
            attempts += 1;
            let (p, n) = surface[clutter_rng.random_range(0..surface.len())];
            let lateral = Vector3::new(
                clutter_rng.random_range(-0.5..0.5),
                clutter_rng.random_range(-0.5..0.5),
                clutter_rng.random_range(-0.5..0.5),
            );
            let pos = p + n * clutter_rng.random_range(0.3..1.5) + lateral;
            if !b.trajs[which].sees(&pos) {
                continue;
            }
            let mut track = [None, None];
            track[which] = Some(clutter_rng.random_range(2..=4));
            b.samples.push(Sample {
                pos,
                normal: n,
                track,
                label: ChangeLabel::Unchanged,
            });
            added += 1;
        }
    }

    // Ground-truth warp over the scene footprint.
    let world: Vec<Point3<f64>> = b.samples.iter().map(|s| s.pos).collect();
    let gt_warp = draw_warp(&world, recipe, &mut warp_rng)?;

    // Assemble clouds.
    let normal = Normal::new(0.0, recipe.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut ref_pts = Vec::new();
    let mut ref_tracks = Vec::new();
    let mut src_pts = Vec::new();
    let mut src_tracks = Vec::new();
    let mut src_counterpart = Vec::new();
    let mut truth_ref = Vec::new();
    let mut truth_src = Vec::new();
    let mut src_world = Vec::new();
    for s in &b.samples {
        let ref_id = s.track[0].map(|t| {
            ref_pts.push(s.pos);
            ref_tracks.push(t);
            truth_ref.push(s.label);
            (ref_pts.len() - 1) as u32
        });
        if let Some(t) = s.track[1] {
            let mut noise = Vector3::zeros();
            if recipe.noise_sigma > 0.0 {
                loop {
                    noise = Vector3::new(
                        normal.sample(&mut noise_rng),
                        normal.sample(&mut noise_rng),
                        normal.sample(&mut noise_rng),
                    );
                    if noise.norm() <= 3.0 * recipe.noise_sigma {
                        break;
                    }
                }
            }
            src_pts.push(warp_point(&s.pos, &gt_warp) + noise);
            src_tracks.push(t);
            src_counterpart.push(ref_id);
            truth_src.push(s.label);
            src_world.push(s.pos);
        }
    }
    let reference = PointCloud::new(ref_pts).with_track_lengths(ref_tracks)?;
    let source = PointCloud::new(src_pts).with_track_lengths(src_tracks)?;
    let mut truth = ChangeMap::unchanged(&reference, &source.with_points(src_world)?);
    for (e, l) in truth.entries.iter_mut().zip(truth_ref.iter().chain(&truth_src)) {
        e.label = *l;
    }
    let traj_src = traj_src_world.map_centers(|c| warp_point(c, &gt_warp));

    Ok(SyntheticScene {
        recipe: recipe.clone(),
        seed,
        reference,
        source,
        gt_warp,
        truth,
        traj_ref,
        traj_src,
        src_counterpart,
    })
}

/// Random smooth warp on a coarse grid, scaled so its largest displacement
/// over `points` is `drift_max`.
fn draw_warp<R: Rng>(points: &[Point3<f64>], recipe: &Recipe, rng: &mut R) -> Result<WarpParams<f64>> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    }
    if points.is_empty() {
        return Err(Error::Config(format!("recipe {}: scene has no points", recipe.name)));
    }
    let grid = grid_over(lo, hi, recipe.warp_side);
    let k = grid.centers.len();
    let sigma = grid.default_sigma();
    let weights: Vec<[f64; 3]> = (0..k)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    let unit = WarpParams::new(grid.centers.clone(), vec![sigma; k], weights)?;
    let peak = points
        .iter()
        .map(|p| (warp_point(p, &unit) - p).norm())
        .fold(0.0, f64::max);
    let scale = if peak > 0.0 { recipe.drift_max / peak } else { 0.0 };
    let weights = unit
        .weights
        .iter()
        .map(|w| [w[0] * scale, w[1] * scale, w[2] * scale])
        .collect();
    WarpParams::new(unit.centers, unit.sigmas, weights)
}

/// Invert `x -> warp(x)` at `y` by fixed-point iteration.
pub fn invert_warp_point(y: &Point3<f64>, params: &WarpParams<f64>) -> Point3<f64> {
    let mut x = *y;
    for _ in 0..100 {
        let next = y - (warp_point(&x, params) - x);
        if (next - x).norm() < 1e-12 {
            return next;
        }
        x = next;
    }
    x
}

/// Truth entries of one origin, in cloud order.
pub fn truth_labels(truth: &ChangeMap<f64>, origin: Origin) -> Vec<&ChangeEntry<f64>> {
    truth.entries.iter().filter(|e| e.origin == origin).collect()
}
