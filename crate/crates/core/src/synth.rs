//! Synthetic labeled objects with oracle detections: parts built from
//! primitive surfaces, super points, per-view boxes and masks, and
//! controllable detection noise whose features reveal truthfulness.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detect::{load_detections, save_detections, Detection, DetectionSet, Mask, MembershipMode};
use crate::error::{Error, Result};
use crate::geom::{
    compute_visibility, dot, fixed_viewpoints_with, load_cameras, load_scene, load_visibility, mean_nearest_neighbor_distance, normalize_cloud, project_all,
    render_depth, save_cameras, save_scene, save_visibility, sub, Camera, Scene, SuperPointPartition, Vec3, VisibilityMap, VisibilityParams,
    DEFAULT_DISTANCE, DEFAULT_RESOLUTION, DEFAULT_VIEWS,
};
use crate::instance::{load_instances, save_instances, InstanceSet};
use crate::train::TrainObject;

/// File names inside an object directory.
pub mod files {
    pub const CLOUD: &str = "cloud.txt";
    pub const LABELS: &str = "labels.json";
    pub const CAMERAS: &str = "cameras.json";
    pub const VISIBILITY: &str = "visibility.txt";
    pub const DETECTIONS: &str = "detections.json";
    pub const GT_INSTANCES: &str = "gt_instances.txt";
    pub const TRUTH: &str = "truth.json";
    pub const SPEC: &str = "spec.toml";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Axis-aligned box surface with full edge lengths `size`.
    Box { size: Vec3 },
    Sphere { radius: f64 },
    /// Closed cylinder along z.
    Cylinder { radius: f64, height: f64 },
}

impl Primitive {
    fn scaled(&self, f: f64) -> Self {
        match *self {
            Primitive::Box { size } => Primitive::Box {
                size: [size[0] * f, size[1] * f, size[2] * f],
            },
            Primitive::Sphere { radius } => Primitive::Sphere { radius: radius * f },
            Primitive::Cylinder { radius, height } => Primitive::Cylinder {
                radius: radius * f,
                height: height * f,
            },
        }
    }

    fn valid(&self) -> bool {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Primitive::Box { size } => size.iter().all(|&s| pos(s)),
            Primitive::Sphere { radius } => pos(radius),
            Primitive::Cylinder { radius, height } => pos(radius) && pos(height),
        }
    }

    /// A uniformly distributed point on the surface, relative to the center.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match *self {
            Primitive::Box { size: [a, b, c] } => {
                let areas = [b * c, b * c, a * c, a * c, a * b, a * b];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.random_range(0.0..total);
                let mut face = 5;
                for (i, &area) in areas.iter().enumerate() {
                    if pick < area {
                        face = i;
                        break;
                    }
                    pick -= area;
                }
                let mut u = || rng.random_range(-0.5..0.5);
                let (x, y, z) = (u() * a, u() * b, u() * c);
                let sign = if face % 2 == 0 { 0.5 } else { -0.5 };
                match face / 2 {
                    0 => [sign * a, y, z],
                    1 => [x, sign * b, z],
                    _ => [x, y, sign * c],
                }
            }
            Primitive::Sphere { radius } => {
                let v: Vec3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let n = dot(v, v).sqrt().max(1e-12);
                [v[0] * radius / n, v[1] * radius / n, v[2] * radius / n]
            }
            Primitive::Cylinder { radius, height } => {
                let side = 2.0 * PI * radius * height;
                let cap = PI * radius * radius;
                let pick = rng.random_range(0.0..side + 2.0 * cap);
                let theta = rng.random_range(0.0..2.0 * PI);
                if pick < side {
                    let z = rng.random_range(-0.5..0.5) * height;
                    [radius * theta.cos(), radius * theta.sin(), z]
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let z = if pick < side + cap { 0.5 * height } else { -0.5 * height };
                    [r * theta.cos(), r * theta.sin(), z]
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub label: String,
    pub shape: Primitive,
    pub center: Vec3,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Probability that a truthful detection is missing.
    pub drop_rate: f64,
    /// Probability of an extra wrong-label detection per visible part and view.
    pub spurious_rate: f64,
    /// Each box edge moves by a uniform offset in `[-jitter, jitter]` pixels.
    pub box_jitter_px: f64,
    /// Every box edge moves outward by this many pixels.
    pub box_loosen_px: f64,
    pub feature_dim: usize,
    /// Inverse standard deviation of the noise on feature component 0.
    pub feature_snr: f64,
    /// Added to the confidence of spurious detections (capped at 1).
    pub spurious_confidence_shift: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            drop_rate: 0.0,
            spurious_rate: 0.0,
            box_jitter_px: 0.0,
            box_loosen_px: 0.0,
            feature_dim: 8,
            feature_snr: 4.0,
            spurious_confidence_shift: 0.0,
        }
    }
}

impl NoiseSpec {
    /// Missed and wrong-label detections, jittered boxes, and spurious
    /// detections that report higher confidence than truthful ones.
    pub fn adversarial() -> Self {
        Self {
            drop_rate: 0.2,
            spurious_rate: 0.3,
            box_jitter_px: 4.0,
            spurious_confidence_shift: 0.3,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub category: String,
    pub views: usize,
    pub distance: f64,
    pub resolution: u32,
    /// Target points per super point.
    pub super_point_size: usize,
    /// Grow super points across part boundaries.
    pub boundary_violating: bool,
    /// Relative per-part size variation.
    pub size_jitter: f64,
    /// Rotate the object about z by a seeded angle.
    pub random_yaw: bool,
    pub masks: bool,
    /// Overrides for the splat radius and depth tolerance; derived from the
    /// point spacing when absent.
    pub splat_radius: Option<f64>,
    pub depth_epsilon: Option<f64>,
    pub noise: NoiseSpec,
    pub parts: Vec<PartSpec>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            category: "object".into(),
            views: DEFAULT_VIEWS,
            distance: DEFAULT_DISTANCE,
            resolution: DEFAULT_RESOLUTION,
            super_point_size: 30,
            boundary_violating: false,
            size_jitter: 0.15,
            random_yaw: true,
            masks: true,
            splat_radius: None,
            depth_epsilon: None,
            noise: NoiseSpec::default(),
            parts: Vec::new(),
        }
    }
}

fn part(label: &str, shape: Primitive, center: Vec3, points: usize) -> PartSpec {
    PartSpec {
        label: label.into(),
        shape,
        center,
        points,
    }
}

fn legs(label: &str, xs: f64, ys: f64, z: f64, radius: f64, height: f64, points: usize) -> Vec<PartSpec> {
    [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]
        .iter()
        .map(|&(sx, sy)| part(label, Primitive::Cylinder { radius, height }, [sx * xs, sy * ys, z], points))
        .collect()
}

pub const PRESETS: [&str; 3] = ["chair", "table", "lamp"];

impl SynthSpec {
    /// A named template: `chair`, `table` or `lamp`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let parts = match name {
            "chair" => {
                let mut p = vec![
                    part("seat", Primitive::Box { size: [0.8, 0.8, 0.1] }, [0.0, 0.0, 0.0], 900),
                    part("back", Primitive::Box { size: [0.8, 0.1, 0.8] }, [0.0, -0.35, 0.45], 800),
                ];
                p.extend(legs("leg", 0.33, 0.33, -0.4, 0.05, 0.7, 200));
                p
            }
            "table" => {
                let mut p = vec![part("top", Primitive::Box { size: [1.4, 0.8, 0.06] }, [0.0, 0.0, 0.4], 1200)];
                p.extend(legs("leg", 0.6, 0.3, -0.03, 0.05, 0.8, 200));
                p.push(part("shelf", Primitive::Box { size: [1.1, 0.5, 0.04] }, [0.0, 0.0, -0.15], 600));
                p
            }
            "lamp" => vec![
                part("base", Primitive::Cylinder { radius: 0.35, height: 0.08 }, [0.0, 0.0, -0.6], 700),
                part("pole", Primitive::Cylinder { radius: 0.04, height: 1.0 }, [0.0, 0.0, -0.06], 500),
                part("shade", Primitive::Sphere { radius: 0.3 }, [0.0, 0.0, 0.7], 1000),
            ],
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            seed,
            category: name.into(),
            parts,
            ..Self::default()
        })
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let n = &self.noise;
        for (name, rate) in [("drop_rate", n.drop_rate), ("spurious_rate", n.spurious_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        if n.feature_dim < 2 {
            return bad(format!("feature_dim must be at least 2, got {}", n.feature_dim));
        }
        if !(n.feature_snr > 0.0) {
            return bad("feature_snr must be positive".into());
        }
        if !(n.box_jitter_px >= 0.0 && n.box_loosen_px >= 0.0) {
            return bad("box jitter and loosening must be nonnegative".into());
        }
        if self.parts.is_empty() || self.parts.iter().all(|p| p.points == 0) {
            return bad("spec has no points".into());
        }
        if let Some(p) = self.parts.iter().find(|p| !p.shape.valid() || !p.center.iter().all(|c| c.is_finite())) {
            return bad(format!("part `{}` has an invalid shape", p.label));
        }
        if self.super_point_size == 0 || self.views == 0 || self.resolution == 0 {
            return bad("super_point_size, views and resolution must be positive".into());
        }
        if !(0.0..1.0).contains(&self.size_jitter) {
            return bad("size_jitter must lie in [0, 1)".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Distinct part labels in order of first appearance.
    pub fn label_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for p in &self.parts {
            if !names.contains(&p.label) {
                names.push(p.label.clone());
            }
        }
        names
    }
}

/// Oracle-side facts about a bundle, stored next to its files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Per detection: does its label match the part it was drawn from.
    pub truthful: Vec<bool>,
    /// Per detection: index of the part it was drawn from.
    pub source_part: Vec<usize>,
    /// Part index of every point.
    pub part_of_point: Vec<usize>,
    pub splat_radius: f64,
    pub depth_epsilon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthBundle {
    pub spec: SynthSpec,
    pub scene: Scene,
    pub cameras: Vec<Camera>,
    pub visibility: VisibilityMap,
    pub detections: DetectionSet,
    pub truth: Truth,
    pub gt_instances: InstanceSet,
}

impl SynthBundle {
    pub fn visibility_params(&self) -> VisibilityParams {
        VisibilityParams {
            splat_radius: self.truth.splat_radius,
            depth_epsilon: self.truth.depth_epsilon,
        }
    }

    pub fn to_train_object(&self, mode: MembershipMode) -> Result<TrainObject> {
        TrainObject::new(self.scene.clone(), self.detections.clone(), self.cameras.clone(), self.visibility.clone(), mode)
    }
}

fn rotate_z(p: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

/// Nearest-seed clustering of `members` into groups of about `size` points.
fn voronoi(points: &[Vec3], members: &[usize], size: usize, rng: &mut ChaCha8Rng, next_id: &mut usize, out: &mut [usize]) {
    if members.is_empty() {
        return;
    }
    let k = members.len().div_ceil(size).clamp(1, members.len());
    let seeds: Vec<usize> = sample(rng, members.len(), k).into_iter().map(|i| members[i]).collect();
    for &p in members {
        let mut best = (f64::INFINITY, 0);
        for (s, &q) in seeds.iter().enumerate() {
            let d = sub(points[p], points[q]);
            let d2 = dot(d, d);
            if d2 < best.0 {
                best = (d2, s);
            }
        }
        out[p] = *next_id + best.1;
    }
    *next_id += k;
}

fn tight_box(pixels: &[[f64; 2]], width: u32, height: u32) -> [f64; 4] {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pixels {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    [
        x0.floor(),
        y0.floor(),
        (x1.floor() + 1.0).min(f64::from(width)),
        (y1.floor() + 1.0).min(f64::from(height)),
    ]
}

fn perturb(bbox: [f64; 4], noise: &NoiseSpec, width: u32, height: u32, rng: &mut ChaCha8Rng) -> [f64; 4] {
    let a = noise.box_loosen_px;
    let mut b = [bbox[0] - a, bbox[1] - a, bbox[2] + a, bbox[3] + a];
    if noise.box_jitter_px > 0.0 {
        for edge in &mut b {
            *edge += rng.random_range(-noise.box_jitter_px..=noise.box_jitter_px);
        }
    }
    let (w, h) = (f64::from(width), f64::from(height));
    b[0] = b[0].clamp(0.0, w - 1.0);
    b[1] = b[1].clamp(0.0, h - 1.0);
    b[2] = b[2].clamp(b[0] + 1.0, w);
    b[3] = b[3].clamp(b[1] + 1.0, h);
    b
}

fn feature(truthful: bool, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let sigma = 1.0 / noise.feature_snr;
    let signal = if truthful { 1.0 } else { -1.0 };
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    // Truncated at four standard deviations.
    let first = signal + normal.sample(rng).clamp(-4.0 * sigma, 4.0 * sigma);
    let mut f = vec![first as f32];
    f.extend((1..noise.feature_dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32));
    f
}

/// Builds one object, its visibility and its oracle detections.
pub fn generate(spec: &SynthSpec) -> Result<SynthBundle> {
    spec.validate()?;
    let mut geo_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut det_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let names = spec.label_names();

    let yaw = if spec.random_yaw { geo_rng.random_range(0.0..2.0 * PI) } else { 0.0 };
    let mut raw = Vec::new();
    let mut part_of_point = Vec::new();
    for (m, p) in spec.parts.iter().enumerate() {
        let factor = 1.0 + spec.size_jitter * geo_rng.random_range(-1.0..=1.0);
        let shape = p.shape.scaled(factor);
        for _ in 0..p.points {
            let s = shape.sample(&mut geo_rng);
            raw.push(rotate_z([s[0] + p.center[0], s[1] + p.center[1], s[2] + p.center[2]], yaw));
            part_of_point.push(m);
        }
    }
    let (cloud, _) = normalize_cloud(&raw)?;
    let points = cloud.points();
    let part_labels: Vec<usize> = spec
        .parts
        .iter()
        .map(|p| names.iter().position(|n| *n == p.label).expect("label listed"))
        .collect();
    let gt: Vec<Option<usize>> = part_of_point.iter().map(|&m| Some(part_labels[m])).collect();

    let mut ids = vec![0usize; points.len()];
    let mut next = 0;
    if spec.boundary_violating {
        let all: Vec<usize> = (0..points.len()).collect();
        voronoi(points, &all, spec.super_point_size, &mut geo_rng, &mut next, &mut ids);
    } else {
        for m in 0..spec.parts.len() {
            let members: Vec<usize> = (0..points.len()).filter(|&p| part_of_point[p] == m).collect();
            voronoi(points, &members, spec.super_point_size, &mut geo_rng, &mut next, &mut ids);
        }
    }
    let partition = SuperPointPartition::compact(&ids)?;
    let scene = Scene::new(cloud.clone(), partition, gt, names.clone())?.with_category(spec.category.clone());

    let cameras = fixed_viewpoints_with(spec.views, spec.distance, spec.resolution, spec.resolution)?;
    let spacing = mean_nearest_neighbor_distance(points);
    let params = VisibilityParams {
        splat_radius: spec.splat_radius.unwrap_or_else(|| (1.5 * cameras[0].focal() * spacing / spec.distance).max(1.0)),
        depth_epsilon: spec.depth_epsilon.unwrap_or((2.0 * spacing).max(1e-6)),
    };
    let visibility = compute_visibility(&cloud, &cameras, params)?;

    let noise = &spec.noise;
    let (width, height) = (spec.resolution, spec.resolution);
    let mut detections = Vec::new();
    let mut truthful = Vec::new();
    let mut source_part = Vec::new();
    for (k, cam) in cameras.iter().enumerate() {
        let projections = project_all(&cloud, cam);
        let depth = spec.masks.then(|| render_depth(&projections, cam, params.splat_radius));
        for m in 0..spec.parts.len() {
            let visible: Vec<usize> = (0..points.len()).filter(|&p| part_of_point[p] == m && visibility.get(k, p)).collect();
            let pixels: Vec<[f64; 2]> = visible.iter().map(|&p| projections[p].pixel).collect();
            if pixels.is_empty() {
                continue;
            }
            let tight = tight_box(&pixels, width, height);
            let mut emit = |label: usize, is_true: bool, rng: &mut ChaCha8Rng| {
                let bbox = perturb(tight, noise, width, height, rng);
                let mut det = Detection {
                    view: k,
                    label,
                    bbox,
                    mask: None,
                    feature: feature(is_true, noise, rng),
                    confidence: 0.0,
                };
                let base: f64 = rng.random_range(0.4..0.9);
                det.confidence = if is_true { base } else { (base + noise.spurious_confidence_shift).min(1.0) };
                if let Some(buf) = &depth {
                    let (ox, oy, w, h) = det.crop();
                    let mut mask = Mask::empty(w, h);
                    for y in 0..i64::from(h) {
                        for x in 0..i64::from(w) {
                            if buf.owner(ox + x, oy + y).is_some_and(|p| part_of_point[p] == m) {
                                mask.set(x, y, true);
                            }
                        }
                    }
                    // Visible points of the part sharing a pixel with a nearer part stay inside.
                    for &p in &visible {
                        let (u, v) = projections[p].pixel_index();
                        mask.set(u - ox, v - oy, true);
                    }
                    det.mask = Some(mask);
                }
                detections.push(det);
                truthful.push(is_true);
                source_part.push(m);
            };
            if !det_rng.random_bool(noise.drop_rate) {
                emit(part_labels[m], true, &mut det_rng);
            }
            if names.len() >= 2 && det_rng.random_bool(noise.spurious_rate) {
                let mut wrong = det_rng.random_range(0..names.len() - 1);
                if wrong >= part_labels[m] {
                    wrong += 1;
                }
                emit(wrong, false, &mut det_rng);
            }
        }
    }
    let detections = DetectionSet::new(spec.views, names, noise.feature_dim, width, height, detections)?;
    Ok(SynthBundle {
        spec: spec.clone(),
        scene,
        cameras,
        visibility,
        detections,
        gt_instances: InstanceSet::from_parts(&part_of_point, &part_labels),
        truth: Truth {
            truthful,
            source_part,
            part_of_point,
            splat_radius: params.splat_radius,
            depth_epsilon: params.depth_epsilon,
        },
    })
}

/// Writes every file of an object directory, creating it if needed.
pub fn emit(bundle: &SynthBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_scene(&bundle.scene, &dir.join(files::CLOUD), &dir.join(files::LABELS))?;
    save_cameras(&bundle.cameras, &dir.join(files::CAMERAS))?;
    save_visibility(&bundle.visibility, &dir.join(files::VISIBILITY))?;
    save_detections(&bundle.detections, &dir.join(files::DETECTIONS))?;
    save_instances(&bundle.gt_instances, &dir.join(files::GT_INSTANCES))?;
    let truth = dir.join(files::TRUTH);
    fs::write(&truth, serde_json::to_string(&bundle.truth).expect("truth serializes") + "\n").map_err(|e| Error::io(&truth, e))?;
    let spec = dir.join(files::SPEC);
    fs::write(&spec, bundle.spec.to_toml()).map_err(|e| Error::io(&spec, e))
}

pub fn load_bundle(dir: &Path) -> Result<SynthBundle> {
    let spec_path = dir.join(files::SPEC);
    let spec_text = fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
    let truth_path = dir.join(files::TRUTH);
    let truth_text = fs::read_to_string(&truth_path).map_err(|e| Error::io(&truth_path, e))?;
    Ok(SynthBundle {
        spec: SynthSpec::from_toml(&spec_text)?,
        scene: load_scene(&dir.join(files::CLOUD), &dir.join(files::LABELS))?,
        cameras: load_cameras(&dir.join(files::CAMERAS))?,
        visibility: load_visibility(&dir.join(files::VISIBILITY))?,
        detections: load_detections(&dir.join(files::DETECTIONS))?,
        gt_instances: load_instances(&dir.join(files::GT_INSTANCES))?,
        truth: serde_json::from_str(&truth_text).map_err(|source| Error::Json { path: truth_path, source })?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str, seed: u64) -> SynthSpec {
        let mut spec = SynthSpec::preset(name, seed).unwrap();
        spec.views = 4;
        spec.resolution = 200;
        for p in &mut spec.parts {
            p.points = p.points.div_ceil(4);
        }
        spec
    }

    #[test]
    fn presets_have_three_labels() {
        for name in PRESETS {
            assert!(SynthSpec::preset(name, 0).unwrap().label_names().len() >= 3);
        }
        assert!(SynthSpec::preset("sofa", 0).is_err());
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate(&small("chair", 3)).unwrap();
        assert_eq!(a, generate(&small("chair", 3)).unwrap());
        let b = generate(&small("chair", 4)).unwrap();
        assert_ne!(crate::detect::to_json(&a.detections), crate::detect::to_json(&b.detections));
    }

    #[test]
    fn zero_noise_boxes_cover_visible_parts() {
        let bundle = generate(&small("table", 1)).unwrap();
        assert!(bundle.truth.truthful.iter().all(|&t| t));
        for (k, cam) in bundle.cameras.iter().enumerate() {
            let proj = project_all(&bundle.scene.cloud, cam);
            for p in 0..bundle.scene.cloud.len() {
                if !bundle.visibility.get(k, p) {
                    continue;
                }
                let label = bundle.scene.gt[p].unwrap();
                let inside = bundle
                    .detections
                    .detections
                    .iter()
                    .any(|d| d.view == k && d.label == label && d.box_contains(proj[p].pixel));
                assert!(inside, "view {k} point {p}");
            }
        }
    }

    #[test]
    fn super_points_respect_parts_unless_asked() {
        let bundle = generate(&small("chair", 2)).unwrap();
        let part = &bundle.truth.part_of_point;
        for members in bundle.scene.partition.all_members() {
            assert!(members.iter().all(|&p| part[p] == part[members[0]]));
        }
        let mut spec = small("chair", 2);
        spec.boundary_violating = true;
        let mixed = generate(&spec).unwrap();
        let part = &mixed.truth.part_of_point;
        assert!(mixed
            .scene
            .partition
            .all_members()
            .iter()
            .any(|m| m.iter().any(|&p| part[p] != part[m[0]])));
    }

    #[test]
    fn full_drop_rate_empties_detections() {
        let spec = small("lamp", 0).with_noise(NoiseSpec {
            drop_rate: 1.0,
            ..NoiseSpec::default()
        });
        assert!(generate(&spec).unwrap().detections.is_empty());
    }

    #[test]
    fn spurious_features_separate_at_threshold_zero() {
        let spec = small("chair", 5).with_noise(NoiseSpec {
            spurious_rate: 0.5,
            feature_snr: 4.0,
            ..NoiseSpec::default()
        });
        let bundle = generate(&spec).unwrap();
        assert!(bundle.truth.truthful.iter().any(|&t| !t));
        for (d, &t) in bundle.detections.detections.iter().zip(&bundle.truth.truthful) {
            assert_eq!(d.feature[0] > 0.0, t);
        }
    }

    #[test]
    fn loosened_boxes_contain_tight_ones() {
        let tight = generate(&small("lamp", 6)).unwrap();
        let mut spec = small("lamp", 6);
        spec.noise.box_loosen_px = 10.0;
        let loose = generate(&spec).unwrap();
        for (a, b) in tight.detections.detections.iter().zip(&loose.detections.detections) {
            assert!(b.bbox[0] <= a.bbox[0] && b.bbox[1] <= a.bbox[1] && b.bbox[2] >= a.bbox[2] && b.bbox[3] >= a.bbox[3]);
            assert!(a.mask.as_ref().unwrap().count() <= b.mask.as_ref().unwrap().count());
        }
    }

    #[test]
    fn emit_and_load_round_trip() {
        let bundle = generate(&small("chair", 8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit(&bundle, dir.path()).unwrap();
        assert_eq!(load_bundle(dir.path()).unwrap(), bundle);
        let again = tempfile::tempdir().unwrap();
        emit(&bundle, again.path()).unwrap();
        for name in [files::CLOUD, files::DETECTIONS, files::VISIBILITY, files::TRUTH] {
            assert_eq!(fs::read(dir.path().join(name)).unwrap(), fs::read(again.path().join(name)).unwrap());
        }
        // A regular file cannot hold a directory.
        let blocker = dir.path().join(files::CLOUD).join("sub");
        assert!(matches!(emit(&bundle, &blocker), Err(Error::Io { .. })));
    }

    #[test]
    fn infeasible_specs_rejected() {
        let mut spec = small("chair", 0);
        for p in &mut spec.parts {
            p.points = 0;
        }
        assert!(generate(&spec).is_err());
        let mut spec = small("chair", 0);
        spec.noise.drop_rate = 1.5;
        assert!(generate(&spec).is_err());
        let text = small("lamp", 2).to_toml();
        assert_eq!(SynthSpec::from_toml(&text).unwrap(), small("lamp", 2));
    }
}
