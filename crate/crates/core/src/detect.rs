//! Per-view 2D detections, their JSON file format, and point membership.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{project_all, Camera, PointCloud, Projection};

/// Binary foreground mask over the pixels covered by a detection's box.
///
/// The crop starts at `(floor(x0), floor(y0))` and spans
/// `ceil(x1) - floor(x0)` by `ceil(y1) - floor(y0)` pixels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

/// Row-major run-length encoding; runs alternate starting with unset pixels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRle {
    pub w: u32,
    pub h: u32,
    pub runs: Vec<u32>,
}

impl Mask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "mask {width}x{height} with {} pixels",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Crop-local lookup; out-of-range coordinates are unset.
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            return false;
        }
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: i64, y: i64, value: bool) {
        if x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height) {
            self.bits[y as usize * self.width as usize + x as usize] = value;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_rle(&self) -> MaskRle {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &bit in &self.bits {
            if bit != current {
                runs.push(len);
                current = bit;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        MaskRle {
            w: self.width,
            h: self.height,
            runs,
        }
    }

    pub fn from_rle(rle: &MaskRle) -> Result<Self> {
        let total = rle.w as usize * rle.h as usize;
        let mut bits = Vec::with_capacity(total);
        let mut value = false;
        for &run in &rle.runs {
            if bits.len() + run as usize > total {
                return Err(Error::InvalidArgument(format!(
                    "mask runs exceed {}x{} pixels",
                    rle.w, rle.h
                )));
            }
            bits.extend(std::iter::repeat_n(value, run as usize));
            value = !value;
        }
        if bits.len() != total {
            return Err(Error::InvalidArgument(format!(
                "mask runs cover {} of {total} pixels",
                bits.len()
            )));
        }
        Ok(Self {
            width: rle.w,
            height: rle.h,
            bits,
        })
    }
}

/// A labeled 2D detection in one view.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub view: usize,
    pub label: usize,
    /// `[x0, y0, x1, y1]` in pixels; containment is half-open.
    pub bbox: [f64; 4],
    pub mask: Option<Mask>,
    pub feature: Vec<f32>,
    pub confidence: f64,
}

impl Detection {
    /// Pixel origin and size of the mask crop for this box.
    pub fn crop(&self) -> (i64, i64, u32, u32) {
        let [x0, y0, x1, y1] = self.bbox;
        let (ox, oy) = (x0.floor() as i64, y0.floor() as i64);
        let w = (x1.ceil() as i64 - ox).max(0) as u32;
        let h = (y1.ceil() as i64 - oy).max(0) as u32;
        (ox, oy, w, h)
    }

    pub fn box_contains(&self, pixel: [f64; 2]) -> bool {
        let [x0, y0, x1, y1] = self.bbox;
        pixel[0] >= x0 && pixel[0] < x1 && pixel[1] >= y0 && pixel[1] < y1
    }

    /// Box containment and, when a mask is present, the mask bit of the pixel holding the point.
    pub fn mask_contains(&self, projection: &Projection) -> bool {
        if !projection.in_front || !self.box_contains(projection.pixel) {
            return false;
        }
        let Some(mask) = &self.mask else {
            return true;
        };
        let (ox, oy, _, _) = self.crop();
        let (u, v) = projection.pixel_index();
        mask.get(u - ox, v - oy)
    }

    /// Box center divided by the image size.
    pub fn center_normalized(&self, width: u32, height: u32) -> [f64; 2] {
        let [x0, y0, x1, y1] = self.bbox;
        [
            0.5 * (x0 + x1) / f64::from(width),
            0.5 * (y0 + y1) / f64::from(height),
        ]
    }
}

/// All detections of one object, across views.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionSet {
    pub num_views: usize,
    pub labels: Vec<String>,
    pub feature_dim: usize,
    pub width: u32,
    pub height: u32,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(
        num_views: usize,
        labels: Vec<String>,
        feature_dim: usize,
        width: u32,
        height: u32,
        detections: Vec<Detection>,
    ) -> Result<Self> {
        let set = Self {
            num_views,
            labels,
            feature_dim,
            width,
            height,
            detections,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn empty(num_views: usize, labels: Vec<String>, feature_dim: usize) -> Self {
        Self {
            num_views,
            labels,
            feature_dim,
            width: crate::geom::DEFAULT_RESOLUTION,
            height: crate::geom::DEFAULT_RESOLUTION,
            detections: Vec::new(),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn has_masks(&self) -> bool {
        self.detections.iter().all(|d| d.mask.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        for (index, d) in self.detections.iter().enumerate() {
            let fail = |reason: String| Err(Error::InvalidDetection { index, reason });
            if d.view >= self.num_views {
                return fail(format!("view {} >= K={}", d.view, self.num_views));
            }
            if d.label >= self.labels.len() {
                return fail(format!("label {} >= L={}", d.label, self.labels.len()));
            }
            let [x0, y0, x1, y1] = d.bbox;
            if d.bbox.iter().any(|c| !c.is_finite()) {
                return fail("box has a non-finite coordinate".into());
            }
            if !(x0 < x1 && y0 < y1) {
                return fail(format!("box [{x0}, {y0}, {x1}, {y1}] is empty or inverted"));
            }
            if x0 < 0.0 || y0 < 0.0 || x1 > f64::from(self.width) || y1 > f64::from(self.height) {
                return fail(format!(
                    "box [{x0}, {y0}, {x1}, {y1}] leaves the {}x{} image",
                    self.width, self.height
                ));
            }
            if d.feature.len() != self.feature_dim {
                return fail(format!(
                    "feature has dimension {}, expected D={}",
                    d.feature.len(),
                    self.feature_dim
                ));
            }
            if d.feature.iter().any(|f| !f.is_finite()) {
                return fail("feature has a non-finite entry".into());
            }
            if !(0.0..=1.0).contains(&d.confidence) {
                return fail(format!("confidence {} outside [0, 1]", d.confidence));
            }
            if let Some(mask) = &d.mask {
                let (_, _, w, h) = d.crop();
                if (mask.width, mask.height) != (w, h) {
                    return fail(format!(
                        "mask is {}x{} but the box covers {w}x{h} pixels",
                        mask.width, mask.height
                    ));
                }
            }
        }
        Ok(())
    }

    /// Drops masks, keeping boxes.
    pub fn without_masks(&self) -> Self {
        let mut out = self.clone();
        for d in &mut out.detections {
            d.mask = None;
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct DetectionFile {
    version: u32,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(default = "default_resolution")]
    width: u32,
    #[serde(default = "default_resolution")]
    height: u32,
    labels: Vec<String>,
    detections: Vec<DetectionRecord>,
}

fn default_resolution() -> u32 {
    crate::geom::DEFAULT_RESOLUTION
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    k: usize,
    j: usize,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    conf: f64,
    feature: Vec<f32>,
    mask_rle: Option<MaskRle>,
}

pub fn to_json(set: &DetectionSet) -> String {
    let file = DetectionFile {
        version: 1,
        k: set.num_views,
        l: set.labels.len(),
        d: set.feature_dim,
        width: set.width,
        height: set.height,
        labels: set.labels.clone(),
        detections: set
            .detections
            .iter()
            .map(|d| DetectionRecord {
                k: d.view,
                j: d.label,
                bbox: d.bbox,
                conf: d.confidence,
                feature: d.feature.clone(),
                mask_rle: d.mask.as_ref().map(Mask::to_rle),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("detections serialize")
}

pub fn from_json(text: &str, path: &Path) -> Result<DetectionSet> {
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let file: DetectionFile = serde_json::from_str(text).map_err(json_err)?;
    if file.version != 1 {
        return Err(Error::parse(path, 1, format!("unsupported version {}", file.version)));
    }
    if file.labels.len() != file.l {
        return Err(Error::parse(
            path,
            1,
            format!("L={} but {} label names", file.l, file.labels.len()),
        ));
    }
    let detections = file
        .detections
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            let mask = r
                .mask_rle
                .as_ref()
                .map(Mask::from_rle)
                .transpose()
                .map_err(|e| Error::InvalidDetection {
                    index,
                    reason: e.to_string(),
                })?;
            Ok(Detection {
                view: r.k,
                label: r.j,
                bbox: r.bbox,
                mask,
                feature: r.feature,
                confidence: r.conf,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DetectionSet::new(file.k, file.labels, file.d, file.width, file.height, detections)
}

pub fn save_detections(set: &DetectionSet, path: &Path) -> Result<()> {
    fs::write(path, to_json(set) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_detections(path: &Path) -> Result<DetectionSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text, path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MembershipMode {
    #[default]
    Box,
    Mask,
}

/// Sparse point-to-detection membership: the sorted point indices inside each detection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipTensor {
    num_points: usize,
    members: Vec<Vec<usize>>,
}

impl MembershipTensor {
    pub fn from_members(num_points: usize, mut members: Vec<Vec<usize>>) -> Result<Self> {
        for m in &mut members {
            m.sort_unstable();
            m.dedup();
            if m.last().is_some_and(|&p| p >= num_points) {
                return Err(Error::DimensionMismatch(format!(
                    "membership references point beyond N={num_points}"
                )));
            }
        }
        Ok(Self {
            num_points,
            members,
        })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_detections(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self, detection: usize) -> &[usize] {
        &self.members[detection]
    }

    pub fn contains(&self, detection: usize, point: usize) -> bool {
        self.members[detection].binary_search(&point).is_ok()
    }
}

/// Projects every point into each detection's view and tests containment.
pub fn compute_membership(
    cloud: &PointCloud,
    cameras: &[Camera],
    detections: &DetectionSet,
    mode: MembershipMode,
) -> Result<MembershipTensor> {
    if detections.num_views != cameras.len() {
        return Err(Error::DimensionMismatch(format!(
            "detections declare K={} views, {} cameras given",
            detections.num_views,
            cameras.len()
        )));
    }
    if let Some((index, d)) = detections
        .detections
        .iter()
        .enumerate()
        .find(|(_, d)| d.view >= cameras.len())
    {
        return Err(Error::InvalidDetection {
            index,
            reason: format!("view {} has no camera", d.view),
        });
    }
    if mode == MembershipMode::Mask {
        if let Some(index) = detections.detections.iter().position(|d| d.mask.is_none()) {
            return Err(Error::MissingMask { index });
        }
    }
    let projections: Vec<Vec<Projection>> = cameras
        .par_iter()
        .map(|cam| project_all(cloud, cam))
        .collect();
    let members = detections
        .detections
        .par_iter()
        .map(|d| {
            let view = &projections[d.view];
            view.iter()
                .enumerate()
                .filter(|(_, proj)| match mode {
                    MembershipMode::Box => proj.in_front && d.box_contains(proj.pixel),
                    MembershipMode::Mask => d.mask_contains(proj),
                })
                .map(|(p, _)| p)
                .collect()
        })
        .collect();
    Ok(MembershipTensor {
        num_points: cloud.len(),
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::fixed_viewpoints;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels() -> Vec<String> {
        vec!["arm".into(), "back".into(), "seat".into()]
    }

    fn detection(view: usize, bbox: [f64; 4]) -> Detection {
        Detection {
            view,
            label: 0,
            bbox,
            mask: None,
            feature: vec![0.5, -1.25],
            confidence: 0.75,
        }
    }

    #[test]
    fn rle_round_trip_and_leading_zero_run() {
        let mask = Mask::new(3, 2, vec![true, true, false, false, true, true]).unwrap();
        let rle = mask.to_rle();
        assert_eq!(rle.runs, vec![0, 2, 2, 2]);
        assert_eq!(Mask::from_rle(&rle).unwrap(), mask);
        let bad = MaskRle {
            w: 2,
            h: 2,
            runs: vec![1, 1],
        };
        assert!(Mask::from_rle(&bad).is_err());
    }

    proptest! {
        #[test]
        fn rle_is_lossless(w in 1u32..12, h in 1u32..12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bits = (0..w * h).map(|_| rng.random_bool(0.4)).collect();
            let mask = Mask::new(w, h, bits).unwrap();
            let rle = mask.to_rle();
            prop_assert_eq!(rle.runs.iter().map(|&r| r as usize).sum::<usize>(), (w * h) as usize);
            prop_assert_eq!(Mask::from_rle(&rle).unwrap(), mask);
        }
    }

    #[test]
    fn empty_set_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.json");
        let set = DetectionSet::new(10, labels(), 8, 800, 800, Vec::new()).unwrap();
        save_detections(&set, &path).unwrap();
        assert_eq!(load_detections(&path).unwrap(), set);
    }

    #[test]
    fn masked_detection_round_trips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.json");
        let mut d = detection(1, [10.5, 20.0, 14.0, 23.25]);
        d.feature = vec![0.1, std::f32::consts::PI];
        d.confidence = 0.123456789012;
        let (_, _, w, h) = d.crop();
        assert_eq!((w, h), (4, 4));
        let mut mask = Mask::empty(w, h);
        mask.set(1, 2, true);
        mask.set(3, 3, true);
        d.mask = Some(mask);
        let set = DetectionSet::new(2, labels(), 2, 800, 800, vec![d]).unwrap();
        save_detections(&set, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains(r#""mask_rle":{"w":4,"h":4,"runs":[9,1,5,1]}"#));
        let loaded = load_detections(&path).unwrap();
        assert_eq!(loaded, set);
        save_detections(&loaded, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn inverted_box_is_rejected() {
        let text = r#"{"version":1,"K":1,"L":1,"D":1,"labels":["a"],
            "detections":[{"k":0,"j":0,"box":[30,0,10,5],"conf":0.5,"feature":[0.0],"mask_rle":null}]}"#;
        match from_json(text, Path::new("hand.json")) {
            Err(Error::InvalidDetection { index: 0, reason }) => assert!(reason.contains("inverted")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_location() {
        let text = "{\"version\":1,\"K\":1,\n\"L\":\"x\"}";
        let err = from_json(text, Path::new("bad.json")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn other_invariants_are_enforced() {
        let ok = detection(0, [0.0, 0.0, 5.0, 5.0]);
        let mut out_of_image = ok.clone();
        out_of_image.bbox = [0.0, 0.0, 900.0, 5.0];
        let mut bad_dim = ok.clone();
        bad_dim.feature.push(1.0);
        let mut bad_view = ok.clone();
        bad_view.view = 3;
        let mut bad_mask = ok.clone();
        bad_mask.mask = Some(Mask::empty(2, 2));
        for d in [out_of_image, bad_dim, bad_view, bad_mask] {
            assert!(DetectionSet::new(2, labels(), 2, 800, 800, vec![d]).is_err());
        }
        assert!(DetectionSet::new(2, labels(), 2, 800, 800, vec![ok]).is_ok());
    }

    fn camera_and_point() -> (Camera, PointCloud) {
        let cam = Camera::new([0.0, -1.0, 0.0], 2.2, 800, 800).unwrap();
        let cloud = PointCloud::new(vec![[0.0; 3]]).unwrap();
        (cam, cloud)
    }

    #[test]
    fn box_center_is_member() {
        let (cam, cloud) = camera_and_point();
        let set = DetectionSet::new(1, labels(), 2, 800, 800, vec![detection(0, [390.0, 390.0, 410.0, 410.0])]).unwrap();
        let m = compute_membership(&cloud, &[cam], &set, MembershipMode::Box).unwrap();
        assert!(m.contains(0, 0));
    }

    #[test]
    fn half_open_box_boundary() {
        let (cam, cloud) = camera_and_point();
        // The origin projects to (400, 400).
        let dets = vec![
            detection(0, [380.0, 390.0, 399.0, 410.0]),
            detection(0, [380.0, 390.0, 400.0, 410.0]),
            detection(0, [400.0, 390.0, 420.0, 410.0]),
        ];
        let set = DetectionSet::new(1, labels(), 2, 800, 800, dets).unwrap();
        let m = compute_membership(&cloud, &[cam], &set, MembershipMode::Box).unwrap();
        assert!(!m.contains(0, 0));
        assert!(!m.contains(1, 0));
        assert!(m.contains(2, 0));
    }

    #[test]
    fn mask_mode_requires_masks() {
        let (cam, cloud) = camera_and_point();
        let mut with_mask = detection(0, [0.0, 0.0, 2.0, 2.0]);
        with_mask.mask = Some(Mask::empty(2, 2));
        let set = DetectionSet::new(1, labels(), 2, 800, 800, vec![with_mask, detection(0, [0.0, 0.0, 5.0, 5.0])]).unwrap();
        assert!(matches!(
            compute_membership(&cloud, &[cam], &set, MembershipMode::Mask),
            Err(Error::MissingMask { index: 1 })
        ));
    }

    #[test]
    fn checkerboard_mask_refines_full_image_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points = (0..2000)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let cloud = PointCloud::new(points).unwrap();
        let cams = fixed_viewpoints(2).unwrap();
        let mut mask = Mask::empty(800, 800);
        for y in 0..800 {
            for x in 0..800 {
                mask.set(x, y, (x + y) % 2 == 0);
            }
        }
        let mut d = detection(1, [0.0, 0.0, 800.0, 800.0]);
        d.mask = Some(mask);
        let set = DetectionSet::new(2, labels(), 2, 800, 800, vec![d]).unwrap();
        let boxed = compute_membership(&cloud, &cams, &set, MembershipMode::Box).unwrap();
        let masked = compute_membership(&cloud, &cams, &set, MembershipMode::Mask).unwrap();
        // Per-pixel brute force.
        let expected: Vec<usize> = cloud
            .points()
            .iter()
            .enumerate()
            .filter(|(_, &p)| {
                let proj = cams[1].project(p);
                proj.inside(800, 800) && {
                    let (u, v) = (proj.pixel[0].floor() as i64, proj.pixel[1].floor() as i64);
                    (u + v) % 2 == 0
                }
            })
            .map(|(i, _)| i)
            .collect();
        assert_eq!(masked.members(0), expected.as_slice());
        assert!(masked.members(0).iter().all(|&p| boxed.contains(0, p)));
        assert!(masked.members(0).len() < boxed.members(0).len());
        let in_image = cloud.points().iter().filter(|&&p| cams[1].project(p).inside(800, 800)).count();
        assert_eq!(boxed.members(0).len(), in_image);
    }

    #[test]
    fn membership_ignores_detection_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points = (0..300)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let cloud = PointCloud::new(points).unwrap();
        let cams = fixed_viewpoints(3).unwrap();
        let dets: Vec<Detection> = (0..6)
            .map(|i| {
                let x0 = rng.random_range(0.0..600.0);
                let y0 = rng.random_range(0.0..600.0);
                detection(i % 3, [x0, y0, x0 + 150.0, y0 + 120.0])
            })
            .collect();
        let mut reversed = dets.clone();
        reversed.reverse();
        let a = compute_membership(&cloud, &cams, &DetectionSet::new(3, labels(), 2, 800, 800, dets).unwrap(), MembershipMode::Box).unwrap();
        let b = compute_membership(&cloud, &cams, &DetectionSet::new(3, labels(), 2, 800, 800, reversed).unwrap(), MembershipMode::Box).unwrap();
        for i in 0..6 {
            assert_eq!(a.members(i), b.members(5 - i));
        }
    }
}
