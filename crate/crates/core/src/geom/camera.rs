use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{add, cross, dot, normalized, scale, sub, Vec3};
use crate::error::{Error, Result};

pub const DEFAULT_VIEWS: usize = 10;
pub const DEFAULT_DISTANCE: f64 = 2.2;
pub const DEFAULT_RESOLUTION: u32 = 800;

/// Fraction of the image height covered by the unit sphere with the default field of view.
const FRAME_FILL: f64 = 0.9;
const POLE_TOLERANCE: f64 = 1e-6;
const MIN_DEPTH: f64 = 1e-9;

/// A pinhole camera placed at `direction * distance`, looking at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// Unit vector from the origin towards the camera center.
    pub direction: Vec3,
    pub distance: f64,
    pub width: u32,
    pub height: u32,
    /// Vertical field of view in radians.
    pub fov_y: f64,
}

/// Continuous pixel coordinates (x right, y down, origin at the top-left
/// corner) and camera-space depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub pixel: [f64; 2],
    pub depth: f64,
    pub in_front: bool,
}

impl Projection {
    pub fn inside(&self, width: u32, height: u32) -> bool {
        self.in_front
            && self.pixel[0] >= 0.0
            && self.pixel[1] >= 0.0
            && self.pixel[0] < f64::from(width)
            && self.pixel[1] < f64::from(height)
    }

    /// Index of the pixel containing the projection. Pixel `u` covers `[u, u + 1)`.
    pub fn pixel_index(&self) -> (i64, i64) {
        (self.pixel[0].floor() as i64, self.pixel[1].floor() as i64)
    }
}

impl Camera {
    pub fn new(direction: Vec3, distance: f64, width: u32, height: u32) -> Result<Self> {
        let n = dot(direction, direction).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument("camera direction must be nonzero".into()));
        }
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::InvalidArgument(format!("camera distance {distance}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image size must be positive".into()));
        }
        Ok(Self {
            direction: scale(direction, 1.0 / n),
            distance,
            width,
            height,
            fov_y: Self::framing_fov(distance),
        })
    }

    /// Vertical field of view at which the unit sphere fills 90% of the image height.
    pub fn framing_fov(distance: f64) -> f64 {
        if distance <= 1.0 {
            return std::f64::consts::FRAC_PI_2;
        }
        let half = (1.0 / distance).asin();
        2.0 * (half.tan() / FRAME_FILL).atan()
    }

    pub fn eye(&self) -> Vec3 {
        scale(self.direction, self.distance)
    }

    /// Right, up and forward axes of the camera frame.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = scale(self.direction, -1.0);
        let world_up = if self.direction[2].abs() > 1.0 - POLE_TOLERANCE {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let right = normalized(cross(forward, world_up));
        let up = cross(right, forward);
        (right, up, forward)
    }

    pub fn focal(&self) -> f64 {
        0.5 * f64::from(self.height) / (0.5 * self.fov_y).tan()
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * f64::from(self.width), 0.5 * f64::from(self.height)]
    }

    pub fn project(&self, point: Vec3) -> Projection {
        let (right, up, forward) = self.basis();
        self.project_with(point, right, up, forward)
    }

    pub(crate) fn project_with(&self, point: Vec3, right: Vec3, up: Vec3, forward: Vec3) -> Projection {
        let rel = sub(point, self.eye());
        let depth = dot(rel, forward);
        if depth <= MIN_DEPTH {
            return Projection {
                pixel: [f64::NAN, f64::NAN],
                depth,
                in_front: false,
            };
        }
        let f = self.focal();
        let [cx, cy] = self.center();
        Projection {
            pixel: [
                cx + f * dot(rel, right) / depth,
                cy - f * dot(rel, up) / depth,
            ],
            depth,
            in_front: true,
        }
    }

    /// Inverse of [`Camera::project`] for points in front of the camera.
    pub fn unproject(&self, pixel: [f64; 2], depth: f64) -> Vec3 {
        let (right, up, forward) = self.basis();
        let f = self.focal();
        let [cx, cy] = self.center();
        let x = (pixel[0] - cx) * depth / f;
        let y = -(pixel[1] - cy) * depth / f;
        add(
            add(self.eye(), scale(forward, depth)),
            add(scale(right, x), scale(up, y)),
        )
    }
}

/// `k` cameras on a Fibonacci lattice with the default distance and resolution.
pub fn fixed_viewpoints(k: usize) -> Result<Vec<Camera>> {
    fixed_viewpoints_with(k, DEFAULT_DISTANCE, DEFAULT_RESOLUTION, DEFAULT_RESOLUTION)
}

pub fn fixed_viewpoints_with(k: usize, distance: f64, width: u32, height: u32) -> Result<Vec<Camera>> {
    if k == 0 {
        return Err(Error::InvalidArgument("at least one viewpoint is required".into()));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            Camera::new([r * phi.cos(), r * phi.sin(), z], distance, width, height)
        })
        .collect()
}

pub fn save_cameras(cameras: &[Camera], path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(cameras).expect("cameras serialize");
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
