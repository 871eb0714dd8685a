//! Point clouds, super-point partitions, cameras and visibility.

mod camera;
mod cloud;
mod grid;
mod visibility;

pub use camera::{
    fixed_viewpoints, fixed_viewpoints_with, load_cameras, save_cameras, Camera, Projection,
    DEFAULT_DISTANCE, DEFAULT_RESOLUTION, DEFAULT_VIEWS,
};
pub use cloud::{
    load_scene, normalize_cloud, save_scene, Normalization, PointCloud, Scene,
    SuperPointPartition,
};
pub use grid::{mean_nearest_neighbor_distance, SpatialGrid};
pub use visibility::{
    compute_visibility, load_visibility, project_all, render_depth, save_visibility, DepthBuffer,
    VisibilityMap, VisibilityParams,
};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

pub fn normalized(a: Vec3) -> Vec3 {
    let n = norm(a);
    scale(a, 1.0 / n)
}
