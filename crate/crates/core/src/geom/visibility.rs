use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{Camera, PointCloud, Projection};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityParams {
    /// Disk splat radius in pixels.
    pub splat_radius: f64,
    /// Depth tolerance in normalized units.
    pub depth_epsilon: f64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            splat_radius: 2.0,
            depth_epsilon: 0.01,
        }
    }
}

/// Per-view, per-point visibility indicator, stored view-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityMap {
    views: usize,
    points: usize,
    bits: Vec<bool>,
}

impl VisibilityMap {
    pub fn from_views(views: Vec<Vec<bool>>) -> Result<Self> {
        let points = views.first().map_or(0, Vec::len);
        if views.iter().any(|v| v.len() != points) {
            return Err(Error::DimensionMismatch("visibility rows differ in length".into()));
        }
        Ok(Self {
            views: views.len(),
            points,
            bits: views.concat(),
        })
    }

    pub fn num_views(&self) -> usize {
        self.views
    }

    pub fn num_points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn get(&self, view: usize, point: usize) -> bool {
        self.bits[view * self.points + point]
    }

    pub fn view(&self, view: usize) -> &[bool] {
        &self.bits[view * self.points..(view + 1) * self.points]
    }

    pub fn visible_count(&self, view: usize) -> usize {
        self.view(view).iter().filter(|&&v| v).count()
    }
}

pub fn project_all(cloud: &PointCloud, camera: &Camera) -> Vec<Projection> {
    let (right, up, forward) = camera.basis();
    cloud
        .points()
        .iter()
        .map(|&p| camera.project_with(p, right, up, forward))
        .collect()
}

/// Z-buffer visibility with disk splats.
///
/// Every in-image point splats its depth onto the pixels within
/// `splat_radius` of its own pixel. A point is visible when its depth is
/// within `depth_epsilon` of the minimum splatted depth at its own pixel.
pub fn compute_visibility(
    cloud: &PointCloud,
    cameras: &[Camera],
    params: VisibilityParams,
) -> Result<VisibilityMap> {
    if !(params.splat_radius >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "splat radius {} must be nonnegative",
            params.splat_radius
        )));
    }
    if !(params.depth_epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "depth epsilon {} must be positive",
            params.depth_epsilon
        )));
    }
    let views = cameras
        .par_iter()
        .map(|cam| visibility_for_view(cloud, cam, params))
        .collect();
    VisibilityMap::from_views(views)
}

/// Minimum splatted depth per pixel and the point that supplied it.
#[derive(Clone, Debug)]
pub struct DepthBuffer {
    pub width: u32,
    pub height: u32,
    depth: Vec<f64>,
    owner: Vec<Option<usize>>,
}

impl DepthBuffer {
    pub fn depth(&self, x: i64, y: i64) -> f64 {
        self.index(x, y).map_or(f64::INFINITY, |i| self.depth[i])
    }

    /// Nearest point splatted onto pixel `(x, y)`.
    pub fn owner(&self, x: i64, y: i64) -> Option<usize> {
        self.index(x, y).and_then(|i| self.owner[i])
    }

    fn index(&self, x: i64, y: i64) -> Option<usize> {
        (x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height))
            .then(|| (y * i64::from(self.width) + x) as usize)
    }
}

/// Splats every in-image point as a disk of `splat_radius` pixels.
pub fn render_depth(projections: &[Projection], cam: &Camera, splat_radius: f64) -> DepthBuffer {
    let (w, h) = (i64::from(cam.width), i64::from(cam.height));
    let mut buf = DepthBuffer {
        width: cam.width,
        height: cam.height,
        depth: vec![f64::INFINITY; (w * h) as usize],
        owner: vec![None; (w * h) as usize],
    };
    let reach = splat_radius.floor() as i64;
    let r2 = splat_radius * splat_radius;
    for (idx, proj) in projections.iter().enumerate() {
        if !proj.inside(cam.width, cam.height) {
            continue;
        }
        let (u, v) = proj.pixel_index();
        for dv in -reach..=reach {
            let y = v + dv;
            if y < 0 || y >= h {
                continue;
            }
            for du in -reach..=reach {
                let x = u + du;
                if x < 0 || x >= w || ((du * du + dv * dv) as f64) > r2 {
                    continue;
                }
                let cell = (y * w + x) as usize;
                if proj.depth < buf.depth[cell] {
                    buf.depth[cell] = proj.depth;
                    buf.owner[cell] = Some(idx);
                }
            }
        }
    }
    buf
}

fn visibility_for_view(cloud: &PointCloud, cam: &Camera, params: VisibilityParams) -> Vec<bool> {
    let projections = project_all(cloud, cam);
    let buf = render_depth(&projections, cam, params.splat_radius);
    projections
        .iter()
        .map(|proj| {
            if !proj.inside(cam.width, cam.height) {
                return false;
            }
            let (u, v) = proj.pixel_index();
            proj.depth <= buf.depth(u, v) + params.depth_epsilon
        })
        .collect()
}

const VIS_MAGIC: &str = "#liftseg-visibility";

/// Text format: a header line then one row of `0`/`1` characters per view.
pub fn save_visibility(map: &VisibilityMap, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "{VIS_MAGIC} v1 K={} N={}", map.views, map.points)?;
        for k in 0..map.views {
            let row: String = map.view(k).iter().map(|&b| if b { '1' } else { '0' }).collect();
            writeln!(out, "{row}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn load_visibility(path: &Path) -> Result<VisibilityMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_kv = |token: Option<&&str>, key: &str| -> Result<usize> {
        token
            .and_then(|t| t.strip_prefix(key))
            .and_then(|t| t.strip_prefix('='))
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, format!("expected {key}=<count> in header")))
    };
    if fields.first() != Some(&VIS_MAGIC) || fields.get(1) != Some(&"v1") {
        return Err(Error::parse(path, 1, format!("expected `{VIS_MAGIC} v1` header")));
    }
    let k = parse_kv(fields.get(2), "K")?;
    let n = parse_kv(fields.get(3), "N")?;
    let mut views = Vec::with_capacity(k);
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::parse(path, i + 2, format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if row.len() != n {
            return Err(Error::parse(
                path,
                i + 2,
                format!("expected {n} entries, found {}", row.len()),
            ));
        }
        views.push(row);
    }
    if views.len() != k {
        return Err(Error::parse(path, 1, format!("header declares K={k} but {} rows follow", views.len())));
    }
    if k == 0 {
        return Ok(VisibilityMap {
            views: 0,
            points: n,
            bits: Vec::new(),
        });
    }
    VisibilityMap::from_views(views)
}
