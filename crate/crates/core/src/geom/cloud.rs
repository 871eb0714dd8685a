use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{norm, scale, sub, Vec3};
use crate::error::{Error, Result};

/// An immutable set of 3D points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = points
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|&p| norm(p)).fold(0.0, f64::max)
    }
}

/// The similarity transform applied by [`normalize_cloud`]:
/// `normalized = (raw - translation) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub translation: Vec3,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        scale(sub(p, self.translation), 1.0 / self.scale)
    }
}

/// Centers the cloud on its centroid and scales it into the unit sphere.
///
/// A cloud whose points all coincide with the centroid keeps scale 1.
pub fn normalize_cloud(raw: &[Vec3]) -> Result<(PointCloud, Normalization)> {
    let raw = PointCloud::new(raw.to_vec())?;
    let n = raw.len() as f64;
    let mut centroid = [0.0; 3];
    for p in raw.points() {
        for c in 0..3 {
            centroid[c] += p[c];
        }
    }
    let centroid = scale(centroid, 1.0 / n);
    let max_norm = raw
        .points()
        .iter()
        .map(|&p| norm(sub(p, centroid)))
        .fold(0.0, f64::max);
    let transform = Normalization {
        translation: centroid,
        scale: if max_norm > 0.0 { max_norm } else { 1.0 },
    };
    let points = raw.points().iter().map(|&p| transform.apply(p)).collect();
    Ok((PointCloud::new(points)?, transform))
}

/// Per-point super-point assignment. Every super point is nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperPointPartition {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl SuperPointPartition {
    pub fn new(assignment: Vec<usize>, count: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); count];
        for (p, &sp) in assignment.iter().enumerate() {
            if sp >= count {
                return Err(Error::InvalidArgument(format!(
                    "point {p} assigned to super point {sp}, but only {count} exist"
                )));
            }
            members[sp].push(p);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("super point {empty} is empty")));
        }
        Ok(Self {
            assignment,
            members,
        })
    }

    /// Builds a partition whose size is one past the largest index.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let count = assignment.iter().max().map_or(0, |m| m + 1);
        Self::new(assignment, count)
    }

    /// Relabels arbitrary ids into a contiguous range, ordered by first appearance.
    pub fn compact(ids: &[usize]) -> Result<Self> {
        let mut remap = std::collections::HashMap::new();
        let assignment = ids
            .iter()
            .map(|id| {
                let next = remap.len();
                *remap.entry(*id).or_insert(next)
            })
            .collect::<Vec<_>>();
        let count = remap.len();
        Self::new(assignment, count)
    }

    pub fn num_points(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_super_points(&self) -> usize {
        self.members.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn super_point_of(&self, point: usize) -> usize {
        self.assignment[point]
    }

    pub fn members(&self, super_point: usize) -> &[usize] {
        &self.members[super_point]
    }

    pub fn all_members(&self) -> &[Vec<usize>] {
        &self.members
    }
}

/// A labeled object: cloud, super points and per-point ground-truth parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub partition: SuperPointPartition,
    /// Ground-truth label per point; `None` is the null label.
    pub gt: Vec<Option<usize>>,
    pub labels: Vec<String>,
    pub category: Option<String>,
}

impl Scene {
    pub fn new(
        cloud: PointCloud,
        partition: SuperPointPartition,
        gt: Vec<Option<usize>>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let n = cloud.len();
        if partition.num_points() != n || gt.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "cloud has {n} points, partition {}, labels {}",
                partition.num_points(),
                gt.len()
            )));
        }
        if let Some(p) = gt.iter().position(|l| l.is_some_and(|l| l >= labels.len())) {
            return Err(Error::InvalidArgument(format!(
                "point {p} has label outside the {} known labels",
                labels.len()
            )));
        }
        Ok(Self {
            cloud,
            partition,
            gt,
            labels,
            category: None,
        })
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Serialize, Deserialize)]
struct LabelTable {
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<String>,
}

const CLOUD_MAGIC: &str = "#liftseg-cloud";

/// Writes `cloud_path` (points, super points, labels) and the JSON label table.
pub fn save_scene(scene: &Scene, cloud_path: &Path, labels_path: &Path) -> Result<()> {
    let file = fs::File::create(cloud_path).map_err(|e| Error::io(cloud_path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(
            out,
            "{CLOUD_MAGIC} v1 N={} S={} L={}",
            scene.cloud.len(),
            scene.partition.num_super_points(),
            scene.num_labels()
        )?;
        for (i, p) in scene.cloud.points().iter().enumerate() {
            let label = scene.gt[i].map_or(-1, |l| l as i64);
            writeln!(
                out,
                "{} {} {} {} {}",
                p[0],
                p[1],
                p[2],
                scene.partition.super_point_of(i),
                label
            )?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(cloud_path, e))?;

    let table = LabelTable {
        labels: scene.labels.clone(),
        category: scene.category.clone(),
    };
    let json = serde_json::to_string_pretty(&table).expect("label table serializes");
    fs::write(labels_path, json + "\n").map_err(|e| Error::io(labels_path, e))
}

fn header_field(path: &Path, token: Option<&str>, key: &str) -> Result<usize> {
    let bad = || Error::parse(path, 1, format!("expected {key}=<count> in header"));
    let token = token.ok_or_else(bad)?;
    let value = token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(bad)?;
    value.parse().map_err(|_| bad())
}

pub fn load_scene(cloud_path: &Path, labels_path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(cloud_path).map_err(|e| Error::io(cloud_path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(cloud_path, 1, "missing header"))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(CLOUD_MAGIC) || tokens.next() != Some("v1") {
        return Err(Error::parse(
            cloud_path,
            1,
            format!("expected `{CLOUD_MAGIC} v1` header"),
        ));
    }
    let n = header_field(cloud_path, tokens.next(), "N")?;
    let s = header_field(cloud_path, tokens.next(), "S")?;
    let l = header_field(cloud_path, tokens.next(), "L")?;

    let mut points = Vec::with_capacity(n);
    let mut assignment = Vec::with_capacity(n);
    let mut gt = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                cloud_path,
                line_no,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let mut p = [0.0; 3];
        for c in 0..3 {
            p[c] = fields[c].parse().map_err(|_| {
                Error::parse(cloud_path, line_no, format!("bad coordinate `{}`", fields[c]))
            })?;
        }
        let sp: usize = fields[3].parse().map_err(|_| {
            Error::parse(cloud_path, line_no, format!("bad super point `{}`", fields[3]))
        })?;
        let label: i64 = fields[4].parse().map_err(|_| {
            Error::parse(cloud_path, line_no, format!("bad label `{}`", fields[4]))
        })?;
        let label = match label {
            -1 => None,
            x if x >= 0 && (x as usize) < l => Some(x as usize),
            x => {
                return Err(Error::parse(
                    cloud_path,
                    line_no,
                    format!("label {x} outside [-1, {l})"),
                ))
            }
        };
        points.push(p);
        assignment.push(sp);
        gt.push(label);
    }
    if points.len() != n {
        return Err(Error::parse(
            cloud_path,
            1,
            format!("header declares N={n} but {} points follow", points.len()),
        ));
    }

    let table_text = fs::read_to_string(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let table: LabelTable = serde_json::from_str(&table_text).map_err(|source| Error::Json {
        path: labels_path.to_path_buf(),
        source,
    })?;
    if table.labels.len() != l {
        return Err(Error::parse(
            cloud_path,
            1,
            format!(
                "header declares L={l} but {} has {} labels",
                labels_path.display(),
                table.labels.len()
            ),
        ));
    }

    let cloud = PointCloud::new(points)?;
    let partition = SuperPointPartition::new(assignment, s)?;
    let mut scene = Scene::new(cloud, partition, gt, table.labels)?;
    scene.category = table.category;
    Ok(scene)
}
