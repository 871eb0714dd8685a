//! Super-point voting: unweighted and weighted scores, softmax with a
//! learnable null logit, and label assignment.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::detect::{DetectionSet, MembershipTensor};
use crate::error::{Error, Result};
use crate::geom::{SuperPointPartition, VisibilityMap};

/// Null-label threshold of the unweighted path.
pub const DEFAULT_NULL_THRESHOLD: f64 = 0.5;
/// Initial value of the learnable null logit.
pub const DEFAULT_NULL_SCORE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreKind {
    RawUnweighted,
    RawWeighted,
    Normalized,
}

/// `S x (L + 1)` scores; the last column is the null label.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    labels: usize,
    values: Vec<f64>,
    /// Visible point-view observations per super point.
    mass: Vec<f64>,
    kind: ScoreKind,
}

impl ScoreMatrix {
    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn num_super_points(&self) -> usize {
        self.rows
    }

    pub fn num_labels(&self) -> usize {
        self.labels
    }

    pub fn cols(&self) -> usize {
        self.labels + 1
    }

    #[inline]
    pub fn get(&self, super_point: usize, column: usize) -> f64 {
        self.values[super_point * self.cols() + column]
    }

    pub fn row(&self, super_point: usize) -> &[f64] {
        let c = self.cols();
        &self.values[super_point * c..(super_point + 1) * c]
    }

    pub fn null(&self, super_point: usize) -> f64 {
        self.get(super_point, self.labels)
    }

    pub fn mass(&self, super_point: usize) -> f64 {
        self.mass[super_point]
    }

    /// Scores of label `j` across all super points.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Label columns only, as `L` vectors of length `S`.
    pub fn label_columns(&self) -> Vec<Vec<f64>> {
        (0..self.labels).map(|j| self.column(j)).collect()
    }

    /// Assembles a matrix from label scores (`S x L`, row-major) and a constant null column.
    pub fn from_label_scores(
        rows: usize,
        labels: usize,
        scores: &[f64],
        null: f64,
        kind: ScoreKind,
    ) -> Result<Self> {
        if scores.len() != rows * labels {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for a {rows}x{labels} matrix",
                scores.len()
            )));
        }
        let mut values = Vec::with_capacity(rows * (labels + 1));
        for row in scores.chunks(labels.max(1)).take(rows) {
            values.extend_from_slice(&row[..labels]);
            values.push(null);
        }
        if labels == 0 {
            values = vec![null; rows];
        }
        Ok(Self {
            rows,
            labels,
            values,
            mass: vec![1.0; rows],
            kind,
        })
    }
}

/// Which detection supplied each super point's per-label maxima; enough to
/// differentiate weighted scores with respect to detection weights.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteTape {
    mass: Vec<f64>,
    /// Per detection: `(super point, number of winning point-view observations)`.
    wins: Vec<Vec<(usize, u32)>>,
    labels: Vec<usize>,
    num_labels: usize,
}

impl VoteTape {
    /// `d score / d W(b)` contracted with `grad` (`S x L`, row-major).
    pub fn weight_grad(&self, grad: &[f64]) -> Vec<f64> {
        self.wins
            .iter()
            .zip(&self.labels)
            .map(|(wins, &j)| {
                wins.iter()
                    .map(|&(i, count)| f64::from(count) * grad[i * self.num_labels + j] / self.mass[i])
                    .sum()
            })
            .collect()
    }
}

fn check_inputs(
    partition: &SuperPointPartition,
    visibility: &VisibilityMap,
    membership: &MembershipTensor,
    detections: &DetectionSet,
) -> Result<()> {
    let n = partition.num_points();
    if visibility.num_points() != n || membership.num_points() != n {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {n} points, visibility {}, membership {}",
            visibility.num_points(),
            membership.num_points()
        )));
    }
    if membership.num_detections() != detections.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} membership rows for {} detections",
            membership.num_detections(),
            detections.len()
        )));
    }
    if visibility.num_views() != detections.num_views {
        return Err(Error::DimensionMismatch(format!(
            "visibility has {} views, detections {}",
            visibility.num_views(),
            detections.num_views
        )));
    }
    Ok(())
}

const NO_WINNER: u32 = u32::MAX;

/// Shared accumulation for both scoring rules: per view, the maximum weight
/// of any same-label detection containing each visible point.
fn accumulate(
    partition: &SuperPointPartition,
    visibility: &VisibilityMap,
    membership: &MembershipTensor,
    detections: &DetectionSet,
    weights: &[f64],
    record: bool,
) -> (Vec<f64>, Vec<f64>, Option<VoteTape>) {
    let (n, s, l) = (partition.num_points(), partition.num_super_points(), detections.num_labels());
    let mut num = vec![0.0; s * l];
    let mut mass = vec![0.0; s];
    let mut by_view = vec![Vec::new(); visibility.num_views()];
    for (b, d) in detections.detections.iter().enumerate() {
        by_view[d.view].push(b);
    }
    let mut cover = vec![0.0; n * l];
    let mut winner = vec![NO_WINNER; n * l];
    let mut raw_wins: Vec<Vec<usize>> = vec![Vec::new(); if record { detections.len() } else { 0 }];

    for (k, dets) in by_view.iter().enumerate() {
        cover.fill(0.0);
        winner.fill(NO_WINNER);
        for &b in dets {
            let j = detections.detections[b].label;
            let w = weights[b];
            for &p in membership.members(b) {
                if !visibility.get(k, p) {
                    continue;
                }
                let slot = p * l + j;
                if winner[slot] == NO_WINNER || w > cover[slot] {
                    cover[slot] = w;
                    winner[slot] = b as u32;
                }
            }
        }
        for (p, &visible) in visibility.view(k).iter().enumerate() {
            if !visible {
                continue;
            }
            let i = partition.super_point_of(p);
            mass[i] += 1.0;
            for j in 0..l {
                let slot = p * l + j;
                num[i * l + j] += cover[slot];
                if record && winner[slot] != NO_WINNER {
                    raw_wins[winner[slot] as usize].push(i);
                }
            }
        }
    }

    for i in 0..s {
        if mass[i] > 0.0 {
            for v in &mut num[i * l..(i + 1) * l] {
                *v /= mass[i];
            }
        }
    }

    let tape = record.then(|| VoteTape {
        mass: mass.clone(),
        wins: raw_wins
            .into_iter()
            .map(|mut sps| {
                sps.sort_unstable();
                let mut runs: Vec<(usize, u32)> = Vec::new();
                for sp in sps {
                    match runs.last_mut() {
                        Some((last, count)) if *last == sp => *count += 1,
                        _ => runs.push((sp, 1)),
                    }
                }
                runs
            })
            .collect(),
        labels: detections.detections.iter().map(|d| d.label).collect(),
        num_labels: l,
    });
    (num, mass, tape)
}

fn assemble(rows: usize, labels: usize, num: Vec<f64>, mass: Vec<f64>, null: f64, kind: ScoreKind) -> ScoreMatrix {
    let mut values = Vec::with_capacity(rows * (labels + 1));
    for i in 0..rows {
        values.extend_from_slice(&num[i * labels..(i + 1) * labels]);
        values.push(null);
    }
    ScoreMatrix {
        rows,
        labels,
        values,
        mass,
        kind,
    }
}

/// Fraction of each super point's visible point-view observations covered by
/// a detection of each label. The null column holds `null_threshold`.
pub fn score_unweighted(
    partition: &SuperPointPartition,
    visibility: &VisibilityMap,
    membership: &MembershipTensor,
    detections: &DetectionSet,
    null_threshold: f64,
) -> Result<ScoreMatrix> {
    check_inputs(partition, visibility, membership, detections)?;
    let ones = vec![1.0; detections.len()];
    let (num, mass, _) = accumulate(partition, visibility, membership, detections, &ones, false);
    Ok(assemble(
        partition.num_super_points(),
        detections.num_labels(),
        num,
        mass,
        null_threshold,
        ScoreKind::RawUnweighted,
    ))
}

/// Like [`score_unweighted`], with each membership scaled by its detection's weight.
/// The null column is zero until [`normalize_scores`] supplies the null logit.
pub fn score_weighted(
    partition: &SuperPointPartition,
    visibility: &VisibilityMap,
    membership: &MembershipTensor,
    detections: &DetectionSet,
    weights: &[f64],
) -> Result<ScoreMatrix> {
    score_weighted_taped(partition, visibility, membership, detections, weights).map(|(m, _)| m)
}

pub fn score_weighted_taped(
    partition: &SuperPointPartition,
    visibility: &VisibilityMap,
    membership: &MembershipTensor,
    detections: &DetectionSet,
    weights: &[f64],
) -> Result<(ScoreMatrix, VoteTape)> {
    check_inputs(partition, visibility, membership, detections)?;
    if weights.len() != detections.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} detections",
            weights.len(),
            detections.len()
        )));
    }
    if let Some(b) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight {} of detection {b} must be finite and nonnegative",
            weights[b]
        )));
    }
    let (num, mass, tape) = accumulate(partition, visibility, membership, detections, weights, true);
    let m = assemble(
        partition.num_super_points(),
        detections.num_labels(),
        num,
        mass,
        0.0,
        ScoreKind::RawWeighted,
    );
    Ok((m, tape.expect("tape recorded")))
}

/// Row-wise softmax over the label scores and the shared null logit.
pub fn normalize_scores(raw: &ScoreMatrix, null_score: f64) -> Result<ScoreMatrix> {
    if raw.kind != ScoreKind::RawWeighted {
        return Err(Error::InvalidArgument(format!(
            "softmax expects raw weighted scores, got {:?}",
            raw.kind
        )));
    }
    if !null_score.is_finite() {
        return Err(Error::NonFiniteValue(format!("null score {null_score}")));
    }
    let cols = raw.cols();
    let mut values = Vec::with_capacity(raw.values.len());
    let mut logits = vec![0.0; cols];
    for i in 0..raw.rows {
        logits[..raw.labels].copy_from_slice(&raw.row(i)[..raw.labels]);
        logits[raw.labels] = null_score;
        if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("score {bad} in super point {i}")));
        }
        values.extend(softmax(&logits));
    }
    Ok(ScoreMatrix {
        rows: raw.rows,
        labels: raw.labels,
        values,
        mass: raw.mass.clone(),
        kind: ScoreKind::Normalized,
    })
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Reverse of [`normalize_scores`]: maps `d loss / d normalized` (`S x (L+1)`)
/// to `d loss / d raw` (`S x L`) and `d loss / d null_score`.
pub fn softmax_backward(normalized: &ScoreMatrix, grad: &[f64]) -> (Vec<f64>, f64) {
    let (cols, l) = (normalized.cols(), normalized.labels);
    let mut raw_grad = vec![0.0; normalized.rows * l];
    let mut null_grad = 0.0;
    for i in 0..normalized.rows {
        let probs = normalized.row(i);
        let g = &grad[i * cols..(i + 1) * cols];
        let inner: f64 = probs.iter().zip(g).map(|(p, g)| p * g).sum();
        for j in 0..l {
            raw_grad[i * l + j] = probs[j] * (g[j] - inner);
        }
        null_grad += probs[l] * (g[l] - inner);
    }
    (raw_grad, null_grad)
}

/// Super-point labels and their per-point lift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    per_super_point: Vec<Option<usize>>,
    per_point: Vec<Option<usize>>,
}

impl Labeling {
    pub fn from_super_points(partition: &SuperPointPartition, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != partition.num_super_points() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} super points",
                labels.len(),
                partition.num_super_points()
            )));
        }
        let per_point = partition.assignment().iter().map(|&i| labels[i]).collect();
        Ok(Self {
            per_super_point: labels,
            per_point,
        })
    }

    pub fn super_point_labels(&self) -> &[Option<usize>] {
        &self.per_super_point
    }

    pub fn point_labels(&self) -> &[Option<usize>] {
        &self.per_point
    }
}

/// Lowest-index argmax.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Hard labels from scores.
///
/// Unweighted scores: the best label, or null when its score is below
/// `null_threshold` or the super point was never observed. Otherwise: argmax
/// over the label and null columns. Ties go to the lowest index.
pub fn assign_labels(scores: &ScoreMatrix, partition: &SuperPointPartition, null_threshold: f64) -> Labeling {
    let l = scores.labels;
    let labels = (0..scores.rows)
        .map(|i| {
            let row = scores.row(i);
            match scores.kind {
                ScoreKind::RawUnweighted => {
                    if l == 0 || scores.mass[i] == 0.0 {
                        return None;
                    }
                    let j = argmax(&row[..l]);
                    (row[j] >= null_threshold).then_some(j)
                }
                ScoreKind::Normalized | ScoreKind::RawWeighted => {
                    let j = argmax(row);
                    (j < l).then_some(j)
                }
            }
        })
        .collect();
    Labeling::from_super_points(partition, labels).expect("one label per super point")
}

/// One line per point: `point_idx label_id`, `-1` for null.
pub fn save_labeling(labels: &[Option<usize>], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for (p, label) in labels.iter().enumerate() {
            writeln!(out, "{p} {}", label.map_or(-1, |l| l as i64))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn load_labeling(path: &Path) -> Result<Vec<Option<usize>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [idx, label] => idx.parse::<usize>().ok().zip(label.parse::<i64>().ok()),
            _ => None,
        };
        let Some((idx, label)) = parsed else {
            return Err(Error::parse(path, i + 1, "expected `point_idx label_id`"));
        };
        if idx != labels.len() {
            return Err(Error::parse(path, i + 1, format!("expected point {}, found {idx}", labels.len())));
        }
        labels.push(match label {
            -1 => None,
            l if l >= 0 => Some(l as usize),
            l => return Err(Error::parse(path, i + 1, format!("bad label {l}"))),
        });
    }
    Ok(labels)
}

/// Tab-separated scores with a header of label names followed by `null`.
pub fn save_scores_tsv(scores: &ScoreMatrix, label_names: &[String], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        let mut header: Vec<&str> = label_names.iter().map(String::as_str).collect();
        header.push("null");
        writeln!(out, "{}", header.join("\t"))?;
        for i in 0..scores.rows {
            let row: Vec<String> = scores.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join("\t"))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
