//! mIoU, the relaxed mIoU loss and its gradient, cross-entropy, and the
//! super-point-to-point lift.

use crate::error::{Error, Result};
use crate::geom::SuperPointPartition;

/// Union denominators are clamped below at this value.
pub const UNION_EPS: f64 = 1e-12;
/// Probabilities are clamped below at this value inside the log.
pub const PROB_EPS: f64 = 1e-12;

/// Ground-truth part label per point (`None` is the null label).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    num_labels: usize,
    labels: Vec<Option<usize>>,
}

impl GroundTruth {
    pub fn new(labels: Vec<Option<usize>>, num_labels: usize) -> Result<Self> {
        if let Some(p) = labels.iter().position(|l| l.is_some_and(|l| l >= num_labels)) {
            return Err(Error::InvalidArgument(format!(
                "point {p} has a label outside [0, {num_labels})"
            )));
        }
        Ok(Self { num_labels, labels })
    }

    pub fn num_points(&self) -> usize {
        self.labels.len()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// `l_j[p]` as 0/1.
    #[inline]
    pub fn indicator(&self, j: usize, p: usize) -> f64 {
        if self.labels[p] == Some(j) {
            1.0
        } else {
            0.0
        }
    }
}

/// Per-label, per-point soft predictions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftPrediction {
    values: Vec<Vec<f64>>,
    num_points: usize,
}

impl SoftPrediction {
    pub fn new(values: Vec<Vec<f64>>, num_points: usize) -> Result<Self> {
        if values.iter().any(|v| v.len() != num_points) {
            return Err(Error::DimensionMismatch(format!(
                "prediction vectors must have {num_points} entries"
            )));
        }
        if values.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("soft predictions must lie in [0, 1]".into()));
        }
        Ok(Self { values, num_points })
    }

    /// One-hot indicators of a hard labeling.
    pub fn from_hard(labels: &[Option<usize>], num_labels: usize) -> Self {
        let mut values = vec![vec![0.0; labels.len()]; num_labels];
        for (p, label) in labels.iter().enumerate() {
            if let Some(j) = *label {
                if j < num_labels {
                    values[j][p] = 1.0;
                }
            }
        }
        Self {
            values,
            num_points: labels.len(),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.values.len()
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn label(&self, j: usize) -> &[f64] {
        &self.values[j]
    }
}

/// Each point inherits its super point's score: `l_hat_j = M s_j`.
pub fn lift_scores(partition: &SuperPointPartition, scores: &[Vec<f64>]) -> Result<SoftPrediction> {
    let s = partition.num_super_points();
    if let Some(bad) = scores.iter().find(|v| v.len() != s) {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {s} super points",
            bad.len()
        )));
    }
    let values = scores
        .iter()
        .map(|sj| partition.assignment().iter().map(|&i| sj[i]).collect())
        .collect();
    SoftPrediction::new(values, partition.num_points())
}

/// Transpose of the lift: sums per-point gradients over each super point.
pub fn lift_grad(partition: &SuperPointPartition, point_grad: &[Vec<f64>]) -> Vec<Vec<f64>> {
    point_grad
        .iter()
        .map(|g| {
            let mut out = vec![0.0; partition.num_super_points()];
            for (p, &i) in partition.assignment().iter().enumerate() {
                out[i] += g[p];
            }
            out
        })
        .collect()
}

fn check(gt: &GroundTruth, pred: &SoftPrediction) -> Result<()> {
    if gt.num_points() != pred.num_points() || gt.num_labels() != pred.num_labels() {
        return Err(Error::DimensionMismatch(format!(
            "ground truth {}x{}, prediction {}x{}",
            gt.num_labels(),
            gt.num_points(),
            pred.num_labels(),
            pred.num_points()
        )));
    }
    Ok(())
}

struct Overlap {
    intersection: f64,
    gt_mass: f64,
    pred_mass: f64,
}

impl Overlap {
    fn of(gt: &GroundTruth, pred: &SoftPrediction, j: usize) -> Self {
        let mut o = Overlap {
            intersection: 0.0,
            gt_mass: 0.0,
            pred_mass: 0.0,
        };
        for (p, &v) in pred.label(j).iter().enumerate() {
            let l = gt.indicator(j, p);
            o.intersection += l * v;
            o.gt_mass += l;
            o.pred_mass += v;
        }
        o
    }

    /// Both vectors empty: vacuous agreement.
    fn degenerate(&self) -> bool {
        self.gt_mass == 0.0 && self.pred_mass == 0.0
    }

    fn union(&self) -> f64 {
        (self.gt_mass + self.pred_mass - self.intersection).max(UNION_EPS)
    }

    fn iou(&self) -> f64 {
        if self.degenerate() {
            1.0
        } else {
            self.intersection / self.union()
        }
    }
}

/// IoU of every label. A label absent from both vectors scores 1.
pub fn per_label_iou(gt: &GroundTruth, pred: &SoftPrediction) -> Result<Vec<f64>> {
    check(gt, pred)?;
    Ok((0..gt.num_labels())
        .map(|j| Overlap::of(gt, pred, j).iou())
        .collect())
}

pub fn miou(gt: &GroundTruth, pred: &SoftPrediction) -> Result<f64> {
    let ious = per_label_iou(gt, pred)?;
    if ious.is_empty() {
        return Ok(1.0);
    }
    Ok(ious.iter().sum::<f64>() / ious.len() as f64)
}

/// mIoU of a hard labeling.
pub fn miou_hard(gt: &GroundTruth, labels: &[Option<usize>]) -> Result<f64> {
    miou(gt, &SoftPrediction::from_hard(labels, gt.num_labels()))
}

/// `1 - mIoU` over soft predictions.
pub fn mriou_loss(gt: &GroundTruth, pred: &SoftPrediction) -> Result<f64> {
    Ok(1.0 - miou(gt, pred)?)
}

/// `d mriou_loss / d l_hat_j[p]` for every label and point.
pub fn mriou_grad(gt: &GroundTruth, pred: &SoftPrediction) -> Result<Vec<Vec<f64>>> {
    check(gt, pred)?;
    let m = gt.num_labels() as f64;
    Ok((0..gt.num_labels())
        .map(|j| {
            let o = Overlap::of(gt, pred, j);
            if o.degenerate() {
                return vec![0.0; gt.num_points()];
            }
            let u = o.union();
            (0..gt.num_points())
                .map(|p| {
                    let l = gt.indicator(j, p);
                    -(l * u - o.intersection * (1.0 - l)) / (m * u * u)
                })
                .collect()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossEntropy {
    pub value: f64,
    /// Some true-class probability fell below [`PROB_EPS`] and was clamped.
    pub clamped: bool,
}

fn true_class(gt: &GroundTruth, p: usize) -> usize {
    gt.labels()[p].unwrap_or(gt.num_labels())
}

fn check_probs(gt: &GroundTruth, probs: &[Vec<f64>]) -> Result<()> {
    if probs.len() != gt.num_points() || probs.iter().any(|p| p.len() != gt.num_labels() + 1) {
        return Err(Error::DimensionMismatch(format!(
            "expected {} distributions over {} classes",
            gt.num_points(),
            gt.num_labels() + 1
        )));
    }
    Ok(())
}

/// Mean negative log-likelihood of each point's true class; ground-truth
/// null points use class `L`.
pub fn cross_entropy_loss(gt: &GroundTruth, probs: &[Vec<f64>]) -> Result<CrossEntropy> {
    check_probs(gt, probs)?;
    let mut clamped = false;
    let mut total = 0.0;
    for (p, dist) in probs.iter().enumerate() {
        let q = dist[true_class(gt, p)];
        if q < PROB_EPS {
            clamped = true;
        }
        total -= q.max(PROB_EPS).ln();
    }
    Ok(CrossEntropy {
        value: total / probs.len().max(1) as f64,
        clamped,
    })
}

/// `d cross_entropy / d probs[p][c]`.
pub fn cross_entropy_grad(gt: &GroundTruth, probs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_probs(gt, probs)?;
    let n = probs.len().max(1) as f64;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(p, dist)| {
            let mut g = vec![0.0; dist.len()];
            let c = true_class(gt, p);
            if dist[c] >= PROB_EPS {
                g[c] = -1.0 / (n * dist[c]);
            }
            g
        })
        .collect())
}
