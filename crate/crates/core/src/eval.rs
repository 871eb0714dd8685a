//! Semantic segmentation scores averaged per part, per category and overall.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{per_label_iou, GroundTruth, SoftPrediction};

/// Predicted and ground-truth point labels of one object.
#[derive(Clone, Debug)]
pub struct SemanticEvalObject {
    pub category: String,
    pub label_names: Vec<String>,
    pub ground_truth: Vec<Option<usize>>,
    pub predicted: Vec<Option<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticResult {
    /// Part IoU averaged over the objects of each category.
    pub per_part: BTreeMap<String, BTreeMap<String, f64>>,
    /// Mean of the category's part IoUs.
    pub per_category: BTreeMap<String, f64>,
    /// Mean over categories.
    pub overall: f64,
    /// mIoU of every object, in input order.
    pub per_object: Vec<f64>,
}

/// Per-object part IoUs (a part absent from both labelings scores 1),
/// averaged over objects for each part, then over parts, then categories.
pub fn evaluate_semantic(objects: &[SemanticEvalObject]) -> Result<SemanticResult> {
    let mut sums: BTreeMap<&str, (Vec<f64>, usize, &[String])> = BTreeMap::new();
    let mut result = SemanticResult::default();
    for (i, o) in objects.iter().enumerate() {
        if o.ground_truth.len() != o.predicted.len() {
            return Err(Error::DimensionMismatch(format!(
                "object {i}: {} ground-truth labels, {} predicted",
                o.ground_truth.len(),
                o.predicted.len()
            )));
        }
        let l = o.label_names.len();
        let gt = GroundTruth::new(o.ground_truth.clone(), l)?;
        if o.predicted.iter().any(|p| p.is_some_and(|j| j >= l)) {
            return Err(Error::InvalidArgument(format!("object {i}: predicted label outside [0, {l})")));
        }
        let ious = per_label_iou(&gt, &SoftPrediction::from_hard(&o.predicted, l))?;
        result.per_object.push(if l == 0 { 1.0 } else { ious.iter().sum::<f64>() / l as f64 });
        let entry = sums.entry(o.category.as_str()).or_insert_with(|| (vec![0.0; l], 0, &o.label_names));
        if entry.2 != o.label_names.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "object {i}: label names differ from earlier objects of category {}",
                o.category
            )));
        }
        for (acc, v) in entry.0.iter_mut().zip(&ious) {
            *acc += v;
        }
        entry.1 += 1;
    }
    for (category, (totals, count, names)) in sums {
        let parts: BTreeMap<String, f64> = names
            .iter()
            .zip(&totals)
            .map(|(name, t)| (name.clone(), t / count as f64))
            .collect();
        let mean = if parts.is_empty() { 1.0 } else { parts.values().sum::<f64>() / parts.len() as f64 };
        result.per_category.insert(category.to_string(), mean);
        result.per_part.insert(category.to_string(), parts);
    }
    if !result.per_category.is_empty() {
        result.overall = result.per_category.values().sum::<f64>() / result.per_category.len() as f64;
    }
    Ok(result)
}
