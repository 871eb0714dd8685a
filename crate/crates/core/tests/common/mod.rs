//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use liftseg::train::TrainObject;

/// Voting scores by direct evaluation: for every super point, label, view
/// and point, the largest weight among same-label detections of that view
/// containing the point. Returns S rows of L scores.
pub fn naive_scores(object: &TrainObject, weights: &[f64]) -> Vec<Vec<f64>> {
    let partition = &object.scene.partition;
    let dets = &object.detections;
    let (s, l, k) = (partition.num_super_points(), dets.num_labels(), object.visibility.num_views());
    let mut out = vec![vec![0.0; l]; s];
    for (i, row) in out.iter_mut().enumerate() {
        let mut mass = 0.0;
        for view in 0..k {
            for p in 0..partition.num_points() {
                if partition.super_point_of(p) == i && object.visibility.get(view, p) {
                    mass += 1.0;
                }
            }
        }
        for (j, value) in row.iter_mut().enumerate() {
            let mut total = 0.0;
            for view in 0..k {
                for p in 0..partition.num_points() {
                    if partition.super_point_of(p) != i || !object.visibility.get(view, p) {
                        continue;
                    }
                    let mut best = 0.0f64;
                    for (b, d) in dets.detections.iter().enumerate() {
                        if d.view == view && d.label == j && object.membership.contains(b, p) {
                            best = best.max(weights[b]);
                        }
                    }
                    total += best;
                }
            }
            *value = if mass > 0.0 { total / mass } else { 0.0 };
        }
    }
    out
}

/// Mean IoU over labels with sets; a label absent from both sides scores 1.
pub fn brute_miou(gt: &[Option<usize>], pred: &[Option<usize>], num_labels: usize) -> f64 {
    let mut total = 0.0;
    for j in 0..num_labels {
        let a: HashSet<usize> = (0..gt.len()).filter(|&p| gt[p] == Some(j)).collect();
        let b: HashSet<usize> = (0..pred.len()).filter(|&p| pred[p] == Some(j)).collect();
        let union = a.union(&b).count();
        total += if union == 0 { 1.0 } else { a.intersection(&b).count() as f64 / union as f64 };
    }
    total / num_labels as f64
}

fn iou(a: &[usize], b: &[usize]) -> f64 {
    let a: HashSet<_> = a.iter().collect();
    let b: HashSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

/// Average precision at IoU 0.5 from first principles. Each score
/// threshold keeps the predictions above it; the true positives of that
/// prefix come from a fresh greedy matching (score order, best unmatched
/// ground truth). AP sums recall increments times the best precision at
/// any equal or higher recall. Predictions are `(object, points, score)`,
/// ground truths `(object, points)`. `None` when there is no ground truth.
pub fn brute_ap(preds: &[(usize, Vec<usize>, f64)], gts: &[(usize, Vec<usize>)]) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].2.partial_cmp(&preds[a].2).unwrap().then(a.cmp(&b)));
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    for k in 1..=order.len() {
        let mut used = vec![false; gts.len()];
        let mut tp = 0;
        for &pi in &order[..k] {
            let (obj, points, _) = &preds[pi];
            let mut best: Option<(f64, usize)> = None;
            for (g, (gobj, gpoints)) in gts.iter().enumerate() {
                if used[g] || gobj != obj {
                    continue;
                }
                let v = iou(points, gpoints);
                if v >= 0.5 && best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, g));
                }
            }
            if let Some((_, g)) = best {
                used[g] = true;
                tp += 1;
            }
        }
        precision.push(tp as f64 / k as f64);
        recall.push(tp as f64 / gts.len() as f64);
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for k in 0..recall.len() {
        let best = precision[k..].iter().cloned().fold(0.0, f64::max);
        ap += (recall[k] - prev) * best;
        prev = recall[k];
    }
    Some(ap)
}

/// Super-point adjacency by comparing every pair of points.
pub fn brute_adjacency(points: &[[f64; 3]], assignment: &[usize], s: usize, radius: f64) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); s];
    for a in 0..s {
        for b in 0..s {
            if a == b {
                continue;
            }
            let close = (0..points.len()).filter(|&p| assignment[p] == a).any(|p| {
                (0..points.len()).filter(|&q| assignment[q] == b).any(|q| {
                    let d: f64 = (0..3).map(|c| (points[p][c] - points[q][c]).powi(2)).sum();
                    d.sqrt() < radius
                })
            });
            if close {
                adj[a].push(b);
            }
        }
    }
    adj
}
