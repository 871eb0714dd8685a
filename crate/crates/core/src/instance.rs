//! Instance segmentation by merging adjacent super points, and mAP at IoU 0.5.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::{DetectionSet, MembershipTensor};
use crate::error::{Error, Result};
use crate::geom::{mean_nearest_neighbor_distance, PointCloud, SpatialGrid, SuperPointPartition, VisibilityMap};
use crate::vote::{Labeling, ScoreMatrix};

pub const DEFAULT_INCLUSION_THRESHOLD: f64 = 0.5;
pub const IOU_THRESHOLD: f64 = 0.5;

/// Default adjacency radius: twice the mean nearest-neighbour distance.
pub fn default_adjacency_radius(cloud: &PointCloud) -> f64 {
    2.0 * mean_nearest_neighbor_distance(cloud.points())
}

/// Sorted neighbour lists: super points `a != b` are adjacent when some pair
/// of their points is closer than `radius`.
pub fn superpoint_adjacency(cloud: &PointCloud, partition: &SuperPointPartition, radius: f64) -> Result<Vec<Vec<usize>>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("adjacency radius {radius} must be positive")));
    }
    if partition.num_points() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} points, cloud has {}",
            partition.num_points(),
            cloud.len()
        )));
    }
    let grid = SpatialGrid::new(cloud.points(), radius);
    let mut adj = vec![Vec::new(); partition.num_super_points()];
    for (p, &pt) in cloud.points().iter().enumerate() {
        let a = partition.super_point_of(p);
        grid.for_each_within(pt, radius, |q, _| {
            let b = partition.super_point_of(q);
            if a != b {
                adj[a].push(b);
            }
        });
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    Ok(adj)
}

/// Per super point, per detection: whether at least `threshold` of the super
/// point's points visible in the detection's view fall inside the detection.
/// `None` when none of its points are visible in that view.
pub fn inclusion_vectors(
    partition: &SuperPointPartition,
    visibility: &VisibilityMap,
    membership: &MembershipTensor,
    detections: &DetectionSet,
    threshold: f64,
) -> Vec<Vec<Option<bool>>> {
    let s = partition.num_super_points();
    let mut visible = vec![vec![0u32; visibility.num_views()]; s];
    for k in 0..visibility.num_views() {
        for (p, &v) in visibility.view(k).iter().enumerate() {
            if v {
                visible[partition.super_point_of(p)][k] += 1;
            }
        }
    }
    let mut out = vec![vec![None; detections.len()]; s];
    let mut inside = vec![0u32; s];
    for (b, det) in detections.detections.iter().enumerate() {
        inside.iter_mut().for_each(|c| *c = 0);
        for &p in membership.members(b) {
            if visibility.get(det.view, p) {
                inside[partition.super_point_of(p)] += 1;
            }
        }
        for i in 0..s {
            let v = visible[i][det.view];
            out[i][b] = (v > 0).then(|| f64::from(inside[i]) >= threshold * f64::from(v));
        }
    }
    out
}

/// Instance id per super point plus each instance's label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSegmentation {
    per_super_point: Vec<Option<usize>>,
    labels: Vec<usize>,
}

impl InstanceSegmentation {
    pub fn num_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn super_point_instances(&self) -> &[Option<usize>] {
        &self.per_super_point
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn point_instances(&self, partition: &SuperPointPartition) -> Vec<Option<usize>> {
        partition.assignment().iter().map(|&i| self.per_super_point[i]).collect()
    }

    /// Mean winning normalized score over each instance's super points.
    pub fn scores(&self, scores: &ScoreMatrix) -> Vec<f64> {
        let mut sum = vec![0.0; self.labels.len()];
        let mut count = vec![0usize; self.labels.len()];
        for (i, inst) in self.per_super_point.iter().enumerate() {
            if let Some(m) = *inst {
                sum[m] += scores.get(i, self.labels[m]);
                count[m] += 1;
            }
        }
        sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect()
    }

    pub fn to_instance_set(&self, partition: &SuperPointPartition, scores: Option<Vec<f64>>) -> InstanceSet {
        InstanceSet {
            per_point: self.point_instances(partition),
            labels: self.labels.clone(),
            scores,
        }
    }
}

/// Inclusion patterns agree wherever both super points were observed.
pub fn compatible(a: &[Option<bool>], b: &[Option<bool>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.is_none() || y.is_none() || x == y)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components over adjacent super points that share a label and
/// agree on every detection both have evidence for. Null super points get no instance; instances are
/// numbered by their lowest super point.
pub fn merge_instances(labeling: &Labeling, adjacency: &[Vec<usize>], inclusion: &[Vec<Option<bool>>]) -> Result<InstanceSegmentation> {
    let labels = labeling.super_point_labels();
    let s = labels.len();
    if adjacency.len() != s || inclusion.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "{s} labeled super points, {} adjacency rows, {} inclusion rows",
            adjacency.len(),
            inclusion.len()
        )));
    }
    let mut parent: Vec<usize> = (0..s).collect();
    for a in 0..s {
        let Some(la) = labels[a] else { continue };
        for &b in &adjacency[a] {
            if labels[b] == Some(la) && compatible(&inclusion[a], &inclusion[b]) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut id_of_root = vec![None; s];
    let mut inst_labels = Vec::new();
    let mut per_super_point = vec![None; s];
    for i in 0..s {
        let Some(l) = labels[i] else { continue };
        let r = find(&mut parent, i);
        let id = *id_of_root[r].get_or_insert_with(|| {
            inst_labels.push(l);
            inst_labels.len() - 1
        });
        per_super_point[i] = Some(id);
    }
    Ok(InstanceSegmentation {
        per_super_point,
        labels: inst_labels,
    })
}

/// Point-level instances, as read from or written to an instance file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub per_point: Vec<Option<usize>>,
    pub labels: Vec<usize>,
    pub scores: Option<Vec<f64>>,
}

impl InstanceSet {
    pub fn num_instances(&self) -> usize {
        self.labels.len()
    }

    /// Sorted point indices of every instance.
    pub fn point_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.labels.len()];
        for (p, inst) in self.per_point.iter().enumerate() {
            if let Some(m) = *inst {
                sets[m].push(p);
            }
        }
        sets
    }

    /// One instance per part index.
    pub fn from_parts(part_of_point: &[usize], part_labels: &[usize]) -> Self {
        Self {
            per_point: part_of_point.iter().map(|&m| Some(m)).collect(),
            labels: part_labels.to_vec(),
            scores: None,
        }
    }
}

const SCORE_HEADER: &str = "# instance_scores";

/// One line per point: `point_idx instance_id label_id`, `-1 -1` when the
/// point belongs to no instance. Scores go in a leading comment line.
pub fn save_instances(set: &InstanceSet, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(scores) = &set.scores {
        write!(out, "{SCORE_HEADER}").map_err(io)?;
        for s in scores {
            write!(out, " {s}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    for (p, inst) in set.per_point.iter().enumerate() {
        match inst {
            Some(m) => writeln!(out, "{p} {m} {}", set.labels[*m]),
            None => writeln!(out, "{p} -1 -1"),
        }
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_instances(path: &Path) -> Result<InstanceSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scores = None;
    let mut per_point = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix(SCORE_HEADER) {
            let parsed: std::result::Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse).collect();
            scores = Some(parsed.map_err(|_| Error::parse(path, line_no, "bad instance score"))?);
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, line_no, "expected `point_idx instance_id label_id`"));
        }
        let p: usize = fields[0].parse().map_err(|_| Error::parse(path, line_no, "bad point index"))?;
        if p != per_point.len() {
            return Err(Error::parse(path, line_no, format!("expected point {}, found {p}", per_point.len())));
        }
        let inst: i64 = fields[1].parse().map_err(|_| Error::parse(path, line_no, "bad instance id"))?;
        let label: i64 = fields[2].parse().map_err(|_| Error::parse(path, line_no, "bad label id"))?;
        if inst < 0 {
            per_point.push(None);
            continue;
        }
        if label < 0 {
            return Err(Error::parse(path, line_no, "instance without a label"));
        }
        let (inst, label) = (inst as usize, label as usize);
        if labels.len() <= inst {
            labels.resize(inst + 1, None);
        }
        match labels[inst] {
            Some(l) if l != label => {
                return Err(Error::parse(path, line_no, format!("instance {inst} has labels {l} and {label}")));
            }
            _ => labels[inst] = Some(label),
        }
        per_point.push(Some(inst));
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(m, l)| l.ok_or_else(|| Error::parse(path, 0, format!("instance {m} has no points"))))
        .collect::<Result<_>>()?;
    if let Some(s) = &scores {
        if s.len() != labels.len() {
            return Err(Error::parse(path, 1, format!("{} scores for {} instances", s.len(), labels.len())));
        }
    }
    Ok(InstanceSet { per_point, labels, scores })
}

/// IoU of two sorted point-index sets.
pub fn set_iou(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// A scored prediction within one object of a pooled evaluation.
#[derive(Clone, Debug)]
pub struct ScoredInstance<'a> {
    pub object: usize,
    pub points: &'a [usize],
    pub score: f64,
}

/// Average precision at IoU 0.5 with all-point interpolation. Predictions
/// are ranked by score (ties by input order) and greedily matched to the
/// unmatched ground truth of the same object with the highest IoU.
/// `None` when there is no ground truth.
pub fn average_precision(preds: &[ScoredInstance], gts: &[(usize, &[usize])]) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));
    let mut matched = vec![false; gts.len()];
    let mut hits = Vec::with_capacity(preds.len());
    for &i in &order {
        let pred = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, &(object, points)) in gts.iter().enumerate() {
            if matched[g] || object != pred.object {
                continue;
            }
            let iou = set_iou(pred.points, points);
            if iou >= IOU_THRESHOLD && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            matched[g] = true;
        }
        hits.push(best.is_some());
    }
    Some(precision_recall_area(&hits, gts.len()))
}

/// All-point interpolated area under the precision/recall curve of a ranked
/// hit list.
pub fn precision_recall_area(hits: &[bool], num_gt: usize) -> f64 {
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (n, &hit) in hits.iter().enumerate() {
        tp += usize::from(hit);
        precision.push(tp as f64 / (n + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut area = 0.0;
    let mut prev = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        area += (r - prev) * p;
        prev = *r;
    }
    area
}

/// Predicted and ground-truth instances of one object.
#[derive(Clone, Debug)]
pub struct InstanceEvalObject {
    pub category: String,
    pub label_names: Vec<String>,
    pub predicted: InstanceSet,
    pub ground_truth: InstanceSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Matches require equal labels; AP per part, then category, then overall.
    PartAware,
    /// Labels ignored; AP per category, then overall.
    PartAgnostic,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    /// Part-aware AP per category and part.
    pub per_part: BTreeMap<String, BTreeMap<String, f64>>,
    pub part_aware_per_category: BTreeMap<String, f64>,
    pub part_agnostic_per_category: BTreeMap<String, f64>,
    pub part_aware: f64,
    pub part_agnostic: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn pooled_ap(objects: &[(usize, &InstanceEvalObject)], label: Option<usize>) -> Option<f64> {
    let pred_sets: Vec<Vec<Vec<usize>>> = objects.iter().map(|(_, o)| o.predicted.point_sets()).collect();
    let gt_sets: Vec<Vec<Vec<usize>>> = objects.iter().map(|(_, o)| o.ground_truth.point_sets()).collect();
    let keep = |l: usize| label.is_none_or(|want| want == l);
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for (slot, (_, o)) in objects.iter().enumerate() {
        for (m, points) in pred_sets[slot].iter().enumerate() {
            if keep(o.predicted.labels[m]) {
                let score = o.predicted.scores.as_ref().map_or(1.0, |s| s[m]);
                preds.push(ScoredInstance { object: slot, points, score });
            }
        }
        for (m, points) in gt_sets[slot].iter().enumerate() {
            if keep(o.ground_truth.labels[m]) {
                gts.push((slot, points.as_slice()));
            }
        }
    }
    average_precision(&preds, &gts)
}

/// Both mAP variants; categories group objects, parts with no ground truth
/// in a category are skipped.
pub fn map50(objects: &[InstanceEvalObject]) -> ApResult {
    let mut by_category: BTreeMap<&str, Vec<(usize, &InstanceEvalObject)>> = BTreeMap::new();
    for (i, o) in objects.iter().enumerate() {
        by_category.entry(o.category.as_str()).or_default().push((i, o));
    }
    let mut result = ApResult::default();
    for (category, members) in &by_category {
        let names = &members[0].1.label_names;
        let mut parts = BTreeMap::new();
        for (j, name) in names.iter().enumerate() {
            if let Some(ap) = pooled_ap(members, Some(j)) {
                parts.insert(name.clone(), ap);
            }
        }
        if !parts.is_empty() {
            result.part_aware_per_category.insert(category.to_string(), mean(parts.values().copied()));
            result.per_part.insert(category.to_string(), parts);
        }
        if let Some(ap) = pooled_ap(members, None) {
            result.part_agnostic_per_category.insert(category.to_string(), ap);
        }
    }
    result.part_aware = mean(result.part_aware_per_category.values().copied());
    result.part_agnostic = mean(result.part_agnostic_per_category.values().copied());
    result
}

pub fn map50_mode(objects: &[InstanceEvalObject], mode: ApMode) -> f64 {
    let r = map50(objects);
    match mode {
        ApMode::PartAware => r.part_aware,
        ApMode::PartAgnostic => r.part_agnostic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::distance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn partition(assignment: Vec<usize>) -> SuperPointPartition {
        SuperPointPartition::from_assignment(assignment).unwrap()
    }

    #[test]
    fn adjacency_examples() {
        let cloud = PointCloud::new(vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0], [5.0, 0.0, 0.0]]).unwrap();
        let adj = superpoint_adjacency(&cloud, &partition(vec![0, 1, 1, 2]), 0.5).unwrap();
        assert_eq!(adj, vec![vec![1], vec![0], vec![]]);
        assert!(superpoint_adjacency(&cloud, &partition(vec![0, 1, 1, 2]), 0.0).is_err());
    }

    fn brute_adjacency(points: &[[f64; 3]], assignment: &[usize], s: usize, radius: f64) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); s];
        for a in 0..s {
            for b in 0..s {
                if a == b {
                    continue;
                }
                let close = (0..points.len())
                    .filter(|&p| assignment[p] == a)
                    .any(|p| (0..points.len()).filter(|&q| assignment[q] == b).any(|q| distance(points[p], points[q]) < radius));
                if close {
                    adj[a].push(b);
                }
            }
        }
        adj
    }

    #[test]
    fn adjacency_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.random_range(5..=100);
            let s = rng.random_range(1..=n.min(12));
            let points: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
            let assignment: Vec<usize> = (0..n).map(|p| if p < s { p } else { rng.random_range(0..s) }).collect();
            let radius = rng.random_range(0.05..0.4);
            let cloud = PointCloud::new(points.clone()).unwrap();
            let got = superpoint_adjacency(&cloud, &partition(assignment.clone()), radius).unwrap();
            assert_eq!(got, brute_adjacency(&points, &assignment, s, radius));
        }
    }

    fn labeling(labels: Vec<Option<usize>>) -> Labeling {
        let n = labels.len();
        Labeling::from_super_points(&partition((0..n).collect()), labels).unwrap()
    }

    #[test]
    fn merge_rules() {
        let adj = vec![vec![1], vec![0]];
        let same = vec![vec![Some(true), Some(false)], vec![Some(true), Some(false)]];
        let one = merge_instances(&labeling(vec![Some(0), Some(0)]), &adj, &same).unwrap();
        assert_eq!(one.super_point_instances(), &[Some(0), Some(0)]);
        let split = merge_instances(&labeling(vec![Some(0), Some(1)]), &adj, &same).unwrap();
        assert_eq!(split.num_instances(), 2);
        let differ = vec![vec![Some(true)], vec![Some(false)]];
        assert_eq!(merge_instances(&labeling(vec![Some(0), Some(0)]), &adj, &differ).unwrap().num_instances(), 2);
        let unseen = vec![vec![Some(true), None], vec![None, Some(false)]];
        assert_eq!(merge_instances(&labeling(vec![Some(0), Some(0)]), &adj, &unseen).unwrap().num_instances(), 1);
        let null = merge_instances(&labeling(vec![None, Some(0)]), &adj, &same).unwrap();
        assert_eq!(null.super_point_instances(), &[None, Some(0)]);
        assert_eq!(null.labels(), &[0]);
    }

    fn random_merge_case(seed: u64) -> (Vec<Option<usize>>, Vec<Vec<usize>>, Vec<Vec<Option<bool>>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = rng.random_range(1..25);
        let labels: Vec<Option<usize>> = (0..s).map(|_| if rng.random_bool(0.15) { None } else { Some(rng.random_range(0..3)) }).collect();
        let mut adj = vec![Vec::new(); s];
        for a in 0..s {
            for b in a + 1..s {
                if rng.random_bool(0.3) {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        let b = rng.random_range(0..4);
        let inclusion = (0..s).map(|_| (0..b).map(|_| rng.random_bool(0.8).then(|| rng.random_bool(0.7))).collect()).collect();
        (labels, adj, inclusion)
    }

    proptest! {
        #[test]
        fn merge_properties(seed in 0u64..10_000) {
            let (labels, adj, inclusion) = random_merge_case(seed);
            let seg = merge_instances(&labeling(labels.clone()), &adj, &inclusion).unwrap();
            let inst = seg.super_point_instances();
            let non_null = labels.iter().filter(|l| l.is_some()).count();
            prop_assert!(seg.num_instances() <= non_null);
            // Contiguous ids, consistent labels, null excluded.
            let mut seen = vec![false; seg.num_instances()];
            for (i, m) in inst.iter().enumerate() {
                prop_assert_eq!(m.is_none(), labels[i].is_none());
                if let Some(m) = *m {
                    seen[m] = true;
                    prop_assert_eq!(Some(seg.labels()[m]), labels[i]);
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            // Instances are the components of the mergeable-edge graph (flood-fill oracle).
            let s = labels.len();
            let mut comp = vec![usize::MAX; s];
            for start in 0..s {
                if labels[start].is_none() || comp[start] != usize::MAX {
                    continue;
                }
                comp[start] = start;
                let mut stack = vec![start];
                while let Some(a) = stack.pop() {
                    for &b in &adj[a] {
                        if comp[b] == usize::MAX && labels[b] == labels[a] && compatible(&inclusion[a], &inclusion[b]) {
                            comp[b] = start;
                            stack.push(b);
                        }
                    }
                }
            }
            for a in 0..s {
                for b in 0..s {
                    if labels[a].is_some() && labels[b].is_some() {
                        prop_assert_eq!(comp[a] == comp[b], inst[a] == inst[b]);
                    }
                }
            }
            // Edge order does not matter.
            let reversed: Vec<Vec<usize>> = adj.iter().map(|l| l.iter().rev().copied().collect()).collect();
            let again = merge_instances(&labeling(labels), &reversed, &inclusion).unwrap();
            prop_assert_eq!(again, seg);
        }
    }

    fn set(per_point: Vec<Option<usize>>, labels: Vec<usize>, scores: Option<Vec<f64>>) -> InstanceSet {
        InstanceSet { per_point, labels, scores }
    }

    fn object(pred: InstanceSet, gt: InstanceSet) -> InstanceEvalObject {
        InstanceEvalObject {
            category: "c".into(),
            label_names: vec!["a".into(), "b".into()],
            predicted: pred,
            ground_truth: gt,
        }
    }

    #[test]
    fn map_identity_and_empty() {
        let gt = set(vec![Some(0), Some(0), Some(1), Some(1), None], vec![0, 1], None);
        let r = map50(&[object(gt.clone(), gt.clone())]);
        assert_eq!((r.part_aware, r.part_agnostic), (1.0, 1.0));
        let empty = set(vec![None; 5], vec![], Some(vec![]));
        let r = map50(&[object(empty, gt)]);
        assert_eq!((r.part_aware, r.part_agnostic), (0.0, 0.0));
    }

    #[test]
    fn hand_computed_pr_curve() {
        // Singletons: gt {0},{1},{2}; predictions ranked hit, miss, hit.
        let gt = set(vec![Some(0), Some(1), Some(2), None], vec![0, 0, 0], None);
        let pred = set(vec![Some(0), Some(2), None, Some(1)], vec![0, 0, 0], Some(vec![0.9, 0.5, 0.3]));
        // Ranked: pred0 (pt 0, hit), pred1 (pt 3, miss), pred2 (pt 1, hit).
        // Precision 1, 1/2, 2/3; recall 1/3, 1/3, 2/3 -> area 1/3 + 1/3 * 2/3.
        let ap = map50(&[object(pred, gt)]).per_part["c"]["a"];
        assert!((ap - (1.0 / 3.0 + 2.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn label_confusion_only_hurts_part_aware() {
        let gt = set(vec![Some(0), Some(0), Some(1), Some(1)], vec![0, 1], None);
        let pred = set(vec![Some(0), Some(0), Some(1), Some(1)], vec![1, 0], Some(vec![0.8, 0.6]));
        let r = map50(&[object(pred, gt)]);
        assert_eq!(r.part_agnostic, 1.0);
        assert!(r.part_agnostic >= r.part_aware);
        assert_eq!(r.part_aware, 0.0);
    }

    #[test]
    fn instance_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.txt");
        let s = set(vec![Some(1), None, Some(0), Some(1)], vec![2, 0], Some(vec![0.25, 0.75]));
        save_instances(&s, &path).unwrap();
        assert_eq!(load_instances(&path).unwrap(), s);
        let plain = set(vec![Some(0), Some(0)], vec![1], None);
        save_instances(&plain, &path).unwrap();
        assert_eq!(load_instances(&path).unwrap(), plain);
        fs::write(&path, "0 0 1\n1 0 2\n").unwrap();
        assert!(matches!(load_instances(&path), Err(Error::Parse { line: 2, .. })));
    }
}
