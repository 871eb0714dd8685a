//! Few-shot training of the weight network, plus the confidence-as-weight
//! baseline.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::{compute_membership, DetectionSet, MembershipMode, MembershipTensor};
use crate::error::{Error, Result};
use crate::geom::{Camera, Scene, VisibilityMap};
use crate::loss::{cross_entropy_grad, cross_entropy_loss, lift_grad, lift_scores, miou_hard, mriou_grad, mriou_loss, GroundTruth};
use crate::vote::{assign_labels, normalize_scores, score_weighted, score_weighted_taped, softmax_backward, Labeling, ScoreMatrix, DEFAULT_NULL_SCORE};
use crate::weightnet::{assemble_inputs, backward, forward, EncodedBatch, InitScheme, ParamGrads, WeightNetParams, DEFAULT_HIDDEN, DEFAULT_PE_FREQS, DEFAULT_TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mriou,
    CrossEntropy,
    /// `(1 - mix) * mriou + mix * cross_entropy`.
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Decoupled decay on the two weight matrices; biases and the null
    /// score are not decayed.
    pub weight_decay: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub mix: f64,
    pub tau: f64,
    pub pe_freqs: usize,
    pub hidden: usize,
    pub null_score: f64,
    pub init: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            seed: 0,
            loss: LossKind::Mriou,
            mix: 0.5,
            tau: DEFAULT_TAU,
            pe_freqs: DEFAULT_PE_FREQS,
            hidden: DEFAULT_HIDDEN,
            null_score: DEFAULT_NULL_SCORE,
            init: InitScheme::ZeroOutput,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be finite and nonnegative, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return bad(format!("loss mix must lie in [0, 1], got {}", self.mix));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be finite and nonnegative, got {}", self.weight_decay));
        }
        if !(self.tau > 0.0) || self.hidden == 0 {
            return bad("tau and hidden width must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss at the start of each epoch.
    pub loss: Vec<f64>,
    /// Mean training mIoU at the start of each epoch.
    pub train_miou: Vec<f64>,
    pub final_loss: f64,
    pub final_train_miou: f64,
    pub validation_miou: Option<f64>,
    /// Only filled when timing is requested, so reports stay reproducible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One annotated object with everything the vote needs precomputed.
#[derive(Clone, Debug)]
pub struct TrainObject {
    pub scene: Scene,
    pub detections: DetectionSet,
    pub cameras: Vec<Camera>,
    pub visibility: VisibilityMap,
    pub membership: MembershipTensor,
    gt: GroundTruth,
}

impl TrainObject {
    pub fn new(scene: Scene, detections: DetectionSet, cameras: Vec<Camera>, visibility: VisibilityMap, mode: MembershipMode) -> Result<Self> {
        let membership = compute_membership(&scene.cloud, &cameras, &detections, mode)?;
        Self::with_membership(scene, detections, cameras, visibility, membership)
    }

    pub fn with_membership(scene: Scene, detections: DetectionSet, cameras: Vec<Camera>, visibility: VisibilityMap, membership: MembershipTensor) -> Result<Self> {
        if detections.num_labels() != scene.num_labels() {
            return Err(Error::DimensionMismatch(format!(
                "scene has {} labels, detections {}",
                scene.num_labels(),
                detections.num_labels()
            )));
        }
        let gt = GroundTruth::new(scene.gt.clone(), scene.num_labels())?;
        Ok(Self {
            scene,
            detections,
            cameras,
            visibility,
            membership,
            gt,
        })
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.gt
    }

    pub fn encode(&self, pe_freqs: usize) -> Result<EncodedBatch> {
        assemble_inputs(&self.detections, &self.cameras, pe_freqs)
    }

    /// Softmax-normalized scores for the given per-detection weights.
    pub fn normalized_scores(&self, weights: &[f64], null_score: f64) -> Result<ScoreMatrix> {
        let raw = score_weighted(&self.scene.partition, &self.visibility, &self.membership, &self.detections, weights)?;
        normalize_scores(&raw, null_score)
    }

    pub fn labeling_for_weights(&self, weights: &[f64], null_score: f64) -> Result<Labeling> {
        let scores = self.normalized_scores(weights, null_score)?;
        Ok(assign_labels(&scores, &self.scene.partition, 0.0))
    }

    pub fn miou_for_weights(&self, weights: &[f64], null_score: f64) -> Result<f64> {
        miou_hard(&self.gt, self.labeling_for_weights(weights, null_score)?.point_labels())
    }
}

fn check_objects(objects: &[TrainObject]) -> Result<()> {
    let Some(first) = objects.first() else {
        return Err(Error::InvalidArgument("training needs at least one object".into()));
    };
    let (l, d) = (first.scene.num_labels(), first.detections.feature_dim);
    if let Some(i) = objects.iter().position(|o| o.scene.num_labels() != l || o.detections.feature_dim != d) {
        return Err(Error::DimensionMismatch(format!(
            "object {i} disagrees with object 0 on label count or feature dimension"
        )));
    }
    Ok(())
}

struct Prepared<'a> {
    object: &'a TrainObject,
    inputs: EncodedBatch,
}

fn prepare<'a>(objects: &'a [TrainObject], pe_freqs: usize) -> Result<Vec<Prepared<'a>>> {
    objects
        .iter()
        .map(|object| Ok(Prepared { object, inputs: object.encode(pe_freqs)? }))
        .collect()
}

/// Loss of one object and, when requested, its gradient with respect to
/// every parameter including the null score.
fn object_step(params: &WeightNetParams, p: &Prepared, loss_kind: LossKind, mix: f64, want_grad: bool) -> Result<(f64, Option<ParamGrads>)> {
    let obj = p.object;
    let partition = &obj.scene.partition;
    let (weights, cache) = forward(params, &p.inputs)?;
    let (raw, tape) = score_weighted_taped(partition, &obj.visibility, &obj.membership, &obj.detections, &weights)?;
    let norm = normalize_scores(&raw, params.null_score)?;
    let (s, cols) = (norm.num_super_points(), norm.cols());
    let (w_iou, w_ce) = match loss_kind {
        LossKind::Mriou => (1.0, 0.0),
        LossKind::CrossEntropy => (0.0, 1.0),
        LossKind::Both => (1.0 - mix, mix),
    };
    let mut loss = 0.0;
    let mut grad = vec![0.0; s * cols];
    if w_iou > 0.0 {
        let pred = lift_scores(partition, &norm.label_columns())?;
        loss += w_iou * mriou_loss(&obj.gt, &pred)?;
        if want_grad {
            let per_sp = lift_grad(partition, &mriou_grad(&obj.gt, &pred)?);
            for (j, col) in per_sp.iter().enumerate() {
                for (i, &g) in col.iter().enumerate() {
                    grad[i * cols + j] += w_iou * g;
                }
            }
        }
    }
    if w_ce > 0.0 {
        let probs: Vec<Vec<f64>> = partition.assignment().iter().map(|&i| norm.row(i).to_vec()).collect();
        loss += w_ce * cross_entropy_loss(&obj.gt, &probs)?.value;
        if want_grad {
            for (pt, g) in cross_entropy_grad(&obj.gt, &probs)?.iter().enumerate() {
                let i = partition.super_point_of(pt);
                for (c, &v) in g.iter().enumerate() {
                    grad[i * cols + c] += w_ce * v;
                }
            }
        }
    }
    if !want_grad {
        return Ok((loss, None));
    }
    let (raw_grad, null_grad) = softmax_backward(&norm, &grad);
    let weight_grad = tape.weight_grad(&raw_grad);
    let (mut grads, _) = backward(params, &cache, &weight_grad)?;
    grads.null_score = null_grad;
    Ok((loss, Some(grads)))
}

/// Mean loss over objects with its gradient (flattened parameter order).
pub fn objective_and_grad(params: &WeightNetParams, objects: &[TrainObject], loss: LossKind, mix: f64) -> Result<(f64, Vec<f64>)> {
    let prepared = prepare(objects, params.pe_freqs)?;
    let mut total = 0.0;
    let mut grad = vec![0.0; params.num_parameters()];
    for p in &prepared {
        let (value, g) = object_step(params, p, loss, mix, true)?;
        total += value;
        for (a, b) in grad.iter_mut().zip(g.expect("gradient requested").flatten()) {
            *a += b;
        }
    }
    let n = prepared.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Mean loss over objects.
pub fn objective(params: &WeightNetParams, objects: &[TrainObject], loss: LossKind, mix: f64) -> Result<f64> {
    let prepared = prepare(objects, params.pe_freqs)?;
    let mut total = 0.0;
    for p in &prepared {
        total += object_step(params, p, loss, mix, false)?.0;
    }
    Ok(total / prepared.len().max(1) as f64)
}

/// Predicted weights for one object.
pub fn predict_weights(params: &WeightNetParams, object: &TrainObject) -> Result<Vec<f64>> {
    Ok(forward(params, &object.encode(params.pe_freqs)?)?.0)
}

pub fn predict_labeling(params: &WeightNetParams, object: &TrainObject) -> Result<Labeling> {
    object.labeling_for_weights(&predict_weights(params, object)?, params.null_score)
}

/// Mean hard-label mIoU over objects.
pub fn evaluate(params: &WeightNetParams, objects: &[TrainObject]) -> Result<f64> {
    mean_over(objects, |o| miou_hard(o.ground_truth(), predict_labeling(params, o)?.point_labels()))
}

/// Mean mIoU when every detection gets weight `tau`.
pub fn evaluate_uniform(objects: &[TrainObject], tau: f64, null_score: f64) -> Result<f64> {
    mean_over(objects, |o| o.miou_for_weights(&vec![tau; o.detections.len()], null_score))
}

fn mean_over(objects: &[TrainObject], f: impl Fn(&TrainObject) -> Result<f64>) -> Result<f64> {
    if objects.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for o in objects {
        total += f(o)?;
    }
    Ok(total / objects.len() as f64)
}

/// First-order optimizer over the flattened parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    decay: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    /// `decay_mask[i]` is true for entries that receive weight decay.
    pub fn new(cfg: &TrainConfig, decay_mask: &[bool]) -> Self {
        let num_parameters = decay_mask.len();
        Self {
            kind: cfg.optimizer,
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            decay: decay_mask.iter().map(|&d| if d { cfg.weight_decay } else { 0.0 }).collect(),
            m: vec![0.0; num_parameters],
            v: vec![0.0; num_parameters],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        for (p, d) in params.iter_mut().zip(&self.decay) {
            *p -= self.lr * d * *p;
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - self.beta1.powi(self.t);
                let c2 = 1.0 - self.beta2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
    }
}

/// Weight-matrix entries of the flattened parameter vector.
pub fn decay_mask(params: &WeightNetParams) -> Vec<bool> {
    let mut mask = vec![true; params.w1.len()];
    mask.extend(std::iter::repeat_n(false, params.b1.len()));
    mask.extend(std::iter::repeat_n(true, params.w2.len()));
    mask.extend([false, false]);
    mask
}

/// Fresh parameters for objects with `feature_dim`-dimensional features.
pub fn init_params(cfg: &TrainConfig, feature_dim: usize) -> Result<WeightNetParams> {
    WeightNetParams::init(feature_dim, cfg.hidden, cfg.pe_freqs, cfg.tau, cfg.null_score, cfg.seed, cfg.init)
}

pub fn train(objects: &[TrainObject], cfg: &TrainConfig) -> Result<(WeightNetParams, TrainReport)> {
    train_with_validation(objects, &[], cfg)
}

/// One object per step, objects shuffled per epoch with the config seed.
pub fn train_with_validation(objects: &[TrainObject], validation: &[TrainObject], cfg: &TrainConfig) -> Result<(WeightNetParams, TrainReport)> {
    cfg.validate()?;
    check_objects(objects)?;
    let mut params = init_params(cfg, objects[0].detections.feature_dim)?;
    let prepared = prepare(objects, cfg.pe_freqs)?;
    let mut opt = Optimizer::new(cfg, &decay_mask(&params));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut miou_history = Vec::with_capacity(cfg.epochs);
    let mean_loss = |params: &WeightNetParams| -> Result<f64> {
        let mut total = 0.0;
        for p in &prepared {
            total += object_step(params, p, cfg.loss, cfg.mix, false)?.0;
        }
        Ok(total / prepared.len() as f64)
    };
    for epoch in 0..cfg.epochs {
        let loss = mean_loss(&params)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        loss_history.push(loss);
        miou_history.push(evaluate(&params, objects)?);
        order.shuffle(&mut rng);
        for &i in &order {
            let (loss, grads) = object_step(&params, &prepared[i], cfg.loss, cfg.mix, true)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let mut flat = params.flatten();
            opt.step(&mut flat, &grads.expect("gradient requested").flatten());
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch, loss: f64::NAN });
            }
            params.set_flat(&flat)?;
        }
    }
    let final_loss = mean_loss(&params)?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged { epoch: cfg.epochs, loss: final_loss });
    }
    let report = TrainReport {
        loss: loss_history,
        train_miou: miou_history,
        final_loss,
        final_train_miou: evaluate(&params, objects)?,
        validation_miou: if validation.is_empty() { None } else { Some(evaluate(&params, validation)?) },
        wall_time_s: None,
    };
    Ok((params, report))
}

/// Like [`train_with_validation`], recording wall-clock time in the report.
pub fn train_timed(objects: &[TrainObject], validation: &[TrainObject], cfg: &TrainConfig) -> Result<(WeightNetParams, TrainReport)> {
    let started = Instant::now();
    let (params, mut report) = train_with_validation(objects, validation, cfg)?;
    report.wall_time_s = Some(started.elapsed().as_secs_f64());
    Ok((params, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// Weight = detection confidence.
    Raw,
    /// Confidences rescaled so the weights sum to `count * tau`.
    Normalized,
}

pub fn confidence_weights(dets: &DetectionSet, mode: ConfidenceMode, tau: f64) -> Vec<f64> {
    let conf: Vec<f64> = dets.detections.iter().map(|d| d.confidence).collect();
    match mode {
        ConfidenceMode::Raw => conf,
        ConfidenceMode::Normalized => {
            let sum: f64 = conf.iter().sum();
            if sum <= 0.0 {
                return vec![tau; conf.len()];
            }
            let scale = conf.len() as f64 * tau / sum;
            conf.iter().map(|c| c * scale).collect()
        }
    }
}

/// Mean mIoU with confidences as detection weights, through the softmax path.
pub fn evaluate_confidence_baseline(objects: &[TrainObject], mode: ConfidenceMode, tau: f64, null_score: f64) -> Result<f64> {
    mean_over(objects, |o| o.miou_for_weights(&confidence_weights(&o.detections, mode, tau), null_score))
}

pub fn save_report(report: &TrainReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))
}
