//! Central finite-difference checks of the analytic gradients: the loss on
//! its own, the weight network on its own, and the whole chain from
//! network parameters through weighted voting, softmax and lifting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detect::{Detection, DetectionSet, MembershipTensor};
use crate::error::Result;
use crate::geom::{fixed_viewpoints_with, PointCloud, Scene, SuperPointPartition, VisibilityMap};
use crate::loss::{mriou_grad, mriou_loss, GroundTruth, SoftPrediction};
use crate::train::{objective, objective_and_grad, LossKind, TrainObject};
use crate::weightnet::{backward, forward, EncodedBatch, InitScheme, WeightNetParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub seed: u64,
    pub step: f64,
    /// Step for the loss-only and network-only checks.
    pub module_step: f64,
    /// Bound on the end-to-end relative error.
    pub tolerance: f64,
    /// Bound on the loss-only and network-only relative errors.
    pub module_tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            seed: 0,
            step: 1e-5,
            module_step: 1e-4,
            tolerance: 1e-3,
            module_tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub seed: u64,
    pub points: usize,
    pub super_points: usize,
    pub labels: usize,
    pub detections: usize,
    pub parameters: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub end_to_end: Vec<InstanceCheck>,
    pub loss_max_rel_error: f64,
    pub weightnet_max_rel_error: f64,
    pub passed: bool,
}

/// Gradients this small on both sides count as agreeing in absolute terms.
const GRAD_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Central difference. When the one-sided slopes disagree, a ReLU kink or
/// an argmax switch lies within the step, so the step shrinks and retries.
fn central(f: &mut dyn FnMut(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let f0 = f(0.0)?;
    let mut step = h;
    let mut estimate = 0.0;
    for _ in 0..4 {
        let (up, down) = (f(step)?, f(-step)?);
        let (fwd, bwd) = ((up - f0) / step, (f0 - down) / step);
        estimate = (up - down) / (2.0 * step);
        if (fwd - bwd).abs() <= 1e-2 * fwd.abs().max(bwd.abs()).max(GRAD_FLOOR) {
            break;
        }
        step /= 10.0;
    }
    Ok(estimate)
}

/// A small random object: at most 30 points, 6 super points, 4 labels and
/// 12 detections, with random visibility and membership.
pub fn random_instance(seed: u64) -> Result<(WeightNetParams, TrainObject)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(8..=30);
    let s = rng.random_range(2..=6);
    let l = rng.random_range(1..=4);
    let k = rng.random_range(1..=3);
    let b = rng.random_range(1..=12);
    let d = 3;
    let points: Vec<[f64; 3]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let assignment: Vec<usize> = (0..n).map(|p| if p < s { p } else { rng.random_range(0..s) }).collect();
    let gt: Vec<Option<usize>> = (0..n).map(|_| if rng.random_bool(0.15) { None } else { Some(rng.random_range(0..l)) }).collect();
    let labels: Vec<String> = (0..l).map(|j| format!("part{j}")).collect();
    let scene = Scene::new(PointCloud::new(points)?, SuperPointPartition::new(assignment, s)?, gt, labels.clone())?;
    let cameras = fixed_viewpoints_with(k, 2.2, 100, 100)?;
    let visibility = VisibilityMap::from_views((0..k).map(|_| (0..n).map(|_| rng.random_bool(0.7)).collect()).collect())?;
    let mut detections = Vec::with_capacity(b);
    let mut members = Vec::with_capacity(b);
    for _ in 0..b {
        let (x0, y0) = (rng.random_range(0.0..60.0), rng.random_range(0.0..60.0));
        detections.push(Detection {
            view: rng.random_range(0..k),
            label: rng.random_range(0..l),
            bbox: [x0, y0, x0 + rng.random_range(5.0..40.0), y0 + rng.random_range(5.0..40.0)],
            mask: None,
            feature: (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            confidence: rng.random_range(0.0..1.0),
        });
        members.push((0..n).filter(|_| rng.random_bool(0.5)).collect());
    }
    let dets = DetectionSet::new(k, labels, d, 100, 100, detections)?;
    let membership = MembershipTensor::from_members(n, members)?;
    let object = TrainObject::with_membership(scene, dets, cameras, visibility, membership)?;

    let mut params = WeightNetParams::init(d, 8, 2, 1.0, 0.0, seed, InitScheme::Gaussian)?;
    let normal = Normal::new(0.0, 0.5).expect("valid std");
    let mut flat: Vec<f64> = (0..params.num_parameters()).map(|_| normal.sample(&mut rng)).collect();
    // Keep the hinge active and the null logit comparable to the scores.
    let nb = flat.len();
    flat[nb - 2] = rng.random_range(0.5..1.5);
    flat[nb - 1] = rng.random_range(0.0..1.5);
    params.set_flat(&flat)?;
    Ok((params, object))
}

/// Largest relative error over all parameters of one random instance.
pub fn check_end_to_end(seed: u64, step: f64, loss: LossKind) -> Result<InstanceCheck> {
    let (params, object) = random_instance(seed)?;
    let objects = std::slice::from_ref(&object);
    let (_, analytic) = objective_and_grad(&params, objects, loss, 0.5)?;
    let base = params.flatten();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut probe = params.clone();
        let mut f = |delta: f64| {
            let mut v = base.clone();
            v[i] += delta;
            probe.set_flat(&v)?;
            objective(&probe, objects, loss, 0.5)
        };
        worst = worst.max(relative_error(analytic[i], central(&mut f, step)?));
    }
    Ok(InstanceCheck {
        seed,
        points: object.scene.cloud.len(),
        super_points: object.scene.partition.num_super_points(),
        labels: object.scene.num_labels(),
        detections: object.detections.len(),
        parameters: base.len(),
        max_rel_error: worst,
    })
}

/// Relaxed mIoU loss against its analytic gradient on random soft predictions.
pub fn check_loss(seed: u64, step: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=30);
    let l = rng.random_range(1..=4);
    let gt = GroundTruth::new((0..n).map(|_| if rng.random_bool(0.2) { None } else { Some(rng.random_range(0..l)) }).collect(), l)?;
    let values: Vec<Vec<f64>> = (0..l).map(|_| (0..n).map(|_| rng.random_range(0.05..0.95)).collect()).collect();
    let analytic = mriou_grad(&gt, &SoftPrediction::new(values.clone(), n)?)?;
    let mut worst: f64 = 0.0;
    for j in 0..l {
        for p in 0..n {
            let mut f = |delta: f64| {
                let mut v = values.clone();
                v[j][p] += delta;
                mriou_loss(&gt, &SoftPrediction::new(v, n)?)
            };
            worst = worst.max(relative_error(analytic[j][p], central(&mut f, step)?));
        }
    }
    Ok(worst)
}

/// Network parameters and inputs against a random linear functional of the weights.
pub fn check_weightnet(seed: u64, step: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = WeightNetParams::init(2, 6, 1, 1.0, 0.0, seed, InitScheme::Gaussian)?;
    let normal = Normal::new(0.0, 0.7).expect("valid std");
    let flat: Vec<f64> = (0..params.num_parameters()).map(|_| normal.sample(&mut rng)).collect();
    params.set_flat(&flat)?;
    let rows = rng.random_range(3..=8);
    let dim = params.input_dim;
    let inputs: Vec<Vec<f64>> = (0..rows).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let coeff: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    let batch = EncodedBatch::new(dim, inputs.clone())?;
    let (_, cache) = forward(&params, &batch)?;
    let (grads, input_grads) = backward(&params, &cache, &coeff)?;
    let value = |p: &WeightNetParams, rows: Vec<Vec<f64>>| -> Result<f64> {
        let (w, _) = forward(p, &EncodedBatch::new(dim, rows)?)?;
        Ok(w.iter().zip(&coeff).map(|(w, c)| w * c).sum())
    };
    let analytic = grads.flatten();
    let mut worst: f64 = 0.0;
    // The null score does not enter the network.
    for i in 0..flat.len() - 1 {
        let mut probe = params.clone();
        let mut f = |delta: f64| {
            let mut v = flat.clone();
            v[i] += delta;
            probe.set_flat(&v)?;
            value(&probe, inputs.clone())
        };
        worst = worst.max(relative_error(analytic[i], central(&mut f, step)?));
    }
    for r in 0..rows {
        for c in 0..dim {
            let mut f = |delta: f64| {
                let mut x = inputs.clone();
                x[r][c] += delta;
                value(&params, x)
            };
            worst = worst.max(relative_error(input_grads[r][c], central(&mut f, step)?));
        }
    }
    Ok(worst)
}

/// Runs every suite with seeds derived from `cfg.seed`.
pub fn run(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut end_to_end = Vec::with_capacity(cfg.instances);
    let (mut loss_err, mut net_err): (f64, f64) = (0.0, 0.0);
    for i in 0..cfg.instances as u64 {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i);
        end_to_end.push(check_end_to_end(seed, cfg.step, LossKind::Mriou)?);
        loss_err = loss_err.max(check_loss(seed, cfg.module_step)?);
        net_err = net_err.max(check_weightnet(seed, cfg.module_step)?);
    }
    let passed = end_to_end.iter().all(|c| c.max_rel_error < cfg.tolerance) && loss_err < cfg.module_tolerance && net_err < cfg.module_tolerance;
    Ok(GradcheckReport {
        end_to_end,
        loss_max_rel_error: loss_err,
        weightnet_max_rel_error: net_err,
        passed,
    })
}
