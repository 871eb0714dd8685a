//! Per-detection weight prediction: positional encoding, input assembly,
//! a two-layer MLP with context normalization, and the offset hinge
//! `max(tau + x, 0)`, with a hand-written backward pass.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detect::DetectionSet;
use crate::error::{Error, Result};
use crate::geom::Camera;

pub const DEFAULT_TAU: f64 = 10.0;
pub const DEFAULT_HIDDEN: usize = 256;
pub const DEFAULT_PE_FREQS: usize = 10;
pub const INIT_STD: f64 = 1e-4;
pub const CN_EPS: f64 = 1e-8;
const CHECKPOINT_VERSION: u32 = 1;

/// `(x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x))`
/// for every coordinate, concatenated.
pub fn positional_encoding(x: &[f64], freqs: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() * (2 * freqs + 1));
    for &v in x {
        out.push(v);
        let mut w = std::f64::consts::PI;
        for _ in 0..freqs {
            out.push((w * v).sin());
            out.push((w * v).cos());
            w *= 2.0;
        }
    }
    out
}

/// Encoded input width for raw features of dimension `feature_dim`.
pub fn encoded_dim(feature_dim: usize, freqs: usize) -> usize {
    feature_dim + 5 * (2 * freqs + 1)
}

/// One encoded row per detection.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedBatch {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl EncodedBatch {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} features, expected {dim}",
                rows[i].len()
            )));
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Concatenates each detection's feature with the encoded view direction
/// and the encoded box center (normalized to the unit square).
pub fn assemble_inputs(dets: &DetectionSet, cameras: &[Camera], freqs: usize) -> Result<EncodedBatch> {
    if cameras.len() != dets.num_views {
        return Err(Error::DimensionMismatch(format!(
            "{} cameras for {} views",
            cameras.len(),
            dets.num_views
        )));
    }
    let dim = encoded_dim(dets.feature_dim, freqs);
    let mut rows = Vec::with_capacity(dets.len());
    for (i, d) in dets.detections.iter().enumerate() {
        if d.feature.len() != dets.feature_dim {
            return Err(Error::InvalidDetection {
                index: i,
                reason: format!("feature has {} entries, expected {}", d.feature.len(), dets.feature_dim),
            });
        }
        let cam = cameras.get(d.view).ok_or_else(|| Error::InvalidDetection {
            index: i,
            reason: format!("view {} has no camera", d.view),
        })?;
        let mut row: Vec<f64> = d.feature.iter().map(|&v| f64::from(v)).collect();
        row.extend(positional_encoding(&cam.direction, freqs));
        row.extend(positional_encoding(&d.center_normalized(dets.width, dets.height), freqs));
        rows.push(row);
    }
    EncodedBatch::new(dim, rows)
}

/// Standardizes every column across rows: population variance,
/// denominator `sqrt(var + CN_EPS)`.
pub fn context_normalize(batch: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = batch.first() else {
        return Vec::new();
    };
    let (n, cols) = (batch.len() as f64, first.len());
    let mut out = batch.to_vec();
    for c in 0..cols {
        let mean = batch.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = batch.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        let s = (var + CN_EPS).sqrt();
        for r in &mut out {
            r[c] = (r[c] - mean) / s;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// First layer from `N(0, INIT_STD^2)`, output layer zero: every
    /// initial weight is exactly `tau`.
    #[default]
    ZeroOutput,
    /// Every parameter from `N(0, INIT_STD^2)`.
    Gaussian,
}

/// Network parameters plus the learnable null score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightNetParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub pe_freqs: usize,
    /// `input_dim x hidden`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub tau: f64,
    pub null_score: f64,
    pub seed: u64,
}

/// Gradients with the same layout as [`WeightNetParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub null_score: f64,
}

impl ParamGrads {
    pub fn zeros(params: &WeightNetParams) -> Self {
        Self {
            w1: vec![0.0; params.w1.len()],
            b1: vec![0.0; params.hidden],
            w2: vec![0.0; params.hidden],
            b2: 0.0,
            null_score: 0.0,
        }
    }

    /// `w1, b1, w2, b2, null_score` concatenated.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.b1.len() + 2);
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v.push(self.null_score);
        v
    }
}

impl WeightNetParams {
    pub fn init(feature_dim: usize, hidden: usize, pe_freqs: usize, tau: f64, null_score: f64, seed: u64, scheme: InitScheme) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if !null_score.is_finite() {
            return Err(Error::InvalidArgument("null score must be finite".into()));
        }
        let input_dim = encoded_dim(feature_dim, pe_freqs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(&mut rng)).collect() };
        let w1 = draw(input_dim * hidden);
        let b1 = draw(hidden);
        let (w2, b2) = match scheme {
            InitScheme::ZeroOutput => (vec![0.0; hidden], 0.0),
            InitScheme::Gaussian => (draw(hidden), draw(1)[0]),
        };
        Ok(Self {
            input_dim,
            hidden,
            pe_freqs,
            w1,
            b1,
            w2,
            b2,
            tau,
            null_score,
            seed,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.input_dim - 5 * (2 * self.pe_freqs + 1)
    }

    pub fn num_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 2
    }

    /// Same order as [`ParamGrads::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_parameters());
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v.push(self.null_score);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_parameters()
            )));
        }
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, rest) = rest.split_at(self.hidden);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
        self.null_score = rest[1];
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Checkpoint(m));
        if self.hidden == 0 || self.input_dim < 5 * (2 * self.pe_freqs + 1) {
            return bad(format!("input {} / hidden {} inconsistent with {} frequencies", self.input_dim, self.hidden, self.pe_freqs));
        }
        if self.w1.len() != self.input_dim * self.hidden {
            return bad(format!("w1 has {} entries, expected {}x{}", self.w1.len(), self.input_dim, self.hidden));
        }
        if self.b1.len() != self.hidden || self.w2.len() != self.hidden {
            return bad(format!("b1/w2 lengths {}/{} differ from hidden width {}", self.b1.len(), self.w2.len(), self.hidden));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !self.flatten().iter().all(|v| v.is_finite()) || !self.tau.is_finite() {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    normalized: Vec<Vec<f64>>,
    col_std: Vec<f64>,
    hidden: Vec<Vec<f64>>,
    pre_hinge: Vec<f64>,
}

impl ForwardCache {
    /// Second-layer outputs before the hinge.
    pub fn mlp_output(&self) -> &[f64] {
        &self.pre_hinge
    }
}

fn check_batch(params: &WeightNetParams, batch: &EncodedBatch) -> Result<()> {
    if batch.dim() != params.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "batch has {} input features, network expects {}",
            batch.dim(),
            params.input_dim
        )));
    }
    Ok(())
}

/// Per-detection weights `max(tau + mlp(x), 0)`.
pub fn forward(params: &WeightNetParams, batch: &EncodedBatch) -> Result<(Vec<f64>, ForwardCache)> {
    check_batch(params, batch)?;
    let h = params.hidden;
    let pre: Vec<Vec<f64>> = batch
        .rows()
        .iter()
        .map(|x| {
            let mut z = params.b1.clone();
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &params.w1[i * h..(i + 1) * h];
                for (zk, wk) in z.iter_mut().zip(row) {
                    *zk += xi * wk;
                }
            }
            z
        })
        .collect();
    let n = pre.len() as f64;
    let col_std: Vec<f64> = (0..h)
        .map(|c| {
            let mean = pre.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = pre.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
            (var + CN_EPS).sqrt()
        })
        .collect();
    let normalized = context_normalize(&pre);
    let hidden: Vec<Vec<f64>> = normalized
        .iter()
        .map(|r| r.iter().map(|&v| v.max(0.0)).collect())
        .collect();
    let pre_hinge: Vec<f64> = hidden
        .iter()
        .map(|a| a.iter().zip(&params.w2).map(|(a, w)| a * w).sum::<f64>() + params.b2)
        .collect();
    if let Some(b) = pre_hinge.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!("network output for detection {b}")));
    }
    let weights = pre_hinge.iter().map(|&o| (params.tau + o).max(0.0)).collect();
    Ok((
        weights,
        ForwardCache {
            inputs: batch.rows().to_vec(),
            normalized,
            col_std,
            hidden,
            pre_hinge,
        },
    ))
}

/// Weights only.
pub fn predict(params: &WeightNetParams, batch: &EncodedBatch) -> Result<Vec<f64>> {
    Ok(forward(params, batch)?.0)
}

/// Reverse pass from `d loss / d weight`. Returns parameter gradients (the
/// null-score entry is left at zero) and gradients with respect to the
/// encoded inputs. The hinge subgradient at exactly `-tau` is 0.
pub fn backward(params: &WeightNetParams, cache: &ForwardCache, upstream: &[f64]) -> Result<(ParamGrads, Vec<Vec<f64>>)> {
    let rows = cache.inputs.len();
    if upstream.len() != rows || cache.col_std.len() != params.hidden || cache.inputs.first().is_some_and(|r| r.len() != params.input_dim) {
        return Err(Error::DimensionMismatch("forward cache does not match this network or gradient".into()));
    }
    let h = params.hidden;
    let mut grads = ParamGrads::zeros(params);
    let g_out: Vec<f64> = upstream
        .iter()
        .zip(&cache.pre_hinge)
        .map(|(&g, &o)| if params.tau + o > 0.0 { g } else { 0.0 })
        .collect();
    grads.b2 = g_out.iter().sum();
    for (a, &g) in cache.hidden.iter().zip(&g_out) {
        for (gw, &av) in grads.w2.iter_mut().zip(a) {
            *gw += g * av;
        }
    }
    // Through the ReLU into the normalized activations.
    let g_norm: Vec<Vec<f64>> = cache
        .normalized
        .iter()
        .zip(&g_out)
        .map(|(c, &g)| c.iter().zip(&params.w2).map(|(&cv, &w)| if cv > 0.0 { g * w } else { 0.0 }).collect())
        .collect();
    // Column-wise standardization Jacobian.
    let n = rows as f64;
    let mut g_pre = vec![vec![0.0; h]; rows];
    for c in 0..h {
        let mean_g = g_norm.iter().map(|r| r[c]).sum::<f64>() / n;
        let mean_gc = g_norm.iter().zip(&cache.normalized).map(|(g, x)| g[c] * x[c]).sum::<f64>() / n;
        for r in 0..rows {
            g_pre[r][c] = (g_norm[r][c] - mean_g - cache.normalized[r][c] * mean_gc) / cache.col_std[c];
        }
    }
    for g in &g_pre {
        for (gb, &v) in grads.b1.iter_mut().zip(g) {
            *gb += v;
        }
    }
    let mut g_in = vec![vec![0.0; params.input_dim]; rows];
    for (r, x) in cache.inputs.iter().enumerate() {
        for (i, &xi) in x.iter().enumerate() {
            let w_row = &params.w1[i * h..(i + 1) * h];
            let gw_row = &mut grads.w1[i * h..(i + 1) * h];
            let mut acc = 0.0;
            for k in 0..h {
                gw_row[k] += xi * g_pre[r][k];
                acc += w_row[k] * g_pre[r][k];
            }
            g_in[r][i] = acc;
        }
    }
    Ok((grads, g_in))
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    #[serde(flatten)]
    params: WeightNetParams,
}

pub fn checkpoint_to_json(params: &WeightNetParams) -> String {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        params: params.clone(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes")
}

pub fn checkpoint_from_json(text: &str, path: &Path) -> Result<WeightNetParams> {
    let file: CheckpointFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", file.version)));
    }
    file.params.validate()?;
    Ok(file.params)
}

pub fn save_checkpoint(params: &WeightNetParams, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_json(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<WeightNetParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_json(&text, path)
}

/// Loads a checkpoint and checks it accepts features of `feature_dim`.
pub fn load_checkpoint_for(path: &Path, feature_dim: usize) -> Result<WeightNetParams> {
    let params = load_checkpoint(path)?;
    if params.feature_dim() != feature_dim {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {}-dim features, detections have {feature_dim}",
            params.feature_dim()
        )));
    }
    Ok(params)
}
