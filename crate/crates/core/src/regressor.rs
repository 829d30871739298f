//! Two-layer MLP mapping binary mask stacks to standardized shape
//! parameters: `α̂ = W₂·relu(W₁·x + b₁) + b₂`.
//!
//! Inputs are binary, so they are kept as sorted lists of on-indices and the
//! first layer only touches the weights of on-pixels. `W₁` is stored
//! input-major (`D × H`) so each on-pixel contributes one contiguous row.
//!
//! Training is plain mini-batch gradient descent on the mean squared error.
//! Every `W₁` update is a sum of outer products `x_i ⊗ δ_i` over training
//! inputs, so `W₁ = W₁⁽⁰⁾ + Σ_i x_i ⊗ c_i` throughout. [`train`] tracks the
//! coefficients `c_i` together with the pairwise input overlaps `x_j·x_i`,
//! which gives the same iterates as updating `W₁` directly at a cost that
//! does not grow with the image size.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persist::{self, PersistError, Segment};
use crate::slicer::MaskStack;
use crate::ssm::ShapeParams;

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Debug, Error)]
pub enum RegressorError {
    #[error("input has dimension {found}, network expects {expected}")]
    InputDimension { found: usize, expected: usize },
    #[error("target has {found} parameters, network outputs {expected}")]
    TargetDimension { found: usize, expected: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Persist(#[from] PersistError),
}

/// Binary network input as sorted, distinct on-indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryInput {
    dim: usize,
    active: Vec<usize>,
}

impl BinaryInput {
    /// `None` unless `active` is strictly increasing and below `dim`.
    pub fn new(dim: usize, active: Vec<usize>) -> Option<Self> {
        let ok = active.windows(2).all(|w| w[0] < w[1]) && active.last().is_none_or(|&i| i < dim);
        ok.then_some(Self { dim, active })
    }

    pub fn from_stack(stack: &MaskStack) -> Self {
        Self {
            dim: stack.input_len(),
            active: stack.active_indices(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Number of on-indices shared with `other`.
    pub fn overlap(&self, other: &BinaryInput) -> usize {
        let (a, b) = (&self.active, &other.active);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// One training pair.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: BinaryInput,
    pub target: ShapeParams,
}

/// Network weights. Also used for gradients, which have the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    d: usize,
    h: usize,
    k: usize,
    /// `D × H`, row `d` holds the weights leaving input `d`.
    w1t: Vec<f64>,
    b1: Vec<f64>,
    /// `K × H` row-major.
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(d: usize, h: usize, k: usize) -> Self {
        Self {
            d,
            h,
            k,
            w1t: vec![0.0; d * h],
            b1: vec![0.0; h],
            w2: vec![0.0; k * h],
            b2: vec![0.0; k],
        }
    }

    /// Weights uniform in `±√(6/(fan_in+fan_out))`, biases zero.
    pub fn init(d: usize, h: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(d, h, k);
        let a1 = (6.0 / (d + h) as f64).sqrt();
        p.w1t.iter_mut().for_each(|w| *w = rng.gen_range(-a1..=a1));
        let a2 = (6.0 / (h + k) as f64).sqrt();
        p.w2.iter_mut().for_each(|w| *w = rng.gen_range(-a2..=a2));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    pub fn output_dim(&self) -> usize {
        self.k
    }

    pub fn w1(&self, row: usize, col: usize) -> f64 {
        self.w1t[col * self.h + row]
    }

    pub fn set_w1(&mut self, row: usize, col: usize, value: f64) {
        self.w1t[col * self.h + row] = value;
    }

    pub fn w2(&self, row: usize, col: usize) -> f64 {
        self.w2[row * self.h + col]
    }

    pub fn set_w2(&mut self, row: usize, col: usize, value: f64) {
        self.w2[row * self.h + col] = value;
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn b1_mut(&mut self) -> &mut [f64] {
        &mut self.b1
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn b2_mut(&mut self) -> &mut [f64] {
        &mut self.b2
    }

    pub fn param_count(&self) -> usize {
        self.w1t.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// `W₁` as `H × D` row-major.
    pub fn w1_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d * self.h];
        for (col, row) in self.w1t.chunks_exact(self.h.max(1)).enumerate() {
            for (r, &w) in row.iter().enumerate() {
                out[r * self.d + col] = w;
            }
        }
        out
    }

    /// All parameters in storage order: `W₁` (H × D row-major), `b₁`, `W₂`, `b₂`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.w1_row_major();
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out
    }

    pub fn from_flat(d: usize, h: usize, k: usize, flat: &[f64]) -> Option<Self> {
        if flat.len() != d * h + h + k * h + k {
            return None;
        }
        let (w1, rest) = flat.split_at(d * h);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(k * h);
        let mut p = Self::zeros(d, h, k);
        for r in 0..h {
            for c in 0..d {
                p.w1t[c * h + r] = w1[r * d + c];
            }
        }
        p.b1.copy_from_slice(b1);
        p.w2.copy_from_slice(w2);
        p.b2.copy_from_slice(b2);
        Some(p)
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1t, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, x: &BinaryInput) -> Result<(), RegressorError> {
        if x.dim != self.d {
            return Err(RegressorError::InputDimension {
                found: x.dim,
                expected: self.d,
            });
        }
        Ok(())
    }

    fn pre_activation(&self, x: &BinaryInput) -> Vec<f64> {
        let mut z = self.b1.clone();
        for &i in &x.active {
            let row = &self.w1t[i * self.h..(i + 1) * self.h];
            z.iter_mut().zip(row).for_each(|(z, w)| *z += w);
        }
        z
    }

    fn output(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|r| {
                let row = &self.w2[r * self.h..(r + 1) * self.h];
                self.b2[r] + row.iter().zip(hidden).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect()
    }

    fn scale_add(&mut self, other: &MlpParams, s: f64) {
        let pairs = [
            (&mut self.w1t, &other.w1t),
            (&mut self.b1, &other.b1),
            (&mut self.w2, &other.w2),
            (&mut self.b2, &other.b2),
        ];
        for (a, b) in pairs {
            a.iter_mut().zip(b.iter()).for_each(|(a, b)| *a += s * b);
        }
    }
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

pub fn forward_input(params: &MlpParams, x: &BinaryInput) -> Result<ShapeParams, RegressorError> {
    params.check_input(x)?;
    Ok(ShapeParams(params.output(&relu(&params.pre_activation(x)))))
}

pub fn forward(params: &MlpParams, stack: &MaskStack) -> Result<ShapeParams, RegressorError> {
    forward_input(params, &BinaryInput::from_stack(stack))
}

fn check_batch(params: &MlpParams, batch: &[Sample]) -> Result<(), RegressorError> {
    if batch.is_empty() {
        return Err(RegressorError::EmptyBatch);
    }
    for s in batch {
        params.check_input(&s.input)?;
        if s.target.len() != params.k {
            return Err(RegressorError::TargetDimension {
                found: s.target.len(),
                expected: params.k,
            });
        }
    }
    Ok(())
}

fn squared_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len().max(1) as f64
}

/// Mean over the batch of `‖α̂ − α‖² / K`.
pub fn loss(params: &MlpParams, batch: &[Sample]) -> Result<f64, RegressorError> {
    check_batch(params, batch)?;
    let total: f64 = batch
        .iter()
        .map(|s| squared_error(&params.output(&relu(&params.pre_activation(&s.input))), s.target.as_slice()))
        .sum();
    Ok(total / batch.len() as f64)
}

/// Analytic gradient of [`loss`] with respect to every parameter.
pub fn gradient(params: &MlpParams, batch: &[Sample]) -> Result<MlpParams, RegressorError> {
    check_batch(params, batch)?;
    let (h, k) = (params.h, params.k);
    let mut g = MlpParams::zeros(params.d, h, k);
    let scale = 2.0 / (batch.len() * k) as f64;
    for s in batch {
        let z = params.pre_activation(&s.input);
        let a = relu(&z);
        let out = params.output(&a);
        let d2: Vec<f64> = out.iter().zip(s.target.as_slice()).map(|(o, t)| scale * (o - t)).collect();
        let mut d1 = vec![0.0; h];
        for (r, &dr) in d2.iter().enumerate() {
            g.b2[r] += dr;
            for j in 0..h {
                g.w2[r * h + j] += dr * a[j];
                d1[j] += dr * params.w2[r * h + j];
            }
        }
        for j in 0..h {
            if z[j] <= 0.0 {
                d1[j] = 0.0;
            }
            g.b1[j] += d1[j];
        }
        for &i in &s.input.active {
            g.w1t[i * h..(i + 1) * h].iter_mut().zip(&d1).for_each(|(g, d)| *g += d);
        }
    }
    Ok(g)
}

/// One plain gradient-descent step on `batch`.
pub fn sgd_step(params: &mut MlpParams, batch: &[Sample], learning_rate: f64) -> Result<(), RegressorError> {
    let g = gradient(params, batch)?;
    params.scale_add(&g, -learning_rate);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 16,
            validation_fraction: 0.2,
            patience: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RegressorError> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return bad("hidden width and batch size must be positive");
        }
        Ok(())
    }

    /// Shuffled `(train, validation)` sample indices.
    pub fn split(&self, n: usize) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(2)));
        let n_val = ((self.validation_fraction * n as f64).round() as usize).min(n.saturating_sub(1));
        let val = idx.split_off(n - n_val);
        (idx, val)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Epoch 0 is the initialization.
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

impl TrainLog {
    /// `epoch,train_loss,val_loss` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            let val = r.val_loss.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!("{},{:e},{}\n", r.epoch, r.train_loss, val));
        }
        s
    }
}

/// Coefficient form of the network during training.
struct DualState {
    w2: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    /// `N_train × H`; `W₁ = W₁⁽⁰⁾ + Σ_i x_i ⊗ c_i`.
    coef: Vec<f64>,
}

struct Precomputed {
    /// `W₁⁽⁰⁾ᵀ x_j` for every sample, `N × H`.
    base: Vec<f64>,
    /// `x_j · x_i` for every sample `j` and training sample `i`, `N × N_train`.
    overlap: Vec<f64>,
    n_train: usize,
}

impl Precomputed {
    fn pre_activation(&self, st: &DualState, h: usize, j: usize) -> Vec<f64> {
        let mut z: Vec<f64> = self.base[j * h..(j + 1) * h]
            .iter()
            .zip(&st.b1)
            .map(|(a, b)| a + b)
            .collect();
        let g = &self.overlap[j * self.n_train..(j + 1) * self.n_train];
        for (i, &gi) in g.iter().enumerate() {
            if gi != 0.0 {
                let c = &st.coef[i * h..(i + 1) * h];
                z.iter_mut().zip(c).for_each(|(z, c)| *z += gi * c);
            }
        }
        z
    }
}

fn dual_output(st: &DualState, a: &[f64], h: usize) -> Vec<f64> {
    st.b2
        .iter()
        .enumerate()
        .map(|(r, b)| b + st.w2[r * h..(r + 1) * h].iter().zip(a).map(|(w, a)| w * a).sum::<f64>())
        .collect()
}

fn dual_loss(pre: &Precomputed, st: &DualState, samples: &[&Sample], rows: &[usize], h: usize) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|&j| {
            let a = relu(&pre.pre_activation(st, h, j));
            squared_error(&dual_output(st, &a, h), samples[j].target.as_slice())
        })
        .sum();
    total / rows.len() as f64
}

/// Trains from seeded initialization and returns the parameters with the
/// lowest validation loss (training loss when there is no validation set).
pub fn train(dataset: &[Sample], cfg: &TrainConfig) -> Result<(MlpParams, TrainLog), RegressorError> {
    cfg.validate()?;
    if dataset.len() < 2 {
        return Err(RegressorError::TooFewSamples(dataset.len()));
    }
    let d = dataset[0].input.dim;
    let k = dataset[0].target.len();
    let h = cfg.hidden;
    let init = MlpParams::init(d, h, k, cfg.seed);
    check_batch(&init, dataset)?;

    let (train_idx, val_idx) = cfg.split(dataset.len());
    // Rows 0..n_train are training samples, the rest validation.
    let samples: Vec<&Sample> = train_idx.iter().chain(&val_idx).map(|&i| &dataset[i]).collect();
    let n_train = train_idx.len();
    let train_rows: Vec<usize> = (0..n_train).collect();
    let val_rows: Vec<usize> = (n_train..samples.len()).collect();

    let base: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let mut z = vec![0.0; h];
            for &i in &s.input.active {
                z.iter_mut().zip(&init.w1t[i * h..(i + 1) * h]).for_each(|(z, w)| *z += w);
            }
            z
        })
        .collect::<Vec<_>>()
        .concat();
    let overlap: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            samples[..n_train]
                .iter()
                .map(|t| s.input.overlap(&t.input) as f64)
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat();
    let pre = Precomputed { base, overlap, n_train };

    let mut st = DualState {
        w2: init.w2.clone(),
        b1: init.b1.clone(),
        b2: init.b2.clone(),
        coef: vec![0.0; n_train * h],
    };
    let evaluate = |st: &DualState, epoch: usize| -> Result<EpochRecord, RegressorError> {
        let train_loss = dual_loss(&pre, st, &samples, &train_rows, h);
        let val_loss = (!val_rows.is_empty()).then(|| dual_loss(&pre, st, &samples, &val_rows, h));
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(RegressorError::Diverged { epoch });
        }
        Ok(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        })
    };
    let score = |r: &EpochRecord| r.val_loss.unwrap_or(r.train_loss);

    let mut log = vec![evaluate(&st, 0)?];
    let mut best = (score(&log[0]), 0usize, st.coef.clone(), st.w2.clone(), st.b1.clone(), st.b2.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order = train_rows.clone();
    let kf = k as f64;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let scale = 2.0 / (batch.len() as f64 * kf);
            let grads: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = batch
                .iter()
                .map(|&j| {
                    let z = pre.pre_activation(&st, h, j);
                    let a = relu(&z);
                    let out = dual_output(&st, &a, h);
                    let d2: Vec<f64> = out
                        .iter()
                        .zip(samples[j].target.as_slice())
                        .map(|(o, t)| scale * (o - t))
                        .collect();
                    let mut d1 = vec![0.0; h];
                    for (r, dr) in d2.iter().enumerate() {
                        d1.iter_mut()
                            .zip(&st.w2[r * h..(r + 1) * h])
                            .for_each(|(d, w)| *d += dr * w);
                    }
                    d1.iter_mut().zip(&z).for_each(|(d, z)| {
                        if *z <= 0.0 {
                            *d = 0.0
                        }
                    });
                    (a, d1, d2)
                })
                .collect();
            let lr = cfg.learning_rate;
            for (&j, (a, d1, d2)) in batch.iter().zip(&grads) {
                st.coef[j * h..(j + 1) * h]
                    .iter_mut()
                    .zip(d1)
                    .for_each(|(c, d)| *c -= lr * d);
                st.b1.iter_mut().zip(d1).for_each(|(b, d)| *b -= lr * d);
                for (r, dr) in d2.iter().enumerate() {
                    st.b2[r] -= lr * dr;
                    st.w2[r * h..(r + 1) * h]
                        .iter_mut()
                        .zip(a)
                        .for_each(|(w, a)| *w -= lr * dr * a);
                }
            }
        }
        let rec = evaluate(&st, epoch)?;
        let s = score(&rec);
        log.push(rec);
        if s < best.0 {
            best = (s, epoch, st.coef.clone(), st.w2.clone(), st.b1.clone(), st.b2.clone());
        } else if cfg.patience > 0 && epoch - best.1 >= cfg.patience {
            break;
        }
    }

    let (_, best_epoch, coef, w2, b1, b2) = best;
    let mut params = init;
    for (i, s) in samples[..n_train].iter().enumerate() {
        let c = &coef[i * h..(i + 1) * h];
        for &p in &s.input.active {
            params.w1t[p * h..(p + 1) * h]
                .iter_mut()
                .zip(c)
                .for_each(|(w, c)| *w += c);
        }
    }
    params.w2 = w2;
    params.b1 = b1;
    params.b2 = b2;
    Ok((
        params,
        TrainLog {
            epochs: log,
            best_epoch,
            train_indices: train_idx,
            val_indices: val_idx,
        },
    ))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsManifest {
    format_version: u32,
    #[serde(rename = "D")]
    input_dim: usize,
    #[serde(rename = "H")]
    hidden: usize,
    #[serde(rename = "K")]
    outputs: usize,
    payload: WeightsPayload,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsPayload {
    file: String,
    /// `H × D` row-major.
    w1: Segment,
    b1: Segment,
    /// `K × H` row-major.
    w2: Segment,
    b2: Segment,
}

/// Writes `<path>` (JSON manifest) and its `.bin` sidecar.
pub fn save_weights(params: &MlpParams, path: impl AsRef<Path>) -> Result<(), RegressorError> {
    let path = path.as_ref();
    let w1 = params.w1_row_major();
    let (bytes, segs) = persist::pack(&[&w1, &params.b1, &params.w2, &params.b2]);
    let manifest = WeightsManifest {
        format_version: WEIGHTS_FORMAT_VERSION,
        input_dim: params.d,
        hidden: params.h,
        outputs: params.k,
        payload: WeightsPayload {
            file: crate::ssm::sidecar_name(path),
            w1: segs[0],
            b1: segs[1],
            w2: segs[2],
            b2: segs[3],
        },
    };
    persist::write_pair(path, &manifest, &bytes)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<MlpParams, RegressorError> {
    let path = path.as_ref();
    let (m, bytes) = persist::read_pair::<WeightsManifest>(path, |m| {
        let p = &m.payload;
        persist::contiguous_size(&[p.w1, p.b1, p.w2, p.b2]).unwrap_or(usize::MAX)
    })?;
    if m.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(PersistError::Version {
            found: m.format_version,
            expected: WEIGHTS_FORMAT_VERSION,
        }
        .into());
    }
    let (d, h, k) = (m.input_dim, m.hidden, m.outputs);
    let p = &m.payload;
    if p.w1.len != d * h || p.b1.len != h || p.w2.len != k * h || p.b2.len != k {
        return Err(PersistError::Inconsistent(format!("payload sizes do not match D={d}, H={h}, K={k}")).into());
    }
    let mut flat = persist::unpack(&bytes, p.w1, path)?;
    for seg in [p.b1, p.w2, p.b2] {
        flat.extend(persist::unpack(&bytes, seg, path)?);
    }
    let params = MlpParams::from_flat(d, h, k, &flat).expect("sizes checked");
    if !params.is_finite() {
        return Err(PersistError::Inconsistent("non-finite weight".into()).into());
    }
    Ok(params)
}
