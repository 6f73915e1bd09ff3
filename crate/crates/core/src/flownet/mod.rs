//! The learnable velocity field: a plain MLP over `[state | time embedding]`
//! with silu activations, hand-derived reverse-mode gradients and Adam.
//!
//! All math runs in f64. Parameters and optimizer moments are snapped to
//! f32-representable values after initialization and after every update, so
//! the 32-bit checkpoint encoding is lossless and an interrupted run resumes
//! bit-for-bit.

mod checkpoint;

pub use checkpoint::{
    read_checkpoint, read_checkpoint_bytes, write_checkpoint, write_checkpoint_bytes, Checkpoint,
    CheckpointManifest, TrainProgress, CHECKPOINT_MAGIC,
};

use crate::error::{Error, Result};
use crate::math::{self, Mat};
use crate::rng::ChaCha8Rng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Activation used in hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
}

/// Architecture descriptor for the velocity MLP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArch {
    pub embed_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub time_freqs: usize,
    pub activation: Activation,
}

impl NetArch {
    pub fn new(embed_dim: usize, hidden_widths: Vec<usize>, time_freqs: usize) -> Self {
        NetArch {
            embed_dim,
            hidden_widths,
            time_freqs,
            activation: Activation::Silu,
        }
    }

    pub fn state_dim(&self) -> usize {
        2 * self.embed_dim
    }

    pub fn time_dim(&self) -> usize {
        2 * self.time_freqs
    }

    pub fn in_dim(&self) -> usize {
        self.state_dim() + self.time_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.state_dim()
    }

    /// All layer widths, input first: `[in, hidden.., out]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_widths.len() + 2);
        w.push(self.in_dim());
        w.extend_from_slice(&self.hidden_widths);
        w.push(self.out_dim());
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.time_freqs == 0 {
            return Err(Error::invalid_argument(
                "embed_dim and time_freqs must be >= 1",
            ));
        }
        if self.hidden_widths.is_empty() {
            return Err(Error::invalid_argument("hidden_widths must be non-empty"));
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid_argument("hidden widths must be >= 1"));
        }
        Ok(())
    }
}

/// Weights and biases of the velocity MLP. Layer `l` maps `widths[l]` to
/// `widths[l+1]`; weight matrices are stored `(out x in)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityNetParams {
    pub arch: NetArch,
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

impl VelocityNetParams {
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self
                .biases
                .iter()
                .all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Per-layer gradients, same shapes as [`VelocityNetParams`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self
                .biases
                .iter()
                .all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Saved intermediates of one forward pass; consumed by exactly one backward.
#[derive(Debug)]
pub struct ForwardCache {
    input: Mat,
    pre_activations: Vec<Mat>,
    hidden_activations: Vec<Mat>,
    widths: Vec<usize>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.input.rows()
    }
}

/// Adam accumulators plus hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m_weights: Vec<Mat>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_weights: Vec<Mat>,
    pub v_biases: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &VelocityNetParams, beta1: f64, beta2: f64, eps: f64) -> Self {
        let m_weights = params
            .weights
            .iter()
            .map(|w| Mat::zeros(w.rows(), w.cols()))
            .collect::<Vec<_>>();
        let m_biases = params
            .biases
            .iter()
            .map(|b| vec![0.0; b.len()])
            .collect::<Vec<_>>();
        AdamState {
            v_weights: m_weights.clone(),
            v_biases: m_biases.clone(),
            m_weights,
            m_biases,
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    /// Standard defaults: beta1 0.9, beta2 0.999, eps 1e-8.
    pub fn with_defaults(params: &VelocityNetParams) -> Self {
        AdamState::new(params, 0.9, 0.999, 1e-8)
    }
}

/// He-initialized hidden layers, zero biases, and an all-zero final layer so
/// the untrained flow is exactly the identity map.
pub fn init_velocity_net(arch: &NetArch, seed: u64) -> Result<VelocityNetParams> {
    arch.validate()?;
    let widths = arch.widths();
    let n_layers = widths.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(n_layers);
    let mut biases = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let mut w = Mat::zeros(fan_out, fan_in);
        if l + 1 < n_layers {
            let scale = (2.0 / fan_in as f64).sqrt();
            for v in w.data_mut().iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = g * scale;
            }
            math::snap_f32(w.data_mut());
        }
        weights.push(w);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(VelocityNetParams {
        arch: arch.clone(),
        weights,
        biases,
    })
}

/// Sinusoidal embedding `[sin(2pi 2^k t), cos(2pi 2^k t)]` for `k < freqs`.
///
/// The angle is reduced modulo a full period before evaluation so t = 0 and
/// t = 1 produce exact (0, 1) pairs.
pub fn time_embed(t: f64, time_freqs: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid_argument(format!(
            "t must be in [0, 1], got {t}"
        )));
    }
    let mut out = Vec::with_capacity(2 * time_freqs);
    for k in 0..time_freqs {
        let cycles = t * (1u64 << k) as f64;
        let frac = cycles - cycles.floor();
        let angle = 2.0 * std::f64::consts::PI * frac;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

/// d/dx silu(x) = sigmoid(x) * (1 + x * (1 - sigmoid(x)))
fn silu_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Evaluate the velocity MLP on a batch. Pure in `params`.
pub fn net_forward(
    params: &VelocityNetParams,
    x_t: &Mat,
    t: &[f64],
) -> Result<(Mat, ForwardCache)> {
    let arch = &params.arch;
    if x_t.cols() != arch.state_dim() {
        return Err(Error::invalid_argument(format!(
            "state has {} columns, expected {}",
            x_t.cols(),
            arch.state_dim()
        )));
    }
    if t.len() != x_t.rows() {
        return Err(Error::invalid_argument(format!(
            "t has {} entries for a batch of {}",
            t.len(),
            x_t.rows()
        )));
    }
    let batch = x_t.rows();
    let mut input = Mat::zeros(batch, arch.in_dim());
    for r in 0..batch {
        let emb = time_embed(t[r], arch.time_freqs)?;
        let row = input.row_mut(r);
        row[..arch.state_dim()].copy_from_slice(x_t.row(r));
        row[arch.state_dim()..].copy_from_slice(&emb);
    }

    let n_layers = params.n_layers();
    let mut pre_activations = Vec::with_capacity(n_layers);
    let mut hidden_activations = Vec::with_capacity(n_layers - 1);
    let mut current = input.clone();
    for l in 0..n_layers {
        let mut z = math::matmul_nt(&current, &params.weights[l]);
        for r in 0..batch {
            for (v, b) in z.row_mut(r).iter_mut().zip(&params.biases[l]) {
                *v += b;
            }
        }
        if !z.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite pre-activation in layer {l}"
            )));
        }
        if l + 1 < n_layers {
            let mut a = z.clone();
            for v in a.data_mut().iter_mut() {
                *v = silu(*v);
            }
            pre_activations.push(z);
            current = a.clone();
            hidden_activations.push(a);
        } else {
            pre_activations.push(z.clone());
            current = z;
        }
    }
    let cache = ForwardCache {
        input,
        pre_activations,
        hidden_activations,
        widths: arch.widths(),
    };
    Ok((current, cache))
}

/// Reverse-mode gradients of a scalar loss with respect to all parameters,
/// given `dL/dv`. Contributions are summed over batch rows; any batch-mean
/// factor must already live in `dl_dv`.
pub fn net_backward(
    params: &VelocityNetParams,
    cache: ForwardCache,
    dl_dv: &Mat,
) -> Result<Gradients> {
    if cache.widths != params.arch.widths() {
        return Err(Error::invalid_state(
            "forward cache does not match this network architecture",
        ));
    }
    if dl_dv.rows() != cache.batch() || dl_dv.cols() != params.arch.out_dim() {
        return Err(Error::invalid_state(format!(
            "gradient of shape {}x{} does not match cached batch {}x{}",
            dl_dv.rows(),
            dl_dv.cols(),
            cache.batch(),
            params.arch.out_dim()
        )));
    }
    let n_layers = params.n_layers();
    let mut grad_w: Vec<Option<Mat>> = (0..n_layers).map(|_| None).collect();
    let mut grad_b: Vec<Option<Vec<f64>>> = (0..n_layers).map(|_| None).collect();

    let mut delta = dl_dv.clone();
    for l in (0..n_layers).rev() {
        let upstream = if l == 0 {
            &cache.input
        } else {
            &cache.hidden_activations[l - 1]
        };
        grad_w[l] = Some(math::matmul_tn(&delta, upstream));
        grad_b[l] = Some(math::col_sums(&delta));
        if l > 0 {
            let mut da = math::matmul_nn(&delta, &params.weights[l]);
            let pre = &cache.pre_activations[l - 1];
            for (v, z) in da.data_mut().iter_mut().zip(pre.data()) {
                *v *= silu_prime(*z);
            }
            delta = da;
        }
    }
    Ok(Gradients {
        weights: grad_w.into_iter().map(|g| g.unwrap()).collect(),
        biases: grad_b.into_iter().map(|g| g.unwrap()).collect(),
    })
}

/// One bias-corrected Adam update. Increments the step counter by exactly 1
/// and snaps all mutated state to f32-representable values.
pub fn adam_step(
    params: &mut VelocityNetParams,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if lr <= 0.0 || !lr.is_finite() {
        return Err(Error::invalid_argument(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    if grads.weights.len() != params.weights.len() {
        return Err(Error::invalid_argument("gradient layer count mismatch"));
    }
    if !grads.is_finite() {
        return Err(Error::numeric("non-finite gradient in adam_step"));
    }
    let t = state.step + 1;
    let bias1 = 1.0 - state.beta1.powi(t as i32);
    let bias2 = 1.0 - state.beta2.powi(t as i32);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);

    let mut update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        math::snap_f32(p);
        math::snap_f32(m);
        math::snap_f32(v);
    };

    for l in 0..params.weights.len() {
        if grads.weights[l].rows() != params.weights[l].rows()
            || grads.weights[l].cols() != params.weights[l].cols()
            || grads.biases[l].len() != params.biases[l].len()
        {
            return Err(Error::invalid_argument(format!(
                "gradient shape mismatch in layer {l}"
            )));
        }
        // Split borrows: weights in params, moments in state.
        let g = &grads.weights[l];
        update(
            params.weights[l].data_mut(),
            g.data(),
            state.m_weights[l].data_mut(),
            state.v_weights[l].data_mut(),
        );
        update(
            &mut params.biases[l],
            &grads.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
        );
    }
    state.step = t;
    Ok(())
}
