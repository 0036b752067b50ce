//! Mixture of almost-linear RNN experts with a context-driven gating network.
//!
//! Each expert advances an `M`-dimensional latent state with
//! `z' = A z + W phi(z) + h`, where `phi` rectifies only the last `P` units.
//! A gating network compares the projected latent state against the context
//! signal (state attention), pools CNN features of the context with the
//! resulting weights, and maps them together with `z` through a small MLP to
//! a softmax over experts. The next state is the weighted mix of the expert
//! proposals; the first `N` latent units are read out as observations.

pub(crate) mod forward;

pub use forward::{
    cnn_features, expert_step, expert_weights, forecast, init_latent, mixture_step, softmax,
    state_attention, ContextFeatures, Forecast,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Hidden channels of the context convolution.
pub const CNN_CHANNELS: usize = 3;
/// Width of the context convolution kernel.
pub const CNN_KERNEL: usize = 2;

/// Sign applied to attention distances before the softmax.
///
/// `Nearest` weights context points closest to the projected state most;
/// `Farthest` softmaxes the raw distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionSign {
    Nearest,
    Farthest,
}

impl AttentionSign {
    pub fn factor(self) -> f64 {
        match self {
            AttentionSign::Nearest => -1.0,
            AttentionSign::Farthest => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Observation dimension.
    pub n: usize,
    /// Latent dimension of every expert.
    pub m: usize,
    /// Rectified units per expert (the last `p` latent units).
    pub p: usize,
    /// Number of experts.
    pub j: usize,
    /// Width of the gating MLP hidden layer.
    pub hidden: usize,
    pub attention_sign: AttentionSign,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { n: 3, m: 20, p: 7, j: 20, hidden: 32, attention_sign: AttentionSign::Nearest }
    }
}

impl ModelConfig {
    /// Parameter blocks of a model with this configuration, in canonical order.
    pub fn block_shapes(&self) -> Vec<BlockShape> {
        let ModelConfig { n, m, j, hidden, .. } = *self;
        let shape = |name: String, rows, cols| BlockShape { name, rows, cols };
        let mut out = Vec::with_capacity(3 * j + 12);
        for e in 0..j {
            out.push(shape(format!("expert{e}.a"), m, 1));
            out.push(shape(format!("expert{e}.w"), m, m));
            out.push(shape(format!("expert{e}.h"), m, 1));
        }
        out.push(shape("gating.conv_prev".into(), CNN_CHANNELS, n));
        out.push(shape("gating.conv_curr".into(), CNN_CHANNELS, n));
        out.push(shape("gating.proj".into(), n, CNN_CHANNELS));
        out.push(shape("gating.d".into(), n, m));
        out.push(shape("gating.sigma".into(), n, 1));
        out.push(shape("gating.t_att".into(), 1, 1));
        out.push(shape("gating.t_exp".into(), 1, 1));
        out.push(shape("gating.mlp.w1".into(), hidden, n + m));
        out.push(shape("gating.mlp.b1".into(), hidden, 1));
        out.push(shape("gating.mlp.w2".into(), j, hidden));
        out.push(shape("gating.mlp.b2".into(), j, 1));
        out.push(shape("lift".into(), m - n, n));
        out
    }

    /// Total parameter count, or `None` on arithmetic overflow.
    pub fn checked_num_params(&self) -> Option<usize> {
        let ModelConfig { n, m, j, hidden, .. } = *self;
        let expert = m.checked_mul(m)?.checked_add(m.checked_mul(2)?)?;
        let experts = j.checked_mul(expert)?;
        let gating = [
            CNN_CHANNELS.checked_mul(n)?.checked_mul(3)?,
            n.checked_mul(m)?,
            n,
            2,
            hidden.checked_mul(n.checked_add(m)?.checked_add(1)?)?,
            j.checked_mul(hidden.checked_add(1)?)?,
            m.checked_sub(n)?.checked_mul(n)?,
        ];
        gating.iter().try_fold(experts, |acc, v| acc.checked_add(*v))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.j == 0 || self.hidden == 0 {
            return Err(Error::Config("n, m, j and hidden must be positive".into()));
        }
        if self.p > self.m {
            return Err(Error::Config(format!("p = {} exceeds m = {}", self.p, self.m)));
        }
        if self.n > self.m - self.p {
            return Err(Error::Config(format!(
                "readout needs n <= m - p linear units, got n = {}, m - p = {}",
                self.n,
                self.m - self.p
            )));
        }
        Ok(())
    }
}

/// One AL-RNN expert.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertParams {
    /// Diagonal of the linear self-connection matrix.
    pub a: DVector<f64>,
    pub w: DMatrix<f64>,
    pub h: DVector<f64>,
    pub p: usize,
}

impl ExpertParams {
    pub fn latent_dim(&self) -> usize {
        self.a.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatingParams {
    /// Convolution taps, `CNN_CHANNELS x N` each: `conv_prev` sees column
    /// `t - 1` (zero at `t = 0`), `conv_curr` sees column `t`.
    pub conv_prev: DMatrix<f64>,
    pub conv_curr: DMatrix<f64>,
    /// Width-1 projection from the hidden channels back to `N`, bias free.
    pub proj: DMatrix<f64>,
    /// Latent-to-observation projection used by the attention, `N x M`.
    pub d: DMatrix<f64>,
    /// Diagonal covariance of the exploration noise.
    pub sigma: DVector<f64>,
    pub t_att: f64,
    pub t_exp: f64,
    pub mlp: Mlp,
    pub attention_sign: AttentionSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynaMixModel {
    pub config: ModelConfig,
    pub experts: Vec<ExpertParams>,
    pub gating: GatingParams,
    /// Lift from an observation to the unobserved latent units, `(M - N) x N`.
    pub lift: DMatrix<f64>,
}

/// Name and shape of one parameter block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl BlockShape {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        std * v
    })
}

/// Diagonal of `G G^T / lambda_max(G G^T)` for a standard normal `G`.
fn normalized_pd_diagonal(rng: &mut impl Rng, m: usize) -> DVector<f64> {
    let g = gaussian_matrix(rng, m, m, 1.0);
    let s = &g * g.transpose();
    let lambda_max = s.clone().symmetric_eigen().eigenvalues.max();
    s.diagonal() / lambda_max
}

/// Freshly initialized model; deterministic under `seed`.
pub fn init_model(config: ModelConfig, seed: u64) -> Result<DynaMixModel> {
    config.validate()?;
    let ModelConfig { n, m, p, j, hidden, .. } = config;
    let mut rng = seed::rng(seed, "model-init", &[]);
    let experts = (0..j)
        .map(|_| ExpertParams {
            a: normalized_pd_diagonal(&mut rng, m),
            w: gaussian_matrix(&mut rng, m, m, 0.01),
            h: DVector::zeros(m),
            p,
        })
        .collect();
    let gating = GatingParams {
        conv_prev: gaussian_matrix(&mut rng, CNN_CHANNELS, n, 0.01),
        conv_curr: gaussian_matrix(&mut rng, CNN_CHANNELS, n, 0.01),
        proj: gaussian_matrix(&mut rng, n, CNN_CHANNELS, 0.01),
        d: DMatrix::identity(n, m),
        sigma: DVector::from_element(n, 0.05),
        t_att: 0.1,
        t_exp: 0.1,
        mlp: Mlp {
            w1: gaussian_matrix(&mut rng, hidden, n + m, 0.01),
            b1: DVector::zeros(hidden),
            w2: gaussian_matrix(&mut rng, j, hidden, 0.01),
            b2: DVector::zeros(j),
        },
        attention_sign: config.attention_sign,
    };
    let lift = gaussian_matrix(&mut rng, m - n, n, 0.01);
    Ok(DynaMixModel { config, experts, gating, lift })
}

/// Lower bound kept on temperatures after each optimizer update.
pub const MIN_TEMPERATURE: f64 = 1e-3;
/// Lower bound kept on the exploration variance after each update.
pub const MIN_SIGMA: f64 = 1e-6;

impl DynaMixModel {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn j(&self) -> usize {
        self.config.j
    }

    /// Canonical block order used by flattening, gradients and checkpoints.
    pub fn block_shapes(&self) -> Vec<BlockShape> {
        self.config.block_shapes()
    }

    pub fn num_params(&self) -> usize {
        self.block_shapes().iter().map(BlockShape::len).sum()
    }

    /// Column-major values of every block, in [`Self::block_shapes`] order.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let g = &self.gating;
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.experts.len() + 12);
        for e in &self.experts {
            out.push(e.a.as_slice());
            out.push(e.w.as_slice());
            out.push(e.h.as_slice());
        }
        out.push(g.conv_prev.as_slice());
        out.push(g.conv_curr.as_slice());
        out.push(g.proj.as_slice());
        out.push(g.d.as_slice());
        out.push(g.sigma.as_slice());
        out.push(std::slice::from_ref(&g.t_att));
        out.push(std::slice::from_ref(&g.t_exp));
        out.push(g.mlp.w1.as_slice());
        out.push(g.mlp.b1.as_slice());
        out.push(g.mlp.w2.as_slice());
        out.push(g.mlp.b2.as_slice());
        out.push(self.lift.as_slice());
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let g = &mut self.gating;
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * self.experts.len() + 12);
        for e in &mut self.experts {
            out.push(e.a.as_mut_slice());
            out.push(e.w.as_mut_slice());
            out.push(e.h.as_mut_slice());
        }
        out.push(g.conv_prev.as_mut_slice());
        out.push(g.conv_curr.as_mut_slice());
        out.push(g.proj.as_mut_slice());
        out.push(g.d.as_mut_slice());
        out.push(g.sigma.as_mut_slice());
        out.push(std::slice::from_mut(&mut g.t_att));
        out.push(std::slice::from_mut(&mut g.t_exp));
        out.push(g.mlp.w1.as_mut_slice());
        out.push(g.mlp.b1.as_mut_slice());
        out.push(g.mlp.w2.as_mut_slice());
        out.push(g.mlp.b2.as_mut_slice());
        out.push(self.lift.as_mut_slice());
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::arg(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut offset = 0;
        for block in self.blocks_mut() {
            let len = block.len();
            block.copy_from_slice(&values[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Same structure with every parameter set to zero.
    pub fn zeros_like(&self) -> DynaMixModel {
        let mut out = self.clone();
        for block in out.blocks_mut() {
            block.fill(0.0);
        }
        out
    }

    /// Keeps temperatures and exploration variance in their valid range.
    pub fn clamp_constrained(&mut self) {
        let g = &mut self.gating;
        g.t_att = g.t_att.max(MIN_TEMPERATURE);
        g.t_exp = g.t_exp.max(MIN_TEMPERATURE);
        g.sigma.apply(|s| *s = s.max(MIN_SIGMA));
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Checks every structural invariant, e.g. after loading from disk.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.experts.len() != self.config.j {
            return Err(Error::Config(format!(
                "expected {} experts, found {}",
                self.config.j,
                self.experts.len()
            )));
        }
        if self.experts.iter().any(|e| e.p != self.config.p) {
            return Err(Error::Config("experts disagree on p".into()));
        }
        let shapes = self.block_shapes();
        let mats: Vec<(usize, usize)> = self.block_dims();
        for (shape, dims) in shapes.iter().zip(mats) {
            if (shape.rows, shape.cols) != dims {
                return Err(Error::Config(format!(
                    "block {} has shape {:?}, expected {}x{}",
                    shape.name, dims, shape.rows, shape.cols
                )));
            }
        }
        let g = &self.gating;
        if !(g.t_att > 0.0 && g.t_exp > 0.0) {
            return Err(Error::Config("temperatures must be positive".into()));
        }
        if g.sigma.iter().any(|s| *s < 0.0) {
            return Err(Error::Config("exploration variance must be non-negative".into()));
        }
        if !self.is_finite() {
            return Err(Error::Config("model has non-finite parameters".into()));
        }
        Ok(())
    }

    fn block_dims(&self) -> Vec<(usize, usize)> {
        let g = &self.gating;
        let mut out = Vec::new();
        for e in &self.experts {
            out.push((e.a.len(), 1));
            out.push(e.w.shape());
            out.push((e.h.len(), 1));
        }
        out.push(g.conv_prev.shape());
        out.push(g.conv_curr.shape());
        out.push(g.proj.shape());
        out.push(g.d.shape());
        out.push((g.sigma.len(), 1));
        out.push((1, 1));
        out.push((1, 1));
        out.push(g.mlp.w1.shape());
        out.push((g.mlp.b1.len(), 1));
        out.push(g.mlp.w2.shape());
        out.push((g.mlp.b2.len(), 1));
        out.push(self.lift.shape());
        out
    }

    /// Model of the given structure with every parameter zero.
    pub fn zeros(config: ModelConfig) -> Result<DynaMixModel> {
        config.validate()?;
        let ModelConfig { n, m, p, j, hidden, attention_sign } = config;
        let experts = (0..j)
            .map(|_| ExpertParams { a: DVector::zeros(m), w: DMatrix::zeros(m, m), h: DVector::zeros(m), p })
            .collect();
        let gating = GatingParams {
            conv_prev: DMatrix::zeros(CNN_CHANNELS, n),
            conv_curr: DMatrix::zeros(CNN_CHANNELS, n),
            proj: DMatrix::zeros(n, CNN_CHANNELS),
            d: DMatrix::zeros(n, m),
            sigma: DVector::zeros(n),
            t_att: 0.0,
            t_exp: 0.0,
            mlp: Mlp {
                w1: DMatrix::zeros(hidden, n + m),
                b1: DVector::zeros(hidden),
                w2: DMatrix::zeros(j, hidden),
                b2: DVector::zeros(j),
            },
            attention_sign,
        };
        Ok(DynaMixModel { config, experts, gating, lift: DMatrix::zeros(m - n, n) })
    }

    /// Rebuilds a model from block values in canonical order.
    pub fn from_blocks(config: ModelConfig, blocks: &[Vec<f64>]) -> Result<DynaMixModel> {
        let mut model = DynaMixModel::zeros(config)?;
        let shapes = model.block_shapes();
        if blocks.len() != shapes.len() {
            return Err(Error::Config(format!(
                "expected {} parameter blocks, got {}",
                shapes.len(),
                blocks.len()
            )));
        }
        for ((dst, src), shape) in model.blocks_mut().into_iter().zip(blocks).zip(&shapes) {
            if dst.len() != src.len() {
                return Err(Error::Config(format!(
                    "block {} has {} values, expected {}",
                    shape.name,
                    src.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(src);
        }
        model.validate()?;
        Ok(model)
    }
}
