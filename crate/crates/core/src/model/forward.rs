use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::{DynaMixModel, ExpertParams, GatingParams};
use crate::error::{Error, Result};
use crate::seed;
use crate::trajectory::Trajectory;

/// Numerically stable softmax.
pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let mut out = logits.map(|v| (v - max).exp());
    let total = out.sum();
    out /= total;
    out
}

/// `phi(z)`: identity on the first `M - P` units, ReLU on the last `P`.
pub(crate) fn rectify(z: &DVector<f64>, p: usize) -> DVector<f64> {
    let linear = z.len() - p;
    DVector::from_iterator(
        z.len(),
        z.iter().enumerate().map(|(i, &v)| if i < linear { v } else { v.max(0.0) }),
    )
}

/// One AL-RNN update `A z + W phi(z) + h`.
pub fn expert_step(expert: &ExpertParams, z: &DVector<f64>) -> DVector<f64> {
    let phi = rectify(z, expert.p);
    expert_step_with(expert, z, &phi)
}

fn expert_step_with(expert: &ExpertParams, z: &DVector<f64>, phi: &DVector<f64>) -> DVector<f64> {
    let mut out = expert.h.clone();
    out.gemv(1.0, &expert.w, phi, 1.0);
    out += expert.a.component_mul(z);
    out
}

/// Hidden-channel response of the causal kernel-2 convolution, `CNN_CHANNELS x T`.
pub(crate) fn conv_hidden(gating: &GatingParams, context: &DMatrix<f64>) -> DMatrix<f64> {
    let mut hidden = &gating.conv_curr * context;
    let t = context.ncols();
    if t > 1 {
        let shifted = &gating.conv_prev * context.columns(0, t - 1);
        let mut tail = hidden.columns_mut(1, t - 1);
        tail += shifted;
    }
    hidden
}

/// Temporal features of the context, same `N x T` shape as the input.
pub fn cnn_features(gating: &GatingParams, context: &Trajectory) -> DMatrix<f64> {
    &gating.proj * conv_hidden(gating, &context.data)
}

/// Context signal together with its CNN features.
#[derive(Debug, Clone)]
pub struct ContextFeatures {
    pub context: DMatrix<f64>,
    pub features: DMatrix<f64>,
}

impl ContextFeatures {
    pub fn new(gating: &GatingParams, context: &DMatrix<f64>) -> Self {
        ContextFeatures { context: context.clone(), features: &gating.proj * conv_hidden(gating, context) }
    }
}

/// `sum_i |C_it - q_i|` for every context column `t`.
pub(crate) fn attention_distances(context: &DMatrix<f64>, projected: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        context.ncols(),
        context.column_iter().map(|col| {
            col.iter().zip(projected.iter()).map(|(c, q)| (c - q).abs()).sum::<f64>()
        }),
    )
}

pub(crate) fn attention_from_projection(
    gating: &GatingParams,
    context: &DMatrix<f64>,
    projected: &DVector<f64>,
) -> DVector<f64> {
    let scale = gating.attention_sign.factor() / gating.t_att;
    softmax(&(attention_distances(context, projected) * scale))
}

/// Standard normal draw behind the exploration offset for `noise_seed`.
pub(crate) fn exploration_xi(n: usize, noise_seed: u64) -> DVector<f64> {
    let mut rng = seed::rng(noise_seed, "exploration-noise", &[]);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

pub(crate) fn exploration_noise(gating: &GatingParams, noise_seed: u64) -> DVector<f64> {
    let xi = exploration_xi(gating.sigma.len(), noise_seed);
    gating.sigma.map(f64::sqrt).component_mul(&xi)
}

/// Softmax weights over context columns from their L1 distance to `D z + eps`.
///
/// With `noise_seed` set, `eps ~ N(0, Sigma)` is drawn once and shared by all
/// columns; with `None` the projection is noise free.
pub fn state_attention(
    gating: &GatingParams,
    context: &Trajectory,
    z: &DVector<f64>,
    noise_seed: Option<u64>,
) -> DVector<f64> {
    let mut projected = &gating.d * z;
    if let Some(seed) = noise_seed {
        projected += exploration_noise(gating, seed);
    }
    attention_from_projection(gating, &context.data, &projected)
}

/// Softmax over experts of the gating MLP applied to `[features w_att; z]`.
pub fn expert_weights(
    gating: &GatingParams,
    features: &DMatrix<f64>,
    w_att: &DVector<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    let pooled = features * w_att;
    let input = DVector::from_iterator(pooled.len() + z.len(), pooled.iter().chain(z.iter()).copied());
    let hidden = (&gating.mlp.w1 * &input + &gating.mlp.b1).map(|v| v.max(0.0));
    let logits = &gating.mlp.w2 * hidden + &gating.mlp.b2;
    softmax(&(logits / gating.t_exp))
}

/// Intermediates of one mixture step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepTrace {
    pub z_in: DVector<f64>,
    pub phi: DVector<f64>,
    pub projected: DVector<f64>,
    pub attention: DVector<f64>,
    pub mlp_in: DVector<f64>,
    pub hidden: DVector<f64>,
    pub logits: DVector<f64>,
    pub weights: DVector<f64>,
    pub proposals: Vec<DVector<f64>>,
    pub z_out: DVector<f64>,
}

/// Full mixture step from `z` with an explicit exploration offset.
pub(crate) fn traced_step(
    model: &DynaMixModel,
    ctx: &ContextFeatures,
    z: &DVector<f64>,
    eps: Option<&DVector<f64>>,
) -> StepTrace {
    let gating = &model.gating;
    let mut projected = &gating.d * z;
    if let Some(eps) = eps {
        projected += eps;
    }
    let attention = attention_from_projection(gating, &ctx.context, &projected);
    let pooled = &ctx.features * &attention;
    let mlp_in = DVector::from_iterator(pooled.len() + z.len(), pooled.iter().chain(z.iter()).copied());
    let hidden = (&gating.mlp.w1 * &mlp_in + &gating.mlp.b1).map(|v| v.max(0.0));
    let logits = &gating.mlp.w2 * &hidden + &gating.mlp.b2;
    let weights = softmax(&(&logits / gating.t_exp));

    let phi = rectify(z, model.config.p);
    let proposals: Vec<DVector<f64>> = model.experts.iter().map(|e| expert_step_with(e, z, &phi)).collect();
    let mut z_out = DVector::zeros(z.len());
    for (w, y) in weights.iter().zip(&proposals) {
        z_out.axpy(*w, y, 1.0);
    }
    StepTrace { z_in: z.clone(), phi, projected, attention, mlp_in, hidden, logits, weights, proposals, z_out }
}

/// Convex combination of the expert proposals from the shared state `z`.
///
/// Returns the next latent state and the expert weights used.
pub fn mixture_step(
    model: &DynaMixModel,
    z: &DVector<f64>,
    context: &Trajectory,
    noise_seed: Option<u64>,
) -> (DVector<f64>, DVector<f64>) {
    let ctx = ContextFeatures::new(&model.gating, &context.data);
    let eps = noise_seed.map(|s| exploration_noise(&model.gating, s));
    let trace = traced_step(model, &ctx, z, eps.as_ref());
    (trace.z_out, trace.weights)
}

/// `z = [x; L x]`: the readout units start exactly at the observation.
pub fn init_latent(model: &DynaMixModel, x: &DVector<f64>) -> DVector<f64> {
    let n = model.n();
    let lifted = &model.lift * x;
    DVector::from_iterator(model.m(), x.iter().take(n).chain(lifted.iter()).copied())
}

/// Readout trajectory plus the expert weights behind every forecast step.
#[derive(Debug, Clone)]
pub struct Forecast {
    pub trajectory: Trajectory,
    /// `J x n_steps`; column `k` produced forecast column `k`.
    pub weights: DMatrix<f64>,
}

/// Free-running forecast conditioned on `context`.
///
/// The latent state is initialized from context column `T_C - warmup`, run
/// through the remaining context steps without forcing, then `n_steps` beyond
/// the context. Exploration noise is off.
pub fn forecast(model: &DynaMixModel, context: &Trajectory, n_steps: usize, warmup: usize) -> Result<Forecast> {
    let (n, t_c) = (model.n(), context.len());
    if context.dim() != n {
        return Err(Error::arg(format!("context has {} rows, model expects {n}", context.dim())));
    }
    if warmup == 0 || warmup > t_c {
        return Err(Error::arg(format!("warmup must lie in 1..={t_c}, got {warmup}")));
    }
    let ctx = ContextFeatures::new(&model.gating, &context.data);
    let mut z = init_latent(model, &context.column(t_c - warmup));
    for _ in 1..warmup {
        z = traced_step(model, &ctx, &z, None).z_out;
    }
    let mut readout = DMatrix::zeros(n, n_steps);
    let mut weights = DMatrix::zeros(model.j(), n_steps);
    for k in 0..n_steps {
        let trace = traced_step(model, &ctx, &z, None);
        z = trace.z_out;
        readout.set_column(k, &z.rows(0, n));
        weights.set_column(k, &trace.weights);
    }
    let trajectory = Trajectory { data: readout, dt: context.dt, name: context.name.clone() };
    Ok(Forecast { trajectory, weights })
}
