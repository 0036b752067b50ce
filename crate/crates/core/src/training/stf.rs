//! Sparse-teacher-forced unroll of one sequence and its adjoint.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::forward::{conv_hidden, traced_step, ContextFeatures, StepTrace};
use crate::model::{init_latent, DynaMixModel};
use crate::seed;
use crate::trajectory::Trajectory;

/// Result of a teacher-forced unroll.
#[derive(Debug, Clone)]
pub struct StfForward {
    /// Sequence column of the first prediction column (`T_C - overlap`).
    pub first_column: usize,
    /// Readouts for sequence columns `first_column..T_seq`, `N x K`. Column 0
    /// is the initialization and equals the data there.
    pub predictions: DMatrix<f64>,
    /// Latent states before any forcing, `M x K`.
    pub latents: DMatrix<f64>,
    /// Latent states fed into each step after forcing, `M x (K - 1)`.
    pub step_inputs: DMatrix<f64>,
    /// Prediction columns produced from a forced state.
    pub forced: Vec<usize>,
}

/// Prediction columns (relative to the first) whose step input was forced.
///
/// Step `s` maps the state at offset `s` to the one at `s + 1`; it is forced
/// when `s` is a multiple of `tau`.
pub fn forced_columns(k: usize, tau: usize) -> Vec<usize> {
    (0..k.saturating_sub(1)).filter(|s| s % tau == 0).map(|s| s + 1).collect()
}

/// Everything the backward pass needs from one sequence.
pub(crate) struct Unroll {
    pub ctx: ContextFeatures,
    pub first_column: usize,
    pub states: Vec<DVector<f64>>,
    pub traces: Vec<StepTrace>,
    pub forced: Vec<bool>,
    pub xi: Option<Vec<DVector<f64>>>,
}

pub(crate) fn check_sequence(model: &DynaMixModel, seq: &Trajectory, config: &TrainConfig) -> Result<()> {
    if seq.dim() != model.n() {
        return Err(Error::arg(format!("sequence has {} rows, model expects {}", seq.dim(), model.n())));
    }
    if config.context_length == 0 || seq.len() <= config.context_length {
        return Err(Error::arg(format!(
            "sequence length {} must exceed the context length {} (which must be positive)",
            seq.len(),
            config.context_length
        )));
    }
    if config.overlap > config.context_length {
        return Err(Error::arg("overlap exceeds the context length"));
    }
    Ok(())
}

/// Standard normal draws for every step of one unroll.
pub(crate) fn step_noise(n: usize, steps: usize, noise_seed: u64) -> Vec<DVector<f64>> {
    let mut rng = seed::rng(noise_seed, "stf-noise", &[]);
    (0..steps).map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))).collect()
}

pub(crate) fn unroll(model: &DynaMixModel, seq: &Trajectory, config: &TrainConfig, noise_seed: Option<u64>) -> Unroll {
    let n = model.n();
    let t_c = config.context_length;
    let i0 = t_c - config.overlap;
    let k = seq.len() - i0;
    let ctx = ContextFeatures::new(&model.gating, &seq.data.columns(0, t_c).into_owned());
    let xi = noise_seed.map(|s| step_noise(n, k - 1, s));
    let scale = model.gating.sigma.map(f64::sqrt);

    let mut z = init_latent(model, &seq.column(i0));
    let mut states = Vec::with_capacity(k);
    let mut traces = Vec::with_capacity(k - 1);
    let mut forced = Vec::with_capacity(k - 1);
    states.push(z.clone());
    for s in 0..k - 1 {
        let force = s % config.tau_force == 0;
        if force {
            z.rows_mut(0, n).copy_from(&seq.data.column(i0 + s));
        }
        let eps = xi.as_ref().map(|xi| scale.component_mul(&xi[s]));
        let trace = traced_step(model, &ctx, &z, eps.as_ref());
        z = trace.z_out.clone();
        states.push(z.clone());
        traces.push(trace);
        forced.push(force);
    }
    Unroll { ctx, first_column: i0, states, traces, forced, xi }
}

/// Unrolls `model` over `seq` with sparse teacher forcing.
///
/// The latent state starts from `init_latent` at column `T_C - overlap`. Every
/// `tau_force` steps, counted from that column, the first `N` latent entries
/// are replaced by the data before the step is taken. The replaced value has
/// already been recorded as a prediction. `noise_seed` enables exploration
/// noise in the attention.
pub fn stf_forward(
    model: &DynaMixModel,
    seq: &Trajectory,
    config: &TrainConfig,
    noise_seed: Option<u64>,
) -> Result<StfForward> {
    check_sequence(model, seq, config)?;
    let u = unroll(model, seq, config, noise_seed);
    let (n, m, k) = (model.n(), model.m(), u.states.len());
    let mut predictions = DMatrix::zeros(n, k);
    let mut latents = DMatrix::zeros(m, k);
    for (s, z) in u.states.iter().enumerate() {
        latents.set_column(s, z);
        predictions.set_column(s, &z.rows(0, n));
    }
    let mut step_inputs = DMatrix::zeros(m, k - 1);
    for (s, tr) in u.traces.iter().enumerate() {
        step_inputs.set_column(s, &tr.z_in);
    }
    Ok(StfForward {
        first_column: u.first_column,
        predictions,
        latents,
        step_inputs,
        forced: forced_columns(k, config.tau_force),
    })
}

/// Mean squared error over all entries.
pub fn mse_loss(predictions: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    assert_eq!(predictions.shape(), truth.shape(), "prediction/truth shape mismatch");
    if predictions.is_empty() {
        return 0.0;
    }
    (predictions - truth).norm_squared() / predictions.len() as f64
}

/// Exploration regularizer `lambda / (1 + trace Sigma)`.
pub fn reg_loss(model: &DynaMixModel, lambda: f64) -> f64 {
    lambda / (1.0 + model.gating.sigma.sum())
}

/// MSE of one unroll against its sequence.
pub(crate) fn unroll_mse(u: &Unroll, seq: &Trajectory, n: usize) -> f64 {
    let k = u.states.len();
    let mut total = 0.0;
    for (s, z) in u.states.iter().enumerate() {
        for i in 0..n {
            let d = z[i] - seq.data[(i, u.first_column + s)];
            total += d * d;
        }
    }
    total / (n * k) as f64
}

/// Accumulates `scale * d(mse)/d(params)` of one unroll into `grad`.
pub(crate) fn backward(model: &DynaMixModel, seq: &Trajectory, u: &Unroll, scale: f64, grad: &mut DynaMixModel) {
    let n = model.n();
    let m = model.m();
    let k = u.states.len();
    let g = &model.gating;
    let t_c = u.ctx.context.ncols();
    let sign = g.attention_sign.factor();
    let loss_scale = scale * 2.0 / (n * k) as f64;
    let sqrt_sigma = g.sigma.map(f64::sqrt);
    let linear = m - model.config.p;

    let mut g_features = DMatrix::<f64>::zeros(n, t_c);
    let mut carry = DVector::<f64>::zeros(m);
    for s in (1..k).rev() {
        // Gradient arriving at the output of step s - 1.
        let mut g_out = carry.clone();
        for i in 0..n {
            g_out[i] += loss_scale * (u.states[s][i] - seq.data[(i, u.first_column + s)]);
        }
        let tr = &u.traces[s - 1];
        let mut g_z = DVector::<f64>::zeros(m);

        // Mixture and experts.
        let mut g_w = DVector::<f64>::zeros(model.j());
        let mut acc = DVector::<f64>::zeros(m);
        for (j, (expert, y)) in model.experts.iter().zip(&tr.proposals).enumerate() {
            g_w[j] = g_out.dot(y);
            let wj = tr.weights[j];
            if wj == 0.0 {
                continue;
            }
            let gy = &g_out * wj;
            let ge = &mut grad.experts[j];
            ge.a += gy.component_mul(&tr.z_in);
            ge.w.ger(1.0, &gy, &tr.phi, 1.0);
            ge.h += &gy;
            g_z += expert.a.component_mul(&gy);
            acc.gemv_tr(1.0, &expert.w, &gy, 1.0);
        }
        for i in 0..m {
            if i < linear || tr.z_in[i] > 0.0 {
                g_z[i] += acc[i];
            }
        }

        // Expert softmax with temperature.
        let g_q = tr.weights.component_mul(&g_w.add_scalar(-tr.weights.dot(&g_w)));
        let g_logits = &g_q / g.t_exp;
        grad.gating.t_exp -= g_q.dot(&tr.logits) / (g.t_exp * g.t_exp);

        // Gating MLP.
        let gm = &mut grad.gating.mlp;
        gm.w2.ger(1.0, &g_logits, &tr.hidden, 1.0);
        gm.b2 += &g_logits;
        let mut g_hidden = g.mlp.w2.tr_mul(&g_logits);
        for (gh, h) in g_hidden.iter_mut().zip(tr.hidden.iter()) {
            if *h <= 0.0 {
                *gh = 0.0;
            }
        }
        gm.w1.ger(1.0, &g_hidden, &tr.mlp_in, 1.0);
        gm.b1 += &g_hidden;
        let g_in = g.mlp.w1.tr_mul(&g_hidden);
        let g_pooled = g_in.rows(0, n).into_owned();
        g_z += g_in.rows(n, m);

        // Attention pooling of the CNN features.
        g_features.ger(1.0, &g_pooled, &tr.attention, 1.0);
        let g_att = u.ctx.features.tr_mul(&g_pooled);
        let g_u = tr.attention.component_mul(&g_att.add_scalar(-tr.attention.dot(&g_att)));

        // u_t = sign * dist_t / T_att, dist_t = sum_i |C_it - p_i|.
        let mut g_p = DVector::<f64>::zeros(n);
        let mut g_t_att = 0.0;
        for (t, col) in u.ctx.context.column_iter().enumerate() {
            let gu = g_u[t];
            if gu == 0.0 {
                continue;
            }
            let mut dist = 0.0;
            for i in 0..n {
                let diff = tr.projected[i] - col[i];
                dist += diff.abs();
                g_p[i] += gu * diff.signum();
            }
            g_t_att -= gu * sign * dist;
        }
        g_p *= sign / g.t_att;
        grad.gating.t_att += g_t_att / (g.t_att * g.t_att);

        // p = D z + sqrt(Sigma) xi.
        grad.gating.d.ger(1.0, &g_p, &tr.z_in, 1.0);
        g_z.gemv_tr(1.0, &g.d, &g_p, 1.0);
        if let Some(xi) = &u.xi {
            for i in 0..n {
                if sqrt_sigma[i] > 0.0 {
                    grad.gating.sigma[i] += g_p[i] * xi[s - 1][i] / (2.0 * sqrt_sigma[i]);
                }
            }
        }

        // A forced input took its first N entries from the data.
        if u.forced[s - 1] {
            g_z.rows_mut(0, n).fill(0.0);
        }
        carry = g_z;
    }

    // z_0 = [x; L x]: only the lift depends on parameters.
    let x0 = seq.data.column(u.first_column);
    grad.lift.ger(1.0, &carry.rows(n, m - n), &x0, 1.0);

    // features = proj * hidden, hidden = conv_curr C_t + conv_prev C_{t-1}.
    let hidden = conv_hidden(g, &u.ctx.context);
    grad.gating.proj.gemm(1.0, &g_features, &hidden.transpose(), 1.0);
    let g_hidden = g.proj.tr_mul(&g_features);
    grad.gating.conv_curr.gemm(1.0, &g_hidden, &u.ctx.context.transpose(), 1.0);
    if t_c > 1 {
        grad.gating.conv_prev.gemm(
            1.0,
            &g_hidden.columns(1, t_c - 1),
            &u.ctx.context.columns(0, t_c - 1).transpose(),
            1.0,
        );
    }
}
