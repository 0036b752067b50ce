//! Benchmark ODE systems, integration, and corpus generation.

pub mod catalog;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::trajectory::Trajectory;

pub const DEFAULT_TRANSIENT_STEPS: usize = 1000;
pub const DEFAULT_NOISE_LEVEL: f64 = 0.05;

/// `rhs(state, params, out)` writes the time derivative of `state` into `out`.
pub type VectorField = fn(&[f64], &[f64], &mut [f64]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Chaotic,
    Cyclic,
}

#[derive(Clone)]
pub struct SystemDef {
    pub name: String,
    pub dim: usize,
    pub rhs: VectorField,
    /// Named constants passed to `rhs` in declaration order.
    pub params: Vec<(String, f64)>,
    /// Integration step, also the default sampling interval.
    pub default_dt: f64,
    pub transient_steps: usize,
    /// Per-dimension `(lo, hi)` box that initial conditions are drawn from.
    pub ic_box: Vec<(f64, f64)>,
    pub regime: Regime,
}

impl std::fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("default_dt", &self.default_dt)
            .field("transient_steps", &self.transient_steps)
            .field("ic_box", &self.ic_box)
            .field("regime", &self.regime)
            .finish()
    }
}

impl SystemDef {
    /// A system from an arbitrary vector field, mostly useful for tests.
    pub fn custom(name: &str, dim: usize, rhs: VectorField, default_dt: f64) -> Self {
        SystemDef {
            name: name.to_string(),
            dim,
            rhs,
            params: Vec::new(),
            default_dt,
            transient_steps: 0,
            ic_box: vec![(-1.0, 1.0); dim],
            regime: Regime::Chaotic,
        }
    }

    pub fn param_values(&self) -> Vec<f64> {
        self.params.iter().map(|(_, v)| *v).collect()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn eval(&self, state: &[f64], out: &mut [f64]) {
        (self.rhs)(state, &self.param_values(), out);
    }
}

/// Overrides applied on top of a built-in system to register a new entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemVariant {
    pub name: String,
    pub base: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub dt: Option<f64>,
    pub transient_steps: Option<usize>,
    pub ic_box: Option<Vec<(f64, f64)>>,
}

/// Named collection of systems: the built-ins plus configured variants.
#[derive(Debug, Clone)]
pub struct Catalog {
    systems: Vec<SystemDef>,
}

impl Default for Catalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Catalog {
    pub fn builtin() -> Self {
        Catalog { systems: catalog::builtin() }
    }

    pub fn names(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Result<SystemDef> {
        self.systems
            .iter()
            .find(|s| s.name == name)
            .cloned()
            .ok_or_else(|| Error::UnknownSystem(name.to_string()))
    }

    pub fn resolve(&self, names: &[String]) -> Result<Vec<SystemDef>> {
        names.iter().map(|n| self.get(n)).collect()
    }

    pub fn register(&mut self, variant: &SystemVariant) -> Result<()> {
        if self.systems.iter().any(|s| s.name == variant.name) {
            return Err(Error::Config(format!("system `{}` already registered", variant.name)));
        }
        let mut def = self.get(&variant.base)?;
        def.name = variant.name.clone();
        for (key, value) in &variant.params {
            let slot = def
                .params
                .iter_mut()
                .find(|(k, _)| k == key)
                .ok_or_else(|| {
                    Error::Config(format!("system `{}` has no parameter `{key}`", variant.base))
                })?;
            slot.1 = *value;
        }
        if let Some(dt) = variant.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("dt for `{}` must be positive", variant.name)));
            }
            def.default_dt = dt;
        }
        if let Some(steps) = variant.transient_steps {
            def.transient_steps = steps;
        }
        if let Some(ic) = &variant.ic_box {
            if ic.len() != def.dim || ic.iter().any(|(lo, hi)| !(lo <= hi)) {
                return Err(Error::Config(format!("bad ic_box for `{}`", variant.name)));
            }
            def.ic_box = ic.clone();
        }
        self.systems.push(def);
        Ok(())
    }
}

fn rk4_step(system: &SystemDef, params: &[f64], x: &mut [f64], h: f64, k: &mut [Vec<f64>; 5]) {
    let n = x.len();
    let [k1, k2, k3, k4, tmp] = k;
    (system.rhs)(x, params, k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    (system.rhs)(tmp, params, k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    (system.rhs)(tmp, params, k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    (system.rhs)(tmp, params, k4);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Fixed-step classic Runge-Kutta; column 0 is `x0`, `n_steps` columns total.
pub fn integrate_rk4(system: &SystemDef, x0: &[f64], dt: f64, n_steps: usize) -> Result<Trajectory> {
    integrate_sampled(system, x0, dt, 1, n_steps)
}

/// Integrates with step `h`, recording every `substeps`-th state.
fn integrate_sampled(
    system: &SystemDef,
    x0: &[f64],
    h: f64,
    substeps: usize,
    n_steps: usize,
) -> Result<Trajectory> {
    if x0.len() != system.dim {
        return Err(Error::arg(format!(
            "initial condition has length {}, system `{}` has dimension {}",
            x0.len(),
            system.name,
            system.dim
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::arg(format!("dt must be positive, got {h}")));
    }
    if n_steps == 0 {
        return Err(Error::arg("n_steps must be at least 1"));
    }
    let params = system.param_values();
    let mut k: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; system.dim]);
    let mut x = x0.to_vec();
    let mut data = DMatrix::zeros(system.dim, n_steps);
    data.set_column(0, &DVector::from_column_slice(&x));
    for step in 1..n_steps {
        for _ in 0..substeps {
            rk4_step(system, &params, &mut x, h, &mut k);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        data.set_column(step, &DVector::from_column_slice(&x));
    }
    Ok(Trajectory { data, dt: h * substeps as f64, name: Some(system.name.clone()) })
}

fn initial_condition(system: &SystemDef, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, "initial-condition", &[]);
    system.ic_box.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect()
}

/// Random initial condition from `seed`, transient discarded, `n_steps` columns
/// sampled at the system's default step.
pub fn simulate(system: &SystemDef, seed: u64, n_steps: usize) -> Result<Trajectory> {
    simulate_sampled(system, seed, n_steps, system.default_dt)
}

/// Like [`simulate`] but sampled every `sample_dt` time units. The integration
/// step is the largest divisor of `sample_dt` not exceeding the default step.
pub fn simulate_sampled(system: &SystemDef, seed: u64, n_steps: usize, sample_dt: f64) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::arg("n_steps must be at least 1"));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::arg(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let substeps = ((sample_dt / system.default_dt) - 1e-9).ceil().max(1.0) as usize;
    let h = sample_dt / substeps as f64;
    let x0 = initial_condition(system, seed);
    // Transient measured in time units of the default step.
    let transient_time = system.transient_steps as f64 * system.default_dt;
    let transient_samples = (transient_time / sample_dt).round() as usize;
    let full = integrate_sampled(system, &x0, h, substeps, transient_samples + n_steps)?;
    Ok(full.slice(transient_samples, transient_samples + n_steps))
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Adds i.i.d. Gaussian noise scaled by `level` times each row's std.
pub fn add_noise(traj: &Trajectory, level: f64, seed: u64) -> Result<Trajectory> {
    if !(level >= 0.0) {
        return Err(Error::arg(format!("noise level must be non-negative, got {level}")));
    }
    let mut out = traj.clone();
    if level == 0.0 {
        return Ok(out);
    }
    let mut rng = seed::rng(seed, "observation-noise", &[]);
    for i in 0..traj.dim() {
        let (_, std) = population_std(traj.data.row(i).iter().copied());
        let scale = level * std;
        for t in 0..traj.len() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            out.data[(i, t)] += scale * xi;
        }
    }
    Ok(out)
}

/// Per-dimension affine parameters produced by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, traj: &Trajectory) -> Trajectory {
        let mut out = traj.clone();
        for (i, mut row) in out.data.row_iter_mut().enumerate() {
            row.apply(|v| *v = (*v - self.mean[i]) / self.std[i]);
        }
        out
    }

    pub fn invert(&self, traj: &Trajectory) -> Trajectory {
        let mut out = traj.clone();
        for (i, mut row) in out.data.row_iter_mut().enumerate() {
            row.apply(|v| *v = *v * self.std[i] + self.mean[i]);
        }
        out
    }
}

/// Rescales every row to zero mean and unit population std.
pub fn standardize(traj: &Trajectory) -> Result<(Trajectory, Standardization)> {
    if traj.len() < 2 {
        return Err(Error::arg("standardization needs at least 2 time steps"));
    }
    let mut mean = Vec::with_capacity(traj.dim());
    let mut std = Vec::with_capacity(traj.dim());
    for i in 0..traj.dim() {
        let (m, s) = population_std(traj.data.row(i).iter().copied());
        if s < 1e-12 {
            return Err(Error::DegenerateDimension { row: i });
        }
        mean.push(m);
        std.push(s);
    }
    let params = Standardization { mean, std };
    Ok((params.apply(traj), params))
}

/// Equal-length standardized sequences from one or more systems.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sequences: Vec<Trajectory>,
    pub context_length: usize,
    pub overlap: usize,
    /// Distinct source system names in first-seen order.
    pub provenance: Vec<String>,
    pub params: CorpusParams,
}

/// Generation parameters, kept with the corpus for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub systems: Vec<String>,
    pub sequences_per_system: usize,
    pub seq_len: usize,
    pub context_length: usize,
    pub overlap: usize,
    pub noise_level: f64,
    pub seed: u64,
    /// Literature parameter values per system, by name.
    pub system_params: BTreeMap<String, BTreeMap<String, f64>>,
    pub system_dt: BTreeMap<String, f64>,
}

impl Corpus {
    pub fn dim(&self) -> usize {
        self.sequences.first().map_or(0, Trajectory::dim)
    }

    pub fn seq_len(&self) -> usize {
        self.sequences.first().map_or(0, Trajectory::len)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, t) = (self.dim(), self.seq_len());
        if self.context_length >= t && !self.sequences.is_empty() {
            return Err(Error::arg(format!(
                "context length {} must be below sequence length {t}",
                self.context_length
            )));
        }
        if self.overlap > self.context_length {
            return Err(Error::arg("overlap must not exceed context length"));
        }
        for (k, s) in self.sequences.iter().enumerate() {
            if s.dim() != n || s.len() != t {
                return Err(Error::arg(format!("sequence {k} has shape {}x{}, expected {n}x{t}", s.dim(), s.len())));
            }
            if s.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::arg(format!("sequence {k} has non-finite entries")));
            }
        }
        Ok(())
    }
}

/// Simulates, noises, and standardizes `sequences_per_system` windows of
/// each system. Per-sequence seeds depend only on `(seed, system, sequence)`.
pub fn generate_corpus(
    systems: &[SystemDef],
    sequences_per_system: usize,
    seq_len: usize,
    context_length: usize,
    overlap: usize,
    noise_level: f64,
    seed: u64,
) -> Result<Corpus> {
    if context_length >= seq_len {
        return Err(Error::arg(format!(
            "context length {context_length} must be below sequence length {seq_len}"
        )));
    }
    if overlap > context_length {
        return Err(Error::arg(format!(
            "overlap {overlap} must not exceed context length {context_length}"
        )));
    }
    if !(noise_level >= 0.0) {
        return Err(Error::arg("noise level must be non-negative"));
    }
    if let Some(first) = systems.first() {
        if let Some(other) = systems.iter().find(|s| s.dim != first.dim) {
            return Err(Error::arg(format!(
                "systems must share a dimension: `{}` has {}, `{}` has {}",
                first.name, first.dim, other.name, other.dim
            )));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..systems.len())
        .flat_map(|s| (0..sequences_per_system).map(move |k| (s, k)))
        .collect();
    let sequences = jobs
        .par_iter()
        .map(|&(s, k)| {
            let system = &systems[s];
            let sim_seed = seed::derive(seed, "corpus-simulate", &[s as u64, k as u64]);
            let noise_seed = seed::derive(seed, "corpus-noise", &[s as u64, k as u64]);
            let raw = simulate(system, sim_seed, seq_len)?;
            let noisy = add_noise(&raw, noise_level, noise_seed)?;
            let (std, _) = standardize(&noisy)?;
            Ok(std.with_name(system.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut provenance: Vec<String> = Vec::new();
    for s in systems {
        if !provenance.contains(&s.name) {
            provenance.push(s.name.clone());
        }
    }
    let params = CorpusParams {
        systems: systems.iter().map(|s| s.name.clone()).collect(),
        sequences_per_system,
        seq_len,
        context_length,
        overlap,
        noise_level,
        seed,
        system_params: systems
            .iter()
            .map(|s| (s.name.clone(), s.params.iter().cloned().collect()))
            .collect(),
        system_dt: systems.iter().map(|s| (s.name.clone(), s.default_dt)).collect(),
    };
    Ok(Corpus { sequences, context_length, overlap, provenance, params })
}
