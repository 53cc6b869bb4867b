//! Local exploration: choose a batch that most reduces the worst-case posterior
//! gradient variance at the current iterate.
//!
//! For existing locations `X`, a hypothetical batch `Z` and the iterate `x`,
//! the gradient covariance trace after conditioning on `X ∪ Z` is computed
//! through the block factorization of `K_{X∪Z}`:
//!
//! ```text
//! tr = d·a(0) - ‖L⁻¹G_Xᵀ‖² - ‖L_S⁻¹ Rᵀ‖²,   S = K_ZZ + σ²I - VᵀV,   R = G_Z - UᵀV
//! ```
//!
//! with `L` the factor of `K_XX + σ²I`, `U = L⁻¹G_Xᵀ` and `V = L⁻¹K_XZ`. The
//! `X` part is computed once per iterate. Only locations enter, never responses.

use rand::Rng;

use crate::domain::BoxDomain;
use crate::error::{LcboError, Result};
use crate::gp::{factorize, GPModel};
use crate::kernels::{sq_dist, KernelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionConfig {
    pub batch_size: usize,
    /// Half-width of the local search cube, in unit coordinates.
    pub local_radius: f64,
    pub lse_temperature: f64,
    pub restarts: usize,
    pub max_steps: usize,
    /// Adam learning rate.
    pub step_length: f64,
    /// Central-difference step for the acquisition gradient.
    pub fd_step: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            batch_size: 5,
            local_radius: 0.1,
            lse_temperature: 20.0,
            restarts: 10,
            max_steps: 50,
            step_length: 0.01,
            fd_step: 1e-4,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(LcboError::InvalidParameter(msg.to_string()));
        if self.batch_size == 0 {
            return bad("acquisition batch size must be at least 1");
        }
        if !(self.local_radius > 0.0 && self.local_radius <= 1.0) {
            return bad("local radius must lie in (0, 1]");
        }
        if !(self.lse_temperature > 0.0) {
            return bad("LogSumExp temperature must be positive");
        }
        if self.restarts == 0 {
            return bad("at least one restart is required");
        }
        if !(self.step_length > 0.0) || !(self.fd_step > 0.0) {
            return bad("step lengths must be positive");
        }
        Ok(())
    }
}

/// `(1/α)·log Σ exp(α·vᵢ)`, shifted by the maximum.
pub fn log_sum_exp(values: &[f64], temperature: f64) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = values.iter().map(|v| (temperature * (v - max)).exp()).sum();
    max + s.ln() / temperature
}

/// In-place lower Cholesky of a row-major `n×n` matrix. Returns false if not PD.
fn cholesky_flat(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Forward substitution with a row-major lower factor.
fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(p, q)| p * q).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Fixed part of the trace computation for one kernel spec and one iterate.
#[derive(Debug, Clone)]
struct TraceEvaluator {
    spec: KernelSpec,
    noise_var: f64,
    center: Vec<f64>,
    existing: Vec<Vec<f64>>,
    /// Row-major lower factor of `K_XX + σ²I`.
    chol: Vec<f64>,
    /// `U = L⁻¹G_Xᵀ` stored as `d` rows of length `n`.
    u_t: Vec<f64>,
    base: f64,
}

impl TraceEvaluator {
    fn new(spec: KernelSpec, noise_var: f64, existing: &[Vec<f64>], center: &[f64]) -> Result<Self> {
        let n = existing.len();
        let d = center.len();
        if let Some(p) = existing.iter().find(|p| p.len() != d) {
            return Err(LcboError::DimensionMismatch { expected: d, found: p.len() });
        }
        let (l, _) = factorize(&spec, existing, noise_var)?;
        let mut chol = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                chol[i * n + j] = l[(i, j)];
            }
        }
        let mut u_t = vec![0.0; d * n];
        let mut col = vec![0.0; n];
        for c in 0..d {
            for (i, p) in existing.iter().enumerate() {
                col[i] = -spec.grad_coeff_sq(sq_dist(center, p)) * (center[c] - p[c]);
            }
            forward_solve(&chol, n, &mut col);
            u_t[c * n..(c + 1) * n].copy_from_slice(&col);
        }
        let base = d as f64 * spec.grad_prior_var() - u_t.iter().map(|v| v * v).sum::<f64>();
        Ok(Self {
            spec,
            noise_var,
            center: center.to_vec(),
            existing: existing.to_vec(),
            chol,
            u_t,
            base,
        })
    }

    fn n(&self) -> usize {
        self.existing.len()
    }

    fn d(&self) -> usize {
        self.center.len()
    }

    /// `v = L⁻¹k(X, z)` and `r = ∇₁k(x, z) - Uᵀv`.
    fn column(&self, z: &[f64], v: &mut [f64], r: &mut [f64]) {
        let n = self.n();
        for (vi, p) in v.iter_mut().zip(&self.existing) {
            *vi = self.spec.value_sq(sq_dist(z, p));
        }
        forward_solve(&self.chol, n, v);
        let a = self.spec.grad_coeff_sq(sq_dist(&self.center, z));
        for c in 0..self.d() {
            let proj: f64 = self.u_t[c * n..(c + 1) * n].iter().zip(v.iter()).map(|(p, q)| p * q).sum();
            r[c] = -a * (self.center[c] - z[c]) - proj;
        }
    }

    fn state(&self, batch: &[Vec<f64>]) -> BatchState {
        let (n, d, b) = (self.n(), self.d(), batch.len());
        let mut v = vec![0.0; b * n];
        let mut r = vec![0.0; b * d];
        for (j, z) in batch.iter().enumerate() {
            let (vj, rj) = (&mut v[j * n..(j + 1) * n], &mut r[j * d..(j + 1) * d]);
            self.column(z, vj, rj);
        }
        let mut s = vec![0.0; b * b];
        for j in 0..b {
            for l in 0..=j {
                let kv = if j == l {
                    self.spec.outputscale + self.noise_var
                } else {
                    self.spec.value_sq(sq_dist(&batch[j], &batch[l]))
                };
                let dot: f64 = v[j * n..(j + 1) * n].iter().zip(&v[l * n..(l + 1) * n]).map(|(p, q)| p * q).sum();
                s[j * b + l] = kv - dot;
                s[l * b + j] = kv - dot;
            }
        }
        BatchState { batch: batch.to_vec(), v, r, s }
    }

    /// Trace for the state's batch, optionally with row `j` replaced by `z`.
    fn trace(&self, state: &BatchState, replace: Option<(usize, &[f64])>, scratch: &mut Scratch) -> f64 {
        let (n, d, b) = (self.n(), self.d(), state.batch.len());
        if b == 0 {
            return self.base;
        }
        scratch.s.clear();
        scratch.s.extend_from_slice(&state.s);
        scratch.r.clear();
        scratch.r.extend_from_slice(&state.r);
        if let Some((j, z)) = replace {
            scratch.v.resize(n, 0.0);
            scratch.rj.resize(d, 0.0);
            let (vj, rj) = (&mut scratch.v, &mut scratch.rj);
            self.column(z, vj, rj);
            scratch.r[j * d..(j + 1) * d].copy_from_slice(rj);
            for l in 0..b {
                let kv = if l == j {
                    self.spec.outputscale + self.noise_var
                } else {
                    self.spec.value_sq(sq_dist(z, &state.batch[l]))
                };
                let other = if l == j { &vj[..] } else { &state.v[l * n..(l + 1) * n] };
                let dot: f64 = vj.iter().zip(other).map(|(p, q)| p * q).sum();
                scratch.s[j * b + l] = kv - dot;
                scratch.s[l * b + j] = kv - dot;
            }
        }
        if !cholesky_flat(&mut scratch.s, b) {
            // numerically singular Schur complement: treat the batch as uninformative
            return self.base;
        }
        // ‖L_S⁻¹ Rᵀ‖² column by column of Rᵀ
        let mut reduction = 0.0;
        scratch.col.resize(b, 0.0);
        for c in 0..d {
            for j in 0..b {
                scratch.col[j] = scratch.r[j * d + c];
            }
            forward_solve(&scratch.s, b, &mut scratch.col);
            reduction += scratch.col.iter().map(|v| v * v).sum::<f64>();
        }
        (self.base - reduction).max(0.0)
    }
}

#[derive(Debug, Clone)]
struct BatchState {
    batch: Vec<Vec<f64>>,
    v: Vec<f64>,
    r: Vec<f64>,
    s: Vec<f64>,
}

#[derive(Debug, Default)]
struct Scratch {
    s: Vec<f64>,
    r: Vec<f64>,
    v: Vec<f64>,
    rj: Vec<f64>,
    col: Vec<f64>,
}

fn check_points(points: &[Vec<f64>], d: usize) -> Result<()> {
    for p in points {
        if p.len() != d {
            return Err(LcboError::DimensionMismatch { expected: d, found: p.len() });
        }
    }
    Ok(())
}

/// Trace of the posterior gradient covariance at `center` after conditioning on `existing ∪ batch`.
pub fn grad_var_trace(
    spec: &KernelSpec,
    noise_var: f64,
    existing: &[Vec<f64>],
    batch: &[Vec<f64>],
    center: &[f64],
) -> Result<f64> {
    check_points(batch, center.len())?;
    let ev = TraceEvaluator::new(*spec, noise_var, existing, center)?;
    let st = ev.state(batch);
    Ok(ev.trace(&st, None, &mut Scratch::default()))
}

/// Smoothed worst case over outputs of [`grad_var_trace`].
pub fn acquisition_value(
    specs: &[KernelSpec],
    noise_var: f64,
    existing: &[Vec<f64>],
    batch: &[Vec<f64>],
    center: &[f64],
    temperature: f64,
) -> Result<f64> {
    let traces = specs
        .iter()
        .map(|s| grad_var_trace(s, noise_var, existing, batch, center))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_sum_exp(&traces, temperature))
}

/// Evaluators shared between outputs with identical kernels.
struct Objective {
    evaluators: Vec<TraceEvaluator>,
    /// Evaluator index per output.
    output_group: Vec<usize>,
    temperature: f64,
}

impl Objective {
    fn new(specs: &[KernelSpec], noise_var: f64, existing: &[Vec<f64>], center: &[f64], temperature: f64) -> Result<Self> {
        let mut evaluators: Vec<TraceEvaluator> = Vec::new();
        let mut output_group = Vec::with_capacity(specs.len());
        for spec in specs {
            match evaluators.iter().position(|e| e.spec.same_as(spec)) {
                Some(i) => output_group.push(i),
                None => {
                    evaluators.push(TraceEvaluator::new(*spec, noise_var, existing, center)?);
                    output_group.push(evaluators.len() - 1);
                }
            }
        }
        Ok(Self { evaluators, output_group, temperature })
    }

    fn states(&self, batch: &[Vec<f64>]) -> Vec<BatchState> {
        self.evaluators.iter().map(|e| e.state(batch)).collect()
    }

    fn value(&self, states: &[BatchState], replace: Option<(usize, &[f64])>, scratch: &mut Scratch, buf: &mut Vec<f64>) -> f64 {
        let group_traces: Vec<f64> = self
            .evaluators
            .iter()
            .zip(states)
            .map(|(e, s)| e.trace(s, replace, scratch))
            .collect();
        buf.clear();
        buf.extend(self.output_group.iter().map(|g| group_traces[*g]));
        log_sum_exp(buf, self.temperature)
    }
}

fn lexicographic_less(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Result of one acquisition minimization.
#[derive(Debug, Clone)]
pub struct AcquisitionOutcome {
    pub batch: Vec<Vec<f64>>,
    pub value: f64,
    /// Per restart: (value at initialization, best value reached).
    pub restart_values: Vec<(f64, f64)>,
}

/// Multi-start Adam over the whole batch, restricted to `domain ∩ [x - δ, x + δ]`.
///
/// `center` and `domain` are in the model's unit coordinates. Gradients are
/// central differences; each restart returns the best batch it visited.
pub fn minimize_acquisition<R: Rng + ?Sized>(
    model: &GPModel,
    center: &[f64],
    config: &AcquisitionConfig,
    domain: &BoxDomain,
    rng: &mut R,
) -> Result<AcquisitionOutcome> {
    config.validate()?;
    let d = model.dim();
    if center.len() != d || domain.dim() != d {
        return Err(LcboError::DimensionMismatch { expected: d, found: center.len() });
    }
    let local = domain.local_box(&domain.project(center)?, config.local_radius)?;
    let objective = Objective::new(
        model.specs(),
        model.dataset().noise_var(),
        model.dataset().inputs(),
        center,
        config.lse_temperature,
    )?;
    let b = config.batch_size;
    let h = config.fd_step;
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut scratch = Scratch::default();
    let mut buf = Vec::new();

    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut restart_values = Vec::with_capacity(config.restarts);
    for _ in 0..config.restarts {
        let mut z: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..d).map(|c| rng.gen_range(local.lower()[c]..=local.upper()[c])).collect())
            .collect();
        let mut states = objective.states(&z);
        let init_value = objective.value(&states, None, &mut scratch, &mut buf);
        let mut run_best = (init_value, z.clone());
        let mut m = vec![0.0; b * d];
        let mut v = vec![0.0; b * d];
        let mut grad = vec![0.0; b * d];
        for step in 1..=config.max_steps {
            for j in 0..b {
                let mut zj = z[j].clone();
                for c in 0..d {
                    let orig = zj[c];
                    zj[c] = orig + h;
                    let fp = objective.value(&states, Some((j, &zj)), &mut scratch, &mut buf);
                    zj[c] = orig - h;
                    let fm = objective.value(&states, Some((j, &zj)), &mut scratch, &mut buf);
                    zj[c] = orig;
                    grad[j * d + c] = (fp - fm) / (2.0 * h);
                }
            }
            if grad.iter().all(|g| *g == 0.0) {
                break;
            }
            let bc1 = 1.0 - f64::powi(beta1, step as i32);
            let bc2 = 1.0 - f64::powi(beta2, step as i32);
            for j in 0..b {
                for c in 0..d {
                    let k = j * d + c;
                    m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                    v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                    z[j][c] -= config.step_length * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
                }
                local.project_in_place(&mut z[j]);
            }
            states = objective.states(&z);
            let value = objective.value(&states, None, &mut scratch, &mut buf);
            if value < run_best.0 {
                run_best = (value, z.clone());
            }
        }
        restart_values.push((init_value, run_best.0));
        let better = match &best {
            None => true,
            Some((bv, bz)) => run_best.0 < *bv || (run_best.0 == *bv && lexicographic_less(&run_best.1, bz)),
        };
        if better {
            best = Some(run_best);
        }
    }
    let (value, batch) = best.expect("at least one restart");
    Ok(AcquisitionOutcome { batch, value, restart_values })
}
