//! The single-loop optimizer: repeated evaluations at the iterate plus an
//! exploration batch, a GP refresh, and one projected step on the quadratic
//! penalty built from posterior means.
//!
//! Iterates move in the model's unit coordinates; records report points in the
//! problem's original coordinates.

use crate::acquisition::{minimize_acquisition, AcquisitionConfig};
use crate::benchmarks::{noisy_observe, ConstraintSense, ProblemDef};
use crate::domain::BoxDomain;
use crate::error::{LcboError, Result};
use crate::gp::{fit_hyperparameters, Dataset, GPModel, HyperPriors, Standardizer, DEFAULT_NOISE_VAR};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::rng::{stream_rng, STREAM_ACQUISITION, STREAM_NOISE};

/// Below this norm the surrogate gradient counts as zero and the iterate stays put.
pub const ZERO_GRAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// `η_k = s / √k`
    Decaying,
    /// `η_k = s`
    Constant,
}

/// Per-iteration sizes `(b1, b2)` of the repeated and the exploration batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSchedule {
    Fixed { repeats: usize, explore: usize },
    /// `(5, d)`
    Large,
    /// `(⌊ln(k+1) + 1⌋, ⌊k/2 + 5⌋)`
    Growing,
    /// `(k, d·k²)`
    Theoretical,
}

impl BatchSchedule {
    pub fn sizes(&self, k: usize, d: usize) -> (usize, usize) {
        match *self {
            BatchSchedule::Fixed { repeats, explore } => (repeats, explore),
            BatchSchedule::Large => (5, d),
            BatchSchedule::Growing => (((k as f64 + 1.0).ln() + 1.0).floor() as usize, (0.5 * k as f64 + 5.0).floor() as usize),
            BatchSchedule::Theoretical => (k, d * k * k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcboConfig {
    pub step_scale: f64,
    pub step_mode: StepMode,
    pub penalty_scale: f64,
    pub penalty_exponent: f64,
    pub batch_schedule: BatchSchedule,
    /// GP window; `None` means `max(2d, 2·(b1 + b2))` at the first iteration.
    pub window: Option<usize>,
    /// Acquisition settings; its `batch_size` is replaced by the schedule's `b2`.
    pub acquisition: AcquisitionConfig,
    pub refit_period: usize,
    /// Noise variance of the fitted GPs, in standardized units.
    pub noise_var: f64,
    pub priors: HyperPriors,
    pub kernel_family: KernelFamily,
    /// Use the problem's generating hyperparameters and never refit.
    pub use_ground_truth: bool,
    /// Overrides the problem's own constraint sense.
    pub constraint_sense: Option<ConstraintSense>,
    /// Maximum oracle calls, each output of each point counting once.
    pub budget: usize,
}

impl Default for LcboConfig {
    fn default() -> Self {
        Self {
            step_scale: 0.25,
            step_mode: StepMode::Decaying,
            penalty_scale: 10.0,
            penalty_exponent: 0.25,
            batch_schedule: BatchSchedule::Fixed { repeats: 2, explore: 5 },
            window: None,
            acquisition: AcquisitionConfig::default(),
            refit_period: 5,
            noise_var: DEFAULT_NOISE_VAR,
            priors: HyperPriors::default(),
            kernel_family: KernelFamily::Rbf,
            use_ground_truth: false,
            constraint_sense: None,
            budget: usize::MAX,
        }
    }
}

impl LcboConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(LcboError::InvalidParameter(msg.to_string()));
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return bad("step scale must be positive");
        }
        if !(self.penalty_scale > 0.0 && self.penalty_scale.is_finite()) {
            return bad("penalty scale must be positive");
        }
        if !(self.penalty_exponent >= 0.0 && self.penalty_exponent.is_finite()) {
            return bad("penalty exponent must be nonnegative");
        }
        if let BatchSchedule::Fixed { explore: 0, .. } = self.batch_schedule {
            return bad("exploration batch must be nonempty");
        }
        if self.window == Some(0) {
            return bad("window must be positive");
        }
        if self.refit_period == 0 {
            return bad("refit period must be positive");
        }
        if !(self.noise_var > 0.0) {
            return bad("noise variance must be positive");
        }
        self.acquisition.validate()
    }

    pub fn step_size(&self, k: usize) -> f64 {
        match self.step_mode {
            StepMode::Decaying => self.step_scale / (k as f64).sqrt(),
            StepMode::Constant => self.step_scale,
        }
    }

    pub fn penalty(&self, k: usize) -> f64 {
        self.penalty_scale * (k as f64).powf(self.penalty_exponent)
    }

    pub fn window_for(&self, d: usize) -> usize {
        self.window.unwrap_or_else(|| {
            let (b1, b2) = self.batch_schedule.sizes(1, d);
            (2 * d).max(2 * (b1 + b2))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub x_k: Vec<f64>,
    pub x_next: Vec<f64>,
    pub eta: f64,
    pub rho: f64,
    /// Repeated points first, then the exploration batch.
    pub batch: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    /// Surrogate penalty gradient at `x_k`, in unit coordinates.
    pub grad_hat: Vec<f64>,
    /// Multiplier estimate from posterior means at `x_next`.
    pub lambda_hat: Vec<f64>,
    pub rs_hat: f64,
    pub rf_hat: f64,
    pub rs_true: Option<f64>,
    pub rf_true: Option<f64>,
    pub oracle_calls: usize,
    pub refit: bool,
}

/// Initial data and starting point, in original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LcboStart {
    pub points: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub x1: Vec<f64>,
}

/// `f + (ρ/2)‖v(c)‖²` with `v` the violation map of `sense`.
pub fn penalty_value(f: f64, c: &[f64], rho: f64, sense: ConstraintSense) -> f64 {
    f + 0.5 * rho * c.iter().map(|v| sense.violation(*v).powi(2)).sum::<f64>()
}

/// `∇μ_f + ρ Σ v(μ_ci) ∇μ_ci` at a unit-coordinate point.
pub fn penalized_grad(model: &GPModel, x: &[f64], rho: f64, sense: ConstraintSense) -> Result<Vec<f64>> {
    let (_, mut g) = model.mean_and_grad(x, 0)?;
    for i in 1..model.outputs() {
        let (mu, gc) = model.mean_and_grad(x, i)?;
        let w = rho * sense.violation(mu);
        if w != 0.0 {
            g.iter_mut().zip(&gc).for_each(|(a, b)| *a += w * b);
        }
    }
    Ok(g)
}

/// Projected step of length `η` along the normalized negative gradient.
pub fn exploit_step(x: &[f64], grad: &[f64], eta: f64, domain: &BoxDomain) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(LcboError::InvalidParameter(format!("step size must be positive, got {eta}")));
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(LcboError::NonFinite("penalized gradient"));
    }
    if norm <= ZERO_GRAD_TOL {
        return domain.project(x);
    }
    let y: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi - eta * gi / norm).collect();
    domain.project(&y)
}

/// Plain projected gradient step `P(x − η g)`.
pub fn projected_step(x: &[f64], grad: &[f64], eta: f64, domain: &BoxDomain) -> Result<Vec<f64>> {
    if grad.len() != x.len() {
        return Err(LcboError::DimensionMismatch { expected: x.len(), found: grad.len() });
    }
    let y: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi - eta * gi).collect();
    domain.project(&y)
}

/// Where residual gradients and values come from.
#[derive(Clone, Copy)]
pub enum ResidualSource<'a> {
    /// Posterior means; points in unit coordinates.
    Model(&'a GPModel),
    /// The benchmark's exact oracle; points in original coordinates.
    Analytic(&'a ProblemDef),
}

/// Stationarity residual `dist²(−(∇f + ∇cᵀλ), N_X(x))` and feasibility residual `‖v(c)‖²`.
pub fn kkt_residuals(
    x: &[f64],
    lambda: &[f64],
    source: ResidualSource<'_>,
    sense: ConstraintSense,
    domain: &BoxDomain,
) -> Result<(f64, f64)> {
    let (values, grads) = match source {
        ResidualSource::Model(model) => {
            let mut values = Vec::with_capacity(model.outputs());
            let mut grads = Vec::with_capacity(model.outputs());
            for j in 0..model.outputs() {
                let (m, g) = model.mean_and_grad(x, j)?;
                values.push(m);
                grads.push(g);
            }
            (values, grads)
        }
        ResidualSource::Analytic(problem) => (problem.evaluate(x)?, problem.gradients(x)?),
    };
    if lambda.len() + 1 != values.len() {
        return Err(LcboError::DimensionMismatch { expected: values.len() - 1, found: lambda.len() });
    }
    let mut g = grads[0].clone();
    for (l, gc) in lambda.iter().zip(&grads[1..]) {
        g.iter_mut().zip(gc).for_each(|(a, b)| *a += l * b);
    }
    let rs = domain.normal_cone_dist_sq(x, &g)?;
    let rf = values[1..].iter().map(|c| sense.violation(*c).powi(2)).sum();
    Ok((rs, rf))
}

/// Runs from the centre of the domain with no prior data.
pub fn run(problem: &ProblemDef, config: &LcboConfig, seed: u64) -> Result<Vec<IterationRecord>> {
    let start = LcboStart {
        points: Vec::new(),
        observations: Vec::new(),
        x1: problem.domain.center(),
    };
    run_from(problem, config, &start, seed)
}

fn initial_model(problem: &ProblemDef, config: &LcboConfig, dataset: Dataset) -> Result<GPModel> {
    let d = problem.dim();
    let unit = BoxDomain::unit(d);
    if config.use_ground_truth {
        let truth = problem
            .ground_truth
            .as_ref()
            .ok_or_else(|| LcboError::InvalidParameter(format!("{} has no ground-truth hyperparameters", problem.name)))?;
        GPModel::fit(dataset, truth.specs.clone(), Standardizer::centered(unit, truth.means.clone()))
    } else {
        let ls = config.priors.lengthscale.and_then(|p| p.mode()).filter(|v| *v > 0.0).unwrap_or(0.5);
        let spec = KernelSpec::new(config.kernel_family, ls, 1.0)?;
        let standardizer = Standardizer::from_data(unit, &dataset);
        GPModel::fit(dataset, vec![spec; problem.num_outputs()], standardizer)
    }
}

/// The optimization loop from a given start.
///
/// Stops before the first iteration whose batch would exceed `config.budget`
/// oracle calls.
pub fn run_from(problem: &ProblemDef, config: &LcboConfig, start: &LcboStart, seed: u64) -> Result<Vec<IterationRecord>> {
    config.validate()?;
    let d = problem.dim();
    let outputs = problem.num_outputs();
    let sense = config.constraint_sense.unwrap_or(problem.sense);
    let unit = BoxDomain::unit(d);
    if start.points.len() != start.observations.len() {
        return Err(LcboError::DimensionMismatch { expected: start.points.len(), found: start.observations.len() });
    }
    if !problem.domain.contains(&start.x1) {
        return Err(LcboError::InvalidParameter("starting point lies outside the domain".into()));
    }

    let noise_var = if config.use_ground_truth { problem.noise_sd.powi(2).max(1e-8) } else { config.noise_var };
    let mut dataset = Dataset::new(d, outputs, noise_var, config.window_for(d))?;
    for (p, y) in start.points.iter().zip(&start.observations) {
        dataset.push(problem.domain.scale_to_unit(p)?, y.clone())?;
    }
    let mut model = initial_model(problem, config, dataset.clone())?;
    let analytic = problem.has_gradients();

    let mut noise_rng = stream_rng(seed, STREAM_NOISE);
    let mut acq_rng = stream_rng(seed, STREAM_ACQUISITION);
    let mut x = problem.domain.scale_to_unit(&start.x1)?;
    let mut calls = 0usize;
    let mut records = Vec::new();

    for k in 1.. {
        let (b1, b2) = config.batch_schedule.sizes(k, d);
        let cost = (b1 + b2) * outputs;
        if calls.checked_add(cost).map_or(true, |c| c > config.budget) {
            break;
        }
        let eta = config.step_size(k);
        let rho = config.penalty(k);

        let acq = AcquisitionConfig { batch_size: b2, ..config.acquisition.clone() };
        let explore = minimize_acquisition(&model, &x, &acq, &unit, &mut acq_rng)?.batch;
        let mut batch_unit: Vec<Vec<f64>> = vec![x.clone(); b1];
        batch_unit.extend(explore);

        let mut batch = Vec::with_capacity(batch_unit.len());
        let mut observations = Vec::with_capacity(batch_unit.len());
        for z in &batch_unit {
            let zo = problem.domain.unscale_from_unit(z)?;
            let y = noisy_observe(problem, &zo, &mut noise_rng)?;
            dataset.push(z.clone(), y.clone())?;
            batch.push(zo);
            observations.push(y);
        }
        calls += cost;

        let mut refit = false;
        model = model.refit_data(dataset.clone())?;
        if !config.use_ground_truth && (k - 1) % config.refit_period == 0 {
            if let Ok(m) = fit_hyperparameters(&model, &config.priors) {
                model = m;
                refit = true;
            }
        }

        let grad_hat = penalized_grad(&model, &x, rho, sense)?;
        let x_next = exploit_step(&x, &grad_hat, eta, &unit)?;

        let lambda_hat = (1..outputs)
            .map(|i| model.posterior_value(&x_next, i).map(|(mu, _)| rho * sense.violation(mu)))
            .collect::<Result<Vec<f64>>>()?;
        let (rs_hat, rf_hat) = kkt_residuals(&x_next, &lambda_hat, ResidualSource::Model(&model), sense, &unit)?;

        let x_next_orig = problem.domain.unscale_from_unit(&x_next)?;
        let (rs_true, rf_true) = if analytic {
            let c = problem.evaluate(&x_next_orig)?;
            let lambda: Vec<f64> = c[1..].iter().map(|v| rho * sense.violation(*v)).collect();
            let (rs, rf) = kkt_residuals(&x_next_orig, &lambda, ResidualSource::Analytic(problem), sense, &problem.domain)?;
            (Some(rs), Some(rf))
        } else {
            (None, None)
        };

        records.push(IterationRecord {
            k,
            x_k: problem.domain.unscale_from_unit(&x)?,
            x_next: x_next_orig,
            eta,
            rho,
            batch,
            observations,
            grad_hat,
            lambda_hat,
            rs_hat,
            rf_hat,
            rs_true,
            rf_true,
            oracle_calls: calls,
            refit,
        });
        x = x_next;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::make_toy_circle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn penalty_values() {
        assert_eq!(penalty_value(1.5, &[0.0, 0.0], 7.0, ConstraintSense::Equality), 1.5);
        assert_eq!(penalty_value(1.0, &[2.0], 3.0, ConstraintSense::Equality), 7.0);
        assert_eq!(penalty_value(1.0, &[-5.0], 100.0, ConstraintSense::Inequality), 1.0);
        assert_eq!(penalty_value(1.0, &[2.0], 3.0, ConstraintSense::Inequality), 7.0);
    }

    #[test]
    fn exploit_step_examples() {
        let unit = BoxDomain::unit(2);
        assert_eq!(exploit_step(&[0.5, 0.5], &[0.0, 0.0], 0.1, &unit).unwrap(), vec![0.5, 0.5]);
        let x = exploit_step(&[0.5, 0.5], &[3.0, 4.0], 0.1, &unit).unwrap();
        assert!((x[0] - 0.44).abs() < 1e-15 && (x[1] - 0.42).abs() < 1e-15);
        let x = exploit_step(&[0.05, 0.5], &[1.0, 0.0], 0.1, &unit).unwrap();
        assert_eq!(x, vec![0.0, 0.5]);
        assert!(exploit_step(&[0.5, 0.5], &[1.0, 0.0], 0.0, &unit).is_err());
    }

    #[test]
    fn exploit_step_length_bounded() {
        let unit = BoxDomain::unit(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let eta = rng.gen_range(0.01..0.5);
            let y = exploit_step(&x, &g, eta, &unit).unwrap();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dist <= eta * (1.0 + 1e-12));
            assert!(unit.contains(&y));
        }
    }

    #[test]
    fn toy_residuals_closed_form() {
        let p = make_toy_circle();
        let (rs, rf) = kkt_residuals(&[-0.5, -0.5], &[1.0], ResidualSource::Analytic(&p), p.sense, &p.domain).unwrap();
        assert!(rs < 1e-12 && rf < 1e-12);
        let (rs, rf) = kkt_residuals(&[0.0, 0.0], &[0.0], ResidualSource::Analytic(&p), p.sense, &p.domain).unwrap();
        assert!((rs - 2.0).abs() < 1e-15);
        assert!((rf - 0.25).abs() < 1e-15);
    }

    fn hand_model() -> GPModel {
        // one observation at the origin of a wide kernel; posterior means are
        // then scaled copies of k(x, 0), with values chosen through the data
        let unit = BoxDomain::unit(2);
        let spec = KernelSpec::rbf(1.0, 1.0).unwrap();
        let mut data = Dataset::new(2, 2, 1e-6, 10).unwrap();
        data.push(vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
        GPModel::fit(data, vec![spec; 2], Standardizer::identity(unit, 2)).unwrap()
    }

    #[test]
    fn penalized_grad_reduces_to_objective_gradient() {
        let model = hand_model();
        let x = [0.2, 0.7];
        let (_, gf) = model.mean_and_grad(&x, 0).unwrap();
        assert_eq!(penalized_grad(&model, &x, 5.0, ConstraintSense::Equality).unwrap(), gf);
    }

    #[test]
    fn penalized_grad_formula() {
        let unit = BoxDomain::unit(2);
        let spec = KernelSpec::rbf(0.7, 1.0).unwrap();
        let mut data = Dataset::new(2, 2, 1e-4, 10).unwrap();
        data.push(vec![0.1, 0.2], vec![0.4, 1.3]).unwrap();
        data.push(vec![0.8, 0.6], vec![-0.9, 0.2]).unwrap();
        let model = GPModel::fit(data, vec![spec; 2], Standardizer::identity(unit, 2)).unwrap();
        let x = [0.3, 0.5];
        let (_, gf) = model.mean_and_grad(&x, 0).unwrap();
        let (mc, gc) = model.mean_and_grad(&x, 1).unwrap();
        assert!(mc > 0.0);
        let g = penalized_grad(&model, &x, 4.0, ConstraintSense::Equality).unwrap();
        for i in 0..2 {
            assert!((g[i] - (gf[i] + 4.0 * mc * gc[i])).abs() < 1e-14);
        }
        let negated: Vec<Vec<f64>> = model.dataset().outputs_rows().iter().map(|y| vec![y[0], -y[1]]).collect();
        let neg_data = model.dataset().with_responses(negated).unwrap();
        let neg = GPModel::fit(neg_data, vec![spec; 2], Standardizer::identity(BoxDomain::unit(2), 2)).unwrap();
        let (mc_neg, _) = neg.mean_and_grad(&x, 1).unwrap();
        assert!(mc_neg < 0.0);
        let (_, gf_neg) = neg.mean_and_grad(&x, 0).unwrap();
        assert_eq!(penalized_grad(&neg, &x, 4.0, ConstraintSense::Inequality).unwrap(), gf_neg);
    }

    #[test]
    fn penalized_grad_substitution() {
        // μ_c = 0.5, ∇μ_c = (1, 0), ∇μ_f = (0, 1), ρ = 4 → (2, 1)
        let (gf, mc, gc, rho) = ([0.0, 1.0], 0.5, [1.0, 0.0], 4.0);
        let g: Vec<f64> = (0..2).map(|i| gf[i] + rho * mc * gc[i]).collect();
        assert_eq!(g, vec![2.0, 1.0]);
    }

    #[test]
    fn schedules() {
        let c = LcboConfig::default();
        for k in 2..200 {
            let ratio = c.penalty(k) / c.penalty(k - 1);
            assert!((ratio - (k as f64 / (k - 1) as f64).powf(0.25)).abs() < 1e-14);
            assert!(c.penalty(k) >= c.penalty(k - 1));
            assert!((c.step_size(k) * (k as f64).sqrt() - 0.25).abs() < 1e-15);
        }
        let constant = LcboConfig { step_mode: StepMode::Constant, ..LcboConfig::default() };
        assert_eq!(constant.step_size(50), 0.25);
        assert_eq!(BatchSchedule::Growing.sizes(1, 25), (1, 5));
        assert_eq!(BatchSchedule::Growing.sizes(10, 25), (3, 10));
        assert_eq!(BatchSchedule::Large.sizes(7, 25), (5, 25));
        assert_eq!(BatchSchedule::Theoretical.sizes(3, 4), (3, 36));
        assert_eq!(c.window_for(2), 14);
        assert_eq!(c.window_for(25), 50);
    }

    fn toy_config(budget_iters: usize) -> LcboConfig {
        LcboConfig {
            budget: budget_iters * 7 * 2,
            acquisition: AcquisitionConfig { restarts: 2, max_steps: 5, ..AcquisitionConfig::default() },
            ..LcboConfig::default()
        }
    }

    #[test]
    fn budget_gate() {
        let p = make_toy_circle();
        let cfg = LcboConfig { budget: 13, ..toy_config(1) };
        assert!(run(&p, &cfg, 0).unwrap().is_empty());
        let recs = run(&p, &toy_config(3), 0).unwrap();
        assert_eq!(recs.len(), 3);
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.oracle_calls, (i + 1) * 14);
            assert_eq!(r.batch.len(), 7);
            assert_eq!(r.batch[0], r.x_k);
            assert_eq!(r.batch[1], r.x_k);
            assert!(p.domain.contains(&r.x_next));
            assert!(r.rs_true.is_some());
        }
    }

    #[test]
    fn deterministic_records() {
        let p = make_toy_circle();
        let a = run(&p, &toy_config(4), 11).unwrap();
        let b = run(&p, &toy_config(4), 11).unwrap();
        assert_eq!(a, b);
        let c = run(&p, &toy_config(4), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn exact_gradient_descent_is_monotone() {
        let p = make_toy_circle();
        let rho = 10.0;
        // Q = f + (ρ/2)c² is (11ρ)-smooth on [-1, 1]²
        let eta = 1.0 / (2.0 * 11.0 * rho);
        let q = |x: &[f64]| {
            let v = p.evaluate(x).unwrap();
            penalty_value(v[0], &v[1..], rho, p.sense)
        };
        let grad_q = |x: &[f64]| {
            let v = p.evaluate(x).unwrap();
            let g = p.gradients(x).unwrap();
            vec![g[0][0] + rho * v[1] * g[1][0], g[0][1] + rho * v[1] * g[1][1]]
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for noisy in [false, true] {
            let mut x = vec![0.9, -0.3];
            for _ in 0..100 {
                let g = grad_q(&x);
                let e: Vec<f64> = if noisy { (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect() } else { vec![0.0; 2] };
                let g_hat: Vec<f64> = g.iter().zip(&e).map(|(a, b)| a + b).collect();
                let next = projected_step(&x, &g_hat, eta, &p.domain).unwrap();
                let err2: f64 = e.iter().map(|v| v * v).sum();
                assert!(q(&next) <= q(&x) + 0.5 * eta * err2 + 1e-12);
                x = next;
            }
        }
    }

    #[test]
    fn ground_truth_mode_requires_truth() {
        let p = make_toy_circle();
        let cfg = LcboConfig { use_ground_truth: true, ..toy_config(1) };
        assert!(matches!(run(&p, &cfg, 0), Err(LcboError::InvalidParameter(_))));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(LcboConfig { step_scale: 0.0, ..LcboConfig::default() }.validate().is_err());
        assert!(LcboConfig { refit_period: 0, ..LcboConfig::default() }.validate().is_err());
        assert!(LcboConfig { window: Some(0), ..LcboConfig::default() }.validate().is_err());
    }
}
