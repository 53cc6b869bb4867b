//! Benchmark problems and the noisy observation layer.

mod beam;
mod rff;
mod truss;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

pub use beam::{beam_eval, beam_eval_with, make_beam, BeamParams, BeamResponse};
pub use rff::{make_synthetic, make_synthetic_with, rff_sample, RffFunction, SYNTHETIC_FEATURES};
pub use truss::{make_truss, truss_eval, TrussGeometry, TrussResponse};

use crate::acquisition::log_sum_exp;
use crate::domain::BoxDomain;
use crate::error::{LcboError, Result};
use crate::kernels::KernelSpec;

/// Smoothing factor used to aggregate per-member structural margins.
pub const AGGREGATION_ALPHA: f64 = 20.0;

/// Observation noise of the benchmark problems, in output units.
pub const DEFAULT_NOISE_SD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintSense {
    /// `c(x) = 0`
    Equality,
    /// `c(x) ≤ 0`
    Inequality,
}

impl ConstraintSense {
    /// The part of a constraint value that counts as violation.
    pub fn violation(self, c: f64) -> f64 {
        match self {
            ConstraintSense::Equality => c,
            ConstraintSense::Inequality => c.max(0.0),
        }
    }
}

/// Noiseless black box returning `[f, c_1, …, c_m]`.
pub trait Oracle: Send + Sync {
    fn values(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Gradients of every output, in the same order as [`Oracle::values`].
    fn gradients(&self, _x: &[f64]) -> Option<Result<Vec<Vec<f64>>>> {
        None
    }
}

/// GP hyperparameters the problem was generated from, one per output.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub specs: Vec<KernelSpec>,
    /// Prior mean of each output in original units.
    pub means: Vec<f64>,
}

#[derive(Clone)]
pub struct ProblemDef {
    pub name: String,
    pub domain: BoxDomain,
    pub num_constraints: usize,
    pub sense: ConstraintSense,
    pub noise_sd: f64,
    pub ground_truth: Option<GroundTruth>,
    pub tags: Vec<String>,
    oracle: Arc<dyn Oracle>,
}

impl fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("num_constraints", &self.num_constraints)
            .field("sense", &self.sense)
            .field("noise_sd", &self.noise_sd)
            .finish()
    }
}

impl ProblemDef {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        num_constraints: usize,
        sense: ConstraintSense,
        noise_sd: f64,
        oracle: Arc<dyn Oracle>,
    ) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(LcboError::InvalidParameter(format!("noise sd must be nonnegative, got {noise_sd}")));
        }
        Ok(Self {
            name: name.into(),
            domain,
            num_constraints,
            sense,
            noise_sd,
            ground_truth: None,
            tags: Vec::new(),
            oracle,
        })
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(LcboError::InvalidParameter(format!("noise sd must be nonnegative, got {noise_sd}")));
        }
        self.noise_sd = noise_sd;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn num_outputs(&self) -> usize {
        self.num_constraints + 1
    }

    /// Noiseless `[f, c_1, …, c_m]` at a point of the domain.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(LcboError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let v = self.oracle.values(x)?;
        if v.len() != self.num_outputs() {
            return Err(LcboError::Oracle(format!(
                "{} returned {} outputs, expected {}",
                self.name,
                v.len(),
                self.num_outputs()
            )));
        }
        if v.iter().any(|y| !y.is_finite()) {
            return Err(LcboError::Oracle(format!("{} returned a non-finite value", self.name)));
        }
        Ok(v)
    }

    pub fn has_gradients(&self) -> bool {
        self.oracle.gradients(&self.domain.center()).is_some()
    }

    /// Exact gradients of every output in original coordinates.
    pub fn gradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.dim() {
            return Err(LcboError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        self.oracle
            .gradients(x)
            .unwrap_or_else(|| Err(LcboError::NoAnalyticGradients(self.name.clone())))
    }

    /// `‖violation(c)‖` over the constraint part of an output vector.
    pub fn violation_norm(&self, outputs: &[f64]) -> f64 {
        outputs[1..].iter().map(|c| self.sense.violation(*c).powi(2)).sum::<f64>().sqrt()
    }

    /// Inequalities must hold exactly; equalities within `eq_tol`.
    pub fn is_feasible(&self, outputs: &[f64], eq_tol: f64) -> bool {
        outputs[1..].iter().all(|c| match self.sense {
            ConstraintSense::Inequality => *c <= 0.0,
            ConstraintSense::Equality => c.abs() <= eq_tol,
        })
    }
}

/// Noiseless values plus one `N(0, noise_sd²)` draw per output, in output order.
pub fn noisy_observe<R: Rng + ?Sized>(problem: &ProblemDef, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut v = problem.evaluate(x)?;
    for y in v.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *y += problem.noise_sd * z;
    }
    Ok(v)
}

/// Smooth maximum of constraint margins.
pub fn lse_aggregate(margins: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(LcboError::InvalidParameter(format!("aggregation factor must be positive, got {alpha}")));
    }
    if margins.is_empty() {
        return Err(LcboError::InvalidParameter("no margins to aggregate".into()));
    }
    Ok(log_sum_exp(margins, alpha))
}

struct ToyCircle;

impl Oracle for ToyCircle {
    fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![x[0] + x[1], x[0] * x[0] + x[1] * x[1] - 0.5])
    }

    fn gradients(&self, x: &[f64]) -> Option<Result<Vec<Vec<f64>>>> {
        Some(Ok(vec![vec![1.0, 1.0], vec![2.0 * x[0], 2.0 * x[1]]]))
    }
}

/// `min x₁ + x₂  s.t.  x₁² + x₂² = 0.5` on `[-1, 1]²`; KKT point `(-½, -½)` with `λ = 1`.
pub fn make_toy_circle() -> ProblemDef {
    let mut p = ProblemDef::new(
        "toy-circle",
        BoxDomain::cube(2, -1.0, 1.0).expect("valid box"),
        1,
        ConstraintSense::Equality,
        0.01,
        Arc::new(ToyCircle),
    )
    .expect("valid problem");
    p.tags = vec!["toy".into(), "analytic-gradients".into()];
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_circle_kkt_point() {
        let p = make_toy_circle();
        let v = p.evaluate(&[-0.5, -0.5]).unwrap();
        assert_eq!(v, vec![-1.0, 0.0]);
        let g = p.gradients(&[-0.5, -0.5]).unwrap();
        // ∇f + λ∇c = 0 with λ = 1
        assert_eq!(g[0][0] + g[1][0], 0.0);
        assert_eq!(g[0][1] + g[1][1], 0.0);
        assert!(p.has_gradients());
    }

    #[test]
    fn lse_aggregate_values() {
        assert_eq!(lse_aggregate(&[-0.3], 20.0).unwrap(), -0.3);
        let v = lse_aggregate(&[0.0, 0.0], 20.0).unwrap();
        assert!((v - 0.034_657_359_027_997_26).abs() < 1e-15);
        assert!(lse_aggregate(&[1.0], 0.0).is_err());
        assert!(lse_aggregate(&[], 1.0).is_err());
    }

    #[test]
    fn zero_noise_is_exact() {
        let p = make_toy_circle().with_noise_sd(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(noisy_observe(&p, &[0.2, 0.3], &mut rng).unwrap(), p.evaluate(&[0.2, 0.3]).unwrap());
    }

    #[test]
    fn noisy_observations_reproducible_and_unbiased() {
        let p = make_toy_circle().with_noise_sd(0.1).unwrap();
        let x = [0.3, -0.4];
        let a: Vec<Vec<f64>> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..5).map(|_| noisy_observe(&p, &x, &mut rng).unwrap()).collect()
        };
        let b: Vec<Vec<f64>> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..5).map(|_| noisy_observe(&p, &x, &mut rng).unwrap()).collect()
        };
        assert_eq!(a, b);

        let truth = p.evaluate(&x).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let y = noisy_observe(&p, &x, &mut rng).unwrap();
            sums[0] += y[0];
            sums[1] += y[1];
        }
        let bound = 3.0 * 0.1 / (n as f64).sqrt();
        for j in 0..2 {
            assert!((sums[j] / n as f64 - truth[j]).abs() < bound);
        }
    }

    #[test]
    fn feasibility_rules() {
        let p = make_toy_circle();
        assert!(p.is_feasible(&[0.0, 0.005], 1e-2));
        assert!(!p.is_feasible(&[0.0, 0.05], 1e-2));
        assert_eq!(ConstraintSense::Inequality.violation(-3.0), 0.0);
        assert_eq!(ConstraintSense::Equality.violation(-3.0), -3.0);
    }
}
