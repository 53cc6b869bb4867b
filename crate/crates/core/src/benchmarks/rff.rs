use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::{ConstraintSense, GroundTruth, Oracle, ProblemDef, DEFAULT_NOISE_SD};
use crate::domain::BoxDomain;
use crate::error::{LcboError, Result};
use crate::kernels::{KernelFamily, KernelSpec};

/// Feature count of the synthetic within-model problems.
pub const SYNTHETIC_FEATURES: usize = 1024;

const CONSTRAINT_OFFSET: f64 = 0.5;
const FEASIBILITY_PROBES: usize = 2000;

/// A fixed draw `f(x) = √(2κ₀/M) Σ wⱼ cos(ωⱼᵀx + bⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RffFunction {
    dim: usize,
    /// `M × d`, row-major.
    omega: Vec<f64>,
    phase: Vec<f64>,
    weight: Vec<f64>,
    amplitude: f64,
}

impl RffFunction {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_features(&self) -> usize {
        self.phase.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for (j, (b, w)) in self.phase.iter().zip(&self.weight).enumerate() {
            let om = &self.omega[j * d..(j + 1) * d];
            let arg: f64 = om.iter().zip(x).map(|(o, v)| o * v).sum::<f64>() + b;
            s += w * arg.cos();
        }
        self.amplitude * s
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d];
        for (j, (b, w)) in self.phase.iter().zip(&self.weight).enumerate() {
            let om = &self.omega[j * d..(j + 1) * d];
            let arg: f64 = om.iter().zip(x).map(|(o, v)| o * v).sum::<f64>() + b;
            let coef = -self.amplitude * w * arg.sin();
            for (gc, o) in g.iter_mut().zip(om) {
                *gc += coef * o;
            }
        }
        g
    }
}

/// Random Fourier feature sample path of a zero-mean GP with kernel `spec`.
///
/// Frequencies come from the kernel's spectral density: Gaussian with
/// precision `ℓ²` for RBF, and a multivariate t with 5 degrees of freedom
/// (Gaussian scaled by `√(5/u)`, `u ~ χ²₅`) for Matérn-2.5.
pub fn rff_sample(spec: &KernelSpec, num_features: usize, dim: usize, seed: u64) -> Result<RffFunction> {
    if num_features == 0 || dim == 0 {
        return Err(LcboError::InvalidParameter("RFF needs at least one feature and one dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::new(5.0).map_err(|e| LcboError::InvalidParameter(e.to_string()))?;
    let mut omega = Vec::with_capacity(num_features * dim);
    let mut phase = Vec::with_capacity(num_features);
    let mut weight = Vec::with_capacity(num_features);
    for _ in 0..num_features {
        let scale = match spec.family {
            KernelFamily::Rbf => 1.0 / spec.lengthscale,
            KernelFamily::Matern25 => {
                let u: f64 = chi.sample(&mut rng);
                (5.0 / u).sqrt() / spec.lengthscale
            }
        };
        for _ in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            omega.push(scale * z);
        }
        phase.push(rng.gen_range(0.0..std::f64::consts::TAU));
        weight.push(rng.sample(StandardNormal));
    }
    Ok(RffFunction {
        dim,
        omega,
        phase,
        weight,
        amplitude: (2.0 * spec.outputscale / num_features as f64).sqrt(),
    })
}

struct Synthetic {
    objective: RffFunction,
    constraints: Vec<RffFunction>,
}

impl Oracle for Synthetic {
    fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(1 + self.constraints.len());
        v.push(self.objective.eval(x));
        v.extend(self.constraints.iter().map(|c| c.eval(x) + CONSTRAINT_OFFSET));
        Ok(v)
    }

    fn gradients(&self, x: &[f64]) -> Option<Result<Vec<Vec<f64>>>> {
        let mut g = vec![self.objective.grad(x)];
        g.extend(self.constraints.iter().map(|c| c.grad(x)));
        Some(Ok(g))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Within-model problem on `[0,1]^d` with default hyperparameters `ℓ = 0.2√d`, `κ₀ = 1`.
pub fn make_synthetic(dim: usize, seed: u64) -> Result<ProblemDef> {
    let spec = KernelSpec::rbf(0.2 * (dim as f64).sqrt(), 1.0)?;
    make_synthetic_with(dim, seed, spec, SYNTHETIC_FEATURES)
}

/// Objective and two constraints `cᵢ(x) + 0.5 ≤ 0`, all independent RFF draws.
///
/// Draws whose feasible fraction on a fixed uniform probe set is 0 or 1 are
/// regenerated with the next sub-seed.
pub fn make_synthetic_with(dim: usize, seed: u64, spec: KernelSpec, num_features: usize) -> Result<ProblemDef> {
    if dim == 0 {
        return Err(LcboError::InvalidParameter("dimension must be at least 1".into()));
    }
    let mut probe_rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x5EED));
    let probes: Vec<Vec<f64>> = (0..FEASIBILITY_PROBES)
        .map(|_| (0..dim).map(|_| probe_rng.gen::<f64>()).collect())
        .collect();
    let mut attempt = 0u64;
    let oracle = loop {
        let sub = |i: u64| splitmix(splitmix(seed).wrapping_add(attempt * 3 + i));
        let objective = rff_sample(&spec, num_features, dim, sub(0))?;
        let constraints = vec![
            rff_sample(&spec, num_features, dim, sub(1))?,
            rff_sample(&spec, num_features, dim, sub(2))?,
        ];
        let candidate = Synthetic { objective, constraints };
        let feasible = probes
            .iter()
            .filter(|p| candidate.constraints.iter().all(|c| c.eval(p) + CONSTRAINT_OFFSET <= 0.0))
            .count();
        if feasible > 0 && feasible < probes.len() {
            break candidate;
        }
        attempt += 1;
    };
    let mut p = ProblemDef::new(
        format!("synthetic-{dim}d-seed{seed}"),
        BoxDomain::unit(dim),
        2,
        ConstraintSense::Inequality,
        DEFAULT_NOISE_SD,
        Arc::new(oracle),
    )?;
    p.ground_truth = Some(GroundTruth {
        specs: vec![spec; 3],
        means: vec![0.0, CONSTRAINT_OFFSET, CONSTRAINT_OFFSET],
    });
    p.tags = vec!["synthetic".into(), "within-model".into()];
    Ok(p)
}
