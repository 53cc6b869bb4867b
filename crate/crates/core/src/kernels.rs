//! Isotropic stationary kernels with analytic first and mixed second derivatives.
//!
//! Every supported kernel has the radial form `k(x, x') = g(x - x')` with
//! `∇₁k = -a(r)·δ` and `∇₁∇₂ᵀk = a(r)·I - b(r)·δδᵀ`, where `δ = x - x'` and
//! `r = ‖δ‖`. Both coefficient functions are smooth at `r = 0`, so the
//! diagonal needs no special casing.

use nalgebra::DMatrix;

use crate::error::{LcboError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Rbf,
    Matern25,
}

/// Kernel family plus its isotropic lengthscale and prior variance `κ₀ = k(x, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub outputscale: f64,
}

const SQRT5: f64 = 2.236_067_977_499_79;

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64, outputscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(LcboError::InvalidParameter(format!(
                "lengthscale must be positive and finite, got {lengthscale}"
            )));
        }
        if !(outputscale > 0.0 && outputscale.is_finite()) {
            return Err(LcboError::InvalidParameter(format!(
                "outputscale must be positive and finite, got {outputscale}"
            )));
        }
        Ok(Self {
            family,
            lengthscale,
            outputscale,
        })
    }

    pub fn rbf(lengthscale: f64, outputscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf, lengthscale, outputscale)
    }

    pub fn matern25(lengthscale: f64, outputscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern25, lengthscale, outputscale)
    }

    /// Bitwise identity, used to share factorizations between outputs.
    pub(crate) fn same_as(&self, other: &KernelSpec) -> bool {
        self.family == other.family
            && self.lengthscale.to_bits() == other.lengthscale.to_bits()
            && self.outputscale.to_bits() == other.outputscale.to_bits()
    }

    /// Covariance as a function of the squared distance.
    #[inline]
    pub(crate) fn value_sq(&self, r2: f64) -> f64 {
        let l = self.lengthscale;
        match self.family {
            KernelFamily::Rbf => self.outputscale * (-0.5 * r2 / (l * l)).exp(),
            KernelFamily::Matern25 => {
                let s = SQRT5 * r2.sqrt() / l;
                self.outputscale * (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        }
    }

    /// Coefficient `a(r)` with `∇₁k(x, x') = -a(r)·(x - x')`.
    #[inline]
    pub(crate) fn grad_coeff_sq(&self, r2: f64) -> f64 {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::Rbf => self.value_sq(r2) / l2,
            KernelFamily::Matern25 => {
                let s = SQRT5 * r2.sqrt() / self.lengthscale;
                self.outputscale * (5.0 / (3.0 * l2)) * (1.0 + s) * (-s).exp()
            }
        }
    }

    /// Coefficient `b(r)` of the rank-one term in the cross-hessian.
    #[inline]
    pub(crate) fn hess_coeff_sq(&self, r2: f64) -> f64 {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::Rbf => self.value_sq(r2) / (l2 * l2),
            KernelFamily::Matern25 => {
                let s = SQRT5 * r2.sqrt() / self.lengthscale;
                self.outputscale * (25.0 / (3.0 * l2 * l2)) * (-s).exp()
            }
        }
    }

    /// `∂k/∂log ℓ` as a function of the squared distance.
    pub(crate) fn dlog_lengthscale_sq(&self, r2: f64) -> f64 {
        let l = self.lengthscale;
        match self.family {
            KernelFamily::Rbf => self.value_sq(r2) * r2 / (l * l),
            KernelFamily::Matern25 => {
                let s = SQRT5 * r2.sqrt() / l;
                self.outputscale * s * s * (1.0 + s) / 3.0 * (-s).exp()
            }
        }
    }

    /// Prior variance of each gradient component, `a(0)`.
    pub fn grad_prior_var(&self) -> f64 {
        self.grad_coeff_sq(0.0)
    }
}

fn check_pair(x: &[f64], x2: &[f64]) -> Result<()> {
    if x.len() != x2.len() {
        return Err(LcboError::DimensionMismatch {
            expected: x.len(),
            found: x2.len(),
        });
    }
    if x.iter().chain(x2).any(|v| !v.is_finite()) {
        return Err(LcboError::NonFinite("kernel input"));
    }
    Ok(())
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], x2: &[f64]) -> f64 {
    x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    check_pair(x, x2)?;
    Ok(spec.value_sq(sq_dist(x, x2)))
}

/// Gradient of `k(x, x2)` with respect to its first argument.
pub fn kernel_grad1(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
    check_pair(x, x2)?;
    let a = spec.grad_coeff_sq(sq_dist(x, x2));
    Ok(x.iter().zip(x2).map(|(p, q)| -a * (p - q)).collect())
}

/// Mixed derivative `∇₁∇₂ᵀk(x, x2)`; at `x = x2` this is the prior gradient covariance.
pub fn kernel_cross_hessian(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<DMatrix<f64>> {
    check_pair(x, x2)?;
    let r2 = sq_dist(x, x2);
    let a = spec.grad_coeff_sq(r2);
    let b = spec.hess_coeff_sq(r2);
    let d = x.len();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let diag = if i == j { a } else { 0.0 };
        diag - b * (x[i] - x2[i]) * (x[j] - x2[j])
    }))
}

/// Gram matrix `k(X, X)` for row-major points.
pub fn gram(spec: &KernelSpec, points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.outputscale;
        for j in 0..i {
            let v = spec.value_sq(sq_dist(&points[i], &points[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
