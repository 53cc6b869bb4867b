//! Box search spaces.

use crate::error::{LcboError, Result};

/// Coordinates within this fraction of the box width from a bound count as active.
pub const ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(LcboError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(LcboError::InvalidParameter("box must have at least one dimension".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(LcboError::InvalidParameter(format!(
                    "bounds for coordinate {i} must satisfy lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.first_violation(x, 0.0).is_none()
    }

    fn first_violation(&self, x: &[f64], tol: f64) -> Option<usize> {
        (0..self.dim()).find(|&i| {
            let slack = tol * self.width(i);
            x[i] < self.lower[i] - slack || x[i] > self.upper[i] + slack
        })
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(LcboError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection (coordinatewise clamp).
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect())
    }

    pub(crate) fn project_in_place(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Squared distance from `g` to the negative normal cone `-N(x)`.
    ///
    /// The cone is separable on a box: an interior coordinate forces the
    /// component to zero, an active lower bound admits any nonnegative
    /// component and an active upper bound any nonpositive one.
    pub fn normal_cone_dist_sq(&self, x: &[f64], g: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(g)?;
        if let Some(coord) = self.first_violation(x, ACTIVE_TOL) {
            return Err(LcboError::OutsideDomain { coord });
        }
        let mut total = 0.0;
        for i in 0..self.dim() {
            let tol = ACTIVE_TOL * self.width(i);
            let at_lower = x[i] <= self.lower[i] + tol;
            let at_upper = x[i] >= self.upper[i] - tol;
            let gi = g[i];
            let r = match (at_lower, at_upper) {
                (true, true) => 0.0,
                (true, false) => (-gi).max(0.0),
                (false, true) => gi.max(0.0),
                (false, false) => gi,
            };
            total += r * r;
        }
        Ok(total)
    }

    /// Min-max map into `[0, 1]^d`.
    pub fn scale_to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok((0..self.dim()).map(|i| (x[i] - self.lower[i]) / self.width(i)).collect())
    }

    pub fn unscale_from_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        Ok((0..self.dim()).map(|i| self.lower[i] + u[i] * self.width(i)).collect())
    }

    /// Intersection with the cube of half-width `radius` around `center`.
    pub fn local_box(&self, center: &[f64], radius: f64) -> Result<BoxDomain> {
        self.check_dim(center)?;
        let lower: Vec<f64> = (0..self.dim()).map(|i| (center[i] - radius).max(self.lower[i])).collect();
        let upper: Vec<f64> = (0..self.dim()).map(|i| (center[i] + radius).min(self.upper[i])).collect();
        BoxDomain::new(lower, upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_clamps() {
        let b = BoxDomain::unit(2);
        assert_eq!(b.project(&[1.5, -0.2]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(b.project(&[0.25, 0.75]).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn cone_distance_cases() {
        let b = BoxDomain::cube(3, -1.0, 1.0).unwrap();
        // interior
        let g = [0.5, -2.0, 3.0];
        assert_eq!(b.normal_cone_dist_sq(&[0.0, 0.1, 0.2], &g).unwrap(), 0.25 + 4.0 + 9.0);
        // x_1 at lower bound with g pointing inward
        assert_eq!(b.normal_cone_dist_sq(&[-1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), 0.0);

        let b2 = BoxDomain::unit(2);
        assert_eq!(b2.normal_cone_dist_sq(&[0.0, 0.5], &[-2.0, 3.0]).unwrap(), 13.0);
    }

    #[test]
    fn cone_distance_matches_sampled_minimization() {
        // min over v in -N(x) of ‖g - v‖², with -N(x) = {v₁ ≥ 0, v₂ = 0}
        let b = BoxDomain::unit(2);
        let g = [-2.0, 3.0];
        let mut best = f64::INFINITY;
        for i in 0..=4000 {
            let v1 = i as f64 * 0.001;
            best = best.min((g[0] - v1).powi(2) + g[1] * g[1]);
        }
        assert_eq!(best, b.normal_cone_dist_sq(&[0.0, 0.5], &g).unwrap());
    }

    #[test]
    fn cone_distance_rejects_outside() {
        let b = BoxDomain::unit(2);
        assert!(matches!(
            b.normal_cone_dist_sq(&[1.1, 0.5], &[0.0, 0.0]),
            Err(LcboError::OutsideDomain { coord: 0 })
        ));
        // within tolerance is accepted and treated as active
        assert_eq!(b.normal_cone_dist_sq(&[1.0 + 1e-12, 0.5], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(b.normal_cone_dist_sq(&[1.0 + 1e-12, 0.5], &[-1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn scaling_endpoints() {
        let b = BoxDomain::new(vec![0.0, -2.0], vec![5.0, 2.0]).unwrap();
        assert_eq!(b.scale_to_unit(&[0.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(b.scale_to_unit(&[5.0, 2.0]).unwrap(), vec![1.0, 1.0]);
        let one = BoxDomain::new(vec![0.0], vec![5.0]).unwrap();
        assert!((one.scale_to_unit(&[2.0]).unwrap()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn invalid_boxes() {
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn local_box_clamps_to_domain() {
        let b = BoxDomain::unit(2);
        let l = b.local_box(&[0.0, 1.0], 0.1).unwrap();
        assert_eq!(l.lower(), &[0.0, 0.9]);
        assert_eq!(l.upper(), &[0.1, 1.0]);
    }

    fn boundary_config() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec((0u8..3, -3.0f64..3.0, 0.01f64..0.99), 1..6).prop_map(|coords| {
            let mut x = Vec::new();
            let mut g = Vec::new();
            for (kind, gi, t) in coords {
                x.push(match kind {
                    0 => 0.0,
                    1 => 1.0,
                    _ => t,
                });
                g.push(gi);
            }
            (x, g)
        })
    }

    proptest! {
        #[test]
        fn projection_idempotent(x in prop::collection::vec(-3.0f64..3.0, 4)) {
            let b = BoxDomain::new(vec![-1.0, 0.0, 0.5, -2.0], vec![1.0, 0.5, 2.0, 2.0]).unwrap();
            let p = b.project(&x).unwrap();
            prop_assert!(b.contains(&p));
            prop_assert_eq!(b.project(&p).unwrap(), p);
        }

        #[test]
        fn unscale_inverts_scale(x in prop::collection::vec(-10.0f64..10.0, 3)) {
            let b = BoxDomain::new(vec![-10.0, -1.0, 3.0], vec![10.0, 20.0, 4.0]).unwrap();
            let back = b.unscale_from_unit(&b.scale_to_unit(&x).unwrap()).unwrap();
            for (a, c) in back.iter().zip(&x) {
                prop_assert!((a - c).abs() < 1e-12);
            }
        }

        #[test]
        fn zero_distance_iff_in_negative_cone((x, g) in boundary_config()) {
            let b = BoxDomain::unit(x.len());
            let in_cone = x.iter().zip(&g).all(|(xi, gi)| {
                if *xi == 0.0 { *gi >= 0.0 } else if *xi == 1.0 { *gi <= 0.0 } else { *gi == 0.0 }
            });
            let dist = b.normal_cone_dist_sq(&x, &g).unwrap();
            prop_assert_eq!(dist == 0.0, in_cone);
        }

        #[test]
        fn interior_distance_is_squared_norm(g in prop::collection::vec(-5.0f64..5.0, 3)) {
            let b = BoxDomain::unit(3);
            let x = [0.3, 0.5, 0.7];
            let n2: f64 = g.iter().map(|v| v * v).sum();
            prop_assert_eq!(b.normal_cone_dist_sq(&x, &g).unwrap(), n2);
        }

        #[test]
        fn distance_triangle_bound((x, u) in boundary_config(), shift in prop::collection::vec(-2.0f64..2.0, 6)) {
            let b = BoxDomain::unit(x.len());
            let v: Vec<f64> = u.iter().zip(&shift).map(|(a, s)| a + s).collect();
            let du = b.normal_cone_dist_sq(&x, &u).unwrap().sqrt();
            let dv = b.normal_cone_dist_sq(&x, &v).unwrap().sqrt();
            let diff: f64 = u.iter().zip(&v).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            prop_assert!(du <= diff + dv + 1e-12);
        }
    }
}
