use std::sync::Arc;

use super::{lse_aggregate, ConstraintSense, Oracle, ProblemDef, AGGREGATION_ALPHA, DEFAULT_NOISE_SD};
use crate::domain::BoxDomain;
use crate::error::{LcboError, Result};

pub const BEAM_DIM_LO: f64 = 0.5;
pub const BEAM_DIM_HI: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub length: f64,
    pub modulus: f64,
    pub load: f64,
    pub segments: usize,
    pub stress_max: f64,
    pub disp_max: f64,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            length: 100.0,
            modulus: 2.9e7,
            load: 500.0,
            segments: 25,
            stress_max: 40_000.0,
            disp_max: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamResponse {
    pub volume: f64,
    pub tip_disp: f64,
    /// Bending stress at the root of each segment, root segment first.
    pub stresses: Vec<f64>,
    pub agg_stress: f64,
    pub tip_constraint: f64,
}

pub fn beam_eval(w: &[f64], h: &[f64]) -> Result<BeamResponse> {
    beam_eval_with(&BeamParams::default(), w, h)
}

/// Stepped cantilever, segment 0 at the clamped end, point load at the free tip.
pub fn beam_eval_with(params: &BeamParams, w: &[f64], h: &[f64]) -> Result<BeamResponse> {
    let n = params.segments;
    if w.len() != n {
        return Err(LcboError::DimensionMismatch { expected: n, found: w.len() });
    }
    if h.len() != n {
        return Err(LcboError::DimensionMismatch { expected: n, found: h.len() });
    }
    let in_range = |v: f64| (BEAM_DIM_LO..=BEAM_DIM_HI).contains(&v);
    if let Some(i) = w.iter().position(|v| !in_range(*v)) {
        return Err(LcboError::OutsideDomain { coord: i });
    }
    if let Some(i) = h.iter().position(|v| !in_range(*v)) {
        return Err(LcboError::OutsideDomain { coord: n + i });
    }

    let (l, p, e) = (params.length, params.load, params.modulus);
    let seg = l / n as f64;
    let mut volume = 0.0;
    let mut stresses = Vec::with_capacity(n);
    let (mut slope, mut defl) = (0.0, 0.0);
    for i in 0..n {
        let inertia = w[i] * h[i].powi(3) / 12.0;
        let a = i as f64 * seg;
        let arm = l - a;
        volume += w[i] * h[i] * seg;
        stresses.push(p * arm * (h[i] / 2.0) / inertia);
        // exact integration of curvature P(L - x)/(EI) over the segment
        let c = p / (e * inertia);
        defl += slope * seg + c * (arm * seg * seg / 2.0 - seg.powi(3) / 6.0);
        slope += c * (arm * arm - (arm - seg).powi(2)) / 2.0;
    }
    let margins: Vec<f64> = stresses.iter().map(|s| s / params.stress_max - 1.0).collect();
    Ok(BeamResponse {
        volume,
        tip_disp: defl,
        agg_stress: lse_aggregate(&margins, AGGREGATION_ALPHA)?,
        tip_constraint: defl / params.disp_max - 1.0,
        stresses,
    })
}

struct Beam(BeamParams);

impl Oracle for Beam {
    fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.0.segments;
        let r = beam_eval_with(&self.0, &x[..n], &x[n..])?;
        Ok(vec![r.volume, r.tip_constraint, r.agg_stress])
    }
}

/// `x = (w_1…w_N, h_1…h_N)`; minimize volume s.t. tip and aggregated stress margins `≤ 0`.
pub fn make_beam(params: BeamParams) -> Result<ProblemDef> {
    let n = params.segments;
    if n == 0 {
        return Err(LcboError::InvalidParameter("beam needs at least one segment".into()));
    }
    let domain = BoxDomain::cube(2 * n, BEAM_DIM_LO, BEAM_DIM_HI)?;
    let mut p = ProblemDef::new(
        format!("beam-{n}seg"),
        domain,
        2,
        ConstraintSense::Inequality,
        DEFAULT_NOISE_SD,
        Arc::new(Beam(params)),
    )?;
    p.tags = vec!["structural".into()];
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(params: &BeamParams, w: f64, h: f64) -> BeamResponse {
        beam_eval_with(params, &vec![w; params.segments], &vec![h; params.segments]).unwrap()
    }

    #[test]
    fn full_size_volume() {
        let r = beam_eval(&[5.0; 25], &[5.0; 25]).unwrap();
        assert!((r.volume - 2500.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_tip_deflection() {
        let p = BeamParams::default();
        let (w, h) = (3.0, 4.0);
        let i = w * h * h * h / 12.0;
        let closed = p.load * p.length.powi(3) / (3.0 * p.modulus * i);
        let r = uniform(&p, w, h);
        assert!(((r.tip_disp - closed) / closed).abs() < 5e-3);
        assert!((r.tip_constraint - (r.tip_disp / 2.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn uniform_root_stress() {
        let p = BeamParams::default();
        let (w, h) = (2.0, 3.5);
        let i = w * h * h * h / 12.0;
        let r = uniform(&p, w, h);
        let root = p.load * p.length * (h / 2.0) / i;
        assert!(((r.stresses[0] - root) / root).abs() < 1e-12);
        assert!(r.stresses.iter().all(|s| *s <= r.stresses[0]));
    }

    #[test]
    fn refinement_is_consistent() {
        let coarse = uniform(&BeamParams::default(), 2.0, 2.0);
        let fine = uniform(&BeamParams { segments: 100, ..BeamParams::default() }, 2.0, 2.0);
        assert!(((fine.tip_disp - coarse.tip_disp) / coarse.tip_disp).abs() < 1e-3);
    }

    #[test]
    fn stepped_beam_matches_two_segment_superposition() {
        // two segments: root stiffness I1, tip stiffness I2, each of length a
        let p = BeamParams { segments: 2, ..BeamParams::default() };
        let (w, h) = ([1.0, 1.0], [4.0, 2.0]);
        let i1 = 4.0_f64.powi(3) / 12.0;
        let i2 = 2.0_f64.powi(3) / 12.0;
        let a = p.length / 2.0;
        let (pl, e) = (p.load, p.modulus);
        // root half: M = P(2a - x); tip half treated as a cantilever on a rotated/deflected support
        let theta1 = pl * (2.0 * a * a - a * a / 2.0) / (e * i1);
        let v1 = pl * (a * a * a - a * a * a / 6.0) / (e * i1);
        let tip = v1 + theta1 * a + pl * a.powi(3) / (3.0 * e * i2);
        let r = beam_eval_with(&p, &w, &h).unwrap();
        assert!(((r.tip_disp - tip) / tip).abs() < 1e-12);
    }

    #[test]
    fn bounds_enforced() {
        let mut w = vec![1.0; 25];
        w[0] = 0.4;
        assert!(matches!(beam_eval(&w, &[1.0; 25]), Err(LcboError::OutsideDomain { coord: 0 })));
        let mut h = vec![1.0; 25];
        h[2] = 5.5;
        assert!(matches!(beam_eval(&[1.0; 25], &h), Err(LcboError::OutsideDomain { coord: 27 })));
    }

    #[test]
    fn problem_layout() {
        let p = make_beam(BeamParams::default()).unwrap();
        assert_eq!(p.dim(), 50);
        let x: Vec<f64> = vec![5.0; 50];
        let v = p.evaluate(&x).unwrap();
        assert!((v[0] - 2500.0).abs() < 1e-9);
        assert!(p.is_feasible(&v, 0.0));
    }
}
