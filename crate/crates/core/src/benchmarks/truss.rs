use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{lse_aggregate, ConstraintSense, Oracle, ProblemDef, AGGREGATION_ALPHA, DEFAULT_NOISE_SD};
use crate::domain::BoxDomain;
use crate::error::{LcboError, Result};

/// The shipped 25-bar space truss.
pub const TRUSS25_GEOMETRY: &str = include_str!("../../data/truss25.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct TrussNode {
    pub id: usize,
    pub coords: [f64; 3],
    pub fixed: [bool; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrussGeometry {
    pub nodes: Vec<TrussNode>,
    /// Member end nodes as indices into `nodes`.
    pub elements: Vec<(usize, usize)>,
    /// Load per node, indexed like `nodes`.
    pub loads: Vec<[f64; 3]>,
    pub youngs_modulus: f64,
    pub density: f64,
    pub stress_max: f64,
    pub disp_max: f64,
    pub area_lo: f64,
    pub area_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrussResponse {
    pub weight: f64,
    pub stresses: Vec<f64>,
    /// Displacements of the free DOFs, in node then axis order.
    pub displacements: Vec<f64>,
    pub agg_stress: f64,
    pub agg_disp: f64,
}

fn geom_err(line: usize, msg: impl Into<String>) -> LcboError {
    LcboError::Geometry { line, msg: msg.into() }
}

fn parse_nums(line: usize, fields: &[&str], count: usize) -> Result<Vec<f64>> {
    if fields.len() != count {
        return Err(geom_err(line, format!("expected {count} fields, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|_| geom_err(line, format!("cannot parse `{f}`"))))
        .collect()
}

impl TrussGeometry {
    pub fn standard_25_bar() -> Self {
        Self::parse(TRUSS25_GEOMETRY).expect("shipped geometry parses")
    }

    /// Parses the sectioned whitespace format (`[nodes]`, `[elements]`, `[loads]`,
    /// `[material]`, `[limits]`; `#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut nodes: Vec<TrussNode> = Vec::new();
        let mut raw_elements: Vec<(usize, usize, usize)> = Vec::new();
        let mut raw_loads: Vec<(usize, usize, [f64; 3])> = Vec::new();
        let mut material: Option<(f64, f64)> = None;
        let mut limits: Option<[f64; 4]> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(geom_err(line_no, "unterminated section header"));
                }
                section = line[1..line.len() - 1].trim().to_ascii_lowercase();
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match section.as_str() {
                "nodes" => {
                    let v = parse_nums(line_no, &fields, 7)?;
                    let flag = |x: f64| -> Result<bool> {
                        match x {
                            0.0 => Ok(false),
                            1.0 => Ok(true),
                            _ => Err(geom_err(line_no, "fix flags must be 0 or 1")),
                        }
                    };
                    nodes.push(TrussNode {
                        id: v[0] as usize,
                        coords: [v[1], v[2], v[3]],
                        fixed: [flag(v[4])?, flag(v[5])?, flag(v[6])?],
                    });
                }
                "elements" => {
                    let v = parse_nums(line_no, &fields, 2)?;
                    raw_elements.push((line_no, v[0] as usize, v[1] as usize));
                }
                "loads" => {
                    let v = parse_nums(line_no, &fields, 4)?;
                    raw_loads.push((line_no, v[0] as usize, [v[1], v[2], v[3]]));
                }
                "material" => {
                    let v = parse_nums(line_no, &fields, 2)?;
                    material = Some((v[0], v[1]));
                }
                "limits" => {
                    let v = parse_nums(line_no, &fields, 4)?;
                    limits = Some([v[0], v[1], v[2], v[3]]);
                }
                "" => return Err(geom_err(line_no, "data before any section header")),
                other => return Err(geom_err(line_no, format!("unknown section [{other}]"))),
            }
        }

        let index_of = |line: usize, id: usize| -> Result<usize> {
            nodes
                .iter()
                .position(|n| n.id == id)
                .ok_or_else(|| geom_err(line, format!("unknown node id {id}")))
        };
        let mut elements = Vec::with_capacity(raw_elements.len());
        for (line, a, b) in raw_elements {
            let (ia, ib) = (index_of(line, a)?, index_of(line, b)?);
            if ia == ib {
                return Err(geom_err(line, "member connects a node to itself"));
            }
            elements.push((ia, ib));
        }
        let mut loads = vec![[0.0; 3]; nodes.len()];
        for (line, id, f) in raw_loads {
            let i = index_of(line, id)?;
            for a in 0..3 {
                loads[i][a] += f[a];
            }
        }
        let (youngs_modulus, density) = material.ok_or_else(|| geom_err(0, "missing [material] section"))?;
        let [stress_max, disp_max, area_lo, area_hi] = limits.ok_or_else(|| geom_err(0, "missing [limits] section"))?;
        if nodes.is_empty() || elements.is_empty() {
            return Err(geom_err(0, "geometry needs nodes and elements"));
        }
        if !(youngs_modulus > 0.0 && density > 0.0 && stress_max > 0.0 && disp_max > 0.0 && 0.0 < area_lo && area_lo < area_hi) {
            return Err(geom_err(0, "material and limit values must be positive with area_lo < area_hi"));
        }
        Ok(Self {
            nodes,
            elements,
            loads,
            youngs_modulus,
            density,
            stress_max,
            disp_max,
            area_lo,
            area_hi,
        })
    }

    pub fn num_members(&self) -> usize {
        self.elements.len()
    }

    pub fn member_length(&self, e: usize) -> f64 {
        let (a, b) = self.elements[e];
        let (p, q) = (self.nodes[a].coords, self.nodes[b].coords);
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt()
    }

    /// Global DOF index of every free DOF.
    pub fn free_dofs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            for a in 0..3 {
                if !n.fixed[a] {
                    out.push(3 * i + a);
                }
            }
        }
        out
    }

    fn direction(&self, e: usize) -> [f64; 3] {
        let (a, b) = self.elements[e];
        let (p, q) = (self.nodes[a].coords, self.nodes[b].coords);
        let l = self.member_length(e);
        [(q[0] - p[0]) / l, (q[1] - p[1]) / l, (q[2] - p[2]) / l]
    }

    /// Reduced stiffness `K(A)` over the free DOFs.
    pub fn reduced_stiffness(&self, areas: &[f64]) -> Result<DMatrix<f64>> {
        if areas.len() != self.num_members() {
            return Err(LcboError::DimensionMismatch { expected: self.num_members(), found: areas.len() });
        }
        let free = self.free_dofs();
        let mut map = vec![usize::MAX; 3 * self.nodes.len()];
        for (k, g) in free.iter().enumerate() {
            map[*g] = k;
        }
        let mut k = DMatrix::zeros(free.len(), free.len());
        for (e, &(a, b)) in self.elements.iter().enumerate() {
            let dir = self.direction(e);
            let ke = self.youngs_modulus * areas[e] / self.member_length(e);
            let dofs = [3 * a, 3 * a + 1, 3 * a + 2, 3 * b, 3 * b + 1, 3 * b + 2];
            for (p, &gp) in dofs.iter().enumerate() {
                let rp = map[gp];
                if rp == usize::MAX {
                    continue;
                }
                for (q, &gq) in dofs.iter().enumerate() {
                    let rq = map[gq];
                    if rq == usize::MAX {
                        continue;
                    }
                    let sign = if (p < 3) == (q < 3) { 1.0 } else { -1.0 };
                    k[(rp, rq)] += sign * ke * dir[p % 3] * dir[q % 3];
                }
            }
        }
        Ok(k)
    }

    /// Free-DOF displacements under `loads` (per node, indexed like `nodes`).
    pub fn displacements(&self, areas: &[f64], loads: &[[f64; 3]]) -> Result<Vec<f64>> {
        if loads.len() != self.nodes.len() {
            return Err(LcboError::DimensionMismatch { expected: self.nodes.len(), found: loads.len() });
        }
        let k = self.reduced_stiffness(areas)?;
        let f = DVector::from_iterator(k.nrows(), self.free_dofs().iter().map(|g| loads[g / 3][g % 3]));
        let chol = k.cholesky().ok_or(LcboError::SingularStiffness)?;
        Ok(chol.solve(&f).iter().copied().collect())
    }

    /// Axial stress of every member given free-DOF displacements.
    pub fn stresses(&self, free_disp: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; 3 * self.nodes.len()];
        for (g, u) in self.free_dofs().iter().zip(free_disp) {
            full[*g] = *u;
        }
        (0..self.num_members())
            .map(|e| {
                let (a, b) = self.elements[e];
                let dir = self.direction(e);
                let elong: f64 = (0..3).map(|c| dir[c] * (full[3 * b + c] - full[3 * a + c])).sum();
                self.youngs_modulus * elong / self.member_length(e)
            })
            .collect()
    }
}

/// Weight, member stresses, free displacements and their aggregated margins.
pub fn truss_eval(geometry: &TrussGeometry, areas: &[f64]) -> Result<TrussResponse> {
    if areas.len() != geometry.num_members() {
        return Err(LcboError::DimensionMismatch { expected: geometry.num_members(), found: areas.len() });
    }
    if let Some(i) = areas.iter().position(|a| !(*a >= geometry.area_lo && *a <= geometry.area_hi)) {
        return Err(LcboError::OutsideDomain { coord: i });
    }
    let weight = geometry.density * (0..geometry.num_members()).map(|e| areas[e] * geometry.member_length(e)).sum::<f64>();
    let displacements = geometry.displacements(areas, &geometry.loads)?;
    let stresses = geometry.stresses(&displacements);
    let stress_margins: Vec<f64> = stresses.iter().map(|s| s.abs() / geometry.stress_max - 1.0).collect();
    let disp_margins: Vec<f64> = displacements.iter().map(|u| u.abs() / geometry.disp_max - 1.0).collect();
    Ok(TrussResponse {
        weight,
        agg_stress: lse_aggregate(&stress_margins, AGGREGATION_ALPHA)?,
        agg_disp: lse_aggregate(&disp_margins, AGGREGATION_ALPHA)?,
        stresses,
        displacements,
    })
}

struct Truss(TrussGeometry);

impl Oracle for Truss {
    fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = truss_eval(&self.0, x)?;
        Ok(vec![r.weight, r.agg_stress, r.agg_disp])
    }
}

/// Minimize weight subject to aggregated stress and displacement margins `≤ 0`.
pub fn make_truss(geometry: TrussGeometry) -> Result<ProblemDef> {
    let n = geometry.num_members();
    let domain = BoxDomain::cube(n, geometry.area_lo, geometry.area_hi)?;
    let mut p = ProblemDef::new(
        format!("truss-{n}bar"),
        domain,
        2,
        ConstraintSense::Inequality,
        DEFAULT_NOISE_SD,
        Arc::new(Truss(geometry)),
    )?;
    p.tags = vec!["structural".into()];
    Ok(p)
}
