//! Linear-elastic plane truss with pin-jointed bars.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{InputModel, Marginal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bar {
    pub nodes: [usize; 2],
    /// Section group; group `g` takes area `A_{g+1}` and modulus `E_{g+1}`.
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub node: usize,
    #[serde(default)]
    pub fix_x: bool,
    #[serde(default)]
    pub fix_y: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub node: usize,
    /// Index of the load variable among `P_1..P_k`.
    pub variable: usize,
    /// Unit direction the load acts along.
    pub direction: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monitor {
    pub node: usize,
    pub axis: Axis,
}

/// Geometry, connectivity, supports and loading of a plane truss (SI units:
/// m, m², MPa, kN; displacements in m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrussLayout {
    pub nodes: Vec<[f64; 2]>,
    pub bars: Vec<Bar>,
    pub supports: Vec<Support>,
    pub loads: Vec<Load>,
    pub monitor: Monitor,
}

impl TrussLayout {
    /// 24 m span Warren truss of 23 bars: six 4 m bottom bays, a 2 m high top
    /// chord, six downward loads at the top nodes, pin and roller supports.
    /// Chords form group 0, diagonals group 1; the monitored DOF is the
    /// vertical displacement of the midspan bottom node.
    pub fn warren23() -> Self {
        let mut nodes: Vec<[f64; 2]> = (0..7).map(|i| [4.0 * i as f64, 0.0]).collect();
        nodes.extend((0..6).map(|i| [2.0 + 4.0 * i as f64, 2.0]));
        let mut bars = Vec::new();
        for i in 0..6 {
            bars.push(Bar { nodes: [i, i + 1], group: 0 });
        }
        for i in 0..5 {
            bars.push(Bar { nodes: [7 + i, 8 + i], group: 0 });
        }
        for i in 0..6 {
            bars.push(Bar { nodes: [i, 7 + i], group: 1 });
            bars.push(Bar { nodes: [7 + i, i + 1], group: 1 });
        }
        let loads = (0..6).map(|i| Load { node: 7 + i, variable: i, direction: [0.0, -1.0] }).collect();
        Self {
            nodes,
            bars,
            supports: vec![
                Support { node: 0, fix_x: true, fix_y: true },
                Support { node: 6, fix_x: false, fix_y: true },
            ],
            loads,
            monitor: Monitor { node: 3, axis: Axis::Y },
        }
    }

    pub fn groups(&self) -> usize {
        self.bars.iter().map(|b| b.group + 1).max().unwrap_or(0)
    }

    pub fn load_count(&self) -> usize {
        self.loads.iter().map(|l| l.variable + 1).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let bad = |what: &str| Err(Error::InvalidParameter(format!("truss layout: {what}")));
        if n < 2 || self.bars.is_empty() {
            return bad("needs at least two nodes and one bar");
        }
        if self.nodes.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite coordinates");
        }
        for b in &self.bars {
            if b.nodes[0] >= n || b.nodes[1] >= n || b.nodes[0] == b.nodes[1] {
                return bad("bar references an invalid node");
            }
            let [p, q] = [self.nodes[b.nodes[0]], self.nodes[b.nodes[1]]];
            if (p[0] - q[0]).hypot(p[1] - q[1]) == 0.0 {
                return bad("zero-length bar");
            }
        }
        if self.supports.iter().any(|s| s.node >= n) || self.loads.iter().any(|l| l.node >= n) {
            return bad("support or load references an invalid node");
        }
        if self.monitor.node >= n {
            return bad("monitored node out of range");
        }
        if self.loads.iter().any(|l| !l.direction.iter().all(|v| v.is_finite())) {
            return bad("non-finite load direction");
        }
        Ok(())
    }
}

/// Finite-element truss with inputs `(A_1..A_g, E_1..E_g, P_1..P_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Truss {
    layout: TrussLayout,
    free: Vec<usize>,
}

/// Static solution of a truss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrussSolution {
    /// All nodal displacements, `(u_x, u_y)` per node.
    pub displacements: Vec<f64>,
    /// `‖K d − f‖ / ‖f‖` on the free DOFs (zero when unloaded).
    pub relative_residual: f64,
}

impl Truss {
    pub fn new(layout: TrussLayout) -> Result<Self> {
        layout.validate()?;
        let mut fixed = vec![false; 2 * layout.nodes.len()];
        for s in &layout.supports {
            fixed[2 * s.node] |= s.fix_x;
            fixed[2 * s.node + 1] |= s.fix_y;
        }
        let free = (0..fixed.len()).filter(|&d| !fixed[d]).collect();
        Ok(Self { layout, free })
    }

    pub fn warren23() -> Self {
        Self::new(TrussLayout::warren23()).expect("valid default layout")
    }

    pub fn layout(&self) -> &TrussLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        2 * self.layout.groups() + self.layout.load_count()
    }

    /// Lognormal sections and moduli (CoV 0.1) and Gumbel loads (mean 50 kN, CoV 0.15).
    pub fn default_input_model(&self) -> Result<InputModel> {
        let g = self.layout.groups();
        let mut m = Vec::with_capacity(self.dim());
        for k in 0..g {
            m.push(Marginal::lognormal_from_moments(if k == 0 { 0.002 } else { 0.001 }, 0.1)?);
        }
        for _ in 0..g {
            m.push(Marginal::lognormal_from_moments(210_000.0, 0.1)?);
        }
        for _ in 0..self.layout.load_count() {
            m.push(Marginal::gumbel_from_moments(50.0, 7.5)?);
        }
        InputModel::independent(m)
    }

    pub fn solve(&self, x: &[f64]) -> Result<TrussSolution> {
        let g = self.layout.groups();
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("truss takes {} inputs, got {}", self.dim(), x.len())));
        }
        if let Some((i, v)) = x[..2 * g].iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::OutsideSupport { index: i, value: *v });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("truss input".into()));
        }
        let ndof = 2 * self.layout.nodes.len();
        let mut k = DMatrix::<f64>::zeros(ndof, ndof);
        for bar in &self.layout.bars {
            let [i, j] = bar.nodes;
            let (pi, pj) = (self.layout.nodes[i], self.layout.nodes[j]);
            let (dx, dy) = (pj[0] - pi[0], pj[1] - pi[1]);
            let len = dx.hypot(dy);
            let (c, s) = (dx / len, dy / len);
            // MPa -> kN/m²
            let ea = x[bar.group] * x[g + bar.group] * 1e3 / len;
            let local = [c * c, c * s, s * s];
            let dofs = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1];
            for a in 0..4 {
                for b in 0..4 {
                    let (ra, rb) = (a % 2, b % 2);
                    let v = match (ra, rb) {
                        (0, 0) => local[0],
                        (1, 1) => local[2],
                        _ => local[1],
                    };
                    let sign = if (a < 2) == (b < 2) { 1.0 } else { -1.0 };
                    k[(dofs[a], dofs[b])] += sign * ea * v;
                }
            }
        }
        let mut f = DVector::<f64>::zeros(ndof);
        for l in &self.layout.loads {
            let p = x[2 * g + l.variable];
            f[2 * l.node] += p * l.direction[0];
            f[2 * l.node + 1] += p * l.direction[1];
        }
        let nf = self.free.len();
        let kff = DMatrix::from_fn(nf, nf, |a, b| k[(self.free[a], self.free[b])]);
        let ff = DVector::from_fn(nf, |a, _| f[self.free[a]]);
        let chol = kff.clone().cholesky().ok_or(Error::SingularStiffness)?;
        let d = chol.solve(&ff);
        let fnorm = ff.norm();
        let relative_residual = if fnorm > 0.0 { (&kff * &d - &ff).norm() / fnorm } else { (&kff * &d).norm() };
        let mut displacements = vec![0.0; ndof];
        for (a, &dof) in self.free.iter().enumerate() {
            displacements[dof] = d[a];
        }
        Ok(TrussSolution { displacements, relative_residual })
    }

    /// Magnitude of the monitored displacement, in m.
    pub fn deflection(&self, x: &[f64]) -> Result<f64> {
        let sol = self.solve(x)?;
        let m = &self.layout.monitor;
        let dof = 2 * m.node + usize::from(m.axis == Axis::Y);
        Ok(sol.displacements[dof].abs())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::new(serde_json::from_str(s)?)
    }
}
