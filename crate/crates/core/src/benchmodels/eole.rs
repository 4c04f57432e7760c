//! Expansion optimal linear estimation of a Gaussian field with squared-exponential
//! correlation, mapped to a lognormal field.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular 2-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    #[serde(default)]
    pub origin: [f64; 2],
}

impl Grid {
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut p = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                p.push([self.origin[0] + i as f64 * self.spacing, self.origin[1] + j as f64 * self.spacing]);
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EoleField {
    pub points: Vec<[f64; 2]>,
    pub correlation_length: f64,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained eigenvectors, `eigenvectors[i]` of length `points.len()`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Sum of all (clipped) eigenvalues.
    pub total_variance: f64,
    /// `κ = exp(a + b ĝ)`.
    pub a: f64,
    pub b: f64,
}

impl EoleField {
    /// Builds the field on `points`, retaining the fewest modes whose eigenvalues
    /// explain at least `threshold` of the total. The lognormal map has mean
    /// `mean` and standard deviation `std`.
    pub fn build(points: Vec<[f64; 2]>, correlation_length: f64, threshold: f64, mean: f64, std: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("EOLE grid is empty".into()));
        }
        if !(correlation_length > 0.0) || !(threshold > 0.0 && threshold <= 1.0) || !(mean > 0.0) || !(std > 0.0) {
            return Err(Error::InvalidParameter("EOLE needs positive length, mean, std and threshold in (0, 1]".into()));
        }
        let n = points.len();
        let c = DMatrix::from_fn(n, n, |i, j| rho(points[i], points[j], correlation_length));
        let eig: SymmetricEigen<f64, _> =
            c.try_symmetric_eigen(1e-15, 100_000).ok_or_else(|| Error::Eigen("correlation matrix".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        if let Some(v) = order.iter().map(|&i| eig.eigenvalues[i]).find(|v| *v < -1e-10) {
            return Err(Error::Eigen(format!("correlation matrix has eigenvalue {v}")));
        }
        let total: f64 = vals.iter().sum();
        let mut acc = 0.0;
        let mut m = n;
        for (k, v) in vals.iter().enumerate() {
            acc += v;
            if acc / total >= threshold {
                m = k + 1;
                break;
            }
        }
        let eigenvectors = order[..m].iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
        let b2 = (1.0 + (std / mean).powi(2)).ln();
        Ok(Self {
            points,
            correlation_length,
            eigenvalues: vals[..m].to_vec(),
            eigenvectors,
            total_variance: total,
            a: mean.ln() - b2 / 2.0,
            b: b2.sqrt(),
        })
    }

    pub fn on_grid(grid: Grid, correlation_length: f64, threshold: f64) -> Result<Self> {
        Self::build(grid.points(), correlation_length, threshold, 1.0, 0.3)
    }

    /// Number of retained modes.
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Projections `φ_iᵀ C_zζ(z) / √l_i` for every retained mode.
    fn coefficients(&self, z: [f64; 2]) -> Vec<f64> {
        let cz: Vec<f64> = self.points.iter().map(|&p| rho(z, p, self.correlation_length)).collect();
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(l, phi)| if *l > 0.0 { phi.iter().zip(&cz).map(|(a, b)| a * b).sum::<f64>() / l.sqrt() } else { 0.0 })
            .collect()
    }

    /// Gaussian field `ĝ(z)` and lognormal field `κ(z)` for the standard-normal vector `xi`.
    pub fn realize(&self, xi: &[f64], z: [f64; 2]) -> Result<(f64, f64)> {
        if xi.len() != self.modes() {
            return Err(Error::DimensionMismatch(format!("{} modes, got {} variables", self.modes(), xi.len())));
        }
        let g: f64 = self.coefficients(z).iter().zip(xi).map(|(c, x)| c * x).sum();
        Ok((g, (self.a + self.b * g).exp()))
    }

    /// Variance of `ĝ(z)`.
    pub fn variance(&self, z: [f64; 2]) -> f64 {
        self.coefficients(z).iter().map(|c| c * c).sum()
    }

    /// Precomputed coefficients at the grid points, row `k` for point `k`.
    pub fn grid_coefficients(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|&p| self.coefficients(p)).collect()
    }
}

fn rho(p: [f64; 2], q: [f64; 2], l: f64) -> f64 {
    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    (-d2 / (l * l)).exp()
}

/// Demonstration response of the lognormal field: grid average of `1/κ`, an
/// effective resistance.
#[derive(Debug, Clone, PartialEq)]
pub struct EoleDemo {
    field: EoleField,
    coefficients: Vec<Vec<f64>>,
}

impl EoleDemo {
    pub fn new(field: EoleField) -> Self {
        let coefficients = field.grid_coefficients();
        Self { field, coefficients }
    }

    pub fn field(&self) -> &EoleField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.modes()
    }

    pub fn response(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("{} modes, got {} variables", self.dim(), xi.len())));
        }
        let (a, b) = (self.field.a, self.field.b);
        let sum: f64 = self
            .coefficients
            .iter()
            .map(|c| (-(a + b * c.iter().zip(xi).map(|(c, x)| c * x).sum::<f64>())).exp())
            .sum();
        Ok(sum / self.coefficients.len() as f64)
    }
}
