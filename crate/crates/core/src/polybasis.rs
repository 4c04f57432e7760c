//! Univariate orthonormal polynomial families and their tensor products.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::normal;

/// Highest supported univariate degree.
pub const MAX_DEGREE: usize = 30;

/// Orthonormal polynomial family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyFamily {
    /// Probabilists' Hermite, orthonormal under the standard normal density.
    Hermite,
    /// Legendre, orthonormal under the uniform density 1/2 on [-1, 1].
    Legendre,
}

impl PolyFamily {
    /// Maps an independent standard-normal coordinate to the reference
    /// variable of this family (identity for Hermite, `2Φ(u) − 1` for Legendre).
    pub fn reference_from_standard(self, u: f64) -> f64 {
        match self {
            Self::Hermite => u,
            Self::Legendre => {
                if u <= 0.0 {
                    2.0 * normal::cdf(u) - 1.0
                } else {
                    1.0 - 2.0 * normal::sf(u)
                }
            }
        }
    }

    /// Value of the orthonormal polynomial of degree `k` at `x`.
    pub fn eval(self, k: usize, x: f64) -> f64 {
        let mut buf = vec![0.0; k + 1];
        self.eval_all(x, &mut buf);
        buf[k]
    }

    /// Fills `out[k]` with the degree-`k` orthonormal polynomial at `x`,
    /// for `k = 0..out.len()`.
    pub fn eval_all(self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        match self {
            Self::Hermite => {
                // psi_{k+1} = (x psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1)
                out[1] = x;
                for k in 1..out.len() - 1 {
                    let kf = k as f64;
                    out[k + 1] = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
                }
            }
            Self::Legendre => {
                // run the classical recurrence, then scale by sqrt(2k+1)
                let mut p_prev = 1.0;
                let mut p = x;
                out[1] = 3f64.sqrt() * x;
                for k in 1..out.len() - 1 {
                    let kf = k as f64;
                    let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
                    p_prev = p;
                    p = next;
                    out[k + 1] = (2.0 * kf + 3.0).sqrt() * p;
                }
            }
        }
    }
}

/// Multi-index of per-dimension degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `(Σ α_i^q)^(1/q)` for `q ∈ (0, 1]`.
    pub fn q_norm(&self, q: f64) -> f64 {
        self.0
            .iter()
            .filter(|&&a| a > 0)
            .map(|&a| (a as f64).powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// Product of univariate orthonormal polynomials, `Π_i P_{α_i}(x_i)`.
pub fn eval_multivariate(families: &[PolyFamily], alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
    if families.len() != alpha.dim() || x.len() != alpha.dim() {
        return Err(Error::DimensionMismatch(format!(
            "families {}, multi-index {}, point {}",
            families.len(),
            alpha.dim(),
            x.len()
        )));
    }
    Ok(families
        .iter()
        .zip(&alpha.0)
        .zip(x)
        .map(|((f, &a), &xi)| if a == 0 { 1.0 } else { f.eval(a as usize, xi) })
        .product())
}

/// Per-dimension tables of univariate values: `tables[i][(n, k)] = P_k(x_{n,i})`.
pub fn univariate_tables(
    families: &[PolyFamily],
    max_degrees: &[usize],
    points: ArrayView2<f64>,
) -> Result<Vec<Array2<f64>>> {
    if families.len() != points.ncols() || max_degrees.len() != points.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} families / {} degrees for {}-dimensional points",
            families.len(),
            max_degrees.len(),
            points.ncols()
        )));
    }
    if let Some(&p) = max_degrees.iter().find(|&&p| p > MAX_DEGREE) {
        return Err(Error::InvalidParameter(format!("degree {p} exceeds {MAX_DEGREE}")));
    }
    let n = points.nrows();
    Ok(families
        .iter()
        .zip(max_degrees)
        .enumerate()
        .map(|(i, (&fam, &p))| {
            let mut t = Array2::zeros((n, p + 1));
            for (r, mut row) in t.rows_mut().into_iter().enumerate() {
                fam.eval_all(points[[r, i]], row.as_slice_mut().expect("standard layout"));
            }
            t
        })
        .collect())
}

/// Regression matrix with entry `(n, j) = Ψ_{indices[j]}(points[n])`.
pub fn design_matrix(
    families: &[PolyFamily],
    indices: &[MultiIndex],
    points: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let m = families.len();
    if points.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "{m} families for {}-dimensional points",
            points.ncols()
        )));
    }
    if let Some(bad) = indices.iter().find(|a| a.dim() != m) {
        return Err(Error::DimensionMismatch(format!(
            "multi-index of length {} in a {m}-dimensional basis",
            bad.dim()
        )));
    }
    let mut max_deg = vec![0usize; m];
    for a in indices {
        for (d, &k) in max_deg.iter_mut().zip(&a.0) {
            *d = (*d).max(k as usize);
        }
    }
    let tables = univariate_tables(families, &max_deg, points)?;
    let n = points.nrows();
    let mut out = Array2::ones((n, indices.len()));
    for (j, a) in indices.iter().enumerate() {
        for (i, &k) in a.0.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let col = tables[i].column(k as usize);
            for r in 0..n {
                out[[r, j]] *= col[r];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn univariate_examples() {
        assert_eq!(PolyFamily::Hermite.eval(0, 3.7), 1.0);
        assert!((PolyFamily::Hermite.eval(2, 0.0) + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((PolyFamily::Legendre.eval(1, 1.0) - 3f64.sqrt()).abs() < 1e-15);
        // orthonormal Legendre at 1 equals sqrt(2k+1)
        for k in 0..=MAX_DEGREE {
            let v = PolyFamily::Legendre.eval(k, 1.0);
            assert!((v - ((2 * k + 1) as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_matches_explicit_polynomials() {
        // He_3 = x^3 - 3x, He_4 = x^4 - 6x^2 + 3
        for &x in &[-2.5, -0.3, 0.0, 1.1, 4.0] {
            let he3 = (x * x * x - 3.0 * x) / 6f64.sqrt();
            let he4 = (x.powi(4) - 6.0 * x * x + 3.0) / 24f64.sqrt();
            assert!((PolyFamily::Hermite.eval(3, x) - he3).abs() < 1e-12);
            assert!((PolyFamily::Hermite.eval(4, x) - he4).abs() < 1e-12);
        }
    }

    #[test]
    fn recurrence_stability_degree_20() {
        // He_20(3)/sqrt(20!) evaluated in 50-digit arithmetic
        let reference = 2.953_746_757_572_526_7_f64;
        let v = PolyFamily::Hermite.eval(20, 3.0);
        assert!(((v - reference) / reference).abs() < 1e-9, "{v}");
    }

    #[test]
    fn multivariate_examples() {
        let h = [PolyFamily::Hermite; 2];
        assert_eq!(eval_multivariate(&h, &MultiIndex::zero(2), &[0.3, -2.0]).unwrap(), 1.0);
        let v = eval_multivariate(&h, &vec![1, 1].into(), &[1.5, -2.0]).unwrap();
        assert!((v + 3.0).abs() < 1e-15);
        let v = eval_multivariate(&h, &vec![2, 0].into(), &[0.0, 7.0]).unwrap();
        assert!((v + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(eval_multivariate(&h, &vec![1].into(), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn design_matrix_examples() {
        let pts = array![[0.1, 0.2], [0.3, -0.4], [1.0, 2.0]];
        let a = design_matrix(&[PolyFamily::Hermite; 2], &[MultiIndex::zero(2)], pts.view()).unwrap();
        assert_eq!(a, Array2::<f64>::ones((3, 1)));
        let origin = array![[0.0]];
        let idx: Vec<MultiIndex> = vec![vec![0].into(), vec![1].into(), vec![2].into()];
        let a = design_matrix(&[PolyFamily::Hermite], &idx, origin.view()).unwrap();
        assert_eq!(a[[0, 0]], 1.0);
        assert_eq!(a[[0, 1]], 0.0);
        assert!((a[[0, 2]] + FRAC_1_SQRT_2).abs() < 1e-15);
        let a = design_matrix(&[PolyFamily::Hermite; 2], &[], pts.view()).unwrap();
        assert_eq!(a.shape(), &[3, 0]);
        assert!(design_matrix(&[PolyFamily::Hermite], &idx, pts.view()).is_err());
    }

    #[test]
    fn legendre_reference_map() {
        assert_eq!(PolyFamily::Legendre.reference_from_standard(0.0), 0.0);
        assert!(PolyFamily::Legendre.reference_from_standard(9.0) <= 1.0);
        assert_eq!(PolyFamily::Hermite.reference_from_standard(1.25), 1.25);
    }

    #[test]
    fn q_norm() {
        let a = MultiIndex(vec![1, 1, 0]);
        assert!((a.q_norm(1.0) - 2.0).abs() < 1e-15);
        assert!((a.q_norm(0.5) - 4.0).abs() < 1e-12);
        assert_eq!(MultiIndex::zero(3).q_norm(0.25), 0.0);
    }
}
