//! Dense least squares through the singular value decomposition.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LsqSolution {
    pub coefficients: Vec<f64>,
    /// `‖A c − y‖₂`.
    pub residual_norm: f64,
    pub effective_rank: usize,
    /// Diagonal of the hat matrix `A (AᵀA)⁺ Aᵀ`, when requested.
    pub leverage: Option<Vec<f64>>,
    /// `trace((AᵀA)⁺) = Σ 1/σ_j²` over the retained singular values.
    pub inv_gram_trace: f64,
}

impl LsqSolution {
    pub fn is_full_rank(&self) -> bool {
        self.effective_rank == self.coefficients.len()
    }
}

/// Minimum-norm minimizer of `‖A c − y‖₂`.
pub fn solve_ols(a: ArrayView2<f64>, y: &[f64], want_leverage: bool) -> Result<LsqSolution> {
    let (n, p) = a.dim();
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!("least squares on a {n}x{p} matrix")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("matrix has {n} rows, rhs {}", y.len())));
    }
    if a.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares system".into()));
    }
    let mat = DMatrix::from_fn(n, p, |i, j| a[[i, j]]);
    let svd = mat.svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Solve("SVD without U".into()))?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Solve("SVD without V".into()))?;
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..sigma.len())
        .filter(|&j| smax > 0.0 && sigma[j] > RANK_TOLERANCE * smax)
        .collect();

    let yv = DVector::from_column_slice(y);
    let mut c = DVector::zeros(p);
    let mut fitted = DVector::zeros(n);
    let mut inv_gram_trace = 0.0;
    for &j in &keep {
        let uj = u.column(j);
        let proj = uj.dot(&yv);
        c += v_t.row(j).transpose() * (proj / sigma[j]);
        fitted += uj * proj;
        inv_gram_trace += 1.0 / (sigma[j] * sigma[j]);
    }
    let residual_norm = (&yv - &fitted).norm();
    let leverage = want_leverage.then(|| {
        (0..n)
            .map(|i| keep.iter().map(|&j| u[(i, j)] * u[(i, j)]).sum::<f64>().min(1.0))
            .collect()
    });
    Ok(LsqSolution {
        coefficients: c.iter().copied().collect(),
        residual_norm,
        effective_rank: keep.len(),
        leverage,
        inv_gram_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0));
        let y = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        (a, y)
    }

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn normal_equations(a: &Array2<f64>, y: &[f64]) -> Vec<f64> {
        let p = a.ncols();
        let mut m = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                m[i][j] = a.column(i).dot(&a.column(j));
            }
            m[i][p] = a.column(i).iter().zip(y).map(|(x, y)| x * y).sum();
        }
        for col in 0..p {
            let piv = (col..p).max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs())).unwrap();
            m.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for k in col..=p {
                        m[r][k] -= f * m[col][k];
                    }
                }
            }
        }
        (0..p).map(|i| m[i][p] / m[i][i]).collect()
    }

    #[test]
    fn identity_system() {
        let s = solve_ols(Array2::eye(3).view(), &[1.0, 2.0, 3.0], false).unwrap();
        for (c, e) in s.coefficients.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - e).abs() < 1e-14);
        }
        assert!(s.residual_norm < 1e-14);
        assert_eq!(s.effective_rank, 3);
    }

    #[test]
    fn column_of_ones_gives_mean() {
        let s = solve_ols(Array2::ones((4, 1)).view(), &[1.0, 1.0, 3.0, 3.0], true).unwrap();
        assert!((s.coefficients[0] - 2.0).abs() < 1e-14);
        assert!((s.residual_norm - 2.0).abs() < 1e-14);
        for h in s.leverage.unwrap() {
            assert!((h - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicate_columns_rank_deficient() {
        let a = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [0.5, 0.5]];
        let s = solve_ols(a.view(), &[1.0, 2.5, 2.0, 1.0], true).unwrap();
        assert_eq!(s.effective_rank, 1);
        assert!(s.coefficients.iter().all(|c| c.is_finite()));
        // minimum norm splits the weight evenly
        assert!((s.coefficients[0] - s.coefficients[1]).abs() < 1e-12);
        let h: f64 = s.leverage.unwrap().iter().sum();
        assert!((h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let a = array![[1.0], [f64::NAN]];
        assert!(matches!(solve_ols(a.view(), &[1.0, 2.0], false), Err(Error::NonFinite(_))));
        assert!(solve_ols(Array2::zeros((2, 0)).view(), &[1.0, 2.0], false).is_err());
    }

    #[test]
    fn agrees_with_normal_equations() {
        for seed in 0..20 {
            let (a, y) = random_system(50, 10, seed);
            let s = solve_ols(a.view(), &y, true).unwrap();
            let oracle = normal_equations(&a, &y);
            for (c, o) in s.coefficients.iter().zip(&oracle) {
                assert!((c - o).abs() <= 1e-9 * o.abs().max(1.0), "{c} vs {o}");
            }
            // residual orthogonality
            let r: Vec<f64> = (0..50)
                .map(|i| y[i] - a.row(i).iter().zip(&s.coefficients).map(|(x, c)| x * c).sum::<f64>())
                .collect();
            let anorm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..10 {
                let g: f64 = a.column(j).iter().zip(&r).map(|(x, r)| x * r).sum();
                assert!(g.abs() <= 1e-8 * anorm * ynorm);
            }
            let h: f64 = s.leverage.unwrap().iter().sum();
            assert!((h - s.effective_rank as f64).abs() < 1e-8);
        }
    }
}
