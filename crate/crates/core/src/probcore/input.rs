use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::marginal::Marginal;
use crate::error::{Error, Result};

/// Joint input distribution: marginals coupled through a Gaussian copula.
///
/// The correlation matrix acts in standard-normal space. Independent
/// standard variables `u` map to physical ones via `z = L u`,
/// `x_i = F_i⁻¹(Φ(z_i))`, with `L` the lower Cholesky factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InputModelRepr", into = "InputModelRepr")]
pub struct InputModel {
    marginals: Vec<Marginal>,
    correlation: DMatrix<f64>,
    chol: Option<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputModelRepr {
    marginals: Vec<Marginal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correlation: Option<Vec<Vec<f64>>>,
}

impl TryFrom<InputModelRepr> for InputModel {
    type Error = Error;

    fn try_from(r: InputModelRepr) -> Result<Self> {
        let m = r.marginals.len();
        match r.correlation {
            None => InputModel::independent(r.marginals),
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|row| row.len() != m) {
                    return Err(Error::DimensionMismatch(format!(
                        "correlation must be {m}x{m}"
                    )));
                }
                let c = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
                InputModel::with_correlation(r.marginals, c)
            }
        }
    }
}

impl From<InputModel> for InputModelRepr {
    fn from(m: InputModel) -> Self {
        let correlation = m.chol.as_ref().map(|_| {
            m.correlation
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect()
        });
        InputModelRepr { marginals: m.marginals, correlation }
    }
}

impl InputModel {
    pub fn independent(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidParameter("input model needs at least one marginal".into()));
        }
        let marginals = marginals
            .into_iter()
            .map(Marginal::validated)
            .collect::<Result<Vec<_>>>()?;
        let m = marginals.len();
        Ok(Self { marginals, correlation: DMatrix::identity(m, m), chol: None })
    }

    /// `dim` independent standard normal variables.
    pub fn standard_normal(dim: usize) -> Result<Self> {
        Self::independent(vec![Marginal::standard_normal(); dim])
    }

    pub fn with_correlation(marginals: Vec<Marginal>, correlation: DMatrix<f64>) -> Result<Self> {
        let mut model = Self::independent(marginals)?;
        let m = model.dim();
        if correlation.nrows() != m || correlation.ncols() != m {
            return Err(Error::DimensionMismatch(format!("correlation must be {m}x{m}")));
        }
        for i in 0..m {
            if (correlation[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                let (a, b) = (correlation[(i, j)], correlation[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 || a.abs() >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "correlation entry ({i},{j}) invalid or asymmetric"
                    )));
                }
            }
        }
        if correlation == DMatrix::identity(m, m) {
            return Ok(model);
        }
        let chol = correlation
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        model.correlation = correlation;
        model.chol = Some(chol);
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn is_independent(&self) -> bool {
        self.chol.is_none()
    }

    /// Writes `T⁻¹(u)` into `out`; returns true if any coordinate was clipped.
    pub fn to_physical_into(&self, u: &[f64], out: &mut [f64]) -> bool {
        let mut clipped = false;
        match &self.chol {
            None => {
                for ((o, &ui), marg) in out.iter_mut().zip(u).zip(&self.marginals) {
                    let (x, c) = marg.from_standard(ui);
                    *o = x;
                    clipped |= c;
                }
            }
            Some(l) => {
                for (i, marg) in self.marginals.iter().enumerate() {
                    let z: f64 = (0..=i).map(|j| l[(i, j)] * u[j]).sum();
                    let (x, c) = marg.from_standard(z);
                    out[i] = x;
                    clipped |= c;
                }
            }
        }
        clipped
    }

    /// Physical point from an independent standard-normal vector, with clip flag.
    pub fn to_physical_flagged(&self, u: &[f64]) -> Result<(Vec<f64>, bool)> {
        self.check_dim(u.len())?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("standard-normal input".into()));
        }
        let mut out = vec![0.0; u.len()];
        let clipped = self.to_physical_into(u, &mut out);
        Ok((out, clipped))
    }

    pub fn to_physical(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.to_physical_flagged(u).map(|(x, _)| x)
    }

    /// Independent standard-normal vector of a physical point, with clip flag.
    pub fn to_standard_flagged(&self, x: &[f64]) -> Result<(Vec<f64>, bool)> {
        self.check_dim(x.len())?;
        let mut clipped = false;
        let mut z = Vec::with_capacity(x.len());
        for (i, (&xi, marg)) in x.iter().zip(&self.marginals).enumerate() {
            let (zi, c) = marg.to_standard(xi, i)?;
            clipped |= c;
            z.push(zi);
        }
        if let Some(l) = &self.chol {
            // forward substitution L u = z
            for i in 0..z.len() {
                let s: f64 = (0..i).map(|j| l[(i, j)] * z[j]).sum();
                z[i] = (z[i] - s) / l[(i, i)];
            }
        }
        Ok((z, clipped))
    }

    pub fn to_standard(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.to_standard_flagged(x).map(|(u, _)| u)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {len} coordinates, input model has {}",
                self.dim()
            )));
        }
        Ok(())
    }
}
