//! Experimental designs and the common surrogate interface.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::par;
use crate::probcore::InputModel;

/// Training points paired with model responses.
///
/// Points live in independent standard-normal space; use
/// [`ExperimentalDesign::from_physical`] to build one from physical inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalDesign {
    points: Array2<f64>,
    responses: Vec<f64>,
}

impl ExperimentalDesign {
    pub fn new(points: Array2<f64>, responses: Vec<f64>) -> Result<Self> {
        if points.nrows() != responses.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} responses",
                points.nrows(),
                responses.len()
            )));
        }
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidParameter("experimental design is empty".into()));
        }
        if points.iter().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("experimental design".into()));
        }
        Ok(Self { points, responses })
    }

    pub fn from_physical(model: &InputModel, x: ArrayView2<f64>, responses: Vec<f64>) -> Result<Self> {
        let mut u = Array2::zeros(x.raw_dim());
        for (i, row) in x.rows().into_iter().enumerate() {
            let ui = model.to_standard(&row.to_vec())?;
            u.row_mut(i).assign(&ndarray::ArrayView1::from(&ui));
        }
        Self::new(u, responses)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            points: self.points.select(Axis(0), rows),
            responses: rows.iter().map(|&i| self.responses[i]).collect(),
        }
    }

    /// Empirical variance of the responses (`1/(n−1)` estimator).
    pub fn response_variance(&self) -> f64 {
        crate::metrics::empirical_variance(&self.responses)
    }
}

/// A trained metamodel evaluated in independent standard-normal space.
pub trait Surrogate: Send + Sync {
    fn dim(&self) -> usize;

    fn predict_standard(&self, u: &[f64]) -> f64;

    /// Predictions for every row of `points`, evaluated in parallel chunks.
    fn predict_batch(&self, points: ArrayView2<f64>) -> Vec<f64> {
        const CHUNK: usize = 4096;
        let n = points.nrows();
        let parts = par::map_indexed(n.div_ceil(CHUNK), |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut buf = vec![0.0; points.ncols()];
            (lo..hi)
                .map(|i| {
                    for (b, v) in buf.iter_mut().zip(points.row(i)) {
                        *b = *v;
                    }
                    self.predict_standard(&buf)
                })
                .collect::<Vec<_>>()
        });
        parts.concat()
    }
}

impl<S: Surrogate + ?Sized> Surrogate for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn predict_standard(&self, u: &[f64]) -> f64 {
        (**self).predict_standard(u)
    }
}
