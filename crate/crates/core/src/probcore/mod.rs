//! Probabilistic input modeling: marginals, Gaussian-copula transforms,
//! Sobol and pseudo-random designs.

mod input;
mod marginal;
pub mod normal;
mod sampling;
mod sobol;
mod sobol_table;

pub use input::InputModel;
pub use marginal::Marginal;
pub use sampling::{mcs_sample, standard_sample, NormalStream, BLOCK};
pub use sobol::{sobol_design, Sobol, MAX_DIM as SOBOL_MAX_DIM};

use ndarray::Array2;

use crate::error::Result;

/// Sobol points mapped to independent standard-normal space, `Φ⁻¹(s)`.
pub fn sobol_standard_design(dim: usize, n: usize) -> Result<Array2<f64>> {
    Ok(sobol_design(dim, n)?.mapv(normal::ppf))
}

/// Writes a point matrix as CSV with header `x1,...,xM`.
pub fn write_points_csv<W: std::io::Write>(points: &Array2<f64>, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record((1..=points.ncols()).map(|i| format!("x{i}")))?;
    for row in points.rows() {
        wr.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    Ok(())
}
