//! Midspan deflection of a simply supported beam under a concentrated load.

use crate::error::{Error, Result};
use crate::probcore::{normal, InputModel, Marginal};

/// Inputs `(b, h, L, E, P)` in m, m, m, MPa, kN; deflection in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    marginals: [Marginal; 5],
}

const MOMENTS: [(f64, f64); 5] = [(0.15, 0.05), (0.3, 0.05), (5.0, 0.01), (30_000.0, 0.15), (10.0, 0.20)];

impl Default for Beam {
    fn default() -> Self {
        Self::new()
    }
}

impl Beam {
    pub const NAMES: [&'static str; 5] = ["b", "h", "L", "E", "P"];

    pub fn new() -> Self {
        let marginals = MOMENTS.map(|(m, c)| Marginal::lognormal_from_moments(m, c).expect("valid moments"));
        Self { marginals }
    }

    pub fn input_model(&self) -> InputModel {
        InputModel::independent(self.marginals.to_vec()).expect("valid marginals")
    }

    /// `U = P L³ / (4 E b h³)`; kN·m³/(MPa·m⁴) gives millimetres.
    pub fn deflection(x: &[f64]) -> Result<f64> {
        if x.len() != 5 {
            return Err(Error::DimensionMismatch(format!("beam takes 5 inputs, got {}", x.len())));
        }
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::OutsideSupport { index: i, value: *v });
        }
        Ok(Self::deflection_unchecked(x))
    }

    pub fn deflection_unchecked(x: &[f64]) -> f64 {
        let (b, h, l, e, p) = (x[0], x[1], x[2], x[3], x[4]);
        p * l.powi(3) / (4.0 * e * b * h.powi(3))
    }

    /// Parameters `(λ_U, ζ_U)` of the lognormal deflection.
    pub fn deflection_lognormal(&self) -> (f64, f64) {
        let p: Vec<(f64, f64)> = self
            .marginals
            .iter()
            .map(|m| match m {
                Marginal::Lognormal { lambda, zeta } => (*lambda, *zeta),
                _ => unreachable!("beam inputs are lognormal"),
            })
            .collect();
        let [b, h, l, e, pp] = [p[0], p[1], p[2], p[3], p[4]];
        let lambda = -(4f64).ln() + pp.0 + 3.0 * l.0 - e.0 - b.0 - 3.0 * h.0;
        let zeta = (pp.1.powi(2) + 9.0 * l.1.powi(2) + e.1.powi(2) + b.1.powi(2) + 9.0 * h.1.powi(2)).sqrt();
        (lambda, zeta)
    }

    /// Exact `P(U >= u_lim)`.
    pub fn analytical_pf(&self, u_lim: f64) -> f64 {
        if u_lim <= 0.0 {
            return 1.0;
        }
        let (lambda, zeta) = self.deflection_lognormal();
        normal::sf((u_lim.ln() - lambda) / zeta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deflection_at_means() {
        let u = Beam::deflection(&[0.15, 0.3, 5.0, 30_000.0, 10.0]).unwrap();
        assert!((u - 10.0 * 125.0 / (4.0 * 30_000.0 * 0.15 * 0.027)).abs() < 1e-12);
        assert!((u - 2.5720).abs() < 1e-4);
        let u2 = Beam::deflection(&[0.15, 0.3, 5.0, 30_000.0, 20.0]).unwrap();
        assert!((u2 - 2.0 * u).abs() < 1e-12);
        let u3 = Beam::deflection(&[0.15, 0.6, 5.0, 30_000.0, 10.0]).unwrap();
        assert!((u3 - u / 8.0).abs() < 1e-12);
        assert!(Beam::deflection(&[0.15, 0.0, 5.0, 30_000.0, 10.0]).is_err());
        assert!(Beam::deflection(&[1.0]).is_err());
    }

    #[test]
    fn analytical_curve() {
        let beam = Beam::new();
        let pf = [6.60e-2, 1.19e-2, 2.00e-3, 3.37e-4, 5.86e-5, 1.07e-5];
        let beta = [1.51, 2.26, 2.88, 3.40, 3.85, 4.25];
        for (k, t) in (4..=9).enumerate() {
            let p = beam.analytical_pf(t as f64);
            assert!((p - pf[k]).abs() <= 0.005 * pf[k], "u={t}: {p}");
            assert!((normal::beta_from_pf(p) - beta[k]).abs() <= 0.01);
        }
        assert!(beam.analytical_pf(1e-9) > 1.0 - 1e-12);
        assert_eq!(beam.analytical_pf(0.0), 1.0);
    }
}
