use serde::{Deserialize, Serialize};

use super::normal::{self, STANDARD_CLIP};
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A univariate marginal distribution, stored with its native parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Gaussian { mean: f64, std: f64 },
    /// `ln X ~ N(lambda, zeta²)`.
    Lognormal { lambda: f64, zeta: f64 },
    /// Gumbel for maxima, `F(x) = exp(-exp(-(x - location) / scale))`.
    Gumbel { location: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
    /// Gaussian `N(mu, sigma²)` truncated to `[0, ∞)`. `mu` and `sigma` are
    /// the parameters of the parent (untruncated) distribution.
    TruncatedGaussian { mu: f64, sigma: f64 },
}

impl Marginal {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        Self::Gaussian { mean, std }.validated()
    }

    pub fn standard_normal() -> Self {
        Self::Gaussian { mean: 0.0, std: 1.0 }
    }

    pub fn lognormal(lambda: f64, zeta: f64) -> Result<Self> {
        Self::Lognormal { lambda, zeta }.validated()
    }

    /// Lognormal with the given mean and coefficient of variation.
    pub fn lognormal_from_moments(mean: f64, cov: f64) -> Result<Self> {
        if !(mean > 0.0) || !(cov > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lognormal needs mean > 0 and CoV > 0, got {mean}, {cov}"
            )));
        }
        let zeta2 = (1.0 + cov * cov).ln();
        Self::lognormal(mean.ln() - 0.5 * zeta2, zeta2.sqrt())
    }

    pub fn gumbel(location: f64, scale: f64) -> Result<Self> {
        Self::Gumbel { location, scale }.validated()
    }

    pub fn gumbel_from_moments(mean: f64, std: f64) -> Result<Self> {
        let scale = std * 6f64.sqrt() / std::f64::consts::PI;
        Self::gumbel(mean - EULER_GAMMA * scale, scale)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::Uniform { lower, upper }.validated()
    }

    pub fn truncated_gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Self::TruncatedGaussian { mu, sigma }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Gaussian { mean, std } => mean.is_finite() && std > 0.0 && std.is_finite(),
            Self::Lognormal { lambda, zeta } => lambda.is_finite() && zeta > 0.0 && zeta.is_finite(),
            Self::Gumbel { location, scale } => {
                location.is_finite() && scale > 0.0 && scale.is_finite()
            }
            Self::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
            Self::TruncatedGaussian { mu, sigma } => {
                // the retained mass must be representable
                mu.is_finite() && sigma > 0.0 && sigma.is_finite() && normal::sf(-mu / sigma) > 0.0
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!("invalid marginal parameters: {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { mean, .. } => mean,
            Self::Lognormal { lambda, zeta } => (lambda + 0.5 * zeta * zeta).exp(),
            Self::Gumbel { location, scale } => location + EULER_GAMMA * scale,
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
            Self::TruncatedGaussian { mu, sigma } => {
                let a = -mu / sigma;
                mu + sigma * normal::pdf(a) / normal::sf(a)
            }
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Self::Gaussian { std, .. } => std,
            Self::Lognormal { lambda, zeta } => {
                let z2 = zeta * zeta;
                (z2.exp_m1() * (2.0 * lambda + z2).exp()).sqrt()
            }
            Self::Gumbel { scale, .. } => scale * std::f64::consts::PI / 6f64.sqrt(),
            Self::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
            Self::TruncatedGaussian { mu, sigma } => {
                let a = -mu / sigma;
                let lam = normal::pdf(a) / normal::sf(a);
                sigma * (1.0 + a * lam - lam * lam).sqrt()
            }
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Self::Gaussian { .. } | Self::Gumbel { .. } => x.is_finite(),
            Self::Lognormal { .. } => x > 0.0 && x.is_finite(),
            Self::Uniform { lower, upper } => (lower..=upper).contains(&x),
            Self::TruncatedGaussian { .. } => x >= 0.0 && x.is_finite(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => normal::cdf((x - mean) / std),
            Self::Lognormal { lambda, zeta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal::cdf((x.ln() - lambda) / zeta)
                }
            }
            Self::Gumbel { location, scale } => (-(-(x - location) / scale).exp()).exp(),
            Self::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Self::TruncatedGaussian { mu, sigma } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let a = -mu / sigma;
                normal::cdf_increment(a, x / sigma) / normal::sf(a)
            }
        }
    }

    /// Survival function 1 − F(x), computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => normal::sf((x - mean) / std),
            Self::Lognormal { lambda, zeta } => {
                if x <= 0.0 {
                    1.0
                } else {
                    normal::sf((x.ln() - lambda) / zeta)
                }
            }
            Self::Gumbel { location, scale } => -(-(-(x - location) / scale).exp()).exp_m1(),
            Self::Uniform { lower, upper } => ((upper - x) / (upper - lower)).clamp(0.0, 1.0),
            Self::TruncatedGaussian { mu, sigma } => {
                if x <= 0.0 {
                    return 1.0;
                }
                normal::sf((x - mu) / sigma) / normal::sf(-mu / sigma)
            }
        }
    }

    /// Inverse CDF for p in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => mean + std * normal::ppf(p),
            Self::Lognormal { lambda, zeta } => (lambda + zeta * normal::ppf(p)).exp(),
            Self::Gumbel { location, scale } => location - scale * (-p.ln()).ln(),
            Self::Uniform { lower, upper } => lower + p * (upper - lower),
            Self::TruncatedGaussian { mu, sigma } => {
                let a = -mu / sigma;
                let kept = normal::sf(a);
                let mut h = ((mu + sigma * normal::ppf(normal::cdf(a) + p * kept)) / sigma).max(0.0);
                if h * (a.abs() + 1.0) < 1.0 {
                    // Newton polish near the bound, where the direct form cancels
                    let target = p * kept;
                    for _ in 0..4 {
                        let step = (normal::cdf_increment(a, h) - target) / normal::pdf(a + h);
                        h = (h - step).max(0.0);
                    }
                }
                sigma * h
            }
        }
    }

    /// Inverse survival function for q in (0, 1).
    pub fn isf(&self, q: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => mean + std * normal::isf(q),
            Self::Lognormal { lambda, zeta } => (lambda + zeta * normal::isf(q)).exp(),
            Self::Gumbel { location, scale } => location - scale * (-(-q).ln_1p()).ln(),
            Self::Uniform { lower, upper } => upper - q * (upper - lower),
            Self::TruncatedGaussian { mu, sigma } => {
                mu + sigma * normal::isf(q * normal::sf(-mu / sigma))
            }
        }
    }

    /// Maps a standard-normal value to this marginal, `F⁻¹(Φ(z))`.
    /// Returns the value and whether `z` had to be clipped to ±8.2.
    pub fn from_standard(&self, z: f64) -> (f64, bool) {
        let clipped = z.abs() > STANDARD_CLIP;
        let z = z.clamp(-STANDARD_CLIP, STANDARD_CLIP);
        let x = match *self {
            Self::Gaussian { mean, std } => mean + std * z,
            Self::Lognormal { lambda, zeta } => (lambda + zeta * z).exp(),
            _ if z <= 0.0 => self.quantile(normal::cdf(z)),
            _ => self.isf(normal::sf(z)),
        };
        (x, clipped)
    }

    /// Maps `x` to standard-normal space, `Φ⁻¹(F(x))`. Points on the support
    /// boundary map to ∓8.2 and are flagged; points outside it are errors
    /// (`index` names the coordinate in the reported error).
    pub fn to_standard(&self, x: f64, index: usize) -> Result<(f64, bool)> {
        if !self.in_support(x) {
            return Err(Error::OutsideSupport { index, value: x });
        }
        let z = match *self {
            Self::Gaussian { mean, std } => (x - mean) / std,
            Self::Lognormal { lambda, zeta } => (x.ln() - lambda) / zeta,
            _ => {
                let p = self.cdf(x);
                if p <= 0.5 {
                    normal::ppf(p)
                } else {
                    normal::isf(self.sf(x))
                }
            }
        };
        if z.is_nan() {
            return Err(Error::NonFinite(format!("standard transform of coordinate {index}")));
        }
        if z.abs() > STANDARD_CLIP {
            Ok((z.clamp(-STANDARD_CLIP, STANDARD_CLIP), true))
        } else {
            Ok((z, false))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lognormal_moment_recovery() {
        for &(m, c) in &[(0.15, 0.05), (30000.0, 0.15), (10.0, 0.2), (0.002, 0.1)] {
            let d = Marginal::lognormal_from_moments(m, c).unwrap();
            assert!((d.mean() - m).abs() <= 1e-12 * m);
            assert!((d.std() / d.mean() - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn gumbel_moments_and_location() {
        let d = Marginal::gumbel_from_moments(50.0, 7.5).unwrap();
        assert!((d.mean() - 50.0).abs() < 1e-12);
        assert!((d.std() - 7.5).abs() < 1e-12);
        if let Marginal::Gumbel { location, .. } = d {
            let (u, flag) = d.to_standard(location, 0).unwrap();
            assert!(!flag);
            // independent CDF evaluation: F(location) = e^-1
            assert!((d.cdf(location) - (-1.0f64).exp()).abs() < 1e-15);
            assert!((u + 0.337_474_963_764_202_46).abs() < 1e-12);
        }
    }

    #[test]
    fn lognormal_median_at_zero() {
        let d = Marginal::lognormal(0.3, 0.2).unwrap();
        assert_eq!(d.from_standard(0.0).0, 0.3f64.exp());
        assert!(d.to_standard(0.3f64.exp(), 0).unwrap().0.abs() < 1e-14);
    }

    #[test]
    fn uniform_median() {
        let d = Marginal::uniform(-1.0, 1.0).unwrap();
        assert!(d.from_standard(0.0).0.abs() < 1e-16);
    }

    #[test]
    fn truncated_gaussian_boundary() {
        let d = Marginal::truncated_gaussian(1.0, 0.5).unwrap();
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.sf(1e300), 0.0);
        let (u, flag) = d.to_standard(0.0, 3).unwrap();
        assert!(flag);
        assert_eq!(u, -STANDARD_CLIP);
        assert_eq!(
            d.to_standard(-0.1, 3),
            Err(Error::OutsideSupport { index: 3, value: -0.1 })
        );
    }

    #[test]
    fn cdf_quantile_roundtrip() {
        let ds = [
            Marginal::gaussian(2.0, 3.0).unwrap(),
            Marginal::lognormal_from_moments(10.0, 0.2).unwrap(),
            Marginal::gumbel_from_moments(50.0, 7.5).unwrap(),
            Marginal::uniform(-2.0, 5.0).unwrap(),
            Marginal::truncated_gaussian(0.4186, 0.19537).unwrap(),
        ];
        for d in ds {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let x = d.quantile(p);
                assert!((d.cdf(x) - p).abs() < 1e-12, "{d:?} p={p}");
                assert!((d.quantile(d.cdf(x)) - x).abs() <= 1e-10 * (1.0 + x.abs()));
                assert!((d.isf(1.0 - p) - x).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn clip_flag_on_extreme_input() {
        let d = Marginal::gumbel(0.0, 1.0).unwrap();
        let (x, flag) = d.from_standard(12.0);
        assert!(flag && x.is_finite());
        assert_eq!(x, d.from_standard(STANDARD_CLIP).0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Marginal::lognormal(0.0, 0.0).is_err());
        assert!(Marginal::uniform(1.0, 1.0).is_err());
        assert!(Marginal::gumbel(0.0, -1.0).is_err());
        assert!(Marginal::lognormal_from_moments(-1.0, 0.1).is_err());
    }
}
