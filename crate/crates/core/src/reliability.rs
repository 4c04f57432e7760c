//! Failure probabilities by Monte Carlo, FORM, SORM and importance sampling.
//!
//! All methods work in independent standard-normal space. Failure is `g(u) <= 0`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::par;
use crate::probcore::{normal, InputModel, NormalStream, BLOCK};

pub type StandardFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Wraps a physical-space function as a function of the standard-normal vector.
pub fn through_input_model(
    input: InputModel,
    f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> StandardFn {
    Arc::new(move |u: &[f64]| {
        let mut x = vec![0.0; u.len()];
        input.to_physical_into(u, &mut x);
        f(&x)
    })
}

/// Performance function in standard space.
#[derive(Clone)]
pub struct LimitState {
    g: StandardFn,
    dim: usize,
    pub description: String,
}

impl std::fmt::Debug for LimitState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LimitState").field("dim", &self.dim).field("description", &self.description).finish()
    }
}

impl LimitState {
    pub fn new(dim: usize, g: StandardFn, description: impl Into<String>) -> Self {
        Self { g, dim, description: description.into() }
    }

    pub fn standard(
        dim: usize,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        description: impl Into<String>,
    ) -> Self {
        Self::new(dim, Arc::new(g), description)
    }

    /// `g(u) = threshold − response(u)`, failing when the response reaches the threshold.
    pub fn exceedance(dim: usize, response: StandardFn, threshold: f64) -> Self {
        Self::new(
            dim,
            Arc::new(move |u: &[f64]| threshold - response(u)),
            format!("response >= {threshold}"),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        (self.g)(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mcs,
    Form,
    Sorm,
    ImportanceSampling,
    Analytical,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mcs => "mcs",
            Self::Form => "form",
            Self::Sorm => "sorm",
            Self::ImportanceSampling => "importance-sampling",
            Self::Analytical => "analytical",
        }
    }
}

fn ser_beta<S: Serializer>(b: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if b.is_finite() {
        s.serialize_f64(*b)
    } else {
        s.serialize_none()
    }
}

fn de_beta<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    pub pf: f64,
    /// Coefficient of variation of the estimator; `None` when undefined.
    pub cov: Option<f64>,
    /// `−Φ⁻¹(pf)`; `+∞` (null in JSON) when no failure was observed.
    #[serde(serialize_with = "ser_beta", deserialize_with = "de_beta")]
    pub beta: f64,
    pub n_evals: u64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_point: Option<Vec<f64>>,
    /// Exact binomial coefficient of variation `√((1 − pf)/(n pf))` for Monte Carlo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binomial_cov: Option<f64>,
    /// Sampling stopped before reaching the target coefficient of variation.
    #[serde(default)]
    pub target_missed: bool,
}

impl ReliabilityResult {
    pub fn from_pf(pf: f64, method: Method) -> Self {
        Self {
            pf,
            cov: None,
            beta: normal::beta_from_pf(pf),
            n_evals: 0,
            method,
            design_point: None,
            binomial_cov: None,
            target_missed: false,
        }
    }

    fn monte_carlo(failures: u64, n: u64) -> Self {
        let pf = failures as f64 / n as f64;
        let nf = n as f64;
        Self {
            pf,
            cov: (failures > 0).then(|| 1.0 / (nf * pf).sqrt()),
            beta: if failures == 0 { f64::INFINITY } else { normal::beta_from_pf(pf) },
            n_evals: n,
            method: Method::Mcs,
            design_point: None,
            binomial_cov: (failures > 0).then(|| ((1.0 - pf) / (nf * pf)).sqrt()),
            target_missed: false,
        }
    }
}

fn sample_blocks<T: Send>(dim: usize, n: u64, seed: u64, f: impl Fn(&[f64], usize) -> T + Sync) -> Vec<T> {
    let stream = NormalStream::new(seed, dim);
    let blocks = n.div_ceil(BLOCK as u64) as usize;
    par::map_indexed(blocks, |b| {
        let u = stream.block(b as u64);
        let rows = (n - (b * BLOCK) as u64).min(BLOCK as u64) as usize;
        f(&u[..rows * dim], rows)
    })
}

/// Crude Monte Carlo with `n` standard-normal samples drawn in fixed blocks.
pub fn mcs_pf(ls: &LimitState, n: u64, seed: u64) -> Result<ReliabilityResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    let dim = ls.dim();
    let counts = sample_blocks(dim, n, seed, |u, rows| {
        (0..rows).filter(|&r| ls.eval(&u[r * dim..(r + 1) * dim]) <= 0.0).count() as u64
    });
    Ok(ReliabilityResult::monte_carlo(counts.iter().sum(), n))
}

/// Monte Carlo exceedance probabilities `P(response >= t)` for every threshold,
/// all computed from one shared sample.
pub fn mcs_exceedance_curve(
    response: &(dyn Fn(&[f64]) -> f64 + Sync),
    dim: usize,
    thresholds: &[f64],
    n: u64,
    seed: u64,
) -> Result<Vec<ReliabilityResult>> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidParameter("sample size and dimension must be >= 1".into()));
    }
    let counts = sample_blocks(dim, n, seed, |u, rows| {
        let mut c = vec![0u64; thresholds.len()];
        for r in 0..rows {
            let y = response(&u[r * dim..(r + 1) * dim]);
            for (ci, t) in c.iter_mut().zip(thresholds) {
                if *t - y <= 0.0 {
                    *ci += 1;
                }
            }
        }
        c
    });
    Ok((0..thresholds.len())
        .map(|t| ReliabilityResult::monte_carlo(counts.iter().map(|c| c[t]).sum(), n))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormOptions {
    /// Starting point; the origin when `None`.
    pub start: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FormOptions {
    fn default() -> Self {
        Self { start: None, tol: 1e-6, max_iter: 100 }
    }
}

struct Counted<'a> {
    ls: &'a LimitState,
    calls: AtomicU64,
}

impl Counted<'_> {
    fn eval(&self, u: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.ls.eval(u)
    }

    fn step(u: f64) -> f64 {
        1e-4 * u.abs().max(1.0)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut v = u.to_vec();
        (0..u.len())
            .map(|j| {
                let h = Self::step(u[j]);
                v[j] = u[j] + h;
                let gp = self.eval(&v);
                v[j] = u[j] - h;
                let gm = self.eval(&v);
                v[j] = u[j];
                (gp - gm) / (2.0 * h)
            })
            .collect()
    }

    fn hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let m = u.len();
        let g0 = self.eval(u);
        let mut v = u.to_vec();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            let hi = Self::step(u[i]);
            v[i] = u[i] + hi;
            let gp = self.eval(&v);
            v[i] = u[i] - hi;
            let gm = self.eval(&v);
            v[i] = u[i];
            h[(i, i)] = (gp - 2.0 * g0 + gm) / (hi * hi);
            for j in 0..i {
                let hj = Self::step(u[j]);
                let mut corner = |si: f64, sj: f64| {
                    v[i] = u[i] + si * hi;
                    v[j] = u[j] + sj * hj;
                    let g = self.eval(&v);
                    v[i] = u[i];
                    v[j] = u[j];
                    g
                };
                let val = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                    / (4.0 * hi * hj);
                h[(i, j)] = val;
                h[(j, i)] = val;
            }
        }
        h
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// First-order reliability by the Hasofer–Lind / Rackwitz–Fiessler iteration.
pub fn form(ls: &LimitState, options: &FormOptions) -> Result<ReliabilityResult> {
    let m = ls.dim();
    let mut u = options.start.clone().unwrap_or_else(|| vec![0.0; m]);
    if u.len() != m {
        return Err(Error::DimensionMismatch("FORM start point".into()));
    }
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidParameter("FORM needs tol > 0 and max_iter >= 1".into()));
    }
    let counted = Counted { ls, calls: AtomicU64::new(0) };
    let g_origin = counted.eval(&vec![0.0; m]);
    let scale = if g_origin != 0.0 { g_origin.abs() } else { 1.0 };
    for _ in 0..options.max_iter {
        let g = if u.iter().all(|&x| x == 0.0) { g_origin } else { counted.eval(&u) };
        let grad = counted.gradient(&u);
        let gn2: f64 = grad.iter().map(|x| x * x).sum();
        if !(gn2 > 0.0) || !gn2.is_finite() {
            return Err(Error::ZeroGradient(u));
        }
        let t = (grad.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() - g) / gn2;
        let next: Vec<f64> = grad.iter().map(|a| t * a).collect();
        let step = next.iter().zip(&u).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
        if step <= options.tol && g.abs() <= options.tol * scale {
            let beta = norm(&next) * if g_origin < 0.0 { -1.0 } else { 1.0 };
            return Ok(ReliabilityResult {
                pf: normal::pf_from_beta(beta),
                cov: None,
                beta,
                n_evals: counted.calls.load(Ordering::Relaxed),
                method: Method::Form,
                design_point: Some(next),
                binomial_cov: None,
                target_missed: false,
            });
        }
        u = next;
    }
    Err(Error::FormNotConverged { iterations: options.max_iter, last: u })
}

/// Main curvatures of the limit-state surface at the design point.
fn curvatures(counted: &Counted<'_>, u_star: &[f64]) -> Result<Vec<f64>> {
    let m = u_star.len();
    if m == 1 {
        return Ok(vec![]);
    }
    let grad = DVector::from_vec(counted.gradient(u_star));
    let gn = grad.norm();
    if !(gn > 0.0) {
        return Err(Error::ZeroGradient(u_star.to_vec()));
    }
    let alpha = &grad / gn;
    let mut basis = DMatrix::identity(m, m);
    basis.set_column(0, &alpha);
    // pick the identity column most aligned with alpha to drop
    let drop = (0..m).max_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs())).expect("m >= 1");
    let mut col = 1;
    for k in 0..m {
        if k != drop {
            let mut e = DVector::zeros(m);
            e[k] = 1.0;
            basis.set_column(col, &e);
            col += 1;
        }
    }
    let q = basis.qr().q();
    let tangent = q.columns(1, m - 1).into_owned();
    let h = counted.hessian(u_star);
    let a = tangent.transpose() * h * &tangent / gn;
    let sym = (&a + a.transpose()) * 0.5;
    let eig = sym.try_symmetric_eigen(1e-14, 10_000).ok_or_else(|| Error::Eigen("curvature matrix".into()))?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// Second-order correction of a converged FORM result (Breitung's formula).
pub fn sorm(ls: &LimitState, form_result: &ReliabilityResult) -> Result<ReliabilityResult> {
    let u_star = form_result
        .design_point
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("SORM needs a FORM design point".into()))?;
    let beta = form_result.beta;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("SORM needs a positive finite beta, got {beta}")));
    }
    let counted = Counted { ls, calls: AtomicU64::new(0) };
    let kappa = curvatures(&counted, u_star)?;
    let mut factor = 1.0;
    for k in &kappa {
        let t = 1.0 + beta * k;
        if !(t > 0.0) {
            return Err(Error::SormBreakdown(*k));
        }
        factor /= t.sqrt();
    }
    let pf = normal::pf_from_beta(beta) * factor;
    Ok(ReliabilityResult {
        pf,
        cov: None,
        beta: normal::beta_from_pf(pf),
        n_evals: form_result.n_evals + counted.calls.load(Ordering::Relaxed),
        method: Method::Sorm,
        design_point: Some(u_star.clone()),
        binomial_cov: None,
        target_missed: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsOptions {
    pub batch: usize,
    pub target_cov: f64,
    pub max_batches: usize,
    pub seed: u64,
}

impl Default for IsOptions {
    fn default() -> Self {
        Self { batch: 100, target_cov: 0.1, max_batches: 10_000, seed: 0 }
    }
}

/// Importance sampling with a unit-variance normal density centered at the design point.
///
/// Sample `k` is `u* + z_k` with `z_k` from the same stream crude Monte Carlo
/// uses for `seed`, so a centre at the origin reproduces crude Monte Carlo.
pub fn importance_sampling(ls: &LimitState, center: &[f64], options: &IsOptions) -> Result<ReliabilityResult> {
    let m = ls.dim();
    if center.len() != m {
        return Err(Error::DimensionMismatch("importance-sampling centre".into()));
    }
    if options.batch == 0 || options.max_batches == 0 || !(options.target_cov > 0.0) {
        return Err(Error::InvalidParameter("IS needs batch, max_batches >= 1 and target_cov > 0".into()));
    }
    let stream = NormalStream::new(options.seed, m);
    let shift = 0.5 * center.iter().map(|c| c * c).sum::<f64>();
    let (mut sum, mut sum_sq, mut n) = (0.0f64, 0.0f64, 0u64);
    let mut result = None;
    for k in 0..options.max_batches {
        let mut z = vec![0.0; options.batch * m];
        stream.fill((k * options.batch) as u64, &mut z);
        let contrib = par::map_indexed(options.batch, |r| {
            let zr = &z[r * m..(r + 1) * m];
            let u: Vec<f64> = zr.iter().zip(center).map(|(a, c)| a + c).collect();
            if ls.eval(&u) <= 0.0 {
                (-(zr.iter().zip(center).map(|(a, c)| a * c).sum::<f64>()) - shift).exp()
            } else {
                0.0
            }
        });
        for w in contrib {
            sum += w;
            sum_sq += w * w;
        }
        n += options.batch as u64;
        let nf = n as f64;
        let pf = sum / nf;
        let cov = if pf > 0.0 {
            let var = (sum_sq / nf - pf * pf).max(0.0) * nf / (nf - 1.0);
            Some(var.sqrt() / (nf.sqrt() * pf))
        } else {
            None
        };
        let done = cov.is_some_and(|c| c <= options.target_cov);
        result = Some((pf, cov));
        if done {
            break;
        }
    }
    let (pf, cov) = result.expect("max_batches >= 1");
    Ok(ReliabilityResult {
        pf,
        cov,
        beta: if pf > 0.0 { normal::beta_from_pf(pf) } else { f64::INFINITY },
        n_evals: n,
        method: Method::ImportanceSampling,
        design_point: Some(center.to_vec()),
        binomial_cov: None,
        target_missed: !cov.is_some_and(|c| c <= options.target_cov),
    })
}

/// One threshold of a failure-probability curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub result: Result<ReliabilityResult>,
}

/// Evaluates `estimate` at every threshold, keeping failures per threshold.
pub fn pf_curve(
    thresholds: &[f64],
    mut estimate: impl FnMut(f64) -> Result<ReliabilityResult>,
) -> Result<Vec<CurvePoint>> {
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter("thresholds must be sorted ascending".into()));
    }
    Ok(thresholds.iter().map(|&t| CurvePoint { threshold: t, result: estimate(t) }).collect())
}

/// FORM then importance sampling at each threshold of `response`, warm-starting
/// every FORM search from the previous design point.
pub fn is_exceedance_curve(
    response: StandardFn,
    dim: usize,
    thresholds: &[f64],
    form_options: &FormOptions,
    is_options: &IsOptions,
) -> Result<Vec<CurvePoint>> {
    let mut start = form_options.start.clone();
    pf_curve(thresholds, |t| {
        let ls = LimitState::exceedance(dim, response.clone(), t);
        let opts = FormOptions { start: start.clone(), ..form_options.clone() };
        let f = form(&ls, &opts)?;
        let u_star = f.design_point.clone().expect("FORM sets the design point");
        start = Some(u_star.clone());
        let mut r = importance_sampling(&ls, &u_star, is_options)?;
        r.n_evals += f.n_evals;
        Ok(r)
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        _ => "-".into(),
    }
}

/// Writes `threshold,pf,cov,beta,n_evals,method`; failed or undefined entries are `-`.
pub fn write_curve_csv<W: std::io::Write>(points: &[CurvePoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["threshold", "pf", "cov", "beta", "n_evals", "method"])?;
    for p in points {
        let t = format!("{:e}", p.threshold);
        match &p.result {
            Ok(r) => wr.write_record([
                t,
                format!("{:e}", r.pf),
                fmt_opt(r.cov),
                fmt_opt(Some(r.beta)),
                r.n_evals.to_string(),
                r.method.as_str().to_string(),
            ])?,
            Err(e) => wr.write_record([t, "-".into(), "-".into(), "-".into(), "-".into(), format!("error: {e}")])?,
        }
    }
    wr.flush()?;
    Ok(())
}
