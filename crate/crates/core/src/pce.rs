//! Sparse polynomial chaos expansions selected by least-angle regression and
//! the corrected leave-one-out error.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::design::{ExperimentalDesign, Surrogate};
use crate::error::{Error, Result};
use crate::lsq::solve_ols;
use crate::metrics::empirical_variance;
use crate::par;
use crate::polybasis::{design_matrix, MultiIndex, PolyFamily, MAX_DEGREE};
use crate::probcore::InputModel;

/// Tolerance on float q-norms when truncating.
pub const QNORM_TOLERANCE: f64 = 1e-10;

/// Leverages at or above `1 - LEVERAGE_TOLERANCE` are treated as interpolating.
const LEVERAGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PceConfig {
    /// Candidate maximum total degrees.
    pub degrees: Vec<u32>,
    /// Candidate q-norms, each in (0, 1].
    pub q_norms: Vec<f64>,
    /// Largest candidate basis enumerated before giving up on a (degree, q) cell.
    pub max_basis_size: usize,
}

impl Default for PceConfig {
    fn default() -> Self {
        Self { degrees: (1..=5).collect(), q_norms: vec![0.25, 0.5, 0.75, 1.0], max_basis_size: 10_000 }
    }
}

impl PceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() || self.q_norms.is_empty() {
            return Err(Error::InvalidParameter("degree and q grids must be nonempty".into()));
        }
        if let Some(q) = self.q_norms.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return Err(Error::InvalidParameter(format!("q-norm {q} outside (0, 1]")));
        }
        if self.degrees.iter().any(|&p| p as usize > MAX_DEGREE) {
            return Err(Error::InvalidParameter(format!("total degree above {MAX_DEGREE}")));
        }
        if self.max_basis_size == 0 {
            return Err(Error::InvalidParameter("max_basis_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Multi-indices with `‖α‖_q ≤ pt`, graded by total degree (the zero index first,
/// then decreasing lexicographic order within each degree).
pub fn hyperbolic_index_set(dim: usize, pt: u32, q: f64, limit: usize) -> Result<Vec<MultiIndex>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("q-norm {q} outside (0, 1]")));
    }
    let budget = (pt as f64 + QNORM_TOLERANCE).powf(q);
    let mut out = Vec::new();
    let mut alpha = vec![0u32; dim];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        i: usize,
        used: f64,
        budget: f64,
        pt: u32,
        q: f64,
        alpha: &mut Vec<u32>,
        out: &mut Vec<MultiIndex>,
        limit: usize,
    ) -> Result<()> {
        if i == alpha.len() {
            if out.len() >= limit {
                return Err(Error::BasisTooLarge { size: out.len() + 1, limit });
            }
            out.push(MultiIndex(alpha.clone()));
            return Ok(());
        }
        for k in 0..=pt {
            let cost = if k == 0 { 0.0 } else { (k as f64).powf(q) };
            if used + cost > budget {
                break;
            }
            alpha[i] = k;
            walk(i + 1, used + cost, budget, pt, q, alpha, out, limit)?;
        }
        alpha[i] = 0;
        Ok(())
    }
    walk(0, 0.0, budget, pt, q, &mut alpha, &mut out, limit)?;
    out.sort_by(|a, b| a.total_degree().cmp(&b.total_degree()).then_with(|| b.cmp(a)));
    Ok(out)
}

/// Leave-one-out diagnostics of a least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooError {
    /// Mean squared leave-one-out residual.
    pub loo: f64,
    /// `loo` times the correction factor `T(P, N)`; infinite when `N <= P`.
    pub corrected: f64,
    pub relative: f64,
    pub relative_corrected: f64,
    /// Points excluded because their leverage is one.
    pub degenerate_points: usize,
    /// The closed form was unavailable and explicit refits were used.
    pub explicit: bool,
}

fn normalizer(y: &[f64]) -> f64 {
    let v = empirical_variance(y);
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Leave-one-out error of the least-squares fit of `y` on `a`.
///
/// Uses the leverage shortcut when `a` has full column rank and falls back to
/// explicit refits otherwise.
pub fn loo_error(a: ArrayView2<f64>, y: &[f64], coefficients: &[f64]) -> Result<LooError> {
    let (n, p) = a.dim();
    if coefficients.len() != p {
        return Err(Error::DimensionMismatch("coefficients vs design columns".into()));
    }
    let sol = solve_ols(a, y, true)?;
    let norm = normalizer(y);
    let factor = if n > p { n as f64 / (n - p) as f64 * (1.0 + sol.inv_gram_trace) } else { f64::INFINITY };
    let (loo, degenerate, explicit) = if sol.is_full_rank() {
        let h = sol.leverage.expect("requested");
        let mut sum = 0.0;
        let mut degenerate = 0;
        for i in 0..n {
            if h[i] >= 1.0 - LEVERAGE_TOLERANCE {
                degenerate += 1;
                continue;
            }
            let fit: f64 = a.row(i).iter().zip(coefficients).map(|(x, c)| x * c).sum();
            sum += ((y[i] - fit) / (1.0 - h[i])).powi(2);
        }
        let loo = if degenerate == n { f64::INFINITY } else { sum / n as f64 };
        (loo, degenerate, false)
    } else {
        (explicit_loo(a, y)?, 0, true)
    };
    let corrected = if loo == 0.0 { 0.0 } else { loo * factor };
    Ok(LooError {
        loo,
        corrected,
        relative: loo / norm,
        relative_corrected: corrected / norm,
        degenerate_points: degenerate,
        explicit,
    })
}

/// Leave-one-out error by `N` separate refits.
pub fn explicit_loo(a: ArrayView2<f64>, y: &[f64]) -> Result<f64> {
    let n = a.nrows();
    if n < 2 {
        return Ok(f64::INFINITY);
    }
    let errs = par::map_indexed(n, |i| {
        let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let sub = a.select(Axis(0), &rows);
        let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let c = solve_ols(sub.view(), &ys, false)?.coefficients;
        let fit: f64 = a.row(i).iter().zip(&c).map(|(x, c)| x * c).sum();
        Ok::<_, Error>((y[i] - fit).powi(2))
    });
    let mut sum = 0.0;
    for e in errs {
        sum += e?;
    }
    Ok(sum / n as f64)
}

/// Sparse polynomial chaos expansion in independent standard-normal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PceModel {
    pub families: Vec<PolyFamily>,
    pub indices: Vec<MultiIndex>,
    pub coefficients: Vec<f64>,
    pub loo: LooError,
    /// The regression matrix had full column rank.
    pub full_rank: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_model: Option<InputModel>,
}

impl PceModel {
    fn check(&self) -> Result<()> {
        let m = self.families.len();
        if m == 0 {
            return Err(Error::InvalidParameter("PCE without dimensions".into()));
        }
        if self.indices.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch("indices vs coefficients".into()));
        }
        if self.indices.iter().any(|a| a.dim() != m || a.max_degree() as usize > MAX_DEGREE) {
            return Err(Error::DimensionMismatch("multi-index dimension or degree".into()));
        }
        let mut sorted = self.indices.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.indices.len() {
            return Err(Error::InvalidParameter("duplicate multi-indices".into()));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("PCE coefficients".into()));
        }
        if let Some(im) = &self.input_model {
            if im.dim() != m {
                return Err(Error::DimensionMismatch("input model dimension".into()));
            }
        }
        Ok(())
    }

    pub fn with_input_model(mut self, model: InputModel) -> Result<Self> {
        self.input_model = Some(model);
        self.check()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Coefficient of `alpha`, zero when absent.
    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.indices.iter().position(|a| a == alpha).map_or(0.0, |i| self.coefficients[i])
    }

    /// Sum of squared non-constant coefficients.
    pub fn variance(&self) -> f64 {
        self.indices
            .iter()
            .zip(&self.coefficients)
            .filter(|(a, _)| !a.is_zero())
            .map(|(_, c)| c * c)
            .sum()
    }

    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.families.len() {
            return Err(Error::DimensionMismatch(format!(
                "point of dimension {} for a {}-dimensional model",
                u.len(),
                self.families.len()
            )));
        }
        Ok(self.predict_standard(u))
    }

    pub fn predict_physical(&self, x: &[f64]) -> Result<f64> {
        let model = self
            .input_model
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("no input model attached".into()))?;
        Ok(self.predict_standard(&model.to_standard(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.check()?;
        Ok(m)
    }
}

impl Surrogate for PceModel {
    fn dim(&self) -> usize {
        self.families.len()
    }

    fn predict_standard(&self, u: &[f64]) -> f64 {
        let m = self.families.len();
        let mut max_deg = vec![0usize; m];
        for a in &self.indices {
            for (d, &k) in max_deg.iter_mut().zip(&a.0) {
                *d = (*d).max(k as usize);
            }
        }
        let psi: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut v = vec![0.0; max_deg[i] + 1];
                let fam = self.families[i];
                fam.eval_all(fam.reference_from_standard(u[i]), &mut v);
                v
            })
            .collect();
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(a, c)| {
                c * a.0.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, &k)| psi[i][k as usize]).product::<f64>()
            })
            .sum()
    }
}

fn reference_points(families: &[PolyFamily], ed: &ExperimentalDesign) -> Result<Array2<f64>> {
    if families.len() != ed.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} families for a {}-dimensional design",
            families.len(),
            ed.dim()
        )));
    }
    let u = ed.points();
    Ok(Array2::from_shape_fn(u.raw_dim(), |(r, i)| families[i].reference_from_standard(u[[r, i]])))
}

fn fit_columns(a: ArrayView2<f64>, y: &[f64], families: &[PolyFamily], indices: Vec<MultiIndex>) -> Result<PceModel> {
    let sol = solve_ols(a, y, false)?;
    let full_rank = sol.is_full_rank();
    let loo = loo_error(a, y, &sol.coefficients)?;
    Ok(PceModel {
        families: families.to_vec(),
        indices,
        coefficients: sol.coefficients,
        loo,
        full_rank,
        input_model: None,
    })
}

/// Ordinary least-squares expansion on a fixed basis.
pub fn fit_pce_ols(ed: &ExperimentalDesign, indices: &[MultiIndex], families: &[PolyFamily]) -> Result<PceModel> {
    if indices.is_empty() {
        return Err(Error::InvalidParameter("empty basis".into()));
    }
    let x = reference_points(families, ed)?;
    let a = design_matrix(families, indices, x.view())?;
    fit_columns(a.view(), ed.responses(), families, indices.to_vec())
}

/// Order in which least-angle regression activates the non-constant columns of `a`.
///
/// Regressors are centered and scaled to unit norm; the intercept is kept out
/// of the path. The path stops once the active set becomes numerically
/// collinear, the residual is exhausted, or `max_steps` columns are active.
pub fn lar_order(a: ArrayView2<f64>, y: &[f64], max_steps: usize) -> Vec<usize> {
    let (n, p) = a.dim();
    let mut x = a.to_owned();
    let mut usable = vec![false; p];
    for j in 0..p {
        let mut col = x.column_mut(j);
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let norm = col.dot(&col).sqrt();
        let scale = a.column(j).iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if norm > 1e-10 * scale.max(1e-300) * (n as f64).sqrt() {
            col.mapv_inplace(|v| v / norm);
            usable[j] = true;
        }
    }
    let ymean = y.iter().sum::<f64>() / n as f64;
    let mut r: Vec<f64> = y.iter().map(|v| v - ymean).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; p];
    let corr = |r: &[f64], j: usize| x.column(j).iter().zip(r).map(|(a, b)| a * b).sum::<f64>();

    let c0: Vec<f64> = (0..p).map(|j| if usable[j] { corr(&r, j) } else { 0.0 }).collect();
    let cmax0 = c0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if cmax0 <= 0.0 || max_steps == 0 {
        return active;
    }
    let mut next = (0..p).filter(|&j| usable[j]).fold(None, |best: Option<usize>, j| match best {
        Some(b) if c0[b].abs() >= c0[j].abs() => Some(b),
        _ => Some(j),
    });
    while let Some(j_new) = next.take() {
        active.push(j_new);
        is_active[j_new] = true;
        let k = active.len();
        let xa = DMatrix::from_fn(n, k, |i, l| x[[i, active[l]]]);
        let gram = xa.transpose() * &xa;
        let Some(chol) = gram.clone().cholesky() else {
            active.pop();
            break;
        };
        let min_pivot = (0..k).map(|l| chol.l_dirty()[(l, l)]).fold(f64::INFINITY, f64::min);
        if min_pivot < 1e-7 {
            active.pop();
            break;
        }
        let c: Vec<f64> = (0..p).map(|j| if usable[j] { corr(&r, j) } else { 0.0 }).collect();
        let cmax = active.iter().fold(0.0f64, |m, &j| m.max(c[j].abs()));
        if cmax <= 1e-12 * cmax0 || k >= max_steps {
            break;
        }
        let s = nalgebra::DVector::from_iterator(k, active.iter().map(|&j| c[j].signum()));
        let ginv_s = chol.solve(&s);
        let aa = 1.0 / s.dot(&ginv_s).sqrt();
        let w = ginv_s * aa;
        let u = &xa * &w;
        let mut gamma = cmax / aa;
        let mut entering = None;
        for j in 0..p {
            if is_active[j] || !usable[j] {
                continue;
            }
            let aj: f64 = x.column(j).iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            for g in [(cmax - c[j]) / (aa - aj), (cmax + c[j]) / (aa + aj)] {
                if g.is_finite() && g > 1e-12 * gamma.max(1e-300) && g < gamma {
                    gamma = g;
                    entering = Some(j);
                }
            }
        }
        for (ri, ui) in r.iter_mut().zip(u.iter()) {
            *ri -= gamma * ui;
        }
        next = entering;
    }
    active
}

/// One prefix of a hybrid-LAR path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    /// Number of terms including the intercept.
    pub terms: usize,
    /// Corrected relative leave-one-out error of the OLS refit.
    pub loo: f64,
}

/// Least-angle regression for the basis order, OLS refits of every prefix, and
/// the prefix with the smallest corrected leave-one-out error.
pub fn hybrid_lar(
    ed: &ExperimentalDesign,
    candidates: &[MultiIndex],
    families: &[PolyFamily],
) -> Result<(PceModel, Vec<PathStep>)> {
    let n = ed.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("hybrid LAR needs at least 3 points, got {n}")));
    }
    let m = ed.dim();
    let zero = MultiIndex::zero(m);
    let mut basis: Vec<MultiIndex> = vec![zero.clone()];
    basis.extend(candidates.iter().filter(|a| !a.is_zero()).cloned());
    let x = reference_points(families, ed)?;
    let a = design_matrix(families, &basis, x.view())?;
    let y = ed.responses();
    let regressors = a.slice(ndarray::s![.., 1..]);
    let order = lar_order(regressors, y, n.saturating_sub(2).min(basis.len() - 1));

    let fits = par::map_indexed(order.len() + 1, |k| {
        let mut cols = vec![0usize];
        cols.extend(order[..k].iter().map(|&j| j + 1));
        let sub = a.select(Axis(1), &cols);
        let indices = cols.iter().map(|&c| basis[c].clone()).collect();
        fit_columns(sub.view(), y, families, indices)
    });
    let mut best: Option<PceModel> = None;
    let mut path = Vec::with_capacity(fits.len());
    for fit in fits {
        let fit = fit?;
        path.push(PathStep { terms: fit.len(), loo: fit.loo.relative_corrected });
        if best.as_ref().is_none_or(|b| fit.loo.relative_corrected < b.loo.relative_corrected) {
            best = Some(fit);
        }
    }
    Ok((best.expect("intercept prefix always fitted"), path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceCell {
    pub degree: u32,
    pub q: f64,
    /// Size of the candidate set, when it could be enumerated.
    pub candidates: Option<usize>,
    /// Number of terms retained by hybrid LAR.
    pub terms: Option<usize>,
    pub loo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceSelection {
    pub degree: u32,
    pub q: f64,
    pub loo: f64,
    pub table: Vec<PceCell>,
}

/// Runs hybrid LAR on every (degree, q) pair and keeps the smallest corrected
/// leave-one-out error. Ties go to the smaller candidate set, then the smaller degree.
pub fn select_pce(
    ed: &ExperimentalDesign,
    families: &[PolyFamily],
    config: &PceConfig,
) -> Result<(PceModel, PceSelection)> {
    config.validate()?;
    let grid: Vec<(u32, f64)> =
        config.degrees.iter().flat_map(|&p| config.q_norms.iter().map(move |&q| (p, q))).collect();
    let results = par::map_indexed(grid.len(), |g| {
        let (pt, q) = grid[g];
        let cands = hyperbolic_index_set(ed.dim(), pt, q, config.max_basis_size)?;
        let (model, _) = hybrid_lar(ed, &cands, families)?;
        Ok::<_, Error>((cands.len(), model))
    });
    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize, u32, f64, PceModel)> = None;
    for ((pt, q), res) in grid.into_iter().zip(results) {
        match res {
            Ok((card, model)) => {
                let loo = model.loo.relative_corrected;
                table.push(PceCell {
                    degree: pt,
                    q,
                    candidates: Some(card),
                    terms: Some(model.len()),
                    loo: Some(loo),
                    failure: None,
                });
                let better = match &best {
                    None => true,
                    Some((bl, bc, bp, _, _)) => loo < *bl || (loo == *bl && (card, pt) < (*bc, *bp)),
                };
                if better {
                    best = Some((loo, card, pt, q, model));
                }
            }
            Err(e) => table.push(PceCell {
                degree: pt,
                q,
                candidates: None,
                terms: None,
                loo: None,
                failure: Some(e.to_string()),
            }),
        }
    }
    match best {
        Some((loo, _, degree, q, model)) => Ok((model, PceSelection { degree, q, loo, table })),
        None => Err(Error::AllCandidatesFailed(
            table
                .iter()
                .map(|c| format!("(p={}, q={}): {}", c.degree, c.q, c.failure.as_deref().unwrap_or("?")))
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}
