//! Canonical low-rank approximations built greedily by alternated least squares.
//!
//! A rank-`R` model is `Σ_l b_l Π_i v_l^(i)(u_i)` where each univariate factor
//! `v_l^(i) = Σ_k z_{k,l}^(i) P_k^(i)` is expanded on an orthonormal family.
//! Ranks are added one at a time: a correction step fits a new rank-one term
//! to the current residual (one dimension at a time, others frozen), then an
//! updating step refits all weights `b` against the model responses.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::design::{ExperimentalDesign, Surrogate};
use crate::error::{Error, Result};
use crate::lsq::solve_ols;
use crate::metrics::{kfold_cv, FoldPredictions};
use crate::par;
use crate::polybasis::{PolyFamily, MAX_DEGREE};
use crate::probcore::InputModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LraConfig {
    /// Largest candidate rank.
    pub r_max: usize,
    /// Candidate common polynomial degrees.
    pub degrees: Vec<usize>,
    /// Maximum ALS sweeps per correction step.
    pub max_sweeps: usize,
    /// Exit a correction step once the relative empirical error decreases
    /// by less than this between sweeps.
    pub min_error_decrease: f64,
    pub cv_folds: usize,
    /// Seed of the fold shuffle.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for LraConfig {
    fn default() -> Self {
        Self {
            r_max: 10,
            degrees: vec![1, 2, 3],
            max_sweeps: 50,
            min_error_decrease: 1e-6,
            cv_folds: 3,
            seed: 0,
        }
    }
}

impl LraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_max == 0 || self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("r_max and max_sweeps must be >= 1".into()));
        }
        if !(self.min_error_decrease > 0.0) {
            return Err(Error::InvalidParameter("min_error_decrease must be > 0".into()));
        }
        if self.degrees.is_empty() || self.degrees.iter().any(|&p| p > MAX_DEGREE) {
            return Err(Error::InvalidParameter(format!(
                "degree grid must be nonempty with degrees <= {MAX_DEGREE}"
            )));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter("cv_folds must be >= 2".into()));
        }
        Ok(())
    }
}

/// Coefficients `z^(i)` of one rank-one term, one vector per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankOneTerm {
    pub z: Vec<Vec<f64>>,
}

impl RankOneTerm {
    /// The unit term: every factor is the constant polynomial 1.
    pub fn unity(degrees: &[usize]) -> Self {
        Self {
            z: degrees
                .iter()
                .map(|&p| {
                    let mut z = vec![0.0; p + 1];
                    z[0] = 1.0;
                    z
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxSweeps,
    Stalled,
}

/// Result of one correction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub term: RankOneTerm,
    pub sweeps: usize,
    /// Relative empirical error of the term against the residual after the last sweep.
    pub error: f64,
    pub reason: StopReason,
    /// Relative error before the first sweep, then after each sweep.
    pub error_history: Vec<f64>,
}

/// Canonical low-rank surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LraModel {
    pub families: Vec<PolyFamily>,
    pub degrees: Vec<usize>,
    /// Weights `b_l`.
    pub weights: Vec<f64>,
    pub terms: Vec<RankOneTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_model: Option<InputModel>,
}

impl LraModel {
    pub fn new(
        families: Vec<PolyFamily>,
        degrees: Vec<usize>,
        weights: Vec<f64>,
        terms: Vec<RankOneTerm>,
    ) -> Result<Self> {
        let m = families.len();
        if m == 0 || degrees.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} families and {} degrees",
                degrees.len()
            )));
        }
        if terms.is_empty() || weights.len() != terms.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} terms",
                weights.len(),
                terms.len()
            )));
        }
        for t in &terms {
            if t.z.len() != m || t.z.iter().zip(&degrees).any(|(z, &p)| z.len() != p + 1) {
                return Err(Error::DimensionMismatch("term coefficients do not match degrees".into()));
            }
        }
        if degrees.iter().any(|&p| p > MAX_DEGREE) {
            return Err(Error::InvalidParameter(format!("degree above {MAX_DEGREE}")));
        }
        if weights.iter().chain(terms.iter().flat_map(|t| t.z.iter().flatten())).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LRA coefficients".into()));
        }
        Ok(Self { families, degrees, weights, terms, input_model: None })
    }

    pub fn with_input_model(mut self, model: InputModel) -> Result<Self> {
        if model.dim() != self.families.len() {
            return Err(Error::DimensionMismatch("input model dimension".into()));
        }
        self.input_model = Some(model);
        Ok(self)
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    /// Number of unknowns ignoring the redundant weights, `R Σ (p_i + 1)`.
    pub fn parameter_count(&self) -> usize {
        self.rank() * self.degrees.iter().map(|p| p + 1).sum::<usize>()
    }

    /// Prediction at a physical point (requires an attached input model).
    pub fn predict_physical(&self, x: &[f64]) -> Result<f64> {
        let model = self
            .input_model
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("no input model attached".into()))?;
        let u = model.to_standard(x)?;
        Ok(self.predict_standard(&u))
    }

    /// Prediction at a standard-space point, checking the dimension.
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

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        let input = m.input_model.clone();
        let mut checked = Self::new(m.families, m.degrees, m.weights, m.terms)?;
        if let Some(im) = input {
            checked = checked.with_input_model(im)?;
        }
        Ok(checked)
    }
}

impl Surrogate for LraModel {
    fn dim(&self) -> usize {
        self.families.len()
    }

    fn predict_standard(&self, u: &[f64]) -> f64 {
        let mut factors = vec![1.0; self.terms.len()];
        let mut psi = [0.0; MAX_DEGREE + 1];
        for (i, (&fam, &p)) in self.families.iter().zip(&self.degrees).enumerate() {
            let psi = &mut psi[..=p];
            fam.eval_all(fam.reference_from_standard(u[i]), psi);
            for (f, t) in factors.iter_mut().zip(&self.terms) {
                *f *= t.z[i].iter().zip(psi.iter()).map(|(z, v)| z * v).sum::<f64>();
            }
        }
        factors.iter().zip(&self.weights).map(|(f, b)| f * b).sum()
    }
}

/// Univariate basis values at the design points, one table per dimension.
struct Tables {
    tables: Vec<Array2<f64>>,
    n: usize,
}

impl Tables {
    fn new(families: &[PolyFamily], degrees: &[usize], points: ArrayView2<f64>) -> Result<Self> {
        if families.len() != points.ncols() || degrees.len() != points.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} families / {} degrees for {}-dimensional points",
                families.len(),
                degrees.len(),
                points.ncols()
            )));
        }
        let reference = Array2::from_shape_fn(points.raw_dim(), |(r, i)| {
            families[i].reference_from_standard(points[[r, i]])
        });
        let tables = crate::polybasis::univariate_tables(families, degrees, reference.view())?;
        Ok(Self { tables, n: points.nrows() })
    }

    fn factor_values(&self, dim: usize, z: &[f64]) -> Vec<f64> {
        let t = &self.tables[dim];
        (0..self.n).map(|r| t.row(r).iter().zip(z).map(|(a, b)| a * b).sum()).collect()
    }

    fn term_values(&self, term: &RankOneTerm) -> Vec<f64> {
        let mut w = vec![1.0; self.n];
        for (i, z) in term.z.iter().enumerate() {
            for (wv, f) in w.iter_mut().zip(self.factor_values(i, z)) {
                *wv *= f;
            }
        }
        w
    }

    fn correction(
        &self,
        residual: &[f64],
        degrees: &[usize],
        normalizer: f64,
        max_sweeps: usize,
        min_decrease: f64,
    ) -> Result<Correction> {
        let m = self.tables.len();
        let n = self.n;
        let mut term = RankOneTerm::unity(degrees);
        let mut factors: Vec<Vec<f64>> = (0..m).map(|_| vec![1.0; n]).collect();
        let rel_error = |factors: &[Vec<f64>]| {
            (0..n)
                .map(|r| {
                    let w: f64 = factors.iter().map(|f| f[r]).product();
                    (residual[r] - w).powi(2)
                })
                .sum::<f64>()
                / n as f64
                / normalizer
        };
        let mut history = vec![rel_error(&factors)];
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            for j in 0..m {
                let frozen: Vec<f64> = (0..n)
                    .map(|r| (0..m).filter(|&i| i != j).map(|i| factors[i][r]).product())
                    .collect();
                let t = &self.tables[j];
                let a = Array2::from_shape_fn(t.raw_dim(), |(r, k)| frozen[r] * t[[r, k]]);
                let sol = solve_ols(a.view(), residual, false)?;
                factors[j] = self.factor_values(j, &sol.coefficients);
                term.z[j] = sol.coefficients;
            }
            let err = rel_error(&factors);
            let decrease = (history.last().copied().unwrap_or(f64::INFINITY) - err).abs();
            history.push(err);
            let reason = if decrease <= min_decrease {
                Some(StopReason::Stalled)
            } else if sweeps >= max_sweeps {
                Some(StopReason::MaxSweeps)
            } else {
                None
            };
            if let Some(reason) = reason {
                return Ok(Correction { term, sweeps, error: err, reason, error_history: history });
            }
        }
    }
}

fn common_degrees(dim: usize, degree: usize) -> Vec<usize> {
    vec![degree; dim]
}

/// One correction step: the rank-one term best fitting `residual` on the design,
/// with errors normalized by the design's response variance.
pub fn correction_step(
    ed: &ExperimentalDesign,
    residual: &[f64],
    families: &[PolyFamily],
    degrees: &[usize],
    config: &LraConfig,
) -> Result<Correction> {
    if residual.len() != ed.len() {
        return Err(Error::DimensionMismatch("residual length vs design size".into()));
    }
    let var = ed.response_variance();
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let tables = Tables::new(families, degrees, ed.points())?;
    tables.correction(residual, degrees, var, config.max_sweeps, config.min_error_decrease)
}

/// Updating step: least-squares weights of the current terms against the responses.
pub fn updating_step(responses: &[f64], term_values: ArrayView2<f64>) -> Result<Vec<f64>> {
    if term_values.ncols() == 0 {
        return Err(Error::InvalidParameter("updating step needs at least one term".into()));
    }
    Ok(solve_ols(term_values, responses, false)?.coefficients)
}

/// Models of rank 1..=r_max produced by the greedy construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LraPath {
    pub models: Vec<LraModel>,
    /// Relative empirical error of each rank's model on the design.
    pub empirical_errors: Vec<f64>,
    pub corrections: Vec<Correction>,
}

/// Greedy construction of ranks `1..=config.r_max` with fixed per-dimension degrees.
pub fn build_lra(
    ed: &ExperimentalDesign,
    families: &[PolyFamily],
    degrees: &[usize],
    config: &LraConfig,
) -> Result<LraPath> {
    let var = ed.response_variance();
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    build_scaled(ed, families, degrees, config, var)
}

/// As [`build_lra`] but with an explicit error normalizer (1 gives absolute errors).
fn build_scaled(
    ed: &ExperimentalDesign,
    families: &[PolyFamily],
    degrees: &[usize],
    config: &LraConfig,
    normalizer: f64,
) -> Result<LraPath> {
    if config.r_max == 0 || config.max_sweeps == 0 {
        return Err(Error::InvalidParameter("r_max and max_sweeps must be >= 1".into()));
    }
    let tables = Tables::new(families, degrees, ed.points())?;
    let y = ed.responses();
    let n = ed.len();
    let mut residual = y.to_vec();
    let mut terms: Vec<RankOneTerm> = Vec::new();
    let mut term_values = Array2::<f64>::zeros((n, 0));
    let mut path = LraPath { models: vec![], empirical_errors: vec![], corrections: vec![] };
    for _ in 0..config.r_max {
        let corr = tables.correction(
            &residual,
            degrees,
            normalizer,
            config.max_sweeps,
            config.min_error_decrease,
        )?;
        let w = tables.term_values(&corr.term);
        term_values.push_column(ndarray::ArrayView1::from(&w)).expect("column length");
        terms.push(corr.term.clone());
        let b = updating_step(y, term_values.view())?;
        let fitted = term_values.dot(&ndarray::ArrayView1::from(&b));
        for (r, (yi, fi)) in residual.iter_mut().zip(y.iter().zip(fitted.iter())) {
            *r = yi - fi;
        }
        let err = residual.iter().map(|r| r * r).sum::<f64>() / n as f64 / normalizer;
        path.models.push(LraModel::new(families.to_vec(), degrees.to_vec(), b, terms.clone())?);
        path.empirical_errors.push(err);
        path.corrections.push(corr);
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LraCvCell {
    pub degree: usize,
    pub rank: usize,
    /// Mean held-out relative error; `None` if training failed.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LraSelection {
    pub rank: usize,
    pub degree: usize,
    pub cv_error: f64,
    /// Relative empirical error of the retrained model.
    pub empirical_error: f64,
    pub table: Vec<LraCvCell>,
    /// Some fold had zero response variance, so absolute errors were used there.
    pub absolute_fallback: bool,
}

/// Picks rank and common degree by k-fold cross-validation and retrains the
/// winner on the full design. Ties go to the smaller degree, then the smaller rank.
pub fn select_lra(
    ed: &ExperimentalDesign,
    families: &[PolyFamily],
    config: &LraConfig,
) -> Result<(LraModel, LraSelection)> {
    config.validate()?;
    if ed.len() < 2 * config.cv_folds {
        return Err(Error::InvalidParameter(format!(
            "{}-fold selection needs at least {} points, got {}",
            config.cv_folds,
            2 * config.cv_folds,
            ed.len()
        )));
    }
    if families.len() != ed.dim() {
        return Err(Error::DimensionMismatch("families vs design dimension".into()));
    }
    let per_degree = par::map_indexed(config.degrees.len(), |d| {
        let degrees = common_degrees(ed.dim(), config.degrees[d]);
        kfold_cv(ed, config.cv_folds, config.seed, config.r_max, |train, test| {
            let var = train.response_variance();
            let norm = if var > 0.0 { var } else { 1.0 };
            let path = build_scaled(train, families, &degrees, config, norm)?;
            let preds: FoldPredictions =
                path.models.iter().map(|m| Some(m.predict_batch(test))).collect();
            Ok(preds)
        })
    });
    let mut table = Vec::new();
    let mut absolute_fallback = false;
    let mut best: Option<(f64, usize, usize)> = None;
    for (d, res) in per_degree.into_iter().enumerate() {
        let cv = res?;
        absolute_fallback |= cv.absolute_fallback;
        let degree = config.degrees[d];
        for (r, err) in cv.errors.into_iter().enumerate() {
            table.push(LraCvCell { degree, rank: r + 1, error: err });
            if let Some(e) = err {
                let better = match best {
                    None => true,
                    Some((be, bd, br)) => e < be || (e == be && (degree, r + 1) < (bd, br)),
                };
                if better {
                    best = Some((e, degree, r + 1));
                }
            }
        }
    }
    let (cv_error, degree, rank) = best.ok_or_else(|| {
        Error::AllCandidatesFailed("no (rank, degree) pair could be trained".into())
    })?;
    let var = ed.response_variance();
    let norm = if var > 0.0 { var } else { 1.0 };
    absolute_fallback |= var <= 0.0;
    let cfg = LraConfig { r_max: rank, ..config.clone() };
    let mut path = build_scaled(ed, families, &common_degrees(ed.dim(), degree), &cfg, norm)?;
    let model = path.models.pop().expect("rank >= 1");
    let empirical_error = path.empirical_errors.pop().expect("rank >= 1");
    Ok((
        model,
        LraSelection { rank, degree, cv_error, empirical_error, table, absolute_fallback },
    ))
}
