//! Error estimators, k-fold cross-validation and kernel density estimation.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{ExperimentalDesign, Surrogate};
use crate::error::{Error, Result};
use crate::par;
use crate::probcore::normal;

/// Discrete L2 semi-norm of `a − b`.
pub fn semi_norm(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "semi-norm of vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / a.len() as f64).sqrt())
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased (`1/(n−1)`) sample variance; zero for fewer than two values.
pub fn empirical_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Mean squared difference.
    pub absolute: f64,
    /// `absolute` over the empirical variance of the reference values;
    /// `None` when that variance is zero or undefined.
    pub relative: Option<f64>,
    pub n_points: usize,
    /// Response threshold defining the subset, for conditional errors.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    /// Mean of `prediction − reference`.
    pub mean_signed_residual: f64,
}

/// Absolute and relative mean-square error of `predicted` against `reference`.
pub fn error_report(predicted: &[f64], reference: &[f64]) -> Result<ErrorReport> {
    let absolute = semi_norm(predicted, reference)?.powi(2);
    let var = empirical_variance(reference);
    let bias = predicted.iter().zip(reference).map(|(p, r)| p - r).sum::<f64>() / reference.len() as f64;
    Ok(ErrorReport {
        absolute,
        relative: (var > 0.0).then(|| absolute / var),
        n_points: reference.len(),
        threshold: None,
        mean_signed_residual: bias,
    })
}

/// Generalization error of `metamodel` on a validation set in standard space.
pub fn generalization_error(
    metamodel: &dyn Surrogate,
    model_values: &[f64],
    validation_points: ArrayView2<f64>,
) -> Result<ErrorReport> {
    if validation_points.nrows() != model_values.len() {
        return Err(Error::DimensionMismatch("validation points vs values".into()));
    }
    if model_values.len() < 2 {
        return Err(Error::InvalidParameter("validation set needs at least 2 points".into()));
    }
    error_report(&metamodel.predict_batch(validation_points), model_values)
}

/// Error restricted to validation points whose model response is `>= threshold`,
/// from precomputed predictions.
pub fn conditional_error_report(predicted: &[f64], reference: &[f64], threshold: f64) -> Result<ErrorReport> {
    let (p, r): (Vec<f64>, Vec<f64>) = predicted
        .iter()
        .zip(reference)
        .filter(|(_, &r)| r >= threshold)
        .map(|(&p, &r)| (p, r))
        .unzip();
    if r.is_empty() {
        return Err(Error::NoExceedances(threshold));
    }
    let mut rep = error_report(&p, &r)?;
    rep.threshold = Some(threshold);
    Ok(rep)
}

pub fn conditional_generalization_error(
    metamodel: &dyn Surrogate,
    model_values: &[f64],
    validation_points: ArrayView2<f64>,
    threshold: f64,
) -> Result<ErrorReport> {
    if validation_points.nrows() != model_values.len() {
        return Err(Error::DimensionMismatch("validation points vs values".into()));
    }
    conditional_error_report(&metamodel.predict_batch(validation_points), model_values, threshold)
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds of near-equal size.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::InvalidParameter(format!("{k}-fold partition of {n} points")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean held-out error per candidate; `None` marks a failed candidate.
    pub errors: Vec<Option<f64>>,
    /// True if some held-out fold had zero response variance, so absolute
    /// errors were averaged for that fold.
    pub absolute_fallback: bool,
}

/// Output of a k-fold trainer: per candidate, predictions at the held-out
/// points (`None` when that candidate could not be trained).
pub type FoldPredictions = Vec<Option<Vec<f64>>>;

/// k-fold cross-validation over `n_candidates` models produced by `trainer`.
///
/// `trainer(train, test_points)` returns, per candidate, predictions at the
/// held-out points. A trainer error fails every candidate of that fold.
pub fn kfold_cv<F>(
    ed: &ExperimentalDesign,
    k: usize,
    seed: u64,
    n_candidates: usize,
    trainer: F,
) -> Result<CvResult>
where
    F: Fn(&ExperimentalDesign, ArrayView2<f64>) -> Result<FoldPredictions> + Sync + Send,
{
    let folds = kfold_partition(ed.len(), k, seed)?;
    let per_fold = par::map_indexed(k, |f| {
        let train_rows: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let train = ed.subset(&train_rows);
        let test = ed.subset(&folds[f]);
        let var = empirical_variance(test.responses());
        let preds = trainer(&train, test.points()).ok();
        let errs: Vec<Option<f64>> = (0..n_candidates)
            .map(|c| {
                let p = preds.as_ref()?.get(c)?.as_ref()?;
                let mse = semi_norm(p, test.responses()).ok()?.powi(2);
                if !mse.is_finite() {
                    return None;
                }
                Some(if var > 0.0 { mse / var } else { mse })
            })
            .collect();
        (errs, var <= 0.0)
    });
    let absolute_fallback = per_fold.iter().any(|(_, z)| *z);
    let errors = (0..n_candidates)
        .map(|c| {
            let mut s = 0.0;
            for (errs, _) in &per_fold {
                s += errs[c]?;
            }
            Some(s / k as f64)
        })
        .collect();
    Ok(CvResult { errors, absolute_fallback })
}

/// Silverman's rule, `0.9 min(σ̂, IQR/1.34) n^(−1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("KDE needs at least 2 samples".into()));
    }
    let sd = empirical_variance(samples).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::InvalidParameter("KDE samples have zero spread".into()));
    }
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Gaussian kernel density estimate at each point of `grid`.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (sorted.len() as f64 * h);
    // contributions beyond 9h are below 1e-17 of the peak
    let reach = 9.0 * h;
    Ok(par::map_indexed(grid.len(), |g| {
        let x = grid[g];
        let lo = sorted.partition_point(|&s| s < x - reach);
        let hi = sorted.partition_point(|&s| s <= x + reach);
        sorted[lo..hi].iter().map(|&s| normal::pdf((x - s) / h)).sum::<f64>() * norm
    }))
}

/// Evenly spaced grid spanning the sample range widened by `pad_bandwidths`·h.
pub fn kde_grid(samples: &[f64], points: usize, pad_bandwidths: f64) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - pad_bandwidths * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad_bandwidths * h;
    let n = points.max(2);
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}
