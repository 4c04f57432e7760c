use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{DesignMethod, ExperimentConfig, ModelSpec, ReferenceMethod, ReliabilitySpec};
use super::{ConditionalRow, CurveRow, LraSummary, PceSummary, PfEntry, ReliabilitySummary, Summary};
use crate::benchmodels::{Beam, EoleDemo, EoleField, Truss};
use crate::design::{ExperimentalDesign, Surrogate};
use crate::error::{Error, Result};
use crate::lra::select_lra;
use crate::metrics::{conditional_error_report, error_report, kde, kde_grid, ErrorReport};
use crate::par;
use crate::pce::select_pce;
use crate::probcore::{sobol_standard_design, standard_sample, InputModel};
use crate::reliability::{
    is_exceedance_curve, mcs_exceedance_curve, write_curve_csv, CurvePoint, FormOptions, IsOptions, Method,
    ReliabilityResult, StandardFn,
};

/// Pipeline stage at which a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Model,
    Design,
    Lra,
    Pce,
    Validation,
    Kde,
    Reliability,
    Output,
    Compare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub stage: Stage,
    pub error: Error,
}

impl RunError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.stage == Stage::Config {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} stage: {}", self.stage, self.error)
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: Summary,
    pub output_dir: PathBuf,
}

type StageResult<T> = std::result::Result<T, RunError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|error| RunError { stage, error })
    }
}

/// Independent seed for analysis sub-stream `stream`.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_CV: u64 = 1;
const STREAM_VALIDATION: u64 = 2;
const STREAM_SURROGATE_MCS: u64 = 3;
const STREAM_REFERENCE_MCS: u64 = 4;
const STREAM_IS: u64 = 5;

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> StageResult<()> {
        let mut buf = Vec::new();
        f(&mut buf).at(Stage::Output)?;
        let path = self.dir.join(name);
        fs::write(&path, buf).map_err(Error::from).at(Stage::Output)?;
        self.written.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> StageResult<()> {
        self.write(name, |b| {
            serde_json::to_writer_pretty(&mut *b, value)?;
            b.push(b'\n');
            Ok(())
        })
    }

    /// Renames everything written so far to `<stem>_partial.<ext>` and records the error.
    fn fail(&self, err: &RunError) {
        for p in &self.written {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let name = match p.extension() {
                Some(e) => format!("{stem}_partial.{}", e.to_string_lossy()),
                None => format!("{stem}_partial"),
            };
            let _ = fs::rename(p, p.with_file_name(name));
        }
        let body = json!({
            "stage": err.stage,
            "exit_code": err.exit_code(),
            "message": err.error.to_string(),
        });
        if let Ok(s) = serde_json::to_string_pretty(&body) {
            let _ = fs::write(self.dir.join("error.json"), s + "\n");
        }
    }
}

type PhysicalFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

struct Prepared {
    input: InputModel,
    response: Option<PhysicalFn>,
    beam: Option<Beam>,
    table: Option<(Array2<f64>, Vec<f64>)>,
}

impl Prepared {
    fn dim(&self) -> usize {
        self.input.dim()
    }

    fn standard_response(&self) -> Option<impl Fn(&[f64]) -> Result<f64> + Send + Sync + Clone> {
        let f = self.response.clone()?;
        let input = self.input.clone();
        Some(move |u: &[f64]| f(&input.to_physical(u)?))
    }
}

fn read_table(path: &Path, dim: usize) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(Error::DimensionMismatch(format!("row {}: {} columns, expected {}", i + 1, rec.len(), dim + 1)));
        }
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        x.extend_from_slice(&vals[..dim]);
        y.push(vals[dim]);
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, dim), x).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Ok((x, y))
}

fn prepare(cfg: &ExperimentConfig) -> StageResult<Prepared> {
    let prepared = match &cfg.model {
        ModelSpec::Beam => {
            let beam = Beam::new();
            let input = cfg.input.clone().unwrap_or_else(|| beam.input_model());
            Prepared { input, response: Some(Arc::new(Beam::deflection)), beam: Some(beam), table: None }
        }
        ModelSpec::Truss { layout } => {
            let truss = match layout {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
                    text.and_then(|t| Truss::from_json(&t)).at(Stage::Config)?
                }
                None => Truss::warren23(),
            };
            cfg.check_input_dim(truss.dim()).at(Stage::Config)?;
            let input = match &cfg.input {
                Some(im) => im.clone(),
                None => truss.default_input_model().at(Stage::Model)?,
            };
            Prepared {
                input,
                response: Some(Arc::new(move |x: &[f64]| truss.deflection(x))),
                beam: None,
                table: None,
            }
        }
        ModelSpec::EoleDemo { grid, correlation_length, variance_threshold } => {
            let field = EoleField::on_grid(*grid, *correlation_length, *variance_threshold).at(Stage::Model)?;
            let demo = EoleDemo::new(field);
            cfg.check_input_dim(demo.dim()).at(Stage::Config)?;
            let input = match &cfg.input {
                Some(im) => im.clone(),
                None => InputModel::standard_normal(demo.dim()).at(Stage::Model)?,
            };
            Prepared { input, response: Some(Arc::new(move |x: &[f64]| demo.response(x))), beam: None, table: None }
        }
        ModelSpec::ExternalTable { path } => {
            let input = cfg
                .input
                .clone()
                .ok_or_else(|| Error::InvalidParameter("external-table needs an [input] model".into()))
                .at(Stage::Config)?;
            let table = read_table(path, input.dim()).at(Stage::Config)?;
            Prepared { input, response: None, beam: None, table: Some(table) }
        }
    };
    Ok(prepared)
}

fn evaluate(f: &(impl Fn(&[f64]) -> Result<f64> + Sync), points: ArrayView2<f64>) -> Result<Vec<f64>> {
    par::map_indexed(points.nrows(), |i| f(points.row(i).as_slice().expect("standard layout"))).into_iter().collect()
}

fn write_ed_csv(buf: &mut Vec<u8>, input: &InputModel, ed: &ExperimentalDesign) -> Result<()> {
    let mut wr = csv::Writer::from_writer(buf);
    let m = ed.dim();
    wr.write_record((1..=m).map(|i| format!("x{i}")).chain(["y".to_string()]))?;
    for (u, y) in ed.points().rows().into_iter().zip(ed.responses()) {
        let x = input.to_physical(u.as_slice().expect("standard layout"))?;
        wr.write_record(x.iter().chain([y]).map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    Ok(())
}

fn write_kde_csv(buf: &mut Vec<u8>, grid: &[f64], density: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(buf);
    wr.write_record(["x", "density"])?;
    for (x, d) in grid.iter().zip(density) {
        wr.write_record([format!("{x:e}"), format!("{d:e}")])?;
    }
    wr.flush()?;
    Ok(())
}

fn pf_entry(r: &Result<ReliabilityResult>) -> PfEntry {
    match r {
        Ok(r) => PfEntry {
            pf: Some(r.pf),
            beta: r.beta.is_finite().then_some(r.beta),
            cov: r.cov,
            n_evals: Some(r.n_evals),
        },
        Err(_) => PfEntry { pf: None, beta: None, cov: None, n_evals: None },
    }
}

fn to_points(thresholds: &[f64], results: Vec<ReliabilityResult>) -> Vec<CurvePoint> {
    thresholds.iter().zip(results).map(|(&threshold, r)| CurvePoint { threshold, result: Ok(r) }).collect()
}

fn resolve_reference(spec: &ReliabilitySpec, model: &ModelSpec) -> ReferenceMethod {
    match (spec.reference, model) {
        (ReferenceMethod::Auto, ModelSpec::Beam) => ReferenceMethod::Analytical,
        (ReferenceMethod::Auto, ModelSpec::Truss { .. }) => ReferenceMethod::Is,
        (ReferenceMethod::Auto, ModelSpec::EoleDemo { .. }) => ReferenceMethod::Mcs,
        (ReferenceMethod::Auto, ModelSpec::ExternalTable { .. }) => ReferenceMethod::None,
        (r, _) => r,
    }
}

fn reference_label(r: ReferenceMethod) -> Option<String> {
    match r {
        ReferenceMethod::Analytical => Some("analytical".into()),
        ReferenceMethod::Mcs => Some("mcs".into()),
        ReferenceMethod::Is => Some("form-is".into()),
        ReferenceMethod::Auto | ReferenceMethod::None => None,
    }
}

/// Runs a full experiment and writes its artifacts to `cfg.output_dir`.
///
/// On failure every artifact already written gets a `_partial` suffix and an
/// `error.json` records the stage and message.
pub fn run_experiment(cfg: &ExperimentConfig) -> StageResult<RunOutcome> {
    cfg.validate().at(Stage::Config)?;
    fs::create_dir_all(&cfg.output_dir).map_err(Error::from).at(Stage::Output)?;
    let mut art = Artifacts { dir: cfg.output_dir.clone(), written: Vec::new() };
    let res = par::with_threads(cfg.threads, || run_stages(cfg, &mut art));
    match res {
        Ok(summary) => Ok(RunOutcome { summary, output_dir: cfg.output_dir.clone() }),
        Err(e) => {
            art.fail(&e);
            Err(e)
        }
    }
}

fn run_stages(cfg: &ExperimentConfig, art: &mut Artifacts) -> StageResult<Summary> {
    let model = prepare(cfg)?;
    let dim = model.dim();
    let families = vec![cfg.family(); dim];
    let analysis = cfg.seeds.analysis;
    let response = model.standard_response();

    let ed = match &model.table {
        Some((x, y)) => ExperimentalDesign::from_physical(&model.input, x.view(), y.clone()).at(Stage::Design)?,
        None => {
            let u = match cfg.design.method {
                DesignMethod::Sobol => sobol_standard_design(dim, cfg.design.size),
                DesignMethod::Mcs => standard_sample(dim, cfg.design.size, cfg.seeds.ed),
            }
            .at(Stage::Design)?;
            let f = response.as_ref().expect("non-table models have a response");
            let y = evaluate(f, u.view()).at(Stage::Design)?;
            ExperimentalDesign::new(u, y).at(Stage::Design)?
        }
    };
    art.write("ed.csv", |b| write_ed_csv(b, &model.input, &ed))?;

    let mut lra_cfg = cfg.lra.clone();
    lra_cfg.seed = derive_seed(analysis, STREAM_CV);
    let (lra, lra_sel) = select_lra(&ed, &families, &lra_cfg).at(Stage::Lra)?;
    let lra = lra.with_input_model(model.input.clone()).at(Stage::Lra)?;
    art.write("lra_model.json", |b| {
        b.extend_from_slice(lra.to_json()?.as_bytes());
        Ok(())
    })?;

    let (pce, pce_sel) = select_pce(&ed, &families, &cfg.pce).at(Stage::Pce)?;
    let pce = pce.with_input_model(model.input.clone()).at(Stage::Pce)?;
    art.write("pce_model.json", |b| {
        b.extend_from_slice(pce.to_json()?.as_bytes());
        Ok(())
    })?;
    let pce_empirical = error_report(&pce.predict_batch(ed.points()), ed.responses()).at(Stage::Pce)?.relative;

    let thresholds: Vec<f64> = cfg.reliability.as_ref().map(|r| r.thresholds.clone()).unwrap_or_default();
    let n_val = cfg.validation.size;
    let val_seed = derive_seed(analysis, STREAM_VALIDATION);
    let validation = match (&response, n_val) {
        (Some(f), n) if n > 0 => {
            let u = standard_sample(dim, n, val_seed).at(Stage::Validation)?;
            let y = evaluate(f, u.view()).at(Stage::Validation)?;
            Some((u, y))
        }
        _ => None,
    };

    let mut lra_gen: Option<ErrorReport> = None;
    let mut pce_gen: Option<ErrorReport> = None;
    let mut conditional = Vec::new();
    let mut lra_cond = Vec::new();
    let mut pce_cond = Vec::new();
    let surrogate_sample = match &validation {
        Some((u, y)) => {
            let pl = lra.predict_batch(u.view());
            let pp = pce.predict_batch(u.view());
            lra_gen = Some(error_report(&pl, y).at(Stage::Validation)?);
            pce_gen = Some(error_report(&pp, y).at(Stage::Validation)?);
            for &t in &thresholds {
                let cl = conditional_error_report(&pl, y, t).ok();
                let cp = conditional_error_report(&pp, y, t).ok();
                conditional.push(ConditionalRow {
                    threshold: t,
                    points: y.iter().filter(|&&v| v >= t).count(),
                    lra: cl.as_ref().and_then(|r| r.relative),
                    pce: cp.as_ref().and_then(|r| r.relative),
                });
                lra_cond.push(json!({ "threshold": t, "report": cl }));
                pce_cond.push(json!({ "threshold": t, "report": cp }));
            }
            (Some(y.clone()), pl, pp)
        }
        None => {
            let n = if n_val > 0 { n_val } else { 10_000 };
            let u = standard_sample(dim, n, val_seed).at(Stage::Kde)?;
            (None, lra.predict_batch(u.view()), pce.predict_batch(u.view()))
        }
    };
    let errors = json!({
        "lra": {
            "empirical": lra_sel.empirical_error,
            "cv": lra_sel.cv_error,
            "cv_table": lra_sel.table,
            "absolute_fallback": lra_sel.absolute_fallback,
            "generalization": lra_gen,
            "conditional": lra_cond,
        },
        "pce": {
            "empirical": pce_empirical,
            "loo": pce.loo,
            "selection_table": pce_sel.table,
            "generalization": pce_gen,
            "conditional": pce_cond,
        },
    });
    art.write_json("errors.json", &errors)?;

    let (y_model, y_lra, y_pce) = &surrogate_sample;
    let grid_source = y_model.as_ref().unwrap_or(y_lra);
    let grid = kde_grid(grid_source, cfg.kde.points, 3.0).at(Stage::Kde)?;
    if let Some(y) = y_model {
        let d = kde(y, &grid).at(Stage::Kde)?;
        art.write("kde_model.csv", |b| write_kde_csv(b, &grid, &d))?;
    }
    let d = kde(y_lra, &grid).at(Stage::Kde)?;
    art.write("kde_lra.csv", |b| write_kde_csv(b, &grid, &d))?;
    let d = kde(y_pce, &grid).at(Stage::Kde)?;
    art.write("kde_pce.csv", |b| write_kde_csv(b, &grid, &d))?;

    let reliability = match &cfg.reliability {
        None => None,
        Some(spec) => Some(reliability_stage(cfg, spec, &model, &lra, &pce, art)?),
    };

    let summary = Summary {
        name: cfg.name.clone().unwrap_or_else(|| cfg.model.name().to_string()),
        model: cfg.model.name().to_string(),
        dim,
        polynomials: cfg.family(),
        seeds: cfg.seeds,
        design: cfg.design.clone(),
        lra: LraSummary {
            rank: lra_sel.rank,
            degree: lra_sel.degree,
            cv_error: lra_sel.cv_error,
            empirical_error: lra_sel.empirical_error,
            generalization_error: lra_gen.and_then(|r| r.relative),
            absolute_fallback: lra_sel.absolute_fallback,
        },
        pce: PceSummary {
            degree: pce_sel.degree,
            q: pce_sel.q,
            terms: pce.len(),
            loo: pce_sel.loo,
            empirical_error: pce_empirical,
            generalization_error: pce_gen.and_then(|r| r.relative),
        },
        conditional_errors: conditional,
        reliability,
    };
    art.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn reliability_stage(
    cfg: &ExperimentConfig,
    spec: &ReliabilitySpec,
    model: &Prepared,
    lra: &crate::lra::LraModel,
    pce: &crate::pce::PceModel,
    art: &mut Artifacts,
) -> StageResult<ReliabilitySummary> {
    let dim = model.dim();
    let ts = &spec.thresholds;
    let seed = derive_seed(cfg.seeds.analysis, STREAM_SURROGATE_MCS);
    let lra_curve = to_points(
        ts,
        mcs_exceedance_curve(&|u| lra.predict_standard(u), dim, ts, spec.mcs_samples, seed).at(Stage::Reliability)?,
    );
    let pce_curve = to_points(
        ts,
        mcs_exceedance_curve(&|u| pce.predict_standard(u), dim, ts, spec.mcs_samples, seed).at(Stage::Reliability)?,
    );
    art.write("pf_curve_lra.csv", |b| write_curve_csv(&lra_curve, b))?;
    art.write("pf_curve_pce.csv", |b| write_curve_csv(&pce_curve, b))?;

    let method = resolve_reference(spec, &cfg.model);
    let reference: Option<Vec<CurvePoint>> = match method {
        ReferenceMethod::Analytical => {
            let beam = model
                .beam
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("analytical reference needs the beam model".into()))
                .at(Stage::Config)?;
            Some(ts.iter().map(|&t| CurvePoint { threshold: t, result: Ok(ReliabilityResult::from_pf(beam.analytical_pf(t), Method::Analytical)) }).collect())
        }
        ReferenceMethod::Mcs => {
            let f = model.standard_response().expect("checked by validate");
            let g = move |u: &[f64]| f(u).unwrap_or(f64::NAN);
            let s = derive_seed(cfg.seeds.analysis, STREAM_REFERENCE_MCS);
            Some(to_points(ts, mcs_exceedance_curve(&g, dim, ts, spec.reference_samples, s).at(Stage::Reliability)?))
        }
        ReferenceMethod::Is => {
            let f = model.standard_response().expect("checked by validate");
            let g: StandardFn = Arc::new(move |u: &[f64]| f(u).unwrap_or(f64::NAN));
            let opts = IsOptions {
                batch: spec.is_batch,
                target_cov: spec.target_cov,
                max_batches: spec.max_batches,
                seed: derive_seed(cfg.seeds.analysis, STREAM_IS),
            };
            Some(is_exceedance_curve(g, dim, ts, &FormOptions::default(), &opts).at(Stage::Reliability)?)
        }
        ReferenceMethod::Auto | ReferenceMethod::None => None,
    };
    if let Some(r) = &reference {
        art.write("pf_curve_reference.csv", |b| write_curve_csv(r, b))?;
    }
    let rows = ts
        .iter()
        .enumerate()
        .map(|(i, &threshold)| CurveRow {
            threshold,
            reference: reference.as_ref().map(|r| pf_entry(&r[i].result)),
            lra: pf_entry(&lra_curve[i].result),
            pce: pf_entry(&pce_curve[i].result),
        })
        .collect();
    Ok(ReliabilitySummary { reference_method: reference_label(method), mcs_samples: spec.mcs_samples, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam_config(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_toml(
            r#"
            model = { kind = "beam" }
            design = { method = "sobol", size = 30 }
            seeds = { ed = 1, analysis = 2 }
            validation = { size = 2000 }
            kde = { points = 32 }
            [lra]
            r_max = 3
            [pce]
            degrees = [1, 2, 3]
            [reliability]
            thresholds = [3.0, 4.0]
            mcs_samples = 20000
            "#,
        )
        .unwrap();
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (1..=5).map(|k| derive_seed(42, k)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 5);
        assert_eq!(derive_seed(42, 3), s[2]);
    }

    #[test]
    fn beam_run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&beam_config(dir.path())).unwrap();
        for f in [
            "ed.csv",
            "lra_model.json",
            "pce_model.json",
            "errors.json",
            "kde_model.csv",
            "kde_lra.csv",
            "kde_pce.csv",
            "pf_curve_lra.csv",
            "pf_curve_pce.csv",
            "pf_curve_reference.csv",
            "summary.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let s = out.summary;
        assert_eq!(s.dim, 5);
        assert!(s.lra.generalization_error.unwrap() < 1e-3);
        let rel = s.reliability.unwrap();
        assert_eq!(rel.reference_method.as_deref(), Some("analytical"));
        let back: Summary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back.lra, s.lra);
        let lines = fs::read_to_string(dir.path().join("ed.csv")).unwrap().lines().count();
        assert_eq!(lines, 31);
    }

    #[test]
    fn failure_renames_partials() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = beam_config(dir.path());
        c.pce.max_basis_size = 1;
        let err = run_experiment(&c).unwrap_err();
        assert_eq!(err.stage, Stage::Pce);
        assert_eq!(err.exit_code(), 1);
        assert!(dir.path().join("ed_partial.csv").exists());
        assert!(dir.path().join("lra_model_partial.json").exists());
        assert!(!dir.path().join("summary.json").exists());
        let e: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
        assert_eq!(e["stage"], "pce");
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = beam_config(dir.path());
        c.design.size = 2;
        let err = run_experiment(&c).unwrap_err();
        assert_eq!((err.stage, err.exit_code()), (Stage::Config, 2));
    }

    #[test]
    fn runs_are_reproducible_across_thread_counts() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut ca = beam_config(a.path());
        ca.threads = Some(1);
        let mut cb = beam_config(b.path());
        cb.threads = Some(3);
        let sa = run_experiment(&ca).unwrap().summary;
        let sb = run_experiment(&cb).unwrap().summary;
        assert_eq!(sa, sb);
        let read = |d: &Path| fs::read(d.join("lra_model.json")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn table_model_trains_without_reference() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut s = String::from("x1,x2,y\n");
        let u = sobol_standard_design(2, 40).unwrap();
        for r in u.rows() {
            s += &format!("{},{},{}\n", r[0], r[1], r[0] * r[1] + r[0]);
        }
        fs::write(&path, s).unwrap();
        let mut c = ExperimentConfig::from_toml(&format!(
            r#"
            model = {{ kind = "external-table", path = "{}" }}
            design = {{ method = "sobol", size = 40 }}
            seeds = {{ ed = 1, analysis = 2 }}
            [input]
            marginals = [{{ kind = "gaussian", mean = 0.0, std = 1.0 }}, {{ kind = "gaussian", mean = 0.0, std = 1.0 }}]
            [reliability]
            thresholds = [1.0]
            mcs_samples = 1000
            "#,
            path.display()
        ))
        .unwrap();
        c.output_dir = dir.path().join("out");
        let out = run_experiment(&c).unwrap();
        assert!(out.summary.lra.empirical_error < 1e-10);
        let rel = out.summary.reliability.unwrap();
        assert!(rel.reference_method.is_none() && rel.rows[0].reference.is_none());
        assert!(!c.output_dir.join("kde_model.csv").exists());
    }
}
