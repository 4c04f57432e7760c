use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uq_core::benchmodels::{Beam, EoleField, Grid};
use uq_core::design::ExperimentalDesign;
use uq_core::experiment::{run_experiment, ExperimentConfig, Summary};
use uq_core::lra::{build_lra, LraConfig, LraModel, RankOneTerm};
use uq_core::pce::{explicit_loo, hyperbolic_index_set, loo_error};
use uq_core::polybasis::PolyFamily;
use uq_core::probcore::{mcs_sample, normal, standard_sample, InputModel, Marginal};
use uq_core::reliability::{
    form, importance_sampling, mcs_exceedance_curve, mcs_pf, sorm, through_input_model, FormOptions, IsOptions,
    LimitState,
};

const BEAM_THRESHOLDS: [f64; 6] = [4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
const BEAM_PF: [f64; 6] = [6.60e-2, 1.19e-2, 2.00e-3, 3.37e-4, 5.86e-5, 1.07e-5];
const BEAM_BETA: [f64; 6] = [1.51, 2.26, 2.88, 3.40, 3.85, 4.25];

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self { ok, detail: detail.into() }
    }
}

fn criterion(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let c = f();
    let took = start.elapsed();
    let ok = c.ok && took <= budget;
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("{verdict} [{id}] {name} ({:.2} s, budget {} s): {}", took.as_secs_f64(), budget.as_secs(), c.detail);
    ok
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_bundled(name: &str, out: &Path, threads: Option<usize>) -> (Summary, Vec<u8>) {
    let mut cfg = ExperimentConfig::from_path(&repo().join(format!("configs/{name}.cfg"))).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg.threads = threads;
    let outcome = run_experiment(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
    (outcome.summary, std::fs::read(out.join("summary.json")).unwrap())
}

fn round_sig(x: f64, digits: i32) -> f64 {
    let e = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - e);
    (x * scale).round() / scale
}

fn beam_analytical() -> Check {
    let beam = Beam::new();
    let mut worst_beta: f64 = 0.0;
    let mut pf_ok = true;
    for ((&t, &pf), &b) in BEAM_THRESHOLDS.iter().zip(&BEAM_PF).zip(&BEAM_BETA) {
        let p = beam.analytical_pf(t);
        pf_ok &= (round_sig(p, 3) - pf).abs() <= 1e-9 * pf;
        worst_beta = worst_beta.max((normal::beta_from_pf(p) - b).abs());
    }
    Check::new(pf_ok && worst_beta <= 0.01, format!("pf to 3 digits: {pf_ok}, max |beta - reference| = {worst_beta:.4}"))
}

fn beam_mcs() -> Check {
    let beam = Beam::new();
    let f = through_input_model(beam.input_model(), Beam::deflection_unchecked);
    let n = 10_000_000u64;
    let r = mcs_exceedance_curve(&*f, 5, &BEAM_THRESHOLDS, n, 2024).unwrap();
    let mut worst: f64 = 0.0;
    for (t, r) in BEAM_THRESHOLDS.iter().zip(&r) {
        let p = beam.analytical_pf(*t);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        worst = worst.max((r.pf - p).abs() / sigma);
    }
    Check::new(worst <= 3.0, format!("max deviation {worst:.2} estimator-sigma at n = 1e7"))
}

fn beta_errors(s: &Summary, lra: bool) -> Vec<f64> {
    s.reliability
        .as_ref()
        .unwrap()
        .rows
        .iter()
        .map(|r| {
            let reference = r.reference.as_ref().and_then(|e| e.beta).unwrap();
            let e = if lra { &r.lra } else { &r.pce };
            e.beta.map_or(f64::INFINITY, |b| (b / reference - 1.0).abs())
        })
        .collect()
}

fn beam_lra_quality(s50: &Summary) -> Check {
    let gen = s50.lra.generalization_error.unwrap_or(f64::INFINITY);
    let worst = beta_errors(s50, true).into_iter().fold(0.0, f64::max);
    Check::new(
        s50.lra.rank == 1 && gen <= 1e-4 && worst <= 0.03,
        format!(
            "rank {} degree {}, generalization {gen:.3e}, max beta error {:.2}%",
            s50.lra.rank,
            s50.lra.degree,
            100.0 * worst
        ),
    )
}

fn lra_beats_pce(s30: &Summary, s50: &Summary) -> Check {
    let ratio = |s: &Summary| {
        s.pce.generalization_error.unwrap_or(f64::NAN) / s.lra.generalization_error.unwrap_or(f64::NAN)
    };
    let (r30, r50) = (ratio(s30), ratio(s50));
    Check::new(r30 >= 10.0 && r50 >= 10.0, format!("PCE/LRA generalization error: N=30 {r30:.1}x, N=50 {r50:.1}x"))
}

fn bookkeeping() -> Check {
    let (m, p, r) = (10usize, 3usize, 10usize);
    let full = (p as u64 + 1).pow(m as u32);
    let lra = LraModel::new(
        vec![PolyFamily::Hermite; m],
        vec![p; m],
        vec![1.0; r],
        (0..r).map(|_| RankOneTerm::unity(&vec![p; m])).collect(),
    )
    .unwrap();
    let card = hyperbolic_index_set(m, 3, 1.0, 10_000).unwrap().len();
    Check::new(
        full == 1_048_576 && lra.parameter_count() == 400 && card == 286,
        format!("(p+1)^M = {full}, LRA unknowns = {}, card = {card}", lra.parameter_count()),
    )
}

fn eole_modes() -> Check {
    let grid = Grid { nx: 11, ny: 11, spacing: 0.1, origin: [0.0, 0.0] };
    let field = EoleField::on_grid(grid, 0.2, 0.99).unwrap();
    Check::new(field.modes() == 53, format!("M = {}", field.modes()))
}

fn truss_reliability(s: &Summary) -> Check {
    let rel = s.reliability.as_ref().unwrap();
    let pfs: Vec<f64> = rel.rows.iter().filter_map(|r| r.reference.as_ref().and_then(|e| e.pf)).collect();
    let spans = pfs.len() == rel.rows.len() && pfs[0] >= 5e-3 && *pfs.last().unwrap() <= 2e-5;
    let worst = beta_errors(s, true).into_iter().fold(0.0, f64::max);
    let ordered = s.conditional_errors.iter().all(|c| matches!((c.lra, c.pce), (Some(l), Some(p)) if l < p));
    Check::new(
        spans && worst <= 0.05 && ordered,
        format!(
            "reference pf {:.2e}..{:.2e}, max LRA beta error {:.2}%, LRA conditional < PCE at all {} thresholds: {ordered}",
            pfs.first().copied().unwrap_or(f64::NAN),
            pfs.last().copied().unwrap_or(f64::NAN),
            100.0 * worst,
            s.conditional_errors.len()
        ),
    )
}

fn loo_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = Array2::from_shape_fn((20, 5), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
        let coef = uq_core::lsq::solve_ols(a.view(), &y, false).unwrap().coefficients;
        let closed = loo_error(a.view(), &y, &coef).unwrap().loo;
        let explicit = explicit_loo(a.view(), &y).unwrap();
        worst = worst.max((closed - explicit).abs() / explicit);
    }
    (worst <= 1e-9, format!("LOO rel. diff {worst:.1e}"))
}

fn form_sorm_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for &b in &[2.5, -1.2, 3.7] {
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ls = LimitState::standard(4, move |u: &[f64]| b - u.iter().zip(&a).map(|(x, c)| x * c).sum::<f64>() / norm, "affine");
        let r = form(&ls, &FormOptions::default()).unwrap();
        worst = worst.max((r.beta - b).abs());
    }
    let ls = LimitState::standard(2, |u: &[f64]| 3.0 - u[0] + 0.1 * u[1] * u[1], "quadratic");
    let f = form(&ls, &FormOptions::default()).unwrap();
    let s = sorm(&ls, &f).unwrap();
    let mc = mcs_pf(&ls, 10_000_000, 31).unwrap();
    let rel = (s.pf / mc.pf - 1.0).abs();
    (worst <= 1e-8 && rel <= 0.15, format!("FORM affine |beta - b| {worst:.1e}, SORM vs MCS {:.1}%", 100.0 * rel))
}

fn is_suite() -> (bool, String) {
    let ls = LimitState::standard(2, |u: &[f64]| 3.0 - u[0], "linear");
    let r = importance_sampling(&ls, &[3.0, 0.0], &IsOptions { seed: 4, ..IsOptions::default() }).unwrap();
    let exact = normal::cdf(-3.0);
    let sigma = r.pf * r.cov.unwrap();
    let dev = (r.pf - exact).abs() / sigma;
    (dev <= 3.0 && !r.target_missed, format!("IS {:.1} sigma from Phi(-3) with {} samples", dev, r.n_evals))
}

fn als_suite() -> (bool, String) {
    let mut violations = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
        let u = standard_sample(3, 40, seed + 100).unwrap();
        let y = u.rows().into_iter().map(|r| (c[0] * r[0]).exp() * (1.0 + c[1] * r[1] * r[2]) + c[2] * r[2]).collect();
        let ed = ExperimentalDesign::new(u, y).unwrap();
        let cfg = LraConfig { r_max: 5, min_error_decrease: 1e-300, max_sweeps: 15, ..LraConfig::default() };
        let path = build_lra(&ed, &[PolyFamily::Hermite; 3], &[2; 3], &cfg).unwrap();
        let tol = |w: &[f64]| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14;
        violations += path.empirical_errors.windows(2).filter(|w| !tol(w)).count();
        for corr in &path.corrections {
            violations += corr.error_history.windows(2).filter(|w| !tol(w)).count();
        }
    }
    (violations == 0, format!("ALS monotonicity violations {violations} over 20 seeds"))
}

fn quadrature_suite() -> (bool, String) {
    let rule = |n: usize, off: &dyn Fn(usize) -> f64| {
        let mut j = DMatrix::zeros(n, n);
        for k in 1..n {
            j[(k, k - 1)] = off(k);
            j[(k - 1, k)] = off(k);
        }
        let e = SymmetricEigen::new(j);
        (0..n).map(|i| (e.eigenvalues[i], e.eigenvectors[(0, i)].powi(2))).collect::<Vec<_>>()
    };
    let mut worst: f64 = 0.0;
    let hermite = rule(24, &|k| (k as f64).sqrt());
    let legendre = rule(24, &|k| k as f64 / (4.0 * (k * k) as f64 - 1.0).sqrt());
    for (family, nodes) in [(PolyFamily::Hermite, hermite), (PolyFamily::Legendre, legendre)] {
        let p = 10;
        let mut psi = vec![0.0; p + 1];
        let mut g = vec![0.0; (p + 1) * (p + 1)];
        for (x, w) in nodes {
            family.eval_all(x, &mut psi);
            for i in 0..=p {
                for j in 0..=p {
                    g[i * (p + 1) + j] += w * psi[i] * psi[j];
                }
            }
        }
        for i in 0..=p {
            for j in 0..=p {
                worst = worst.max((g[i * (p + 1) + j] - f64::from(u8::from(i == j))).abs());
            }
        }
    }
    let marginals = vec![
        Marginal::lognormal_from_moments(2.0, 0.3).unwrap(),
        Marginal::gumbel_from_moments(50.0, 7.5).unwrap(),
        Marginal::truncated_gaussian(0.5, 1.0).unwrap(),
    ];
    let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.1, 0.4, 1.0, -0.3, 0.1, -0.3, 1.0]);
    let im = InputModel::with_correlation(marginals, r).unwrap();
    let x = mcs_sample(&im, 5_000, 3).unwrap();
    let mut trip: f64 = 0.0;
    for row in x.rows() {
        let xr = row.as_slice().unwrap();
        let back = im.to_physical(&im.to_standard(xr).unwrap()).unwrap();
        for (a, b) in xr.iter().zip(&back) {
            trip = trip.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    (worst <= 1e-10 && trip <= 1e-9, format!("Gram defect {worst:.1e}, round trip {trip:.1e}"))
}

fn estimator_suites() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    let suites: [fn() -> (bool, String); 5] = [loo_suite, form_sorm_suite, is_suite, als_suite, quadrature_suite];
    for suite in suites {
        let start = Instant::now();
        let (pass, detail) = suite();
        let within = start.elapsed() <= Duration::from_secs(60);
        ok &= pass && within;
        parts.push(format!("{detail}{}", if within { "" } else { " (over 60 s)" }));
    }
    Check::new(ok, parts.join("; "))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);
    let mut all = true;

    all &= criterion(1, "beam analytical reproduction", Duration::from_secs(1), beam_analytical);
    all &= criterion(2, "beam MCS consistency", Duration::from_secs(60), beam_mcs);

    let mut s50 = None;
    all &= criterion(3, "beam LRA quality (N=50)", Duration::from_secs(120), || {
        let (s, _) = run_bundled("beam_n50", &out("beam_n50"), None);
        let c = beam_lra_quality(&s);
        s50 = Some(s);
        c
    });
    let s50 = s50.unwrap();

    let mut first30 = None;
    all &= criterion(4, "LRA beats PCE at small N (beam)", Duration::from_secs(120), || {
        let (s30, bytes) = run_bundled("beam_n30", &out("beam_n30_a"), None);
        let c = lra_beats_pce(&s30, &s50);
        first30 = Some(bytes);
        c
    });
    all &= criterion(5, "bookkeeping identities", Duration::from_secs(1), bookkeeping);
    all &= criterion(6, "EOLE mode count", Duration::from_secs(5), eole_modes);
    all &= criterion(7, "truss self-consistent reliability", Duration::from_secs(600), || {
        let (s, _) = run_bundled("truss_n100", &out("truss_n100"), None);
        truss_reliability(&s)
    });
    all &= criterion(8, "estimator property suites", Duration::from_secs(300), estimator_suites);
    all &= criterion(9, "determinism", Duration::from_secs(120), || {
        let (_, again) = run_bundled("beam_n30", &out("beam_n30_b"), Some(1));
        let same = first30.as_deref() == Some(again.as_slice());
        Check::new(same, format!("beam_n30 summary.json bit-identical on rerun with 1 thread: {same}"))
    });

    if !all {
        eprintln!("acceptance: some criteria failed");
        std::process::exit(1);
    }
}
