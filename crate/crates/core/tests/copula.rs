use nalgebra::DMatrix;
use uq_core::probcore::{mcs_sample, InputModel, Marginal};

fn ks_statistic(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

fn model() -> InputModel {
    let marginals = vec![
        Marginal::lognormal_from_moments(2.0, 0.3).unwrap(),
        Marginal::gumbel_from_moments(50.0, 7.5).unwrap(),
        Marginal::uniform(-1.0, 3.0).unwrap(),
        Marginal::truncated_gaussian(0.5, 1.0).unwrap(),
    ];
    let r = DMatrix::from_row_slice(
        4,
        4,
        &[1.0, 0.5, 0.2, 0.0, 0.5, 1.0, 0.3, 0.1, 0.2, 0.3, 1.0, -0.2, 0.0, 0.1, -0.2, 1.0],
    );
    InputModel::with_correlation(marginals, r).unwrap()
}

#[test]
fn correlated_marginals_pass_kolmogorov_smirnov() {
    let m = model();
    let n = 20_000;
    let x = mcs_sample(&m, n, 5).unwrap();
    // 1% critical value of the one-sample KS statistic
    let critical = 1.628 / (n as f64).sqrt();
    for (k, marginal) in m.marginals().iter().enumerate() {
        let d = ks_statistic(x.column(k).iter().map(|&v| marginal.cdf(v)).collect());
        assert!(d < critical, "marginal {k}: D = {d}");
    }
}

#[test]
fn copula_recovers_gaussian_correlation() {
    let m = model();
    let n = 50_000;
    let x = mcs_sample(&m, n, 6).unwrap();
    let z: Vec<Vec<f64>> = x.rows().into_iter().map(|r| m.to_standard(r.as_slice().unwrap()).unwrap()).collect();
    let nf = n as f64;
    for i in 0..4 {
        for j in 0..4 {
            let c = z.iter().map(|v| v[i] * v[j]).sum::<f64>() / nf;
            assert!((c - f64::from(u8::from(i == j))).abs() < 0.03, "({i},{j}) {c}");
        }
    }
}

#[test]
fn physical_round_trip() {
    let m = model();
    let x = mcs_sample(&m, 2_000, 7).unwrap();
    for r in x.rows() {
        let xr = r.as_slice().unwrap();
        let back = m.to_physical(&m.to_standard(xr).unwrap()).unwrap();
        for (a, b) in xr.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}
