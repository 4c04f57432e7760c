use std::fmt::Write as _;

use super::{PfEntry, Summary};
use crate::error::{Error, Result};

/// Side-by-side comparison of two experiment summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub markdown: String,
    pub csv: String,
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.4e}"),
        _ => "-".into(),
    }
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

fn beta(e: Option<&PfEntry>) -> Option<f64> {
    e.and_then(|e| e.beta)
}

fn pf(e: Option<&PfEntry>) -> Option<f64> {
    e.and_then(|e| e.pf)
}

/// Builds markdown and CSV tables of errors and reliability rows. Missing
/// values are `-`. Per-run β ratios are against that run's reference; the
/// `a/b` rows divide run `a` by run `b`.
pub fn compare_report(a: &Summary, b: &Summary) -> Result<CompareReport> {
    if a.model != b.model {
        return Err(Error::InvalidParameter(format!("cannot compare {} with {}", a.model, b.model)));
    }
    let mut md = String::new();
    let mut csv_rows: Vec<Vec<String>> = vec![vec!["section", "quantity", "a", "b"].into_iter().map(String::from).collect()];
    let _ = writeln!(md, "# {} vs {}\n", a.name, b.name);
    let _ = writeln!(md, "| quantity | {} | {} |", a.name, b.name);
    let _ = writeln!(md, "|---|---|---|");
    let mut row = |section: &str, q: &str, x: String, y: String, md: &mut String| {
        let _ = writeln!(md, "| {q} | {x} | {y} |");
        csv_rows.push(vec![section.into(), q.into(), x, y]);
    };
    let int = |v: usize| v.to_string();
    row("design", "ED size", int(a.design.size), int(b.design.size), &mut md);
    row("lra", "LRA rank", int(a.lra.rank), int(b.lra.rank), &mut md);
    row("lra", "LRA degree", int(a.lra.degree), int(b.lra.degree), &mut md);
    row("lra", "LRA CV error", cell(Some(a.lra.cv_error)), cell(Some(b.lra.cv_error)), &mut md);
    row("lra", "LRA generalization error", cell(a.lra.generalization_error), cell(b.lra.generalization_error), &mut md);
    row("pce", "PCE degree", a.pce.degree.to_string(), b.pce.degree.to_string(), &mut md);
    row("pce", "PCE q", format!("{}", a.pce.q), format!("{}", b.pce.q), &mut md);
    row("pce", "PCE terms", int(a.pce.terms), int(b.pce.terms), &mut md);
    row("pce", "PCE LOO error", cell(Some(a.pce.loo)), cell(Some(b.pce.loo)), &mut md);
    row("pce", "PCE generalization error", cell(a.pce.generalization_error), cell(b.pce.generalization_error), &mut md);

    let empty = Vec::new();
    let ra = a.reliability.as_ref().map_or(&empty, |r| &r.rows);
    let rb = b.reliability.as_ref().map_or(&empty, |r| &r.rows);
    if !ra.iter().map(|r| r.threshold).eq(rb.iter().map(|r| r.threshold)) {
        return Err(Error::InvalidParameter("summaries have different reliability thresholds".into()));
    }
    let common: Vec<_> = ra.iter().zip(rb).collect();
    if !common.is_empty() {
        let _ = writeln!(md, "\n| threshold | quantity | {} | {} |", a.name, b.name);
        let _ = writeln!(md, "|---|---|---|---|");
        for (x, y) in common {
            let t = x.threshold;
            let lines = [
                ("reference pf", pf(x.reference.as_ref()), pf(y.reference.as_ref())),
                ("LRA pf", pf(Some(&x.lra)), pf(Some(&y.lra))),
                ("PCE pf", pf(Some(&x.pce)), pf(Some(&y.pce))),
                ("reference beta", beta(x.reference.as_ref()), beta(y.reference.as_ref())),
                ("LRA beta / reference", ratio(beta(Some(&x.lra)), beta(x.reference.as_ref())), ratio(beta(Some(&y.lra)), beta(y.reference.as_ref()))),
                ("PCE beta / reference", ratio(beta(Some(&x.pce)), beta(x.reference.as_ref())), ratio(beta(Some(&y.pce)), beta(y.reference.as_ref()))),
            ];
            for (q, va, vb) in lines {
                let _ = writeln!(md, "| {t} | {q} | {} | {} |", cell(va), cell(vb));
                csv_rows.push(vec![format!("threshold={t}"), q.into(), cell(va), cell(vb)]);
            }
            let cross = [
                ("LRA pf a/b", ratio(pf(Some(&x.lra)), pf(Some(&y.lra)))),
                ("PCE pf a/b", ratio(pf(Some(&x.pce)), pf(Some(&y.pce)))),
                ("LRA beta a/b", ratio(beta(Some(&x.lra)), beta(Some(&y.lra)))),
                ("PCE beta a/b", ratio(beta(Some(&x.pce)), beta(Some(&y.pce)))),
            ];
            for (q, v) in cross {
                let _ = writeln!(md, "| {t} | {q} | {} | |", cell(v));
                csv_rows.push(vec![format!("threshold={t}"), q.into(), cell(v), String::new()]);
            }
        }
    }
    let mut wr = csv::Writer::from_writer(Vec::new());
    for r in &csv_rows {
        wr.write_record(r)?;
    }
    let csv = String::from_utf8(wr.into_inner().map_err(|e| Error::Io(e.to_string()))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(CompareReport { markdown: md, csv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{CurveRow, DesignMethod, DesignSpec, LraSummary, PceSummary, ReliabilitySummary, Seeds};
    use crate::polybasis::PolyFamily;

    fn summary(name: &str, size: usize, lra_pf: Option<f64>) -> Summary {
        let entry = |pf: Option<f64>| PfEntry {
            pf,
            beta: pf.map(|p| -crate::probcore::normal::ppf(p)),
            cov: None,
            n_evals: Some(10),
        };
        Summary {
            name: name.into(),
            model: "beam".into(),
            dim: 5,
            polynomials: PolyFamily::Hermite,
            seeds: Seeds { ed: 1, analysis: 2 },
            design: DesignSpec { method: DesignMethod::Sobol, size },
            lra: LraSummary {
                rank: 1,
                degree: 3,
                cv_error: 1e-4,
                empirical_error: 1e-5,
                generalization_error: None,
                absolute_fallback: false,
            },
            pce: PceSummary { degree: 2, q: 1.0, terms: 9, loo: 1e-2, empirical_error: None, generalization_error: Some(2e-2) },
            conditional_errors: vec![],
            reliability: Some(ReliabilitySummary {
                reference_method: Some("analytical".into()),
                mcs_samples: 10,
                rows: vec![CurveRow { threshold: 4.0, reference: Some(entry(Some(1e-3))), lra: entry(lra_pf), pce: entry(Some(2e-3)) }],
            }),
        }
    }

    #[test]
    fn missing_entries_render_as_dash() {
        let r = compare_report(&summary("a", 30, None), &summary("b", 50, Some(1e-3))).unwrap();
        assert!(r.markdown.contains("| LRA generalization error | - | - |"));
        assert!(r.markdown.contains("| 4 | LRA pf | - | 1.0000e-3 |"));
        assert!(r.markdown.contains("| 4 | LRA beta / reference | - | 1.0000e0 |"));
        assert!(r.csv.starts_with("section,quantity,a,b\n"));
        assert!(r.csv.contains("design,ED size,30,50"));
    }

    #[test]
    fn identical_summaries_give_unit_ratios() {
        let s = summary("a", 30, Some(1e-3));
        let r = compare_report(&s, &s).unwrap();
        let ratios: Vec<&str> = r.csv.lines().filter(|l| l.contains("a/b")).collect();
        assert_eq!(ratios.len(), 4);
        assert!(ratios.iter().all(|l| l.contains(",1.0000e0,")));
    }

    #[test]
    fn threshold_mismatch_is_rejected() {
        let mut b = summary("b", 50, None);
        b.reliability.as_mut().unwrap().rows[0].threshold = 5.0;
        assert!(compare_report(&summary("a", 30, None), &b).is_err());
    }

    #[test]
    fn different_models_are_rejected() {
        let mut b = summary("b", 50, None);
        b.model = "truss".into();
        assert!(compare_report(&summary("a", 30, None), &b).is_err());
    }
}
