//! Config-driven experiments: experimental design, LRA and PCE training,
//! error estimates, response densities and failure-probability curves.

mod compare;
mod config;
mod run;

pub use compare::{compare_report, CompareReport};
pub use config::{
    DesignMethod, DesignSpec, ExperimentConfig, KdeSpec, ModelSpec, ReferenceMethod, ReliabilitySpec, Seeds,
    ValidationSpec,
};
pub use run::{run_experiment, RunError, RunOutcome, Stage};

use serde::{Deserialize, Serialize};

use crate::polybasis::PolyFamily;

/// One point of a failure-probability curve; `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfEntry {
    pub pf: Option<f64>,
    pub beta: Option<f64>,
    pub cov: Option<f64>,
    pub n_evals: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub threshold: f64,
    pub reference: Option<PfEntry>,
    pub lra: PfEntry,
    pub pce: PfEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySummary {
    pub reference_method: Option<String>,
    pub mcs_samples: u64,
    pub rows: Vec<CurveRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LraSummary {
    pub rank: usize,
    pub degree: usize,
    pub cv_error: f64,
    pub empirical_error: f64,
    pub generalization_error: Option<f64>,
    pub absolute_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceSummary {
    pub degree: u32,
    pub q: f64,
    pub terms: usize,
    pub loo: f64,
    pub empirical_error: Option<f64>,
    pub generalization_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRow {
    pub threshold: f64,
    pub points: usize,
    pub lra: Option<f64>,
    pub pce: Option<f64>,
}

/// Machine-readable record of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub name: String,
    pub model: String,
    pub dim: usize,
    pub polynomials: PolyFamily,
    pub seeds: Seeds,
    pub design: DesignSpec,
    pub lra: LraSummary,
    pub pce: PceSummary,
    pub conditional_errors: Vec<ConditionalRow>,
    pub reliability: Option<ReliabilitySummary>,
}
