//! Dataset-level evaluation: per-sample run records, report rows,
//! operating-point and query-budget sweeps, and the confidence baseline.

pub mod baseline;
pub mod metrics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{run_pipeline_traced, validate_family, Ablation, ControllerError, Decision, OperatingPoint};
use crate::gateway::Gateway;
use crate::image::CropImage;
use crate::protocol::ProtocolConfig;
use crate::screening::{canonicalize, LengthBoundParams};

pub use baseline::{calibrate_confidence_threshold, evaluate_confidence_baseline, split_heldout};
pub use metrics::{aggregate, cer, coverage, meltdown_at, percentile_p99, Metrics};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("ground truth is empty after canonicalization")]
    EmptyGroundTruth,
    #[error("record set is empty")]
    EmptyRecordSet,
    #[error("no covered records: conditional risk is undefined")]
    NoCoveredRecords,
    #[error("empty input")]
    EmptyInput,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("backend provides no confidence signal (mean_token_logprob)")]
    NoConfidenceSignal,
    #[error("target coverage {0} must lie in (0, 1]")]
    InvalidTargetCoverage(f64),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("invalid evaluation settings: {0}")]
    InvalidSettings(String),
}

/// A labeled crop. `ground_truth` is stored canonicalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub source_id: String,
    pub image: CropImage,
    pub ground_truth: String,
}

impl LabeledSample {
    pub fn new(
        source_id: impl Into<String>,
        image: CropImage,
        ground_truth: &str,
        case_insensitive: bool,
    ) -> Result<Self, EvalError> {
        let source_id = source_id.into();
        let gt = canonicalize(ground_truth, case_insensitive);
        if gt.char_length == 0 {
            return Err(EvalError::EmptyGroundTruth);
        }
        Ok(Self {
            image: image.with_source_id(source_id.clone()),
            source_id,
            ground_truth: gt.text,
        })
    }
}

/// One sample's end-to-end outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub source_id: String,
    /// `None` only when the sample failed with `error`.
    pub decision: Option<Decision>,
    /// CER of the exposed transcript; present iff accepted.
    pub cer: Option<f64>,
    /// Canonicalized anchor output, i.e. what a single-pass system would expose.
    pub baseline_text: Option<String>,
    pub baseline_confidence: Option<f64>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_covered(&self) -> bool {
        self.decision.as_ref().is_some_and(Decision::is_accept)
    }

    pub fn covered_cer(&self) -> Option<f64> {
        if self.is_covered() {
            self.cer
        } else {
            None
        }
    }
}

/// One line of a results table. Coverage and CER are in percent,
/// meltdown in per-mille; `None` marks an undefined conditional metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub method: String,
    pub m: Option<u32>,
    pub k_views: u32,
    pub coverage_pct: f64,
    pub cer_mean_pct: Option<f64>,
    pub cer_p99_pct: Option<f64>,
    pub meltdown_permille: Option<f64>,
    pub n_total: usize,
    pub n_covered: usize,
    pub n_errors: usize,
    /// Queries that reached the backend while producing this row.
    pub backend_calls: u64,
    /// Backend calls relative to the single-pass baseline, for budget sweeps.
    pub relative_cost: Option<f64>,
}

impl ReportRow {
    pub fn from_metrics(label: String, method: &str, m: Option<u32>, k_views: u32, metrics: &Metrics, backend_calls: u64) -> Self {
        Self {
            label,
            method: method.to_string(),
            m,
            k_views,
            coverage_pct: 100.0 * metrics.coverage,
            cer_mean_pct: metrics.cer_mean.map(|v| 100.0 * v),
            cer_p99_pct: metrics.cer_p99.map(|v| 100.0 * v),
            meltdown_permille: metrics.meltdown.map(|v| 1000.0 * v),
            n_total: metrics.n_total,
            n_covered: metrics.n_covered,
            n_errors: metrics.n_errors,
            backend_calls,
            relative_cost: None,
        }
    }

    /// Coverage as a unit fraction.
    pub fn coverage(&self) -> f64 {
        self.coverage_pct / 100.0
    }

    /// Meltdown as a unit fraction, if defined.
    pub fn meltdown(&self) -> Option<f64> {
        self.meltdown_permille.map(|v| v / 1000.0)
    }
}

/// Everything about a run except the backend and the controller setting.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub dataset_name: String,
    pub protocol: ProtocolConfig,
    pub length_bound: LengthBoundParams,
    /// Meltdown threshold on CER.
    pub delta: f64,
    pub parallelism: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            dataset_name: "dataset".into(),
            protocol: ProtocolConfig::default(),
            length_bound: LengthBoundParams::default(),
            delta: 2.0,
            parallelism: 1,
        }
    }
}

impl EvalSettings {
    fn row_label(&self, method: &str, m: Option<u32>, k: u32) -> String {
        match m {
            Some(m) => format!("{}/{method}/m={m}/K={k}", self.dataset_name),
            None => format!("{}/{method}/K={k}", self.dataset_name),
        }
    }

    /// Runs `f` on a worker pool of `parallelism` threads.
    pub(crate) fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism.max(1))
            .build()
            .expect("thread pool")
            .install(f)
    }
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| a.source_id.cmp(&b.source_id));
}

/// Runs the pipeline on every sample at one operating point.
pub fn evaluate(
    dataset: &[LabeledSample],
    settings: &EvalSettings,
    gateway: &Gateway,
    op: &OperatingPoint,
    ablation: Ablation,
) -> Result<(Vec<RunRecord>, ReportRow), EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    settings
        .protocol
        .validate()
        .map_err(|e| EvalError::InvalidSettings(e.to_string()))?;
    let ci = settings.protocol.case_insensitive;
    let calls_before = gateway.backend_calls();
    let mut records: Vec<RunRecord> = settings.in_pool(|| {
        dataset
            .par_iter()
            .map(|sample| {
                match run_pipeline_traced(&sample.image, &settings.protocol, gateway, &settings.length_bound, op, ablation) {
                    Ok(trace) => {
                        let cer = trace
                            .decision
                            .transcript
                            .as_deref()
                            .map(|t| cer(t, &sample.ground_truth, ci).expect("ground truth validated at ingestion"));
                        RunRecord {
                            source_id: sample.source_id.clone(),
                            decision: Some(trace.decision),
                            cer,
                            baseline_text: trace.anchor.as_ref().map(|a| canonicalize(&a.text, ci).text),
                            baseline_confidence: trace.anchor.and_then(|a| a.mean_token_logprob),
                            error: None,
                        }
                    }
                    Err(e) => RunRecord {
                        source_id: sample.source_id.clone(),
                        decision: None,
                        cer: None,
                        baseline_text: None,
                        baseline_confidence: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    sort_records(&mut records);
    let metrics = aggregate(&records, settings.delta)?;
    let k = match ablation {
        Ablation::AlwaysAccept => 1,
        _ => settings.protocol.k_views,
    };
    let m = (ablation != Ablation::AlwaysAccept).then_some(op.m);
    let row = ReportRow::from_metrics(
        settings.row_label(ablation.label(), m, k),
        ablation.label(),
        m,
        k,
        &metrics,
        gateway.backend_calls() - calls_before,
    );
    Ok((records, row))
}

/// One row per operating point, in the family's order. With a caching
/// gateway, points after the first reuse the same view replies.
pub fn sweep_operating_points(
    dataset: &[LabeledSample],
    settings: &EvalSettings,
    gateway: &Gateway,
    family: &[OperatingPoint],
    ablation: Ablation,
) -> Result<Vec<ReportRow>, EvalError> {
    validate_family(family, settings.protocol.k_views)?;
    family
        .iter()
        .map(|op| evaluate(dataset, settings, gateway, op, ablation).map(|(_, row)| row))
        .collect()
}

/// Query-budget sweep: a single-pass baseline row followed by one full-GRC
/// row per K. Each row runs on a fresh gateway, so `backend_calls` is the
/// cost of that budget alone and `relative_cost` is its ratio to the baseline.
pub fn sweep_query_budget(
    dataset: &[LabeledSample],
    settings: &EvalSettings,
    gateway: &Gateway,
    op: &OperatingPoint,
    k_list: &[u32],
    cache: bool,
) -> Result<Vec<ReportRow>, EvalError> {
    let base_gateway = gateway.fork(cache);
    let (_, mut base) = evaluate(dataset, settings, &base_gateway, op, Ablation::AlwaysAccept)?;
    let base_calls = base.backend_calls.max(1) as f64;
    base.relative_cost = Some(base.backend_calls as f64 / base_calls);
    let mut rows = vec![base];
    for &k in k_list {
        let per_k = EvalSettings {
            protocol: ProtocolConfig { k_views: k, ..settings.protocol.clone() },
            ..settings.clone()
        };
        if op.k_min > k {
            return Err(EvalError::InvalidSettings(format!("k_min={} exceeds K={k}", op.k_min)));
        }
        let gw = gateway.fork(cache);
        let (_, mut row) = evaluate(dataset, &per_k, &gw, op, Ablation::Full)?;
        row.relative_cost = Some(row.backend_calls as f64 / base_calls);
        rows.push(row);
    }
    Ok(rows)
}
