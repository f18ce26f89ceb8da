//! Single-view confidence-threshold baseline and its held-out calibration.

use rayon::prelude::*;

use super::{aggregate, cer, EvalError, EvalSettings, LabeledSample, ReportRow, RunRecord};
use crate::consensus::summarize_texts;
use crate::controller::{Decision, Reason};
use crate::gateway::{Gateway, GeneratorQuery};
use crate::rng::hash_fraction;
use crate::screening::canonicalize;

pub const METHOD: &str = "conf_thr";

/// Splits by a hash of the source id: a sample is held out when its hash
/// fraction falls below `fraction`. Order within each part is preserved.
pub fn split_heldout(samples: &[LabeledSample], fraction: f64) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    samples
        .iter()
        .cloned()
        .partition(|s| hash_fraction(&s.source_id) < fraction)
}

/// Threshold at which the share of held-out confidences `>= t` is the
/// smallest value at or above `target_coverage`.
pub fn calibrate_confidence_threshold(heldout: &[RunRecord], target_coverage: f64) -> Result<f64, EvalError> {
    if !(target_coverage > 0.0 && target_coverage <= 1.0) {
        return Err(EvalError::InvalidTargetCoverage(target_coverage));
    }
    let confidences: Option<Vec<f64>> = heldout.iter().map(|r| r.baseline_confidence).collect();
    let mut confidences = confidences.ok_or(EvalError::NoConfidenceSignal)?;
    if confidences.is_empty() {
        return Err(EvalError::NoConfidenceSignal);
    }
    confidences.sort_by(|a, b| b.total_cmp(a));
    let n = confidences.len();
    let keep = ((target_coverage * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(confidences[keep - 1])
}

/// Queries the anchor view only and accepts iff its confidence is at least
/// `threshold`. Outputs are canonicalized exactly as in the controller.
pub fn evaluate_confidence_baseline(
    dataset: &[LabeledSample],
    settings: &EvalSettings,
    gateway: &Gateway,
    threshold: f64,
) -> Result<(Vec<RunRecord>, ReportRow), EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let ci = settings.protocol.case_insensitive;
    let prompt = settings.protocol.prompt_template.as_str();
    let calls_before = gateway.backend_calls();
    let records: Result<Vec<RunRecord>, EvalError> = settings.in_pool(|| {
        dataset
            .par_iter()
            .map(|sample| {
                let reply = gateway.query(&GeneratorQuery {
                    image: &sample.image,
                    prompt,
                    view_index: 1,
                });
                let reply = match reply {
                    Ok(r) => r,
                    Err(e) => {
                        return Ok(RunRecord {
                            source_id: sample.source_id.clone(),
                            decision: None,
                            cer: None,
                            baseline_text: None,
                            baseline_confidence: None,
                            error: Some(e.to_string()),
                        })
                    }
                };
                let confidence = reply.mean_token_logprob.ok_or(EvalError::NoConfidenceSignal)?;
                let text = canonicalize(&reply.text, ci).text;
                let summary = summarize_texts(&[text.as_str()]);
                let (decision, cer) = if confidence >= threshold {
                    let c = cer(&text, &sample.ground_truth, ci)?;
                    (Decision::accept(text.clone(), summary), Some(c))
                } else {
                    (Decision::abstain(Reason::LowConfidence, summary), None)
                };
                Ok(RunRecord {
                    source_id: sample.source_id.clone(),
                    decision: Some(decision),
                    cer,
                    baseline_text: Some(text),
                    baseline_confidence: Some(confidence),
                    error: None,
                })
            })
            .collect()
    });
    let mut records = records?;
    records.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    let metrics = aggregate(&records, settings.delta)?;
    let row = ReportRow::from_metrics(
        format!("{}/{METHOD}/K=1", settings.dataset_name),
        METHOD,
        None,
        1,
        &metrics,
        gateway.backend_calls() - calls_before,
    );
    Ok((records, row))
}
