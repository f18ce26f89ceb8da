//! Deployment metrics. All values here are unit fractions; percentage and
//! per-mille scaling happens when a [`super::ReportRow`] is built.

use super::{EvalError, RunRecord};
use crate::consensus::edit_distance;
use crate::screening::canonicalize;

/// Character error rate `ED(pred, gt) / |gt|` after canonicalizing both sides.
/// Unbounded above: over-generation can push it past 1.
pub fn cer(prediction: &str, ground_truth: &str, case_insensitive: bool) -> Result<f64, EvalError> {
    let gt = canonicalize(ground_truth, case_insensitive);
    if gt.char_length == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let pred = canonicalize(prediction, case_insensitive);
    Ok(edit_distance(&pred.text, &gt.text) as f64 / gt.char_length as f64)
}

/// Fraction of records that were accepted. Errored records count as not covered.
pub fn coverage(records: &[RunRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecordSet);
    }
    let covered = records.iter().filter(|r| r.is_covered()).count();
    Ok(covered as f64 / records.len() as f64)
}

/// Fraction of covered records with CER >= `delta`.
pub fn meltdown_at(records: &[RunRecord], delta: f64) -> Result<f64, EvalError> {
    let cers: Vec<f64> = records.iter().filter_map(|r| r.covered_cer()).collect();
    meltdown_rate(&cers, delta)
}

/// [`meltdown_at`] over raw covered-subset CER values.
pub fn meltdown_rate(cers: &[f64], delta: f64) -> Result<f64, EvalError> {
    if cers.is_empty() {
        return Err(EvalError::NoCoveredRecords);
    }
    let hits = cers.iter().filter(|&&c| c >= delta).count();
    Ok(hits as f64 / cers.len() as f64)
}

/// Nearest-rank percentile: the value at 1-based rank `ceil(p * n)`, clamped to `[1, n]`.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // The epsilon keeps exact products such as 0.99 * 100 from rounding up a rank.
    let rank = ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

pub fn percentile_p99(values: &[f64]) -> Result<f64, EvalError> {
    percentile_nearest_rank(values, 0.99)
}

/// Aggregate metrics over a record set, as unit fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub n_total: usize,
    pub n_covered: usize,
    pub n_errors: usize,
    pub coverage: f64,
    /// `None` when nothing was covered: conditional risk is undefined, not zero.
    pub cer_mean: Option<f64>,
    pub cer_p99: Option<f64>,
    pub meltdown: Option<f64>,
}

/// Folds records in the order given; callers sort by source id first.
pub fn aggregate(records: &[RunRecord], delta: f64) -> Result<Metrics, EvalError> {
    let coverage = coverage(records)?;
    let cers: Vec<f64> = records.iter().filter_map(|r| r.covered_cer()).collect();
    let cer_mean = (!cers.is_empty()).then(|| cers.iter().sum::<f64>() / cers.len() as f64);
    Ok(Metrics {
        n_total: records.len(),
        n_covered: records.iter().filter(|r| r.is_covered()).count(),
        n_errors: records.iter().filter(|r| r.error.is_some()).count(),
        coverage,
        cer_mean,
        cer_p99: percentile_p99(&cers).ok(),
        meltdown: meltdown_rate(&cers, delta).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::summarize_texts;
    use crate::controller::{Decision, Reason};

    fn rec(id: &str, cer: Option<f64>) -> RunRecord {
        let decision = match cer {
            Some(_) => Decision::accept("x".into(), summarize_texts(&["x"])),
            None => Decision::abstain(Reason::NoUniqueMode, summarize_texts::<&str>(&[])),
        };
        RunRecord {
            source_id: id.into(),
            decision: Some(decision),
            cer,
            baseline_text: None,
            baseline_confidence: None,
            error: None,
        }
    }

    #[test]
    fn cer_examples() {
        assert_eq!(cer("stop", "stop", true).unwrap(), 0.0);
        assert_eq!(cer("stopstopstop", "stop", true).unwrap(), 2.0);
        assert_eq!(cer("", "stop", true).unwrap(), 1.0);
        assert_eq!(cer(" STOP ", "stop", true).unwrap(), 0.0);
        assert_eq!(cer("STOP", "stop", false).unwrap(), 1.0);
        assert_eq!(cer("x", "  ", true), Err(EvalError::EmptyGroundTruth));
    }

    #[test]
    fn coverage_examples() {
        let mut r: Vec<RunRecord> = (0..9).map(|i| rec(&i.to_string(), Some(0.0))).collect();
        r.push(rec("9", None));
        assert_eq!(coverage(&r).unwrap(), 0.9);
        let none: Vec<RunRecord> = (0..4).map(|i| rec(&i.to_string(), None)).collect();
        assert_eq!(coverage(&none).unwrap(), 0.0);
        assert_eq!(coverage(&[]), Err(EvalError::EmptyRecordSet));
        let mut r: Vec<RunRecord> = (0..179).map(|i| rec(&i.to_string(), Some(0.0))).collect();
        r.extend((179..200).map(|i| rec(&i.to_string(), None)));
        assert_eq!(coverage(&r).unwrap(), 0.895);
    }

    #[test]
    fn meltdown_examples() {
        assert_eq!(meltdown_rate(&[0.0, 0.1, 2.0, 3.5], 2.0).unwrap(), 0.5);
        assert_eq!(meltdown_rate(&[0.0, 0.0], 2.0).unwrap(), 0.0);
        assert_eq!(meltdown_rate(&[1.99], 2.0).unwrap(), 0.0);
        assert_eq!(meltdown_rate(&[0.0, 0.3], 0.0).unwrap(), 1.0);
        assert_eq!(meltdown_rate(&[], 2.0), Err(EvalError::NoCoveredRecords));
        let r = vec![rec("a", None), rec("b", Some(2.0)), rec("c", Some(0.5))];
        assert_eq!(meltdown_at(&r, 2.0).unwrap(), 0.5);
        assert_eq!(meltdown_at(&[rec("a", None)], 2.0), Err(EvalError::NoCoveredRecords));
    }

    #[test]
    fn p99_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_p99(&v).unwrap(), 99.0);
        assert_eq!(percentile_p99(&[7.0]).unwrap(), 7.0);
        assert_eq!(percentile_p99(&[5.0, 5.0, 5.0]).unwrap(), 5.0);
        let v: Vec<f64> = (1..=200).rev().map(f64::from).collect();
        assert_eq!(percentile_p99(&v).unwrap(), 198.0);
        assert_eq!(percentile_p99(&[]), Err(EvalError::EmptyInput));
        assert_eq!(percentile_nearest_rank(&[3.0, 1.0, 2.0], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn aggregate_all_abstain_is_undefined() {
        let m = aggregate(&[rec("a", None), rec("b", None)], 2.0).unwrap();
        assert_eq!(m.coverage, 0.0);
        assert_eq!((m.cer_mean, m.cer_p99, m.meltdown), (None, None, None));
    }
}
