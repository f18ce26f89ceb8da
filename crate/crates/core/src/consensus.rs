//! Cross-view evidence statistics: exact-match mode, vote fraction, and
//! candidate-centered dispersion over the valid views.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::screening::{CanonicalTranscript, ValidityVerdict};

/// Levenshtein distance over Unicode scalar values, unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitute.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// `min(1, ED(a, b) / max(1, max(|a|, |b|)))`.
pub fn bounded_normalized_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count()).max(1);
    (edit_distance(a, b) as f64 / longest as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSelection {
    pub mode: Option<String>,
    pub unique: bool,
    /// Occurrences of the mode; 0 when there is none.
    pub count: usize,
}

/// Most frequent string, provided its count strictly beats every other count.
pub fn select_mode<S: AsRef<str>>(texts: &[S]) -> ModeSelection {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in texts {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    let mut leaders = counts.iter().filter(|(_, &c)| c == best);
    match (leaders.next(), leaders.next()) {
        (Some((text, &count)), None) => ModeSelection {
            mode: Some((*text).to_string()),
            unique: true,
            count,
        },
        _ => ModeSelection {
            mode: None,
            unique: false,
            count: 0,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub view_index: u32,
    pub canonical: CanonicalTranscript,
    pub verdict: ValidityVerdict,
}

/// Screened outputs of one protocol run. Views whose backend query failed
/// are listed in `absent_views`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub entries: Vec<EvidenceEntry>,
    pub absent_views: Vec<u32>,
}

impl EvidenceRecord {
    pub fn entry(&self, view_index: u32) -> Option<&EvidenceEntry> {
        self.entries.iter().find(|e| e.view_index == view_index)
    }

    pub fn valid_texts(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|e| e.verdict.valid)
            .map(|e| e.canonical.text.as_str())
    }
}

/// `(n, q, Δ)` plus the candidate. `vote_fraction` and `dispersion` are
/// `None` exactly when there is no unique mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSummary {
    pub n_valid: usize,
    pub mode: Option<String>,
    pub mode_unique: bool,
    pub vote_fraction: Option<f64>,
    pub dispersion: Option<f64>,
}

impl EvidenceSummary {
    pub fn empty() -> Self {
        Self {
            n_valid: 0,
            mode: None,
            mode_unique: false,
            vote_fraction: None,
            dispersion: None,
        }
    }
}

/// Summarizes the valid views of `record`.
pub fn summarize_evidence(record: &EvidenceRecord) -> EvidenceSummary {
    let valid: Vec<&str> = record.valid_texts().collect();
    summarize_texts(&valid)
}

/// Summary over an already-screened list of valid texts.
pub fn summarize_texts<S: AsRef<str>>(valid: &[S]) -> EvidenceSummary {
    let n = valid.len();
    if n == 0 {
        return EvidenceSummary::empty();
    }
    let selection = select_mode(valid);
    let Some(mode) = selection.mode else {
        return EvidenceSummary {
            n_valid: n,
            ..EvidenceSummary::empty()
        };
    };
    // Sorted so the float sum does not depend on view order.
    let mut distances: Vec<f64> = valid
        .iter()
        .map(|t| bounded_normalized_distance(t.as_ref(), &mode))
        .collect();
    distances.sort_by(f64::total_cmp);
    let dispersion = distances.iter().sum::<f64>() / n as f64;
    EvidenceSummary {
        n_valid: n,
        mode: Some(mode),
        mode_unique: true,
        vote_fraction: Some(selection.count as f64 / n as f64),
        dispersion: Some(dispersion),
    }
}
