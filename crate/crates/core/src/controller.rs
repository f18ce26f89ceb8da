//! Accept/abstain decision rule and the end-to-end inference pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{summarize_evidence, EvidenceEntry, EvidenceRecord, EvidenceSummary};
use crate::gateway::{query_all_views, Gateway, GeneratorReply};
use crate::image::CropImage;
use crate::protocol::{make_views, ProtocolConfig, ProtocolError};
use crate::screening::{canonicalize, geometric_length_bound, screen_against, LengthBoundParams, ValidityVerdict};

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("operating point m={0} is not in the configured family")]
    UnknownOperatingPoint(u32),
    #[error("invalid operating-point family: {0}")]
    InvalidFamily(String),
}

/// One strictness setting: consensus threshold `tau`, dispersion threshold
/// `kappa`, and minimum number of valid views `k_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    pub m: u32,
    pub tau: f64,
    pub kappa: f64,
    pub k_min: u32,
}

impl OperatingPoint {
    pub const fn new(m: u32, tau: f64, kappa: f64, k_min: u32) -> Self {
        Self { m, tau, kappa, k_min }
    }
}

/// `m ∈ {1, 3, 5}` with `tau = 0.1, 0.5, 0.9`, `kappa = 0.4`, `k_min = 3`.
pub fn default_family() -> Vec<OperatingPoint> {
    vec![
        OperatingPoint::new(1, 0.1, 0.4, 3),
        OperatingPoint::new(3, 0.5, 0.4, 3),
        OperatingPoint::new(5, 0.9, 0.4, 3),
    ]
}

pub const DEFAULT_M: u32 = 3;

/// Checks the family invariants: distinct `m`, `tau` nondecreasing in `m`,
/// shared `kappa` and `k_min`, all thresholds in `[0, 1]`, `1 <= k_min <= k_views`.
pub fn validate_family(family: &[OperatingPoint], k_views: u32) -> Result<(), ControllerError> {
    let bad = |msg: String| Err(ControllerError::InvalidFamily(msg));
    let Some(first) = family.first() else {
        return bad("family is empty".into());
    };
    let mut sorted = family.to_vec();
    sorted.sort_by_key(|p| p.m);
    for pair in sorted.windows(2) {
        if pair[0].m == pair[1].m {
            return bad(format!("duplicate m={}", pair[0].m));
        }
        if pair[1].tau < pair[0].tau {
            return bad(format!("tau must be nondecreasing in m (m={} then m={})", pair[0].m, pair[1].m));
        }
    }
    for p in family {
        if !(0.0..=1.0).contains(&p.tau) || !(0.0..=1.0).contains(&p.kappa) {
            return bad(format!("m={}: tau and kappa must lie in [0, 1]", p.m));
        }
        if p.kappa != first.kappa || p.k_min != first.k_min {
            return bad("kappa and k_min must be shared across the family".into());
        }
        if p.k_min < 1 || p.k_min > k_views {
            return bad(format!("k_min={} must lie in [1, {k_views}]", p.k_min));
        }
    }
    Ok(())
}

pub fn operating_point_for(m: u32, family: &[OperatingPoint]) -> Result<OperatingPoint, ControllerError> {
    family
        .iter()
        .find(|p| p.m == m)
        .copied()
        .ok_or(ControllerError::UnknownOperatingPoint(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accept,
    Abstain,
}

/// Why a decision came out the way it did. Abstentions name the first
/// failed gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Accepted,
    InsufficientEvidence,
    NoUniqueMode,
    LowConsensus,
    HighDispersion,
    /// Single-view confidence baseline rejected the output.
    LowConfidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub transcript: Option<String>,
    pub reason: Reason,
    pub summary: EvidenceSummary,
}

impl Decision {
    pub fn accept(transcript: String, summary: EvidenceSummary) -> Self {
        Self {
            outcome: Outcome::Accept,
            transcript: Some(transcript),
            reason: Reason::Accepted,
            summary,
        }
    }

    pub fn abstain(reason: Reason, summary: EvidenceSummary) -> Self {
        debug_assert_ne!(reason, Reason::Accepted);
        Self {
            outcome: Outcome::Abstain,
            transcript: None,
            reason,
            summary,
        }
    }

    pub fn is_accept(&self) -> bool {
        self.outcome == Outcome::Accept
    }
}

/// Gates, in order: minimum evidence, unique mode, `q >= tau`, `Δ <= kappa`.
pub fn decide(summary: &EvidenceSummary, op: &OperatingPoint) -> Decision {
    let summary = summary.clone();
    if summary.n_valid < op.k_min as usize {
        return Decision::abstain(Reason::InsufficientEvidence, summary);
    }
    let (Some(mode), true, Some(q), Some(dispersion)) = (
        summary.mode.clone(),
        summary.mode_unique,
        summary.vote_fraction,
        summary.dispersion,
    ) else {
        return Decision::abstain(Reason::NoUniqueMode, summary);
    };
    if q < op.tau {
        return Decision::abstain(Reason::LowConsensus, summary);
    }
    if dispersion > op.kappa {
        return Decision::abstain(Reason::HighDispersion, summary);
    }
    Decision::accept(mode, summary)
}

/// Controller variants used for component ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Screening plus all consensus gates.
    Full,
    /// Every returned view counts as valid.
    NoStructural,
    /// Accept the anchor's screened output if it is valid.
    NoConsensus,
    /// Single anchor query, always exposed.
    AlwaysAccept,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoStructural,
        Ablation::NoConsensus,
        Ablation::AlwaysAccept,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoStructural => "no_structural",
            Ablation::NoConsensus => "no_consensus",
            Ablation::AlwaysAccept => "always_accept",
        }
    }
}

/// Everything one pipeline run produced, for audit and baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTrace {
    pub decision: Decision,
    pub evidence: EvidenceRecord,
    /// Raw anchor reply, when the anchor query succeeded.
    pub anchor: Option<GeneratorReply>,
}

/// Runs the whole protocol for one crop and decides.
pub fn run_pipeline(
    image: &CropImage,
    cfg: &ProtocolConfig,
    gateway: &Gateway,
    params: &LengthBoundParams,
    op: &OperatingPoint,
    ablation: Ablation,
) -> Result<Decision, ProtocolError> {
    run_pipeline_traced(image, cfg, gateway, params, op, ablation).map(|t| t.decision)
}

pub fn run_pipeline_traced(
    image: &CropImage,
    cfg: &ProtocolConfig,
    gateway: &Gateway,
    params: &LengthBoundParams,
    op: &OperatingPoint,
    ablation: Ablation,
) -> Result<PipelineTrace, ProtocolError> {
    let protocol = match ablation {
        Ablation::AlwaysAccept => ProtocolConfig { k_views: 1, ..cfg.clone() },
        _ => cfg.clone(),
    };
    let views = make_views(image, &protocol)?;
    let outcomes = query_all_views(gateway, &views, &protocol.prompt_template);

    let mut evidence = EvidenceRecord::default();
    let mut anchor = None;
    for (view, outcome) in views.iter().zip(outcomes) {
        let reply = match outcome.reply {
            Ok(reply) => reply,
            Err(_) => {
                evidence.absent_views.push(view.index);
                continue;
            }
        };
        let canonical = canonicalize(&reply.text, protocol.case_insensitive);
        let verdict = match ablation {
            Ablation::Full | Ablation::NoConsensus => {
                screen_against(&canonical, geometric_length_bound(&view.image, params).ok())
            }
            Ablation::NoStructural | Ablation::AlwaysAccept => ValidityVerdict::bypassed(),
        };
        if view.index == 1 {
            anchor = Some(reply);
        }
        evidence.entries.push(EvidenceEntry {
            view_index: view.index,
            canonical,
            verdict,
        });
    }

    let summary = summarize_evidence(&evidence);
    let decision = match ablation {
        Ablation::Full | Ablation::NoStructural => decide(&summary, op),
        Ablation::NoConsensus | Ablation::AlwaysAccept => match evidence.entry(1) {
            Some(e) if e.verdict.valid => Decision::accept(e.canonical.text.clone(), summary),
            _ => Decision::abstain(Reason::InsufficientEvidence, summary),
        },
    };
    Ok(PipelineTrace {
        decision,
        evidence,
        anchor,
    })
}
