//! Geometric Risk Controller: a fixed-protocol accept/abstain layer for
//! black-box generative OCR, with the evaluation harness used to audit it.
//!
//! A crop is rendered into K geometric views, each view is transcribed by
//! the backend, outputs that exceed the crop's geometric length bound are
//! screened out, and the controller accepts the modal transcript only when
//! enough screened views agree and their mutual dispersion is small.
//!
//! ```
//! use grc_core::consensus::summarize_texts;
//! use grc_core::controller::{decide, default_family, operating_point_for, Outcome};
//!
//! let op = operating_point_for(3, &default_family()).unwrap();
//! let summary = summarize_texts(&["stop", "stop", "stop", "step", "stop"]);
//! let decision = decide(&summary, &op);
//! assert_eq!(decision.outcome, Outcome::Accept);
//! assert_eq!(decision.transcript.as_deref(), Some("stop"));
//! ```

pub mod consensus;
pub mod controller;
pub mod evaluation;
pub mod gateway;
pub mod harness;
pub mod image;
pub mod protocol;
pub mod rng;
pub mod screening;

pub use consensus::{bounded_normalized_distance, edit_distance, summarize_evidence, EvidenceSummary};
pub use controller::{decide, run_pipeline, Ablation, Decision, OperatingPoint, Outcome, Reason};
pub use gateway::{Gateway, Generator, GeneratorQuery, GeneratorReply};
pub use image::CropImage;
pub use protocol::{make_views, ProtocolConfig};
pub use screening::{canonicalize, geometric_length_bound, screen, LengthBoundParams};
