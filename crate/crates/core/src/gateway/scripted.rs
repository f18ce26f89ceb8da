//! Synthetic generator that replays ground truth with scripted failures.
//!
//! Each query draws from a stream keyed by `(seed, source_id, view_index)`,
//! in this order:
//!
//! 1. substitution: the word is replaced by a different vocabulary word;
//! 2. instability (views >= 2 only): one or two random character edits;
//! 3. over-generation: the ground truth is appended `overgen_repeat` times;
//! 4. confidence: a mean token log-probability shaped by `confidence_model`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GatewayError, Generator, GeneratorQuery, GeneratorReply};
use crate::rng::{KeyedRng, SCRIPTED_DOMAIN};

/// Built-in substitution and corpus vocabulary.
pub const BUILTIN_VOCABULARY: &[&str] = &[
    "able", "acid", "after", "angle", "apple", "army", "baby", "bank", "bell", "bird", "black",
    "blue", "boat", "book", "brick", "bridge", "brown", "cake", "card", "chair", "cheap", "city",
    "clock", "cloud", "coffee", "cold", "corner", "cotton", "dance", "dark", "door", "dream",
    "drink", "east", "exit", "farm", "field", "fire", "floor", "flower", "friend", "garden",
    "glass", "gold", "green", "hand", "happy", "hotel", "house", "island", "jump", "key",
    "king", "lamp", "light", "lion", "market", "milk", "money", "moon", "music", "north",
    "ocean", "open", "paper", "park", "pizza", "plant", "police", "quiet", "rain", "river",
    "road", "salt", "school", "sea", "shop", "silver", "smile", "snow", "south", "star",
    "station", "stone", "stop", "street", "sugar", "table", "taxi", "train", "tree", "water",
    "west", "window", "winter", "yellow", "zone",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceModel {
    /// Correct outputs score high, wrong outputs low.
    Oracle,
    /// Confidence ignores correctness; runaway repetitions score highest.
    Overconfident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedGeneratorSpec {
    pub ground_truth: BTreeMap<String, String>,
    pub p_overgen: f64,
    pub p_substitute: f64,
    pub p_unstable: f64,
    pub overgen_repeat: u32,
    pub seed: u64,
    pub confidence_model: ConfidenceModel,
    /// Extra substitution words; merged with the built-in list.
    pub vocabulary: Vec<String>,
}

impl Default for ScriptedGeneratorSpec {
    fn default() -> Self {
        Self {
            ground_truth: BTreeMap::new(),
            p_overgen: 0.0,
            p_substitute: 0.0,
            p_unstable: 0.0,
            overgen_repeat: 3,
            seed: 0,
            confidence_model: ConfidenceModel::Overconfident,
            vocabulary: Vec::new(),
        }
    }
}

pub struct ScriptedGenerator {
    spec: ScriptedGeneratorSpec,
    vocabulary: Vec<String>,
    identity: String,
}

impl ScriptedGenerator {
    pub fn new(spec: ScriptedGeneratorSpec) -> Result<Self, GatewayError> {
        for (name, p) in [
            ("p_overgen", spec.p_overgen),
            ("p_substitute", spec.p_substitute),
            ("p_unstable", spec.p_unstable),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GatewayError::InvalidConfig(format!(
                    "scripted spec: {name} = {p} is not a probability"
                )));
            }
        }
        let mut vocabulary: Vec<String> = BUILTIN_VOCABULARY.iter().map(|w| w.to_string()).collect();
        vocabulary.extend(spec.vocabulary.iter().cloned());
        vocabulary.sort();
        vocabulary.dedup();
        let digest = Sha256::digest(serde_json::to_vec(&spec).expect("spec serializes"));
        let identity = format!(
            "scripted:seed={}:spec={}",
            spec.seed,
            digest[..8].iter().map(|b| format!("{b:02x}")).collect::<String>()
        );
        Ok(Self {
            spec,
            vocabulary,
            identity,
        })
    }

    pub fn spec(&self) -> &ScriptedGeneratorSpec {
        &self.spec
    }

    fn substitute(&self, rng: &mut KeyedRng, word: &str) -> String {
        let candidates: Vec<&String> = self
            .vocabulary
            .iter()
            .filter(|w| !w.eq_ignore_ascii_case(word))
            .collect();
        if candidates.is_empty() {
            return format!("{word}s");
        }
        candidates[rng.below(candidates.len())].clone()
    }

    fn corrupt(rng: &mut KeyedRng, text: &str, ground_truth: &str) -> String {
        const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
        let mut chars: Vec<char> = text.chars().collect();
        let edits = 1 + rng.below(2);
        for _ in 0..edits {
            let letter = LETTERS[rng.below(LETTERS.len())] as char;
            match rng.below(3) {
                0 if !chars.is_empty() => {
                    let i = rng.below(chars.len());
                    chars[i] = letter;
                }
                1 if chars.len() > 1 => {
                    let i = rng.below(chars.len());
                    chars.remove(i);
                }
                _ => {
                    let i = rng.below(chars.len() + 1);
                    chars.insert(i, letter);
                }
            }
        }
        let mut out: String = chars.into_iter().collect();
        while out == ground_truth || out == text {
            out.push(LETTERS[rng.below(LETTERS.len())] as char);
        }
        out
    }
}

impl Generator for ScriptedGenerator {
    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn generate(&self, q: &GeneratorQuery<'_>) -> Result<GeneratorReply, GatewayError> {
        let source_id = q.image.source_id();
        let truth = self.spec.ground_truth.get(source_id).ok_or_else(|| {
            GatewayError::MalformedReply(format!("no scripted ground truth for source id {source_id:?}"))
        })?;
        let mut rng = KeyedRng::new(SCRIPTED_DOMAIN, self.spec.seed, source_id, q.view_index);
        let substituted = rng.chance(self.spec.p_substitute);
        let unstable = rng.chance(self.spec.p_unstable) && q.view_index > 1;
        let overgen = rng.chance(self.spec.p_overgen);

        let mut text = truth.clone();
        if substituted {
            text = self.substitute(&mut rng, truth);
        }
        if unstable {
            text = Self::corrupt(&mut rng, &text, truth);
        }
        if overgen {
            text.push_str(&truth.repeat(self.spec.overgen_repeat as usize));
        }

        let u = rng.unit();
        let logprob = match self.spec.confidence_model {
            ConfidenceModel::Oracle if text == *truth => -0.05 - 0.25 * u,
            ConfidenceModel::Oracle => -1.0 - 1.0 * u,
            ConfidenceModel::Overconfident if overgen => -0.01 - 0.04 * u,
            ConfidenceModel::Overconfident => -0.05 - 0.45 * u,
        };
        Ok(GeneratorReply {
            text,
            mean_token_logprob: Some(logprob),
            latency_ms: None,
        })
    }
}
