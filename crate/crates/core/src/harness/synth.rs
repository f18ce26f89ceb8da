//! Seeded synthetic corpora: rendered word crops, a manifest, the matching
//! scripted-generator spec, and a ready-to-run config.
//!
//! Output layout under the target directory:
//!
//! ```text
//! images/<id>.png
//! manifest.jsonl
//! scripted.json
//! config.toml
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::font::{ink, GLYPH_H, GLYPH_W};
use super::manifest::ManifestLine;
use super::report::write_json;
use super::{HarnessError, RunConfig};
use crate::gateway::scripted::BUILTIN_VOCABULARY;
use crate::evaluation::LabeledSample;
use crate::gateway::{ConfidenceModel, ScriptedGeneratorSpec};
use crate::image::{Channels, CropImage};
use crate::rng::{KeyedRng, SYNTH_DOMAIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub seed: u64,
    pub p_overgen: f64,
    pub p_substitute: f64,
    pub p_unstable: f64,
    pub overgen_repeat: u32,
    pub confidence_model: ConfidenceModel,
    /// Device pixels per font pixel.
    pub glyph_scale: u32,
    /// Peak amplitude of uniform pixel noise.
    pub noise: u8,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 500,
            seed: 0,
            p_overgen: 0.05,
            p_substitute: 0.10,
            p_unstable: 0.15,
            overgen_repeat: 3,
            confidence_model: ConfidenceModel::Overconfident,
            glyph_scale: 3,
            noise: 12,
        }
    }
}

/// Renders `word` in upper case, dark ink on a light noisy background,
/// with a four-font-pixel margin on every side.
pub fn render_word(word: &str, scale: u32, noise: u8, rng: &mut KeyedRng, source_id: &str) -> CropImage {
    let n = word.chars().count().max(1) as u32;
    let margin = 4 * scale;
    let cell = (GLYPH_W + 1) * scale;
    let width = n * cell - scale + 2 * margin;
    let height = GLYPH_H * scale + 2 * margin;
    let background = 190 + rng.below(50) as i32;
    let ink_level = 20 + rng.below(50) as i32;
    let chars: Vec<char> = word.chars().collect();
    let mut pixels = Vec::with_capacity((width * height) as usize);
    for y in 0..height {
        for x in 0..width {
            let inked = x >= margin && y >= margin && {
                let (lx, ly) = ((x - margin) / scale, (y - margin) / scale);
                let (slot, gx) = (lx / (GLYPH_W + 1), lx % (GLYPH_W + 1));
                (slot as usize) < chars.len() && ink(chars[slot as usize], gx, ly)
            };
            let base = if inked { ink_level } else { background };
            let jitter = if noise == 0 {
                0
            } else {
                rng.below(2 * noise as usize + 1) as i32 - noise as i32
            };
            pixels.push((base + jitter).clamp(0, 255) as u8);
        }
    }
    CropImage::new(pixels, width, height, Channels::Gray, source_id).expect("rendered buffer matches dimensions")
}

/// An in-memory corpus: rendered samples plus the scripted backend wired to
/// their ground truth.
pub struct SynthCorpus {
    pub samples: Vec<LabeledSample>,
    pub scripted: ScriptedGeneratorSpec,
}

impl SynthCorpus {
    pub fn generate(spec: &SynthSpec) -> Self {
        let width = spec.n.saturating_sub(1).max(1).to_string().len().max(4);
        let mut samples = Vec::with_capacity(spec.n);
        let mut truth = BTreeMap::new();
        for i in 0..spec.n {
            let id = format!("w{i:0width$}");
            let mut rng = KeyedRng::new(SYNTH_DOMAIN, spec.seed, "corpus", i as u32);
            let word = BUILTIN_VOCABULARY[rng.below(BUILTIN_VOCABULARY.len())];
            let image = render_word(word, spec.glyph_scale.max(1), spec.noise, &mut rng, &id);
            truth.insert(id.clone(), word.to_string());
            samples.push(LabeledSample {
                source_id: id,
                image,
                ground_truth: word.to_string(),
            });
        }
        let scripted = ScriptedGeneratorSpec {
            ground_truth: truth,
            p_overgen: spec.p_overgen,
            p_substitute: spec.p_substitute,
            p_unstable: spec.p_unstable,
            overgen_repeat: spec.overgen_repeat,
            seed: spec.seed,
            confidence_model: spec.confidence_model,
            vocabulary: Vec::new(),
        };
        Self { samples, scripted }
    }
}

/// Writes a corpus to `out_dir` and returns its ground truth.
pub fn generate_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<BTreeMap<String, String>, HarnessError> {
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| HarnessError::io(&images, e))?;
    let corpus = SynthCorpus::generate(spec);
    let mut manifest = String::new();
    for sample in &corpus.samples {
        let rel = format!("images/{}.png", sample.source_id);
        sample.image.save_png(&out_dir.join(&rel))?;
        let line = ManifestLine {
            id: sample.source_id.clone(),
            image: rel,
            label: sample.ground_truth.clone(),
        };
        manifest.push_str(&serde_json::to_string(&line).expect("manifest line serializes"));
        manifest.push('\n');
    }
    let manifest_path = out_dir.join("manifest.jsonl");
    std::fs::write(&manifest_path, manifest).map_err(|e| HarnessError::io(&manifest_path, e))?;
    write_json(&out_dir.join("scripted.json"), &corpus.scripted)?;

    let mut config = RunConfig::scripted("scripted.json");
    config.protocol.seed = spec.seed;
    let config_path = out_dir.join("config.toml");
    std::fs::write(&config_path, config.to_toml_string()).map_err(|e| HarnessError::io(&config_path, e))?;
    Ok(corpus.scripted.ground_truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screening::{geometric_length_bound, LengthBoundParams};

    #[test]
    fn rendered_word_geometry() {
        let mut rng = KeyedRng::new("t", 0, "", 0);
        let img = render_word("stop", 3, 12, &mut rng, "x");
        assert_eq!(img.width(), 4 * 18 - 3 + 24);
        assert_eq!(img.height(), 21 + 24);
        // Ink box 69 x 21: 2 * 69 / (0.6 * 21) = 10.95 -> 11, well under 16.
        assert_eq!(geometric_length_bound(&img, &LengthBoundParams::default()), Ok(11));
    }

    #[test]
    fn length_bound_separates_truth_from_overgeneration() {
        let params = LengthBoundParams::default();
        for word in BUILTIN_VOCABULARY {
            let mut rng = KeyedRng::new("t", 1, word, 0);
            let img = render_word(word, 3, 12, &mut rng, word);
            let bound = geometric_length_bound(&img, &params).unwrap() as usize;
            let n = word.len();
            assert!(n <= bound, "{word}: {n} > {bound}");
            assert!(4 * n > bound, "{word}: overgeneration fits under {bound}");
        }
    }
}
