//! Output canonicalization and structural screening.
//!
//! A view's transcript is admissible unless it is longer than a conservative
//! length bound derived from the crop's foreground geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::CropImage;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScreeningError {
    #[error("image has no foreground pixels")]
    NoForeground,
    #[error("invalid length-bound parameters: {0}")]
    InvalidParams(String),
}

/// A transcript after presentation-only normalization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalTranscript {
    pub text: String,
    /// Unicode scalar values in `text`.
    pub char_length: usize,
}

/// Normalizes whitespace, drops control characters, and lowercases when the
/// task protocol is case-insensitive. Never edits content otherwise.
pub fn canonicalize(raw: &str, case_insensitive: bool) -> CanonicalTranscript {
    let cleaned: String = raw
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_control() {
                None
            } else {
                Some(c)
            }
        })
        .collect();
    let mut text = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    if case_insensitive {
        text = text.to_lowercase();
    }
    let char_length = text.chars().count();
    CanonicalTranscript { text, char_length }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinarizeMethod {
    Otsu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthBoundParams {
    pub binarize_method: BinarizeMethod,
    /// Conservative multiplier on the estimated character count.
    pub alpha: f64,
    pub min_bound: u32,
    /// Nominal width-to-height ratio of one glyph.
    pub aspect_per_char: f64,
}

impl Default for LengthBoundParams {
    fn default() -> Self {
        Self {
            binarize_method: BinarizeMethod::Otsu,
            alpha: 2.0,
            min_bound: 2,
            aspect_per_char: 0.6,
        }
    }
}

impl LengthBoundParams {
    pub fn validate(&self) -> Result<(), ScreeningError> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(ScreeningError::InvalidParams(format!("alpha {} must be >= 1", self.alpha)));
        }
        if self.min_bound < 1 {
            return Err(ScreeningError::InvalidParams("min_bound must be >= 1".into()));
        }
        if !(self.aspect_per_char > 0.0 && self.aspect_per_char.is_finite()) {
            return Err(ScreeningError::InvalidParams(format!(
                "aspect_per_char {} must be > 0",
                self.aspect_per_char
            )));
        }
        Ok(())
    }
}

/// Otsu threshold over an 8-bit histogram. Pixels `<= t` form the dark class.
pub fn otsu_threshold(gray: &[u8]) -> u8 {
    let mut hist = [0u64; 256];
    for &v in gray {
        hist[v as usize] += 1;
    }
    let total = gray.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let (mut best_t, mut best_var) = (0u8, -1.0f64);
    for (t, &count) in hist.iter().enumerate() {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best_var {
            best_var = between;
            best_t = t as u8;
        }
    }
    if best_var < 0.0 {
        // Single-valued image: everything lands in the dark class.
        return 255;
    }
    best_t
}

/// Foreground bounding box `(x_min, y_min, x_max, y_max)`, inclusive.
/// Foreground is the minority Otsu class; ties go to the dark class.
pub fn foreground_bbox(img: &CropImage) -> Option<(u32, u32, u32, u32)> {
    let gray = img.to_gray();
    let t = otsu_threshold(&gray);
    let dark = gray.iter().filter(|&&v| v <= t).count();
    let light = gray.len() - dark;
    let fg_is_dark = dark <= light;
    let fg_count = if fg_is_dark { dark } else { light };
    if fg_count == 0 {
        return None;
    }
    let w = img.width() as usize;
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    for (i, &v) in gray.iter().enumerate() {
        if (v <= t) == fg_is_dark {
            let (x, y) = ((i % w) as u32, (i / w) as u32);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    Some((x0, y0, x1, y1))
}

/// Upper bound on a plausible transcript length for `img`.
pub fn geometric_length_bound(img: &CropImage, params: &LengthBoundParams) -> Result<u32, ScreeningError> {
    let (x0, y0, x1, y1) = foreground_bbox(img).ok_or(ScreeningError::NoForeground)?;
    let w = (x1 - x0 + 1) as f64;
    let h = (y1 - y0 + 1) as f64;
    let (major, minor) = if w >= h { (w, h) } else { (h, w) };
    let chars = major / (params.aspect_per_char * minor);
    // Absorb float noise so exact integer products do not round up by one.
    let scaled = (params.alpha * chars - 1e-9).ceil().max(0.0) as u32;
    Ok(scaled.max(params.min_bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityReason {
    Ok,
    ExceedsLengthBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub valid: bool,
    pub reason: ValidityReason,
    /// `None` when the crop has no detectable foreground (unbounded).
    pub length_bound: Option<u32>,
}

impl ValidityVerdict {
    /// Verdict used when screening is bypassed.
    pub fn bypassed() -> Self {
        Self {
            valid: true,
            reason: ValidityReason::Ok,
            length_bound: None,
        }
    }
}

/// Screens a transcript against a precomputed bound.
pub fn screen_against(t: &CanonicalTranscript, bound: Option<u32>) -> ValidityVerdict {
    match bound {
        Some(b) if t.char_length > b as usize => ValidityVerdict {
            valid: false,
            reason: ValidityReason::ExceedsLengthBound,
            length_bound: bound,
        },
        _ => ValidityVerdict {
            valid: true,
            reason: ValidityReason::Ok,
            length_bound: bound,
        },
    }
}

/// Screens a transcript against the bound of the view it was read from.
/// A crop without foreground fails open.
pub fn screen(t: &CanonicalTranscript, img: &CropImage, params: &LengthBoundParams) -> ValidityVerdict {
    screen_against(t, geometric_length_bound(img, params).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Channels;

    /// White canvas with a black `fw x fh` box at (5, 5).
    fn boxed(fw: u32, fh: u32) -> CropImage {
        let (w, h) = (fw + 10, fh + 10);
        let mut px = vec![255u8; (w * h) as usize];
        for y in 5..5 + fh {
            for x in 5..5 + fw {
                px[(y * w + x) as usize] = 0;
            }
        }
        CropImage::new(px, w, h, Channels::Gray, "box").unwrap()
    }

    fn params() -> LengthBoundParams {
        LengthBoundParams { alpha: 2.0, aspect_per_char: 0.6, min_bound: 2, ..Default::default() }
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize("  Stop \n", true), CanonicalTranscript { text: "stop".into(), char_length: 4 });
        assert_eq!(canonicalize("HELLO WORLD", false).text, "HELLO WORLD");
        assert_eq!(canonicalize("a\t\tb", true).text, "a b");
        assert_eq!(canonicalize("", true), CanonicalTranscript { text: String::new(), char_length: 0 });
        assert_eq!(canonicalize("a\u{0007}b\u{0000}", false).text, "ab");
        assert_eq!(canonicalize("café ÉTÉ", true), CanonicalTranscript { text: "café été".into(), char_length: 8 });
        // Punctuation is content and is kept.
        assert_eq!(canonicalize(" it's,  ok. ", false).text, "it's, ok.");
    }

    #[test]
    fn otsu_separates_bimodal() {
        let mut gray = vec![20u8; 100];
        gray.extend(vec![220u8; 300]);
        let t = otsu_threshold(&gray);
        assert!((20..220).contains(&t), "{t}");
    }

    #[test]
    fn bound_for_wide_box() {
        // Box 200 x 20 on a canvas where it is the minority class.
        let (fw, fh) = (200u32, 20u32);
        let (w, h) = (fw + 10, fh + 200);
        let mut px = vec![255u8; (w * h) as usize];
        for y in 5..5 + fh {
            for x in 5..5 + fw {
                px[(y * w + x) as usize] = 0;
            }
        }
        let img = CropImage::new(px, w, h, Channels::Gray, "wide").unwrap();
        assert_eq!(foreground_bbox(&img), Some((5, 5, 204, 24)));
        assert_eq!(geometric_length_bound(&img, &params()), Ok(34));
    }

    #[test]
    fn bound_for_square_glyph() {
        let img = boxed(20, 20);
        // Box occupies 400 of 900 pixels: it is the minority.
        assert_eq!(geometric_length_bound(&img, &params()), Ok(4));
    }

    #[test]
    fn bound_respects_min_and_exact_products() {
        // 18 x 10 box: 2.0 * 18 / (0.6 * 10) = 6 exactly, not 7.
        let img = boxed(18, 10);
        let p = LengthBoundParams { min_bound: 1, ..params() };
        assert_eq!(geometric_length_bound(&img, &p), Ok(6));
        // 12 x 20 box: 2.0 * 20 / (0.6 * 12) = 5.56.
        assert_eq!(geometric_length_bound(&boxed(12, 20), &p), Ok(6));
        let p = LengthBoundParams { min_bound: 7, ..params() };
        assert_eq!(geometric_length_bound(&img, &p), Ok(7));
    }

    #[test]
    fn tall_box_uses_vertical_major_axis() {
        // 20 x 200 box on a 250 x 210 canvas.
        let (w, h) = (250u32, 210u32);
        let mut px = vec![255u8; (w * h) as usize];
        for y in 5..205 {
            for x in 5..25 {
                px[(y * w + x) as usize] = 0;
            }
        }
        let img = CropImage::new(px, w, h, Channels::Gray, "tall").unwrap();
        // ceil(2.0 * 200 / (0.6 * 20)) = ceil(33.33)
        assert_eq!(geometric_length_bound(&img, &params()), Ok(34));
    }

    #[test]
    fn light_text_on_dark_background() {
        let img = boxed(20, 20);
        let inverted: Vec<u8> = img.pixels().iter().map(|v| 255 - v).collect();
        let inv = CropImage::new(inverted, img.width(), img.height(), Channels::Gray, "inv").unwrap();
        assert_eq!(foreground_bbox(&inv), foreground_bbox(&img));
    }

    #[test]
    fn white_crop_has_no_foreground() {
        let img = CropImage::filled_gray(30, 10, 255, "w").unwrap();
        assert_eq!(geometric_length_bound(&img, &params()), Err(ScreeningError::NoForeground));
        let verdict = screen(&canonicalize(&"x".repeat(500), true), &img, &params());
        assert!(verdict.valid);
        assert_eq!(verdict.length_bound, None);
    }

    #[test]
    fn screen_examples() {
        let ok = screen_against(&canonicalize("hello", true), Some(34));
        assert!(ok.valid && ok.reason == ValidityReason::Ok);
        let long = screen_against(&canonicalize(&"a".repeat(40), true), Some(34));
        assert!(!long.valid);
        assert_eq!(long.reason, ValidityReason::ExceedsLengthBound);
        let exact = screen_against(&canonicalize(&"a".repeat(34), true), Some(34));
        assert!(exact.valid);
        let empty = screen_against(&canonicalize("", true), Some(1));
        assert!(empty.valid);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LengthBoundParams::default().validate().is_ok());
        assert!(LengthBoundParams { alpha: 0.5, ..Default::default() }.validate().is_err());
        assert!(LengthBoundParams { min_bound: 0, ..Default::default() }.validate().is_err());
        assert!(LengthBoundParams { aspect_per_char: 0.0, ..Default::default() }.validate().is_err());
    }
}
