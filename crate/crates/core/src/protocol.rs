//! Multi-view protocol: expands one crop into an anchor view plus K-1
//! mildly perturbed, resolution-preserving views.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::CropImage;
use crate::rng::{KeyedRng, VIEW_DOMAIN};

pub const DEFAULT_PROMPT: &str =
    "Read the text in this image. Answer with the transcription only.";

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("transform {0:?} would produce an empty image")]
    DegenerateOutput(GeometricTransform),
    #[error("invalid protocol config: {0}")]
    InvalidConfig(String),
    #[error("transform {transform:?} is outside the admissible family: {reason}")]
    InadmissibleTransform {
        transform: GeometricTransform,
        reason: String,
    },
}

/// One member of the admissible transform family.
///
/// Translation offsets are signed fractions of width/height, crop-jitter
/// values are inward fractions removed from each edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometricTransform {
    Identity,
    Translate { dx: f64, dy: f64 },
    CropJitter { left: f64, right: f64, top: f64, bottom: f64 },
    Scale { factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub k_views: u32,
    pub seed: u64,
    pub max_translate: f64,
    pub max_jitter: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub prompt_template: String,
    pub case_insensitive: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            k_views: 5,
            seed: 0,
            max_translate: 0.05,
            max_jitter: 0.03,
            scale_min: 0.9,
            scale_max: 1.1,
            prompt_template: DEFAULT_PROMPT.to_string(),
            case_insensitive: true,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::InvalidConfig(msg));
        if self.k_views < 1 {
            return bad("k_views must be at least 1".into());
        }
        if !(0.0..0.5).contains(&self.max_translate) {
            return bad(format!("max_translate {} not in [0, 0.5)", self.max_translate));
        }
        if !(0.0..0.5).contains(&self.max_jitter) {
            return bad(format!("max_jitter {} not in [0, 0.5)", self.max_jitter));
        }
        if !(self.scale_min > 0.0 && self.scale_min <= 1.0 && self.scale_max >= 1.0 && self.scale_max.is_finite()) {
            return bad(format!(
                "scale range [{}, {}] must satisfy 0 < min <= 1 <= max",
                self.scale_min, self.scale_max
            ));
        }
        Ok(())
    }

    /// Checks that `t` lies inside this config's admissible family.
    pub fn admits(&self, t: &GeometricTransform) -> Result<(), ProtocolError> {
        let reject = |reason: String| {
            Err(ProtocolError::InadmissibleTransform {
                transform: *t,
                reason,
            })
        };
        match *t {
            GeometricTransform::Identity => Ok(()),
            GeometricTransform::Translate { dx, dy } => {
                if dx.abs() <= self.max_translate && dy.abs() <= self.max_translate {
                    Ok(())
                } else {
                    reject(format!("|dx|,|dy| must be <= {}", self.max_translate))
                }
            }
            GeometricTransform::CropJitter { left, right, top, bottom } => {
                if [left, right, top, bottom]
                    .iter()
                    .all(|v| (0.0..=self.max_jitter).contains(v))
                {
                    Ok(())
                } else {
                    reject(format!("jitter fractions must lie in [0, {}]", self.max_jitter))
                }
            }
            GeometricTransform::Scale { factor } => {
                if (self.scale_min..=self.scale_max).contains(&factor) {
                    Ok(())
                } else {
                    reject(format!("factor must lie in [{}, {}]", self.scale_min, self.scale_max))
                }
            }
        }
    }
}

/// A queried view. `index` is 1-based; index 1 is the untouched anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub index: u32,
    pub image: CropImage,
    pub transform: GeometricTransform,
}

fn round_px(fraction: f64, extent: u32) -> i64 {
    (fraction * extent as f64).round() as i64
}

/// Samples `img` at integer coordinates with edge replication.
fn sample_clamped(img: &CropImage, x: i64, y: i64, out: &mut Vec<u8>) {
    let cx = x.clamp(0, img.width() as i64 - 1) as u32;
    let cy = y.clamp(0, img.height() as i64 - 1) as u32;
    out.extend_from_slice(img.pixel(cx, cy));
}

/// Bilinear resize of the `src_w x src_h` window at `(x0, y0)` to `dst_w x dst_h`,
/// using pixel-center alignment. Same-size resizes of the full image are exact copies.
fn resize_bilinear(
    img: &CropImage,
    x0: u32,
    y0: u32,
    src_w: u32,
    src_h: u32,
    dst_w: u32,
    dst_h: u32,
) -> Vec<u8> {
    let c = img.channels().count();
    let mut out = Vec::with_capacity(dst_w as usize * dst_h as usize * c);
    let sx = src_w as f64 / dst_w as f64;
    let sy = src_h as f64 / dst_h as f64;
    let max_x = (src_w - 1) as f64;
    let max_y = (src_h - 1) as f64;
    for y in 0..dst_h {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y_lo = fy.floor() as u32;
        let y_hi = (y_lo + 1).min(src_h - 1);
        let wy = fy - y_lo as f64;
        for x in 0..dst_w {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x_lo = fx.floor() as u32;
            let x_hi = (x_lo + 1).min(src_w - 1);
            let wx = fx - x_lo as f64;
            let p00 = img.pixel(x0 + x_lo, y0 + y_lo);
            let p10 = img.pixel(x0 + x_hi, y0 + y_lo);
            let p01 = img.pixel(x0 + x_lo, y0 + y_hi);
            let p11 = img.pixel(x0 + x_hi, y0 + y_hi);
            for ch in 0..c {
                let top = p00[ch] as f64 * (1.0 - wx) + p10[ch] as f64 * wx;
                let bottom = p01[ch] as f64 * (1.0 - wx) + p11[ch] as f64 * wx;
                let v = top * (1.0 - wy) + bottom * wy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

fn rebuild(img: &CropImage, pixels: Vec<u8>) -> CropImage {
    CropImage::new(pixels, img.width(), img.height(), img.channels(), img.source_id())
        .expect("transforms preserve dimensions")
}

/// Applies one geometric transform. The output always has the input's dimensions.
pub fn apply_transform(img: &CropImage, t: &GeometricTransform) -> Result<CropImage, ProtocolError> {
    let (w, h) = (img.width(), img.height());
    match *t {
        GeometricTransform::Identity => Ok(img.clone()),
        GeometricTransform::Translate { dx, dy } => {
            let (sx, sy) = (round_px(dx, w), round_px(dy, h));
            let mut out = Vec::with_capacity(img.pixels().len());
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    sample_clamped(img, x - sx, y - sy, &mut out);
                }
            }
            Ok(rebuild(img, out))
        }
        GeometricTransform::CropJitter { left, right, top, bottom } => {
            let l = round_px(left, w);
            let r = round_px(right, w);
            let tp = round_px(top, h);
            let b = round_px(bottom, h);
            let cw = w as i64 - l - r;
            let ch = h as i64 - tp - b;
            if cw < 1 || ch < 1 || l < 0 || r < 0 || tp < 0 || b < 0 {
                return Err(ProtocolError::DegenerateOutput(*t));
            }
            let out = resize_bilinear(img, l as u32, tp as u32, cw as u32, ch as u32, w, h);
            Ok(rebuild(img, out))
        }
        GeometricTransform::Scale { factor } => {
            let nw = (w as f64 * factor).round();
            let nh = (h as f64 * factor).round();
            if !(nw >= 1.0 && nh >= 1.0) {
                return Err(ProtocolError::DegenerateOutput(*t));
            }
            let (nw, nh) = (nw as u32, nh as u32);
            if nw == w && nh == h {
                return Ok(img.clone());
            }
            let scaled = CropImage::new(
                resize_bilinear(img, 0, 0, w, h, nw, nh),
                nw,
                nh,
                img.channels(),
                img.source_id(),
            )
            .expect("resize output matches its dimensions");
            // Center-pad (edge replication) or center-crop back to w x h.
            let off_x = (nw as i64 - w as i64).div_euclid(2);
            let off_y = (nh as i64 - h as i64).div_euclid(2);
            let mut out = Vec::with_capacity(img.pixels().len());
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    sample_clamped(&scaled, x + off_x, y + off_y, &mut out);
                }
            }
            Ok(rebuild(img, out))
        }
    }
}

/// Draws the transform for non-anchor view `index` (>= 2).
pub fn sample_transform(cfg: &ProtocolConfig, source_id: &str, index: u32) -> GeometricTransform {
    let mut rng = KeyedRng::new(VIEW_DOMAIN, cfg.seed, source_id, index);
    match rng.below(3) {
        0 => GeometricTransform::Translate {
            dx: rng.uniform(-cfg.max_translate, cfg.max_translate),
            dy: rng.uniform(-cfg.max_translate, cfg.max_translate),
        },
        1 => GeometricTransform::CropJitter {
            left: rng.uniform(0.0, cfg.max_jitter),
            right: rng.uniform(0.0, cfg.max_jitter),
            top: rng.uniform(0.0, cfg.max_jitter),
            bottom: rng.uniform(0.0, cfg.max_jitter),
        },
        _ => GeometricTransform::Scale {
            factor: rng.uniform(cfg.scale_min, cfg.scale_max),
        },
    }
}

/// The transform list for one crop: Identity first, then K-1 sampled transforms.
///
/// View `k`'s transform depends only on `(seed, source_id, k)`, so the first
/// K views of a larger budget coincide with the views of a smaller one.
pub fn plan_transforms(cfg: &ProtocolConfig, source_id: &str) -> Vec<GeometricTransform> {
    std::iter::once(GeometricTransform::Identity)
        .chain((2..=cfg.k_views).map(|k| sample_transform(cfg, source_id, k)))
        .collect()
}

/// Expands `img` into exactly `cfg.k_views` views.
pub fn make_views(img: &CropImage, cfg: &ProtocolConfig) -> Result<Vec<View>, ProtocolError> {
    cfg.validate()?;
    plan_transforms(cfg, img.source_id())
        .into_iter()
        .enumerate()
        .map(|(i, transform)| {
            Ok(View {
                index: i as u32 + 1,
                image: apply_transform(img, &transform)?,
                transform,
            })
        })
        .collect()
}
