//! Word-crop images, the unit of OCR input.

use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("unsupported image format for {0} (only PNG and JPEG are accepted)")]
    UnsupportedFormat(String),
    #[error("failed to decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Pixel layout of a [`CropImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channels {
    Gray,
    Rgb,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray => 1,
            Channels::Rgb => 3,
        }
    }
}

/// A single-word crop: 8-bit grayscale or 24-bit RGB, row-major, tightly packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CropImage {
    pixels: Vec<u8>,
    width: u32,
    height: u32,
    channels: Channels,
    source_id: String,
}

impl CropImage {
    pub fn new(
        pixels: Vec<u8>,
        width: u32,
        height: u32,
        channels: Channels,
        source_id: impl Into<String>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let expected = width as usize * height as usize * channels.count();
        if pixels.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            pixels,
            width,
            height,
            channels,
            source_id: source_id.into(),
        })
    }

    /// Builds a grayscale crop where every pixel is `value`.
    pub fn filled_gray(width: u32, height: u32, value: u8, source_id: impl Into<String>) -> Result<Self, ImageError> {
        Self::new(
            vec![value; width as usize * height as usize],
            width,
            height,
            Channels::Gray,
            source_id,
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Same pixels under a different origin id.
    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    /// Channel values of pixel `(x, y)`.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels.count();
        let start = (y as usize * self.width as usize + x as usize) * c;
        &self.pixels[start..start + c]
    }

    /// Luma plane. RGB uses integer BT.601 weights.
    pub fn to_gray(&self) -> Vec<u8> {
        match self.channels {
            Channels::Gray => self.pixels.clone(),
            Channels::Rgb => self
                .pixels
                .chunks_exact(3)
                .map(|p| {
                    let luma = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                    ((luma + 500) / 1000) as u8
                })
                .collect(),
        }
    }

    /// SHA-256 over dimensions, layout, and pixel bytes. The source id is not hashed.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.width.to_le_bytes());
        hasher.update(self.height.to_le_bytes());
        hasher.update([self.channels.count() as u8]);
        hasher.update(&self.pixels);
        hasher.finalize().into()
    }

    /// Loads a PNG or JPEG file. Images with alpha or 16-bit depth are flattened
    /// to 8-bit RGB, single-channel images stay grayscale.
    pub fn load(path: &Path, source_id: impl Into<String>) -> Result<Self, ImageError> {
        let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let format = image::guess_format(&bytes)?;
        if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
            return Err(ImageError::UnsupportedFormat(path.display().to_string()));
        }
        let decoded = image::load_from_memory_with_format(&bytes, format)?;
        Ok(Self::from_dynamic(decoded, source_id))
    }

    pub fn from_dynamic(img: image::DynamicImage, source_id: impl Into<String>) -> Self {
        use image::DynamicImage::*;
        let (width, height) = (img.width(), img.height());
        let (pixels, channels) = match img {
            ImageLuma8(g) => (g.into_raw(), Channels::Gray),
            other if other.color().channel_count() <= 2 => (other.to_luma8().into_raw(), Channels::Gray),
            other => (other.to_rgb8().into_raw(), Channels::Rgb),
        };
        Self {
            pixels,
            width,
            height,
            channels,
            source_id: source_id.into(),
        }
    }

    /// Lossless PNG encoding of the crop.
    pub fn to_png(&self) -> Vec<u8> {
        let color = match self.channels {
            Channels::Gray => image::ExtendedColorType::L8,
            Channels::Rgb => image::ExtendedColorType::Rgb8,
        };
        let mut out = Cursor::new(Vec::new());
        image::write_buffer_with_format(
            &mut out,
            &self.pixels,
            self.width,
            self.height,
            color,
            image::ImageFormat::Png,
        )
        .expect("in-memory PNG encoding of a validated buffer cannot fail");
        out.into_inner()
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        std::fs::write(path, self.to_png()).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
