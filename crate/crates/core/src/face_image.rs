//! Owned 8-bit RGB image buffer plus bilinear sampling.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major RGB image, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

/// How to treat sample positions that fall outside the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Border {
    /// Clamp to the nearest edge pixel.
    Clamp,
    /// Use a constant color for anything outside `[0, w-1] × [0, h-1]`.
    Constant([u8; 3]),
}

impl FaceImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain(format!("image dimensions {width}x{height} must be positive")));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::Domain(format!(
                "pixel buffer has {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(FaceImage { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Result<Self> {
        let pixels = color
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        FaceImage::new(width, height, pixels)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        FaceImage::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Bilinear sample at a continuous position, pixel centers at integer coordinates.
    pub fn sample_bilinear(&self, x: f64, y: f64, border: Border) -> [f64; 3] {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let (x, y) = match border {
            Border::Clamp => (x.clamp(0.0, max_x), y.clamp(0.0, max_y)),
            Border::Constant(c) => {
                if !(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y) {
                    return c.map(f64::from);
                }
                (x, y)
            }
        };
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width as usize - 1);
        let y1 = (y0 + 1).min(self.height as usize - 1);
        let w = self.width as usize;
        let at = |xx: usize, yy: usize, c: usize| f64::from(self.pixels[(yy * w + xx) * 3 + c]);
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
            let bottom = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
            *o = top * (1.0 - fy) + bottom * fy;
        }
        out
    }

    /// Left-right flip about the vertical midline.
    pub fn flip_horizontal(&self) -> FaceImage {
        let w = self.width as usize;
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(w * 3) {
            for px in row.chunks_exact(3).rev() {
                pixels.extend_from_slice(px);
            }
        }
        FaceImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Largest per-channel absolute difference. Panics on dimension mismatch.
    pub fn max_abs_diff(&self, other: &FaceImage) -> u8 {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "image dimensions differ"
        );
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        FaceImage::new(rgb.width(), rgb.height(), rgb.into_raw())
    }

    /// Encodes to the format implied by the path extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// PNG-encoded bytes.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        self.encode(image::ImageFormat::Png)
    }

    pub fn encode(&self, format: image::ImageFormat) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        image::write_buffer_with_format(
            &mut out,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            format,
        )
        .map_err(|source| Error::Image {
            path: "<memory>".into(),
            source,
        })?;
        Ok(out.into_inner())
    }
}

/// Rounds a floating-point channel value to 8 bits.
pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
