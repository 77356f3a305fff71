//! 8-bit RGB rasters and binary PPM (`P6`) files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    /// Row-major, interleaved RGB.
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!("image extents must be positive, got {width}×{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Input(format!(
                "{width}×{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::new(width, height, rgb.repeat(width * height)).expect("positive extents")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Fills the pixel rectangle `[x0, x1) × [y0, y1)`, clipped to the image.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, rgb: [u8; 3]) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set_pixel(x, y, rgb);
            }
        }
    }

    /// `3×h×w` tensor with values scaled to [0, 1].
    pub fn to_chw(&self) -> Tensor {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0f32; 3 * w * h];
        for (p, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * w * h + p] = px[c] as f32 / 255.0;
            }
        }
        Tensor::new([3, h, w], out).expect("consistent extents")
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: &str| Error::format("PPM", reason);
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // Skip whitespace and `#` comments between header fields.
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
        }
        if fields[0] != "P6" {
            return Err(bad(&format!("expected magic P6, found {}", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("`{s}` is not a number")));
        let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad(&format!("only maxval 255 is supported, found {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the pixels.
        pos += 1;
        let need = w.checked_mul(h).and_then(|n| n.checked_mul(3)).ok_or_else(|| bad("extents overflow"))?;
        let pixels = bytes.get(pos..).unwrap_or(&[]);
        if pixels.len() != need {
            return Err(bad(&format!("expected {need} pixel bytes, found {}", pixels.len())));
        }
        Self::new(w, h, pixels.to_vec())
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(Error::io(format!("reading {}", path.display())))?;
        Self::from_ppm(&bytes).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(path.display().to_string(), reason),
            other => other,
        })
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm()).map_err(Error::io(format!("writing {}", path.display())))
    }
}

/// Normalized head rectangle, `0 ≤ x0 < x1 ≤ 1` and `0 ≤ y0 < y1 ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl HeadBox {
    pub const FULL: HeadBox = HeadBox {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let b = Self { x0, y0, x1, y1 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let coords = [self.x0, self.y0, self.x1, self.y1];
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Input(format!("head box {coords:?} has coordinates outside [0, 1]")));
        }
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Err(Error::Input(format!("head box {coords:?} is degenerate")));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    /// Area of the intersection with another rectangle.
    pub fn overlap(&self, other: &HeadBox) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_with_comment() {
        let mut img = RgbImage::filled(3, 2, [10, 20, 30]);
        img.set_pixel(2, 1, [255, 0, 7]);
        assert_eq!(RgbImage::from_ppm(&img.to_ppm()).unwrap(), img);
        let mut commented = b"P6\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(img.data());
        assert_eq!(RgbImage::from_ppm(&commented).unwrap(), img);
    }

    #[test]
    fn truncated_ppm_is_a_format_error() {
        let bytes = RgbImage::filled(4, 4, [1, 2, 3]).to_ppm();
        assert!(matches!(RgbImage::from_ppm(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        assert!(matches!(RgbImage::from_ppm(b"P3\n1 1\n255\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn chw_layout() {
        let mut img = RgbImage::filled(2, 1, [0, 0, 0]);
        img.set_pixel(1, 0, [255, 51, 0]);
        let t = img.to_chw();
        assert_eq!(t.shape(), &[3, 1, 2]);
        assert_eq!(t.data(), &[0.0, 1.0, 0.0, 0.2, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(HeadBox::new(0.5, 0.1, 0.5, 0.9).is_err());
        assert!(HeadBox::new(-0.1, 0.1, 0.5, 0.9).is_err());
        assert!(HeadBox::new(0.1, 0.1, 0.5, 0.9).is_ok());
    }
}
