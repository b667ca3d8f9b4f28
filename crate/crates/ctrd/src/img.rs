//! In-memory images and binary masks with PNG I/O.
//!
//! Pixels are real-valued RGB in [0,1] everywhere inside the engine;
//! quantization to 8-bit happens only when crossing a file boundary.

use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Rgb;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuf {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl ImageBuf {
    pub fn new(width: usize, height: usize) -> Self {
        ImageBuf {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        ImageBuf {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Rgb {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, c: Rgb) {
        self.pixels[row * self.width + col] = c;
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut out = image::RgbImage::new(self.width as u32, self.height as u32);
        for (i, p) in self.pixels.iter().enumerate() {
            let x = (i % self.width) as u32;
            let y = (i / self.width) as u32;
            out.put_pixel(x, y, image::Rgb(p.map(quantize)));
        }
        out.save(path)
            .map_err(|e| Error::format(path, format!("png write failed: {e}")))
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::format(path, format!("png read failed: {e}")))?
            .into_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut buf = ImageBuf::new(w, h);
        for (x, y, p) in img.enumerate_pixels() {
            buf.set(y as usize, x as usize, [
                p.0[0] as f64 / 255.0,
                p.0[1] as f64 / 255.0,
                p.0[2] as f64 / 255.0,
            ]);
        }
        Ok(buf)
    }

    /// Quantizes in memory exactly as PNG write/read would.
    pub fn quantized(&self) -> ImageBuf {
        ImageBuf {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| p.map(|v| quantize(v) as f64 / 255.0))
                .collect(),
        }
    }

    /// Stored size of the 8-bit RGB pixel payload.
    pub fn byte_size(&self) -> usize {
        self.width * self.height * 3
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary transient mask; `true` marks pixels excluded from supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskBuf {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl MaskBuf {
    pub fn new(width: usize, height: usize) -> Self {
        MaskBuf {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&v| v)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut out = image::GrayImage::new(self.width as u32, self.height as u32);
        for (i, &m) in self.data.iter().enumerate() {
            let x = (i % self.width) as u32;
            let y = (i / self.width) as u32;
            out.put_pixel(x, y, image::Luma([if m { 255 } else { 0 }]));
        }
        out.save(path)
            .map_err(|e| Error::format(path, format!("png write failed: {e}")))
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::format(path, format!("png read failed: {e}")))?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut mask = MaskBuf::new(w, h);
        for (x, y, p) in img.enumerate_pixels() {
            mask.set(y as usize, x as usize, p.0[0] > 127);
        }
        Ok(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_preserves_8bit_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = ImageBuf::new(5, 4);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = [
                (i as f64 * 0.05) % 1.0,
                (i as f64 * 0.11) % 1.0,
                1.0 - (i as f64 * 0.03) % 1.0,
            ];
        }
        let path = dir.path().join("x.png");
        img.save_png(&path).unwrap();
        let back = ImageBuf::load_png(&path).unwrap();
        assert_eq!(back, img.quantized());
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = MaskBuf::new(4, 4);
        m.set(1, 2, true);
        m.set(3, 0, true);
        let path = dir.path().join("m.png");
        m.save_png(&path).unwrap();
        assert_eq!(MaskBuf::load_png(&path).unwrap(), m);
    }
}
