//! CPU image buffers and file I/O.
//!
//! [`Image`] stores interleaved `f32` samples in linear light, row-major with
//! the origin at the top-left. Display output goes through 8-bit PNG with an
//! sRGB transfer ([`png`]); linear data round-trips losslessly through PFM
//! ([`pfm`]).

pub mod pfm;
pub mod png;

pub use pfm::{read_pfm, write_pfm};
pub use png::{read_mask_png, read_png, write_display_png, write_mask_png, Transfer};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Interleaved row-major float image; 1 (gray), 3 (RGB), or 4 (RGBA) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Image {
        assert!(
            matches!(channels, 1 | 3 | 4),
            "unsupported channel count {channels}"
        );
        Image { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Image> {
        if data.len() != width * height * channels {
            return Err(Error::Image(format!(
                "buffer length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if !matches!(channels, 1 | 3 | 4) {
            return Err(Error::Image(format!("unsupported channel count {channels}")));
        }
        Ok(Image { width, height, channels, data })
    }

    /// Fill from a per-pixel closure returning `channels` values.
    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize) -> [f32; 4]) -> Image {
        let mut img = Image::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                for c in 0..channels {
                    img.set(x, y, c, v[c]);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    /// First three channels as a vector (gray images broadcast).
    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> Vec3 {
        match self.channels {
            1 => Vec3::splat(self.get(x, y, 0)),
            _ => Vec3::new(self.get(x, y, 0), self.get(x, y, 1), self.get(x, y, 2)),
        }
    }

    pub fn set_rgb(&mut self, x: usize, y: usize, v: Vec3) {
        assert!(self.channels >= 3);
        self.set(x, y, 0, v.x);
        self.set(x, y, 1, v.y);
        self.set(x, y, 2, v.z);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bilinear sample with wrap addressing. `(u, v)` are texture coordinates
    /// where the full image spans [0, 1) on each axis and texel centers sit at
    /// `(i + 0.5) / size`. Returns one value per channel.
    pub fn sample_bilinear_wrap(&self, u: f32, v: f32) -> [f32; 4] {
        let x = u * self.width as f32 - 0.5;
        let y = v * self.height as f32 - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let w = self.width as i64;
        let h = self.height as i64;
        let xi0 = (x0 as i64).rem_euclid(w) as usize;
        let xi1 = (x0 as i64 + 1).rem_euclid(w) as usize;
        let yi0 = (y0 as i64).rem_euclid(h) as usize;
        let yi1 = (y0 as i64 + 1).rem_euclid(h) as usize;
        let mut out = [0.0f32; 4];
        for c in 0..self.channels {
            let v00 = self.get(xi0, yi0, c);
            let v10 = self.get(xi1, yi0, c);
            let v01 = self.get(xi0, yi1, c);
            let v11 = self.get(xi1, yi1, c);
            let top = v00 + (v10 - v00) * fx;
            let bot = v01 + (v11 - v01) * fx;
            out[c] = top + (bot - top) * fy;
        }
        out
    }

    /// Bilinear sample with clamp-to-edge addressing at continuous pixel
    /// coordinates (texel centers at integer + 0.5).
    pub fn sample_bilinear_clamp(&self, px: f32, py: f32) -> [f32; 4] {
        let x = px - 0.5;
        let y = py - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let cl = |i: f32, hi: usize| -> usize { (i.max(0.0) as usize).min(hi - 1) };
        let xi0 = cl(x0, self.width);
        let xi1 = cl(x0 + 1.0, self.width);
        let yi0 = cl(y0, self.height);
        let yi1 = cl(y0 + 1.0, self.height);
        let mut out = [0.0f32; 4];
        for c in 0..self.channels {
            let v00 = self.get(xi0, yi0, c);
            let v10 = self.get(xi1, yi0, c);
            let v01 = self.get(xi0, yi1, c);
            let v11 = self.get(xi1, yi1, c);
            let top = v00 + (v10 - v00) * fx;
            let bot = v01 + (v11 - v01) * fx;
            out[c] = top + (bot - top) * fy;
        }
        out
    }
}

/// sRGB electro-optical transfer (encoded -> linear), piecewise IEC 61966-2-1.
pub fn srgb_to_linear(c: f32) -> f32 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse sRGB transfer (linear -> encoded); input clamped to [0, 1].
pub fn linear_to_srgb(c: f32) -> f32 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}
