//! Equirectangular environment maps and the four procedural grayscale
//! presets used for dataset forging (`constant`, `gradient`, `two-lobe`,
//! `window`).
//!
//! Directions use a z-up convention: the polar angle `theta` is measured from
//! +z and the azimuth `phi` from +x toward +y. A map of height `H` must be
//! `2H` wide; rows span `theta` in [0, pi] top to bottom and columns span
//! `phi` in [0, 2pi).

use std::f32::consts::PI;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;

pub const ENV_PRESETS: [&str; 4] = ["constant", "gradient", "two-lobe", "window"];

#[derive(Debug, Clone)]
pub struct EnvironmentMap {
    img: Image,
}

impl EnvironmentMap {
    /// Wrap an RGB image; width must be exactly twice the height.
    pub fn new(img: Image) -> Result<EnvironmentMap> {
        if img.width() != 2 * img.height() || img.height() == 0 {
            return Err(Error::invalid(format!(
                "environment map must be 2H x H, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        if img.channels() != 3 {
            return Err(Error::invalid(format!(
                "environment map must have 3 channels, got {}",
                img.channels()
            )));
        }
        Ok(EnvironmentMap { img })
    }

    pub fn image(&self) -> &Image {
        &self.img
    }

    /// Unit direction to equirectangular angles `(theta, phi)`,
    /// `theta` in [0, pi], `phi` in [0, 2pi).
    pub fn dir_to_angles(dir: Vec3) -> (f32, f32) {
        let theta = dir.z.clamp(-1.0, 1.0).acos();
        let mut phi = dir.y.atan2(dir.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        (theta, phi)
    }

    pub fn angles_to_dir(theta: f32, phi: f32) -> Vec3 {
        let st = theta.sin();
        Vec3::new(st * phi.cos(), st * phi.sin(), theta.cos())
    }

    /// Bilinear radiance lookup: wrap addressing in azimuth, clamp at the
    /// poles.
    pub fn radiance(&self, dir: Vec3) -> Vec3 {
        let (theta, phi) = Self::dir_to_angles(dir);
        let w = self.img.width();
        let h = self.img.height();
        let x = phi / (2.0 * PI) * w as f32 - 0.5;
        let y = theta / PI * h as f32 - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let xi0 = (x0 as i64).rem_euclid(w as i64) as usize;
        let xi1 = (x0 as i64 + 1).rem_euclid(w as i64) as usize;
        let yi0 = (y0.max(0.0) as usize).min(h - 1);
        let yi1 = ((y0 + 1.0).max(0.0) as usize).min(h - 1);
        let mut out = [0.0f32; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let v00 = self.img.get(xi0, yi0, c);
            let v10 = self.img.get(xi1, yi0, c);
            let v01 = self.img.get(xi0, yi1, c);
            let v11 = self.img.get(xi1, yi1, c);
            let top = v00 + (v10 - v00) * fx;
            let bot = v01 + (v11 - v01) * fx;
            *o = top + (bot - top) * fy;
        }
        Vec3::new(out[0], out[1], out[2])
    }

    /// Procedural grayscale preset by name; see [`ENV_PRESETS`].
    pub fn preset(name: &str, height: usize) -> Result<EnvironmentMap> {
        if height == 0 {
            return Err(Error::invalid("environment height must be positive"));
        }
        let w = 2 * height;
        let gray = |f: &dyn Fn(f32, f32) -> f32| -> Image {
            // f(theta, phi) -> radiance, evaluated at texel centers.
            Image::from_fn(w, height, 3, |x, y| {
                let theta = (y as f32 + 0.5) / height as f32 * PI;
                let phi = (x as f32 + 0.5) / w as f32 * 2.0 * PI;
                let v = f(theta, phi);
                [v, v, v, 0.0]
            })
        };
        let img = match name {
            "constant" => gray(&|_, _| 1.0),
            "gradient" => gray(&|theta, _| {
                // Bright zenith fading to a dim floor.
                let t = theta / PI;
                1.0 + (0.1 - 1.0) * t
            }),
            "two-lobe" => gray(&|theta, phi| {
                let dir = Self::angles_to_dir(theta, phi);
                let d1 = Vec3::new(0.5, 0.3, 0.81).normalized();
                let d2 = Vec3::new(-0.6, -0.2, 0.45).normalized();
                let lobe = |d: Vec3, sharp: f32, gain: f32| gain * ((dir.dot(d) - 1.0) * sharp).exp();
                0.05 + lobe(d1, 8.0, 1.8) + lobe(d2, 16.0, 1.2)
            }),
            "window" => gray(&|theta, phi| {
                let in_window = (0.25 * PI..0.55 * PI).contains(&theta)
                    && (0.15 * 2.0 * PI..0.3 * 2.0 * PI).contains(&phi);
                if in_window {
                    4.0
                } else {
                    0.05
                }
            }),
            other => {
                return Err(Error::invalid(format!(
                    "unknown environment preset {other:?}; valid presets: {}",
                    ENV_PRESETS.join(", ")
                )))
            }
        };
        EnvironmentMap::new(img)
    }
}
