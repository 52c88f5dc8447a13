//! Material maps and physically-based shading primitives.
//!
//! A [`MaterialSet`] bundles albedo, tangent-space normal, roughness, and
//! metallic maps at one square resolution. [`sample_material`] performs
//! wrap-addressed bilinear lookup with a tiling scale, and the BRDF/shading
//! entry points live in [`brdf`] and [`shade`].

pub mod brdf;
pub mod shade;

pub use brdf::{eval_brdf, eval_brdf_lobes, ggx_ndf, BrdfLobes};
pub use shade::{shade, Lighting, PointLight, ShadeOpts};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::{fract, Vec3};

/// Maximum allowed deviation from unit length for decoded normal texels.
pub const NORMAL_UNIT_TOL: f32 = 1e-3;

/// Maximum allowed deviation from orthonormality in a shading frame.
pub const FRAME_ORTHO_TOL: f32 = 1e-5;

/// Albedo, normal, roughness, and metallic maps at a shared square resolution.
///
/// Albedo and normal are 3-channel; roughness and metallic single-channel.
/// Albedo, roughness, and metallic texels lie in [0, 1]; normal texels decode
/// (via `v = 2c - 1`) to unit vectors within [`NORMAL_UNIT_TOL`].
#[derive(Debug, Clone)]
pub struct MaterialSet {
    albedo: Image,
    normal: Image,
    roughness: Image,
    metallic: Image,
    resolution: usize,
}

impl MaterialSet {
    pub fn new(albedo: Image, normal: Image, roughness: Image, metallic: Image) -> Result<MaterialSet> {
        let res = albedo.width();
        for (name, img, ch) in [
            ("albedo", &albedo, 3),
            ("normal", &normal, 3),
            ("roughness", &roughness, 1),
            ("metallic", &metallic, 1),
        ] {
            if img.width() != res || img.height() != res {
                return Err(Error::invalid(format!(
                    "{name} map is {}x{}, expected square {res}x{res}",
                    img.width(),
                    img.height()
                )));
            }
            if img.channels() != ch {
                return Err(Error::invalid(format!(
                    "{name} map has {} channels, expected {ch}",
                    img.channels()
                )));
            }
        }
        for (name, img) in [("albedo", &albedo), ("roughness", &roughness), ("metallic", &metallic)] {
            if img.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::invalid(format!("{name} map has values outside [0, 1]")));
            }
        }
        for (i, px) in normal.data().chunks(3).enumerate() {
            let n = Vec3::new(2.0 * px[0] - 1.0, 2.0 * px[1] - 1.0, 2.0 * px[2] - 1.0);
            if n.unit_deviation() > NORMAL_UNIT_TOL {
                return Err(Error::invalid(format!(
                    "normal map texel {i} decodes to non-unit vector (|n| = {})",
                    n.length()
                )));
            }
        }
        Ok(MaterialSet { albedo, normal, roughness, metallic, resolution: res })
    }

    /// Constant-value single-channel map.
    pub fn constant_map(resolution: usize, value: f32) -> Image {
        Image::from_vec(resolution, resolution, 1, vec![value; resolution * resolution]).unwrap()
    }

    /// Normal map encoding the flat tangent-space normal (0, 0, 1).
    pub fn flat_normal_map(resolution: usize) -> Image {
        Image::from_fn(resolution, resolution, 3, |_, _| [0.5, 0.5, 1.0, 0.0])
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn albedo(&self) -> &Image {
        &self.albedo
    }

    pub fn normal(&self) -> &Image {
        &self.normal
    }

    pub fn roughness(&self) -> &Image {
        &self.roughness
    }

    pub fn metallic(&self) -> &Image {
        &self.metallic
    }
}

/// Point-sampled material values. The normal is the decoded tangent-space
/// shading normal (renormalized after interpolation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSample {
    pub albedo: Vec3,
    pub normal: Vec3,
    pub roughness: f32,
    pub metallic: f32,
}

impl MaterialSample {
    /// Sample with an explicit flat normal; convenient for BRDF-level tests.
    pub fn flat(albedo: Vec3, roughness: f32, metallic: f32) -> MaterialSample {
        MaterialSample { albedo, normal: Vec3::Z, roughness, metallic }
    }
}

/// Surface point carrying an orthonormal tangent frame and UV coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ShadingPoint {
    pub position: Vec3,
    pub normal: Vec3,
    pub tangent: Vec3,
    pub bitangent: Vec3,
    pub uv: (f32, f32),
}

impl ShadingPoint {
    /// Validates that (tangent, bitangent, normal) is orthonormal within
    /// [`FRAME_ORTHO_TOL`].
    pub fn new(position: Vec3, normal: Vec3, tangent: Vec3, bitangent: Vec3, uv: (f32, f32)) -> Result<ShadingPoint> {
        let pt = ShadingPoint { position, normal, tangent, bitangent, uv };
        pt.validate_frame()?;
        Ok(pt)
    }

    pub fn validate_frame(&self) -> Result<()> {
        let checks = [
            self.normal.unit_deviation(),
            self.tangent.unit_deviation(),
            self.bitangent.unit_deviation(),
            self.normal.dot(self.tangent).abs(),
            self.normal.dot(self.bitangent).abs(),
            self.tangent.dot(self.bitangent).abs(),
        ];
        if checks.iter().any(|&d| !(d <= FRAME_ORTHO_TOL)) {
            return Err(Error::invalid(format!(
                "shading frame is not orthonormal within {FRAME_ORTHO_TOL:e} (deviations {checks:?})"
            )));
        }
        Ok(())
    }

    /// Map a tangent-space vector into world space.
    pub fn to_world(&self, v: Vec3) -> Vec3 {
        self.tangent * v.x + self.bitangent * v.y + self.normal * v.z
    }
}

/// Bilinear wrap-addressed material lookup at `uv` scaled by `tiling_scale`.
///
/// The lookup coordinate is `frac(uv * tiling_scale)`; the decoded normal is
/// renormalized after interpolation. Roughness and metallic are clamped to
/// [0, 1] (interpolation of in-range maps cannot leave the range, but the
/// clamp keeps the contract explicit).
pub fn sample_material(mat: &MaterialSet, uv: (f32, f32), tiling_scale: f32) -> Result<MaterialSample> {
    if !uv.0.is_finite() || !uv.1.is_finite() {
        return Err(Error::invalid(format!("non-finite uv ({}, {})", uv.0, uv.1)));
    }
    if !(tiling_scale.is_finite() && tiling_scale > 0.0) {
        return Err(Error::invalid(format!("tiling scale must be positive, got {tiling_scale}")));
    }
    let u = fract(uv.0 * tiling_scale);
    let v = fract(uv.1 * tiling_scale);
    let a = mat.albedo.sample_bilinear_wrap(u, v);
    let n = mat.normal.sample_bilinear_wrap(u, v);
    let r = mat.roughness.sample_bilinear_wrap(u, v)[0];
    let m = mat.metallic.sample_bilinear_wrap(u, v)[0];
    let normal = Vec3::new(2.0 * n[0] - 1.0, 2.0 * n[1] - 1.0, 2.0 * n[2] - 1.0).normalized();
    Ok(MaterialSample {
        albedo: Vec3::new(a[0], a[1], a[2]),
        normal,
        roughness: r.clamp(0.0, 1.0),
        metallic: m.clamp(0.0, 1.0),
    })
}
