//! Pseudo-BRDF synthesis: promote a bare albedo image to a full material set
//! with statistically plausible scalar maps.
//!
//! Roughness is drawn from the fitted fabric distribution N(0.708, 0.193^2)
//! and clamped to [0, 1]; metallic is a small non-negative jitter
//! max(U(-0.05, 0.05), 0), so about half of all materials are exactly
//! dielectric; the normal map stays flat.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pbr::MaterialSet;

pub const ROUGHNESS_MEAN: f64 = 0.708;
pub const ROUGHNESS_STD: f64 = 0.193;
pub const METALLIC_JITTER: f32 = 0.05;

/// One draw from the pseudo-BRDF scalar distributions, keeping the raw
/// (pre-clamp) roughness so its statistics can be checked directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoResponse {
    /// Gaussian roughness sample before the [0, 1] clamp.
    pub roughness_raw: f64,
    pub roughness: f32,
    pub metallic: f32,
}

/// Draws exactly two values from `rng`: roughness first, then metallic.
pub fn sample_pseudo_response(rng: &mut impl Rng) -> PseudoResponse {
    let normal = Normal::new(ROUGHNESS_MEAN, ROUGHNESS_STD).expect("fixed parameters are valid");
    let roughness_raw = normal.sample(rng);
    let metallic = rng.random_range(-METALLIC_JITTER..METALLIC_JITTER).max(0.0);
    PseudoResponse { roughness_raw, roughness: (roughness_raw as f32).clamp(0.0, 1.0), metallic }
}

/// Build a pseudo-BRDF material around `albedo`. Draws exactly two values
/// from `rng` (roughness first, then metallic), so equal seeds give equal
/// materials.
pub fn make_pseudo_brdf(albedo: Image, rng: &mut impl Rng) -> Result<MaterialSet> {
    if albedo.channels() != 3 {
        return Err(Error::invalid(format!(
            "pseudo-BRDF albedo must have 3 channels, got {}",
            albedo.channels()
        )));
    }
    if albedo.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("pseudo-BRDF albedo must lie in [0, 1]"));
    }
    let res = albedo.width();
    let resp = sample_pseudo_response(rng);
    MaterialSet::new(
        albedo,
        MaterialSet::flat_normal_map(res),
        MaterialSet::constant_map(res, resp.roughness),
        MaterialSet::constant_map(res, resp.metallic),
    )
}
