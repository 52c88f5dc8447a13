//! Cook–Torrance microfacet BRDF: GGX normal distribution, Schlick Fresnel,
//! and the separable Smith/Schlick-GGX geometric term, combined with an
//! unweighted Lambertian diffuse lobe:
//!
//! ```text
//! f_r = (1 - metallic) * albedo / pi + D * F * G / (4 (n.l)(n.v) + eps)
//! ```
//!
//! with `alpha = roughness^2` (perceptual-roughness remap) and
//! `F0 = lerp(0.04, albedo, metallic)`.

use crate::error::{Error, Result};
use crate::math::{lerp, Vec3};
use crate::pbr::MaterialSample;

/// Division guard in the specular denominator.
pub const EPS_DIV: f32 = 1e-7;

/// Floor applied to `alpha` inside [`eval_brdf`] so a zero-roughness map does
/// not produce a singular distribution.
pub const MIN_ALPHA: f32 = 1e-4;

/// Tolerance on |l|, |v|, |n| before directions are rejected.
pub const UNIT_TOL: f32 = 1e-3;

/// Which lobes of the BRDF to evaluate. `Diffuse` gives the pure Lambertian
/// term, which is the configuration analytic radiance oracles are written
/// against (the specular lobe never vanishes for dielectrics, because
/// `F0 = 0.04` at `metallic = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BrdfLobes {
    #[default]
    All,
    Diffuse,
    Specular,
}

/// GGX normal distribution `D(n.h, alpha)`.
///
/// `alpha` must lie in (0, 1]; `n_dot_h` is clamped below at zero.
pub fn ggx_ndf(n_dot_h: f32, alpha: f32) -> Result<f32> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("ggx alpha must be in (0, 1], got {alpha}")));
    }
    if !n_dot_h.is_finite() {
        return Err(Error::invalid(format!("non-finite n_dot_h {n_dot_h}")));
    }
    Ok(ggx_ndf_unchecked(n_dot_h.max(0.0), alpha))
}

#[inline]
fn ggx_ndf_unchecked(n_dot_h: f32, alpha: f32) -> f32 {
    let a2 = alpha * alpha;
    let t = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    a2 / (std::f32::consts::PI * t * t)
}

/// Schlick Fresnel with `F0 = lerp(0.04, albedo, metallic)`.
#[inline]
fn fresnel_schlick(cos_theta: f32, f0: Vec3) -> Vec3 {
    let c = cos_theta.clamp(0.0, 1.0);
    let k = (1.0 - c).powi(5);
    f0 + (Vec3::ONE - f0) * k
}

/// Separable Smith shadowing-masking with the Schlick-GGX kernel, `k = alpha/2`.
#[inline]
fn smith_g(n_dot_l: f32, n_dot_v: f32, alpha: f32) -> f32 {
    let k = alpha / 2.0;
    let g1 = |c: f32| c / (c * (1.0 - k) + k);
    g1(n_dot_l) * g1(n_dot_v)
}

/// Evaluate the full BRDF for unit directions `l` (to light) and `v` (to
/// viewer) against the sample's shading normal.
///
/// Directions must be expressed in the same frame as `s.normal` and unit
/// within [`UNIT_TOL`]; below-horizon configurations return zero.
pub fn eval_brdf(s: &MaterialSample, l: Vec3, v: Vec3) -> Result<Vec3> {
    eval_brdf_lobes(s, l, v, BrdfLobes::All)
}

/// [`eval_brdf`] restricted to a subset of lobes.
pub fn eval_brdf_lobes(s: &MaterialSample, l: Vec3, v: Vec3, lobes: BrdfLobes) -> Result<Vec3> {
    for (name, d) in [("l", l), ("v", v), ("normal", s.normal)] {
        if !d.is_finite() || d.unit_deviation() > UNIT_TOL {
            return Err(Error::invalid(format!(
                "{name} must be a unit vector (|{name}| = {})",
                d.length()
            )));
        }
    }
    let n = s.normal;
    let n_dot_l = n.dot(l);
    let n_dot_v = n.dot(v);
    if n_dot_l < 0.0 || n_dot_v < 0.0 {
        return Ok(Vec3::ZERO);
    }

    let mut out = Vec3::ZERO;
    if lobes != BrdfLobes::Specular {
        out += s.albedo * ((1.0 - s.metallic) / std::f32::consts::PI);
    }
    if lobes != BrdfLobes::Diffuse {
        let alpha = (s.roughness * s.roughness).max(MIN_ALPHA);
        let h_sum = l + v;
        let h_len = h_sum.length();
        if h_len > 1e-6 {
            let h = h_sum / h_len;
            // Symmetric Fresnel cosine: l.h = v.h = (1 + l.v) / |l + v|, so
            // swapping l and v evaluates identical operations (reciprocity
            // holds bit-for-bit).
            let cos_lh = ((1.0 + l.dot(v)) / h_len).clamp(0.0, 1.0);
            let f0 = Vec3::new(
                lerp(0.04, s.albedo.x, s.metallic),
                lerp(0.04, s.albedo.y, s.metallic),
                lerp(0.04, s.albedo.z, s.metallic),
            );
            let d = ggx_ndf_unchecked(n.dot(h).max(0.0), alpha);
            let f = fresnel_schlick(cos_lh, f0);
            let g = smith_g(n_dot_l, n_dot_v, alpha);
            let denom = 4.0 * n_dot_l * n_dot_v + EPS_DIV;
            out += f * (d * g / denom);
        }
    }
    Ok(out)
}
