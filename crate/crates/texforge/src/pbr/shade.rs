//! Direct-lighting radiance estimation at a surface point.
//!
//! Environment lighting is integrated by Monte Carlo with cosine-weighted
//! hemisphere sampling around the shading normal (pdf = cos(theta) / pi);
//! point lights evaluate analytically with inverse-square falloff. All
//! accumulation happens in `f64` and random streams derive purely from the
//! caller's seed, so results are bit-identical for a given seed regardless
//! of scheduling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{orthonormal_basis, Vec3};
use crate::pbr::{eval_brdf_lobes, BrdfLobes, MaterialSample, ShadingPoint};
use crate::render::EnvironmentMap;
use crate::rng::stream;

/// Isotropic point light with per-channel radiant intensity; received
/// radiance falls off with inverse squared distance.
#[derive(Debug, Clone, Copy)]
pub struct PointLight {
    pub position: Vec3,
    pub intensity: Vec3,
}

/// Light source driving [`shade`].
pub enum Lighting<'a> {
    Environment(&'a EnvironmentMap),
    Point(PointLight),
}

/// Sampling controls for [`shade`].
#[derive(Debug, Clone, Copy)]
pub struct ShadeOpts {
    /// Environment samples per evaluation (ignored by analytic point lights).
    pub spp: u32,
    /// Seed for this evaluation's random stream (callers derive one per pixel).
    pub seed: u64,
    /// BRDF lobes to evaluate.
    pub lobes: BrdfLobes,
}

impl ShadeOpts {
    pub fn new(spp: u32, seed: u64) -> ShadeOpts {
        ShadeOpts { spp, seed, lobes: BrdfLobes::All }
    }

    pub fn with_lobes(mut self, lobes: BrdfLobes) -> ShadeOpts {
        self.lobes = lobes;
        self
    }
}

/// Cosine-weighted hemisphere direction around +z from two uniform samples;
/// the corresponding pdf is `z / pi`.
pub fn cosine_hemisphere(u1: f32, u2: f32) -> Vec3 {
    let phi = 2.0 * std::f32::consts::PI * u1;
    let r = (1.0 - u2).sqrt();
    Vec3::new(phi.cos() * r, phi.sin() * r, u2.sqrt())
}

/// Outgoing radiance toward `v` at `pt` for material sample `s`.
///
/// `v` is the world-space unit direction from the surface toward the viewer.
/// The sample's tangent-space normal is lifted through the point's frame; the
/// cosine term uses the shading normal, and directions below the geometric
/// horizon contribute nothing.
pub fn shade(
    pt: &ShadingPoint,
    s: &MaterialSample,
    lighting: &Lighting,
    v: Vec3,
    opts: &ShadeOpts,
) -> Result<Vec3> {
    pt.validate_frame()?;
    if !v.is_finite() || v.unit_deviation() > crate::pbr::brdf::UNIT_TOL {
        return Err(Error::invalid(format!("view direction must be unit (|v| = {})", v.length())));
    }
    // World-space shading normal and a world-space material sample for the
    // BRDF (eval_brdf expects directions in the sample normal's frame).
    let n_shading = pt.to_world(s.normal).normalized();
    let s_world = MaterialSample { normal: n_shading, ..*s };
    let n_geom = pt.normal;
    if v.dot(n_geom) <= 0.0 {
        // Viewing the back side: nothing reflected toward the camera.
        return Ok(Vec3::ZERO);
    }

    match lighting {
        Lighting::Point(light) => {
            let to_light = light.position - pt.position;
            let r2 = to_light.length_squared();
            if r2 <= 0.0 {
                return Err(Error::invalid("point light coincides with the shading point"));
            }
            let l = to_light / r2.sqrt();
            if l.dot(n_geom) <= 0.0 || l.dot(n_shading) <= 0.0 {
                return Ok(Vec3::ZERO);
            }
            let f = eval_brdf_lobes(&s_world, l, v, opts.lobes)?;
            let cos = l.dot(n_shading);
            Ok(f.mul_elem(light.intensity) * (cos / r2))
        }
        Lighting::Environment(env) => {
            if opts.spp == 0 {
                return Err(Error::invalid("spp must be at least 1"));
            }
            let (t, b) = orthonormal_basis(n_shading);
            let mut rng = stream(opts.seed, &[]);
            let mut acc = [0.0f64; 3];
            for _ in 0..opts.spp {
                let u1: f32 = rng.random();
                let u2: f32 = rng.random();
                let local = cosine_hemisphere(u1, u2);
                let l = t * local.x + b * local.y + n_shading * local.z;
                if l.dot(n_geom) <= 0.0 || l.dot(n_shading) <= 0.0 {
                    continue;
                }
                let f = eval_brdf_lobes(&s_world, l.normalized(), v, opts.lobes)?;
                // Importance sampling with pdf = cos / pi leaves pi * f * L.
                let radiance = env.radiance(l);
                let c = f.mul_elem(radiance) * std::f32::consts::PI;
                acc[0] += c.x as f64;
                acc[1] += c.y as f64;
                acc[2] += c.z as f64;
            }
            let inv = 1.0 / opts.spp as f64;
            Ok(Vec3::new(
                (acc[0] * inv) as f32,
                (acc[1] * inv) as f32,
                (acc[2] * inv) as f32,
            ))
        }
    }
}
