//! Flat-target rendering: one material tile on the unit plane under a single
//! point light, viewed orthographically from straight above.
//!
//! This is the normalized ground-truth side of a training pair: no geometric
//! distortion, no occlusion, and an analytically known shading field, so the
//! material's own appearance (albedo, normal relief, gloss) is all that
//! varies across the frame.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;
use crate::pbr::{sample_material, shade, BrdfLobes, Lighting, MaterialSet, PointLight, ShadeOpts, ShadingPoint};

#[derive(Debug, Clone, Copy)]
pub struct FlatRenderParams {
    pub out_size: usize,
    /// Point light position; must sit strictly above the plane (z > 0).
    pub light_position: Vec3,
    /// Scalar light intensity; `None` picks pi * d^2 so a Lambertian surface
    /// of albedo a renders as exactly a at the plane point under the light.
    pub light_intensity: Option<f32>,
    pub lobes: BrdfLobes,
}

impl FlatRenderParams {
    pub fn new(out_size: usize) -> FlatRenderParams {
        FlatRenderParams {
            out_size,
            light_position: Vec3::new(0.0, 0.0, 2.0),
            light_intensity: None,
            lobes: BrdfLobes::All,
        }
    }
}

/// Render one tile of `mat` on the unit square [-0.5, 0.5]^2 at z = 0.
///
/// The view is orthographic straight down +z, one output pixel per sample at
/// pixel centers, UV = plane position + 0.5. Shading is analytic (point
/// light), so there is no sampling noise and the result depends only on the
/// inputs.
pub fn render_flat(mat: &MaterialSet, params: &FlatRenderParams) -> Result<Image> {
    if params.out_size == 0 {
        return Err(Error::invalid("output size must be positive"));
    }
    if !params.light_position.is_finite() || params.light_position.z <= 0.0 {
        return Err(Error::invalid(format!(
            "flat-render light must sit above the plane (z > 0), got {:?}",
            params.light_position
        )));
    }
    if let Some(i) = params.light_intensity {
        if !(i.is_finite() && i > 0.0) {
            return Err(Error::invalid(format!("light intensity must be positive, got {i}")));
        }
    }
    let d = params.light_position.z;
    let intensity = params.light_intensity.unwrap_or(std::f32::consts::PI * d * d);
    let light = PointLight {
        position: params.light_position,
        intensity: Vec3::splat(intensity),
    };

    let n = params.out_size;
    let view = Vec3::new(0.0, 0.0, 1.0);
    let mut img = Image::new(n, n, 3);
    for y in 0..n {
        for x in 0..n {
            let u = (x as f32 + 0.5) / n as f32;
            // Image rows grow downward; the plane's +y axis points up.
            let v = 1.0 - (y as f32 + 0.5) / n as f32;
            let pt = ShadingPoint::new(
                Vec3::new(u - 0.5, v - 0.5, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                (u, v),
            )?;
            let s = sample_material(mat, (u, v), 1.0)?;
            let opts = ShadeOpts {
                spp: 1,
                seed: 0,
                lobes: params.lobes,
            };
            let c = shade(&pt, &s, &Lighting::Point(light), view, &opts)?;
            img.set_rgb(x, y, c);
        }
    }
    Ok(img)
}
