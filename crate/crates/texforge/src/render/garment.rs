//! Garment-surface rendering: per-pixel primary rays against the mesh,
//! barycentric shading-point interpolation, and direct environment lighting.
//!
//! Background pixels are (0, 0, 0) with a cleared coverage flag. Per-pixel
//! random streams derive from (seed, pixel index), so output is bit-identical
//! for a given seed under any parallel schedule.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::{orthonormal_basis, Vec3};
use crate::pbr::{sample_material, shade, BrdfLobes, Lighting, MaterialSet, ShadeOpts, ShadingPoint};
use crate::render::camera::{intersect_triangle, Camera};
use crate::render::envmap::EnvironmentMap;
use crate::render::mesh::GarmentMesh;
use crate::rng::mix_seed;

#[derive(Debug, Clone, Copy)]
pub struct GarmentRenderParams {
    pub width: usize,
    pub height: usize,
    /// Environment samples per covered pixel.
    pub spp: u32,
    pub seed: u64,
    /// Material tiling repeats across the UV chart.
    pub tiling_scale: f32,
    pub lobes: BrdfLobes,
}

impl GarmentRenderParams {
    pub fn new(size: usize, spp: u32, seed: u64) -> GarmentRenderParams {
        GarmentRenderParams {
            width: size,
            height: size,
            spp,
            seed,
            tiling_scale: 1.0,
            lobes: BrdfLobes::All,
        }
    }
}

/// A rendered frame plus per-pixel garment coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub image: Image,
    pub coverage: Vec<bool>,
}

impl RenderedView {
    pub fn coverage_fraction(&self) -> f32 {
        if self.coverage.is_empty() {
            return 0.0;
        }
        self.coverage.iter().filter(|&&c| c).count() as f32 / self.coverage.len() as f32
    }
}

struct Hit {
    t: f32,
    tri: usize,
    b1: f32,
    b2: f32,
}

fn closest_hit(mesh: &GarmentMesh, ray: &crate::render::camera::Ray) -> Option<Hit> {
    let pos = mesh.positions();
    let mut best: Option<Hit> = None;
    for (i, tri) in mesh.triangles().iter().enumerate() {
        let (p0, p1, p2) = (pos[tri[0] as usize], pos[tri[1] as usize], pos[tri[2] as usize]);
        if let Some((t, b1, b2)) = intersect_triangle(ray, p0, p1, p2) {
            if best.as_ref().map_or(true, |b| t < b.t) {
                best = Some(Hit { t, tri: i, b1, b2 });
            }
        }
    }
    best
}

/// Interpolate a shading point at a hit: position and UV barycentrically,
/// normal renormalized, tangent aligned with the UV parameterization (falling
/// back to an arbitrary orthonormal frame for degenerate charts). The
/// geometric normal is flipped toward the viewer so cloth is two-sided.
fn shading_point_at(mesh: &GarmentMesh, hit: &Hit, view: Vec3) -> Result<ShadingPoint> {
    let tri = mesh.triangles()[hit.tri];
    let (i0, i1, i2) = (tri[0] as usize, tri[1] as usize, tri[2] as usize);
    let b0 = 1.0 - hit.b1 - hit.b2;
    let pos = mesh.positions();
    let uvs = mesh.uvs();
    let nrm = mesh.normals();

    let p = pos[i0] * b0 + pos[i1] * hit.b1 + pos[i2] * hit.b2;
    let uv = (
        uvs[i0].0 * b0 + uvs[i1].0 * hit.b1 + uvs[i2].0 * hit.b2,
        uvs[i0].1 * b0 + uvs[i1].1 * hit.b1 + uvs[i2].1 * hit.b2,
    );
    let mut n = (nrm[i0] * b0 + nrm[i1] * hit.b1 + nrm[i2] * hit.b2).normalized();
    if n == Vec3::ZERO {
        n = (pos[i1] - pos[i0]).cross(pos[i2] - pos[i0]).normalized();
    }
    if n.dot(view) < 0.0 {
        n = -n;
    }

    // UV-aligned tangent so tangent-space normal maps orient consistently.
    let e1 = pos[i1] - pos[i0];
    let e2 = pos[i2] - pos[i0];
    let du1 = uvs[i1].0 - uvs[i0].0;
    let dv1 = uvs[i1].1 - uvs[i0].1;
    let du2 = uvs[i2].0 - uvs[i0].0;
    let dv2 = uvs[i2].1 - uvs[i0].1;
    let det = du1 * dv2 - du2 * dv1;
    let (t, b) = if det.abs() > 1e-12 {
        let raw_t = (e1 * dv2 - e2 * dv1) / det;
        let t = (raw_t - n * n.dot(raw_t)).normalized();
        if t == Vec3::ZERO {
            orthonormal_basis(n)
        } else {
            let raw_b = (e2 * du1 - e1 * du2) / det;
            let mut b = n.cross(t);
            if b.dot(raw_b) < 0.0 {
                b = -b;
            }
            (t, b)
        }
    } else {
        orthonormal_basis(n)
    };
    ShadingPoint::new(p, n, t, b, uv)
}

/// Render the garment mesh under environment lighting.
pub fn render_garment(
    mesh: &GarmentMesh,
    mat: &MaterialSet,
    env: &EnvironmentMap,
    cam: &Camera,
    params: &GarmentRenderParams,
) -> Result<RenderedView> {
    if params.width == 0 || params.height == 0 {
        return Err(Error::invalid("render size must be positive"));
    }
    if params.spp == 0 {
        return Err(Error::invalid("spp must be at least 1"));
    }
    if !(params.tiling_scale.is_finite() && params.tiling_scale > 0.0) {
        return Err(Error::invalid(format!(
            "tiling scale must be positive, got {}",
            params.tiling_scale
        )));
    }
    let (lo, hi) = mesh.bounds();
    let center = (lo + hi) * 0.5;
    if cam.forward().dot(center - cam.position) <= 0.0 {
        return Err(Error::invalid("camera does not face the mesh bounding box"));
    }

    let w = params.width;
    let h = params.height;
    let rows: Vec<Result<(Vec<f32>, Vec<bool>)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut colors = vec![0.0f32; w * 3];
            let mut cover = vec![false; w];
            for x in 0..w {
                let ray = cam.primary_ray(x, y, w, h);
                if let Some(hit) = closest_hit(mesh, &ray) {
                    let view = -ray.dir;
                    let pt = shading_point_at(mesh, &hit, view)?;
                    let s = sample_material(mat, pt.uv, params.tiling_scale)?;
                    let pixel_seed = mix_seed(params.seed, (y * w + x) as u64, 0, 0);
                    let opts = ShadeOpts {
                        spp: params.spp,
                        seed: pixel_seed,
                        lobes: params.lobes,
                    };
                    let c = shade(&pt, &s, &Lighting::Environment(env), view, &opts)?;
                    colors[x * 3] = c.x;
                    colors[x * 3 + 1] = c.y;
                    colors[x * 3 + 2] = c.z;
                    cover[x] = true;
                }
            }
            Ok((colors, cover))
        })
        .collect();

    let mut image = Image::new(w, h, 3);
    let mut coverage = vec![false; w * h];
    for (y, row) in rows.into_iter().enumerate() {
        let (colors, cover) = row?;
        image.data_mut()[y * w * 3..(y + 1) * w * 3].copy_from_slice(&colors);
        coverage[y * w..(y + 1) * w].copy_from_slice(&cover);
    }
    Ok(RenderedView { image, coverage })
}
