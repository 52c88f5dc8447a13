//! Procedural desk-scale assets: tileable albedo maps, RGBA prints, and
//! wrinkled garment meshes.
//!
//! Every generator is a pure function of (preset, resolution, seed), so asset
//! sets regenerate identically anywhere. Albedo patterns are periodic across
//! the image by construction, matching the flat targets' tileability.

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;
use crate::postprocess::RgbaPrint;
use crate::render::mesh::GarmentMesh;
use crate::rng;

pub const ALBEDO_PRESETS: [&str; 5] = ["stripes", "checkers", "dots", "noise", "solid"];
pub const PRINT_PRESETS: [&str; 4] = ["circle", "ring", "star", "bars"];

/// Two random colors, kept away from pure black/white so shading and print
/// rules stay well-conditioned.
fn palette(rng: &mut impl Rng) -> (Vec3, Vec3) {
    let mut color = |lo: f32, hi: f32| {
        Vec3::new(
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
        )
    };
    (color(0.45, 0.9), color(0.1, 0.45))
}

/// Seamless value noise: a wrapped lattice of random values, smoothstep
/// interpolated, two octaves.
fn value_noise(res: usize, cells: usize, rng: &mut impl Rng) -> Vec<f32> {
    let lattice: Vec<f32> = (0..cells * cells).map(|_| rng.random::<f32>()).collect();
    let at = |cx: usize, cy: usize| lattice[(cy % cells) * cells + (cx % cells)];
    let mut out = vec![0.0f32; res * res];
    for y in 0..res {
        for x in 0..res {
            let fx = x as f32 / res as f32 * cells as f32;
            let fy = y as f32 / res as f32 * cells as f32;
            let (cx, cy) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - fx.floor(), fy - fy.floor());
            let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
            let top = at(cx, cy) + (at(cx + 1, cy) - at(cx, cy)) * sx;
            let bot = at(cx, cy + 1) + (at(cx + 1, cy + 1) - at(cx, cy + 1)) * sx;
            out[y * res + x] = top + (bot - top) * sy;
        }
    }
    out
}

/// Generate a tileable albedo map. Presets: stripes, checkers, dots, noise,
/// solid.
pub fn albedo_preset(kind: &str, res: usize, seed: u64) -> Result<Image> {
    if res < 4 {
        return Err(Error::invalid(format!("albedo resolution must be at least 4, got {res}")));
    }
    let mut r = rng::stream(seed, &[albedo_kind_index(kind)? as u64]);
    let (ca, cb) = palette(&mut r);
    let img = match kind {
        "stripes" => {
            let k = [2usize, 4, 8][r.random_range(0..3)];
            let vertical = r.random::<bool>();
            Image::from_fn(res, res, 3, |x, y| {
                let t = if vertical { x } else { y };
                let c = if (t * k / res) % 2 == 0 { ca } else { cb };
                [c.x, c.y, c.z, 0.0]
            })
        }
        "checkers" => {
            let k = [2usize, 4, 8][r.random_range(0..3)];
            Image::from_fn(res, res, 3, |x, y| {
                let c = if (x * k / res + y * k / res) % 2 == 0 { ca } else { cb };
                [c.x, c.y, c.z, 0.0]
            })
        }
        "dots" => {
            let g = r.random_range(2..5usize);
            let radius = r.random_range(0.25..0.4f32);
            let cell = res as f32 / g as f32;
            Image::from_fn(res, res, 3, |x, y| {
                // Distance to the nearest dot center in wrapped cell space.
                let fx = (x as f32 + 0.5) / cell;
                let fy = (y as f32 + 0.5) / cell;
                let dx = fx - fx.floor() - 0.5;
                let dy = fy - fy.floor() - 0.5;
                let c = if (dx * dx + dy * dy).sqrt() < radius { ca } else { cb };
                [c.x, c.y, c.z, 0.0]
            })
        }
        "noise" => {
            let coarse = value_noise(res, 4, &mut r);
            let fine = value_noise(res, 8, &mut r);
            Image::from_fn(res, res, 3, |x, y| {
                let t = (0.7 * coarse[y * res + x] + 0.3 * fine[y * res + x]).clamp(0.0, 1.0);
                let c = cb + (ca - cb) * t;
                [c.x, c.y, c.z, 0.0]
            })
        }
        "solid" => Image::from_fn(res, res, 3, |_, _| [ca.x, ca.y, ca.z, 0.0]),
        _ => unreachable!("kind validated above"),
    };
    Ok(img)
}

fn albedo_kind_index(kind: &str) -> Result<usize> {
    ALBEDO_PRESETS
        .iter()
        .position(|&k| k == kind)
        .ok_or_else(|| Error::invalid(format!("unknown albedo preset '{kind}', expected one of {ALBEDO_PRESETS:?}")))
}

/// Generate an RGBA print with a transparent background. Presets: circle,
/// ring, star, bars.
pub fn print_preset(kind: &str, res: usize, seed: u64) -> Result<RgbaPrint> {
    let idx = PRINT_PRESETS
        .iter()
        .position(|&k| k == kind)
        .ok_or_else(|| Error::invalid(format!("unknown print preset '{kind}', expected one of {PRINT_PRESETS:?}")))?;
    if res < 4 {
        return Err(Error::invalid(format!("print resolution must be at least 4, got {res}")));
    }
    let mut r = rng::stream(seed, &[idx as u64 + 16]);
    let color = Vec3::new(
        r.random_range(0.3..1.0f32),
        r.random_range(0.3..1.0f32),
        r.random_range(0.3..1.0f32),
    );
    let inside: Box<dyn Fn(f32, f32) -> bool> = match kind {
        "circle" => Box::new(|dx, dy| (dx * dx + dy * dy).sqrt() < 0.35),
        "ring" => Box::new(|dx, dy| {
            let d = (dx * dx + dy * dy).sqrt();
            (0.22..0.38).contains(&d)
        }),
        "star" => Box::new(|dx: f32, dy: f32| {
            let d = (dx * dx + dy * dy).sqrt();
            let theta = dy.atan2(dx);
            d < 0.38 * (0.55 + 0.45 * (5.0 * theta).cos())
        }),
        "bars" => Box::new(|dx, dy| dx.abs() < 0.35 && (dy.abs() * 5.0).fract() < 0.5 && dy.abs() < 0.35),
        _ => unreachable!("kind validated above"),
    };
    let mut rgb = Image::new(res, res, 3);
    let mut alpha = Image::new(res, res, 1);
    for y in 0..res {
        for x in 0..res {
            let dx = (x as f32 + 0.5) / res as f32 - 0.5;
            let dy = (y as f32 + 0.5) / res as f32 - 0.5;
            if inside(dx, dy) {
                rgb.set_rgb(x, y, color);
                alpha.set(x, y, 0, 1.0);
            }
        }
    }
    RgbaPrint::new(rgb, alpha)
}

/// A pre-draped cloth stand-in: a grid over [-0.5, 0.5]^2 displaced by a few
/// random sinusoidal wrinkles, with analytic normals and the identity UV
/// chart.
pub fn wrinkled_mesh(cells: usize, amplitude: f32, seed: u64) -> Result<GarmentMesh> {
    if cells < 2 {
        return Err(Error::invalid(format!("mesh grid needs at least 2 cells, got {cells}")));
    }
    if !(amplitude.is_finite() && (0.0..=0.5).contains(&amplitude)) {
        return Err(Error::invalid(format!("wrinkle amplitude must lie in [0, 0.5], got {amplitude}")));
    }
    let mut r = rng::stream(seed, &[32]);
    let wrinkles: Vec<(f32, f32, f32, f32, f32)> = (0..3)
        .map(|_| {
            (
                amplitude * r.random_range(0.3..1.0f32),
                r.random_range(1.0..3.0f32),
                r.random_range(1.0..3.0f32),
                r.random_range(0.0..std::f32::consts::TAU),
                r.random_range(0.0..std::f32::consts::TAU),
            )
        })
        .collect();
    let height = |u: f32, v: f32| -> f32 {
        wrinkles
            .iter()
            .map(|&(a, fu, fv, pu, pv)| {
                a * (std::f32::consts::TAU * fu * u + pu).sin()
                    * (std::f32::consts::TAU * fv * v + pv).sin()
            })
            .sum()
    };
    let d_height = |u: f32, v: f32| -> (f32, f32) {
        let mut du = 0.0;
        let mut dv = 0.0;
        for &(a, fu, fv, pu, pv) in &wrinkles {
            let su = (std::f32::consts::TAU * fu * u + pu).sin();
            let cu = (std::f32::consts::TAU * fu * u + pu).cos();
            let sv = (std::f32::consts::TAU * fv * v + pv).sin();
            let cv = (std::f32::consts::TAU * fv * v + pv).cos();
            du += a * std::f32::consts::TAU * fu * cu * sv;
            dv += a * std::f32::consts::TAU * fv * su * cv;
        }
        (du, dv)
    };

    let n = cells + 1;
    let mut positions = Vec::with_capacity(n * n);
    let mut normals = Vec::with_capacity(n * n);
    let mut uvs = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let u = i as f32 / cells as f32;
            let v = j as f32 / cells as f32;
            positions.push(Vec3::new(u - 0.5, v - 0.5, height(u, v)));
            let (du, dv) = d_height(u, v);
            normals.push(Vec3::new(-du, -dv, 1.0).normalized());
            uvs.push((u, v));
        }
    }
    let mut triangles = Vec::with_capacity(cells * cells * 2);
    for j in 0..cells {
        for i in 0..cells {
            let a = (j * n + i) as u32;
            let b = (j * n + i + 1) as u32;
            let c = ((j + 1) * n + i + 1) as u32;
            let d = ((j + 1) * n + i) as u32;
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    GarmentMesh::new(positions, normals, uvs, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn albedo_presets_are_deterministic_and_in_range() {
        for kind in ALBEDO_PRESETS {
            let a = albedo_preset(kind, 16, 5).unwrap();
            let b = albedo_preset(kind, 16, 5).unwrap();
            assert_eq!(a, b, "{kind} not deterministic");
            assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)), "{kind} out of range");
            let c = albedo_preset(kind, 16, 6).unwrap();
            assert_ne!(a, c, "{kind} ignores the seed");
        }
        assert!(albedo_preset("plaid", 16, 0).is_err());
    }

    /// Circular run lengths of a value sequence (wrap-aware).
    fn circular_runs(vals: &[f32]) -> Vec<usize> {
        let n = vals.len();
        let start = (0..n)
            .find(|&i| vals[i] != vals[(i + n - 1) % n])
            .unwrap_or(0);
        let mut runs = Vec::new();
        let mut len = 1usize;
        for k in 1..=n {
            let cur = vals[(start + k) % n];
            let prev = vals[(start + k - 1) % n];
            if cur == prev {
                len += 1;
            } else {
                runs.push(len);
                len = 1;
            }
        }
        if runs.is_empty() {
            runs.push(len);
        }
        runs
    }

    /// Patterns must wrap seamlessly: stripes and checkers keep uniform
    /// circular run lengths (no partial stripe at the boundary), dots leave
    /// the boundary in background, and noise stays continuous across it.
    #[test]
    fn albedo_presets_are_tileable() {
        for seed in [1u64, 9, 23] {
            let res = 32;
            for kind in ["stripes", "checkers"] {
                let a = albedo_preset(kind, res, seed).unwrap();
                for (fixed, along_x) in [(0usize, true), (0usize, false)] {
                    let vals: Vec<f32> = (0..res)
                        .map(|t| if along_x { a.get(t, fixed, 0) } else { a.get(fixed, t, 0) })
                        .collect();
                    let runs = circular_runs(&vals);
                    let (lo, hi) = (runs.iter().min().unwrap(), runs.iter().max().unwrap());
                    assert_eq!(lo, hi, "{kind} seed {seed}: uneven circular runs {runs:?}");
                }
            }
            let dots = albedo_preset("dots", res, seed).unwrap();
            for t in 0..res {
                assert_eq!(dots.rgb(0, t), dots.rgb(res - 1, t), "dots touch the x boundary");
                assert_eq!(dots.rgb(t, 0), dots.rgb(t, res - 1), "dots touch the y boundary");
            }
            let noise = albedo_preset("noise", res, seed).unwrap();
            let mut boundary = 0.0f64;
            let mut interior = 0.0f64;
            for y in 0..res {
                boundary += (noise.get(0, y, 0) - noise.get(res - 1, y, 0)).abs() as f64;
                for x in 0..res - 1 {
                    interior += (noise.get(x + 1, y, 0) - noise.get(x, y, 0)).abs() as f64;
                }
            }
            boundary /= res as f64;
            interior /= (res * (res - 1)) as f64;
            assert!(
                boundary <= interior * 3.0,
                "seed {seed}: noise wrap jump {boundary} vs interior {interior}"
            );
        }
    }

    #[test]
    fn print_presets_have_transparent_background() {
        for kind in PRINT_PRESETS {
            let p = print_preset(kind, 24, 3).unwrap();
            // Corners are background.
            assert_eq!(p.alpha().get(0, 0, 0), 0.0, "{kind}");
            assert_eq!(p.rgb().rgb(0, 0), Vec3::ZERO, "{kind} rgb not zeroed outside");
            let opaque = p.alpha().data().iter().filter(|&&a| a == 1.0).count();
            assert!(opaque > 0, "{kind} draws nothing");
            assert_eq!(p, print_preset(kind, 24, 3).unwrap(), "{kind} not deterministic");
        }
        assert!(print_preset("squiggle", 24, 0).is_err());
    }

    #[test]
    fn wrinkled_mesh_is_valid_and_wrinkled() {
        let m = wrinkled_mesh(8, 0.1, 11).unwrap();
        assert_eq!(m.positions().len(), 81);
        assert_eq!(m.triangles().len(), 128);
        let (lo, hi) = m.bounds();
        assert!(hi.z > lo.z, "no displacement at all");
        assert!(hi.z - lo.z <= 0.62, "displacement exceeds amplitude budget");
        // UVs cover the unit chart.
        assert!(m.uvs().iter().any(|&(u, v)| u == 0.0 && v == 0.0));
        assert!(m.uvs().iter().any(|&(u, v)| u == 1.0 && v == 1.0));
        assert_eq!(
            m.to_obj(),
            wrinkled_mesh(8, 0.1, 11).unwrap().to_obj(),
            "mesh generation not deterministic"
        );
        assert!(wrinkled_mesh(1, 0.1, 0).is_err());
        assert!(wrinkled_mesh(8, 0.9, 0).is_err());
    }
}
