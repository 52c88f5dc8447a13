//! Print-material synthesis: composite an RGBA print onto a background
//! material, overriding the surface response inside the printed region.
//!
//! Printed texels get a uniform roughness from U(0.4, 0.7), a uniform
//! metallic from U(0, 0.3), and a flat normal — prints sit on top of the
//! weave. A uniformly black print headed for a dark background is recolored
//! white first so it remains visible (and learnable) after rendering.

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;
use crate::pbr::MaterialSet;
use crate::postprocess::RgbaPrint;

pub const PRINT_ROUGHNESS_RANGE: (f32, f32) = (0.4, 0.7);
pub const PRINT_METALLIC_RANGE: (f32, f32) = (0.0, 0.3);
/// A print is "uniformly black" when every opaque texel's max channel is
/// below this.
pub const DARK_PRINT_MAX: f32 = 0.05;
/// A background is "dark" when its mean albedo luminance falls below this.
pub const DARK_BACKGROUND_LUMA: f32 = 0.25;

/// Axis-aligned placement rectangle in UV units, inside [0, 1]^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvRect {
    pub u: f32,
    pub v: f32,
    pub w: f32,
    pub h: f32,
}

impl UvRect {
    pub fn new(u: f32, v: f32, w: f32, h: f32) -> Result<UvRect> {
        let ok = [u, v, w, h].iter().all(|t| t.is_finite())
            && w > 0.0
            && h > 0.0
            && (0.0..=1.0).contains(&u)
            && (0.0..=1.0).contains(&v)
            && u + w <= 1.0
            && v + h <= 1.0;
        if !ok {
            return Err(Error::invalid(format!(
                "placement rect (u={u}, v={v}, w={w}, h={h}) must lie inside the unit UV square"
            )));
        }
        Ok(UvRect { u, v, w, h })
    }
}

fn luminance(c: Vec3) -> f32 {
    0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
}

fn mean_luminance(img: &Image) -> f32 {
    let mut sum = 0.0f64;
    for y in 0..img.height() {
        for x in 0..img.width() {
            sum += luminance(img.rgb(x, y)) as f64;
        }
    }
    (sum / (img.width() * img.height()) as f64) as f32
}

/// True when every texel with any opacity is near-black.
fn print_is_uniformly_black(print: &RgbaPrint) -> bool {
    let mut any_opaque = false;
    for y in 0..print.height() {
        for x in 0..print.width() {
            if print.alpha().get(x, y, 0) > 0.0 {
                any_opaque = true;
                let c = print.rgb().rgb(x, y);
                if c.x.max(c.y).max(c.z) >= DARK_PRINT_MAX {
                    return false;
                }
            }
        }
    }
    any_opaque
}

/// Composite `print` onto `background` inside `placement`, overriding
/// roughness/metallic/normal in the printed region.
///
/// Returns the composited material and the print actually used — identical
/// to the input unless the dark-print-on-dark-background rule recolored it
/// to white. Draws exactly two values from `rng` (roughness, then metallic).
pub fn make_print_material(
    print: &RgbaPrint,
    background: &MaterialSet,
    placement: UvRect,
    rng: &mut impl Rng,
) -> Result<(MaterialSet, RgbaPrint)> {
    let res = background.resolution();
    let px = (placement.u * res as f32).floor() as usize;
    let py = (placement.v * res as f32).floor() as usize;
    let pw = ((placement.w * res as f32).round() as usize).max(1);
    let ph = ((placement.h * res as f32).round() as usize).max(1);
    if px + pw > res || py + ph > res {
        return Err(Error::invalid(format!(
            "placement {placement:?} exceeds the {res}px material after rasterization"
        )));
    }

    let print = if print_is_uniformly_black(print)
        && mean_luminance(background.albedo()) < DARK_BACKGROUND_LUMA
    {
        let white = Image::from_fn(print.width(), print.height(), 3, |x, y| {
            if print.alpha().get(x, y, 0) > 0.0 {
                [1.0, 1.0, 1.0, 0.0]
            } else {
                [0.0, 0.0, 0.0, 0.0]
            }
        });
        RgbaPrint::new(white, print.alpha().clone())?
    } else {
        print.clone()
    };

    let rough_val = rng.random_range(PRINT_ROUGHNESS_RANGE.0..PRINT_ROUGHNESS_RANGE.1);
    let metal_val = rng.random_range(PRINT_METALLIC_RANGE.0..PRINT_METALLIC_RANGE.1);

    let rgba = print.to_image();
    let mut albedo = background.albedo().clone();
    let mut normal = background.normal().clone();
    let mut rough = background.roughness().clone();
    let mut metal = background.metallic().clone();
    for y in 0..ph {
        for x in 0..pw {
            let sx = (x as f32 + 0.5) * print.width() as f32 / pw as f32;
            let sy = (y as f32 + 0.5) * print.height() as f32 / ph as f32;
            let s = rgba.sample_bilinear_clamp(sx, sy);
            let a = s[3];
            if a <= 0.0 {
                continue;
            }
            let (bx, by) = (px + x, py + y);
            for c in 0..3 {
                let b = albedo.get(bx, by, c);
                albedo.set(bx, by, c, a * s[c] + (1.0 - a) * b);
            }
            normal.set(bx, by, 0, 0.5);
            normal.set(bx, by, 1, 0.5);
            normal.set(bx, by, 2, 1.0);
            rough.set(bx, by, 0, rough_val);
            metal.set(bx, by, 0, metal_val);
        }
    }
    Ok((MaterialSet::new(albedo, normal, rough, metal)?, print))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn background(albedo_value: Vec3) -> MaterialSet {
        let res = 16;
        MaterialSet::new(
            Image::from_fn(res, res, 3, |_, _| [albedo_value.x, albedo_value.y, albedo_value.z, 0.0]),
            MaterialSet::flat_normal_map(res),
            MaterialSet::constant_map(res, 0.9),
            MaterialSet::constant_map(res, 0.0),
        )
        .unwrap()
    }

    fn disk_print(res: usize, color: Vec3) -> RgbaPrint {
        let rgb = Image::from_fn(res, res, 3, |x, y| {
            let dx = (x as f32 + 0.5) / res as f32 - 0.5;
            let dy = (y as f32 + 0.5) / res as f32 - 0.5;
            if dx * dx + dy * dy < 0.16 {
                [color.x, color.y, color.z, 0.0]
            } else {
                [0.0; 4]
            }
        });
        let alpha = Image::from_fn(res, res, 1, |x, y| {
            let dx = (x as f32 + 0.5) / res as f32 - 0.5;
            let dy = (y as f32 + 0.5) / res as f32 - 0.5;
            [if dx * dx + dy * dy < 0.16 { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0]
        });
        RgbaPrint::new(rgb, alpha).unwrap()
    }

    fn transparent_print(res: usize) -> RgbaPrint {
        RgbaPrint::new(Image::new(res, res, 3), Image::new(res, res, 1)).unwrap()
    }

    #[test]
    fn transparent_print_leaves_background_untouched() {
        let bg = background(Vec3::new(0.6, 0.5, 0.4));
        let rect = UvRect::new(0.25, 0.25, 0.5, 0.5).unwrap();
        let (out, used) =
            make_print_material(&transparent_print(8), &bg, rect, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(out.albedo(), bg.albedo());
        assert_eq!(out.roughness(), bg.roughness());
        assert_eq!(out.metallic(), bg.metallic());
        assert_eq!(out.normal(), bg.normal());
        assert_eq!(&used, &transparent_print(8));
    }

    #[test]
    fn printed_region_gets_uniform_response_maps() {
        let bg = background(Vec3::new(0.6, 0.5, 0.4));
        let rect = UvRect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let print = disk_print(16, Vec3::new(0.9, 0.2, 0.1));
        let (out, _) = make_print_material(&print, &bg, rect, &mut rng::stream(2, &[])).unwrap();
        // Center texel is fully printed: albedo = print color, response maps
        // overridden within their documented ranges.
        assert_eq!(out.albedo().rgb(8, 8), Vec3::new(0.9, 0.2, 0.1));
        let r = out.roughness().get(8, 8, 0);
        let m = out.metallic().get(8, 8, 0);
        assert!((PRINT_ROUGHNESS_RANGE.0..PRINT_ROUGHNESS_RANGE.1).contains(&r), "{r}");
        assert!((PRINT_METALLIC_RANGE.0..PRINT_METALLIC_RANGE.1).contains(&m), "{m}");
        assert_eq!(out.normal().rgb(8, 8), Vec3::new(0.5, 0.5, 1.0));
        // Corners stay background.
        assert_eq!(out.albedo().rgb(0, 0), Vec3::new(0.6, 0.5, 0.4));
        assert_eq!(out.roughness().get(0, 0, 0), 0.9);
    }

    #[test]
    fn black_print_on_dark_background_turns_white() {
        let dark = background(Vec3::splat(0.1));
        let rect = UvRect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let black = disk_print(16, Vec3::splat(0.02));
        let (out, used) = make_print_material(&black, &dark, rect, &mut rng::stream(3, &[])).unwrap();
        assert_eq!(used.rgb().rgb(8, 8), Vec3::ONE, "print recolored to white");
        assert_eq!(out.albedo().rgb(8, 8), Vec3::ONE);
        assert_eq!(used.alpha(), black.alpha(), "alpha untouched by recoloring");
    }

    #[test]
    fn black_print_on_bright_background_stays_black() {
        let bright = background(Vec3::splat(0.7));
        let rect = UvRect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let black = disk_print(16, Vec3::splat(0.02));
        let (out, used) = make_print_material(&black, &bright, rect, &mut rng::stream(3, &[])).unwrap();
        assert_eq!(used.rgb().rgb(8, 8), Vec3::splat(0.02));
        assert_eq!(out.albedo().rgb(8, 8), Vec3::splat(0.02));
    }

    #[test]
    fn colorful_print_on_dark_background_is_kept() {
        let dark = background(Vec3::splat(0.1));
        let rect = UvRect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let print = disk_print(16, Vec3::new(0.8, 0.3, 0.2));
        let (_, used) = make_print_material(&print, &dark, rect, &mut rng::stream(4, &[])).unwrap();
        assert_eq!(used.rgb().rgb(8, 8), Vec3::new(0.8, 0.3, 0.2));
    }

    #[test]
    fn placement_validation() {
        assert!(UvRect::new(0.8, 0.0, 0.4, 0.4).is_err());
        assert!(UvRect::new(0.0, 0.0, 0.0, 0.4).is_err());
        assert!(UvRect::new(-0.1, 0.0, 0.4, 0.4).is_err());
        assert!(UvRect::new(0.2, 0.3, 0.5, 0.5).is_ok());
    }

    #[test]
    fn same_seed_reproduces_material() {
        let bg = background(Vec3::new(0.6, 0.5, 0.4));
        let rect = UvRect::new(0.25, 0.25, 0.5, 0.5).unwrap();
        let print = disk_print(8, Vec3::new(0.9, 0.2, 0.1));
        let (a, _) = make_print_material(&print, &bg, rect, &mut rng::stream(9, &[])).unwrap();
        let (b, _) = make_print_material(&print, &bg, rect, &mut rng::stream(9, &[])).unwrap();
        assert_eq!(a.albedo(), b.albedo());
        assert_eq!(a.roughness(), b.roughness());
        assert_eq!(a.metallic(), b.metallic());
    }
}
