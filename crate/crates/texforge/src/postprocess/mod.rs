//! Output post-processing: transparent-print extraction, texture tiling into
//! UV space, proportion-aware tiling-scale estimation, and print compositing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pbr::MaterialSet;
use crate::render::CropRect;

/// Opacity threshold for print extraction: at or above this value a pixel is
/// fully opaque; below it, opacity fades linearly to zero.
pub const PRINT_ALPHA_THRESHOLD: f32 = 0.1;

/// A transparent print: straight (non-premultiplied) RGB plus an alpha mask.
/// Wherever alpha is 0 the RGB is stored as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbaPrint {
    rgb: Image,
    alpha: Image,
}

impl RgbaPrint {
    pub fn new(rgb: Image, alpha: Image) -> Result<RgbaPrint> {
        if rgb.channels() != 3 || alpha.channels() != 1 {
            return Err(Error::invalid("print needs 3-channel rgb and 1-channel alpha"));
        }
        if rgb.width() != alpha.width() || rgb.height() != alpha.height() {
            return Err(Error::invalid(format!(
                "print rgb {}x{} and alpha {}x{} disagree",
                rgb.width(),
                rgb.height(),
                alpha.width(),
                alpha.height()
            )));
        }
        if alpha.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("print alpha must lie in [0, 1]"));
        }
        Ok(RgbaPrint { rgb, alpha })
    }

    pub fn rgb(&self) -> &Image {
        &self.rgb
    }

    pub fn alpha(&self) -> &Image {
        &self.alpha
    }

    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }

    /// Interleave into a 4-channel RGBA image (e.g. for PNG output).
    pub fn to_image(&self) -> Image {
        Image::from_fn(self.width(), self.height(), 4, |x, y| {
            let c = self.rgb.rgb(x, y);
            [c.x, c.y, c.z, self.alpha.get(x, y, 0)]
        })
    }

    /// Split a 4-channel RGBA image back into a print.
    pub fn from_image(img: &Image) -> Result<RgbaPrint> {
        if img.channels() != 4 {
            return Err(Error::invalid("expected a 4-channel RGBA image"));
        }
        let rgb = Image::from_fn(img.width(), img.height(), 3, |x, y| {
            [img.get(x, y, 0), img.get(x, y, 1), img.get(x, y, 2), 0.0]
        });
        let alpha = Image::from_fn(img.width(), img.height(), 1, |x, y| {
            [img.get(x, y, 3), 0.0, 0.0, 0.0]
        });
        RgbaPrint::new(rgb, alpha)
    }
}

/// Recover a transparent print from a normalized texture on black.
///
/// Per pixel, with s the channel maximum (the pixel value itself for gray
/// input): every channel maps to max(0, (v - 0.1) / 0.9), and alpha is 1 for
/// s >= 0.1, fading as s / 0.1 below. The threshold boundary is opaque and
/// alpha is continuous there.
pub fn extract_alpha(x: &Image) -> Result<RgbaPrint> {
    if !matches!(x.channels(), 1 | 3) {
        return Err(Error::invalid(format!(
            "print extraction expects 1 or 3 channels, got {}",
            x.channels()
        )));
    }
    if x.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("print extraction input must lie in [0, 1]"));
    }
    let t = PRINT_ALPHA_THRESHOLD;
    let remap = |v: f32| ((v - t) / (1.0 - t)).max(0.0);
    let rgb = Image::from_fn(x.width(), x.height(), 3, |px, py| {
        if x.channels() == 1 {
            let v = remap(x.get(px, py, 0));
            [v, v, v, 0.0]
        } else {
            [
                remap(x.get(px, py, 0)),
                remap(x.get(px, py, 1)),
                remap(x.get(px, py, 2)),
                0.0,
            ]
        }
    });
    let alpha = Image::from_fn(x.width(), x.height(), 1, |px, py| {
        let s = (0..x.channels()).map(|c| x.get(px, py, c)).fold(0.0f32, f32::max);
        let a = if s >= t { 1.0 } else { s / t };
        [a, 0.0, 0.0, 0.0]
    });
    RgbaPrint::new(rgb, alpha)
}

/// Repeat a texture `rx` times horizontally and `ry` times vertically with
/// wrap addressing; output is ceil(rx*W) x ceil(ry*H). Pixel centers land on
/// source texel centers, so every repeat (integer or fractional) copies
/// texels byte-exactly.
pub fn tile_texture(tex: &Image, rx: f32, ry: f32) -> Result<Image> {
    if !(rx.is_finite() && rx > 0.0 && ry.is_finite() && ry > 0.0) {
        return Err(Error::invalid(format!("repeats must be positive, got ({rx}, {ry})")));
    }
    let (w, h) = (tex.width(), tex.height());
    let ow = (rx * w as f32).ceil() as usize;
    let oh = (ry * h as f32).ceil() as usize;
    if ow == 0 || oh == 0 {
        return Err(Error::invalid("tiled output would be empty"));
    }
    let mut out = Image::new(ow, oh, tex.channels());
    for y in 0..oh {
        for x in 0..ow {
            for c in 0..tex.channels() {
                out.set(x, y, c, tex.get(x % w, y % h, c));
            }
        }
    }
    Ok(out)
}

/// Tile all four maps of a material set. The repeats must keep the maps
/// square since material sets are square by construction.
pub fn tile_material(mat: &MaterialSet, rx: f32, ry: f32) -> Result<MaterialSet> {
    let res = mat.resolution() as f32;
    if (rx * res).ceil() != (ry * res).ceil() {
        return Err(Error::invalid(format!(
            "repeats ({rx}, {ry}) would make material maps non-square"
        )));
    }
    MaterialSet::new(
        tile_texture(mat.albedo(), rx, ry)?,
        tile_texture(mat.normal(), rx, ry)?,
        tile_texture(mat.roughness(), rx, ry)?,
        tile_texture(mat.metallic(), rx, ry)?,
    )
}

/// Binary garment mask in a source frame, together with the capture rect the
/// conditioning patch was taken from. The capture rect must lie inside the
/// mask's bounding box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GarmentMask {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    capture: CropRect,
    bbox: CropRect,
}

impl GarmentMask {
    pub fn new(width: usize, height: usize, mask: Vec<bool>, capture: CropRect) -> Result<GarmentMask> {
        if mask.len() != width * height {
            return Err(Error::invalid(format!(
                "mask length {} does not match {width}x{height}",
                mask.len()
            )));
        }
        if capture.w == 0 || capture.h == 0 {
            return Err(Error::invalid("capture rect must have positive area"));
        }
        let mut x0 = usize::MAX;
        let mut y0 = usize::MAX;
        let mut x1 = 0usize;
        let mut y1 = 0usize;
        let mut any = false;
        for y in 0..height {
            for x in 0..width {
                if mask[y * width + x] {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        if !any {
            return Err(Error::invalid("garment mask is empty"));
        }
        let bbox = CropRect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
        if capture.x < bbox.x
            || capture.y < bbox.y
            || capture.x + capture.w > bbox.x + bbox.w
            || capture.y + capture.h > bbox.y + bbox.h
        {
            return Err(Error::invalid(format!(
                "capture rect {capture:?} is not inside the garment bounding box {bbox:?}"
            )));
        }
        Ok(GarmentMask { width, height, mask, capture, bbox })
    }

    /// Build from a grayscale mask image thresholded at 0.5.
    pub fn from_image(img: &Image, capture: CropRect) -> Result<GarmentMask> {
        if img.channels() != 1 {
            return Err(Error::invalid("garment mask image must be single-channel"));
        }
        let mask = img.data().iter().map(|&v| v >= 0.5).collect();
        GarmentMask::new(img.width(), img.height(), mask, capture)
    }

    pub fn bbox(&self) -> CropRect {
        self.bbox
    }

    pub fn capture(&self) -> CropRect {
        self.capture
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Proportion-aware tiling scale: the texture repeats across the UV chart as
/// many times as the capture patch fits across the garment, per axis, scaled
/// by the chart extent. Invariant under uniform rescaling of the source
/// frame.
pub fn estimate_tiling_scale(mask: &GarmentMask, chart_extent: (f32, f32)) -> Result<(f32, f32)> {
    let (cu, cv) = chart_extent;
    if !(cu.is_finite() && cu > 0.0 && cv.is_finite() && cv > 0.0) {
        return Err(Error::invalid(format!("chart extent must be positive, got ({cu}, {cv})")));
    }
    let bbox = mask.bbox();
    let cap = mask.capture();
    let rx = bbox.w as f32 / cap.w as f32 * cu;
    let ry = bbox.h as f32 / cap.h as f32 * cv;
    Ok((rx, ry))
}

/// Alpha-over composite of a print onto `base` within `placement`,
/// resampling the print to the placement size.
pub fn composite_print(base: &Image, print: &RgbaPrint, placement: CropRect) -> Result<Image> {
    if base.channels() != 3 {
        return Err(Error::invalid("composite base must be a 3-channel image"));
    }
    if placement.w == 0 || placement.h == 0 {
        return Err(Error::invalid("placement rect must have positive area"));
    }
    if placement.x + placement.w > base.width() || placement.y + placement.h > base.height() {
        return Err(Error::invalid(format!(
            "placement {placement:?} exceeds the {}x{} base",
            base.width(),
            base.height()
        )));
    }
    let mut out = base.clone();
    let rgba = print.to_image();
    for y in 0..placement.h {
        for x in 0..placement.w {
            let sx = (x as f32 + 0.5) * print.width() as f32 / placement.w as f32;
            let sy = (y as f32 + 0.5) * print.height() as f32 / placement.h as f32;
            let s = rgba.sample_bilinear_clamp(sx, sy);
            let (bx, by) = (placement.x + x, placement.y + y);
            for c in 0..3 {
                let b = base.get(bx, by, c);
                out.set(bx, by, c, s[3] * s[c] + (1.0 - s[3]) * b);
            }
        }
    }
    Ok(out)
}
