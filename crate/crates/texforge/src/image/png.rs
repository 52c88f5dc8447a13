//! 8/16-bit PNG I/O.
//!
//! Display output applies a fixed transfer: clamp to [0, 1], then sRGB-encode
//! color channels (alpha stays linear). Reads can decode sRGB (albedo,
//! captured conditions) or pass values through linearly (roughness, metallic,
//! normal maps, masks).

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage, RgbaImage};

use crate::error::{Error, Result};
use crate::image::{linear_to_srgb, srgb_to_linear, Image};

/// Transfer applied to color channels when reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transfer {
    /// Decode sRGB-encoded color to linear light.
    Srgb,
    /// Values are already linear; pass through.
    Linear,
}

/// Read an 8- or 16-bit PNG into a float image in [0, 1]. The transfer is
/// applied to color channels only; alpha is always linear.
pub fn read_png(path: &Path, transfer: Transfer) -> Result<Image> {
    let reader = ImageReader::open(path).map_err(|e| Error::MissingFile {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let decoded = reader
        .decode()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, raw): (usize, Vec<f32>) = match decoded {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&v| v as f32 / 255.0).collect()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| v as f32 / 255.0).collect()),
        DynamicImage::ImageRgba8(b) => (4, b.into_raw().iter().map(|&v| v as f32 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => (1, b.into_raw().iter().map(|&v| v as f32 / 65535.0).collect()),
        DynamicImage::ImageRgb16(b) => (3, b.into_raw().iter().map(|&v| v as f32 / 65535.0).collect()),
        DynamicImage::ImageRgba16(b) => (4, b.into_raw().iter().map(|&v| v as f32 / 65535.0).collect()),
        other => {
            return Err(Error::Image(format!(
                "{}: unsupported pixel layout {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let mut img = Image::from_vec(w, h, channels, raw)?;
    if transfer == Transfer::Srgb {
        let color_channels = if channels == 4 { 3 } else { channels };
        for px in img.data_mut().chunks_mut(channels) {
            for v in px.iter_mut().take(color_channels) {
                *v = srgb_to_linear(*v);
            }
        }
    }
    Ok(img)
}

/// Write a display PNG: clamp to [0, 1], sRGB-encode color channels, quantize
/// to 8 bits. Alpha (if present) is clamped and quantized without a transfer.
pub fn write_display_png(img: &Image, path: &Path) -> Result<()> {
    let quant = |v: f32| -> u8 { (linear_to_srgb(v) * 255.0 + 0.5) as u8 };
    let quant_linear = |v: f32| -> u8 { (v.clamp(0.0, 1.0) * 255.0 + 0.5) as u8 };
    let w = img.width() as u32;
    let h = img.height() as u32;
    let save = |res: image::ImageResult<()>| -> Result<()> {
        res.map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    };
    match img.channels() {
        1 => {
            let bytes: Vec<u8> = img.data().iter().map(|&v| quant(v)).collect();
            save(GrayImage::from_raw(w, h, bytes).unwrap().save(path))
        }
        3 => {
            let bytes: Vec<u8> = img.data().iter().map(|&v| quant(v)).collect();
            save(RgbImage::from_raw(w, h, bytes).unwrap().save(path))
        }
        4 => {
            let bytes: Vec<u8> = img
                .data()
                .chunks(4)
                .flat_map(|px| [quant(px[0]), quant(px[1]), quant(px[2]), quant_linear(px[3])])
                .collect();
            save(RgbaImage::from_raw(w, h, bytes).unwrap().save(path))
        }
        other => Err(Error::Image(format!("unsupported channel count {other}"))),
    }
}

/// Write a binary mask as 8-bit grayscale (false -> 0, true -> 255).
pub fn write_mask_png(mask: &[bool], width: usize, height: usize, path: &Path) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::Image(format!(
            "mask length {} does not match {width}x{height}",
            mask.len()
        )));
    }
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    GrayImage::from_raw(width as u32, height as u32, bytes)
        .unwrap()
        .save(path)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Read an 8-bit grayscale PNG as a binary mask, thresholding at 128.
pub fn read_mask_png(path: &Path) -> Result<(Vec<bool>, usize, usize)> {
    let img = read_png(path, Transfer::Linear)?;
    if img.channels() != 1 {
        return Err(Error::Image(format!(
            "{}: mask must be grayscale, got {} channels",
            path.display(),
            img.channels()
        )));
    }
    let mask = img.data().iter().map(|&v| v * 255.0 >= 128.0).collect();
    Ok((mask, img.width(), img.height()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn display_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let img = Image::from_fn(8, 8, 3, |x, y| {
            [x as f32 / 8.0, y as f32 / 8.0, 0.25, 0.0]
        });
        write_display_png(&img, &path).unwrap();
        let back = read_png(&path, Transfer::Srgb).unwrap();
        assert_eq!(back.channels(), 3);
        for (a, b) in img.data().iter().zip(back.data()) {
            // 8-bit sRGB quantization: generous but tight enough to catch a
            // missing/incorrectly applied transfer (which errs by ~0.2).
            assert_abs_diff_eq!(a, b, epsilon = 0.01);
        }
    }

    #[test]
    fn alpha_channel_skips_the_transfer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let mut img = Image::new(2, 1, 4);
        img.set(0, 0, 3, 0.5);
        img.set(1, 0, 3, 1.0);
        write_display_png(&img, &path).unwrap();
        let back = read_png(&path, Transfer::Srgb).unwrap();
        // Linear alpha 0.5 must stay 0.5, not decode to ~0.21.
        assert_abs_diff_eq!(back.get(0, 0, 3), 0.5, epsilon = 0.01);
        assert_abs_diff_eq!(back.get(1, 0, 3), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn out_of_range_values_clamp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let mut img = Image::new(2, 1, 3);
        img.set_rgb(0, 0, crate::math::Vec3::splat(-0.5));
        img.set_rgb(1, 0, crate::math::Vec3::splat(7.0));
        write_display_png(&img, &path).unwrap();
        let back = read_png(&path, Transfer::Linear).unwrap();
        assert_eq!(back.get(0, 0, 0), 0.0);
        assert_eq!(back.get(1, 0, 0), 1.0);
    }

    #[test]
    fn mask_round_trip_thresholds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = vec![true, false, false, true, true, false];
        write_mask_png(&mask, 3, 2, &path).unwrap();
        let (back, w, h) = read_mask_png(&path).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(back, mask);
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let err = read_png(Path::new("/nonexistent/zz.png"), Transfer::Linear).unwrap_err();
        assert!(err.to_string().contains("zz.png"), "{err}");
    }
}
