//! Portable Float Map I/O for linear-light images.
//!
//! `PF` (RGB) and `Pf` (grayscale) variants, little-endian payload (negative
//! scale), rows stored bottom-to-top per the format convention. Values pass
//! through untouched, so write→read round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

pub fn write_pfm(img: &Image, path: &Path) -> Result<()> {
    let channels = img.channels();
    if channels != 1 && channels != 3 {
        return Err(Error::Image(format!(
            "PFM supports 1 or 3 channels, got {channels}"
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let tag = if channels == 3 { "PF" } else { "Pf" };
    write!(w, "{tag}\n{} {}\n-1.0\n", img.width(), img.height())?;
    // Bottom-to-top row order.
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            for c in 0..channels {
                w.write_all(&img.get(x, y, c).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<Image> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::MissingFile {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_pfm(&bytes).map_err(|msg| Error::Image(format!("{}: {msg}", path.display())))
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> std::result::Result<String, String> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let tag = token(&mut pos)?;
    let channels = match tag.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(format!("not a PFM file (tag {other:?})")),
    };
    let width: usize = token(&mut pos)?.parse().map_err(|_| "bad width".to_string())?;
    let height: usize = token(&mut pos)?.parse().map_err(|_| "bad height".to_string())?;
    let scale: f32 = token(&mut pos)?.parse().map_err(|_| "bad scale".to_string())?;
    if width == 0 || height == 0 {
        return Err("zero dimension".into());
    }
    // Single whitespace byte separates header from payload.
    pos += 1;
    let count = width * height * channels;
    let need = count * 4;
    if bytes.len() < pos + need {
        return Err(format!(
            "payload truncated: need {need} bytes, have {}",
            bytes.len().saturating_sub(pos)
        ));
    }
    let little_endian = scale < 0.0;
    let mut img = Image::new(width, height, channels);
    let mut off = pos;
    for y in (0..height).rev() {
        for x in 0..width {
            for c in 0..channels {
                let raw: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
                let v = if little_endian {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                img.set(x, y, c, v);
                off += 4;
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pfm");
        let img = Image::from_fn(5, 3, 3, |x, y| {
            [x as f32 * 0.1, y as f32 - 1.5, (x * y) as f32 * 1e-3, 0.0]
        });
        write_pfm(&img, &path).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn grayscale_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pfm");
        let img = Image::from_fn(4, 4, 1, |x, y| [(x + 4 * y) as f32, 0.0, 0.0, 0.0]);
        write_pfm(&img, &path).unwrap();
        assert_eq!(read_pfm(&path).unwrap(), img);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        let img = Image::new(4, 4, 3);
        write_pfm(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        let err = read_pfm(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn rejects_non_pfm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pfm");
        std::fs::write(&path, b"P6\n1 1\n255\nabc").unwrap();
        assert!(read_pfm(&path).is_err());
    }
}
