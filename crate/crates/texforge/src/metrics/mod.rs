//! Pixel-space quality metrics: MSE, PSNR, SSIM, MS-SSIM, and a tileability
//! seam score, plus a serializable per-pair report with aggregate statistics.
//!
//! SSIM uses an 8x8 uniform window (not the classic 11x11 Gaussian) because
//! evaluation images here are 32-64 px; constants are the standard
//! K1 = 0.01, K2 = 0.03 on a unit dynamic range. All internal accumulation
//! is f64, and report aggregation uses pairwise summation so results do not
//! depend on evaluation order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 8;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const C1: f64 = K1 * K1; // L = 1
const C2: f64 = K2 * K2;

/// Standard five-scale MS-SSIM weights; the first `levels` are renormalized.
const MS_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn check_same_shape(a: &Image, b: &Image) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::invalid(format!(
            "image shapes differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

fn check_unit_range(img: &Image, what: &str) -> Result<()> {
    for &v in img.data() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "{what} must lie in [0, 1] for structural metrics, found {v}"
            )));
        }
    }
    Ok(())
}

/// Sum with pairwise splitting: deterministic and O(log n) error growth.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Mean squared difference over all samples of two same-shaped images.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_same_shape(a, b)?;
    let terms: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .collect();
    Ok(pairwise_sum(&terms) / terms.len().max(1) as f64)
}

/// Peak signal-to-noise ratio in dB on a unit dynamic range.
/// `None` means the images are identical (infinite PSNR).
pub fn psnr(a: &Image, b: &Image) -> Result<Option<f64>> {
    let e = mse(a, b)?;
    if e == 0.0 {
        Ok(None)
    } else {
        Ok(Some(-10.0 * e.log10()))
    }
}

struct WindowStats {
    ma: f64,
    mb: f64,
    va: f64,
    vb: f64,
    cov: f64,
}

fn window_stats(a: &Image, b: &Image, ch: usize, x0: usize, y0: usize, win: usize) -> WindowStats {
    let n = (win * win) as f64;
    let mut sa = 0.0;
    let mut sb = 0.0;
    for y in y0..y0 + win {
        for x in x0..x0 + win {
            sa += a.get(x, y, ch) as f64;
            sb += b.get(x, y, ch) as f64;
        }
    }
    let ma = sa / n;
    let mb = sb / n;
    let mut va = 0.0;
    let mut vb = 0.0;
    let mut cov = 0.0;
    for y in y0..y0 + win {
        for x in x0..x0 + win {
            let da = a.get(x, y, ch) as f64 - ma;
            let db = b.get(x, y, ch) as f64 - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
    }
    WindowStats { ma, mb, va: va / n, vb: vb / n, cov: cov / n }
}

/// Mean luminance term and mean contrast-structure term over all sliding
/// windows and channels.
fn ssim_terms(a: &Image, b: &Image, win: usize) -> Result<(f64, f64, f64)> {
    check_same_shape(a, b)?;
    if a.width() < win || a.height() < win {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than the {win}x{win} SSIM window",
            a.width(),
            a.height()
        )));
    }
    let mut lum = Vec::new();
    let mut cs = Vec::new();
    let mut full = Vec::new();
    for ch in 0..a.channels() {
        for y0 in 0..=a.height() - win {
            for x0 in 0..=a.width() - win {
                let s = window_stats(a, b, ch, x0, y0, win);
                let l = (2.0 * s.ma * s.mb + C1) / (s.ma * s.ma + s.mb * s.mb + C1);
                let c = (2.0 * s.cov + C2) / (s.va + s.vb + C2);
                lum.push(l);
                cs.push(c);
                full.push(l * c);
            }
        }
    }
    let n = lum.len() as f64;
    Ok((
        pairwise_sum(&lum) / n,
        pairwise_sum(&cs) / n,
        pairwise_sum(&full) / n,
    ))
}

/// Structural similarity with a `window`-square uniform filter.
pub fn ssim_with(a: &Image, b: &Image, window: usize) -> Result<f64> {
    if window < 2 {
        return Err(Error::invalid("SSIM window must be at least 2"));
    }
    check_unit_range(a, "first image")?;
    check_unit_range(b, "second image")?;
    let (_, _, full) = ssim_terms(a, b, window)?;
    Ok(full)
}

/// Structural similarity with the default 8x8 uniform window.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_with(a, b, SSIM_WINDOW)
}

/// Exact 2x2 average pooling; dimensions must be even.
fn downsample2(img: &Image) -> Image {
    let (w, h, c) = (img.width() / 2, img.height() / 2, img.channels());
    let mut out = Image::new(w, h, c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let s = img.get(2 * x, 2 * y, ch) as f64
                    + img.get(2 * x + 1, 2 * y, ch) as f64
                    + img.get(2 * x, 2 * y + 1, ch) as f64
                    + img.get(2 * x + 1, 2 * y + 1, ch) as f64;
                out.set(x, y, ch, (s / 4.0) as f32);
            }
        }
    }
    out
}

/// Multi-scale SSIM over `levels` dyadic scales (default 3).
///
/// Contrast-structure terms are taken at every scale and the luminance term
/// only at the coarsest, with the standard five-scale weights renormalized to
/// the chosen level count. Negative contrast-structure means are clamped to
/// zero before exponentiation.
pub fn ms_ssim(a: &Image, b: &Image, levels: usize) -> Result<f64> {
    if !(1..=5).contains(&levels) {
        return Err(Error::invalid(format!("MS-SSIM levels must be 1..=5, got {levels}")));
    }
    check_same_shape(a, b)?;
    check_unit_range(a, "first image")?;
    check_unit_range(b, "second image")?;
    let factor = 1usize << (levels - 1);
    if a.width() % factor != 0 || a.height() % factor != 0 {
        return Err(Error::invalid(format!(
            "image {}x{} not divisible by the {levels}-level factor {factor}",
            a.width(),
            a.height()
        )));
    }
    if a.width() / factor < SSIM_WINDOW || a.height() / factor < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "coarsest scale {}x{} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window",
            a.width() / factor,
            a.height() / factor
        )));
    }
    let wsum: f64 = MS_WEIGHTS[..levels].iter().sum();
    let mut ca = a.clone();
    let mut cb = b.clone();
    let mut score = 1.0f64;
    for (i, w) in MS_WEIGHTS[..levels].iter().enumerate() {
        let weight = w / wsum;
        let (lum, cs, _) = ssim_terms(&ca, &cb, SSIM_WINDOW)?;
        let cs = cs.max(0.0);
        score *= cs.powf(weight);
        if i + 1 == levels {
            score *= lum.max(0.0).powf(weight);
        } else {
            ca = downsample2(&ca);
            cb = downsample2(&cb);
        }
    }
    Ok(score)
}

/// Tileability score: mean absolute wrap-boundary gradient divided by mean
/// absolute interior gradient. 1.0 means the wrap seam is statistically
/// indistinguishable from the interior; larger values mean a visible seam.
/// A constant image is defined as 0 (no gradients at all).
pub fn seam_score(tex: &Image) -> Result<f64> {
    let (w, h) = (tex.width(), tex.height());
    if w < 4 || h < 4 {
        return Err(Error::invalid(format!("seam score needs at least 4x4, got {w}x{h}")));
    }
    if !tex.is_finite() {
        return Err(Error::invalid("seam score input has non-finite samples"));
    }
    let mut interior = Vec::new();
    let mut wrap = Vec::new();
    for ch in 0..tex.channels() {
        for y in 0..h {
            for x in 0..w - 1 {
                interior.push((tex.get(x + 1, y, ch) as f64 - tex.get(x, y, ch) as f64).abs());
            }
            wrap.push((tex.get(0, y, ch) as f64 - tex.get(w - 1, y, ch) as f64).abs());
        }
        for x in 0..w {
            for y in 0..h - 1 {
                interior.push((tex.get(x, y + 1, ch) as f64 - tex.get(x, y, ch) as f64).abs());
            }
            wrap.push((tex.get(x, 0, ch) as f64 - tex.get(x, h - 1, ch) as f64).abs());
        }
    }
    let interior_mean = pairwise_sum(&interior) / interior.len() as f64;
    if interior_mean == 0.0 {
        return Ok(0.0);
    }
    let wrap_mean = pairwise_sum(&wrap) / wrap.len() as f64;
    Ok(wrap_mean / interior_mean)
}

/// Metrics for one evaluated pair. `psnr: None` marks identical images
/// (infinite PSNR).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub mse: f64,
    pub psnr: Option<f64>,
    pub ssim: f64,
    pub ms_ssim: f64,
    pub seam_score: f64,
}

impl PairMetrics {
    /// Compute all pair metrics; the seam score is taken on `output` alone.
    pub fn compute(id: &str, output: &Image, target: &Image) -> Result<PairMetrics> {
        Ok(PairMetrics {
            id: id.to_string(),
            mse: mse(output, target)?,
            psnr: psnr(output, target)?,
            ssim: ssim(output, target)?,
            ms_ssim: ms_ssim(output, target, 3)?,
            seam_score: seam_score(output)?,
        })
    }
}

/// Mean and population standard deviation of one metric across pairs.
/// `infinite` counts pairs excluded for infinite PSNR.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub infinite: usize,
}

fn summarize(metric: &str, values: &[f64], infinite: usize) -> MetricSummary {
    if values.is_empty() {
        return MetricSummary { metric: metric.to_string(), mean: f64::NAN, std: f64::NAN, infinite };
    }
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let devs: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let std = (pairwise_sum(&devs) / n).sqrt();
    MetricSummary { metric: metric.to_string(), mean, std, infinite }
}

/// Per-pair metric records plus aggregate statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: Vec<PairMetrics>,
    pub summary: Vec<MetricSummary>,
}

impl MetricReport {
    pub fn from_pairs(pairs: Vec<PairMetrics>) -> MetricReport {
        let take = |f: fn(&PairMetrics) -> f64| -> Vec<f64> { pairs.iter().map(f).collect() };
        let psnr_finite: Vec<f64> = pairs.iter().filter_map(|p| p.psnr).collect();
        let infinite = pairs.len() - psnr_finite.len();
        let summary = vec![
            summarize("mse", &take(|p| p.mse), 0),
            summarize("psnr", &psnr_finite, infinite),
            summarize("ssim", &take(|p| p.ssim), 0),
            summarize("ms_ssim", &take(|p| p.ms_ssim), 0),
            summarize("seam_score", &take(|p| p.seam_score), 0),
        ];
        MetricReport { pairs, summary }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Aligned plain-text table: one row per pair plus mean/std rows.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let id_w = self
            .pairs
            .iter()
            .map(|p| p.id.len())
            .chain(["pair".len(), "std".len()])
            .max()
            .unwrap_or(4);
        let _ = writeln!(
            out,
            "{:<id_w$}  {:>10}  {:>8}  {:>8}  {:>8}  {:>10}",
            "pair", "mse", "psnr", "ssim", "ms_ssim", "seam_score"
        );
        for p in &self.pairs {
            let psnr = p.psnr.map_or("inf".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                out,
                "{:<id_w$}  {:>10.6}  {:>8}  {:>8.4}  {:>8.4}  {:>10.4}",
                p.id, p.mse, psnr, p.ssim, p.ms_ssim, p.seam_score
            );
        }
        let row = |name: &str, pick: fn(&MetricSummary) -> f64, s: &[MetricSummary]| {
            format!(
                "{:<id_w$}  {:>10.6}  {:>8.3}  {:>8.4}  {:>8.4}  {:>10.4}",
                name,
                pick(&s[0]),
                pick(&s[1]),
                pick(&s[2]),
                pick(&s[3]),
                pick(&s[4])
            )
        };
        let _ = writeln!(out, "{}", row("mean", |s| s.mean, &self.summary));
        let _ = writeln!(out, "{}", row("std", |s| s.std, &self.summary));
        if self.summary[1].infinite > 0 {
            let _ = writeln!(
                out,
                "({} pair(s) with infinite psnr excluded from the psnr aggregate)",
                self.summary[1].infinite
            );
        }
        out
    }
}
