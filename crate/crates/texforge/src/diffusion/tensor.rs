//! Planar CHW float tensors for the denoiser, generic over `f32`/`f64`.
//!
//! The model works in [-1, 1]; images at I/O boundaries are [0, 1]. The two
//! conversions live here and nowhere else.

use crate::error::{Error, Result};
use crate::image::Image;

/// Element type of model tensors. `f32` for training/inference speed, `f64`
/// for finite-difference gradient verification.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssignOps
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn into_f64(self) -> f64 {
        self
    }
}

/// Planar row-major tensor: index (c, y, x) at `(c * h + y) * w + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Tensor<S> {
        Tensor { c, h, w, data: vec![S::zero(); c * h * w] }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<S>) -> Result<Tensor<S>> {
        if data.len() != c * h * w {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match {c}x{h}x{w}",
                data.len()
            )));
        }
        Ok(Tensor { c, h, w, data })
    }

    pub fn from_fn(c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize) -> S) -> Tensor<S> {
        let mut t = Tensor::zeros(c, h, w);
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    t.data[(ci * h + y) * w + x] = f(ci, y, x);
                }
            }
        }
        t
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> S {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: S) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }

    /// Row `y` of channel `c` as a contiguous slice.
    pub fn row(&self, c: usize, y: usize) -> &[S] {
        let start = (c * self.h + y) * self.w;
        &self.data[start..start + self.w]
    }

    pub fn row_mut(&mut self, c: usize, y: usize) -> &mut [S] {
        let start = (c * self.h + y) * self.w;
        &mut self.data[start..start + self.w]
    }

    /// Plane of channel `c` (h*w contiguous values).
    pub fn plane(&self, c: usize) -> &[S] {
        let start = c * self.h * self.w;
        &self.data[start..start + self.h * self.w]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `self + a * other` (shapes must match).
    pub fn add_scaled(&mut self, other: &Tensor<S>, a: S) {
        debug_assert_eq!(self.shape(), other.shape());
        for (d, o) in self.data.iter_mut().zip(&other.data) {
            *d += a * *o;
        }
    }

    /// Concatenate along channels; spatial sizes must match.
    pub fn concat(&self, other: &Tensor<S>) -> Tensor<S> {
        assert_eq!((self.h, self.w), (other.h, other.w), "concat spatial mismatch");
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor { c: self.c + other.c, h: self.h, w: self.w, data }
    }

    /// Split channels at `c0`: returns (first c0 channels, rest).
    pub fn split(&self, c0: usize) -> (Tensor<S>, Tensor<S>) {
        assert!(c0 <= self.c, "split point beyond channel count");
        let cut = c0 * self.h * self.w;
        (
            Tensor { c: c0, h: self.h, w: self.w, data: self.data[..cut].to_vec() },
            Tensor { c: self.c - c0, h: self.h, w: self.w, data: self.data[cut..].to_vec() },
        )
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Tensor<S> {
        Tensor { c: self.c, h: self.h, w: self.w, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Convert precision elementwise.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| T::from_f64(v.into_f64())).collect(),
        }
    }
}

/// [0, 1] image (interleaved) -> [-1, 1] model tensor (planar), v' = 2v - 1.
pub fn image_to_model<S: Scalar>(img: &Image) -> Tensor<S> {
    Tensor::from_fn(img.channels(), img.height(), img.width(), |c, y, x| {
        S::from_f64(2.0 * img.get(x, y, c) as f64 - 1.0)
    })
}

/// [-1, 1] model tensor -> [0, 1] image, clamped: v' = (v + 1) / 2.
pub fn model_to_image<S: Scalar>(t: &Tensor<S>) -> Image {
    let mut img = Image::new(t.width(), t.height(), t.channels());
    for c in 0..t.channels() {
        for y in 0..t.height() {
            for x in 0..t.width() {
                let v = ((t.get(c, y, x).into_f64() + 1.0) / 2.0).clamp(0.0, 1.0);
                img.set(x, y, c, v as f32);
            }
        }
    }
    img
}
