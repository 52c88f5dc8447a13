//! Ancestral sampling with classifier-free guidance.
//!
//! The walk starts from pure Gaussian noise at the second-to-last noise level
//! (the last level carries zero signal, so noise prediction cannot be
//! inverted there) and steps down a rounded sub-grid of the schedule. Each
//! step forms the clean-image estimate, clamps it to the model range, and
//! draws the posterior sample; the final step is deterministic.

use rand_distr::{Distribution, StandardNormal};

use crate::diffusion::net::Denoiser;
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::rng;

const SAMPLE_STREAM_TAG: u64 = 0x736d_7000; // "smp"

#[derive(Debug, Clone, PartialEq)]
pub struct SampleParams {
    /// Number of denoising transitions (at most the schedule length).
    pub steps: usize,
    /// Guidance scale; 1 reproduces the conditional branch exactly.
    pub guidance: f64,
    pub seed: u64,
}

/// eps_c + (s - 1) * (eps_c - eps_u): affine extrapolation away from the
/// unconditional prediction.
pub fn combine_guidance<S: Scalar>(e_u: &Tensor<S>, e_c: &Tensor<S>, s: f64) -> Tensor<S> {
    assert_eq!(e_u.shape(), e_c.shape(), "guidance over mismatched shapes");
    let w = S::from_f64(s - 1.0);
    let (c, h, wd) = e_c.shape();
    let data = e_c.data().iter().zip(e_u.data()).map(|(&ec, &eu)| ec + w * (ec - eu)).collect();
    Tensor::from_vec(c, h, wd, data).expect("same shape")
}

/// Guided noise prediction. With guidance 1 or no condition this is a single
/// forward pass, bit-identical to the plain conditional prediction.
pub fn cfg_predict<S: Scalar>(
    net: &Denoiser<S>,
    x_t: &Tensor<S>,
    t: usize,
    cond: Option<&Tensor<S>>,
    guidance: f64,
) -> Result<Tensor<S>> {
    if !guidance.is_finite() || guidance < 1.0 {
        return Err(Error::invalid(format!("guidance scale {guidance} must be finite and >= 1")));
    }
    let e_c = net.predict(x_t, t, cond)?;
    if guidance == 1.0 || cond.is_none() {
        return Ok(e_c);
    }
    let e_u = net.predict(x_t, t, None)?;
    Ok(combine_guidance(&e_u, &e_c, guidance))
}

/// Strictly decreasing timestep grid from the second-to-last level to 0.
fn timestep_grid(timesteps: usize, steps: usize) -> Vec<usize> {
    let hi = timesteps - 2;
    let mut taus = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let tau = (hi as f64 * (1.0 - k as f64 / steps as f64)).round() as usize;
        if taus.last() != Some(&tau) {
            taus.push(tau);
        }
    }
    taus
}

/// Draw one sample of shape (model channels, height, width). Deterministic
/// given (net, condition, params).
pub fn sample<S: Scalar>(
    net: &Denoiser<S>,
    sched: &NoiseSchedule,
    cond: Option<&Tensor<S>>,
    height: usize,
    width: usize,
    params: &SampleParams,
) -> Result<Tensor<S>> {
    if sched.len() < 3 {
        return Err(Error::invalid("sampling requires a schedule with at least 3 levels"));
    }
    if params.steps == 0 || params.steps > sched.len() {
        return Err(Error::invalid(format!(
            "step count {} must lie in 1..={}",
            params.steps,
            sched.len()
        )));
    }
    let c = net.arch().image_channels;
    if let Some(cd) = cond {
        if cd.shape() != (c, height, width) {
            return Err(Error::invalid(format!(
                "condition shape {:?} does not match requested ({c}, {height}, {width})",
                cd.shape()
            )));
        }
    }
    let mut r = rng::stream(params.seed, &[SAMPLE_STREAM_TAG]);
    let mut x = Tensor::from_fn(c, height, width, |_, _, _| {
        let z: f64 = StandardNormal.sample(&mut r);
        S::from_f64(z)
    });
    let taus = timestep_grid(sched.len(), params.steps);
    for (k, pair) in taus.windows(2).enumerate() {
        let (t, s) = (pair[0], pair[1]);
        let g_t = sched.gamma(t);
        let g_s = sched.gamma(s);
        let eps = cfg_predict(net, &x, t, cond, params.guidance)?;
        // x0 estimate from the noise prediction, clamped to the model range.
        let inv_sqrt_gt = S::from_f64(1.0 / g_t.sqrt());
        let sqrt_om_gt = S::from_f64((1.0 - g_t).sqrt());
        let lo = S::from_f64(-1.0);
        let hi = S::one();
        let x0_hat: Vec<S> = x
            .data()
            .iter()
            .zip(eps.data())
            .map(|(&xv, &ev)| {
                let v = (xv - sqrt_om_gt * ev) * inv_sqrt_gt;
                if v < lo {
                    lo
                } else if v > hi {
                    hi
                } else {
                    v
                }
            })
            .collect();
        // Posterior q(x_s | x_t, x0).
        let alpha = g_t / g_s;
        let denom = 1.0 - g_t;
        let coef_x = S::from_f64(alpha.sqrt() * (1.0 - g_s) / denom);
        let coef_x0 = S::from_f64(g_s.sqrt() * (1.0 - alpha) / denom);
        let var = (1.0 - g_s) * (1.0 - alpha) / denom;
        let sigma = S::from_f64(var.sqrt());
        let mut next = Vec::with_capacity(x.data().len());
        if var > 0.0 {
            for (&xv, &x0v) in x.data().iter().zip(&x0_hat) {
                let z: f64 = StandardNormal.sample(&mut r);
                next.push(coef_x * xv + coef_x0 * x0v + sigma * S::from_f64(z));
            }
        } else {
            for (&xv, &x0v) in x.data().iter().zip(&x0_hat) {
                next.push(coef_x * xv + coef_x0 * x0v);
            }
        }
        x = Tensor::from_vec(c, height, width, next)?;
        if !x.is_finite() {
            return Err(Error::Sampling {
                step: k,
                msg: format!("non-finite state after transition t={t} -> t={s}"),
            });
        }
    }
    Ok(x.map(|v| {
        let lo = S::from_f64(-1.0);
        if v < lo {
            lo
        } else if v > S::one() {
            S::one()
        } else {
            v
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::net::{Arch, PadMode};

    fn tiny_arch() -> Arch {
        Arch {
            image_channels: 1,
            image_size: 8,
            widths: [4, 4, 4],
            groups: 2,
            temb_dim: 8,
            temb_hidden: 8,
            pad: PadMode::Circular,
        }
    }

    /// A tiny net whose condition path is active (not zero-initialized).
    fn lively_net(seed: u64) -> Denoiser<f32> {
        let mut net: Denoiser<f32> = Denoiser::init(&tiny_arch(), seed).unwrap();
        for (name, _, t) in net.tensors_mut() {
            if name == "stem.w" {
                for (i, v) in t.iter_mut().enumerate() {
                    if (i / 9) % 2 == 1 {
                        *v = 0.02 * ((i % 11) as f32 - 5.0);
                    }
                }
            }
        }
        net
    }

    fn randn(c: usize, h: usize, w: usize, seed: u64) -> Tensor<f32> {
        let mut r = rng::stream(seed, &[0xabc]);
        Tensor::from_fn(c, h, w, |_, _, _| {
            let z: f64 = StandardNormal.sample(&mut r);
            z as f32
        })
    }

    #[test]
    fn guidance_combination_scalar_probe() {
        let e_u = Tensor::from_fn(1, 2, 2, |_, _, _| 0.2f32);
        let e_c = Tensor::from_fn(1, 2, 2, |_, _, _| 0.4f32);
        let out = combine_guidance(&e_u, &e_c, 2.0);
        for v in out.data() {
            assert!((v - 0.6).abs() < 1e-6, "expected 0.6, got {v}");
        }
        // s = 1 leaves the conditional prediction untouched.
        let same = combine_guidance(&e_u, &e_c, 1.0);
        for v in same.data() {
            assert!((v - 0.4).abs() < 1e-7);
        }
    }

    #[test]
    fn unit_guidance_is_bit_exact_conditional() {
        let net = lively_net(3);
        let x = randn(1, 8, 8, 10);
        let cond = randn(1, 8, 8, 11);
        let direct = net.predict(&x, 4, Some(&cond)).unwrap();
        let guided = cfg_predict(&net, &x, 4, Some(&cond), 1.0).unwrap();
        assert_eq!(direct, guided);
    }

    #[test]
    fn guidance_is_affine_in_scale() {
        let net = lively_net(3);
        let x = randn(1, 8, 8, 10);
        let cond = randn(1, 8, 8, 11);
        let e1 = cfg_predict(&net, &x, 4, Some(&cond), 1.0).unwrap();
        let e15 = cfg_predict(&net, &x, 4, Some(&cond), 1.5).unwrap();
        let e2 = cfg_predict(&net, &x, 4, Some(&cond), 2.0).unwrap();
        // e(1.5) must equal the midpoint of e(1) and e(2).
        let max = e15
            .data()
            .iter()
            .zip(e1.data().iter().zip(e2.data()))
            .map(|(m, (a, b))| (m - 0.5 * (a + b)).abs())
            .fold(0.0f32, f32::max);
        assert!(max < 1e-6, "guidance deviates from affine by {max}");
    }

    #[test]
    fn missing_condition_ignores_guidance_scale() {
        let net = lively_net(3);
        let x = randn(1, 8, 8, 10);
        let uncond = net.predict(&x, 4, None).unwrap();
        for s in [1.0, 2.0, 7.5] {
            let out = cfg_predict(&net, &x, 4, None, s).unwrap();
            assert_eq!(out, uncond, "guidance {s} should reduce to the unconditional branch");
        }
    }

    #[test]
    fn sub_unit_guidance_is_rejected() {
        let net = lively_net(3);
        let x = randn(1, 8, 8, 10);
        for s in [0.9, 0.0, -2.0, f64::NAN] {
            let err = cfg_predict(&net, &x, 4, None, s).unwrap_err();
            assert!(!err.is_numerical(), "guidance {s} should be an argument error");
        }
    }

    #[test]
    fn grid_spans_second_to_last_level_down_to_zero() {
        let g = timestep_grid(100, 10);
        assert_eq!(*g.first().unwrap(), 98);
        assert_eq!(*g.last().unwrap(), 0);
        assert!(g.windows(2).all(|w| w[0] > w[1]), "grid must strictly decrease: {g:?}");
        assert_eq!(g.len(), 11);
        // As many transitions as levels when steps saturate.
        let full = timestep_grid(10, 10);
        assert_eq!(*full.first().unwrap(), 8);
        assert_eq!(*full.last().unwrap(), 0);
        assert!(full.windows(2).all(|w| w[0] > w[1]));
        // One step goes straight from the top level to zero.
        assert_eq!(timestep_grid(100, 1), vec![98, 0]);
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let net = lively_net(5);
        let sched = NoiseSchedule::cosine(10).unwrap();
        let cond = randn(1, 8, 8, 20);
        let p = SampleParams { steps: 6, guidance: 1.5, seed: 9 };
        let a = sample(&net, &sched, Some(&cond), 8, 8, &p).unwrap();
        let b = sample(&net, &sched, Some(&cond), 8, 8, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (1, 8, 8));
        assert!(a.data().iter().all(|v| (-1.0f32..=1.0).contains(v)));
        let c = sample(&net, &sched, Some(&cond), 8, 8, &SampleParams { seed: 10, ..p }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_validates_arguments() {
        let net = lively_net(5);
        let sched = NoiseSchedule::cosine(10).unwrap();
        let p = SampleParams { steps: 0, guidance: 1.0, seed: 0 };
        assert!(sample::<f32>(&net, &sched, None, 8, 8, &p).is_err());
        let p = SampleParams { steps: 11, guidance: 1.0, seed: 0 };
        assert!(sample::<f32>(&net, &sched, None, 8, 8, &p).is_err());
        // Condition shape must match the requested size.
        let cond = randn(1, 16, 16, 2);
        let p = SampleParams { steps: 5, guidance: 1.0, seed: 0 };
        assert!(sample(&net, &sched, Some(&cond), 8, 8, &p).is_err());
        // Steps may saturate the schedule length.
        let p = SampleParams { steps: 10, guidance: 1.0, seed: 0 };
        assert!(sample::<f32>(&net, &sched, None, 8, 8, &p).is_ok());
    }

    #[test]
    fn non_finite_model_reports_the_step() {
        let mut net = lively_net(5);
        for (name, _, t) in net.tensors_mut() {
            if name == "head.b" {
                t[0] = f32::NAN;
            }
        }
        let sched = NoiseSchedule::cosine(10).unwrap();
        let p = SampleParams { steps: 4, guidance: 1.0, seed: 1 };
        let err = sample::<f32>(&net, &sched, None, 8, 8, &p).unwrap_err();
        assert!(err.is_numerical());
        let msg = err.to_string();
        assert!(msg.contains("step 0"), "first transition should fail: {msg}");
    }
}
