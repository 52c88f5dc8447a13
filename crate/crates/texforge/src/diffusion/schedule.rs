//! Noise schedule and the forward noising process.
//!
//! The schedule is a strictly decreasing sequence gamma[0..T] with
//! gamma[0] = 1 (clean) and gamma[T-1] = 0 (pure noise). The forward process
//! mixes signal and noise as x_t = sqrt(gamma) * x0 + sqrt(1 - gamma) * eps.

use crate::diffusion::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

const ENDPOINT_TOL: f64 = 1e-6;

/// Discretized noise level per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    gammas: Vec<f64>,
}

impl NoiseSchedule {
    /// Cosine schedule gamma(u) = cos^2(pi u / 2) sampled at T evenly spaced
    /// u in [0, 1]; smooth at both endpoints and exactly monotone.
    pub fn cosine(timesteps: usize) -> Result<NoiseSchedule> {
        let gammas = (0..timesteps)
            .map(|i| {
                let u = i as f64 / (timesteps - 1).max(1) as f64;
                let c = (std::f64::consts::FRAC_PI_2 * u).cos();
                c * c
            })
            .collect();
        NoiseSchedule::from_gammas(gammas)
    }

    /// Build from explicit levels, validating endpoints and monotonicity.
    pub fn from_gammas(gammas: Vec<f64>) -> Result<NoiseSchedule> {
        if gammas.len() < 2 {
            return Err(Error::invalid(format!(
                "schedule needs at least 2 timesteps, got {}",
                gammas.len()
            )));
        }
        if gammas.iter().any(|g| !g.is_finite() || *g < 0.0 || *g > 1.0) {
            return Err(Error::invalid("schedule levels must be finite and in [0, 1]"));
        }
        let first = gammas[0];
        let last = *gammas.last().unwrap();
        if (first - 1.0).abs() > ENDPOINT_TOL {
            return Err(Error::invalid(format!("schedule must start at 1, got {first}")));
        }
        if last.abs() > ENDPOINT_TOL {
            return Err(Error::invalid(format!("schedule must end at 0, got {last}")));
        }
        if gammas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("schedule must be strictly decreasing"));
        }
        Ok(NoiseSchedule { gammas })
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees >= 2 levels
    }

    pub fn gamma(&self, t: usize) -> f64 {
        self.gammas[t]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
}

/// Forward noising: x_t = sqrt(gamma(t)) * x0 + sqrt(1 - gamma(t)) * eps.
pub fn add_noise<S: Scalar>(
    x0: &Tensor<S>,
    t: usize,
    eps: &Tensor<S>,
    sched: &NoiseSchedule,
) -> Result<Tensor<S>> {
    if x0.shape() != eps.shape() {
        return Err(Error::invalid(format!(
            "x0 shape {:?} does not match noise shape {:?}",
            x0.shape(),
            eps.shape()
        )));
    }
    if t >= sched.len() {
        return Err(Error::invalid(format!(
            "timestep {t} out of range for a {}-step schedule",
            sched.len()
        )));
    }
    let g = sched.gamma(t);
    let a = S::from_f64(g.sqrt());
    let b = S::from_f64((1.0 - g).sqrt());
    let data = x0
        .data()
        .iter()
        .zip(eps.data())
        .map(|(&x, &e)| a * x + b * e)
        .collect();
    Tensor::from_vec(x0.channels(), x0.height(), x0.width(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn cosine_endpoints_and_monotonicity() {
        for t in [2, 5, 100, 1000] {
            let s = NoiseSchedule::cosine(t).unwrap();
            assert_eq!(s.len(), t);
            assert!((s.gamma(0) - 1.0).abs() <= 1e-6);
            assert!(s.gamma(t - 1).abs() <= 1e-6);
            for i in 1..t {
                assert!(s.gamma(i) < s.gamma(i - 1), "not strictly decreasing at {i}");
            }
        }
    }

    #[test]
    fn invalid_schedules_are_rejected()  {
        assert!(NoiseSchedule::from_gammas(vec![1.0]).is_err());
        assert!(NoiseSchedule::from_gammas(vec![0.9, 0.0]).is_err()); // bad start
        assert!(NoiseSchedule::from_gammas(vec![1.0, 0.1]).is_err()); // bad end
        assert!(NoiseSchedule::from_gammas(vec![1.0, 0.5, 0.5, 0.0]).is_err()); // plateau
        assert!(NoiseSchedule::from_gammas(vec![1.0, 0.2, 0.5, 0.0]).is_err()); // bump
        assert!(NoiseSchedule::from_gammas(vec![1.0, f64::NAN, 0.0]).is_err());
        assert!(NoiseSchedule::cosine(5).is_ok());
    }

    #[test]
    fn add_noise_clean_endpoint_is_exact() {
        let s = NoiseSchedule::cosine(10).unwrap();
        let x0 = Tensor::<f32>::from_fn(2, 3, 3, |c, y, x| 0.1 * (c + y + x) as f32 - 0.4);
        let eps = Tensor::<f32>::from_fn(2, 3, 3, |c, y, x| (c * y) as f32 - 0.7 * x as f32);
        let xt = add_noise(&x0, 0, &eps, &s).unwrap();
        assert_eq!(xt, x0); // gamma = 1: sqrt(1)*x0 + sqrt(0)*eps = x0 bitwise
    }

    #[test]
    fn add_noise_pure_noise_endpoint_is_exact() {
        let s = NoiseSchedule::cosine(10).unwrap();
        let x0 = Tensor::<f32>::from_fn(1, 2, 2, |_, y, x| (y + x) as f32);
        let eps = Tensor::<f32>::from_fn(1, 2, 2, |_, y, x| -1.5 * (y as f32) + x as f32);
        let xt = add_noise(&x0, 9, &eps, &s).unwrap();
        assert_eq!(xt, eps);
    }

    #[test]
    fn quarter_gamma_reference_value() {
        // gamma = 0.25, x0 = 1, eps = 0 -> x_t = sqrt(0.25) = 0.5.
        let s = NoiseSchedule::from_gammas(vec![1.0, 0.25, 0.0]).unwrap();
        let x0 = Tensor::<f64>::from_fn(1, 2, 2, |_, _, _| 1.0);
        let eps = Tensor::<f64>::zeros(1, 2, 2);
        let xt = add_noise(&x0, 1, &eps, &s).unwrap();
        for &v in xt.data() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn add_noise_validates_shape_and_timestep() {
        let s = NoiseSchedule::cosine(4).unwrap();
        let a = Tensor::<f32>::zeros(1, 2, 2);
        let b = Tensor::<f32>::zeros(1, 2, 3);
        assert!(add_noise(&a, 0, &b, &s).is_err());
        assert!(add_noise(&a, 4, &a, &s).is_err());
    }

    /// Empirical mean and variance of x_t match sqrt(gamma)*x0 and 1 - gamma
    /// within 3 standard errors over 10^4 draws.
    #[test]
    fn noising_statistics_match_theory() {
        let s = NoiseSchedule::from_gammas(vec![1.0, 0.36, 0.0]).unwrap();
        let x0 = Tensor::<f64>::from_fn(1, 1, 1, |_, _, _| 0.7);
        let n = 10_000;
        let mut rng = crate::rng::stream(99, &[1]);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            let eps = Tensor::<f64>::from_fn(1, 1, 1, |_, _, _| e);
            let v = add_noise(&x0, 1, &eps, &s).unwrap().get(0, 0, 0);
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let g: f64 = 0.36;
        let expect_mean = g.sqrt() * 0.7;
        let expect_var = 1.0 - g;
        // SE(mean) = sigma/sqrt(n); SE(var) ~ var * sqrt(2/(n-1)).
        let se_mean = expect_var.sqrt() / (n as f64).sqrt();
        let se_var = expect_var * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((mean - expect_mean).abs() < 3.0 * se_mean, "mean {mean} vs {expect_mean}");
        assert!((var - expect_var).abs() < 3.0 * se_var, "var {var} vs {expect_var}");
    }
}
