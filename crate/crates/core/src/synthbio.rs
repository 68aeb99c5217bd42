//! Synthetic identities and noisy samples standing in for face embeddings.
//!
//! An identity is a random unit vector. A genuine capture is that vector plus
//! per-coordinate Gaussian noise, renormalized. An impostor capture is an
//! unrelated random unit vector. Every draw is a pure function of its seed; the
//! three sampling roles use separate ChaCha streams so equal seeds never
//! produce correlated vectors across roles.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub const DEFAULT_DIM: usize = 512;
pub const MIN_DIM: usize = 8;

const IDENTITY_STREAM: u64 = 0;
const GENUINE_STREAM: u64 = 1;
const IMPOSTOR_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("embedding dimension {0} is below the minimum of {MIN_DIM}")]
    DimensionTooSmall(usize),
    #[error("noise sigma must be finite and nonnegative, got {0}")]
    InvalidSigma(f64),
    #[error("embedding values must be finite with nonzero norm")]
    Degenerate,
}

/// Unit-norm real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Scales `values` to unit L2 norm.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self, SynthError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::Degenerate);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SynthError::Degenerate);
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A synthetic person: their noise-free reference embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityProfile {
    pub mean: Embedding,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self, SynthError> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(SynthError::InvalidSigma(sigma));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

fn gaussian_vector(seed: u64, stream: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn check_dim(dim: usize) -> Result<(), SynthError> {
    if dim < MIN_DIM {
        return Err(SynthError::DimensionTooSmall(dim));
    }
    Ok(())
}

pub fn new_identity(seed: u64, dim: usize) -> Result<IdentityProfile, SynthError> {
    check_dim(dim)?;
    Ok(IdentityProfile {
        mean: Embedding::normalized(gaussian_vector(seed, IDENTITY_STREAM, dim))?,
        seed,
    })
}

pub fn sample_genuine(profile: &IdentityProfile, noise: NoiseModel, rng_seed: u64) -> Embedding {
    if noise.sigma == 0.0 {
        return profile.mean.clone();
    }
    let g = gaussian_vector(rng_seed, GENUINE_STREAM, profile.mean.dim());
    let noisy = profile
        .mean
        .values()
        .iter()
        .zip(g)
        .map(|(m, g)| m + noise.sigma * g)
        .collect();
    // Unit mean plus finite noise cannot be degenerate except with probability zero.
    Embedding::normalized(noisy).expect("noisy sample has nonzero norm")
}

pub fn sample_impostor(rng_seed: u64, dim: usize) -> Result<Embedding, SynthError> {
    check_dim(dim)?;
    Embedding::normalized(gaussian_vector(rng_seed, IMPOSTOR_STREAM, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::hamming;
    use crate::quantize::{quantize, QuantizerConfig};

    #[test]
    fn identity_is_deterministic_and_seed_dependent() {
        assert_eq!(new_identity(1, 512).unwrap(), new_identity(1, 512).unwrap());
        let a = new_identity(1, 512).unwrap();
        let b = new_identity(2, 512).unwrap();
        assert!(a.mean.values().iter().zip(b.mean.values()).any(|(x, y)| x != y));
    }

    #[test]
    fn identity_is_unit_norm() {
        let p = new_identity(7, 512).unwrap();
        assert_eq!(p.mean.dim(), 512);
        assert!((p.mean.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_dimension_is_rejected() {
        assert_eq!(new_identity(1, 7), Err(SynthError::DimensionTooSmall(7)));
        assert!(sample_impostor(1, 0).is_err());
        assert!(new_identity(1, 8).is_ok());
    }

    #[test]
    fn sigma_validation() {
        assert!(NoiseModel::new(-0.1).is_err());
        assert!(NoiseModel::new(f64::NAN).is_err());
        assert!(NoiseModel::new(0.0).is_ok());
    }

    #[test]
    fn zero_noise_returns_the_mean() {
        let p = new_identity(3, 512).unwrap();
        let zero = NoiseModel::new(0.0).unwrap();
        let cfg = QuantizerConfig::prefix(512, 511).unwrap();
        for s in 0..20 {
            let e = sample_genuine(&p, zero, s);
            assert_eq!(e, p.mean);
            assert_eq!(quantize(&e, &cfg).unwrap(), quantize(&p.mean, &cfg).unwrap());
        }
    }

    #[test]
    fn genuine_sampling_is_deterministic() {
        let p = new_identity(3, 512).unwrap();
        let noise = NoiseModel::new(0.02).unwrap();
        assert_eq!(sample_genuine(&p, noise, 9), sample_genuine(&p, noise, 9));
        assert_ne!(sample_genuine(&p, noise, 9), sample_genuine(&p, noise, 10));
        assert!((sample_genuine(&p, noise, 9).norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn impostor_is_deterministic_unit_and_not_the_identity() {
        let a = sample_impostor(4, 512).unwrap();
        assert_eq!(a, sample_impostor(4, 512).unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_ne!(a, new_identity(4, 512).unwrap().mean);
    }

    fn mean_distance(sigma: f64, trials: u64) -> f64 {
        let p = new_identity(42, 512).unwrap();
        let cfg = QuantizerConfig::prefix(512, 511).unwrap();
        let reference = quantize(&p.mean, &cfg).unwrap();
        let noise = NoiseModel::new(sigma).unwrap();
        let total: usize = (0..trials)
            .map(|s| {
                let q = quantize(&sample_genuine(&p, noise, s), &cfg).unwrap();
                hamming(&q, &reference).unwrap()
            })
            .sum();
        total as f64 / trials as f64
    }

    #[test]
    fn genuine_drift_grows_with_sigma() {
        let d: Vec<f64> = [0.01, 0.02, 0.05].iter().map(|&s| mean_distance(s, 1000)).collect();
        assert!(d[0] <= d[1] && d[1] <= d[2], "{d:?}");
    }

    #[test]
    fn impostor_distance_concentrates_at_half() {
        // Each draw is Binomial(511, 1/2) against a fixed reference. The mean
        // must sit within 5 per-draw sd of n/2, and the pooled count over all
        // 1000 draws must pass a two-sided binomial z-test at 99%.
        let p = new_identity(42, 512).unwrap();
        let cfg = QuantizerConfig::prefix(512, 511).unwrap();
        let reference = quantize(&p.mean, &cfg).unwrap();
        let n = 511.0;
        let trials = 1000.0;
        let distances: Vec<f64> = (0..1000)
            .map(|s| {
                let q = quantize(&sample_impostor(s, 512).unwrap(), &cfg).unwrap();
                hamming(&q, &reference).unwrap() as f64
            })
            .collect();
        let total: f64 = distances.iter().sum();
        let mean = total / trials;
        assert!((mean - n / 2.0).abs() <= 5.0 * (n / 4.0f64).sqrt(), "mean {mean}");
        let z = (total - n * trials / 2.0) / (n * trials / 4.0).sqrt();
        assert!(z.abs() < 2.576, "z = {z}");
    }
}
