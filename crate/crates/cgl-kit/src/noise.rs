//! Additive Gaussian noise Z ~ N(0, c·I_p/p^α), its elliptical variant
//! N_i = λ_i·Z_i with E[λ²] = 1, and the associated diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CglError, Result};

/// Two-point elliptical scale law by default: λ ∈ {0.5, √1.75} equiprobable,
/// which has unit second moment and bounded support.
pub const DEFAULT_LAMBDA_LAW: [f64; 2] = [0.5, 1.3228756555322954]; // sqrt(1.75)

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseShape {
    Isotropic,
    /// Each vector is scaled by λ drawn uniformly from the two values.
    Elliptical { lambda_law: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub c: f64,
    pub shape: NoiseShape,
    pub seed: u64,
}

/// Serialized form used by CLI configs (keys alpha, c, shape, lambda_law, seed).
#[derive(Serialize, Deserialize)]
struct NoiseSpecRepr {
    alpha: f64,
    c: f64,
    shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_law: Option<[f64; 2]>,
    seed: u64,
}

impl Serialize for NoiseSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (shape, lambda_law) = match self.shape {
            NoiseShape::Isotropic => ("isotropic".to_string(), None),
            NoiseShape::Elliptical { lambda_law } => ("elliptical".to_string(), Some(lambda_law)),
        };
        NoiseSpecRepr {
            alpha: self.alpha,
            c: self.c,
            shape,
            lambda_law,
            seed: self.seed,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NoiseSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = NoiseSpecRepr::deserialize(d)?;
        let shape = match r.shape.as_str() {
            "isotropic" => NoiseShape::Isotropic,
            "elliptical" => NoiseShape::Elliptical {
                lambda_law: r.lambda_law.unwrap_or(DEFAULT_LAMBDA_LAW),
            },
            other => {
                return Err(serde::de::Error::custom(format!(
                    "unknown noise shape '{other}'"
                )))
            }
        };
        Ok(NoiseSpec {
            alpha: r.alpha,
            c: r.c,
            shape,
            seed: r.seed,
        })
    }
}

impl NoiseSpec {
    pub fn isotropic(alpha: f64, c: f64, seed: u64) -> Self {
        Self {
            alpha,
            c,
            shape: NoiseShape::Isotropic,
            seed,
        }
    }

    pub fn elliptical(alpha: f64, c: f64, seed: u64) -> Self {
        Self {
            alpha,
            c,
            shape: NoiseShape::Elliptical {
                lambda_law: DEFAULT_LAMBDA_LAW,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CglError::InvalidSpec(format!(
                "alpha must lie in [0,1], got {}",
                self.alpha
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(CglError::InvalidSpec(format!(
                "noise scale c must be positive, got {}",
                self.c
            )));
        }
        if let NoiseShape::Elliptical { lambda_law } = self.shape {
            let second = (lambda_law[0] * lambda_law[0] + lambda_law[1] * lambda_law[1]) / 2.0;
            if (second - 1.0).abs() > 1e-10 || lambda_law.iter().any(|&l| !(l > 0.0)) {
                return Err(CglError::InvalidSpec(
                    "elliptical lambda law must be positive with unit second moment".into(),
                ));
            }
        }
        Ok(())
    }

    /// Per-coordinate variance c/p^α.
    pub fn coord_variance(&self, p: usize) -> f64 {
        self.c / (p as f64).powf(self.alpha)
    }
}

/// A batch of noise vectors; `scales` carries the per-vector λ draws for the
/// elliptical shape.
#[derive(Debug, Clone)]
pub struct NoiseSample {
    pub vectors: Vec<Vec<f64>>,
    pub scales: Option<Vec<f64>>,
}

/// Draw `count` independent noise vectors of length p. Each vector uses its
/// own counter-based substream of (seed, index), so the result is identical
/// regardless of parallel execution order.
pub fn sample_noise(spec: &NoiseSpec, p: usize, count: usize) -> Result<NoiseSample> {
    spec.validate()?;
    if p == 0 || count == 0 {
        return Err(CglError::InvalidDims(
            "noise sample needs p >= 1 and count >= 1".into(),
        ));
    }
    let sd = spec.coord_variance(p).sqrt();
    let drawn: Vec<(Vec<f64>, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let lambda = match spec.shape {
                NoiseShape::Isotropic => 1.0,
                NoiseShape::Elliptical { lambda_law } => {
                    if rng.gen::<bool>() {
                        lambda_law[1]
                    } else {
                        lambda_law[0]
                    }
                }
            };
            let v: Vec<f64> = (0..p)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    lambda * sd * z
                })
                .collect();
            (v, lambda)
        })
        .collect();
    let scales = match spec.shape {
        NoiseShape::Isotropic => None,
        NoiseShape::Elliptical { .. } => Some(drawn.iter().map(|(_, l)| *l).collect()),
    };
    Ok(NoiseSample {
        vectors: drawn.into_iter().map(|(v, _)| v).collect(),
        scales,
    })
}

/// snrdb = 20·log₁₀(√(mean ‖X_i‖²) / √(mean ‖Z_i‖²)) with X the noisy data
/// and Z = noisy − clean.
pub fn snrdb(clean: &[Vec<f64>], noisy: &[Vec<f64>]) -> Result<f64> {
    if clean.len() != noisy.len() || clean.is_empty() {
        return Err(CglError::DimensionMismatch(format!(
            "snrdb got {} clean and {} noisy vectors",
            clean.len(),
            noisy.len()
        )));
    }
    let mut sig = 0.0;
    let mut noi = 0.0;
    for (c, x) in clean.iter().zip(noisy) {
        if c.len() != x.len() {
            return Err(CglError::DimensionMismatch(
                "snrdb vector length mismatch".into(),
            ));
        }
        sig += x.iter().map(|v| v * v).sum::<f64>();
        for (a, b) in c.iter().zip(x) {
            let z = b - a;
            noi += z * z;
        }
    }
    if noi == 0.0 {
        return Err(CglError::ZeroNoise);
    }
    Ok(10.0 * (sig / noi).log10())
}

/// Theoretical offset trace(Σ_i + Σ_j) = 2·c·p^{1−α} between noisy and clean
/// squared RID for one pair (isotropic noise only).
pub fn trace_correction(spec: &NoiseSpec, p: usize) -> Result<f64> {
    spec.validate()?;
    match spec.shape {
        NoiseShape::Isotropic => Ok(2.0 * spec.c * (p as f64).powf(1.0 - spec.alpha)),
        NoiseShape::Elliptical { .. } => Err(CglError::UnsupportedShape),
    }
}
