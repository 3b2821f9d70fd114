//! Synthetic data generators: the twisted bell-shaped closed curve, the
//! trefoil knot, and randomly rotated surrogate-image sets with ground
//! truth labels.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CglError, Result};
use crate::rid::{rid, rotate, CircularImage, RotationIndex};

/// n points embedded in R^p together with their curve parameters.
#[derive(Debug, Clone)]
pub struct EmbeddedPointCloud {
    /// n×p; row i is the i-th point.
    pub points: DMatrix<f64>,
    pub params: Vec<f64>,
    pub p: usize,
}

/// The twisted bell-shaped curve
/// ι(t) = [cos t, b(t)·cos(π(cos t+1)/4), b(t)·sin(π(cos t+1)/4), 0, …, 0]
/// with b(t) = 1 − 0.8·exp(−8 cos²t), sampled at n i.i.d. uniform t.
pub fn bell_curve(n: usize, p: usize, seed: u64) -> Result<EmbeddedPointCloud> {
    if p < 3 {
        return Err(CglError::InvalidDims(format!(
            "bell curve needs p >= 3, got {p}"
        )));
    }
    if n == 0 {
        return Err(CglError::InvalidDims("bell curve needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<f64> = (0..n)
        .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
        .collect();
    let mut points = DMatrix::<f64>::zeros(n, p);
    for (i, &t) in params.iter().enumerate() {
        let [x, y, z] = bell_point(t);
        points[(i, 0)] = x;
        points[(i, 1)] = y;
        points[(i, 2)] = z;
    }
    Ok(EmbeddedPointCloud { points, params, p })
}

/// ι(t) for the bell curve, first three coordinates.
pub fn bell_point(t: f64) -> [f64; 3] {
    let ct = t.cos();
    let b = 1.0 - 0.8 * (-8.0 * ct * ct).exp();
    let phase = std::f64::consts::PI * (ct + 1.0) / 4.0;
    [ct, b * phase.cos(), b * phase.sin()]
}

/// Trefoil knot ι(t) = [sin t + 2 sin 2t, cos t − 2 cos 2t, −sin 3t] at n
/// i.i.d. uniform parameters.
pub fn trefoil(n: usize, seed: u64) -> Result<EmbeddedPointCloud> {
    if n < 3 {
        return Err(CglError::InvalidDims(format!(
            "trefoil needs n >= 3, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<f64> = (0..n)
        .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
        .collect();
    let mut points = DMatrix::<f64>::zeros(n, 3);
    for (i, &t) in params.iter().enumerate() {
        let [x, y, z] = trefoil_point(t);
        points[(i, 0)] = x;
        points[(i, 1)] = y;
        points[(i, 2)] = z;
    }
    Ok(EmbeddedPointCloud {
        points,
        params,
        p: 3,
    })
}

pub fn trefoil_point(t: f64) -> [f64; 3] {
    [
        t.sin() + 2.0 * (2.0 * t).sin(),
        t.cos() - 2.0 * (2.0 * t).cos(),
        -(3.0 * t).sin(),
    ]
}

/// n_K·n_R rotated copies of n_K templates with ground truth.
#[derive(Debug, Clone)]
pub struct CircularImageSet {
    pub images: Vec<CircularImage>,
    pub class_id: Vec<usize>,
    pub true_shift: Vec<usize>,
    pub templates: Vec<CircularImage>,
    /// Standard deviation of all template pixels (sets the c = 6σ noise scale).
    pub sigma: f64,
}

impl CircularImageSet {
    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn p(&self) -> usize {
        self.images[0].p()
    }
}

const SEPARATION_MIN_RID: f64 = 0.05;
const MAX_TEMPLATE_RETRIES: usize = 100;

fn random_template(p: usize, rng: &mut ChaCha8Rng) -> CircularImage {
    // Band-limited Fourier series with frequencies 1..=8 and standard normal
    // coefficients, normalized to unit Euclidean norm.
    let mut samples = vec![0.0; p];
    for q in 1..=8usize {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        for (j, s) in samples.iter_mut().enumerate() {
            let th = std::f64::consts::TAU * (q * j) as f64 / p as f64;
            *s += a * th.cos() + b * th.sin();
        }
    }
    let norm = samples.iter().map(|x| x * x).sum::<f64>().sqrt();
    for s in &mut samples {
        *s /= norm;
    }
    CircularImage::new(samples).expect("template is finite by construction")
}

/// Generate templates and their randomly rotated noisy-free copies. Template
/// batches whose cross-template RID falls below the separation margin are
/// regenerated from a perturbed seed, so the clean rotation argmins stay
/// well defined.
pub fn surrogate_images(n_k: usize, n_r: usize, p: usize, seed: u64) -> Result<CircularImageSet> {
    if n_k == 0 || n_r == 0 {
        return Err(CglError::InvalidDims(
            "surrogate images need n_K >= 1 and n_R >= 1".into(),
        ));
    }
    if p < 8 {
        return Err(CglError::InvalidDims(format!(
            "surrogate images need p >= 8, got {p}"
        )));
    }
    let mut templates = None;
    for attempt in 0..MAX_TEMPLATE_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let cand: Vec<CircularImage> = (0..n_k).map(|_| random_template(p, &mut rng)).collect();
        let mut ok = true;
        'sep: for i in 0..n_k {
            for j in i + 1..n_k {
                let d = rid(&cand[i], &cand[j])?.distance_sq.max(0.0).sqrt();
                if d < SEPARATION_MIN_RID {
                    ok = false;
                    break 'sep;
                }
            }
        }
        if ok {
            templates = Some((cand, rng));
            break;
        }
    }
    let (templates, mut rng) =
        templates.ok_or(CglError::SeparationFailure(MAX_TEMPLATE_RETRIES))?;

    let all: Vec<f64> = templates
        .iter()
        .flat_map(|t| t.samples().iter().copied())
        .collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let sigma =
        (all.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / all.len() as f64).sqrt();

    let n = n_k * n_r;
    let mut images = Vec::with_capacity(n);
    let mut class_id = Vec::with_capacity(n);
    let mut true_shift = Vec::with_capacity(n);
    for k in 0..n_k {
        for _ in 0..n_r {
            let s = rng.gen_range(0..p);
            images.push(rotate(&templates[k], RotationIndex::new(s, p)));
            class_id.push(k);
            true_shift.push(s);
        }
    }
    Ok(CircularImageSet {
        images,
        class_id,
        true_shift,
        templates,
        sigma,
    })
}
