//! Rotationally invariant distance (RID) on equispaced circular grids.
//!
//! The exact rotation set for a length-p circular grid is the cyclic group
//! of index shifts; its elements act as permutation matrices, so rotations
//! are exact (no interpolation). The RID between two images is the minimum
//! over all shifts of the squared Euclidean distance.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::connection_graph::{AffinityMatrix, ConnectionBlocks};
use crate::error::{CglError, Result};
use crate::util::quantile_sorted;

/// Real function on S¹ sampled at p equispaced points.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularImage {
    samples: Vec<f64>,
}

impl CircularImage {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(CglError::InvalidDims(format!(
                "circular image needs p >= 2 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(CglError::InvalidSpec("non-finite sample".into()));
        }
        Ok(Self { samples })
    }

    pub fn p(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }
}

/// Cyclic shift index s with its angle 2πs/p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RotationIndex {
    pub s: usize,
    pub p: usize,
}

impl RotationIndex {
    pub fn new(s: usize, p: usize) -> Self {
        Self { s: s % p, p }
    }

    pub fn angle(&self) -> f64 {
        std::f64::consts::TAU * self.s as f64 / self.p as f64
    }
}

#[derive(Debug, Clone)]
pub struct RidResult {
    pub distance_sq: f64,
    pub optimal_shift: RotationIndex,
    /// d²(s) for all shifts, when computed by the exhaustive path.
    pub profile: Option<Vec<f64>>,
}

/// output[j] = img[(j - s) mod p]; a delta at index 0 moves to index s.
pub fn rotate(img: &CircularImage, shift: RotationIndex) -> CircularImage {
    let p = img.p();
    let s = shift.s % p;
    let mut out = vec![0.0; p];
    for j in 0..p {
        out[j] = img.samples[(j + p - s) % p];
    }
    CircularImage { samples: out }
}

/// Exact squared distance ‖a − rotate(b, s)‖² by direct summation.
fn d2_at_shift(a: &[f64], b: &[f64], s: usize) -> f64 {
    let p = a.len();
    let mut acc = 0.0;
    for j in 0..p {
        let diff = a[j] - b[(j + p - s) % p];
        acc += diff * diff;
    }
    acc
}

fn check_pair(a: &CircularImage, b: &CircularImage) -> Result<usize> {
    if a.p() != b.p() {
        return Err(CglError::DimensionMismatch(format!(
            "images have p = {} and p = {}",
            a.p(),
            b.p()
        )));
    }
    Ok(a.p())
}

/// Exhaustive O(p²) RID: evaluates every shift directly and keeps the
/// smallest shift index among minimizers.
pub fn rid_direct(a: &CircularImage, b: &CircularImage) -> Result<RidResult> {
    let p = check_pair(a, b)?;
    let mut profile = vec![0.0; p];
    let mut best = f64::INFINITY;
    let mut best_s = 0;
    for s in 0..p {
        let d2 = d2_at_shift(&a.samples, &b.samples, s);
        profile[s] = d2;
        if d2 < best {
            best = d2;
            best_s = s;
        }
    }
    Ok(RidResult {
        distance_sq: best,
        optimal_shift: RotationIndex::new(best_s, p),
        profile: Some(profile),
    })
}

/// Reusable FFT plans and scratch for repeated RID evaluations at one p.
pub struct RidEngine {
    p: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Cached spectrum of one image, for pairwise batch evaluation.
pub struct ImageSpectrum {
    freq: Vec<Complex64>,
    norm_sq: f64,
}

impl RidEngine {
    pub fn new(p: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            p,
            fwd: planner.plan_fft_forward(p),
            inv: planner.plan_fft_inverse(p),
        }
    }

    pub fn spectrum(&self, img: &CircularImage) -> ImageSpectrum {
        assert_eq!(img.p(), self.p);
        let mut buf: Vec<Complex64> = img
            .samples
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        self.fwd.process(&mut buf);
        ImageSpectrum {
            freq: buf,
            norm_sq: img.norm_sq(),
        }
    }

    /// Distance profile d²(s) for all shifts from the correlation identity,
    /// accurate to FFT roundoff. Useful when the whole profile is the
    /// statistic of interest rather than the minimizer.
    pub fn profile_from_spectra(&self, sa: &ImageSpectrum, sb: &ImageSpectrum) -> Vec<f64> {
        let p = self.p;
        let mut buf: Vec<Complex64> = (0..p).map(|f| sa.freq[f] * sb.freq[f].conj()).collect();
        self.inv.process(&mut buf);
        let scale = 1.0 / p as f64;
        let base = sa.norm_sq + sb.norm_sq;
        (0..p).map(|s| base - 2.0 * buf[s].re * scale).collect()
    }

    /// Fast RID: the distance profile over all shifts comes from one
    /// circular cross-correlation (‖a − rotate(b,s)‖² = ‖a‖² + ‖b‖² −
    /// 2⟨a, rotate(b,s)⟩); near-minimal shifts are then re-evaluated by the
    /// exact direct sum so that the result (value and tie-broken argmin)
    /// matches [`rid_direct`].
    pub fn rid_pair(
        &self,
        a: &CircularImage,
        sa: &ImageSpectrum,
        b: &CircularImage,
        sb: &ImageSpectrum,
    ) -> RidResult {
        let p = self.p;
        let mut buf: Vec<Complex64> = (0..p).map(|f| sa.freq[f] * sb.freq[f].conj()).collect();
        self.inv.process(&mut buf);
        let scale = 1.0 / p as f64;
        let base = sa.norm_sq + sb.norm_sq;
        let mut approx_min = f64::INFINITY;
        let mut prof = vec![0.0; p];
        for s in 0..p {
            let d2 = base - 2.0 * buf[s].re * scale;
            prof[s] = d2;
            if d2 < approx_min {
                approx_min = d2;
            }
        }
        // FFT rounding is ~1e-15 relative; a 1e-7 window is a generous
        // superset of all true minimizers.
        let tol = 1e-7 * base.max(f64::MIN_POSITIVE);
        let mut best = f64::INFINITY;
        let mut best_s = 0;
        for s in 0..p {
            if prof[s] <= approx_min + tol {
                let d2 = d2_at_shift(&a.samples, &b.samples, s);
                if d2 < best {
                    best = d2;
                    best_s = s;
                }
            }
        }
        RidResult {
            distance_sq: best,
            optimal_shift: RotationIndex::new(best_s, p),
            profile: None,
        }
    }
}

/// Fast RID of a single pair. For many pairs at the same p, build one
/// [`RidEngine`] and cache spectra instead.
pub fn rid(a: &CircularImage, b: &CircularImage) -> Result<RidResult> {
    let p = check_pair(a, b)?;
    let engine = RidEngine::new(p);
    let sa = engine.spectrum(a);
    let sb = engine.spectrum(b);
    Ok(engine.rid_pair(a, &sa, b, &sb))
}

/// All pairwise RIDs of an image set.
#[derive(Debug, Clone)]
pub struct RidTable {
    pub n: usize,
    pub p: usize,
    pub distance_sq: DMatrix<f64>,
    /// Optimal shift aligning image j to image i, row-major i*n + j.
    pub shift: Vec<usize>,
}

impl RidTable {
    pub fn shift_at(&self, i: usize, j: usize) -> usize {
        self.shift[i * self.n + j]
    }
}

fn check_image_set(imgs: &[CircularImage]) -> Result<usize> {
    if imgs.len() < 2 {
        return Err(CglError::InvalidDims(format!(
            "need at least 2 images, got {}",
            imgs.len()
        )));
    }
    let p = imgs[0].p();
    if imgs.iter().any(|im| im.p() != p) {
        return Err(CglError::DimensionMismatch(
            "images have differing grid sizes".into(),
        ));
    }
    Ok(p)
}

/// Pairwise RID table; the lower triangle mirrors the upper one
/// (d²_{ji} = d²_{ij}, s_{ji} = (p − s_{ij}) mod p), so G built from it is
/// exactly block-transpose symmetric.
pub fn pairwise_rid(imgs: &[CircularImage]) -> Result<RidTable> {
    let p = check_image_set(imgs)?;
    let n = imgs.len();
    let engine = RidEngine::new(p);
    let spectra: Vec<ImageSpectrum> = imgs.iter().map(|im| engine.spectrum(im)).collect();
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let r = engine.rid_pair(&imgs[i], &spectra[i], &imgs[j], &spectra[j]);
                    (r.distance_sq, r.optimal_shift.s)
                })
                .collect()
        })
        .collect();
    let mut distance_sq = DMatrix::<f64>::zeros(n, n);
    let mut shift = vec![0usize; n * n];
    for i in 0..n {
        for (off, &(d2, s)) in rows[i].iter().enumerate() {
            let j = i + 1 + off;
            distance_sq[(i, j)] = d2;
            distance_sq[(j, i)] = d2;
            shift[i * n + j] = s;
            shift[j * n + i] = (p - s) % p;
        }
    }
    Ok(RidTable {
        n,
        p,
        distance_sq,
        shift,
    })
}

/// Build (W, G) from an image set: w_{ij} = exp(−d²_RID(i,j)/m) with m the
/// given quantile of the strictly positive pairwise squared RIDs, w_{ii} = 1,
/// and G_{ij} the 2×2 rotation by angle 2π·s*_{ij}/p. Returns the realized
/// bandwidth m alongside.
pub fn build_connection_graph(
    imgs: &[CircularImage],
    bandwidth_quantile: f64,
) -> Result<(AffinityMatrix, ConnectionBlocks, f64)> {
    if !(bandwidth_quantile > 0.0 && bandwidth_quantile < 1.0) {
        return Err(CglError::InvalidSpec(format!(
            "bandwidth quantile must lie in (0,1), got {bandwidth_quantile}"
        )));
    }
    let table = pairwise_rid(imgs)?;
    let n = table.n;
    let p = table.p;
    let mut positives: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d2 = table.distance_sq[(i, j)];
            if d2 > 0.0 {
                positives.push(d2);
            }
        }
    }
    if positives.is_empty() {
        return Err(CglError::AllDistancesZero);
    }
    positives.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = quantile_sorted(&positives, bandwidth_quantile);

    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = 1.0;
        for j in i + 1..n {
            let v = (-table.distance_sq[(i, j)] / m).exp();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let eye = DMatrix::<f64>::identity(2, 2);
    let mut blocks = vec![eye; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let th = std::f64::consts::TAU * table.shift_at(i, j) as f64 / p as f64;
            let (s, c) = th.sin_cos();
            let b = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            blocks[j * n + i] = b.transpose();
            blocks[i * n + j] = b;
        }
    }
    Ok((
        AffinityMatrix::new(w)?,
        ConnectionBlocks::new(n, 2, blocks)?,
        m,
    ))
}

/// Permutation matrix M of rotate(·, s): M[j][(j−s) mod p] = 1.
pub fn rotation_permutation(s: usize, p: usize) -> DMatrix<f64> {
    let s = s % p;
    let mut m = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        m[(j, (j + p - s) % p)] = 1.0;
    }
    m
}
