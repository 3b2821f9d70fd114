//! Eigendecomposition of symmetric operators, diffusion maps (plain and
//! truncated), vector diffusion maps, and alignment-vector extraction for
//! the complex (k = 2) connection Laplacian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::connection_graph::OperatorMatrix;
use crate::error::{CglError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Lsym,
    Other,
}

/// Full decomposition of a symmetric matrix, eigenvalues descending,
/// eigenvector signs fixed so the first coordinate of magnitude > 1e-12 is
/// positive.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub n: usize,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    /// Column l is the l-th eigenvector.
    pub eigenvectors: DMatrix<f64>,
    pub source_kind: SourceKind,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// k-subvector of eigenvector l at node i.
    pub fn block(&self, l: usize, i: usize) -> Vec<f64> {
        (0..self.k)
            .map(|r| self.eigenvectors[(i * self.k + r, l)])
            .collect()
    }
}

pub fn eig_sym(q: &OperatorMatrix) -> Result<SpectralDecomposition> {
    let m = &q.entries;
    let dim = m.nrows();
    for i in 0..dim {
        for j in i + 1..dim {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 {
                return Err(CglError::NotSymmetric);
            }
        }
    }
    // Symmetrize exactly before factorizing to kill rounding asymmetry.
    let sym = (m + m.transpose()) * 0.5;
    let dec = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[b].partial_cmp(&dec.eigenvalues[a]).unwrap());
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut eigenvectors = DMatrix::<f64>::zeros(dim, dim);
    for (out_col, &src) in order.iter().enumerate() {
        eigenvalues.push(dec.eigenvalues[src]);
        let col = dec.eigenvectors.column(src);
        let sign = col
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map(|x| if *x < 0.0 { -1.0 } else { 1.0 })
            .unwrap_or(1.0);
        for r in 0..dim {
            eigenvectors[(r, out_col)] = sign * col[r];
        }
    }
    Ok(SpectralDecomposition {
        n: q.n,
        k: q.k,
        eigenvalues,
        eigenvectors,
        source_kind: if q.kind == crate::connection_graph::OperatorKind::Lsym {
            SourceKind::Lsym
        } else {
            SourceKind::Other
        },
    })
}

/// How the embedding dimension of a diffusion map is chosen.
#[derive(Debug, Clone, Copy)]
pub enum DiffusionRule {
    FixedM(usize),
    /// Keep non-trivial eigenvalues above δ: m satisfies λ_{m+1} > δ ≥ λ_{m+2}
    /// in 1-based eigenvalue indexing.
    Threshold(f64),
}

#[derive(Debug, Clone)]
pub struct DiffusionCoordinates {
    pub t: f64,
    pub m: usize,
    /// n×m; row i is Φ_{t,m}(x_i).
    pub coords: DMatrix<f64>,
}

/// Truncated diffusion map Φ_{t,m}(x_i) = (λ₂ᵗ u₂(i), …, λ_{m+1}ᵗ u_{m+1}(i));
/// the top (trivial) eigenvector is always skipped.
pub fn diffusion_map(
    dec: &SpectralDecomposition,
    t: f64,
    rule: DiffusionRule,
) -> Result<DiffusionCoordinates> {
    if dec.k != 1 {
        return Err(CglError::InvalidSpec(format!(
            "diffusion map requires a scalar (k = 1) operator, got k = {}",
            dec.k
        )));
    }
    if !(t > 0.0) {
        return Err(CglError::InvalidSpec(format!(
            "diffusion time must be positive, got {t}"
        )));
    }
    let n = dec.dim();
    let m = match rule {
        DiffusionRule::FixedM(m) => {
            if m == 0 || m > n - 1 {
                return Err(CglError::InvalidSpec(format!(
                    "fixed embedding dimension m = {m} out of range 1..={}",
                    n - 1
                )));
            }
            m
        }
        DiffusionRule::Threshold(delta) => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(CglError::InvalidSpec(format!(
                    "delta must lie in (0,1), got {delta}"
                )));
            }
            let m = (1..n).take_while(|&l| dec.eigenvalues[l] > delta).count();
            if m == 0 {
                return Err(CglError::EmptyEmbedding { delta });
            }
            m
        }
    };
    let mut coords = DMatrix::<f64>::zeros(n, m);
    for l in 1..=m {
        let lam = dec.eigenvalues[l];
        // Sign-preserving power so negative eigenvalues under a fixed-m rule
        // stay real; a column's global sign never affects distances.
        let w = lam.signum() * lam.abs().powf(t);
        for i in 0..n {
            coords[(i, l - 1)] = w * dec.eigenvectors[(i, l)];
        }
    }
    Ok(DiffusionCoordinates { t, m, coords })
}

/// Euclidean distance between embedded points i and j.
pub fn diffusion_distance(phi: &DiffusionCoordinates, i: usize, j: usize) -> Result<f64> {
    let n = phi.coords.nrows();
    if i >= n || j >= n {
        return Err(CglError::IndexOutOfRange(i.max(j), n));
    }
    let mut acc = 0.0;
    for l in 0..phi.m {
        let d = phi.coords[(i, l)] - phi.coords[(j, l)];
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// Vector diffusion map coordinates. Point i is the r×r array with entries
/// (μ_l μ_r)ᵗ ⟨v_l[i], v_r[i]⟩ over the top r eigenpairs; inner products of
/// these arrays reproduce ‖L_s^{2t}(i,j)‖²_HS at full rank.
#[derive(Debug, Clone)]
pub struct VDMCoordinates {
    pub t: u32,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    coords: Vec<Vec<f64>>, // per node, length r*r
}

pub fn vdm(dec: &SpectralDecomposition, t: u32, r: usize) -> Result<VDMCoordinates> {
    let dim = dec.dim();
    if r == 0 || r > dim {
        return Err(CglError::InvalidTruncation { r, max: dim });
    }
    if t == 0 {
        return Err(CglError::InvalidSpec("vdm requires t >= 1".into()));
    }
    let n = dec.n;
    let k = dec.k;
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let blocks: Vec<Vec<f64>> = (0..r).map(|l| dec.block(l, i)).collect();
            let mut v = Vec::with_capacity(r * r);
            for l in 0..r {
                for rr in 0..r {
                    let w = (dec.eigenvalues[l] * dec.eigenvalues[rr]).powi(t as i32);
                    let ip: f64 = blocks[l]
                        .iter()
                        .zip(&blocks[rr])
                        .map(|(a, b)| a * b)
                        .sum();
                    v.push(w * ip);
                }
            }
            v
        })
        .collect();
    Ok(VDMCoordinates { t, n, k, r, coords })
}

impl VDMCoordinates {
    pub fn inner(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.n || j >= self.n {
            return Err(CglError::IndexOutOfRange(i.max(j), self.n));
        }
        Ok(self.coords[i]
            .iter()
            .zip(&self.coords[j])
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Squared vector diffusion distance
    /// d²(i,j) = ⟨V(i),V(i)⟩ + ⟨V(j),V(j)⟩ − 2⟨V(i),V(j)⟩.
    pub fn distance_sq(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.inner(i, i)? + self.inner(j, j)? - 2.0 * self.inner(i, j)?)
    }
}

/// Top eigenpair of a complex Hermitian matrix via shifted power iteration.
/// The shift (max absolute row sum) makes the algebraically largest
/// eigenvalue dominant in modulus. Returns (eigenvector, eigenvalue,
/// converged); the vector's global phase is fixed so its first entry of
/// magnitude > 1e-12 is real positive.
pub fn top_eigenpair_hermitian(
    h: &DMatrix<Complex64>,
    tol: f64,
    max_iter: usize,
) -> (DVector<Complex64>, f64, bool) {
    let n = h.nrows();
    let shift: f64 = (0..n)
        .map(|i| (0..n).map(|j| h[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
        + 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11c_0e16);
    let mut v = DVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut lam = 0.0;
    let mut converged = false;
    for _ in 0..max_iter {
        let hv = h * &v;
        // Rayleigh quotient is real for Hermitian h.
        lam = v.dotc(&hv).re;
        let mut res = hv.clone();
        res.axpy(Complex64::new(-lam, 0.0), &v, Complex64::new(1.0, 0.0));
        if res.norm() <= tol * (lam.abs() + 1.0) {
            converged = true;
            break;
        }
        let mut w = hv;
        w.axpy(Complex64::new(shift, 0.0), &v, Complex64::new(1.0, 0.0));
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / Complex64::new(wn, 0.0);
    }
    if let Some(idx) = (0..n).find(|&i| v[i].norm() > 1e-12) {
        let phase = v[idx] / Complex64::new(v[idx].norm(), 0.0);
        v /= phase;
    }
    (v, lam, converged)
}

/// Per-node phase estimates from the top eigenvector of the complex
/// Hermitian CGL: v(i) = v₁(i)/|v₁(i)|, with 1 substituted where |v₁(i)| is
/// numerically zero.
pub fn alignment_vector(h: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (v1, _, _) = top_eigenpair_hermitian(h, 1e-12, 5000);
    alignment_from_eigenvector(&v1)
}

/// Phase-normalize a top eigenvector: v(i) = v₁(i)/|v₁(i)|, with entries of
/// magnitude ≤ 1e-14 mapped to 1.
pub fn alignment_from_eigenvector(v1: &DVector<Complex64>) -> Vec<Complex64> {
    v1.iter()
        .map(|&z| {
            let r = z.norm();
            if r <= 1e-14 {
                Complex64::new(1.0, 0.0)
            } else {
                z / Complex64::new(r, 0.0)
            }
        })
        .collect()
}

/// Per-node angular errors z(i) = arg(u(i)* · v(i)) in (−π, π].
pub fn alignment_error(u: &[Complex64], v: &[Complex64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(CglError::DimensionMismatch(format!(
            "alignment vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a.conj() * b).arg()).collect())
}
