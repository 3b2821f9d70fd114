//! Affinity/connection matrices and assembly of the graph operators
//! L(W,G) = D⁻¹S, its zero-diagonal variant L₀(W,G), and the symmetric
//! form L_s = D^{-1/2} S D^{-1/2}, where S has blocks w_{ij}·G_{ij} and
//! D_{ii} = Σ_{j≠i} w_{ij}·I_k.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CglError, Result};

const SYM_TOL: f64 = 1e-10;
const ORTHO_TOL: f64 = 1e-10;
const DEGREE_FLOOR: f64 = 1e-300;

/// Symmetric nonnegative weight matrix W.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    entries: DMatrix<f64>,
}

impl AffinityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(CglError::DimensionMismatch(format!(
                "affinity matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in i..n {
                let a = entries[(i, j)];
                let b = entries[(j, i)];
                if !a.is_finite() || (a - b).abs() > SYM_TOL * a.abs().max(1.0) {
                    return Err(CglError::NotSymmetric);
                }
                if a < 0.0 || b < 0.0 {
                    return Err(CglError::InvalidSpec(format!(
                        "negative weight at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Gaussian kernel weights w_ij = exp(-d²_ij / bandwidth) from a matrix
    /// of squared distances.
    pub fn gaussian(sq_dist: &DMatrix<f64>, bandwidth: f64) -> Result<Self> {
        if bandwidth <= 0.0 || !bandwidth.is_finite() {
            return Err(CglError::InvalidSpec(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let n = sq_dist.nrows();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                // Use the (i,j) entry for both triangles so the result is
                // symmetric even if the input has asymmetric rounding.
                let v = (-sq_dist[(i, j)] / bandwidth).exp();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        Self::new(w)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// n×n array of k×k orthogonal blocks G_{ij} with G_{ji} = G_{ij}ᵀ and
/// identity diagonal blocks.
#[derive(Debug, Clone)]
pub struct ConnectionBlocks {
    n: usize,
    k: usize,
    blocks: Vec<DMatrix<f64>>, // row-major, index i*n + j
}

impl ConnectionBlocks {
    pub fn new(n: usize, k: usize, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != n * n {
            return Err(CglError::DimensionMismatch(format!(
                "expected {} blocks, got {}",
                n * n,
                blocks.len()
            )));
        }
        let eye = DMatrix::<f64>::identity(k, k);
        for i in 0..n {
            for j in 0..n {
                let b = &blocks[i * n + j];
                if b.nrows() != k || b.ncols() != k {
                    return Err(CglError::DimensionMismatch(format!(
                        "block ({i},{j}) is {}x{}, expected {k}x{k}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                if (b.transpose() * b - &eye).abs().max() > ORTHO_TOL {
                    return Err(CglError::InvalidSpec(format!(
                        "block ({i},{j}) is not orthogonal"
                    )));
                }
                if j > i {
                    let bt = &blocks[j * n + i];
                    if (b.transpose() - bt).abs().max() > ORTHO_TOL {
                        return Err(CglError::InvalidSpec(format!(
                            "blocks ({i},{j}) and ({j},{i}) are not transposes"
                        )));
                    }
                }
            }
            if (&blocks[i * n + i] - &eye).abs().max() > ORTHO_TOL {
                return Err(CglError::InvalidSpec(format!(
                    "diagonal block ({i},{i}) is not the identity"
                )));
            }
        }
        Ok(Self { n, k, blocks })
    }

    /// All-ones scalar connection (k = 1).
    pub fn trivial(n: usize) -> Self {
        let blocks = vec![DMatrix::from_element(1, 1, 1.0); n * n];
        Self { n, k: 1, blocks }
    }

    /// k = 2 connection from phases: block (i,j) is the plane rotation by
    /// `angles[(i,j)]`; the caller must supply angles with
    /// angles[(j,i)] = -angles[(i,j)] (mod 2π) and zero diagonal.
    pub fn from_angles(angles: &DMatrix<f64>) -> Result<Self> {
        let n = angles.nrows();
        let mut blocks = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let th = angles[(i, j)];
                let (s, c) = th.sin_cos();
                blocks.push(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]));
            }
        }
        Self::new(n, 2, blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.blocks[i * self.n + j]
    }

    /// Complex view of the connection: k=2 rotation blocks become unit
    /// complex numbers e^{iθ}; k=1 blocks become real ±1.
    pub fn to_complex(&self) -> Result<DMatrix<Complex64>> {
        if self.k > 2 {
            return Err(CglError::InvalidSpec(format!(
                "complex view requires k <= 2, got {}",
                self.k
            )));
        }
        let n = self.n;
        let mut g = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                let b = self.block(i, j);
                g[(i, j)] = if self.k == 1 {
                    Complex64::new(b[(0, 0)], 0.0)
                } else {
                    Complex64::new(b[(0, 0)], b[(1, 0)])
                };
            }
        }
        Ok(g)
    }
}

/// Off-diagonal row sums d_i = Σ_{j≠i} w_{ij}.
#[derive(Debug, Clone)]
pub struct DegreeVector {
    values: Vec<f64>,
}

impl DegreeVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

pub fn degree(w: &AffinityMatrix) -> Result<DegreeVector> {
    let n = w.n();
    let mut values = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += w.get(i, j);
            }
        }
        if !(s > DEGREE_FLOOR) {
            return Err(CglError::DegenerateDegree(i));
        }
        values[i] = s;
    }
    Ok(DegreeVector { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OperatorKind {
    L,
    L0,
    Lsym,
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OperatorKind::L => "L",
            OperatorKind::L0 => "L0",
            OperatorKind::Lsym => "Lsym",
        };
        f.write_str(s)
    }
}

/// Dense nk×nk operator.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub n: usize,
    pub k: usize,
    pub kind: OperatorKind,
    pub entries: DMatrix<f64>,
}

fn check_dims(w: &AffinityMatrix, g: &ConnectionBlocks) -> Result<()> {
    if w.n() != g.n() {
        return Err(CglError::DimensionMismatch(format!(
            "affinity has n = {}, connection has n = {}",
            w.n(),
            g.n()
        )));
    }
    Ok(())
}

fn assemble_from_weights(
    weights: &DMatrix<f64>,
    g: &ConnectionBlocks,
    zero_diag: bool,
    degrees: &DegreeVector,
    symmetric: bool,
) -> OperatorMatrix {
    let n = g.n();
    let k = g.k();
    let mut entries = DMatrix::zeros(n * k, n * k);
    for i in 0..n {
        for j in 0..n {
            if zero_diag && i == j {
                continue;
            }
            let scale = if symmetric {
                weights[(i, j)] / (degrees.get(i) * degrees.get(j)).sqrt()
            } else {
                weights[(i, j)] / degrees.get(i)
            };
            if scale == 0.0 {
                continue;
            }
            let b = g.block(i, j);
            for r in 0..k {
                for c in 0..k {
                    entries[(i * k + r, j * k + c)] = scale * b[(r, c)];
                }
            }
        }
    }
    let kind = if symmetric {
        OperatorKind::Lsym
    } else if zero_diag {
        OperatorKind::L0
    } else {
        OperatorKind::L
    };
    OperatorMatrix { n, k, kind, entries }
}

/// L(W,G) (zero_diag = false) or L₀(W,G) (zero_diag = true): block (i,j) is
/// (w_{ij}/d_i)·G_{ij}, with the diagonal blocks kept or zeroed.
pub fn assemble_cgl(
    w: &AffinityMatrix,
    g: &ConnectionBlocks,
    zero_diag: bool,
) -> Result<OperatorMatrix> {
    check_dims(w, g)?;
    let d = degree(w)?;
    Ok(assemble_from_weights(w.entries(), g, zero_diag, &d, false))
}

/// L(W,G) assembled from per-row scaled weights w_{ij}/f_i. The i-th degree
/// is the off-diagonal sum of the scaled row. Used to exercise the exact
/// cancellation of row scales in the normalized operator.
pub fn assemble_cgl_scaled(
    w: &AffinityMatrix,
    g: &ConnectionBlocks,
    f: &[f64],
    zero_diag: bool,
) -> Result<OperatorMatrix> {
    check_dims(w, g)?;
    if f.len() != w.n() {
        return Err(CglError::DimensionMismatch(format!(
            "scale vector has length {}, expected {}",
            f.len(),
            w.n()
        )));
    }
    if f.iter().any(|&x| !(x > 0.0)) {
        return Err(CglError::InvalidSpec("row scales must be positive".into()));
    }
    let n = w.n();
    let mut scaled = w.entries().clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] /= f[i];
        }
    }
    let mut values = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += scaled[(i, j)];
            }
        }
        if !(s > DEGREE_FLOOR) {
            return Err(CglError::DegenerateDegree(i));
        }
        values[i] = s;
    }
    let d = DegreeVector { values };
    Ok(assemble_from_weights(&scaled, g, zero_diag, &d, false))
}

/// Symmetric form L_s with block (i,j) = (w_{ij}/√(d_i d_j))·G_{ij};
/// similar to L(W,G), so the two share their spectrum.
pub fn assemble_symmetric(w: &AffinityMatrix, g: &ConnectionBlocks) -> Result<OperatorMatrix> {
    check_dims(w, g)?;
    let d = degree(w)?;
    Ok(assemble_from_weights(w.entries(), g, false, &d, true))
}

/// Symmetric form with the diagonal blocks zeroed (the L₀ counterpart of
/// [`assemble_symmetric`]).
pub fn assemble_symmetric_zero_diag(
    w: &AffinityMatrix,
    g: &ConnectionBlocks,
) -> Result<OperatorMatrix> {
    check_dims(w, g)?;
    let d = degree(w)?;
    Ok(assemble_from_weights(w.entries(), g, true, &d, true))
}

/// Complex Hermitian symmetric CGL: entry (i,j) = w_{ij} g_{ij} / √(d_i d_j)
/// with g the unit-complex connection. Used for the k=2 alignment pipeline.
pub fn assemble_symmetric_complex(
    w: &AffinityMatrix,
    g: &DMatrix<Complex64>,
    zero_diag: bool,
) -> Result<DMatrix<Complex64>> {
    let n = w.n();
    if g.nrows() != n || g.ncols() != n {
        return Err(CglError::DimensionMismatch(format!(
            "connection is {}x{}, expected {n}x{n}",
            g.nrows(),
            g.ncols()
        )));
    }
    let d = degree(w)?;
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            if zero_diag && i == j {
                continue;
            }
            let scale = w.get(i, j) / (d.get(i) * d.get(j)).sqrt();
            h[(i, j)] = g[(i, j)] * scale;
        }
    }
    Ok(h)
}

/// Keep the kn largest off-diagonal entries of each row (ties broken by
/// smaller column index), then symmetrize by the entrywise max of the masked
/// matrix and its transpose. The diagonal is preserved.
pub fn knn_mask(w: &AffinityMatrix, kn: usize) -> Result<AffinityMatrix> {
    let n = w.n();
    if kn == 0 || kn >= n {
        return Err(CglError::InvalidK { kn, n });
    }
    let mut masked = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut cols: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        // Descending by weight, ascending by column index on ties.
        cols.sort_by(|&a, &b| {
            w.get(i, b)
                .partial_cmp(&w.get(i, a))
                .unwrap()
                .then(a.cmp(&b))
        });
        for &j in cols.iter().take(kn) {
            masked[(i, j)] = w.get(i, j);
        }
    }
    let mut out = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = w.get(i, i);
        for j in 0..n {
            if j != i {
                out[(i, j)] = masked[(i, j)].max(masked[(j, i)]);
            }
        }
    }
    AffinityMatrix::new(out)
}

/// Largest singular value of A − B, with a convergence flag.
#[derive(Debug, Clone, Copy)]
pub struct OperatorDistance {
    pub value: f64,
    pub converged: bool,
}

/// Largest singular value of a dense matrix by power iteration on MᵀM,
/// relative tolerance 1e-9, at most 10000 iterations. On non-convergence the
/// best estimate is returned with `converged == false`.
pub fn spectral_norm(m: &DMatrix<f64>) -> OperatorDistance {
    let dim = m.ncols();
    if dim == 0 || m.iter().all(|&x| x == 0.0) {
        return OperatorDistance {
            value: 0.0,
            converged: true,
        };
    }
    let mt = m.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c61_0b57);
    let mut v = DVector::from_fn(dim, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        x
    });
    v /= v.norm();
    let mut sigma = 0.0_f64;
    for iter in 0..10000 {
        let mv = m * &v;
        let new_sigma = mv.norm();
        let mut w = &mt * mv;
        let wn = w.norm();
        if wn == 0.0 {
            // v lies in the null space; the start vector was unlucky only if
            // M itself is zero (handled above), so restart deterministically.
            v = DVector::from_fn(dim, |i, _| ((i + 1) as f64).sin());
            v /= v.norm();
            continue;
        }
        w /= wn;
        let done = iter > 0 && (new_sigma - sigma).abs() <= 1e-9 * new_sigma.max(f64::MIN_POSITIVE);
        sigma = new_sigma;
        v = w;
        if done {
            return OperatorDistance {
                value: sigma,
                converged: true,
            };
        }
    }
    OperatorDistance {
        value: sigma,
        converged: false,
    }
}

/// Operator-norm distance between two operators of identical dimensions.
pub fn operator_distance(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorDistance> {
    if a.entries.nrows() != b.entries.nrows() || a.entries.ncols() != b.entries.ncols() {
        return Err(CglError::DimensionMismatch(format!(
            "operators are {}x{} and {}x{}",
            a.entries.nrows(),
            a.entries.ncols(),
            b.entries.nrows(),
            b.entries.ncols()
        )));
    }
    let diff = &a.entries - &b.entries;
    Ok(spectral_norm(&diff))
}
