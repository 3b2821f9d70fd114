//! Experiment-level metrics and the two end-to-end studies: nearest-neighbor
//! rank CDFs for the noisy curve embedding, and angular-alignment summaries
//! for the rotated-image synchronization problem.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::connection_graph::{
    assemble_symmetric, assemble_symmetric_complex, assemble_symmetric_zero_diag, knn_mask,
    AffinityMatrix, ConnectionBlocks,
};
use crate::datasets::{bell_curve, surrogate_images};
use crate::error::{CglError, Result};
use crate::noise::{sample_noise, snrdb, NoiseSpec};
use crate::rid::{build_connection_graph, CircularImage};
use crate::spectral::{
    alignment_error, alignment_vector, diffusion_map, eig_sym, DiffusionRule,
    SpectralDecomposition,
};
use crate::util::{linear_fit, quantile_sorted, wrap_angle};

/// Seed salt separating the noise stream from the data-generation stream
/// within one experiment seed.
pub(crate) const NOISE_SEED_SALT: u64 = 0x517c_c1b7_2722_0a95;

/// Multiset of true-neighbor ranks with its empirical CDF.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankCdf {
    pub ranks: Vec<usize>,
    /// Largest possible rank (n − 1).
    pub max_rank: usize,
}

impl RankCdf {
    /// Fraction of collected ranks ≤ `rank`.
    pub fn cdf(&self, rank: usize) -> f64 {
        if self.ranks.is_empty() {
            return 0.0;
        }
        self.ranks.iter().filter(|&&r| r <= rank).count() as f64 / self.ranks.len() as f64
    }
}

/// For each point, find its k_nn nearest neighbors under the noisy metric
/// (self excluded, ties by index) and record each neighbor's rank under the
/// clean metric (rank 1 = closest, ties by index). Both arguments are full
/// symmetric pairwise-distance matrices on the same index set.
pub fn nn_rank_cdf(
    noisy_metric: &DMatrix<f64>,
    clean_metric: &DMatrix<f64>,
    k_nn: usize,
) -> Result<RankCdf> {
    let n = noisy_metric.nrows();
    if noisy_metric.ncols() != n || clean_metric.nrows() != n || clean_metric.ncols() != n {
        return Err(CglError::DimensionMismatch(
            "metric matrices must be square and share their index set".into(),
        ));
    }
    if k_nn == 0 || k_nn >= n {
        return Err(CglError::InvalidK { kn: k_nn, n });
    }
    let mut ranks = Vec::with_capacity(n * k_nn);
    let mut others: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        others.clear();
        others.extend((0..n).filter(|&j| j != i));
        let mut by_noisy = others.clone();
        by_noisy.sort_by(|&a, &b| {
            noisy_metric[(i, a)]
                .partial_cmp(&noisy_metric[(i, b)])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut by_clean = others.clone();
        by_clean.sort_by(|&a, &b| {
            clean_metric[(i, a)]
                .partial_cmp(&clean_metric[(i, b)])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut rank_of = vec![0usize; n];
        for (r, &j) in by_clean.iter().enumerate() {
            rank_of[j] = r + 1;
        }
        for &j in by_noisy.iter().take(k_nn) {
            ranks.push(rank_of[j]);
        }
    }
    Ok(RankCdf {
        ranks,
        max_rank: n - 1,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentSummary {
    /// Circular standard deviation of z within each class.
    pub per_class_spread: Vec<f64>,
    /// Fraction of entries within 0.2 rad of their class circular mean.
    pub global_consistency: f64,
}

/// Circular mean of a set of angles.
fn circular_mean(z: &[f64]) -> f64 {
    let (s, c) = z
        .iter()
        .fold((0.0, 0.0), |(s, c), &a| (s + a.sin(), c + a.cos()));
    s.atan2(c)
}

pub const CONSISTENCY_TOL_RAD: f64 = 0.2;

pub fn alignment_summary(z: &[f64], class_id: &[usize]) -> Result<AlignmentSummary> {
    if z.len() != class_id.len() || z.is_empty() {
        return Err(CglError::DimensionMismatch(
            "alignment summary needs matching nonempty z and class labels".into(),
        ));
    }
    let n_k = class_id.iter().copied().max().unwrap() + 1;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n_k];
    for (&zi, &ci) in z.iter().zip(class_id) {
        groups[ci].push(zi);
    }
    let mut per_class_spread = Vec::with_capacity(n_k);
    let mut consistent = 0usize;
    for (k, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(CglError::EmptyClass(k));
        }
        let mean = circular_mean(g);
        let r = {
            let (s, c) = g
                .iter()
                .fold((0.0, 0.0), |(s, c), &a| (s + a.sin(), c + a.cos()));
            (s * s + c * c).sqrt() / g.len() as f64
        };
        // Circular standard deviation sqrt(-2 ln R).
        per_class_spread.push(if r > 0.0 {
            (-2.0 * r.ln()).max(0.0).sqrt()
        } else {
            f64::INFINITY
        });
        consistent += g
            .iter()
            .filter(|&&a| wrap_angle(a - mean).abs() < CONSISTENCY_TOL_RAD)
            .count();
    }
    Ok(AlignmentSummary {
        per_class_spread,
        global_consistency: consistent as f64 / z.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayReport {
    pub slope: f64,
    pub r_squared: f64,
}

/// Fit log|ν_ℓ| against ℓ^{2/d} for ℓ = 2..min(20, dim) (1-based), probing
/// the expected eigen-decay of kernel operators on d-dimensional data.
pub fn eigen_decay_report(dec: &SpectralDecomposition, d: usize) -> DecayReport {
    let last = dec.dim().min(20);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for l in 2..=last {
        let nu = dec.eigenvalues[l - 1].abs();
        if nu > 1e-300 {
            xs.push((l as f64).powf(2.0 / d as f64));
            ys.push(nu.ln());
        }
    }
    if xs.len() < 2 {
        return DecayReport {
            slope: 0.0,
            r_squared: 0.0,
        };
    }
    let (slope, r_squared) = linear_fit(&xs, &ys);
    DecayReport { slope, r_squared }
}

/// Pairwise squared Euclidean distances between the rows of `points`.
pub fn pairwise_sq_dists(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut acc = 0.0;
            for c in 0..points.ncols() {
                let diff = points[(i, c)] - points[(j, c)];
                acc += diff * diff;
            }
            d2[(i, j)] = acc;
            d2[(j, i)] = acc;
        }
    }
    d2
}

/// 25%-style bandwidth: quantile of the upper-triangle squared distances.
pub fn bandwidth_from_sq_dists(d2: &DMatrix<f64>, quantile: f64) -> Result<f64> {
    let n = d2.nrows();
    let mut vals: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            vals.push(d2[(i, j)]);
        }
    }
    if vals.is_empty() {
        return Err(CglError::AllDistancesZero);
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = quantile_sorted(&vals, quantile);
    if m <= 0.0 {
        return Err(CglError::AllDistancesZero);
    }
    Ok(m)
}

pub const METHOD_EUCLIDEAN: &str = "euclidean";
pub const METHOD_KNN: &str = "knn_cgl";
pub const METHOD_FULL: &str = "full_cgl";
pub const METHOD_ZERODIAG: &str = "zerodiag_cgl";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveConfig {
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub c: f64,
    pub knn: usize,
    pub delta: f64,
    pub t: f64,
    pub seed: u64,
    pub bandwidth_quantile: f64,
    /// Number of estimated nearest neighbors per point.
    pub k_nn: usize,
    /// Rank at which the summary reports the CDF.
    pub rank_eval: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            p: 1000,
            alpha: 0.25,
            c: 0.4,
            knn: 100,
            delta: 0.2,
            t: 1.0,
            seed: 0,
            bandwidth_quantile: 0.25,
            k_nn: 10,
            rank_eval: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveMethodResult {
    pub method: String,
    /// Embedding dimension chosen on the clean operator (None for the raw
    /// Euclidean baseline).
    pub m: Option<usize>,
    pub rank_cdf: RankCdf,
    pub cdf_at_eval: f64,
    pub cdf_at_2knn: f64,
    /// Noisy-data embedding coordinates (None for the Euclidean baseline).
    pub embedding: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct CurveArtifacts {
    pub config: CurveConfig,
    pub snrdb: f64,
    pub bandwidth_clean: f64,
    pub bandwidth_noisy: f64,
    pub methods: Vec<CurveMethodResult>,
}

impl CurveArtifacts {
    pub fn method(&self, name: &str) -> Option<&CurveMethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }
}

fn rows_to_vecs(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|c| m[(i, c)]).collect())
        .collect()
}

/// The noisy-curve pipeline: sample the closed curve in R^p, add isotropic
/// noise, build Gaussian-kernel affinities with a quantile bandwidth and a
/// trivial connection, form the three operator variants (kNN / full /
/// zero-diagonal), embed with the truncated diffusion map, and score each
/// method's estimated neighbors against the clean geometry of the same
/// method. The embedding dimension per method comes from the δ-rule applied
/// to the clean operator's spectrum and is reused for the noisy embedding
/// (the noisy spectra fall below any useful δ, so the rule is only
/// well-posed on the clean side).
pub fn run_curve_experiment(config: &CurveConfig) -> Result<CurveArtifacts> {
    if config.k_nn == 0 || config.k_nn >= config.n {
        return Err(CglError::InvalidK {
            kn: config.k_nn,
            n: config.n,
        });
    }
    let clean = bell_curve(config.n, config.p, config.seed)?;
    let spec = NoiseSpec::isotropic(
        config.alpha,
        config.c,
        config.seed.wrapping_add(NOISE_SEED_SALT),
    );
    let noise = sample_noise(&spec, config.p, config.n)?;
    let mut noisy = clean.points.clone();
    for i in 0..config.n {
        for j in 0..config.p {
            noisy[(i, j)] += noise.vectors[i][j];
        }
    }
    let snr = snrdb(&rows_to_vecs(&clean.points), &rows_to_vecs(&noisy))?;

    let d2_clean = pairwise_sq_dists(&clean.points);
    let d2_noisy = pairwise_sq_dists(&noisy);
    let bw_clean = bandwidth_from_sq_dists(&d2_clean, config.bandwidth_quantile)?;
    let bw_noisy = bandwidth_from_sq_dists(&d2_noisy, config.bandwidth_quantile)?;
    let w_clean = AffinityMatrix::gaussian(&d2_clean, bw_clean)?;
    let w_noisy = AffinityMatrix::gaussian(&d2_noisy, bw_noisy)?;
    let trivial = ConnectionBlocks::trivial(config.n);

    let mut methods = Vec::new();
    for method in [METHOD_KNN, METHOD_FULL, METHOD_ZERODIAG] {
        let (wc, wn) = if method == METHOD_KNN {
            (knn_mask(&w_clean, config.knn)?, knn_mask(&w_noisy, config.knn)?)
        } else {
            (w_clean.clone(), w_noisy.clone())
        };
        let zero_diag = method == METHOD_ZERODIAG;
        let assemble = if zero_diag {
            assemble_symmetric_zero_diag
        } else {
            assemble_symmetric
        };
        let dec_clean = eig_sym(&assemble(&wc, &trivial)?)?;
        let dec_noisy = eig_sym(&assemble(&wn, &trivial)?)?;
        let phi_clean = diffusion_map(&dec_clean, config.t, DiffusionRule::Threshold(config.delta))?;
        let phi_noisy = diffusion_map(&dec_noisy, config.t, DiffusionRule::FixedM(phi_clean.m))?;
        let rank_cdf = nn_rank_cdf(
            &pairwise_sq_dists(&phi_noisy.coords),
            &pairwise_sq_dists(&phi_clean.coords),
            config.k_nn,
        )?;
        methods.push(CurveMethodResult {
            method: method.to_string(),
            m: Some(phi_clean.m),
            cdf_at_eval: rank_cdf.cdf(config.rank_eval),
            cdf_at_2knn: rank_cdf.cdf(2 * config.k_nn),
            rank_cdf,
            embedding: Some(phi_noisy.coords),
        });
    }
    let rank_cdf = nn_rank_cdf(&d2_noisy, &d2_clean, config.k_nn)?;
    methods.push(CurveMethodResult {
        method: METHOD_EUCLIDEAN.to_string(),
        m: None,
        cdf_at_eval: rank_cdf.cdf(config.rank_eval),
        cdf_at_2knn: rank_cdf.cdf(2 * config.k_nn),
        rank_cdf,
        embedding: None,
    });

    Ok(CurveArtifacts {
        config: config.clone(),
        snrdb: snr,
        bandwidth_clean: bw_clean,
        bandwidth_noisy: bw_noisy,
        methods,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageConfig {
    pub n_k: usize,
    pub n_r: usize,
    pub p: usize,
    pub alpha: f64,
    /// Noise scale as a multiple of the template pixel std: c = mult·σ.
    /// Zero means a clean run.
    pub c_sigma_mult: f64,
    pub knn: usize,
    pub seed: u64,
    pub bandwidth_quantile: f64,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            n_k: 5,
            n_r: 200,
            p: 1000,
            alpha: 0.25,
            c_sigma_mult: 6.0,
            knn: 100,
            seed: 0,
            bandwidth_quantile: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImageMethodResult {
    pub method: String,
    /// Per-node angular error against ground truth.
    pub z: Vec<f64>,
    pub summary: AlignmentSummary,
}

#[derive(Debug, Clone)]
pub struct ImageArtifacts {
    pub config: ImageConfig,
    /// Realized template pixel std and the resulting noise scale c.
    pub sigma: f64,
    pub c: f64,
    pub snrdb: Option<f64>,
    pub bandwidth: f64,
    pub class_id: Vec<usize>,
    pub methods: Vec<ImageMethodResult>,
}

impl ImageArtifacts {
    pub fn method(&self, name: &str) -> Option<&ImageMethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// The rotated-image alignment pipeline: generate labeled rotated copies of
/// random templates, optionally add isotropic noise, build the RID
/// connection graph, form the complex symmetric CGL in three variants
/// (complete graph with and without diagonal, kNN graph), extract each
/// variant's alignment vector and summarize its angular errors against the
/// ground-truth rotations.
pub fn run_image_experiment(config: &ImageConfig) -> Result<ImageArtifacts> {
    let set = surrogate_images(config.n_k, config.n_r, config.p, config.seed)?;
    let n = set.n();
    let p = set.p();
    let c = config.c_sigma_mult * set.sigma;
    let (imgs, snr): (Vec<CircularImage>, Option<f64>) = if config.c_sigma_mult > 0.0 {
        let spec =
            NoiseSpec::isotropic(config.alpha, c, config.seed.wrapping_add(NOISE_SEED_SALT));
        let noise = sample_noise(&spec, p, n)?;
        let noisy: Vec<CircularImage> = set
            .images
            .iter()
            .zip(&noise.vectors)
            .map(|(im, nv)| {
                CircularImage::new(
                    im.samples()
                        .iter()
                        .zip(nv)
                        .map(|(a, b)| a + b)
                        .collect(),
                )
            })
            .collect::<Result<_>>()?;
        let clean_v: Vec<Vec<f64>> = set.images.iter().map(|im| im.samples().to_vec()).collect();
        let noisy_v: Vec<Vec<f64>> = noisy.iter().map(|im| im.samples().to_vec()).collect();
        let snr = snrdb(&clean_v, &noisy_v)?;
        (noisy, Some(snr))
    } else {
        (set.images.clone(), None)
    };

    let (w, g, bandwidth) = build_connection_graph(&imgs, config.bandwidth_quantile)?;
    let g_complex = g.to_complex()?;
    let u: Vec<Complex64> = set
        .true_shift
        .iter()
        .map(|&s| Complex64::from_polar(1.0, std::f64::consts::TAU * s as f64 / p as f64))
        .collect();

    let mut methods = Vec::new();
    for method in [METHOD_FULL, METHOD_ZERODIAG, METHOD_KNN] {
        let (w_used, zero_diag) = match method {
            METHOD_FULL => (w.clone(), false),
            METHOD_ZERODIAG => (w.clone(), true),
            _ => (knn_mask(&w, config.knn)?, false),
        };
        let h = assemble_symmetric_complex(&w_used, &g_complex, zero_diag)?;
        let v = alignment_vector(&h);
        let z = alignment_error(&u, &v)?;
        let summary = alignment_summary(&z, &set.class_id)?;
        methods.push(ImageMethodResult {
            method: method.to_string(),
            z,
            summary,
        });
    }
    Ok(ImageArtifacts {
        config: config.clone(),
        sigma: set.sigma,
        c,
        snrdb: snr,
        bandwidth,
        class_id: set.class_id,
        methods,
    })
}

#[derive(Serialize)]
struct CurveSummary<'a> {
    snrdb: f64,
    bandwidth_clean: f64,
    bandwidth_noisy: f64,
    methods: BTreeMap<&'a str, CurveMethodSummary>,
}

#[derive(Serialize)]
struct CurveMethodSummary {
    m: Option<usize>,
    cdf_at_eval: f64,
    cdf_at_2knn: f64,
}

/// Write `<out>/config.json`, per-method `embedding_*.csv` and
/// `rankcdf_*.csv`, and `summary.json`.
pub fn write_curve_bundle(art: &CurveArtifacts, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    crate::io::write_json(&out.join("config.json"), &art.config)?;
    let mut summaries = BTreeMap::new();
    for m in &art.methods {
        if let Some(embedding) = &m.embedding {
            crate::io::write_embedding_csv(&out.join(format!("embedding_{}.csv", m.method)), embedding)?;
        }
        crate::io::write_rankcdf_csv(&out.join(format!("rankcdf_{}.csv", m.method)), &m.rank_cdf)?;
        summaries.insert(
            m.method.as_str(),
            CurveMethodSummary {
                m: m.m,
                cdf_at_eval: m.cdf_at_eval,
                cdf_at_2knn: m.cdf_at_2knn,
            },
        );
    }
    crate::io::write_json(
        &out.join("summary.json"),
        &CurveSummary {
            snrdb: art.snrdb,
            bandwidth_clean: art.bandwidth_clean,
            bandwidth_noisy: art.bandwidth_noisy,
            methods: summaries,
        },
    )
}

#[derive(Serialize)]
struct ImageSummary<'a> {
    sigma: f64,
    c: f64,
    snrdb: Option<f64>,
    bandwidth: f64,
    methods: BTreeMap<&'a str, &'a AlignmentSummary>,
}

/// Write `<out>/config.json`, per-method `alignment_*.csv`, and
/// `summary.json`.
pub fn write_image_bundle(art: &ImageArtifacts, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    crate::io::write_json(&out.join("config.json"), &art.config)?;
    let mut summaries = BTreeMap::new();
    for m in &art.methods {
        crate::io::write_alignment_csv(
            &out.join(format!("alignment_{}.csv", m.method)),
            &art.class_id,
            &m.z,
        )?;
        summaries.insert(m.method.as_str(), &m.summary);
    }
    crate::io::write_json(
        &out.join("summary.json"),
        &ImageSummary {
            sigma: art.sigma,
            c: art.c,
            snrdb: art.snrdb,
            bandwidth: art.bandwidth,
            methods: summaries,
        },
    )
}
