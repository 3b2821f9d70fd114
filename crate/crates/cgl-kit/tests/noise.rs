use cgl_kit::noise::*;
use cgl_kit::rid::{rid, CircularImage};
use cgl_kit::datasets::surrogate_images;

#[test]
fn same_spec_is_deterministic() {
    let spec = NoiseSpec::isotropic(0.25, 1.0, 42);
    let a = sample_noise(&spec, 64, 5).unwrap();
    let b = sample_noise(&spec, 64, 5).unwrap();
    assert_eq!(a.vectors, b.vectors);
    let other = sample_noise(&NoiseSpec::isotropic(0.25, 1.0, 43), 64, 5).unwrap();
    assert_ne!(a.vectors, other.vectors);
}

#[test]
fn vectors_are_independent_of_batch_size() {
    // Counter-based substreams: vector i is the same whether drawn in a
    // batch of 3 or a batch of 10.
    let spec = NoiseSpec::elliptical(0.5, 2.0, 7);
    let small = sample_noise(&spec, 32, 3).unwrap();
    let big = sample_noise(&spec, 32, 10).unwrap();
    for i in 0..3 {
        assert_eq!(small.vectors[i], big.vectors[i]);
    }
}

#[test]
fn tiny_c_gives_negligible_noise() {
    let spec = NoiseSpec::isotropic(0.0, 1e-18, 0);
    let s = sample_noise(&spec, 100, 4).unwrap();
    for v in &s.vectors {
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        assert!(norm_sq < 1e-12);
    }
}

#[test]
fn empirical_trace_matches_correction() {
    // E‖N‖² = p · c/p^α = c·p^{1-α}; trace_correction returns twice that
    // (the expectation for a difference of two independent draws).
    let p = 10_000;
    let n = 200;
    let spec = NoiseSpec::isotropic(0.25, 1.0, 123);
    let s = sample_noise(&spec, p, n).unwrap();
    let mean_norm_sq: f64 = s
        .vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let expected = trace_correction(&spec, p).unwrap() / 2.0;
    // Var(‖N‖²) = 2p·(c/p^α)², so SE of the mean over n draws:
    let var_coord = spec.coord_variance(p);
    let se = (2.0 * p as f64).sqrt() * var_coord / (n as f64).sqrt();
    assert!(
        (mean_norm_sq - expected).abs() < 4.0 * se,
        "mean {mean_norm_sq} vs expected {expected} (se {se})"
    );
}

#[test]
fn elliptical_scales_have_unit_second_moment() {
    let p = 5_000;
    let n = 400;
    let spec = NoiseSpec::elliptical(0.25, 1.0, 9);
    let s = sample_noise(&spec, p, n).unwrap();
    let scales = s.scales.as_ref().unwrap();
    assert_eq!(scales.len(), n);
    for &l in scales {
        assert!(
            (l - 0.5).abs() < 1e-12 || (l - 1.75f64.sqrt()).abs() < 1e-12,
            "unexpected scale {l}"
        );
    }
    // λ² averages to 1, so the mean squared norm still matches the
    // isotropic trace within Monte-Carlo error. λ²∈{0.25,1.75} adds spread.
    let mean_norm_sq: f64 = s
        .vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let expected = spec.coord_variance(p) * p as f64;
    let se = expected * 0.75f64.sqrt() / (n as f64).sqrt(); // dominated by λ² spread
    assert!(
        (mean_norm_sq - expected).abs() < 4.0 * se,
        "mean {mean_norm_sq} vs {expected} (se {se})"
    );
}

#[test]
fn trace_correction_closed_form() {
    let spec = NoiseSpec::isotropic(0.25, 0.4, 0);
    let got = trace_correction(&spec, 1000).unwrap();
    assert!((got - 2.0 * 0.4 * 1000f64.powf(0.75)).abs() < 1e-9);
    let alpha1 = NoiseSpec::isotropic(1.0, 3.0, 0);
    assert!((trace_correction(&alpha1, 50).unwrap() - 6.0).abs() < 1e-12);
    assert!(matches!(
        trace_correction(&NoiseSpec::elliptical(0.25, 1.0, 0), 100),
        Err(cgl_kit::CglError::UnsupportedShape)
    ));
}

#[test]
fn snrdb_examples() {
    // Ratio of mean noisy-signal power to mean noise power, in dB.
    let clean = vec![vec![3.0, 0.0]];
    let noisy = vec![vec![3.0, 4.0]];
    let got = snrdb(&clean, &noisy).unwrap();
    assert!((got - 10.0 * (25.0f64 / 16.0).log10()).abs() < 1e-12);
    // Much larger noise: the ratio tends to 0 dB from above as the noisy
    // signal becomes noise-dominated.
    let noisy10 = vec![vec![3.0, 400.0]];
    let got10 = snrdb(&clean, &noisy10).unwrap();
    let expect10 = 10.0 * ((9.0f64 + 160_000.0) / 160_000.0).log10();
    assert!((got10 - expect10).abs() < 1e-12);
    assert!(got10 < got);
    // Zero noise is rejected.
    assert!(matches!(
        snrdb(&clean, &clean.clone()),
        Err(cgl_kit::CglError::ZeroNoise)
    ));
}

#[test]
fn validate_rejects_bad_specs() {
    assert!(NoiseSpec::isotropic(-0.1, 1.0, 0).validate().is_err());
    assert!(NoiseSpec::isotropic(1.1, 1.0, 0).validate().is_err());
    assert!(NoiseSpec::isotropic(0.5, 0.0, 0).validate().is_err());
    let bad_law = NoiseSpec {
        shape: NoiseShape::Elliptical {
            lambda_law: [0.5, 0.5],
        },
        ..NoiseSpec::isotropic(0.5, 1.0, 0)
    };
    assert!(bad_law.validate().is_err());
}

#[test]
fn spec_roundtrips_through_json() {
    for spec in [
        NoiseSpec::isotropic(0.25, 0.4, 17),
        NoiseSpec::elliptical(0.75, 6.0, 3),
    ] {
        let s = serde_json::to_string(&spec).unwrap();
        let back: NoiseSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
    }
}

/// Rotation recovery improves with image length: at fixed c and α > 1/2 the
/// shift-dependent noise fluctuations of the RID profile shrink relative to
/// the O(1) clean profile gaps, so noisy optimal shifts agree with clean
/// ones more often as p grows.
#[test]
fn shift_recovery_improves_with_p() {
    let mut rates = Vec::new();
    for &p in &[64usize, 512, 4096] {
        let set = surrogate_images(2, 8, p, 5).unwrap();
        let spec = NoiseSpec::isotropic(0.75, 0.5, 11);
        let noise = sample_noise(&spec, p, set.n()).unwrap();
        let noisy: Vec<CircularImage> = set
            .images
            .iter()
            .zip(&noise.vectors)
            .map(|(im, nv)| {
                CircularImage::new(im.samples().iter().zip(nv).map(|(a, b)| a + b).collect())
                    .unwrap()
            })
            .collect();
        let n = set.n();
        let mut hits = 0usize;
        let mut total = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                // Only within-class pairs: their clean optimal shift is the
                // planted relative rotation with an O(1) profile gap, so the
                // asymptotic recovery statement applies pair by pair.
                if set.class_id[i] != set.class_id[j] {
                    continue;
                }
                let clean = rid(&set.images[i], &set.images[j]).unwrap();
                let dirty = rid(&noisy[i], &noisy[j]).unwrap();
                // Count agreement up to the discretization neighbors.
                let diff = (clean.optimal_shift.s as i64 - dirty.optimal_shift.s as i64)
                    .rem_euclid(p as i64);
                let diff = diff.min(p as i64 - diff);
                if (diff as f64) <= (p as f64 / 64.0).max(1.0) {
                    hits += 1;
                }
                total += 1;
            }
        }
        rates.push(hits as f64 / total as f64);
    }
    assert!(
        rates[2] >= rates[0] && rates[2] > 0.9,
        "recovery rates did not improve: {rates:?}"
    );
}
