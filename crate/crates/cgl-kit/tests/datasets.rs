use cgl_kit::datasets::*;
use cgl_kit::rid::{rid, rid_direct, rotate, RotationIndex};
use cgl_kit::spectral::top_eigenpair_hermitian;
use nalgebra::DMatrix;
use num_complex::Complex64;

#[test]
fn bell_point_parametrization() {
    // At t = 0: cos t = 1, bump = 1 - 0.8 e^{-8}, angle π/2.
    let p0 = bell_point(0.0);
    let b = 1.0 - 0.8 * (-8.0f64).exp();
    assert!((p0[0] - 1.0).abs() < 1e-15);
    assert!((p0[1] - b * (std::f64::consts::PI / 2.0).cos()).abs() < 1e-12);
    assert!((p0[2] - b * (std::f64::consts::PI / 2.0).sin()).abs() < 1e-12);
    // The curve is 2π-periodic.
    let p2 = bell_point(std::f64::consts::TAU);
    for i in 0..3 {
        assert!((p0[i] - p2[i]).abs() < 1e-12);
    }
    // At t = π/2: cos t = 0 so the bump is deepest (1 - 0.8).
    let pm = bell_point(std::f64::consts::FRAC_PI_2);
    assert!(pm[0].abs() < 1e-15);
    let bm = 0.2f64;
    let ang = std::f64::consts::PI / 4.0;
    assert!((pm[1] - bm * ang.cos()).abs() < 1e-12);
    assert!((pm[2] - bm * ang.sin()).abs() < 1e-12);
}

#[test]
fn bell_curve_samples_lie_on_curve() {
    let cloud = bell_curve(50, 6, 3).unwrap();
    assert_eq!(cloud.points.nrows(), 50);
    assert_eq!(cloud.points.ncols(), 6);
    assert_eq!(cloud.params.len(), 50);
    for i in 0..50 {
        let expect = bell_point(cloud.params[i]);
        for c in 0..3 {
            assert!((cloud.points[(i, c)] - expect[c]).abs() < 1e-12);
        }
        for c in 3..6 {
            assert_eq!(cloud.points[(i, c)], 0.0);
        }
        assert!((0.0..std::f64::consts::TAU).contains(&cloud.params[i]));
    }
}

#[test]
fn bell_curve_needs_three_ambient_dims() {
    assert!(bell_curve(10, 2, 0).is_err());
    assert!(bell_curve(10, 3, 0).is_ok());
}

#[test]
fn bell_curve_is_deterministic_per_seed() {
    let a = bell_curve(20, 5, 7).unwrap();
    let b = bell_curve(20, 5, 7).unwrap();
    assert_eq!(a.points, b.points);
    let c = bell_curve(20, 5, 8).unwrap();
    assert_ne!(a.points, c.points);
}

#[test]
fn trefoil_parametrization_and_bound() {
    let q = trefoil_point(0.0);
    assert!((q[0] - 0.0).abs() < 1e-15);
    assert!((q[1] - (1.0 - 2.0)).abs() < 1e-12); // cos 0 - 2 cos 0 = -1
    assert!((q[2] - 0.0).abs() < 1e-15);
    // max_t ‖ι(t)‖² = max_u (6 - 4u - u²) over u = cos 3t ∈ [-1,1] is 9.
    let mut max_norm: f64 = 0.0;
    for i in 0..100_000 {
        let t = std::f64::consts::TAU * i as f64 / 100_000.0;
        let q = trefoil_point(t);
        max_norm = max_norm.max((q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt());
    }
    assert!(max_norm <= 3.0 + 1e-9, "max norm {max_norm}");
    let cloud = trefoil(30, 1).unwrap();
    for i in 0..30 {
        let expect = trefoil_point(cloud.params[i]);
        for c in 0..3 {
            assert!((cloud.points[(i, c)] - expect[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn surrogate_rotations_have_zero_rid_to_template() {
    let set = surrogate_images(1, 3, 64, 0).unwrap();
    assert_eq!(set.n(), 3);
    for i in 0..3 {
        let r = rid(&set.templates[0], &set.images[i]).unwrap();
        assert!(r.distance_sq < 1e-18);
        // The recorded shift reproduces the image from the template.
        let rebuilt = rotate(
            &set.templates[0],
            RotationIndex::new(set.true_shift[i], 64),
        );
        for (a, b) in rebuilt.samples().iter().zip(set.images[i].samples()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn surrogate_ground_truth_matches_exhaustive_search() {
    let set = surrogate_images(3, 4, 48, 2).unwrap();
    for (i, img) in set.images.iter().enumerate() {
        let t = &set.templates[set.class_id[i]];
        let r = rid_direct(t, img).unwrap();
        assert!(r.distance_sq < 1e-18);
        // img = rotate(template, s), so aligning img back onto the template
        // takes the inverse shift p − s.
        assert_eq!(r.optimal_shift.s, (48 - set.true_shift[i]) % 48);
        let fwd = rid_direct(img, t).unwrap();
        assert_eq!(fwd.optimal_shift.s, set.true_shift[i]);
    }
}

#[test]
fn surrogate_shapes_and_normalization() {
    let set = surrogate_images(5, 200, 1000, 0).unwrap();
    assert_eq!(set.n(), 1000);
    assert_eq!(set.p(), 1000);
    assert_eq!(set.templates.len(), 5);
    for t in &set.templates {
        assert!((t.norm_sq() - 1.0).abs() < 1e-10);
    }
    for i in 0..set.n() {
        assert_eq!(set.class_id[i], i / 200);
        assert!(set.true_shift[i] < 1000);
    }
    // σ is the population std of all template pixels; unit-norm templates
    // with zero-mean Fourier series give σ ≈ p^{-1/2}.
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for t in &set.templates {
        for &x in t.samples() {
            sum += x;
            sum_sq += x * x;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let sigma = (sum_sq / count as f64 - mean * mean).sqrt();
    assert!((set.sigma - sigma).abs() < 1e-12);
}

#[test]
fn surrogate_templates_are_separated() {
    for seed in 0..5 {
        let set = surrogate_images(4, 2, 200, seed).unwrap();
        for a in 0..4 {
            for b in a + 1..4 {
                let r = rid(&set.templates[a], &set.templates[b]).unwrap();
                assert!(
                    r.distance_sq.sqrt() >= 0.05,
                    "seed {seed}: templates {a},{b} too close"
                );
            }
        }
    }
}

#[test]
fn surrogate_is_deterministic_per_seed() {
    let a = surrogate_images(2, 3, 32, 5).unwrap();
    let b = surrogate_images(2, 3, 32, 5).unwrap();
    for i in 0..a.n() {
        assert_eq!(a.images[i].samples(), b.images[i].samples());
        assert_eq!(a.true_shift[i], b.true_shift[i]);
    }
}

#[test]
fn clean_class_graph_is_synchronizable() {
    // Rotated copies of one template form a consistent connection graph, so
    // the complex symmetric CGL has top eigenvalue 1.
    let set = surrogate_images(1, 12, 100, 3).unwrap();
    // All within-class distances are exactly zero, so build the graph by
    // hand with unit weights and the pairwise optimal rotations.
    let n = set.n();
    let p = set.p();
    let mut angles = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let r = rid(&set.images[i], &set.images[j]).unwrap();
                assert!(r.distance_sq < 1e-18);
                angles[(i, j)] = r.optimal_shift.angle();
            }
        }
    }
    let w =
        cgl_kit::connection_graph::AffinityMatrix::new(DMatrix::from_fn(n, n, |_, _| 1.0))
            .unwrap();
    let g = cgl_kit::connection_graph::ConnectionBlocks::from_angles(&angles).unwrap();
    // Drop the diagonal blocks: with unit self-loops kept, the consistent
    // graph's top eigenvalue is n/(n−1) instead of exactly 1.
    let h = cgl_kit::connection_graph::assemble_symmetric_complex(
        &w,
        &g.to_complex().unwrap(),
        true,
    )
    .unwrap();
    let (v, lam, converged) = top_eigenpair_hermitian(&h, 1e-12, 5000);
    assert!(converged);
    assert!((lam - 1.0).abs() < 1e-8, "top eigenvalue {lam}");
    // The phase differences of the top eigenvector recover the planted
    // relative rotations: arg(v_i / v_j) == 2π(s_i - s_j)/p.
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let expect = std::f64::consts::TAU
                * ((set.true_shift[i] + p - set.true_shift[j]) % p) as f64
                / p as f64;
            let got: Complex64 = v[i] * v[j].conj();
            let diff = cgl_kit::util::wrap_angle(got.arg() - expect).abs();
            assert!(diff < 1e-8, "pair ({i},{j}): {diff}");
        }
    }
}
