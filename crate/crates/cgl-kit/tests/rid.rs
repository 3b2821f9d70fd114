use cgl_kit::rid::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn img(v: &[f64]) -> CircularImage {
    CircularImage::new(v.to_vec()).unwrap()
}

fn random_image(p: usize, rng: &mut ChaCha8Rng) -> CircularImage {
    CircularImage::new((0..p).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap()
}

#[test]
fn rotate_zero_is_identity() {
    let a = img(&[1.0, 2.0, 3.0, 4.0]);
    let r = rotate(&a, RotationIndex::new(0, 4));
    assert_eq!(r.samples(), a.samples());
}

#[test]
fn rotate_moves_delta_forward() {
    let a = img(&[1.0, 0.0, 0.0, 0.0, 0.0]);
    let r = rotate(&a, RotationIndex::new(2, 5));
    assert_eq!(r.samples(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
}

#[test]
fn rotate_composes_as_cyclic_group() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_image(12, &mut rng);
    let s1 = 5;
    let s2 = 9;
    let via_two = rotate(&rotate(&a, RotationIndex::new(s1, 12)), RotationIndex::new(s2, 12));
    let direct = rotate(&a, RotationIndex::new((s1 + s2) % 12, 12));
    assert_eq!(via_two.samples(), direct.samples());
    // Inverse shift restores the original samples exactly.
    let back = rotate(&rotate(&a, RotationIndex::new(s1, 12)), RotationIndex::new(12 - s1, 12));
    assert_eq!(back.samples(), a.samples());
}

#[test]
fn rid_of_identical_images_is_zero_at_shift_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_image(16, &mut rng);
    let r = rid(&a, &a).unwrap();
    assert_eq!(r.distance_sq, 0.0);
    assert_eq!(r.optimal_shift.s, 0);
}

#[test]
fn rid_recovers_planted_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_image(32, &mut rng);
    let b = rotate(&a, RotationIndex::new(5, 32));
    let r = rid(&a, &b).unwrap();
    assert!(r.distance_sq.abs() < 1e-18);
    // rotate(b, s*) == a requires s* = p - 5.
    assert_eq!(r.optimal_shift.s, 27);
}

#[test]
fn fast_rid_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in [16usize, 33, 64] {
        for _ in 0..25 {
            let a = random_image(p, &mut rng);
            let b = random_image(p, &mut rng);
            let fast = rid(&a, &b).unwrap();
            let slow = rid_direct(&a, &b).unwrap();
            assert_eq!(fast.optimal_shift.s, slow.optimal_shift.s, "p={p}");
            assert!(
                (fast.distance_sq - slow.distance_sq).abs()
                    <= 1e-10 * (a.norm_sq() + b.norm_sq()),
                "p={p}: {} vs {}",
                fast.distance_sq,
                slow.distance_sq
            );
        }
    }
}

#[test]
fn tie_rule_prefers_smallest_shift() {
    // A constant image ties at every shift.
    let a = img(&[1.0; 8]);
    let b = img(&[2.0; 8]);
    let fast = rid(&a, &b).unwrap();
    let slow = rid_direct(&a, &b).unwrap();
    assert_eq!(fast.optimal_shift.s, 0);
    assert_eq!(slow.optimal_shift.s, 0);
    assert!((fast.distance_sq - 8.0).abs() < 1e-12);
}

#[test]
fn rid_is_symmetric_with_inverse_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a = random_image(24, &mut rng);
        let b = random_image(24, &mut rng);
        let ab = rid(&a, &b).unwrap();
        let ba = rid(&b, &a).unwrap();
        assert!((ab.distance_sq - ba.distance_sq).abs() < 1e-10);
        assert_eq!((ab.optimal_shift.s + ba.optimal_shift.s) % 24, 0);
    }
}

#[test]
fn rid_is_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_image(20, &mut rng);
    let b = random_image(20, &mut rng);
    let base = rid(&a, &b).unwrap().distance_sq;
    for s in 0..20 {
        let d = rid(&rotate(&a, RotationIndex::new(s, 20)), &b)
            .unwrap()
            .distance_sq;
        assert!((d - base).abs() < 1e-9, "shift {s}: {d} vs {base}");
    }
}

#[test]
fn profile_from_spectra_matches_direct_profile() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let engine = RidEngine::new(30);
    let a = random_image(30, &mut rng);
    let b = random_image(30, &mut rng);
    let fast_profile = engine.profile_from_spectra(&engine.spectrum(&a), &engine.spectrum(&b));
    let slow = rid_direct(&a, &b).unwrap();
    let slow_profile = slow.profile.unwrap();
    for s in 0..30 {
        assert!(
            (fast_profile[s] - slow_profile[s]).abs() < 1e-9,
            "shift {s}"
        );
    }
}

#[test]
fn pairwise_table_matches_pair_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let imgs: Vec<CircularImage> = (0..7).map(|_| random_image(16, &mut rng)).collect();
    let table = pairwise_rid(&imgs).unwrap();
    assert_eq!(table.n, 7);
    assert_eq!(table.p, 16);
    for i in 0..7 {
        assert_eq!(table.distance_sq[(i, i)], 0.0);
        assert_eq!(table.shift_at(i, i), 0);
        for j in 0..7 {
            if i == j {
                continue;
            }
            let r = rid(&imgs[i], &imgs[j]).unwrap();
            assert_eq!(table.distance_sq[(i, j)], table.distance_sq[(j, i)]);
            assert!((table.distance_sq[(i, j)] - r.distance_sq).abs() < 1e-12);
            if i < j {
                assert_eq!(table.shift_at(i, j), r.optimal_shift.s);
                assert_eq!(table.shift_at(j, i), (16 - r.optimal_shift.s) % 16);
            }
        }
    }
}

#[test]
fn connection_graph_rejects_all_zero_distances() {
    let a = img(&[1.0, 2.0, 3.0, 4.0]);
    let imgs = vec![a.clone(), a.clone(), a];
    assert!(matches!(
        build_connection_graph(&imgs, 0.25),
        Err(cgl_kit::CglError::AllDistancesZero)
    ));
}

#[test]
fn connection_graph_encodes_planted_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_image(40, &mut rng);
    let b = rotate(&a, RotationIndex::new(11, 40));
    let c = random_image(40, &mut rng);
    let (w, g, _m) = build_connection_graph(&[a, b, c], 0.5).unwrap();
    // Same image up to rotation: distance 0 so weight exp(0) = 1, and the
    // connection block is the planted rotation angle.
    assert!((w.get(0, 1) - 1.0).abs() < 1e-12);
    assert_eq!(w.get(0, 0), 1.0);
    let theta = std::f64::consts::TAU * 29.0 / 40.0; // shift aligning b to a
    let block = g.block(0, 1);
    assert!((block[(0, 0)] - theta.cos()).abs() < 1e-12);
    assert!((block[(1, 0)] - theta.sin()).abs() < 1e-12);
    // Block transpose-symmetry across the pair.
    let back = g.block(1, 0);
    assert!((back[(0, 1)] - theta.sin()).abs() < 1e-12);
}

#[test]
fn connection_graph_matches_independent_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let imgs: Vec<CircularImage> = (0..10).map(|_| random_image(64, &mut rng)).collect();
    let q = 0.25;
    let (w, g, m) = build_connection_graph(&imgs, q).unwrap();
    // Independent oracle: exhaustive RID for every pair, quantile with linear
    // interpolation over the strictly positive upper-triangle distances.
    let n = imgs.len();
    let mut d2 = vec![vec![0.0; n]; n];
    let mut shift = vec![vec![0usize; n]; n];
    let mut pos = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = rid_direct(&imgs[i], &imgs[j]).unwrap();
            d2[i][j] = r.distance_sq;
            shift[i][j] = r.optimal_shift.s;
            if i < j && r.distance_sq > 0.0 {
                pos.push(r.distance_sq);
            }
        }
    }
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (pos.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let m_oracle = if lo + 1 < pos.len() {
        pos[lo] * (1.0 - frac) + pos[lo + 1] * frac
    } else {
        pos[lo]
    };
    assert!((m - m_oracle).abs() <= 1e-12 * m_oracle);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                assert_eq!(w.get(i, i), 1.0);
                continue;
            }
            let expect_w = (-d2[i][j] / m_oracle).exp();
            assert!((w.get(i, j) - expect_w).abs() < 1e-12);
            let th = std::f64::consts::TAU * shift[i][j] as f64 / 64.0;
            assert!((g.block(i, j)[(0, 0)] - th.cos()).abs() < 1e-12);
            assert!((g.block(i, j)[(1, 0)] - th.sin()).abs() < 1e-12);
        }
    }
}

#[test]
fn rotation_permutation_is_cyclic_group_of_order_p() {
    use nalgebra::DMatrix;
    let p = 12;
    let id = DMatrix::<f64>::identity(p, p);
    assert_eq!(rotation_permutation(0, p), id);
    let r1 = rotation_permutation(1, p);
    // Generator check: R(s) = R(1)^s, all p powers distinct, R(1)^p = I.
    let mut acc = id.clone();
    let mut seen = Vec::new();
    for s in 0..p {
        assert_eq!(acc, rotation_permutation(s, p), "power {s}");
        for prev in &seen {
            assert_ne!(&acc, prev);
        }
        seen.push(acc.clone());
        acc = &acc * &r1;
    }
    assert_eq!(acc, id);
    // Orthogonality and action consistency with rotate().
    for s in [3usize, 7] {
        let r = rotation_permutation(s, p);
        let rtr = r.transpose() * &r;
        assert_eq!(rtr, id);
        let mut rng = ChaCha8Rng::seed_from_u64(s as u64);
        let a = random_image(p, &mut rng);
        let v = nalgebra::DVector::from_row_slice(a.samples());
        let rotated = rotate(&a, RotationIndex::new(s, p));
        let mv = &r * v;
        for j in 0..p {
            assert!((mv[j] - rotated.samples()[j]).abs() < 1e-15);
        }
    }
}

#[test]
fn one_template_connections_are_transitively_consistent() {
    // Rotated copies of one template: optimal shifts compose, so the
    // k = 2 rotation blocks satisfy G_ij · G_jk = G_ik.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = random_image(36, &mut rng);
    let shifts = [0usize, 4, 9, 17, 30];
    let imgs: Vec<CircularImage> = shifts
        .iter()
        .map(|&s| rotate(&base, RotationIndex::new(s, 36)))
        .collect();
    // All pairwise distances vanish, so derive the blocks straight from the
    // optimal shifts of the RID table.
    let table = pairwise_rid(&imgs).unwrap();
    let mut angles = nalgebra::DMatrix::<f64>::zeros(5, 5);
    for i in 0..5 {
        for j in 0..5 {
            if i != j {
                assert!(table.distance_sq[(i, j)] < 1e-18);
                angles[(i, j)] = RotationIndex::new(table.shift_at(i, j), 36).angle();
            }
        }
    }
    let g = cgl_kit::connection_graph::ConnectionBlocks::from_angles(&angles).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let prod = g.block(i, j) * g.block(j, k);
                let diff = (&prod - g.block(i, k)).abs().max();
                assert!(diff < 1e-12, "triple ({i},{j},{k})");
            }
        }
    }
}

#[test]
fn rejects_tiny_images() {
    assert!(CircularImage::new(vec![1.0]).is_err());
    assert!(CircularImage::new(vec![f64::NAN, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prop_fast_equals_direct(seed in 0u64..10_000, p in 8usize..48) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_image(p, &mut rng);
        let b = random_image(p, &mut rng);
        let fast = rid(&a, &b).unwrap();
        let slow = rid_direct(&a, &b).unwrap();
        prop_assert_eq!(fast.optimal_shift.s, slow.optimal_shift.s);
        prop_assert!((fast.distance_sq - slow.distance_sq).abs()
            <= 1e-10 * (a.norm_sq() + b.norm_sq()));
    }

    #[test]
    fn prop_rid_rotation_invariance(seed in 0u64..10_000, s1 in 0usize..32, s2 in 0usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_image(32, &mut rng);
        let b = random_image(32, &mut rng);
        let base = rid(&a, &b).unwrap().distance_sq;
        let d = rid(
            &rotate(&a, RotationIndex::new(s1, 32)),
            &rotate(&b, RotationIndex::new(s2, 32)),
        )
        .unwrap()
        .distance_sq;
        prop_assert!((d - base).abs() < 1e-9);
    }
}
