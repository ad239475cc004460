use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wavefield_recovery::datamodel::{embed_matrix, extract_matrix, is_valid_mh_cell, mh_to_sr_index, sr_to_mh_index};
use wavefield_recovery::linalg::random_matrix;
use wavefield_recovery::spectral::BandpassSpec;
use wavefield_recovery::{SamplingOperator, SourceMask};

proptest! {
    #[test]
    fn index_map_is_a_bijection(n in 1usize..80, s in 0usize..80, r in 0usize..80) {
        prop_assume!(s < n && r < n);
        let (m, h) = sr_to_mh_index(s, r, n).unwrap();
        prop_assert!(is_valid_mh_cell(m, h, n));
        prop_assert_eq!(mh_to_sr_index(m, h, n), Some((s, r)));
    }

    #[test]
    fn embed_extract_round_trip(n in 1usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(n, n, &mut rng);
        let back = extract_matrix(&embed_matrix(&x).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn jittered_mask_invariants(n in 1usize..400, factor in 1usize..9, seed in any::<u64>()) {
        prop_assume!(factor <= n);
        let m = SourceMask::jittered(n, factor, seed).unwrap();
        prop_assert_eq!(m.kept().len(), n.div_ceil(factor));
        prop_assert!(m.kept().iter().enumerate().all(|(k, &i)| i / factor == k && i < n));
        prop_assert!(m.max_gap() <= 2 * factor - 1);
        prop_assert_eq!(SourceMask::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn factored_apply_matches_dense(n in 2usize..12, rank in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 * n - 1;
        let mask = SourceMask::jittered(n, 2, seed).unwrap();
        let op = SamplingOperator::new(&mask, n).unwrap();
        let l = random_matrix(d, rank, &mut rng);
        let r = random_matrix(d, rank, &mut rng);
        let dense = op.apply(&(&l * r.adjoint())).unwrap();
        let fact = op.apply_factored(&l, &r).unwrap();
        let diff = dense.iter().zip(&fact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-10);
    }

    #[test]
    fn bandpass_response_is_bounded(extra in 0.0f64..50.0, width in 1.0f64..50.0, t in 0.0f64..10.0, f in 0.0f64..200.0) {
        let lo = t + extra;
        let bp = BandpassSpec::new(lo, lo + width, t).unwrap();
        let g = bp.response(f);
        prop_assert!((0.0..=1.0).contains(&g));
        if f >= lo && f <= lo + width {
            prop_assert_eq!(g, 1.0);
        }
    }

    #[test]
    fn adjoint_identity_holds(n in 2usize..10, factor in 1usize..4, seed in any::<u64>()) {
        prop_assume!(factor <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = SourceMask::jittered(n, factor, seed).unwrap();
        let op = SamplingOperator::new(&mask, n).unwrap();
        let x = random_matrix(2 * n - 1, 2 * n - 1, &mut rng);
        let y = random_matrix(op.n_observations(), 1, &mut rng);
        let lhs: num_complex::Complex64 =
            op.apply(&x).unwrap().iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
        let aty = op.adjoint(y.as_slice()).unwrap();
        let rhs: num_complex::Complex64 = x.iter().zip(aty.iter()).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * x.norm() * y.norm());
    }
}
