use hamburger::oracle::{atomic_moments, direct_transform_atomic, jacobi_eigenvalues, lognormal_moments, random_atomic_measure};
use hamburger::*;
use hamburger::mp;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn atomic_sequences_are_solvable(seed in any::<u64>(), n in 1usize..=3, atoms in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_atomic_measure(&mut rng, n, atoms);
        let seq = atomic_moments(&m, 10, 128).unwrap();
        let report = seq.validate_solvability(4, None).unwrap();
        prop_assert!(report.is_solvable());
        // Independent check of the same corner with the Jacobi solver.
        let g = seq.gamma_section(5 * n).unwrap().to_c64();
        let vals = jacobi_eigenvalues(&g);
        prop_assert!(vals[0] >= -1e-9 * vals.last().unwrap().max(1.0));
    }

    #[test]
    fn embedding_reproduces_gamma(seed in any::<u64>(), n in 1usize..=2, atoms in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_atomic_measure(&mut rng, n, atoms);
        let seq = atomic_moments(&m, 12, 128).unwrap();
        let model = embed(&seq, 6 * n, &EmbedOptions { basis_seed: Some(seed), ..EmbedOptions::default() }).unwrap();
        prop_assert!(model.reconstruction_error() < 1e-25);
        prop_assert_eq!(model.rank(), (n * atoms).min(6 * n));
    }

    #[test]
    fn bases_are_orthonormal_and_complete(seed in any::<u64>(), atoms in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_atomic_measure(&mut rng, 1, atoms);
        let seq = atomic_moments(&m, 14, 160).unwrap();
        let model = embed(&seq, 7, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        prop_assert_eq!(basis.tau() + basis.delta(), model.rank());
        prop_assert_eq!(basis.tau() + basis.omega(), model.rank());
        for family in [basis.u(), basis.v()] {
            for (i, a) in family.iter().enumerate() {
                for (j, b) in family.iter().enumerate() {
                    let ip = mp::inner(a, b).to_c64();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((ip - c(want, 0.0)).norm() < 1e-20);
                }
            }
        }
    }

    #[test]
    fn residuals_never_grow(m in 4usize..=12) {
        let seq = lognormal_moments(50, 256).unwrap();
        let small = embed(&seq, m, &EmbedOptions::default()).unwrap();
        let large = embed(&seq, 2 * m, &EmbedOptions::default()).unwrap();
        let bs = orthogonalize(&small, None).unwrap();
        let bl = orthogonalize(&large, None).unwrap();
        for side in [Side::A, Side::B] {
            let rs = determinacy_residual(&bs, &small, side, 0).unwrap().to_f64();
            let rl = determinacy_residual(&bl, &large, side, 0).unwrap().to_f64();
            prop_assert!(rl >= -1e-30 && rl <= rs + 1e-30);
        }
    }

    #[test]
    fn transforms_are_herglotz(re in -3.0f64..3.0, im in 0.05f64..5.0, fr in -1.0f64..1.0, fi in -1.0f64..1.0) {
        let z = c(re, im);
        prop_assume!((z - c(0.0, 1.0)).norm() > 1e-3);
        let seq = lognormal_moments(40, 256).unwrap();
        let section = NevanlinnaSection::build(&seq, 16, &SectionOptions::default()).unwrap();
        let f = c(fr, fi);
        let f = if f.norm() > 1.0 { f / f.norm() } else { f };
        let sample = section.transform(z, &SchurParameter::Scalar(f)).unwrap();
        prop_assert!(sample.herglotz_min >= -1e-8);
    }

    #[test]
    fn resolvent_inverts_a0(zr in -0.9f64..0.9, zi in -0.9f64..0.9) {
        let zeta = c(zr, zi);
        prop_assume!(zeta.norm() < 0.95);
        let seq = lognormal_moments(40, 256).unwrap();
        let model = embed(&seq, 12, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        let sm = structure_matrices(&basis, &model).unwrap();
        let r = resolvent_section(&sm, zeta).unwrap();
        let id = &sm.a0(zeta) * &r;
        let err = (id - CMatrix::identity(sm.tau(), sm.tau())).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        prop_assert!(err < 1e-10);
    }

    #[test]
    fn oracle_transforms_are_herglotz(seed in any::<u64>(), re in -3.0f64..3.0, im in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_atomic_measure(&mut rng, 2, 3);
        let s = direct_transform_atomic(&m, c(re, im)).unwrap();
        let imag = (&s - s.adjoint()) / c(0.0, 2.0);
        prop_assert!(jacobi_eigenvalues(&imag)[0] >= -1e-12);
    }
}
