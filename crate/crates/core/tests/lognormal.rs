use hamburger::oracle::{self, direct_transform_density, lognormal_moments, lognormal_pair};
use hamburger::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn seq() -> MomentSequence {
    lognormal_moments(140, 256).unwrap()
}

#[test]
fn defects_and_shapes_at_thirty_two() {
    let s = seq();
    let model = embed(&s, 32, &EmbedOptions::default()).unwrap();
    let basis = orthogonalize(&model, None).unwrap();
    assert_eq!((basis.delta(), basis.omega(), basis.rho()), (1, 1, 1));
    assert_eq!(basis.tau() + basis.delta(), model.rank());
    let sm = structure_matrices(&basis, &model).unwrap();
    assert_eq!(sm.vv.shape(), (model.rank() - 1, model.rank() - 1));
    assert_eq!(sm.w.shape(), (sm.tau(), 1));
    assert_eq!(sm.t.shape(), (1, 1));
    assert_eq!(sm.k.shape(), (1, 1));
    let norm = sm.vv.clone().svd(false, false).singular_values.max();
    assert!(norm <= 1.0 + 1e-12);
    let co = coefficients(&sm, &s, c(0.0, 2.0)).unwrap();
    assert!((co.zeta - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    for m in [&co.a, &co.b, &co.c, &co.d] {
        assert_eq!(m.shape(), (1, 1));
    }
}

#[test]
fn residuals_stabilize_and_match_coordinate_route() {
    let s = seq();
    let mut prev = f64::INFINITY;
    let mut values = Vec::new();
    for m in [16, 32, 64] {
        let model = embed(&s, m, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        for side in [Side::A, Side::B] {
            let r = determinacy_residual(&basis, &model, side, 0).unwrap().to_f64();
            let p = cayley::projection_residual(&basis, &model, side, 0).unwrap().to_f64();
            assert!((r - p).abs() < 1e-12, "{r} vs {p}");
        }
        let r = determinacy_residual(&basis, &model, Side::A, 0).unwrap().to_f64();
        assert!(r > 0.0 && r <= prev + 1e-12);
        prev = r;
        values.push(r);
    }
    assert!(((values[2] - values[1]) / values[1]).abs() < 0.01);
}

#[test]
fn direct_solutions_lie_inside_the_parametrization() {
    // Each lognormal_pair density is a solution, so inverting the fractional
    // map at its transform must give a contraction. Distinct densities give
    // distinct parameters.
    let s = seq();
    let section = NevanlinnaSection::build(&s, 32, &SectionOptions::default()).unwrap();
    let mut separation = 0.0f64;
    for z in [c(0.0, 2.0), c(1.0, 1.0), c(-1.0, 0.5), c(3.0, 0.2)] {
        let co = section.coefficients(z).unwrap();
        let w = (z * z + 1.0) * (z * z + 1.0);
        let mut params = Vec::new();
        for eps in [0.0, 0.5, 1.0] {
            let (_, density) = lognormal_pair(eps).unwrap();
            let direct = direct_transform_density(&density, z, 1e-12).unwrap()[(0, 0)];
            let num = direct * w - co.a[(0, 0)];
            let f = num / (co.b[(0, 0)] * co.d[(0, 0)] - num * co.c[(0, 0)]);
            assert!(f.norm() < 1.0, "z={z} eps={eps} |F|={}", f.norm());
            let back = evaluate_transform(&co, &SchurParameter::Constant(CMatrix::from_element(1, 1, f))).unwrap();
            assert!((back.s[(0, 0)] - direct).norm() < 1e-10);
            params.push(f);
        }
        separation = separation.max((params[0] - params[2]).norm());
    }
    assert!(separation > 1e-4);
}

#[test]
fn coefficients_settle_across_doublings() {
    let s = seq();
    let z = c(0.5, 1.5);
    let a32 = NevanlinnaSection::build(&s, 32, &SectionOptions::default()).unwrap().coefficients(z).unwrap();
    let a64 = NevanlinnaSection::build(&s, 64, &SectionOptions::default()).unwrap().coefficients(z).unwrap();
    assert!((a32.a[(0, 0)] - a64.a[(0, 0)]).norm() < 1e-6);
}

#[test]
fn converges_on_the_standard_grid() {
    let s = seq();
    let grid = [c(0.0, 2.0), c(1.0, 1.0), c(-1.0, 2.0)];
    let out = convergence_driver(&s, &grid, &SchurParameter::Zero, &ConvergencePolicy::default()).unwrap();
    assert!(out.section_size() <= 128);
    assert!(out.achieved_gap().unwrap() <= 1e-6);
    assert!(herglotz_scan(&out.samples, 1e-8).pass);

    let first = ConvergencePolicy {
        tol: f64::INFINITY,
        ..ConvergencePolicy::default()
    };
    let out = convergence_driver(&s, &grid, &SchurParameter::Zero, &first).unwrap();
    assert_eq!(out.section_size(), 16);
    assert!(out.gaps.is_empty());

    let tight = ConvergencePolicy {
        tol: 1e-300,
        max_section: Some(32),
        ..ConvergencePolicy::default()
    };
    match convergence_driver(&s, &grid, &SchurParameter::Zero, &tight) {
        Err(Error::NoConvergence { gaps }) => assert_eq!(gaps.len(), 1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn grid_scan_matches_sequential_evaluation() {
    let s = seq();
    let section = NevanlinnaSection::build(&s, 32, &SectionOptions::default()).unwrap();
    let grid: Vec<Complex64> = (0..16).map(|k| c(-2.0 + 0.25 * k as f64, 0.5 + 0.1 * k as f64)).collect();
    let f = SchurParameter::Mobius { a: c(0.3, -0.2), scale: c(0.0, 1.0) };
    let parallel = section.transform_grid(&grid, &f).unwrap();
    for (z, p) in grid.iter().zip(&parallel) {
        let seq = section.transform(*z, &f).unwrap();
        assert_eq!(seq.s, p.s);
    }
}

#[test]
fn corrupted_coefficients_fail_the_herglotz_scan() {
    let s = seq();
    let section = NevanlinnaSection::build(&s, 16, &SectionOptions::default()).unwrap();
    let mut co = section.coefficients(c(0.0, 2.0)).unwrap();
    co.a = -co.a;
    let sample = evaluate_transform(&co, &SchurParameter::Zero).unwrap();
    assert!(!herglotz_scan(&[sample], 1e-8).pass);
}

#[test]
fn recovered_density_carries_the_mass() {
    let s = seq();
    let section = NevanlinnaSection::build(&s, 32, &SectionOptions::default()).unwrap();
    let inv = stieltjes_invert(
        |z| section.transform(z, &SchurParameter::Zero).map(|t| t.s),
        -10.0,
        40.0,
        Some(5e-3),
        Some(1e-2),
    )
    .unwrap();
    assert!(inv.monotone);
    assert!((inv.cumulative.last().unwrap()[(0, 0)].re - 1.0).abs() < 0.05);
    // The central solution is a Hamburger solution, not the lognormal one:
    // part of its mass sits on the negative axis.
    assert!(inv.cumulative_at(0.0)[(0, 0)].re > 0.1);
}

#[test]
fn verdict_is_indeterminate() {
    let v = classify_determinacy(
        &seq(),
        &DeterminacyPolicy {
            max_section: Some(64),
            ..DeterminacyPolicy::default()
        },
    )
    .unwrap();
    assert_eq!(v.verdict, Verdict::Indeterminate);
    assert_eq!(v.residual_history.len(), 3);
    assert!(v.side_a_residuals[0] > v.thresholds[0]);
    assert_eq!(oracle::carleman_hint(&seq()), oracle::CarlemanHint::NoInformation);
}
