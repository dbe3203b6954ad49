use super::*;
use super::kernel::axis_propagator_table;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn close(a: Complex<f64>, b: Complex<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn orthonormal_basis_at_equal_scale() {
    let h0 = TestFunction::<f64>::hermite(1, 1.0, &[0]).unwrap();
    let h1 = TestFunction::<f64>::hermite(1, 1.0, &[1]).unwrap();
    assert!(close(inner_product(&h0, &h0).unwrap(), c(1.0, 0.0), 1e-15));
    assert!(close(inner_product(&h0, &h1).unwrap(), c(0.0, 0.0), 1e-15));
}

#[test]
fn gram_matrix_by_quadrature_is_identity() {
    // Same scale routed through the Gauss–Hermite path by a negligible scale offset.
    let table = overlap_table(8, 8, 1.0, 1.0, 128);
    for (i, row) in table.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-12);
        }
    }
}

#[test]
fn mixed_scale_gaussian_overlap() {
    let f = TestFunction::<f64>::gaussian(1, 1.0).unwrap();
    let g = TestFunction::<f64>::gaussian(1, 2.0).unwrap();
    let exact = (2.0 * 1.0 * 2.0 / (1.0 + 4.0_f64)).sqrt();
    assert!((exact - 0.894427).abs() < 1e-6);
    let v = inner_product(&f, &g).unwrap();
    assert!(close(v, c(exact, 0.0), 1e-10), "{v}");
}

#[test]
fn mixed_scale_overlap_matches_position_grid() {
    // Independent oracle: brute-force trapezoid on a fine grid.
    let f = TestFunction::from_coeffs(1, 0.8, [(vec![3], c(0.5, 0.2)), (vec![1], c(-0.3, 0.0))]).unwrap();
    let g = TestFunction::from_coeffs(1, 1.7, [(vec![2], c(0.1, -0.7)), (vec![5], c(0.4, 0.0))]).unwrap();
    let h = 1e-3;
    let mut acc = c(0.0, 0.0);
    let mut x = -20.0;
    while x <= 20.0 {
        acc += f.evaluate(&[x]).unwrap().conj() * g.evaluate(&[x]).unwrap() * h;
        x += h;
    }
    assert!(close(inner_product(&f, &g).unwrap(), acc, 1e-10));
}

#[test]
fn zero_time_propagator_reproduces_overlaps() {
    let model = HamiltonianModel::<f64>::free(2).unwrap();
    let tab = axis_propagator_table(6, 7, 0.7, 1.9, c(0.0, 0.0), None);
    let quad = overlap_table(6, 7, 0.7, 1.9, 64);
    for m in 0..=6 {
        for l in 0..=7 {
            assert!((tab[m][l].re - quad[m][l]).abs() < 1e-12, "({m},{l})");
            assert!(tab[m][l].im.abs() < 1e-14);
        }
    }
    let f = TestFunction::<f64>::gaussian(2, 0.7).unwrap();
    let g = TestFunction::<f64>::hermite(2, 1.9, &[2, 0]).unwrap();
    let p = propagator(&model, 0.0, &f, &g, c(0.0, 0.0)).unwrap();
    assert!(close(p, inner_product(&f, &g).unwrap(), 1e-12));
}

#[test]
fn trap_propagator_is_diagonal_in_the_eigenbasis() {
    let model = HamiltonianModel::<f64>::harmonic_trap(2, 1.5).unwrap();
    let z = c(0.4, -2.3);
    for (i, j) in [([0, 0], [0, 0]), ([1, 2], [1, 2]), ([1, 2], [2, 1]), ([3, 0], [1, 0])] {
        let f = model.eigenfunction(&i).unwrap();
        let g = model.eigenfunction(&j).unwrap();
        let v = propagator(&model, 0.1, &f, &g, z).unwrap();
        let expect = if i == j {
            (-z * (model.eigenvalue(&i).unwrap() - 0.1)).exp()
        } else {
            c(0.0, 0.0)
        };
        assert!(close(v, expect, 1e-13), "{i:?} {j:?}: {v} vs {expect}");
    }
}

#[test]
fn trap_propagator_mixed_scale_matches_spectral_sum() {
    // Oracle: expand both functions in the trap eigenbasis and sum e^{-z ε_k}.
    let length = 1.3;
    let model = HamiltonianModel::<f64>::harmonic_trap(1, length).unwrap();
    let f = TestFunction::from_coeffs(1, 0.9, [(vec![0], c(0.6, 0.1)), (vec![3], c(0.2, -0.5))]).unwrap();
    let g = TestFunction::from_coeffs(1, 1.6, [(vec![1], c(0.3, 0.3)), (vec![2], c(-0.7, 0.0))]).unwrap();
    let of = overlap_table(120, 3, length, 0.9, 128);
    let og = overlap_table(120, 2, length, 1.6, 128);
    for z in [c(0.3, 0.0), c(0.0, 1.7), c(2.0, -0.4)] {
        let mut oracle = c(0.0, 0.0);
        for k in 0..=120 {
            let fk: Complex<f64> = f.coeffs().iter().map(|(i, v)| v * of[k][i[0]]).sum();
            let gk: Complex<f64> = g.coeffs().iter().map(|(i, v)| v * og[k][i[0]]).sum();
            let e = (2.0 * k as f64 + 1.0) / (length * length);
            oracle += fk.conj() * gk * (-z * e).exp();
        }
        let v = propagator(&model, 0.0, &f, &g, z).unwrap();
        assert!(close(v, oracle, 1e-11), "z={z}: {v} vs {oracle}");
    }
}

#[test]
fn free_propagator_matches_momentum_integral() {
    let model = HamiltonianModel::<f64>::free(1).unwrap();
    let f = TestFunction::from_coeffs(1, 0.8, [(vec![0], c(1.0, 0.0)), (vec![2], c(0.0, 0.4))]).unwrap();
    let g = TestFunction::from_coeffs(1, 1.2, [(vec![1], c(0.5, 0.0)), (vec![2], c(0.3, 0.0))]).unwrap();
    for z in [c(0.5, 0.0), c(0.0, -1.5), c(0.2, 0.8)] {
        let h = 2e-4;
        let mut oracle = c(0.0, 0.0);
        let mut p = -25.0;
        while p <= 25.0 {
            let a = f.evaluate_momentum(&[p]).unwrap().conj() * g.evaluate_momentum(&[p]).unwrap();
            oracle += a * (-z * p * p).exp() * h;
            p += h;
        }
        let v = propagator(&model, 0.0, &f, &g, z).unwrap();
        assert!(close(v, oracle, 1e-10), "z={z}: {v} vs {oracle}");
    }
}

#[test]
fn fourier_self_duality_of_hermite_functions() {
    // Oracle: direct quadrature of (2π)^{-1/2} ∫ h_k(x) e^{-ipx} dx.
    for k in 0..6 {
        let f = TestFunction::<f64>::hermite(1, 1.0, &[k]).unwrap();
        for &p in &[-2.0, -0.3, 0.0, 0.9, 2.5] {
            let h = 1e-3;
            let mut acc = c(0.0, 0.0);
            let mut x = -15.0;
            while x <= 15.0 {
                acc += f.evaluate(&[x]).unwrap() * Complex::from_polar(1.0, -p * x) * h;
                x += h;
            }
            acc /= (2.0 * std::f64::consts::PI).sqrt();
            let v = f.evaluate_momentum(&[p]).unwrap();
            assert!(close(v, acc, 1e-10), "k={k} p={p}: {v} vs {acc}");
            // (−i)^k h_k(p)
            let hk = crate::special::hermite_functions(k, p)[k];
            let expect = super::minus_i_pow::<f64>(k) * hk;
            assert!(close(v, expect, 1e-14));
        }
    }
}

#[test]
fn gauge_rotation_examples() {
    let f = TestFunction::from_coeffs(1, 1.0, [(vec![0], c(0.3, 0.4)), (vec![2], c(-0.1, 0.9))]).unwrap();
    assert_eq!(gauge_rotate(&f, 0.0), f);
    let twice = gauge_rotate(&gauge_rotate(&f, std::f64::consts::PI), std::f64::consts::PI);
    for (k, v) in f.coeffs() {
        assert!(close(twice.coeff(k), *v, 1e-15));
    }
    assert!((gauge_rotate(&f, 1.3).norm_sqr() - f.norm_sqr()).abs() < 1e-15);
}

#[test]
fn partition_function_examples() {
    let m1 = HamiltonianModel::<f64>::harmonic_trap(1, 1.0).unwrap();
    let z1 = partition_function(&m1, 1.0).unwrap();
    // Geometric series Σ e^{-(2n+1)} = e^{-1}/(1 − e^{-2}).
    let oracle = (-1.0f64).exp() / (1.0 - (-2.0f64).exp());
    assert!((z1 - oracle).abs() < 1e-15);
    assert!((z1 - 0.425460).abs() < 1e-6);
    let m2 = HamiltonianModel::<f64>::harmonic_trap(2, 1.0).unwrap();
    assert!((partition_function(&m2, 1.0).unwrap() - oracle * oracle).abs() < 1e-15);
    for model in [m1, m2] {
        let t = partition_function_truncated(&model, 1.0, 200).unwrap();
        assert!((t - partition_function(&model, 1.0).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn partition_function_overflow_is_reported() {
    let m = HamiltonianModel::<f64>::harmonic_trap(3, 1e6).unwrap();
    assert!(matches!(partition_function(&m, 1e-300), Err(Error::DivergentScale(_))));
    let m32 = HamiltonianModel::<f32>::harmonic_trap(3, 1e3).unwrap();
    assert!(matches!(partition_function(&m32, 1e-30), Err(Error::DivergentScale(_))));
}

#[test]
fn eigenvalue_scaling_covariance() {
    let m1 = HamiltonianModel::<f64>::harmonic_trap(3, 1.0).unwrap();
    let ml = HamiltonianModel::<f64>::harmonic_trap(3, 2.0).unwrap();
    for idx in [[0, 0, 0], [1, 0, 2], [4, 4, 1]] {
        assert_eq!(ml.eigenvalue(&idx).unwrap(), m1.eigenvalue(&idx).unwrap() / 4.0);
    }
    assert_eq!(m1.ground_energy(), 3.0);
    assert_eq!(m1.eigenvalue(&[0, 0, 0]).unwrap(), m1.ground_energy());
}

#[test]
fn ground_projection_examples() {
    let model = HamiltonianModel::<f64>::harmonic_trap(1, 2.0).unwrap();
    let e1 = model.ground_state().unwrap();
    assert!(project_out_ground(&model, &e1).unwrap().is_zero());
    let perp = model.eigenfunction(&[3]).unwrap();
    assert_eq!(project_out_ground(&model, &perp).unwrap(), perp);
    let mixed = TestFunction::from_coeffs(1, 1.3, [(vec![0], c(0.7, 0.2)), (vec![2], c(0.1, 0.5))]).unwrap();
    let p = project_out_ground(&model, &mixed).unwrap();
    assert!(inner_product(&e1, &p).unwrap().norm() < 1e-12);
    assert_eq!(
        domain_classify(&model, LimitKind::TrapGround, &p).unwrap().status,
        DomainStatus::Regular
    );
}

#[test]
fn domain_classification_examples() {
    let free1 = HamiltonianModel::<f64>::free(1).unwrap();
    let free2 = HamiltonianModel::<f64>::free(2).unwrap();
    let free3 = HamiltonianModel::<f64>::free(3).unwrap();
    let g1 = TestFunction::gaussian(1, 1.0).unwrap();
    let odd1 = TestFunction::hermite(1, 1.0, &[1]).unwrap();
    let g2 = TestFunction::gaussian(2, 1.0).unwrap();
    let odd2 = TestFunction::hermite(2, 1.0, &[1, 0]).unwrap();
    let g3 = TestFunction::gaussian(3, 1.0).unwrap();
    let cases = [
        (free1, g1, DomainStatus::Divergent),
        (free1, odd1, DomainStatus::Regular),
        (free2, g2, DomainStatus::Divergent),
        (free2, odd2, DomainStatus::Regular),
        (free3, g3.clone(), DomainStatus::Regular),
    ];
    for (model, f, expect) in cases {
        let v = domain_classify(&model, LimitKind::FreeZeroMode, &f).unwrap();
        assert_eq!(v.status, expect, "s={} f={:?}: {}", model.dim(), f.coeffs(), v.diagnostic);
    }
    // s = 3 Gaussian: ∫|f̃|²/p² dp = 2 ∫_0^∞ e^{-r²} dr · 4π / π^{3/2} = 4/√π·... closed form.
    let v = domain_classify(&free3, LimitKind::FreeZeroMode, &g3).unwrap();
    let exact = 2.0; // (4π π^{-3/2}) ∫ e^{-r²} dr = 4π π^{-3/2} √π/2 = 2
    assert!((v.diagnostic - exact).abs() < 1e-8, "{}", v.diagnostic);

    let trap = HamiltonianModel::<f64>::harmonic_trap(1, 1.0).unwrap();
    let e1 = trap.ground_state().unwrap();
    let e2 = trap.eigenfunction(&[1]).unwrap();
    assert_eq!(domain_classify(&trap, LimitKind::TrapGround, &e1).unwrap().status, DomainStatus::Divergent);
    assert_eq!(domain_classify(&trap, LimitKind::TrapGround, &e2).unwrap().status, DomainStatus::Regular);
    assert!(matches!(
        domain_classify(&trap, LimitKind::TrapGround, &TestFunction::zero(1, 1.0).unwrap()),
        Err(Error::ZeroFunction)
    ));
    assert!(domain_classify(&trap, LimitKind::FreeZeroMode, &e1).is_err());
}

#[test]
fn scale_reexpansion_preserves_the_function() {
    let f = TestFunction::from_coeffs(2, 0.8, [(vec![0, 1], c(0.6, 0.0)), (vec![2, 0], c(0.0, 0.8))]).unwrap();
    let g = expand_in_scale(&f, 1.1).unwrap();
    assert!((g.norm_sqr() - f.norm_sqr()).abs() < 1e-12);
    for x in [[0.3, -0.2], [1.0, 0.7]] {
        assert!(close(g.evaluate(&x).unwrap(), f.evaluate(&x).unwrap(), 1e-10));
    }
}

#[test]
fn single_precision_instantiation() {
    let f = TestFunction::<f32>::gaussian(1, 1.0).unwrap();
    let g = TestFunction::<f32>::gaussian(1, 2.0).unwrap();
    let v = inner_product(&f, &g).unwrap();
    assert!((v.re - 0.894_427).abs() < 1e-5);
}

fn arb_function(dim: usize, scale: f64) -> impl Strategy<Value = TestFunction<f64>> {
    prop::collection::vec(
        (prop::collection::vec(0usize..4, dim), -1.0f64..1.0, -1.0f64..1.0),
        1..5,
    )
    .prop_map(move |entries| {
        TestFunction::from_coeffs(dim, scale, entries.into_iter().map(|(k, a, b)| (k, c(a, b)))).unwrap()
    })
}

proptest! {
    #[test]
    fn prop_gauge_rotation_preserves_inner_products(f in arb_function(2, 1.0), g in arb_function(2, 1.4), u in -7.0f64..7.0) {
        let a = inner_product(&f, &g).unwrap();
        let b = inner_product(&gauge_rotate(&f, u), &gauge_rotate(&g, u)).unwrap();
        prop_assert!(close(a, b, 1e-12));
        prop_assert!((gauge_rotate(&f, u).norm_sqr() - f.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn prop_inner_product_is_hermitian(f in arb_function(1, 0.7), g in arb_function(1, 1.5)) {
        let a = inner_product(&f, &g).unwrap();
        let b = inner_product(&g, &f).unwrap();
        prop_assert!(close(a, b.conj(), 1e-12));
    }

    #[test]
    fn prop_ground_classification_matches_projection(f in arb_function(1, 1.0)) {
        let model = HamiltonianModel::harmonic_trap(1, 1.0).unwrap();
        prop_assume!(!f.is_zero());
        let verdict = domain_classify(&model, LimitKind::TrapGround, &f).unwrap();
        let p = project_out_ground(&model, &f).unwrap();
        let unchanged = p.try_add(&f.negated()).unwrap().norm() <= GROUND_OVERLAP_TOL;
        prop_assert_eq!(verdict.status == DomainStatus::Regular, unchanged);
    }

    #[test]
    fn prop_propagator_is_contractive(f in arb_function(1, 0.9), g in arb_function(1, 1.3), tau in 0.0f64..3.0, t in -5.0f64..5.0) {
        let model = HamiltonianModel::harmonic_trap(1, 1.2).unwrap();
        let v = propagator(&model, model.ground_energy(), &f, &g, c(tau, t)).unwrap();
        prop_assert!(v.norm() <= f.norm() * g.norm() * (1.0 + 1e-10));
    }
}
