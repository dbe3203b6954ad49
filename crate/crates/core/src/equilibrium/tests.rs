use super::*;
use proptest::prelude::*;
use std::f64::consts::{LN_2, PI};

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn close(a: Complex<f64>, b: Complex<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol
}

fn trap(dim: usize, length: f64) -> HamiltonianModel<f64> {
    HamiltonianModel::harmonic_trap(dim, length).unwrap()
}

fn free(dim: usize) -> HamiltonianModel<f64> {
    HamiltonianModel::free(dim).unwrap()
}

fn gaussian(dim: usize, scale: f64) -> TestFunction<f64> {
    TestFunction::gaussian(dim, scale).unwrap()
}

fn thermal(beta: f64, mu: f64, model: HamiltonianModel<f64>) -> ThermalParams<f64> {
    ThermalParams::new(beta, mu, model).unwrap()
}

/// Plain three-term recurrence for `h_0 … h_n`, kept separate from the library.
fn hermite_table(n: usize, y: f64) -> Vec<f64> {
    let mut h = vec![PI.powf(-0.25) * (-y * y / 2.0).exp()];
    if n > 0 {
        h.push(2f64.sqrt() * y * h[0]);
    }
    for k in 1..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * y * h[k] - (k as f64 / (k as f64 + 1.0)).sqrt() * h[k - 1];
        h.push(next);
    }
    h
}

/// Coefficients of a one-dimensional function in the trap eigenbasis by
/// trapezoid quadrature on a position grid.
fn eigen_coefficients(f: &TestFunction<f64>, length: f64, levels: usize) -> Vec<Complex<f64>> {
    let span = 14.0 * length.max(f.scale());
    let n = 6001;
    let dx = 2.0 * span / (n - 1) as f64;
    let mut out = vec![c(0.0, 0.0); levels];
    for i in 0..n {
        let x = -span + dx * i as f64;
        let fx = f.evaluate(&[x]).unwrap();
        let h = hermite_table(levels - 1, x / length);
        for (k, hk) in h.iter().enumerate() {
            out[k] += fx * (hk / length.sqrt() * dx);
        }
    }
    out
}

/// `½Σ_k [(1+n_k)e^{itη_k} conj(a_k) b_k + n_k e^{−itη_k} conj(b_k) a_k]` over 1D trap levels.
fn trap_oracle(beta: f64, mu: f64, length: f64, f: &TestFunction<f64>, g: &TestFunction<f64>, t: f64) -> Complex<f64> {
    let levels = 90;
    let a = eigen_coefficients(f, length, levels);
    let b = eigen_coefficients(g, length, levels);
    let mut acc = c(0.0, 0.0);
    for k in 0..levels {
        let eta = (2 * k + 1) as f64 / (length * length) - mu;
        let n = 1.0 / (beta * eta).exp_m1();
        acc += a[k].conj() * b[k] * Complex::from_polar(1.0 + n, t * eta)
            + b[k].conj() * a[k] * Complex::from_polar(n, -t * eta);
    }
    acc * 0.5
}

/// Momentum-space trapezoid for the 1D free form of scaled Hermite functions.
fn free_oracle(beta: f64, mu: f64, f: (usize, f64), g: (usize, f64), t: f64) -> Complex<f64> {
    let ft = |k: usize, s: f64, p: f64| {
        Complex::new(0.0, -1.0).powi(k as i32) * (s.sqrt() * hermite_table(k, s * p)[k])
    };
    let span = 14.0 / f.1.min(g.1);
    // Even count: p = 0 is never a node, so μ = 0 is admissible for f̃(0) = 0.
    let n = 40000;
    let dp = 2.0 * span / (n - 1) as f64;
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        let p = -span + dp * i as f64;
        let eta = p * p - mu;
        let occ = 1.0 / (beta * eta).exp_m1();
        let a = ft(f.0, f.1, p);
        let b = ft(g.0, g.1, p);
        acc += (a.conj() * b * Complex::from_polar(1.0 + occ, t * eta)
            + b.conj() * a * Complex::from_polar(occ, -t * eta))
            * dp;
    }
    acc * 0.5
}

#[test]
fn eigenmode_coth_value() {
    // β(ε − μ) = ln 2 gives ½ (e^x + 1)/(e^x − 1) = 3/2.
    let model = trap(1, 1.0);
    let e = model.ground_state().unwrap();
    let p = thermal(1.0, 1.0 - LN_2, model);
    for route in [Evaluation::Auto, Evaluation::Spectral, Evaluation::Series] {
        let v = thermal_two_point_with(&p, &e, &e, 0.0, route).unwrap();
        assert!(close(v, c(1.5, 0.0), 1e-12), "{route:?}: {v}");
    }
}

#[test]
fn eigenmode_time_dependence() {
    // x = ln 2, tη = π/2: ½(2i − i) = i/2.
    let model = trap(1, 1.0);
    let e = model.ground_state().unwrap();
    let p = thermal(1.0, 1.0 - LN_2, model);
    let t = PI / 2.0 / LN_2;
    for route in [Evaluation::Spectral, Evaluation::Series] {
        let v = thermal_two_point_with(&p, &e, &e, t, route).unwrap();
        assert!(close(v, c(0.0, 0.5), 1e-12), "{route:?}: {v}");
    }
}

#[test]
fn low_temperature_reduces_to_vacuum() {
    let f = gaussian(1, 1.0);
    let g = TestFunction::from_coeffs(1, 1.0, [(vec![0], c(0.3, 0.1)), (vec![2], c(-0.2, 0.5))]).unwrap();
    let p = thermal(50.0, -0.5, free(1));
    let v = thermal_two_point(&p, &f, &g, 0.0).unwrap();
    let vac = inner_product(&f, &g).unwrap() * 0.5;
    assert!(close(v, vac, 1e-8), "{v} vs {vac}");
}

#[test]
fn trap_routes_match_position_grid_oracle() {
    let f = TestFunction::from_coeffs(1, 0.8, [(vec![0], c(0.6, 0.2)), (vec![1], c(0.1, -0.4)), (vec![3], c(0.2, 0.0))]).unwrap();
    let g = TestFunction::from_coeffs(1, 1.3, [(vec![0], c(0.5, 0.0)), (vec![2], c(0.0, 0.3))]).unwrap();
    for &(beta, mu, length, t) in &[(1.0, 0.2, 1.0, 0.0), (0.7, -0.5, 1.5, 0.9), (2.0, 0.3, 1.2, -2.5)] {
        let p = thermal(beta, mu, trap(1, length));
        let oracle = trap_oracle(beta, mu, length, &f, &g, t);
        let series = thermal_two_point_with(&p, &f, &g, t, Evaluation::Series).unwrap();
        let spectral = thermal_two_point_with(&p, &f, &g, t, Evaluation::Spectral).unwrap();
        assert!(close(series, oracle, 1e-9), "series {series} vs {oracle}");
        assert!(close(spectral, oracle, 1e-9), "spectral {spectral} vs {oracle}");
    }
}

#[test]
fn free_routes_match_momentum_grid_oracle() {
    let f = TestFunction::hermite(1, 1.0, &[0]).unwrap();
    let g = TestFunction::hermite(1, 1.6, &[2]).unwrap();
    for &(beta, mu, t) in &[(1.0, -1.0, 0.0), (0.5, -0.2, 0.7), (3.0, -0.05, -1.3)] {
        let p = thermal(beta, mu, free(1));
        let oracle = free_oracle(beta, mu, (0, 1.0), (2, 1.6), t);
        let series = thermal_two_point_with(&p, &f, &g, t, Evaluation::Series).unwrap();
        let quad = thermal_two_point_with(&p, &f, &g, t, Evaluation::Quadrature).unwrap();
        assert!(close(series, oracle, 1e-9), "series {series} vs {oracle}");
        assert!(close(quad, oracle, 1e-9), "quadrature {quad} vs {oracle}");
    }
}

#[test]
fn free_routes_agree_in_three_dimensions() {
    let f = gaussian(3, 1.0);
    let g = TestFunction::from_coeffs(3, 0.9, [(vec![0, 0, 0], c(0.4, 0.0)), (vec![2, 0, 0], c(0.0, 0.3)), (vec![1, 1, 0], c(0.2, 0.1))]).unwrap();
    let p = thermal(1.0, -0.5, free(3));
    for t in [0.0, 0.5, 3.0] {
        let a = thermal_two_point_with(&p, &f, &g, t, Evaluation::Series).unwrap();
        let b = thermal_two_point_with(&p, &f, &g, t, Evaluation::Quadrature).unwrap();
        assert!(close(a, b, 1e-10), "t={t}: {a} vs {b}");
    }
}

#[test]
fn parameter_validation() {
    assert!(ThermalParams::new(1.0, 1.0, trap(1, 1.0)).is_err());
    assert!(ThermalParams::new(1.0, 0.0, free(1)).is_err());
    assert!(ThermalParams::new(0.0, -1.0, free(1)).is_err());
    assert!(ThermalParams::new(1.0, 0.99, trap(1, 1.0)).is_ok());
    assert!(LimitParams::new(1.0, free(1), LimitKind::TrapGround).is_err());
    assert!(LimitParams::new(1.0, trap(1, 1.0), LimitKind::FreeZeroMode).is_err());
}

#[test]
fn thermodynamic_limit_scan_example() {
    let f = gaussian(1, 1.0);
    let lengths = [2.0, 4.0, 8.0, 16.0, 32.0];
    let report = thermodynamic_limit_scan(1.0, -1.0, &f, &f, 0.0, &lengths, 1e-3).unwrap();
    assert_eq!(report.verdict, Verdict::Converged);
    let dev: Vec<f64> = report.entries.iter().map(|e| e.1).collect();
    assert!(dev[4] < dev[2] && dev[2] < dev[0], "{dev:?}");
    assert!(dev[4] < 1e-3);

    let single = thermodynamic_limit_scan(1.0, -1.0, &f, &f, 0.0, &[8.0], 1e-3).unwrap();
    assert_eq!(single.verdict, Verdict::NotConverged);
    assert!(thermodynamic_limit_scan(1.0, 0.0, &f, &f, 0.0, &lengths, 1e-3).is_err());
}

#[test]
fn trap_values_approach_free_value_monotonically() {
    // The potential x²/L⁴ weakens with L, so the t = 0 diagonal form grows
    // toward the free value.
    let f = gaussian(1, 1.0);
    let free_value = thermal_two_point(&thermal(1.0, -1.0, free(1)), &f, &f, 0.0).unwrap();
    assert!(free_value.im.abs() < 1e-14);
    assert!(free_value.re >= f.norm_sqr() / 2.0);
    let mut last = 0.0;
    for length in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        let v = thermal_two_point(&thermal(1.0, -1.0, trap(1, length)), &f, &f, 0.0).unwrap();
        assert!(v.im.abs() < 1e-14);
        assert!(v.re >= last - 1e-12, "L={length}: {} < {last}", v.re);
        assert!(v.re <= free_value.re + 1e-12);
        last = v.re;
    }
}

#[test]
fn diagonal_form_increases_with_mu() {
    let f = TestFunction::from_coeffs(1, 1.0, [(vec![0], c(0.5, 0.0)), (vec![2], c(0.3, 0.4))]).unwrap();
    let mut last = 0.0;
    for mu in [-2.0, -1.0, 0.0, 0.5, 0.9, 0.99] {
        let v = thermal_two_point(&thermal(1.0, mu, trap(1, 1.0)), &f, &f, 0.0).unwrap().re;
        assert!(v > last, "mu={mu}");
        last = v;
    }
    let mut last = 0.0;
    for mu in [-2.0, -1.0, -0.3, -0.1] {
        let v = thermal_two_point(&thermal(1.0, mu, free(3)), &gaussian(3, 1.0), &gaussian(3, 1.0), 0.0).unwrap().re;
        assert!(v > last, "mu={mu}");
        last = v;
    }
}

#[test]
fn limit_form_examples() {
    let model = trap(1, 1.0);
    // β(ε₂ − ε₁) = ln 2 with ε₂ − ε₁ = 2.
    let params = LimitParams::new(LN_2 / 2.0, model, LimitKind::TrapGround).unwrap();
    let e1 = model.ground_state().unwrap();
    let e2 = model.eigenfunction(&[1]).unwrap();
    assert_eq!(limit_form(&params, &e1, &e2, 0.0).unwrap(), LimitValue::Annihilated);
    for route in [Evaluation::Spectral, Evaluation::Series] {
        let v = limit_form_with(&params, &e2, &e2, 0.0, route).unwrap().value().unwrap();
        assert!(close(v, c(1.5, 0.0), 1e-12), "{route:?}: {v}");
    }

    let f = gaussian(3, 1.0);
    let limit = LimitParams::new(1.0, free(3), LimitKind::FreeZeroMode).unwrap();
    let at_zero = limit_form(&limit, &f, &f, 0.0).unwrap().value().unwrap();
    let below = thermal_two_point(&thermal(1.0, -0.1, free(3)), &f, &f, 0.0).unwrap();
    assert!(at_zero.re.is_finite() && at_zero.re > below.re, "{at_zero} vs {below}");
    // Continuity at the boundary; the approach is like √|μ|.
    let near = thermal_two_point(&thermal(1.0, -1e-10, free(3)), &f, &f, 0.0).unwrap();
    assert!((near.re - at_zero.re).abs() < 1e-4, "{near} vs {at_zero}");

    let s1 = LimitParams::new(1.0, free(1), LimitKind::FreeZeroMode).unwrap();
    assert_eq!(limit_form(&s1, &gaussian(1, 1.0), &gaussian(1, 1.0), 0.0).unwrap(), LimitValue::Annihilated);
    let odd = TestFunction::hermite(1, 1.0, &[1]).unwrap();
    let v = limit_form(&s1, &odd, &odd, 0.0).unwrap().value().unwrap();
    let oracle = free_oracle(1.0, 0.0, (1, 1.0), (1, 1.0), 0.0);
    assert!(close(v, oracle, 1e-6), "{v} vs {oracle}");
}

#[test]
fn trap_limit_matches_interior_extrapolation() {
    let model = trap(1, 1.0);
    let f = TestFunction::from_coeffs(1, 1.0, [(vec![1], c(0.5, 0.1)), (vec![2], c(0.2, 0.0))]).unwrap();
    let params = LimitParams::new(1.0, model, LimitKind::TrapGround).unwrap();
    let limit = limit_form(&params, &f, &f, 0.3).unwrap().value().unwrap();
    let near = thermal_two_point(&thermal(1.0, 1.0 - 1e-9, model), &f, &f, 0.3).unwrap();
    assert!(close(limit, near, 1e-8), "{limit} vs {near}");
}

#[test]
fn kms_hand_value_and_eigenmode_deviation() {
    let model = trap(1, 1.0);
    let e = model.ground_state().unwrap();
    let state = Equilibrium::Thermal(thermal(1.0, 1.0 - LN_2, model));
    let t = PI / 2.0 / LN_2;
    let lhs = kms_boundary_value(&state, &e, &e, t).unwrap();
    assert!(close(lhs, c(0.0, -0.5), 1e-14), "{lhs}");
    let rhs = thermal_two_point_with(&thermal(1.0, 1.0 - LN_2, model), &e, &e, -t, Evaluation::Series).unwrap();
    assert!(close(rhs, c(0.0, -0.5), 1e-12), "{rhs}");

    let grid = [0.0, 0.5, 1.0, t];
    for idx in [[0usize], [1], [3]] {
        let f = model.eigenfunction(&idx).unwrap();
        for g_idx in [[0usize], [1], [2]] {
            let g = model.eigenfunction(&g_idx).unwrap();
            assert!(kms_check(&state, &f, &g, &grid).unwrap() < 1e-12);
        }
    }
}

#[test]
fn kms_for_free_and_limit_states() {
    let f = gaussian(3, 1.0);
    let state = Equilibrium::Thermal(thermal(1.0, -0.5, free(3)));
    assert!(kms_check(&state, &f, &f, &[0.0, 0.5, 1.0]).unwrap() < 1e-8);

    let g = TestFunction::from_coeffs(3, 1.2, [(vec![0, 0, 0], c(0.3, 0.2)), (vec![0, 2, 0], c(0.5, 0.0))]).unwrap();
    assert!(kms_check(&state, &f, &g, &[0.0, 0.5, 1.0]).unwrap() < 1e-8);

    let cold = Equilibrium::Thermal(thermal(50.0, -0.5, free(3)));
    assert!(kms_check(&cold, &f, &f, &[0.0, 0.5, 1.0]).unwrap() < 1e-6);

    let limit = Equilibrium::Limit(LimitParams::new(1.0, free(3), LimitKind::FreeZeroMode).unwrap());
    assert!(kms_check(&limit, &f, &f, &[0.0, 0.5, 1.0]).unwrap() < 1e-8);

    let model = trap(2, 1.3);
    let trap_limit = Equilibrium::Limit(LimitParams::new(0.8, model, LimitKind::TrapGround).unwrap());
    let h = TestFunction::from_coeffs(2, 1.3, [(vec![1, 0], c(0.5, 0.0)), (vec![1, 2], c(0.1, 0.4))]).unwrap();
    assert!(kms_check(&trap_limit, &h, &h, &[0.0, 0.5, 1.0]).unwrap() < 1e-10);
    assert_eq!(
        kms_check(&trap_limit, &model.ground_state().unwrap(), &h, &[0.0]),
        Err(Error::Divergent)
    );
}

#[test]
fn kms_detects_a_wrong_boundary() {
    // Swapping the Bose weights breaks the identity away from t = 0.
    let f = gaussian(1, 1.0);
    let p = thermal(1.0, -0.5, free(1));
    let state = Equilibrium::Thermal(p);
    let lhs = kms_boundary_value(&state, &f, &f, 0.7).unwrap();
    let wrong = thermal_two_point(&p, &f, &f, 0.7).unwrap();
    assert!((lhs - wrong).norm() > 1e-2);
}

#[test]
fn clustering_decays_for_free_gas_and_flags_trap() {
    let f = gaussian(3, 1.0);
    let state = Equilibrium::Thermal(thermal(1.0, -0.5, free(3)));
    let report = clustering_check(&state, &f, &f, &[0.0, 5.0, 20.0, 80.0], 1e-3).unwrap();
    assert!(report.strictly_decreasing(), "{:?}", report.two_point);
    assert!(!report.periodic);
    let t0 = thermal_two_point(&thermal(1.0, -0.5, free(3)), &f, &f, 0.0).unwrap();
    assert!(close(report.two_point[0].1, t0, 1e-14));
    let gaps: Vec<f64> = report.factorization_gap.iter().map(|g| g.1).collect();
    assert!(gaps[3] < gaps[0], "{gaps:?}");

    let trapped = Equilibrium::Thermal(thermal(1.0, 0.5, trap(1, 1.0)));
    let g = gaussian(1, 1.0);
    let report = clustering_check(&trapped, &g, &g, &[0.0, PI], 1e-3).unwrap();
    assert!(report.periodic);
    assert_eq!(report.verdict, Verdict::NotConverged);
}

#[test]
fn single_precision_thermal_form() {
    let model = HamiltonianModel::<f32>::harmonic_trap(1, 1.0).unwrap();
    let e = model.ground_state().unwrap();
    let p = ThermalParams::new(1.0f32, 1.0 - std::f32::consts::LN_2, model).unwrap();
    let v = thermal_two_point(&p, &e, &e, 0.0).unwrap();
    assert!((v.re - 1.5).abs() < 1e-5);
}

fn arb_function(dim: usize, scale: f64) -> impl Strategy<Value = TestFunction<f64>> {
    prop::collection::vec(
        (prop::collection::vec(0usize..4, dim), -1.0f64..1.0, -1.0f64..1.0),
        1..4,
    )
    .prop_map(move |entries| {
        TestFunction::from_coeffs(dim, scale, entries.into_iter().map(|(k, a, b)| (k, c(a, b)))).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prop_trap_form_is_hermitian_and_symplectic(f in arb_function(2, 1.0), g in arb_function(2, 0.8), beta in 0.3f64..3.0, mu in -2.0f64..1.9) {
        let p = thermal(beta, mu, trap(2, 1.0));
        let a = thermal_two_point(&p, &f, &g, 0.0).unwrap();
        let b = thermal_two_point(&p, &g, &f, 0.0).unwrap();
        prop_assert!(close(a, b.conj(), 1e-10));
        let sym = inner_product(&f, &g).unwrap().im / 2.0;
        prop_assert!((a.im - sym).abs() < 1e-10);
        let ff = thermal_two_point(&p, &f, &f, 0.0).unwrap().re;
        let gg = thermal_two_point(&p, &g, &g, 0.0).unwrap().re;
        prop_assert!(sym * sym <= ff * gg + 1e-12);
    }

    #[test]
    fn prop_forms_are_gauge_invariant(f in arb_function(1, 1.0), g in arb_function(1, 1.0), u in -4.0f64..4.0, t in -3.0f64..3.0) {
        let p = thermal(1.0, -0.4, free(1));
        let a = thermal_two_point(&p, &f, &g, t).unwrap();
        let b = thermal_two_point(&p, &crate::single_particle::gauge_rotate(&f, u), &crate::single_particle::gauge_rotate(&g, u), t).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn prop_kms_holds_on_trap_pairs(f in arb_function(1, 1.0), g in arb_function(1, 1.0), beta in 0.3f64..3.0, mu in -1.0f64..0.9, t in -2.0f64..2.0) {
        let state = Equilibrium::Thermal(thermal(beta, mu, trap(1, 1.0)));
        prop_assert!(kms_check(&state, &f, &g, &[t]).unwrap() < 1e-10);
    }
}
