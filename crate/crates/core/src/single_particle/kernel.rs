//! Closed-form matrix elements `⟨h_m^{σ₁}, e^{-z h} h_l^{σ₂}⟩` of the trap
//! and free heat/Schrödinger propagators for `Re z ≥ 0`.
//!
//! Per axis the generating function
//! `Σ_{m,l} s^m t^l /√(m! l!) ⟨h_m^{σ₁}, e^{-z h} h_l^{σ₂}⟩`
//! is a Gaussian integral equal to `P exp(A s² + B s t + C t²)`. With
//! `u = 1 − q²`, `v = 1 + q²`, `q = e^{-2z/L²}` and `S_i = σ_i²`,
//!
//! ```text
//! Δ = u L² + (u/L²) S₁S₂ + v (S₁ + S₂)
//! A = (u L² + v S₂)/Δ − ½,  C = (u L² + v S₁)/Δ − ½,  B = 4 q σ₁σ₂/Δ
//! P = e^{-z/L²} · 2 √(σ₁σ₂) / √Δ
//! ```
//!
//! and the free propagator is the `L → ∞` limit (`uL² → 4z`, `u/L² → 0`,
//! `q → 1`). `Re Δ > 0` whenever `Re z ≥ 0`, so the principal square root is
//! the continuous branch. The ground-energy factor `e^{-z/L²}` is left out of
//! the tables and applied once for all axes by [`propagator`].

use num_complex::Complex;

use super::{check_dims, HamiltonianModel, ModelKind, TestFunction};
use crate::error::{Error, Result};
use crate::scalar::{cst, Scalar};
use crate::special::ln_factorials;

/// `e^x − 1` for complex `x`, accurate near zero.
pub(crate) fn expm1_complex<T: Scalar>(x: Complex<T>) -> Complex<T> {
    let (a, b) = (x.re, x.im);
    let half = b / cst(2.0);
    Complex::new(
        a.exp_m1() * b.cos() - cst::<T>(2.0) * half.sin() * half.sin(),
        a.exp() * b.sin(),
    )
}

/// One-axis table `M[m][l]` of propagator elements without the `e^{-z/L²}` factor.
pub(crate) fn axis_propagator_table<T: Scalar>(
    m_max: usize,
    l_max: usize,
    s1: T,
    s2: T,
    z: Complex<T>,
    length: Option<T>,
) -> Vec<Vec<Complex<T>>> {
    let one = Complex::new(T::one(), T::zero());
    let sq1 = s1 * s1;
    let sq2 = s2 * s2;
    let (u_l2, u_over_l2, q, v) = match length {
        Some(l) => {
            let l2 = l * l;
            let u = -expm1_complex(-z * cst::<T>(4.0) / l2);
            let q = (-z * cst::<T>(2.0) / l2).exp();
            (u * l2, u / l2, q, one * cst::<T>(2.0) - u)
        }
        None => (z * cst::<T>(4.0), Complex::new(T::zero(), T::zero()), one, one * cst::<T>(2.0)),
    };
    let delta = u_l2 + u_over_l2 * (sq1 * sq2) + v * (sq1 + sq2);
    let half = cst::<T>(0.5);
    let a = (u_l2 + v * sq2) / delta - half;
    let c = (u_l2 + v * sq1) / delta - half;
    let b = q * (s1 * s2 * cst::<T>(4.0)) / delta;
    let pref = delta.sqrt().inv() * ((s1 * s2).sqrt() * cst::<T>(2.0));

    let lnf = ln_factorials(m_max.max(l_max));
    let powers = |base: Complex<T>, n: usize| {
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = one;
        for _ in 0..=n {
            out.push(acc);
            acc *= base;
        }
        out
    };
    let pa = powers(a, m_max / 2);
    let pb = powers(b, m_max.min(l_max));
    let pc = powers(c, l_max / 2);

    let mut out = vec![vec![Complex::new(T::zero(), T::zero()); l_max + 1]; m_max + 1];
    for (m, row) in out.iter_mut().enumerate() {
        for (l, cell) in row.iter_mut().enumerate() {
            if (m + l) % 2 == 1 {
                continue;
            }
            let mut acc = Complex::new(T::zero(), T::zero());
            let mut j = m % 2;
            while j <= m.min(l) {
                let ka = (m - j) / 2;
                let kc = (l - j) / 2;
                let coef = 0.5 * (lnf[m] + lnf[l]) - lnf[ka] - lnf[j] - lnf[kc];
                acc += pa[ka] * pb[j] * pc[kc] * cst::<T>(coef.exp());
                j += 2;
            }
            *cell = acc * pref;
        }
    }
    out
}

/// `Σ_{m,l} conj(f_m) g_l Π_a table[m_a][l_a]`.
pub(crate) fn multi_sum<T: Scalar>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    table: &[Vec<Complex<T>>],
) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (km, cm) in f.coeffs() {
        let cmc = cm.conj();
        for (kl, cl) in g.coeffs() {
            let mut v = cmc * cl;
            for (&m, &l) in km.iter().zip(kl) {
                v *= table[m][l];
                if v.re == T::zero() && v.im == T::zero() {
                    break;
                }
            }
            acc += v;
        }
    }
    acc
}

/// `⟨f, e^{-z(h − μ)} g⟩` for `Re z ≥ 0`, in closed form.
///
/// Real `z = τ` gives the heat semigroup, `z = −it` the unitary group
/// `e^{it(h−μ)}`; combining the energy offset into a single exponent keeps
/// large-`τ` terms of Bose series finite.
pub fn propagator<T: Scalar>(
    model: &HamiltonianModel<T>,
    mu: T,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    z: Complex<T>,
) -> Result<Complex<T>> {
    check_dims(f, g)?;
    if f.dim() != model.dim() {
        return Err(Error::DimensionMismatch(f.dim(), model.dim()));
    }
    if z.re < T::zero() {
        return Err(Error::invalid("propagator needs Re z >= 0"));
    }
    if f.is_zero() || g.is_zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let length = model.length();
    let table = axis_propagator_table(
        f.max_axis_degree(),
        g.max_axis_degree(),
        f.scale(),
        g.scale(),
        z,
        length,
    );
    let offset = match model.kind() {
        ModelKind::HarmonicTrap { .. } => model.ground_energy() - mu,
        ModelKind::Free => -mu,
    };
    Ok(multi_sum(f, g, &table) * (-z * offset).exp())
}
