//! Quasifree states: Weyl expectations, two-point functions and expectations
//! of resolvent products.
//!
//! A state is fixed by a two-point form `⟨f, g⟩_ω(t)`, an optional shift and
//! an averaging mode. The shift is stored as a Weyl vector `w` with linear
//! functional `l(f) = Im⟨w, f⟩`, so that `ω(W(f)) = e^{i l(f)} e^{−⟨f,f⟩_ω/2}`
//! and the complex pairing is `⟨w, f⟩ = l(if) + i l(f)`. A coherent
//! condensate amplitude `e` corresponds to `w = √2 e`, which makes the number
//! increment `|⟨w, f⟩|²/2 = |⟨e, f⟩|²`.
//!
//! Resolvent products use `iR(λ, f) = ∫₀^∞ e^{−uλ} W(−uf) du` for `Re λ > 0`:
//!
//! ```text
//! iⁿ ω(R(λ₁,f₁)⋯R(λₙ,fₙ)) = ∫_{ℝ₊ⁿ} e^{−Σ u_j λ_j} Φ(u) e^{−Q(u)} du,
//! Q(u) = Σ_{k<l} u_k u_l ⟨f_k, f_l⟩_ω(t_l − t_k) + ½ Σ_k u_k² ⟨f_k, f_k⟩_ω,
//! ```
//!
//! with `Φ = e^{−i Σ u_j l(f_j(t_j))}`, or `J₀(|Σ u_j ⟨w, f_j(t_j)⟩|)` for the
//! phase-averaged state, and is integrated by tensor Gauss–Laguerre quadrature.

use num_complex::Complex;
use rayon::prelude::*;

use crate::equilibrium::{equilibrium_form, Equilibrium, LimitParams, ThermalParams};
use crate::error::{Error, Result};
use crate::quadrature::gauss_laguerre;
use crate::scalar::{cst, im, to_f64, Scalar};
use crate::single_particle::{inner_product, propagator, HamiltonianModel, TestFunction};

/// Longest resolvent word accepted.
pub const MAX_WORD_LEN: usize = 4;

/// Gauss–Laguerre schedule per axis.
const START_NODES: usize = 32;
const MAX_NODES: usize = 256;

/// Cap on the tensor grid size `nodesⁿ`.
const MAX_GRID: usize = 1 << 24;

/// Two-point form of a quasifree state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SesquiForm<T: Scalar> {
    /// `½⟨f, e^{ith} g⟩`; without dynamics only `t = 0` is defined.
    Vacuum { dynamics: Option<HamiltonianModel<T>> },
    Thermal(ThermalParams<T>),
    Limit(LimitParams<T>),
}

impl<T: Scalar> SesquiForm<T> {
    /// `⟨f, e^{it(h−μ)} g⟩_ω`. Divergent arguments of a limit form are
    /// reported as [`Error::Divergent`].
    pub fn eval(&self, f: &TestFunction<T>, g: &TestFunction<T>, t: T) -> Result<Complex<T>> {
        match self {
            SesquiForm::Vacuum { dynamics: None } => {
                if t != T::zero() {
                    return Err(Error::Unsupported("static vacuum form has no time evolution".into()));
                }
                Ok(inner_product(f, g)? * cst::<T>(0.5))
            }
            SesquiForm::Vacuum { dynamics: Some(model) } => {
                Ok(propagator(model, T::zero(), f, g, im(-t))? * cst::<T>(0.5))
            }
            SesquiForm::Thermal(p) => equilibrium_form(&Equilibrium::Thermal(*p), f, g, t),
            SesquiForm::Limit(p) => equilibrium_form(&Equilibrium::Limit(*p), f, g, t),
        }
    }

    /// Single-particle dynamics `(h, μ)` generating the time translations.
    pub fn dynamics(&self) -> Option<(HamiltonianModel<T>, T)> {
        match self {
            SesquiForm::Vacuum { dynamics } => dynamics.map(|m| (m, T::zero())),
            SesquiForm::Thermal(p) => Some((*p.model(), p.mu())),
            SesquiForm::Limit(p) => Some((*p.model(), p.mu())),
        }
    }

    /// `e^{it(h−μ)} f`, applied inside the pairing `⟨w, f(t)⟩`.
    pub(crate) fn pairing_at(&self, w: &TestFunction<T>, f: &TestFunction<T>, t: T) -> Result<Complex<T>> {
        if t == T::zero() {
            return inner_product(w, f);
        }
        match self.dynamics() {
            Some((model, mu)) => propagator(&model, mu, w, f, im(-t)),
            None => Err(Error::Unsupported("static vacuum form has no time evolution".into())),
        }
    }

    fn is_regular(&self, f: &TestFunction<T>) -> Result<bool> {
        match self {
            SesquiForm::Limit(p) => Equilibrium::Limit(*p).is_regular(f),
            _ => Ok(true),
        }
    }
}

impl<T: Scalar> From<Equilibrium<T>> for SesquiForm<T> {
    fn from(e: Equilibrium<T>) -> Self {
        match e {
            Equilibrium::Thermal(p) => SesquiForm::Thermal(p),
            Equilibrium::Limit(p) => SesquiForm::Limit(p),
        }
    }
}

/// Coherent shift with Weyl vector `w`: `l(f) = Im⟨w, f⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shift<T: Scalar> {
    weyl: TestFunction<T>,
}

impl<T: Scalar> Shift<T> {
    pub fn new(weyl: TestFunction<T>) -> Self {
        Self { weyl }
    }

    /// Shift by the condensate amplitude `e`, i.e. `w = √2 e`, so that the
    /// number increment of `f` is `|⟨e, f⟩|²`.
    pub fn from_condensate_amplitude(e: &TestFunction<T>) -> Self {
        Self {
            weyl: e.scaled(Complex::new(cst::<T>(2.0).sqrt(), T::zero())),
        }
    }

    pub fn weyl(&self) -> &TestFunction<T> {
        &self.weyl
    }

    /// `l(f) = Im⟨w, f⟩`.
    pub fn linear(&self, f: &TestFunction<T>) -> Result<T> {
        Ok(inner_product(&self.weyl, f)?.im)
    }

    /// `⟨w, f⟩ = l(if) + i l(f)`.
    pub fn pairing(&self, f: &TestFunction<T>) -> Result<Complex<T>> {
        inner_product(&self.weyl, f)
    }

    /// `|⟨w, f⟩|²/2`, the shift contribution to `ω(a*(f)a(f))`.
    pub fn number_increment(&self, f: &TestFunction<T>) -> Result<T> {
        Ok(self.pairing(f)?.norm_sqr() / cst(2.0))
    }
}

/// Phase treatment of a shifted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    None,
    /// Average over the gauge circle; the phase `e^{i l(f)}` becomes `J₀(|⟨w, f⟩|)`.
    Bessel,
}

/// Quasifree state: form, optional shift and averaging mode.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasifreeSpec<T: Scalar> {
    form: SesquiForm<T>,
    shift: Option<Shift<T>>,
    averaging: Averaging,
}

impl<T: Scalar> QuasifreeSpec<T> {
    /// Gauge-invariant state with the given form.
    pub fn new(form: SesquiForm<T>) -> Self {
        Self {
            form,
            shift: None,
            averaging: Averaging::None,
        }
    }

    /// Shifted state with the given averaging mode.
    pub fn shifted(form: SesquiForm<T>, shift: Shift<T>, averaging: Averaging) -> Self {
        Self {
            form,
            shift: Some(shift),
            averaging,
        }
    }

    pub fn form(&self) -> &SesquiForm<T> {
        &self.form
    }

    pub fn shift(&self) -> Option<&Shift<T>> {
        self.shift.as_ref()
    }

    pub fn averaging(&self) -> Averaging {
        self.averaging
    }

    /// The same state without its phase average.
    pub fn unaveraged(&self) -> Self {
        Self {
            averaging: Averaging::None,
            ..self.clone()
        }
    }

    /// The same form without shift.
    pub fn unshifted(&self) -> Self {
        Self::new(self.form)
    }
}

/// Ordered product `R(λ₁, f₁(t₁)) ⋯ R(λₙ, fₙ(tₙ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventWord<T: Scalar> {
    factors: Vec<(Complex<T>, TestFunction<T>, T)>,
}

impl<T: Scalar> ResolventWord<T> {
    /// Requires `1 ≤ n ≤ MAX_WORD_LEN`, `Re λ_j ≠ 0` and a common dimension.
    pub fn new(factors: Vec<(Complex<T>, TestFunction<T>, T)>) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_WORD_LEN {
            return Err(Error::invalid(format!(
                "word length must be between 1 and {MAX_WORD_LEN}, got {}",
                factors.len()
            )));
        }
        let dim = factors[0].1.dim();
        for (lambda, f, t) in &factors {
            if lambda.re == T::zero() || !lambda.re.is_finite() || !lambda.im.is_finite() {
                return Err(Error::invalid(format!("resolvent parameter needs finite Re λ ≠ 0, got {lambda}")));
            }
            if f.dim() != dim {
                return Err(Error::DimensionMismatch(f.dim(), dim));
            }
            if !t.is_finite() {
                return Err(Error::invalid("time must be finite"));
            }
        }
        Ok(Self { factors })
    }

    pub fn single(lambda: Complex<T>, f: TestFunction<T>, t: T) -> Result<Self> {
        Self::new(vec![(lambda, f, t)])
    }

    pub fn factors(&self) -> &[(Complex<T>, TestFunction<T>, T)] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Rewrites every factor with `Re λ < 0` as `R(λ, f) = −R(−λ, −f)`;
    /// returns the word with `Re λ_j > 0` and the accumulated sign.
    pub fn normalized(&self) -> (Self, T) {
        let mut sign = T::one();
        let factors = self
            .factors
            .iter()
            .map(|(lambda, f, t)| {
                if lambda.re < T::zero() {
                    sign = -sign;
                    (-*lambda, f.negated(), *t)
                } else {
                    (*lambda, f.clone(), *t)
                }
            })
            .collect();
        (Self { factors }, sign)
    }

    /// Applies the gauge rotation `f ↦ e^{iu} f` to every factor.
    pub fn gauge_rotated(&self, u: T) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .map(|(l, f, t)| (*l, crate::single_particle::gauge_rotate(f, u), *t))
                .collect(),
        }
    }

    /// Shifts every time by `s`.
    pub fn time_shifted(&self, s: T) -> Self {
        Self {
            factors: self.factors.iter().map(|(l, f, t)| (*l, f.clone(), *t + s)).collect(),
        }
    }
}

/// `ω(W(f))`.
pub fn weyl_expectation<T: Scalar>(spec: &QuasifreeSpec<T>, f: &TestFunction<T>) -> Result<Complex<T>> {
    if f.is_zero() {
        return Ok(Complex::new(T::one(), T::zero()));
    }
    let gauss = match spec.form.eval(f, f, T::zero()) {
        Ok(v) => (-v.re / cst(2.0)).exp(),
        // The limit form diverges on f, so the Gaussian factor vanishes.
        Err(Error::Divergent) => return Ok(Complex::new(T::zero(), T::zero())),
        Err(e) => return Err(e),
    };
    let phase = match (&spec.shift, spec.averaging) {
        (None, _) => Complex::new(T::one(), T::zero()),
        (Some(s), Averaging::None) => crate::scalar::cis(s.linear(f)?),
        (Some(s), Averaging::Bessel) => Complex::new(s.pairing(f)?.norm().bessel_j0(), T::zero()),
    };
    Ok(phase * gauss)
}

/// `ω(φ(f)φ(g)) = ⟨f, g⟩_ω + l(f) l(g)`.
pub fn two_point<T: Scalar>(spec: &QuasifreeSpec<T>, f: &TestFunction<T>, g: &TestFunction<T>) -> Result<Complex<T>> {
    if spec.averaging == Averaging::Bessel {
        return Err(Error::Unsupported(
            "the two-point function of the phase-averaged state is not of quasifree form; use number_expectation".into(),
        ));
    }
    let form = spec.form.eval(f, g, T::zero())?;
    let shift = match &spec.shift {
        Some(s) => s.linear(f)? * s.linear(g)?,
        None => T::zero(),
    };
    Ok(form + shift)
}

/// Whether a limit state annihilates a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    Keep,
    Annihilate,
}

/// A limit state annihilates every word containing a resolvent whose test
/// function lies outside its regular domain. Finite shifts never diverge, so
/// only the form decides.
pub fn regularity_filter<T: Scalar>(spec: &QuasifreeSpec<T>, word: &ResolventWord<T>) -> Result<Filter> {
    for (_, f, _) in word.factors() {
        if !spec.form.is_regular(f)? {
            return Ok(Filter::Annihilate);
        }
    }
    Ok(Filter::Keep)
}

/// Accepted quadrature value with the estimate it was compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordEstimate<T: Scalar> {
    pub value: Complex<T>,
    /// Estimate at half the node count, `None` for exact shortcuts.
    pub previous: Option<Complex<T>>,
    /// Gauss–Laguerre nodes per axis of the accepted value.
    pub nodes: usize,
}

/// `ω(R(λ₁, f₁(t₁)) ⋯ R(λₙ, fₙ(tₙ)))`.
pub fn resolvent_word_expectation<T: Scalar>(spec: &QuasifreeSpec<T>, word: &ResolventWord<T>) -> Result<Complex<T>> {
    resolvent_word_estimate(spec, word).map(|e| e.value)
}

/// Relative tolerance, against `Π 1/Re λ_j`, of the node-doubling test.
pub fn word_rtol(n: usize) -> f64 {
    if n <= 2 {
        1e-8
    } else {
        1e-6
    }
}

/// [`resolvent_word_expectation`] with convergence information.
pub fn resolvent_word_estimate<T: Scalar>(spec: &QuasifreeSpec<T>, word: &ResolventWord<T>) -> Result<WordEstimate<T>> {
    let (word, sign) = word.normalized();
    if regularity_filter(spec, &word)? == Filter::Annihilate {
        return Ok(WordEstimate {
            value: Complex::new(T::zero(), T::zero()),
            previous: None,
            nodes: 0,
        });
    }
    let n = word.len();
    let factors = word.factors();
    let mut gram = vec![vec![Complex::new(T::zero(), T::zero()); n]; n];
    for k in 0..n {
        for l in k..n {
            let (_, fk, tk) = &factors[k];
            let (_, fl, tl) = &factors[l];
            gram[k][l] = if k == l {
                spec.form.eval(fk, fk, T::zero())?
            } else {
                spec.form.eval(fk, fl, *tl - *tk)?
            };
        }
    }
    let pairings: Vec<Complex<T>> = match &spec.shift {
        Some(s) => factors
            .iter()
            .map(|(_, f, t)| spec.form.pairing_at(s.weyl(), f, *t))
            .collect::<Result<_>>()?,
        None => vec![Complex::new(T::zero(), T::zero()); n],
    };
    let lambdas: Vec<Complex<T>> = factors.iter().map(|(l, _, _)| *l).collect();
    let integrand = Integrand {
        lambdas: &lambdas,
        gram: &gram,
        pairings: &pairings,
        averaging: if spec.shift.is_some() { spec.averaging } else { Averaging::None },
    };
    let bound: f64 = lambdas.iter().map(|l| 1.0 / to_f64(l.re)).product();
    let rtol = word_rtol(n);
    let i_pow = Complex::new(T::zero(), T::one()).powi(n as i32);
    let mut nodes = START_NODES;
    let mut previous = integrand.tensor_laguerre(nodes);
    let mut last_diff = f64::NAN;
    loop {
        let next_nodes = nodes * 2;
        if next_nodes > MAX_NODES || next_nodes.checked_pow(n as u32).is_none_or(|g| g > MAX_GRID) {
            return Err(Error::not_converged("resolvent word quadrature", last_diff / bound, rtol));
        }
        let current = integrand.tensor_laguerre(next_nodes);
        let diff = to_f64((current - previous).norm());
        if diff <= rtol * bound {
            return Ok(WordEstimate {
                value: current / i_pow * sign,
                previous: Some(previous / i_pow * sign),
                nodes: next_nodes,
            });
        }
        last_diff = diff;
        previous = current;
        nodes = next_nodes;
    }
}

struct Integrand<'a, T: Scalar> {
    lambdas: &'a [Complex<T>],
    gram: &'a [Vec<Complex<T>>],
    pairings: &'a [Complex<T>],
    averaging: Averaging,
}

impl<T: Scalar> Integrand<'_, T> {
    /// `∫_{ℝ₊ⁿ} e^{−Σ u_j λ_j} Φ(u) e^{−Q(u)} du` on a tensor Gauss–Laguerre grid
    /// after `u_j = v_j / κ_j`, `κ_j = Re λ_j + √⟨f_j, f_j⟩_ω`.
    fn tensor_laguerre(&self, nodes: usize) -> Complex<T> {
        let n = self.lambdas.len();
        let rule = gauss_laguerre(nodes);
        let kappa: Vec<T> = (0..n)
            .map(|j| self.lambdas[j].re + self.gram[j][j].re.max(T::zero()).sqrt())
            .collect();
        let ln_jacobian: T = kappa.iter().map(|k| -k.ln()).sum();
        let node: Vec<T> = rule.nodes.iter().map(|&x| cst(x)).collect();
        let ln_w: Vec<T> = rule.ln_weights.iter().map(|&x| cst(x)).collect();
        let partial: Vec<Complex<T>> = (0..nodes)
            .into_par_iter()
            .map(|i0| {
                let mut idx = vec![0usize; n];
                idx[0] = i0;
                let mut u = vec![T::zero(); n];
                let mut acc = Complex::new(T::zero(), T::zero());
                loop {
                    let mut ln_weight = ln_jacobian;
                    for j in 0..n {
                        let v = node[idx[j]];
                        u[j] = v / kappa[j];
                        ln_weight += ln_w[idx[j]] + v;
                    }
                    acc += self.value(&u, ln_weight);
                    // Odometer over axes 1..n.
                    let mut axis = n;
                    loop {
                        axis -= 1;
                        if axis == 0 {
                            return acc;
                        }
                        idx[axis] += 1;
                        if idx[axis] < nodes {
                            break;
                        }
                        idx[axis] = 0;
                    }
                }
            })
            .collect();
        partial.into_iter().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    fn value(&self, u: &[T], ln_weight: T) -> Complex<T> {
        let n = u.len();
        let mut exponent = Complex::new(ln_weight, T::zero());
        let half = cst::<T>(0.5);
        for k in 0..n {
            exponent -= self.lambdas[k] * u[k];
            exponent -= self.gram[k][k] * (u[k] * u[k] * half);
            for l in k + 1..n {
                exponent -= self.gram[k][l] * (u[k] * u[l]);
            }
        }
        match self.averaging {
            Averaging::None => {
                let phase: T = (0..n).map(|j| u[j] * self.pairings[j].im).sum();
                exponent.im -= phase;
                exponent.exp()
            }
            Averaging::Bessel => {
                let z: Complex<T> = (0..n).fold(Complex::new(T::zero(), T::zero()), |a, j| a + self.pairings[j] * u[j]);
                exponent.exp() * z.norm().bessel_j0()
            }
        }
    }
}
