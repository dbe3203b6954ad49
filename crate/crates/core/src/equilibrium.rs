//! Thermal two-point forms of the ideal Bose gas, their boundary limits in the
//! chemical potential, and numerical KMS, thermodynamic-limit and clustering checks.
//!
//! With `η = h − μ` and Bose occupation `n = (e^{βη} − 1)^{-1}` the form is
//!
//! ```text
//! ⟨f, g⟩(t) = ½ [⟨f, (1 + n) e^{itη} g⟩ + ⟨g, n e^{−itη} f⟩].
//! ```
//!
//! Three independent evaluators are provided:
//!
//! * `Series`: `1 + n = Σ_{m≥0} e^{−mβη}` turns the form into a sum of
//!   closed-form propagator elements `⟨f, e^{−(mβ ∓ it)η} g⟩`;
//! * `Spectral`: trap only, the sum over eigenlevels of the expansions of `f`
//!   and `g` in the eigenbasis;
//! * `Quadrature`: free only, radial–angular momentum quadrature of the Bose
//!   weight against `conj(f̃) g̃`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quasifree::{resolvent_word_expectation, QuasifreeSpec, ResolventWord, SesquiForm};
use crate::scalar::{cis, cst, im, re, to_f64, Scalar};
use crate::single_particle::{
    domain_classify, expand_in_scale, inner_product, propagator, radial_extent, radial_integral,
    radial_panels, DomainStatus, HamiltonianModel, LimitKind, ModelKind, TestFunction,
};

/// Bose series are truncated once the geometric tail is below `e^{-40}`.
const SERIES_TAIL_EXPONENT: f64 = 40.0;

/// Longest Bose series attempted before reporting non-convergence.
const SERIES_CAP: f64 = 200_000.0;

/// Below this value of `β(ε_min − μ)` the automatic free evaluator switches
/// from the series to momentum quadrature.
const AUTO_SERIES_MIN_GAP: f64 = 0.02;

/// Gauss–Legendre order per radial panel.
const RADIAL_ORDER: usize = 20;

/// Inverse temperature, chemical potential and Hamiltonian of a Gibbs state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams<T: Scalar> {
    beta: T,
    mu: T,
    model: HamiltonianModel<T>,
}

impl<T: Scalar> ThermalParams<T> {
    /// Requires `β > 0` and `μ` strictly below the bottom of the spectrum.
    pub fn new(beta: T, mu: T, model: HamiltonianModel<T>) -> Result<Self> {
        check_beta(beta)?;
        if !mu.is_finite() || mu >= model.ground_energy() {
            return Err(Error::invalid(format!(
                "chemical potential {mu} must lie below the ground energy {}",
                model.ground_energy()
            )));
        }
        Ok(Self { beta, mu, model })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn model(&self) -> &HamiltonianModel<T> {
        &self.model
    }
}

/// Boundary state `μ ↗ ε_{L,1}` (trap) or `μ ↗ 0` (free).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitParams<T: Scalar> {
    beta: T,
    model: HamiltonianModel<T>,
    kind: LimitKind,
}

impl<T: Scalar> LimitParams<T> {
    /// `TrapGround` requires the trap, `FreeZeroMode` the free model.
    pub fn new(beta: T, model: HamiltonianModel<T>, kind: LimitKind) -> Result<Self> {
        check_beta(beta)?;
        match (kind, model.kind()) {
            (LimitKind::TrapGround, ModelKind::HarmonicTrap { .. })
            | (LimitKind::FreeZeroMode, ModelKind::Free) => Ok(Self { beta, model, kind }),
            _ => Err(Error::Unsupported(
                "TrapGround needs the trap and FreeZeroMode the free model".into(),
            )),
        }
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn model(&self) -> &HamiltonianModel<T> {
        &self.model
    }

    pub fn kind(&self) -> LimitKind {
        self.kind
    }

    /// The boundary value of the chemical potential.
    pub fn mu(&self) -> T {
        self.model.ground_energy()
    }
}

/// A Gibbs state or one of its boundary limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equilibrium<T: Scalar> {
    Thermal(ThermalParams<T>),
    Limit(LimitParams<T>),
}

impl<T: Scalar> Equilibrium<T> {
    pub fn beta(&self) -> T {
        match self {
            Equilibrium::Thermal(p) => p.beta,
            Equilibrium::Limit(p) => p.beta,
        }
    }

    pub fn mu(&self) -> T {
        match self {
            Equilibrium::Thermal(p) => p.mu,
            Equilibrium::Limit(p) => p.mu(),
        }
    }

    pub fn model(&self) -> &HamiltonianModel<T> {
        match self {
            Equilibrium::Thermal(p) => &p.model,
            Equilibrium::Limit(p) => &p.model,
        }
    }

    /// Limit kind for boundary states, `None` for Gibbs states.
    pub fn limit_kind(&self) -> Option<LimitKind> {
        match self {
            Equilibrium::Thermal(_) => None,
            Equilibrium::Limit(p) => Some(p.kind),
        }
    }

    /// Whether `f` lies in the regular domain of the state.
    pub fn is_regular(&self, f: &TestFunction<T>) -> Result<bool> {
        match self.limit_kind() {
            None => Ok(true),
            Some(_) if f.is_zero() => Ok(true),
            Some(kind) => Ok(domain_classify(self.model(), kind, f)?.status == DomainStatus::Regular),
        }
    }
}

impl<T: Scalar> From<ThermalParams<T>> for Equilibrium<T> {
    fn from(p: ThermalParams<T>) -> Self {
        Equilibrium::Thermal(p)
    }
}

impl<T: Scalar> From<LimitParams<T>> for Equilibrium<T> {
    fn from(p: LimitParams<T>) -> Self {
        Equilibrium::Limit(p)
    }
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta > T::zero() && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta must be positive and finite, got {beta}")))
    }
}

/// Evaluator used for a thermal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    /// Spectral sum for the trap when `f`, `g` live in the eigenbasis scale,
    /// otherwise the series; series or quadrature for the free model.
    Auto,
    Series,
    Spectral,
    Quadrature,
}

/// Value of a limit form, or annihilation of a divergent argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitValue<T: Scalar> {
    Value(Complex<T>),
    Annihilated,
}

impl<T: Scalar> LimitValue<T> {
    pub fn value(self) -> Option<Complex<T>> {
        match self {
            LimitValue::Value(v) => Some(v),
            LimitValue::Annihilated => None,
        }
    }
}

/// `⟨f, e^{it(h−μ)} g⟩_{β,μ}` of the Gibbs state.
pub fn thermal_two_point<T: Scalar>(
    params: &ThermalParams<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
) -> Result<Complex<T>> {
    thermal_two_point_with(params, f, g, t, Evaluation::Auto)
}

/// [`thermal_two_point`] with an explicit evaluator.
pub fn thermal_two_point_with<T: Scalar>(
    params: &ThermalParams<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
    evaluation: Evaluation,
) -> Result<Complex<T>> {
    evaluate(&Equilibrium::Thermal(*params), f, g, t, evaluation, false)
}

/// Limit of the thermal form as `μ` approaches the bottom of the spectrum.
pub fn limit_form<T: Scalar>(
    params: &LimitParams<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
) -> Result<LimitValue<T>> {
    limit_form_with(params, f, g, t, Evaluation::Auto)
}

/// [`limit_form`] with an explicit evaluator.
pub fn limit_form_with<T: Scalar>(
    params: &LimitParams<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
    evaluation: Evaluation,
) -> Result<LimitValue<T>> {
    let state = Equilibrium::Limit(*params);
    if !state.is_regular(f)? || !state.is_regular(g)? {
        return Ok(LimitValue::Annihilated);
    }
    evaluate(&state, f, g, t, evaluation, false).map(LimitValue::Value)
}

/// Form of either kind of equilibrium state; divergent arguments of a limit
/// state are reported as [`Error::Divergent`].
pub fn equilibrium_form<T: Scalar>(
    state: &Equilibrium<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
) -> Result<Complex<T>> {
    match state {
        Equilibrium::Thermal(p) => thermal_two_point(p, f, g, t),
        Equilibrium::Limit(p) => limit_form(p, f, g, t)?.value().ok_or(Error::Divergent),
    }
}

fn evaluate<T: Scalar>(
    state: &Equilibrium<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
    evaluation: Evaluation,
    continued: bool,
) -> Result<Complex<T>> {
    let model = state.model();
    if f.dim() != model.dim() || g.dim() != model.dim() {
        return Err(Error::DimensionMismatch(f.dim(), model.dim()));
    }
    if f.is_zero() || g.is_zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let route = match evaluation {
        Evaluation::Auto => auto_route(state, f, g),
        other => other,
    };
    match (route, model.kind(), continued) {
        (Evaluation::Series, _, false) => series(state, f, g, t),
        (Evaluation::Spectral, ModelKind::HarmonicTrap { length }, _) => {
            spectral(state, length, f, g, t, continued)
        }
        (Evaluation::Quadrature, ModelKind::Free, _) => quadrature(state, f, g, t, continued),
        _ => Err(Error::Unsupported(format!(
            "{route:?} evaluation is not available for this model{}",
            if continued { " with analytic continuation" } else { "" }
        ))),
    }
}

fn auto_route<T: Scalar>(state: &Equilibrium<T>, f: &TestFunction<T>, g: &TestFunction<T>) -> Evaluation {
    match state.model().kind() {
        ModelKind::HarmonicTrap { length } => {
            if f.scale() == length && g.scale() == length {
                Evaluation::Spectral
            } else {
                Evaluation::Series
            }
        }
        ModelKind::Free => {
            let gap = to_f64(state.beta() * (state.model().ground_energy() - state.mu()));
            if gap >= AUTO_SERIES_MIN_GAP {
                Evaluation::Series
            } else {
                Evaluation::Quadrature
            }
        }
    }
}

/// `n(x) = (e^x − 1)^{-1}`.
fn bose<T: Scalar>(x: T) -> T {
    x.exp_m1().recip()
}

/// Number of Bose-series terms for decay rate `x = β·gap` per term.
fn series_terms(x: f64) -> Result<usize> {
    if !(x > 0.0) {
        return Err(Error::Unsupported(
            "the Bose series does not converge at the bottom of the spectrum; use quadrature".into(),
        ));
    }
    let tail = -(-x).exp_m1();
    let m = ((SERIES_TAIL_EXPONENT - tail.ln()) / x).ceil() + 2.0;
    if m > SERIES_CAP {
        return Err(Error::not_converged("Bose series length", m, SERIES_CAP));
    }
    Ok(m as usize)
}

fn series<T: Scalar>(
    state: &Equilibrium<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
) -> Result<Complex<T>> {
    let model = state.model();
    let beta = state.beta();
    let mu = state.mu();
    let (gap, ground) = match (state.limit_kind(), model.kind()) {
        (None, _) => (model.ground_energy() - mu, None),
        (Some(LimitKind::TrapGround), _) => {
            let e1 = model.ground_state()?;
            let cf = inner_product(&e1, f)?;
            let cg = inner_product(&e1, g)?;
            (model.excitation_gap()?, Some((cf, cg)))
        }
        (Some(LimitKind::FreeZeroMode), _) => (T::zero(), None),
    };
    let terms = series_terms(to_f64(beta * gap))?;
    // Ground-state contributions do not decay at μ = ε₁ and are removed term by term.
    let (sub_fg, sub_gf) = match ground {
        Some((cf, cg)) => (cf.conj() * cg, cg.conj() * cf),
        None => (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero())),
    };
    let k0 = propagator(model, mu, f, g, im(-t))? - sub_fg;
    let partial: Vec<Result<Complex<T>>> = (1..=terms)
        .into_par_iter()
        .map(|m| {
            let tau = beta * cst::<T>(m as f64);
            let a = propagator(model, mu, f, g, Complex::new(tau, -t))? - sub_fg;
            let b = propagator(model, mu, g, f, Complex::new(tau, t))? - sub_gf;
            Ok(a + b)
        })
        .collect();
    let mut acc = Complex::new(T::zero(), T::zero());
    // Smallest terms first.
    for v in partial.into_iter().rev() {
        acc += v?;
    }
    Ok((k0 + acc) * cst::<T>(0.5))
}

/// Weights `(w₁, w₂)` multiplying `⟨f, · g⟩` and `⟨g, · f⟩` at energy `η`.
fn level_weights<T: Scalar>(beta: T, eta: T, t: T, continued: bool) -> (Complex<T>, Complex<T>) {
    let x = beta * eta;
    let n = bose(x);
    if !continued {
        return (cis(t * eta) * (T::one() + n), cis(-t * eta) * n);
    }
    // Literal continuation t → t + iβ of e^{itη} and t → t − iβ of e^{−itη}.
    let safe = x < T::max_value().ln() / cst(2.0);
    let up = if safe { n * x.exp() } else { (-(-x).exp_m1()).recip() };
    let down = (T::one() + n) * (-x).exp();
    (cis(t * eta) * down, cis(-t * eta) * up)
}

fn spectral<T: Scalar>(
    state: &Equilibrium<T>,
    length: T,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
    continued: bool,
) -> Result<Complex<T>> {
    let model = state.model();
    let beta = state.beta();
    let mu = state.mu();
    let fe = expand_in_scale(f, length)?;
    let ge = expand_in_scale(g, length)?;
    let skip_ground = state.limit_kind() == Some(LimitKind::TrapGround);
    let mut acc = Complex::new(T::zero(), T::zero());
    for (k, cf) in fe.coeffs() {
        let cg = ge.coeff(k);
        if cg.re == T::zero() && cg.im == T::zero() {
            continue;
        }
        if skip_ground && k.iter().all(|&n| n == 0) {
            continue;
        }
        let eta = model.eigenvalue(k)? - mu;
        let (w1, w2) = level_weights(beta, eta, t, continued);
        acc += w1 * cf.conj() * cg + w2 * cg.conj() * cf;
    }
    Ok(acc * cst::<T>(0.5))
}

fn quadrature<T: Scalar>(
    state: &Equilibrium<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
    continued: bool,
) -> Result<Complex<T>> {
    let beta = state.beta();
    let mu = state.mu();
    let hi = radial_extent(f, g);
    let panels = 2 * radial_panels(hi, t);
    let value = radial_integral(f, g, T::zero(), hi, panels, RADIAL_ORDER, |r| {
        level_weights(beta, r * r - mu, t, continued)
    })?;
    Ok(value * cst::<T>(0.5))
}

/// Verdict of a convergence protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    NotConverged,
}

/// Sequence of `(parameter, deviation)` pairs with a verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T: Scalar> {
    pub entries: Vec<(T, T)>,
    pub verdict: Verdict,
}

impl<T: Scalar> ConvergenceReport<T> {
    /// Converged iff at least two entries, the last deviation is below `tol`
    /// and the deviations are decreasing at the end.
    pub fn from_entries(entries: Vec<(T, T)>, tol: T) -> Self {
        let verdict = match entries.as_slice() {
            [.., (_, prev), (_, last)] if *last < tol && *last < *prev => Verdict::Converged,
            _ => Verdict::NotConverged,
        };
        Self { entries, verdict }
    }
}

/// Trap form at each length against the free form, `|trap(L) − free|`.
///
/// The free value is computed by momentum quadrature and the trap values by
/// the closed-form series, so the two sides share no code path beyond the
/// test-function representation.
pub fn thermodynamic_limit_scan<T: Scalar>(
    beta: T,
    mu: T,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
    lengths: &[T],
    tol: T,
) -> Result<ConvergenceReport<T>> {
    if !(mu < T::zero()) {
        return Err(Error::invalid(format!("thermodynamic limit needs mu < 0, got {mu}")));
    }
    let free = ThermalParams::new(beta, mu, HamiltonianModel::free(f.dim())?)?;
    let reference = thermal_two_point_with(&free, f, g, t, Evaluation::Quadrature)?;
    let entries = lengths
        .par_iter()
        .map(|&length| {
            let trap = ThermalParams::new(beta, mu, HamiltonianModel::harmonic_trap(f.dim(), length)?)?;
            let v = thermal_two_point(&trap, f, g, t)?;
            Ok((length, (v - reference).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_entries(entries, tol))
}

/// Maximum over `t_grid` of the KMS boundary-value deviation
///
/// ```text
/// | ½[⟨f,(1+n)e^{(it−β)η}g⟩ + ⟨g, n e^{(β−it)η} f⟩] − ⟨g, f⟩(−t) |.
/// ```
///
/// The left side continues each eigenlevel or momentum shell literally; the
/// right side is the swapped form from an independent evaluator (the series
/// where it converges, otherwise uncontinued quadrature).
pub fn kms_check<T: Scalar>(
    state: &Equilibrium<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t_grid: &[T],
) -> Result<T> {
    if !state.is_regular(f)? || !state.is_regular(g)? {
        return Err(Error::Divergent);
    }
    let rhs_route = match state.model().kind() {
        ModelKind::Free if state.limit_kind().is_some() => Evaluation::Quadrature,
        _ => Evaluation::Series,
    };
    let deviations = t_grid
        .par_iter()
        .map(|&t| {
            let lhs = kms_boundary_value(state, f, g, t)?;
            let rhs = evaluate(state, g, f, -t, rhs_route, false)?;
            Ok((lhs - rhs).norm())
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(deviations.into_iter().fold(T::zero(), T::max))
}

/// Continued side `½[⟨f,(1+n)e^{(it−β)η}g⟩ + ⟨g, n e^{(β−it)η} f⟩]` of the
/// KMS condition, per eigenlevel (trap) or momentum shell (free).
pub fn kms_boundary_value<T: Scalar>(
    state: &Equilibrium<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t: T,
) -> Result<Complex<T>> {
    if !state.is_regular(f)? || !state.is_regular(g)? {
        return Err(Error::Divergent);
    }
    let route = match state.model().kind() {
        ModelKind::HarmonicTrap { .. } => Evaluation::Spectral,
        ModelKind::Free => Evaluation::Quadrature,
    };
    evaluate(state, f, g, t, route, true)
}

/// Decay of correlations under the free dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringReport<T: Scalar> {
    /// `(t, ⟨f, g⟩(t))`.
    pub two_point: Vec<(T, Complex<T>)>,
    /// `(t, |ω(R(1,f) R(1,g)_t) − ω(R(1,f)) ω(R(1,g))|)`; empty for the trap.
    pub factorization_gap: Vec<(T, T)>,
    pub verdict: Verdict,
    /// Set for the trap, whose discrete spectrum makes correlations
    /// quasi-periodic rather than decaying.
    pub periodic: bool,
}

impl<T: Scalar> ClusteringReport<T> {
    /// Whether `|⟨f, g⟩(t)|` strictly decreases along the time list.
    pub fn strictly_decreasing(&self) -> bool {
        self.two_point.windows(2).all(|w| w[1].1.norm() < w[0].1.norm())
    }
}

/// Two-point moduli and the factorization gap of a pair of resolvents along
/// `t_list`; converged iff both are below `tol` at the last time.
pub fn clustering_check<T: Scalar>(
    state: &Equilibrium<T>,
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    t_list: &[T],
    tol: T,
) -> Result<ClusteringReport<T>> {
    if !state.is_regular(f)? || !state.is_regular(g)? {
        return Err(Error::Divergent);
    }
    let two_point = t_list
        .par_iter()
        .map(|&t| Ok((t, equilibrium_form(state, f, g, t)?)))
        .collect::<Result<Vec<_>>>()?;
    if state.model().is_trap() {
        return Ok(ClusteringReport {
            two_point,
            factorization_gap: Vec::new(),
            verdict: Verdict::NotConverged,
            periodic: true,
        });
    }
    let spec = QuasifreeSpec::new(SesquiForm::from(*state));
    let one = re(T::one());
    let single_f = resolvent_word_expectation(&spec, &ResolventWord::single(one, f.clone(), T::zero())?)?;
    let single_g = resolvent_word_expectation(&spec, &ResolventWord::single(one, g.clone(), T::zero())?)?;
    let product = single_f * single_g;
    let factorization_gap = t_list
        .iter()
        .map(|&t| {
            let word = ResolventWord::new(vec![(one, f.clone(), T::zero()), (one, g.clone(), t)])?;
            Ok((t, (resolvent_word_expectation(&spec, &word)? - product).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let converged = matches!(
        (two_point.last(), factorization_gap.last()),
        (Some((_, v)), Some((_, gap))) if v.norm() < tol && *gap < tol
    );
    Ok(ClusteringReport {
        two_point,
        factorization_gap,
        verdict: if converged { Verdict::Converged } else { Verdict::NotConverged },
        periodic: false,
    })
}

#[cfg(test)]
mod tests;
