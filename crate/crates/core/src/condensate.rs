//! Condensation diagnostics: particle-number expectations, local normality
//! on boxes, the Mehler kernel and critical densities of the trapped and free
//! gas, the trapped trace bound, and the Bessel-averaged shifted states.

use num_complex::Complex;
use rayon::prelude::*;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::quadrature::composite_legendre;
use crate::quasifree::{resolvent_word_expectation, Averaging, QuasifreeSpec, ResolventWord, SesquiForm, Shift};
use crate::scalar::{cis, cst, from_usize, to_f64, Scalar};
use crate::single_particle::{partition_function, sphere_grid, HamiltonianModel, LimitKind, ModelKind, TestFunction};
use crate::special::{scaled_hermite_functions, spherical_bessel_squares};

/// Series over `n` stop once a term falls below this fraction of the partial sum.
pub const SERIES_RTOL: f64 = 1e-14;

/// Minimum number of series terms.
pub const SERIES_MIN_TERMS: usize = 5;

/// Occupations are cut off where `β(ε − μ)` exceeds this exponent.
const OCCUPATION_CUTOFF: f64 = 40.0;

/// Last-quartile increments above this fraction of `S_m` signal divergence.
pub const DIVERGENCE_FLOOR: f64 = 1e-3;

/// Last-quartile growth below this fraction of `S_m` signals convergence.
pub const CONVERGENCE_TAIL: f64 = 1e-2;

/// Default phase count for gauge averages.
pub const DEFAULT_PHASES: usize = 64;

const RADIAL_ORDER: usize = 20;

/// `ω(a*(f)a(f))`, or `Divergent` when `f` leaves the domain of a limit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumberValue<T: Scalar> {
    Finite(T),
    Divergent,
}

impl<T: Scalar> NumberValue<T> {
    pub fn value(self) -> Option<T> {
        match self {
            NumberValue::Finite(v) => Some(v),
            NumberValue::Divergent => None,
        }
    }
}

/// `⟨f, f⟩_ω − ‖f‖²/2` plus the shift increment `|⟨w, f⟩|²/2`.
///
/// Bessel averaging leaves the increment unchanged since it is gauge invariant.
pub fn number_expectation<T: Scalar>(spec: &QuasifreeSpec<T>, f: &TestFunction<T>) -> Result<NumberValue<T>> {
    let form = match spec.form().eval(f, f, T::zero()) {
        Ok(v) => v.re,
        Err(Error::Divergent) => return Ok(NumberValue::Divergent),
        Err(e) => return Err(e),
    };
    let mut n = form - f.norm_sqr() / cst(2.0);
    if let Some(shift) = spec.shift() {
        n += shift.number_increment(f)?;
    }
    Ok(NumberValue::Finite(n))
}

/// Geometric-law terms are summed until `qⁿ` falls below this value.
const GEOMETRIC_TAIL: f64 = 1e-17;

/// Longest geometric-law sum attempted before reporting non-convergence.
const GEOMETRIC_CAP: usize = 50_000_000;

/// `ω(F(a*(f)a(f)))` for a gauge-invariant quasifree state, where the mode
/// `f/‖f‖` carries geometric occupation with mean `m = ω(a*(f)a(f))/‖f‖²`:
/// `Σ_n (1 − q) qⁿ F(‖f‖² n)` with `q = m/(1 + m)`.
fn geometric_expectation<T: Scalar>(mean: T, norm_sqr: T, func: impl Fn(T) -> T) -> Result<T> {
    let m = mean / norm_sqr;
    let q = m / (T::one() + m);
    let p0 = T::one() / (T::one() + m);
    let mut weight = p0;
    let mut acc = T::zero();
    for n in 0..=GEOMETRIC_CAP {
        let previous = acc;
        acc += weight * func(norm_sqr * from_usize::<T>(n));
        weight *= q;
        if weight <= cst::<T>(GEOMETRIC_TAIL) * p0 {
            return Ok(acc);
        }
        if n == GEOMETRIC_CAP {
            return Err(Error::not_converged("geometric occupation sum", to_f64(acc), to_f64(previous)));
        }
    }
    unreachable!("the loop returns at the cap")
}

fn gauge_invariant_number<T: Scalar>(spec: &QuasifreeSpec<T>, f: &TestFunction<T>) -> Result<NumberValue<T>> {
    if spec.shift().is_some() {
        return Err(Error::Unsupported(
            "occupation law is implemented for unshifted gauge-invariant states".into(),
        ));
    }
    if f.is_zero() {
        return Err(Error::ZeroFunction);
    }
    number_expectation(spec, f)
}

/// `ω(a*(f)a(f)(1 + ε a*(f)a(f))^{−1})`; equals `1/ε` when `f` is divergent
/// for a limit state, where `(1 + ε a*(f)a(f))^{−1}` has expectation zero.
pub fn regularized_number<T: Scalar>(spec: &QuasifreeSpec<T>, f: &TestFunction<T>, eps: T) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(Error::invalid("regularization parameter must be positive"));
    }
    match gauge_invariant_number(spec, f)? {
        NumberValue::Divergent => Ok(eps.recip()),
        NumberValue::Finite(n) => geometric_expectation(n, f.norm_sqr(), |x| x / (T::one() + eps * x)),
    }
}

/// `ω((1 + a*(f)a(f))^{−1})`, zero when `f` is divergent for a limit state.
pub fn inverse_number<T: Scalar>(spec: &QuasifreeSpec<T>, f: &TestFunction<T>) -> Result<T> {
    match gauge_invariant_number(spec, f)? {
        NumberValue::Divergent => Ok(T::zero()),
        NumberValue::Finite(n) => geometric_expectation(n, f.norm_sqr(), |x| (T::one() + x).recip()),
    }
}

/// Axis-aligned box `Π_i [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T: Scalar> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> Region<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("region needs at least one axis"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(lower.len(), upper.len()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("region needs lower < upper on every axis"));
        }
        Ok(Self { lower, upper })
    }

    /// `[−h, h]^s`.
    pub fn cube(dim: usize, half_width: T) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn side(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).map(|i| self.side(i)).fold(T::one(), |a, b| a * b)
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }
}

/// Orthonormal product basis of `L²(O)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxBasis {
    /// `√(2/ℓ) sin(kπy/ℓ)`, `k ≥ 1`.
    Sine,
    /// `1/√ℓ` and `√(2/ℓ) cos(kπy/ℓ)`, `k ≥ 1`.
    Cosine,
    /// `√((2k+1)/ℓ) P_k(2y/ℓ − 1)`, `k ≥ 0`.
    Legendre,
}

impl BoxBasis {
    fn first_index(self) -> usize {
        match self {
            BoxBasis::Sine => 1,
            BoxBasis::Cosine | BoxBasis::Legendre => 0,
        }
    }

    /// One-dimensional basis function on `[0, ℓ]` at `y`.
    fn eval<T: Scalar>(self, k: usize, y: T, ell: T) -> T {
        let t = y / ell;
        match self {
            BoxBasis::Sine => (cst::<T>(2.0) / ell).sqrt() * (from_usize::<T>(k) * T::PI() * t).sin(),
            BoxBasis::Cosine if k == 0 => ell.sqrt().recip(),
            BoxBasis::Cosine => (cst::<T>(2.0) / ell).sqrt() * (from_usize::<T>(k) * T::PI() * t).cos(),
            BoxBasis::Legendre => {
                let u = cst::<T>(2.0) * t - T::one();
                let (mut p_prev, mut p) = (T::one(), u);
                if k == 0 {
                    p = T::one();
                } else {
                    for n in 1..k {
                        let nf = from_usize::<T>(n);
                        let next = ((cst::<T>(2.0) * nf + T::one()) * u * p - nf * p_prev) / (nf + T::one());
                        p_prev = p;
                        p = next;
                    }
                }
                (from_usize::<T>(2 * k + 1) / ell).sqrt() * p
            }
        }
    }

    /// `⟨u, g_k⟩` with `u = 1/√ℓ` the normalized constant.
    fn mean<T: Scalar>(self, k: usize) -> T {
        match self {
            BoxBasis::Sine if k % 2 == 1 => cst::<T>(2.0).sqrt() * cst::<T>(2.0) / (from_usize::<T>(k) * T::PI()),
            BoxBasis::Sine => T::zero(),
            _ if k == 0 => T::one(),
            _ => T::zero(),
        }
    }
}

fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < cst(1e-4) {
        let x2 = x * x;
        T::one() - x2 / cst(6.0) + x2 * x2 / cst(120.0)
    } else {
        x.sin() / x
    }
}

/// `∫_0^ℓ g_k(y) e^{−ipy} dy` with `q = pℓ`, for the sine and cosine bases.
///
/// With `a = kπ` and `δ = q − a` the common factor
/// `(1 − (−1)^k e^{−iq})/(a² − q²)` equals `−e^{−iq/2} s_k sinc(δ/2)/(a + q)`,
/// which stays finite at the resonance `q = a`.
fn trig_transform<T: Scalar>(basis: BoxBasis, k: usize, q: T, ell: T) -> Complex<T> {
    if q < T::zero() {
        return trig_transform(basis, k, -q, ell).conj();
    }
    let half = cis(-q / cst(2.0));
    if basis == BoxBasis::Cosine && k == 0 {
        return half * (ell.sqrt() * sinc(q / cst(2.0)));
    }
    let a = from_usize::<T>(k) * T::PI();
    let sign = |m: usize| if m.is_multiple_of(2) { T::one() } else { -T::one() };
    let s_k = if k.is_multiple_of(2) {
        Complex::new(T::zero(), sign(k / 2))
    } else {
        Complex::new(-sign((k - 1) / 2), T::zero())
    };
    let common = -half * s_k * (sinc((q - a) / cst(2.0)) / (a + q));
    let norm = (cst::<T>(2.0) / ell).sqrt() * ell;
    match basis {
        BoxBasis::Sine => common * (norm * a),
        _ => common * Complex::new(T::zero(), norm * q),
    }
}

/// Multi-indices ordered by total degree, then lexicographically.
pub fn basis_indices(dim: usize, count: usize, first: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, dim: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            fill(prefix, dim, left - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut degree = 0;
    while out.len() < count {
        let mut level = Vec::new();
        fill(&mut Vec::with_capacity(dim), dim, degree, &mut level);
        for idx in level {
            if out.len() == count {
                break;
            }
            out.push(idx.into_iter().map(|k| k + first).collect());
        }
        degree += 1;
    }
    out
}

/// Finite-evidence verdict on `lim_m S_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalVerdict {
    LocallyNormal,
    NotLocallyNormal,
    Inconclusive,
}

/// Partial sums `S_m = Σ_{j≤m} ω(a*(g_j)a(g_j))` over a box basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalNormalityReport<T: Scalar> {
    pub partial_sums: Vec<T>,
    /// Dimension of the divergent subspace projected out of the basis.
    pub removed_directions: usize,
    pub verdict: LocalVerdict,
}

impl<T: Scalar> LocalNormalityReport<T> {
    pub fn total(&self) -> T {
        self.partial_sums.last().copied().unwrap_or_else(T::zero)
    }
}

/// Tail-slope verdict on partial sums.
///
/// `NotLocallyNormal` if every last-quartile increment is at least
/// [`DIVERGENCE_FLOOR`]·`S_m`; `LocallyNormal` if the last quartile adds at
/// most [`CONVERGENCE_TAIL`]·`S_m`; otherwise `Inconclusive`.
pub fn tail_verdict<T: Scalar>(partial_sums: &[T]) -> LocalVerdict {
    let m = partial_sums.len();
    if m < 8 {
        return LocalVerdict::Inconclusive;
    }
    let total = partial_sums[m - 1];
    if total <= T::zero() {
        return LocalVerdict::LocallyNormal;
    }
    let start = 3 * m / 4;
    let min_increment = partial_sums[start..]
        .iter()
        .zip(&partial_sums[start - 1..])
        .map(|(b, a)| *b - *a)
        .fold(T::infinity(), |x, y| if y < x { y } else { x });
    if min_increment >= cst::<T>(DIVERGENCE_FLOOR) * total {
        LocalVerdict::NotLocallyNormal
    } else if total - partial_sums[start - 1] <= cst::<T>(CONVERGENCE_TAIL) * total {
        LocalVerdict::LocallyNormal
    } else {
        LocalVerdict::Inconclusive
    }
}

/// Partial sums of `ω(a*(g_j)a(g_j))` over the first `count` box-basis
/// functions, with a verdict on local normality.
///
/// Limit states assign infinite occupation to one direction of `L²(O)`: the
/// component along the trap ground state, or the zero-momentum component in
/// `s ≤ 2` free space. The sums run over the basis projected onto the regular
/// complement. The trapped condensate mode is outside the domain of the limit
/// state by construction, so its removal leaves the verdict to the sums; in
/// free space the divergent direction is the constant function of `L²(O)`
/// itself and the state is reported `NotLocallyNormal`.
pub fn local_normality_report<T: Scalar>(
    state: &Equilibrium<T>,
    region: &Region<T>,
    basis: BoxBasis,
    count: usize,
) -> Result<LocalNormalityReport<T>> {
    let model = state.model();
    if region.dim() != model.dim() {
        return Err(Error::DimensionMismatch(region.dim(), model.dim()));
    }
    if count == 0 {
        return Err(Error::invalid("basis size must be positive"));
    }
    let indices = basis_indices(region.dim(), count, basis.first_index());
    let (numbers, removed) = match model.kind() {
        ModelKind::HarmonicTrap { length } => {
            let skip_ground = state.limit_kind() == Some(LimitKind::TrapGround);
            (trap_numbers(state, length, region, basis, &indices, skip_ground)?, usize::from(skip_ground))
        }
        ModelKind::Free => {
            let project = state.limit_kind() == Some(LimitKind::FreeZeroMode) && region.dim() <= 2;
            (free_numbers(state, region, basis, &indices, project)?, usize::from(project))
        }
    };
    let mut partial_sums = Vec::with_capacity(numbers.len());
    let mut acc = T::zero();
    for n in numbers {
        acc += n;
        partial_sums.push(acc);
    }
    let verdict = if removed > 0 && state.limit_kind() == Some(LimitKind::FreeZeroMode) {
        LocalVerdict::NotLocallyNormal
    } else {
        tail_verdict(&partial_sums)
    };
    Ok(LocalNormalityReport {
        partial_sums,
        removed_directions: removed,
        verdict,
    })
}

fn bose<T: Scalar>(x: T) -> T {
    x.exp_m1().recip()
}

/// Levels per axis beyond which `β(ε − ε₁) ≥` [`OCCUPATION_CUTOFF`].
fn trap_levels<T: Scalar>(beta: T, length: T) -> usize {
    let gap = to_f64(cst::<T>(2.0) * beta / (length * length));
    (OCCUPATION_CUTOFF / gap).ceil() as usize + 1
}

/// Iterates over `[0, levels)^dim`.
fn for_each_index(dim: usize, levels: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; dim];
    loop {
        visit(&idx);
        let mut axis = dim;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < levels {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// `∫_a^b` by composite Gauss–Legendre with the given panel count.
fn box_nodes<T: Scalar>(a: T, b: T, panels: usize) -> (Vec<T>, Vec<T>) {
    let (xs, ws) = composite_legendre(to_f64(a), to_f64(b), panels, RADIAL_ORDER);
    (xs.into_iter().map(cst).collect(), ws.into_iter().map(cst).collect())
}

fn trap_numbers<T: Scalar>(
    state: &Equilibrium<T>,
    length: T,
    region: &Region<T>,
    basis: BoxBasis,
    indices: &[Vec<usize>],
    skip_ground: bool,
) -> Result<Vec<T>> {
    let beta = state.beta();
    let mu = state.mu();
    let model = state.model();
    let levels = trap_levels(beta, length);
    let kmax = indices.iter().flatten().copied().max().unwrap_or(0);
    // overlaps[axis][level][k] = ∫_O h_level g_k.
    let overlaps: Vec<Vec<Vec<T>>> = (0..region.dim())
        .map(|axis| {
            let (a, b) = (region.lower[axis], region.upper[axis]);
            let ell = b - a;
            let osc = to_f64(ell / length) * (levels as f64).sqrt() + kmax as f64;
            let (xs, ws) = box_nodes(a, b, 4 + osc.ceil() as usize);
            let mut table = vec![vec![T::zero(); kmax + 1]; levels];
            for (x, w) in xs.iter().zip(&ws) {
                let h = scaled_hermite_functions(levels - 1, *x, length);
                let g: Vec<T> = (0..=kmax).map(|k| basis.eval(k, *x - a, ell)).collect();
                for (row, hv) in table.iter_mut().zip(&h) {
                    for (cell, gv) in row.iter_mut().zip(&g) {
                        *cell += *w * *hv * *gv;
                    }
                }
            }
            table
        })
        .collect();
    let mut weights = Vec::new();
    let mut modes = Vec::new();
    let mut failure = None;
    for_each_index(region.dim(), levels, |k| {
        if skip_ground && k.iter().all(|&v| v == 0) {
            return;
        }
        match model.eigenvalue(k) {
            Ok(e) => {
                let x = beta * (e - mu);
                if x < cst(OCCUPATION_CUTOFF) {
                    weights.push(bose(x));
                    modes.push(k.to_vec());
                }
            }
            Err(err) => failure = Some(err),
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(indices
        .par_iter()
        .map(|j| {
            modes
                .iter()
                .zip(&weights)
                .map(|(k, w)| {
                    let amp = k
                        .iter()
                        .zip(j)
                        .enumerate()
                        .fold(T::one(), |acc, (axis, (&kl, &jl))| acc * overlaps[axis][kl][jl]);
                    *w * amp * amp
                })
                .sum()
        })
        .collect())
}

fn free_numbers<T: Scalar>(
    state: &Equilibrium<T>,
    region: &Region<T>,
    basis: BoxBasis,
    indices: &[Vec<usize>],
    project: bool,
) -> Result<Vec<T>> {
    let dim = region.dim();
    if dim > 3 {
        return Err(Error::Unsupported(format!(
            "momentum-space quadrature is implemented for s <= 3, got s = {dim}"
        )));
    }
    let beta = state.beta();
    let mu = state.mu();
    let p_max = (cst::<T>(OCCUPATION_CUTOFF) / beta + mu.max(T::zero())).sqrt();
    let ell_max = (0..dim).map(|i| region.side(i)).fold(T::zero(), |a, b| a.max(b));
    let reach = to_f64(p_max * ell_max).ceil() as usize;
    let (rs, rws) = composite_legendre(0.0, to_f64(p_max), 8 + reach, RADIAL_ORDER);
    let sphere = sphere_grid::<T>(dim, 16 + 2 * reach, 12 + reach)?;
    let kmax = indices.iter().flatten().copied().max().unwrap_or(0);
    let norm = T::TAU().powi(dim as i32).recip();
    let sides: Vec<T> = (0..dim).map(|i| region.side(i)).collect();

    let per_radius: Vec<Vec<T>> = rs
        .par_iter()
        .zip(&rws)
        .map(|(r, rw)| {
            let r: T = cst(*r);
            let occupation = bose(beta * (r * r - mu));
            let jac = r.powi(dim as i32 - 1) * cst(*rw) * norm * occupation;
            let mut out = vec![T::zero(); indices.len()];
            for node in &sphere {
                let qs: Vec<T> = node.direction.iter().zip(&sides).map(|(d, l)| r * *d * *l).collect();
                let w = jac * node.weight;
                match basis {
                    BoxBasis::Legendre => {
                        let tables: Vec<Vec<T>> = qs
                            .iter()
                            .zip(&sides)
                            .map(|(q, l)| {
                                spherical_bessel_squares(kmax, to_f64(*q / cst(2.0)))
                                    .into_iter()
                                    .enumerate()
                                    .map(|(k, v)| from_usize::<T>(2 * k + 1) * *l * cst(v))
                                    .collect()
                            })
                            .collect();
                        for (slot, j) in out.iter_mut().zip(indices) {
                            if project && j.iter().all(|&k| k == 0) {
                                continue;
                            }
                            let v = j.iter().enumerate().fold(T::one(), |acc, (axis, &k)| acc * tables[axis][k]);
                            *slot += w * v;
                        }
                    }
                    _ => {
                        let tables: Vec<Vec<Complex<T>>> = qs
                            .iter()
                            .zip(&sides)
                            .map(|(q, l)| (0..=kmax).map(|k| trig_transform(basis, k, *q, *l)).collect())
                            .collect();
                        let constant: Complex<T> = qs
                            .iter()
                            .zip(&sides)
                            .fold(Complex::new(T::one(), T::zero()), |acc, (q, l)| {
                                acc * trig_transform(BoxBasis::Cosine, 0, *q, *l)
                            });
                        for (slot, j) in out.iter_mut().zip(indices) {
                            let mut v = j
                                .iter()
                                .enumerate()
                                .fold(Complex::new(T::one(), T::zero()), |acc, (axis, &k)| acc * tables[axis][k]);
                            if project {
                                let mean = j.iter().fold(T::one(), |acc, &k| acc * basis.mean::<T>(k));
                                v -= constant * mean;
                            }
                            *slot += w * v.norm_sqr();
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut totals = vec![T::zero(); indices.len()];
    for row in per_radius {
        for (t, v) in totals.iter_mut().zip(row) {
            *t += v;
        }
    }
    Ok(totals)
}

/// Kernel of `e^{−τ(P² + Q²)}` on `ℝ^s`:
/// `Π_i (2π sinh 2τ)^{−1/2} e^{−(coth(2τ)(x_i² + y_i²) − 2x_i y_i / sinh 2τ)/2}`.
pub fn mehler_kernel<T: Scalar>(tau: T, x: &[T], y: &[T]) -> Result<T> {
    if !(tau > T::zero()) {
        return Err(Error::invalid(format!("Mehler kernel needs tau > 0, got {tau}")));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    let two_tau = cst::<T>(2.0) * tau;
    let sinh = two_tau.sinh();
    let coth = two_tau.tanh().recip();
    let mut exponent = T::zero();
    for (a, b) in x.iter().zip(y) {
        exponent += coth * (*a * *a + *b * *b) - cst::<T>(2.0) * *a * *b / sinh;
    }
    let pref = (T::TAU() * sinh).powf(-from_usize::<T>(x.len()) / cst(2.0));
    Ok(pref * (-exponent / cst(2.0)).exp())
}

/// `Tr e^{−τ(P² + Q²)} = (2 sinh τ)^{−s}`.
pub fn mehler_trace<T: Scalar>(tau: T, dim: usize) -> Result<T> {
    if !(tau > T::zero()) {
        return Err(Error::invalid(format!("Mehler trace needs tau > 0, got {tau}")));
    }
    Ok((cst::<T>(2.0) * tau.sinh()).powi(-(dim as i32)))
}

/// Critical density of the trapped gas (`L = 1`):
/// `π^{−s/2} Σ_{n≥1} ((1 − e^{−4nβ})^{−s/2} e^{(1 − tanh nβ)x²} − 1) e^{−x²}`.
///
/// Each term is evaluated as `e^{−x²} expm1(A + B)` with
/// `A = −(s/2) ln(1 − e^{−4nβ})` and `B = 2x²/(e^{2nβ} + 1)`.
pub fn critical_density_trap<T: Scalar>(beta: T, x: &[T]) -> Result<T> {
    if !(beta > T::zero() && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive and finite, got {beta}")));
    }
    if x.is_empty() {
        return Err(Error::invalid("position needs at least one coordinate"));
    }
    let s = from_usize::<T>(x.len());
    let r2: T = x.iter().map(|v| *v * *v).sum();
    let mut sum = T::zero();
    let mut n = 1usize;
    loop {
        let nb = from_usize::<T>(n) * beta;
        let a = -(s / cst(2.0)) * (-(-cst::<T>(4.0) * nb).exp()).ln_1p();
        let b = cst::<T>(2.0) * r2 / ((cst::<T>(2.0) * nb).exp() + T::one());
        let term = (a + b).exp_m1();
        sum += term;
        if n >= SERIES_MIN_TERMS && term.abs() <= cst::<T>(SERIES_RTOL) * sum.abs() {
            break;
        }
        if n > 100_000 {
            return Err(Error::not_converged("critical density series", to_f64(term), to_f64(sum)));
        }
        n += 1;
    }
    Ok(T::PI().powf(-s / cst(2.0)) * (-r2).exp() * sum)
}

/// Density values `(x, ρ(x))` of the trapped critical state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile<T: Scalar> {
    pub dim: usize,
    pub beta: T,
    pub points: Vec<(Vec<T>, T)>,
}

impl<T: Scalar> DensityProfile<T> {
    /// Evaluates [`critical_density_trap`] at every point, in input order.
    pub fn critical_trap(beta: T, points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("profile points must share one dimension"));
        }
        let values: Vec<T> = points
            .par_iter()
            .map(|x| critical_density_trap(beta, x))
            .collect::<Result<_>>()?;
        Ok(Self {
            dim,
            beta,
            points: points.into_iter().zip(values).collect(),
        })
    }

    /// `max |ρ(x) − ρ(−x)|` over the profile points.
    pub fn mirror_asymmetry(&self) -> Result<T> {
        let mut worst = T::zero();
        for (x, v) in &self.points {
            let mirrored: Vec<T> = x.iter().map(|c| -*c).collect();
            worst = worst.max((critical_density_trap(self.beta, &mirrored)? - *v).abs());
        }
        Ok(worst)
    }
}

/// Projected trace and its `O`-independent upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBound<T: Scalar> {
    /// `Σ_{k≠ground} (e^{β(ε_k − ε₁)} − 1)^{−1} ∫_O |e_k|²`.
    pub value: T,
    /// `2/(β(ε₂ − ε₁)) e^{βε₁/2} Tr e^{−βh/2}`.
    pub bound: T,
}

impl<T: Scalar> TraceBound<T> {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

/// Number of non-condensed particles in `O` for the trapped limit state,
/// against the bound from `(e^ε − 1)^{−1} ≤ e^{−ε/2}/(ε/2)`.
pub fn trap_number_bound<T: Scalar>(beta: T, length: T, region: &Region<T>) -> Result<TraceBound<T>> {
    let dim = region.dim();
    let model = HamiltonianModel::harmonic_trap(dim, length)?;
    if !(beta > T::zero() && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive and finite, got {beta}")));
    }
    let levels = trap_levels(beta, length);
    let reach = length * (from_usize::<T>(2 * levels + 1).sqrt() + cst(8.0));
    let masses: Vec<Vec<T>> = (0..dim)
        .map(|axis| {
            let a = region.lower[axis].max(-reach);
            let b = region.upper[axis].min(reach);
            let mut row = vec![T::zero(); levels];
            if a >= b {
                return row;
            }
            let osc = to_f64((b - a) / length) * (levels as f64).sqrt();
            let (xs, ws) = box_nodes(a, b, 4 + osc.ceil() as usize);
            for (x, w) in xs.iter().zip(&ws) {
                for (cell, h) in row.iter_mut().zip(scaled_hermite_functions(levels - 1, *x, length)) {
                    *cell += *w * h * h;
                }
            }
            row
        })
        .collect();
    let ground = model.ground_energy();
    let mut value = T::zero();
    let mut failure = None;
    for_each_index(dim, levels, |k| {
        if k.iter().all(|&v| v == 0) {
            return;
        }
        match model.eigenvalue(k) {
            Ok(e) => {
                let x = beta * (e - ground);
                if x < cst(OCCUPATION_CUTOFF) {
                    let mass = k.iter().enumerate().fold(T::one(), |acc, (axis, &l)| acc * masses[axis][l]);
                    value += bose(x) * mass;
                }
            }
            Err(err) => failure = Some(err),
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }
    let gap = model.excitation_gap()?;
    let half = beta / cst(2.0);
    let bound = cst::<T>(2.0) / (beta * gap) * (half * ground).exp() * partition_function(&model, half)?;
    Ok(TraceBound { value, bound })
}

/// Critical density `(2π)^{−s} ∫ dp (e^{βp²} − 1)^{−1}` of the free gas.
///
/// The radial integrand `p^{s−1}/(e^{βp²} − 1)` is written as
/// `p^{s−3} · βp²/expm1(βp²) / β`, which is smooth at `p = 0` for `s = 3`.
/// In `s ≤ 2` the integral diverges.
pub fn free_critical_density<T: Scalar>(beta: T, dim: usize) -> Result<T> {
    if !(beta > T::zero() && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive and finite, got {beta}")));
    }
    if dim <= 2 {
        return Err(Error::Divergent);
    }
    let s = from_usize::<T>(dim);
    let p_max = (cst::<T>(2.0 * OCCUPATION_CUTOFF) / beta).sqrt();
    let (xs, ws) = composite_legendre(0.0, to_f64(p_max), 40, RADIAL_ORDER);
    let mut radial = T::zero();
    for (x, w) in xs.iter().zip(&ws) {
        let p: T = cst(*x);
        let bp2 = beta * p * p;
        radial += cst::<T>(*w) * p.powi(dim as i32 - 3) * bp2 / bp2.exp_m1() / beta;
    }
    // |S^{s−1}| = 2π^{s/2}/Γ(s/2).
    let half = s / cst(2.0);
    let area = cst::<T>(2.0) * T::PI().powf(half) / half.ln_gamma().exp();
    Ok(area * radial / T::TAU().powf(s))
}

/// `J₀(|Σ_j u_j ⟨w, e^{it_j(h−μ)} f_j⟩|)` for the Weyl vector `w` of `shift`.
pub fn bessel_factor<T: Scalar>(
    form: &SesquiForm<T>,
    shift: &Shift<T>,
    word: &ResolventWord<T>,
    u: &[T],
) -> Result<T> {
    if u.len() != word.len() {
        return Err(Error::DimensionMismatch(u.len(), word.len()));
    }
    let mut z = Complex::new(T::zero(), T::zero());
    for ((_, f, t), uj) in word.factors().iter().zip(u) {
        z += form.pairing_at(shift.weyl(), f, *t)? * *uj;
    }
    Ok(z.norm().bessel_j0())
}

/// `(1/n) Σ_k e^{i Im(e^{iθ_k} z)}` with `θ_k = 2πk/n`, the trapezoid rule
/// for the phase average that equals `J₀(|z|)`.
pub fn phase_average<T: Scalar>(z: Complex<T>, phases: usize) -> Complex<T> {
    let n = phases.max(1);
    let mut acc = Complex::new(T::zero(), T::zero());
    for k in 0..n {
        let theta = T::TAU() * from_usize::<T>(k) / from_usize::<T>(n);
        acc += cis((cis(theta) * z).im);
    }
    acc / from_usize::<T>(n)
}

/// Averaged-state word expectation by two routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralCheck<T: Scalar> {
    /// Bessel factor inside the quadrature.
    pub bessel: Complex<T>,
    /// Gauge average of the unaveraged shifted expectation.
    pub phase_averaged: Complex<T>,
    pub deviation: T,
}

/// Compares the Bessel-averaged expectation of `word` with the average over
/// `phases` gauge rotations of the pure shifted state.
pub fn central_decomposition_check<T: Scalar>(
    form: &SesquiForm<T>,
    shift: &Shift<T>,
    word: &ResolventWord<T>,
    phases: usize,
) -> Result<CentralCheck<T>> {
    if phases == 0 {
        return Err(Error::invalid("phase count must be positive"));
    }
    let averaged = QuasifreeSpec::shifted(*form, shift.clone(), Averaging::Bessel);
    let pure = averaged.unaveraged();
    let bessel = resolvent_word_expectation(&averaged, word)?;
    let values: Vec<Complex<T>> = (0..phases)
        .into_par_iter()
        .map(|k| {
            let theta = T::TAU() * from_usize::<T>(k) / from_usize::<T>(phases);
            resolvent_word_expectation(&pure, &word.gauge_rotated(theta))
        })
        .collect::<Result<_>>()?;
    let phase_averaged = values.into_iter().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
        / from_usize::<T>(phases);
    Ok(CentralCheck {
        bessel,
        phase_averaged,
        deviation: (bessel - phase_averaged).norm(),
    })
}
