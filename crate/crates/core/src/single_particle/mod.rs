//! Single-particle layer: Hermite-coefficient test functions, the harmonic
//! trap and free Hamiltonians, inner products and domain classification.

mod kernel;
mod momentum;

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite;
use crate::scalar::{cis, cst, from_usize, to_f64, Scalar};
use crate::special::{hermite_polynomial_parts, scaled_hermite_functions};

pub use kernel::propagator;
pub(crate) use kernel::multi_sum;
pub(crate) use momentum::{radial_extent, radial_integral, radial_panels, sphere_grid};
pub use momentum::{sphere_rule, SphereNode};

/// Hermite multi-index `(n_1, …, n_s)`.
pub type MultiIndex = Vec<usize>;

/// Coefficients below this modulus are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Default Gauss–Hermite node count per axis for mixed-scale overlaps.
pub const DEFAULT_HERMITE_NODES: usize = 128;

/// Ground-overlap tolerance used by the trap classification.
pub const GROUND_OVERLAP_TOL: f64 = 1e-10;

/// Wave function `Σ_k c_k Π_a σ^{-1/2} h_{k_a}(x_a/σ)` on `ℝ^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T: Scalar> {
    dim: usize,
    scale: T,
    coeffs: BTreeMap<MultiIndex, Complex<T>>,
}

impl<T: Scalar> TestFunction<T> {
    /// The zero function in `dim` dimensions with basis scale `scale`.
    pub fn zero(dim: usize, scale: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::invalid(format!("basis scale must be positive, got {scale}")));
        }
        Ok(Self {
            dim,
            scale,
            coeffs: BTreeMap::new(),
        })
    }

    /// A single basis function.
    pub fn hermite(dim: usize, scale: T, index: &[usize]) -> Result<Self> {
        Self::from_coeffs(dim, scale, [(index.to_vec(), Complex::new(T::one(), T::zero()))])
    }

    /// The normalized Gaussian `h_0 ⊗ … ⊗ h_0` of width `scale`.
    pub fn gaussian(dim: usize, scale: T) -> Result<Self> {
        Self::hermite(dim, scale, &vec![0; dim])
    }

    /// Builds a function from `(multi-index, coefficient)` pairs; repeated
    /// indices are summed and negligible entries pruned.
    pub fn from_coeffs(
        dim: usize,
        scale: T,
        coeffs: impl IntoIterator<Item = (MultiIndex, Complex<T>)>,
    ) -> Result<Self> {
        let mut out = Self::zero(dim, scale)?;
        for (idx, c) in coeffs {
            if idx.len() != dim {
                return Err(Error::DimensionMismatch(idx.len(), dim));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::invalid("non-finite coefficient"));
            }
            *out.coeffs.entry(idx).or_insert(Complex::new(T::zero(), T::zero())) += c;
        }
        out.prune(cst(PRUNE_THRESHOLD));
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Complex<T>> {
        &self.coeffs
    }

    pub fn coeff(&self, idx: &[usize]) -> Complex<T> {
        self.coeffs
            .get(idx)
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `‖f‖²`, exact because the basis at a single scale is orthonormal.
    pub fn norm_sqr(&self) -> T {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Largest single-axis Hermite index.
    pub fn max_axis_degree(&self) -> usize {
        self.coeffs.keys().flat_map(|k| k.iter().copied()).max().unwrap_or(0)
    }

    /// Largest total degree `Σ_a n_a`.
    pub fn total_degree(&self) -> usize {
        self.coeffs.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    /// Drops coefficients with modulus below `threshold`.
    pub fn prune(&mut self, threshold: T) {
        self.coeffs.retain(|_, c| c.norm() >= threshold);
    }

    /// `a · f` for complex `a`.
    pub fn scaled(&self, a: Complex<T>) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= a;
        }
        out.prune(cst(PRUNE_THRESHOLD));
        out
    }

    /// `-f`.
    pub fn negated(&self) -> Self {
        self.scaled(Complex::new(-T::one(), T::zero()))
    }

    /// `f + g`; both must share dimension and basis scale.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch(to_f64(self.scale), to_f64(other.scale)));
        }
        Self::from_coeffs(
            self.dim,
            self.scale,
            self.coeffs
                .iter()
                .chain(other.coeffs.iter())
                .map(|(k, v)| (k.clone(), *v)),
        )
    }

    /// Position-space value `f(x)`.
    pub fn evaluate(&self, x: &[T]) -> Result<Complex<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(x.len(), self.dim));
        }
        let n = self.max_axis_degree();
        let axes: Vec<Vec<T>> = x
            .iter()
            .map(|&xa| scaled_hermite_functions(n, xa, self.scale))
            .collect();
        Ok(self.contract_real_axes(&axes))
    }

    /// Momentum-space value `f̃(p)` under the unitary Fourier transform,
    /// using `F[σ^{-1/2} h_n(·/σ)](p) = σ^{1/2} (-i)^n h_n(σ p)`.
    pub fn evaluate_momentum(&self, p: &[T]) -> Result<Complex<T>> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch(p.len(), self.dim));
        }
        Ok(self.momentum_with_tables(&self.momentum_axis_tables(p)))
    }

    pub(crate) fn momentum_axis_tables(&self, p: &[T]) -> Vec<Vec<T>> {
        let n = self.max_axis_degree();
        let inv = self.scale.recip();
        p.iter()
            .map(|&pa| scaled_hermite_functions(n, pa, inv))
            .collect()
    }

    /// Contracts per-axis real tables with the coefficients, inserting `(-i)^{Σn}`.
    pub(crate) fn momentum_with_tables(&self, axes: &[Vec<T>]) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (idx, c) in &self.coeffs {
            let mut v = T::one();
            for (a, &k) in idx.iter().enumerate() {
                v *= axes[a][k];
            }
            acc += *c * minus_i_pow(idx.iter().sum()) * v;
        }
        acc
    }

    fn contract_real_axes(&self, axes: &[Vec<T>]) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (idx, c) in &self.coeffs {
            let mut v = T::one();
            for (a, &k) in idx.iter().enumerate() {
                v *= axes[a][k];
            }
            acc += *c * v;
        }
        acc
    }
}

fn minus_i_pow<T: Scalar>(n: usize) -> Complex<T> {
    match n % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), -T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), T::one()),
    }
}

pub(crate) fn check_dims<T: Scalar>(f: &TestFunction<T>, g: &TestFunction<T>) -> Result<()> {
    if f.dim != g.dim {
        Err(Error::DimensionMismatch(f.dim, g.dim))
    } else {
        Ok(())
    }
}

/// Kind of single-particle Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind<T: Scalar> {
    /// `h_L = P² + L^{-4} Q²`, eigenvalues `(2|n| + s)/L²`.
    HarmonicTrap { length: T },
    /// `h_∞ = P²`.
    Free,
}

/// Single-particle Hamiltonian in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianModel<T: Scalar> {
    kind: ModelKind<T>,
    dim: usize,
}

impl<T: Scalar> HamiltonianModel<T> {
    pub fn harmonic_trap(dim: usize, length: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::invalid(format!("trap length must be positive, got {length}")));
        }
        Ok(Self {
            kind: ModelKind::HarmonicTrap { length },
            dim,
        })
    }

    pub fn free(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self {
            kind: ModelKind::Free,
            dim,
        })
    }

    pub fn kind(&self) -> ModelKind<T> {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Trap length, `None` for the free model.
    pub fn length(&self) -> Option<T> {
        match self.kind {
            ModelKind::HarmonicTrap { length } => Some(length),
            ModelKind::Free => None,
        }
    }

    pub fn is_trap(&self) -> bool {
        matches!(self.kind, ModelKind::HarmonicTrap { .. })
    }

    /// Bottom of the spectrum: `s/L²` for the trap, `0` for the free model.
    pub fn ground_energy(&self) -> T {
        match self.kind {
            ModelKind::HarmonicTrap { length } => from_usize::<T>(self.dim) / (length * length),
            ModelKind::Free => T::zero(),
        }
    }

    /// Trap eigenvalue `(2|n| + s)/L²` of the multi-index `n`.
    pub fn eigenvalue(&self, index: &[usize]) -> Result<T> {
        let length = self.require_trap()?;
        if index.len() != self.dim {
            return Err(Error::DimensionMismatch(index.len(), self.dim));
        }
        let total: usize = index.iter().sum();
        Ok(from_usize::<T>(2 * total + self.dim) / (length * length))
    }

    /// Spacing `ε_{L,2} − ε_{L,1} = 2/L²`.
    pub fn excitation_gap(&self) -> Result<T> {
        let length = self.require_trap()?;
        Ok(cst::<T>(2.0) / (length * length))
    }

    /// Trap eigenfunction with multi-index `index`.
    pub fn eigenfunction(&self, index: &[usize]) -> Result<TestFunction<T>> {
        let length = self.require_trap()?;
        TestFunction::hermite(self.dim, length, index)
    }

    /// Ground state `e_{L,1}`.
    pub fn ground_state(&self) -> Result<TestFunction<T>> {
        self.eigenfunction(&vec![0; self.dim])
    }

    pub(crate) fn require_trap(&self) -> Result<T> {
        self.length()
            .ok_or_else(|| Error::Unsupported("operation requires the harmonic trap".into()))
    }
}

/// Which boundary limit of the chemical potential is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    /// `μ ↗ ε_{L,1}` in the trap; the ground mode decouples.
    TrapGround,
    /// `μ ↗ 0` for the free gas; the regular space is the domain of `|P|^{-1}`.
    FreeZeroMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainStatus {
    Regular,
    Divergent,
}

/// Outcome of [`domain_classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainVerdict<T: Scalar> {
    pub status: DomainStatus,
    /// Ground-overlap modulus (trap) or accumulated `∫|f̃|²/p²` (free).
    pub diagnostic: T,
}

/// `⟨f, g⟩`, antilinear in `f`.
pub fn inner_product<T: Scalar>(f: &TestFunction<T>, g: &TestFunction<T>) -> Result<Complex<T>> {
    inner_product_with_nodes(f, g, DEFAULT_HERMITE_NODES)
}

/// `⟨f, g⟩` with an explicit Gauss–Hermite node count for mixed scales.
pub fn inner_product_with_nodes<T: Scalar>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    nodes: usize,
) -> Result<Complex<T>> {
    check_dims(f, g)?;
    if f.scale == g.scale {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, c) in &f.coeffs {
            if let Some(d) = g.coeffs.get(k) {
                acc += c.conj() * d;
            }
        }
        return Ok(acc);
    }
    let table = overlap_table(
        f.max_axis_degree(),
        g.max_axis_degree(),
        to_f64(f.scale),
        to_f64(g.scale),
        nodes,
    );
    let table: Vec<Vec<Complex<T>>> = table
        .into_iter()
        .map(|row| row.into_iter().map(|v| Complex::new(cst(v), T::zero())).collect())
        .collect();
    Ok(multi_sum(f, g, &table))
}

/// `O[m][l] = ∫ σ₁^{-1/2} h_m(x/σ₁) σ₂^{-1/2} h_l(x/σ₂) dx` by Gauss–Hermite
/// quadrature after the substitution that turns the product envelope into
/// `e^{-y²}`; exact for `m + l < 2 · nodes`.
pub(crate) fn overlap_table(m_max: usize, l_max: usize, s1: f64, s2: f64, nodes: usize) -> Vec<Vec<f64>> {
    let rule = gauss_hermite(nodes);
    let rho = (2.0 / (s1.powi(-2) + s2.powi(-2))).sqrt();
    let pref = rho / (s1 * s2).sqrt();
    let mut out = vec![vec![0.0; l_max + 1]; m_max + 1];
    for (y, w) in rule.nodes.iter().zip(&rule.weights) {
        let a = hermite_polynomial_parts(m_max, rho * y / s1);
        let b = hermite_polynomial_parts(l_max, rho * y / s2);
        for (m, am) in a.iter().enumerate() {
            let wa = w * am;
            for (l, bl) in b.iter().enumerate() {
                out[m][l] += wa * bl;
            }
        }
    }
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= pref;
        }
    }
    out
}

/// Multiplies every coefficient by `e^{iu}`.
pub fn gauge_rotate<T: Scalar>(f: &TestFunction<T>, u: T) -> TestFunction<T> {
    f.scaled(cis(u))
}

/// `Tr e^{-βh_L} = (2 sinh(β/L²))^{-s}`.
pub fn partition_function<T: Scalar>(model: &HamiltonianModel<T>, beta: T) -> Result<T> {
    let length = model.require_trap()?;
    if !(beta > T::zero()) {
        return Err(Error::invalid("beta must be positive"));
    }
    let x = beta / (length * length);
    let ln_value = -from_usize::<T>(model.dim) * (cst::<T>(2.0) * x.sinh()).ln();
    if !(ln_value < T::max_value().ln()) {
        return Err(Error::DivergentScale(to_f64(x)));
    }
    Ok(ln_value.exp())
}

/// Partition function from the first `levels` eigenvalues per axis.
pub fn partition_function_truncated<T: Scalar>(
    model: &HamiltonianModel<T>,
    beta: T,
    levels: usize,
) -> Result<T> {
    let length = model.require_trap()?;
    let x = beta / (length * length);
    let mut axis = T::zero();
    for n in 0..levels {
        axis += (-x * from_usize::<T>(2 * n + 1)).exp();
    }
    Ok(axis.powi(model.dim as i32))
}

/// `(1 − E_{L,1}) f`.
pub fn project_out_ground<T: Scalar>(
    model: &HamiltonianModel<T>,
    f: &TestFunction<T>,
) -> Result<TestFunction<T>> {
    let ground = model.ground_state()?;
    if f.dim != model.dim {
        return Err(Error::DimensionMismatch(f.dim, model.dim));
    }
    if f.scale == ground.scale {
        let mut out = f.clone();
        out.coeffs.remove(&vec![0; f.dim]);
        return Ok(out);
    }
    // Mixed scales: the ground state is not a basis element of f's expansion,
    // so re-express it at f's scale (exactly, up to the degree it needs) and subtract.
    let overlap = inner_product(&ground, f)?;
    let expanded = expand_in_scale(&ground, f.scale)?;
    f.try_add(&expanded.scaled(-overlap))
}

/// Re-expands `f` in the Hermite basis of another scale, truncating once the
/// per-axis completeness residual falls below `1e-13`.
pub fn expand_in_scale<T: Scalar>(f: &TestFunction<T>, scale: T) -> Result<TestFunction<T>> {
    if scale == f.scale {
        return Ok(f.clone());
    }
    let m_max = f.max_axis_degree();
    let s_from = to_f64(f.scale);
    let s_to = to_f64(scale);
    let mut k_max = 8 + 2 * m_max;
    let table = loop {
        let nodes = (k_max + m_max) / 2 + 16;
        let t = overlap_table(k_max, m_max, s_to, s_from, nodes.max(DEFAULT_HERMITE_NODES));
        let worst = (0..=m_max)
            .map(|m| 1.0 - t.iter().map(|row| row[m] * row[m]).sum::<f64>())
            .fold(0.0_f64, f64::max);
        if worst < 1e-13 {
            break t;
        }
        if k_max > 400 {
            return Err(Error::not_converged("scale re-expansion", worst, f64::NAN));
        }
        k_max *= 2;
    };
    let mut coeffs: BTreeMap<MultiIndex, Complex<T>> = BTreeMap::new();
    let dim = f.dim;
    for (idx, c) in &f.coeffs {
        // Tensor product of axis expansions.
        let mut partial: Vec<(MultiIndex, f64)> = vec![(Vec::with_capacity(dim), 1.0)];
        for &m in idx {
            let mut next = Vec::new();
            for (prefix, w) in &partial {
                for (k, row) in table.iter().enumerate() {
                    let v = w * row[m];
                    if v.abs() >= PRUNE_THRESHOLD * 1e-2 {
                        let mut p = prefix.clone();
                        p.push(k);
                        next.push((p, v));
                    }
                }
            }
            partial = next;
        }
        for (k, w) in partial {
            *coeffs.entry(k).or_insert(Complex::new(T::zero(), T::zero())) += *c * cst::<T>(w);
        }
    }
    TestFunction::from_coeffs(dim, scale, coeffs)
}

/// Regular/divergent classification for the boundary limits.
///
/// `TrapGround`: divergent iff `|⟨e_{L,1}, f⟩| > 1e-10`.
///
/// `FreeZeroMode`: `∫ |f̃(p)|²/p² dp` is accumulated over radial shells
/// `[r₀ 2^{-k}, r₀ 2^{1-k}]`, `k = 1..12`. The function is divergent if the
/// last shell increment exceeds ten times the first, if the total exceeds
/// `1e6`, or if the increments stop decaying (last ≥ 0.75 × previous), which
/// is the logarithmic divergence of a nonzero `f̃(0)` in two dimensions.
pub fn domain_classify<T: Scalar>(
    model: &HamiltonianModel<T>,
    kind: LimitKind,
    f: &TestFunction<T>,
) -> Result<DomainVerdict<T>> {
    if f.dim != model.dim {
        return Err(Error::DimensionMismatch(f.dim, model.dim));
    }
    if f.is_zero() {
        return Err(Error::ZeroFunction);
    }
    match (kind, model.kind) {
        (LimitKind::TrapGround, ModelKind::HarmonicTrap { .. }) => {
            let overlap = inner_product(&model.ground_state()?, f)?.norm();
            let status = if overlap > cst(GROUND_OVERLAP_TOL) {
                DomainStatus::Divergent
            } else {
                DomainStatus::Regular
            };
            Ok(DomainVerdict {
                status,
                diagnostic: overlap,
            })
        }
        (LimitKind::FreeZeroMode, ModelKind::Free) => classify_zero_mode(f),
        _ => Err(Error::Unsupported(
            "limit kind does not match the model (TrapGround needs the trap, FreeZeroMode the free model)".into(),
        )),
    }
}

fn classify_zero_mode<T: Scalar>(f: &TestFunction<T>) -> Result<DomainVerdict<T>> {
    const STAGES: usize = 12;
    let r0 = f.scale.recip();
    let weights = |_: T| (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()));
    // r^{s-1} · r^{-2} · A(r), with the r^{s-1} supplied by the radial integral.
    let inv_sq = |r: T, w: (Complex<T>, Complex<T>)| (w.0 / (r * r), w.1);
    let mut increments = Vec::with_capacity(STAGES);
    let mut hi = r0;
    for _ in 0..STAGES {
        let lo = hi / cst(2.0);
        let v = radial_integral(f, f, lo, hi, 2, 16, |r| inv_sq(r, weights(r)))?.re;
        increments.push(v);
        hi = lo;
    }
    let outer = radial_integral(f, f, r0, momentum::radial_extent(f, f), 8, 24, |r| {
        inv_sq(r, weights(r))
    })?
    .re;
    let total = outer + increments.iter().copied().sum::<T>();
    let first = increments[0];
    let last = increments[STAGES - 1];
    let prev = increments[STAGES - 2];
    let tiny = cst::<T>(1e-300);
    let growing = last > cst::<T>(10.0) * first;
    let stalled = last > tiny && last >= cst::<T>(0.75) * prev;
    let huge = total > cst(1e6);
    let status = if growing || stalled || huge {
        DomainStatus::Divergent
    } else {
        DomainStatus::Regular
    };
    // Geometric tail for the unresolved ball around the origin.
    let tail = if status == DomainStatus::Regular && prev > tiny {
        let ratio = last / prev;
        last * ratio / (T::one() - ratio)
    } else {
        T::zero()
    };
    Ok(DomainVerdict {
        status,
        diagnostic: total + tail,
    })
}

#[cfg(test)]
mod tests;
