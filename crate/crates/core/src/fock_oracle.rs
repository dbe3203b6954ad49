//! Brute-force truncated Fock space on `M` modes with occupation cutoff
//! `n_max`: dense matrices for annihilators, fields, resolvents, Weyl
//! operators and Gibbs states, used as an independent oracle for the
//! quasifree formulas.
//!
//! A test function enters through its mode amplitudes `c_j = ⟨e_j, f⟩`, so
//! `a(f) = Σ c̄_j A_j`, `φ(f) = 2^{-1/2}(a(f) + a(f)*)` and
//! `⟨f, g⟩ = Σ c̄_j d_j`. Basis states are ordered with mode 0 most
//! significant, matching Kronecker products `X₀ ⊗ X₁ ⊗ ⋯`.
//!
//! Truncation distorts matrix elements next to the cutoff, so operator
//! identities are compared on the low-occupation block
//! `Σ_j n_j ≤ n_max / 5`.

use nalgebra::{DMatrix, RealField, SymmetricEigen};
use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::{cis, cst, from_usize, Scalar};

/// Default cap on `(n_max + 1)^M`.
pub const DIMENSION_CAP: usize = 4096;

/// Scalars usable for dense complex linear algebra.
pub trait OracleScalar: Scalar + RealField {}

impl<T: Scalar + RealField> OracleScalar for T {}

/// Mode amplitudes `c_j = ⟨e_j, f⟩`.
pub type ModeVector<T> = [Complex<T>];

/// Dense complex matrix.
pub type Matrix<T> = DMatrix<Complex<T>>;

/// `(λ, mode amplitudes, t)` for one resolvent in a product.
pub type ResolventFactor<T> = (Complex<T>, Vec<Complex<T>>, T);

/// Sign of the symplectic term in the commutation identities; `Flipped`
/// is a mutation hook that must make the identity checks fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymplecticSign {
    Correct,
    Flipped,
}

impl SymplecticSign {
    fn factor<T: Scalar>(self) -> T {
        match self {
            SymplecticSign::Correct => T::one(),
            SymplecticSign::Flipped => -T::one(),
        }
    }
}

/// `⟨c, d⟩ = Σ c̄_j d_j`.
pub fn mode_inner<T: Scalar>(c: &ModeVector<T>, d: &ModeVector<T>) -> Complex<T> {
    c.iter().zip(d).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
}

/// Fock space truncated to at most `n_max` quanta per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFock<T: OracleScalar> {
    n_max: usize,
    energies: Vec<T>,
    dim: usize,
}

/// Weyl-conjugated resolvent computed directly and by its Neumann series.
#[derive(Debug, Clone)]
pub struct NeumannComparison<T: OracleScalar> {
    pub direct: Matrix<T>,
    pub neumann: Matrix<T>,
    /// Max-norm difference on the low-occupation block.
    pub deviation: T,
}

impl<T: OracleScalar> TruncatedFock<T> {
    pub fn new(n_max: usize, energies: Vec<T>) -> Result<Self> {
        Self::with_cap(n_max, energies, DIMENSION_CAP)
    }

    pub fn with_cap(n_max: usize, energies: Vec<T>, cap: usize) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::invalid("at least one mode is required"));
        }
        if let Some(e) = energies.iter().find(|e| !(**e > T::zero()) || !Float::is_finite(**e)) {
            return Err(Error::invalid(format!("mode energies must be positive, got {e}")));
        }
        let dim = (n_max + 1)
            .checked_pow(energies.len() as u32)
            .filter(|d| *d <= cap)
            .ok_or(Error::DimensionCap(
                (n_max + 1).saturating_pow(energies.len() as u32),
                cap,
            ))?;
        Ok(Self { n_max, energies, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.energies.len()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    /// Occupation numbers of basis state `index`.
    pub fn occupations(&self, index: usize) -> Vec<usize> {
        let base = self.n_max + 1;
        let mut out = vec![0; self.modes()];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = rest % base;
            rest /= base;
        }
        out
    }

    pub fn total_occupation(&self, index: usize) -> usize {
        self.occupations(index).iter().sum()
    }

    /// Basis states with at most `max_total` quanta.
    pub fn block(&self, max_total: usize) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.total_occupation(i) <= max_total).collect()
    }

    /// Basis states with at most `n_max / 5` quanta.
    pub fn low_block(&self) -> Vec<usize> {
        self.block(self.n_max / 5)
    }

    fn check_modes(&self, c: &ModeVector<T>) -> Result<()> {
        if c.len() == self.modes() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(c.len(), self.modes()))
        }
    }

    fn stride(&self, mode: usize) -> usize {
        (self.n_max + 1).pow((self.modes() - 1 - mode) as u32)
    }

    /// Truncated annihilator `A_j`.
    pub fn annihilator(&self, mode: usize) -> Result<Matrix<T>> {
        if mode >= self.modes() {
            return Err(Error::invalid(format!("mode {mode} out of range")));
        }
        let stride = self.stride(mode);
        let mut m = Matrix::<T>::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let k = self.occupations(col)[mode];
            if k > 0 {
                m[(col - stride, col)] = Complex::new(Float::sqrt(from_usize::<T>(k)), T::zero());
            }
        }
        Ok(m)
    }

    /// `N_j`, diagonal.
    pub fn number(&self, mode: usize) -> Result<Matrix<T>> {
        if mode >= self.modes() {
            return Err(Error::invalid(format!("mode {mode} out of range")));
        }
        let diag = (0..self.dim).map(|i| Complex::new(from_usize::<T>(self.occupations(i)[mode]), T::zero()));
        Ok(Matrix::from_diagonal(&nalgebra::DVector::from_iterator(self.dim, diag)))
    }

    /// `a(f) = Σ c̄_j A_j`.
    pub fn annihilation(&self, c: &ModeVector<T>) -> Result<Matrix<T>> {
        self.check_modes(c)?;
        let mut m = Matrix::<T>::zeros(self.dim, self.dim);
        for (j, cj) in c.iter().enumerate() {
            if cj.norm_sqr() > T::zero() {
                m += self.annihilator(j)? * cj.conj();
            }
        }
        Ok(m)
    }

    /// `φ(f) = 2^{-1/2} Σ_j (c̄_j A_j + c_j A_j*)`.
    pub fn field(&self, c: &ModeVector<T>) -> Result<Matrix<T>> {
        let a = self.annihilation(c)?;
        let inv_sqrt2 = Complex::new(Float::sqrt(cst::<T>(0.5)), T::zero());
        Ok((&a + a.adjoint()) * inv_sqrt2)
    }

    /// `a(f)* a(f)`.
    pub fn number_of(&self, c: &ModeVector<T>) -> Result<Matrix<T>> {
        let a = self.annihilation(c)?;
        Ok(a.adjoint() * a)
    }

    /// `R(λ, f) = (iλ − φ(f))^{-1}`.
    pub fn resolvent(&self, lambda: Complex<T>, c: &ModeVector<T>) -> Result<Matrix<T>> {
        self.right_resolvent(Matrix::<T>::identity(self.dim, self.dim), lambda, c)
    }

    /// `M R(λ, f)` from the single-mode eigendecompositions of the
    /// Kronecker sum `φ(f) = Σ_j φ_j(c_j)`, avoiding dense inversion.
    fn right_resolvent(&self, m: Matrix<T>, lambda: Complex<T>, c: &ModeVector<T>) -> Result<Matrix<T>> {
        self.check_modes(c)?;
        if lambda.re == T::zero() {
            return Err(Error::invalid("resolvent needs Re λ ≠ 0"));
        }
        let single = self.single_mode();
        let mut vectors = Vec::with_capacity(c.len());
        let mut values = Vec::with_capacity(c.len());
        for cj in c {
            let eig = SymmetricEigen::new(single.field(&[*cj])?);
            values.push(eig.eigenvalues);
            vectors.push(eig.eigenvectors);
        }
        let i_lambda = Complex::new(T::zero(), T::one()) * lambda;
        let mut out = m;
        for (j, u) in vectors.iter().enumerate() {
            out = self.right_apply(&out, u, j);
        }
        for col in 0..self.dim {
            let level: T = self.occupations(col).iter().zip(&values).map(|(&k, v)| v[k]).sum();
            let scale = Complex::new(T::one(), T::zero()) / (i_lambda - Complex::new(level, T::zero()));
            out.column_mut(col).iter_mut().for_each(|v| *v *= scale);
        }
        for (j, u) in vectors.iter().enumerate() {
            out = self.right_apply(&out, &u.adjoint(), j);
        }
        Ok(out)
    }

    /// `M (I ⊗ ⋯ ⊗ u ⊗ ⋯ ⊗ I)` with `u` acting on mode `mode`.
    fn right_apply(&self, m: &Matrix<T>, u: &Matrix<T>, mode: usize) -> Matrix<T> {
        let stride = self.stride(mode);
        let base = self.n_max + 1;
        let mut out = Matrix::<T>::zeros(m.nrows(), self.dim);
        for col in 0..self.dim {
            let level = (col / stride) % base;
            let anchor = col - level * stride;
            let mut target = out.column_mut(col);
            for k in 0..base {
                target.axpy(u[(k, level)], &m.column(anchor + k * stride), Complex::new(T::one(), T::zero()));
            }
        }
        out
    }

    fn single_mode(&self) -> TruncatedFock<T> {
        TruncatedFock {
            n_max: self.n_max,
            energies: vec![T::one()],
            dim: self.n_max + 1,
        }
    }

    /// `W(f) = e^{iφ(f)}` as the Kronecker product of exact single-mode
    /// exponentials from Hermitian eigendecompositions.
    pub fn weyl(&self, c: &ModeVector<T>) -> Result<Matrix<T>> {
        self.check_modes(c)?;
        let single = self.single_mode();
        let mut out: Option<Matrix<T>> = None;
        for cj in c {
            let phi = single.field(&[*cj])?;
            let eig = SymmetricEigen::new(phi);
            let phases = eig.eigenvalues.map(|v| cis(v));
            let u = eig.eigenvectors;
            let w = &u * Matrix::<T>::from_diagonal(&phases) * u.adjoint();
            out = Some(match out {
                None => w,
                Some(acc) => acc.kronecker(&w),
            });
        }
        out.ok_or_else(|| Error::invalid("at least one mode is required"))
    }

    /// Diagonal of `e^{−β Σ_j (ε_j − μ) N_j} / Z`.
    pub fn gibbs_weights(&self, beta: T, mu: T) -> Result<Vec<T>> {
        let min = self.energies.iter().copied().fold(T::infinity(), |a, b| if b < a { b } else { a });
        if !(beta > T::zero()) || !(mu < min) {
            return Err(Error::invalid(format!(
                "Gibbs state needs beta > 0 and mu < min energy {min}, got beta = {beta}, mu = {mu}"
            )));
        }
        let energy = |i: usize| -> T {
            self.occupations(i)
                .iter()
                .zip(&self.energies)
                .map(|(&n, &e)| from_usize::<T>(n) * (e - mu))
                .sum()
        };
        let mut w: Vec<T> = (0..self.dim).map(|i| Float::exp(-beta * energy(i))).collect();
        let z: T = w.iter().copied().sum();
        for v in w.iter_mut() {
            *v /= z;
        }
        Ok(w)
    }

    /// `Tr ρ M` for the Gibbs state at `(β, μ)`.
    pub fn gibbs_expectation(&self, beta: T, mu: T, m: &Matrix<T>) -> Result<Complex<T>> {
        let w = self.gibbs_weights(beta, mu)?;
        Ok(w.iter()
            .enumerate()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (i, wi)| acc + m[(i, i)] * *wi))
    }

    /// `(1/n) Σ_k e^{imu_k} e^{iu_k N} M e^{−iu_k N}` with `u_k = 2πk/n`.
    pub fn gauge_average(&self, m: &Matrix<T>, harmonic: i64, n_phases: usize) -> Matrix<T> {
        let totals: Vec<i64> = (0..self.dim).map(|i| self.total_occupation(i) as i64).collect();
        let n = n_phases.max(1);
        let mut factors = std::collections::HashMap::new();
        Matrix::<T>::from_fn(self.dim, self.dim, |a, b| {
            let k = harmonic + totals[a] - totals[b];
            let avg = *factors.entry(k).or_insert_with(|| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for p in 0..n {
                    let u = T::TAU() * from_usize::<T>(p) / from_usize::<T>(n);
                    acc += cis(u * cst::<T>(k as f64));
                }
                acc / from_usize::<T>(n)
            });
            m[(a, b)] * avg
        })
    }

    /// `e^{itH} M e^{−itH}` with `H = Σ_j (ε_j − μ) N_j`.
    pub fn time_evolve(&self, m: &Matrix<T>, t: T, mu: T) -> Matrix<T> {
        let energy = self.level_energies(mu);
        Matrix::<T>::from_fn(self.dim, self.dim, |a, b| m[(a, b)] * cis(t * (energy[a] - energy[b])))
    }

    /// `ω(a*a (1 + ε a*a)^{-1}) = ω((1 − (1 + ε a*a)^{-1}) / ε)`.
    pub fn regularized_number_expectation(&self, beta: T, mu: T, c: &ModeVector<T>, eps: T) -> Result<T> {
        if !(eps > T::zero()) {
            return Err(Error::invalid("regularization parameter must be positive"));
        }
        let n = self.number_of(c)?;
        let id = Matrix::<T>::identity(self.dim, self.dim);
        let inv = (&id + n * Complex::new(eps, T::zero()))
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular regularized number operator"))?;
        let op = (id - inv) / Complex::new(eps, T::zero());
        Ok(self.gibbs_expectation(beta, mu, &op)?.re)
    }

    /// `ω((1 + a*(f)a(f))^{-1})`.
    pub fn inverse_number_expectation(&self, beta: T, mu: T, c: &ModeVector<T>) -> Result<T> {
        let n = self.number_of(c)?;
        let inv = (Matrix::<T>::identity(self.dim, self.dim) + n)
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular number operator"))?;
        Ok(self.gibbs_expectation(beta, mu, &inv)?.re)
    }

    /// Max-norm of `M` restricted to `rows × rows`.
    pub fn block_norm(&self, m: &Matrix<T>, rows: &[usize]) -> T {
        let mut worst = T::zero();
        for &a in rows {
            for &b in rows {
                let v = m[(a, b)].norm();
                if v > worst {
                    worst = v;
                }
            }
        }
        worst
    }

    /// `[R(λ,f), R(μ,g)] − s·iσ R(λ,f) R(μ,g)² R(λ,f)`, `σ = Im⟨f,g⟩`, on the low block.
    pub fn ccr_residual(
        &self,
        (lambda, c): (Complex<T>, &ModeVector<T>),
        (mu, d): (Complex<T>, &ModeVector<T>),
        sign: SymplecticSign,
    ) -> Result<T> {
        let rf = self.resolvent(lambda, c)?;
        let rg = self.resolvent(mu, d)?;
        let sigma = mode_inner(c, d).im * sign.factor::<T>();
        let comm = &rf * &rg - &rg * &rf;
        let rhs = &rf * &rg * &rg * &rf * Complex::new(T::zero(), sigma);
        Ok(self.block_norm(&(comm - rhs), &self.low_block()))
    }

    /// `W(f)W(g) − e^{−(i/2) s Im⟨f,g⟩} W(f+g)` on the low block.
    pub fn weyl_relation_residual(&self, c: &ModeVector<T>, d: &ModeVector<T>, sign: SymplecticSign) -> Result<T> {
        self.check_modes(d)?;
        let sum: Vec<Complex<T>> = c.iter().zip(d).map(|(a, b)| a + b).collect();
        let phase = cis(-mode_inner(c, d).im * sign.factor::<T>() / cst(2.0));
        let lhs = self.weyl(c)? * self.weyl(d)?;
        let rhs = self.weyl(&sum)? * phase;
        Ok(self.block_norm(&(lhs - rhs), &self.low_block()))
    }

    /// `W(e)* R(λ,f) W(e)` against `Σ_{n=1}^{N} l^{n−1} R(λ,f)^n`, `l = Im⟨e,f⟩`.
    ///
    /// The series converges when `|⟨e, f⟩| < |Re λ|`, which bounds `|l|` for
    /// every gauge rotation of `f`.
    pub fn weyl_conjugated_resolvent(
        &self,
        e: &ModeVector<T>,
        lambda: Complex<T>,
        c: &ModeVector<T>,
        terms: usize,
    ) -> Result<NeumannComparison<T>> {
        self.check_modes(e)?;
        let pairing = mode_inner(e, c);
        if !(pairing.norm() < Float::abs(lambda.re)) {
            return Err(Error::invalid(format!(
                "Neumann series needs |<e,f>| = {} < |Re λ| = {}",
                pairing.norm(),
                Float::abs(lambda.re)
            )));
        }
        let l = Complex::new(pairing.im, T::zero());
        let r = self.resolvent(lambda, c)?;
        let w = self.weyl(e)?;
        let direct = w.adjoint() * &r * &w;
        let mut neumann = Matrix::<T>::zeros(self.dim, self.dim);
        let mut power = r.clone();
        let mut coeff = Complex::new(T::one(), T::zero());
        for _ in 0..terms {
            neumann += &power * coeff;
            power = &power * &r;
            coeff *= l;
        }
        let deviation = self.block_norm(&(&direct - &neumann), &self.low_block());
        Ok(NeumannComparison {
            direct,
            neumann,
            deviation,
        })
    }

    /// Product `R(λ₁, f₁(t₁)) ⋯ R(λₙ, fₙ(tₙ))` with `f(t)` generated by
    /// `H = Σ_j (ε_j − μ) N_j`.
    pub fn resolvent_product(&self, factors: &[ResolventFactor<T>], mu: T) -> Result<Matrix<T>> {
        let energy = self.level_energies(mu);
        let mut out = Matrix::<T>::identity(self.dim, self.dim);
        for (lambda, c, t) in factors {
            // R(λ, f(t)) = V R(λ, f) V*, V = e^{itH} diagonal.
            if *t != T::zero() {
                scale_columns(&mut out, &energy, *t);
            }
            out = self.right_resolvent(out, *lambda, c)?;
            if *t != T::zero() {
                scale_columns(&mut out, &energy, -*t);
            }
        }
        Ok(out)
    }

    fn level_energies(&self, mu: T) -> Vec<T> {
        (0..self.dim)
            .map(|i| {
                self.occupations(i)
                    .iter()
                    .zip(&self.energies)
                    .map(|(&n, &e)| from_usize::<T>(n) * (e - mu))
                    .sum()
            })
            .collect()
    }
}

fn scale_columns<T: OracleScalar>(m: &mut Matrix<T>, energy: &[T], t: T) {
    for (col, e) in energy.iter().enumerate() {
        let phase = cis(t * *e);
        m.column_mut(col).iter_mut().for_each(|v| *v *= phase);
    }
}
