//! Momentum-space quadrature for the free model.
//!
//! Integrals `∫ dp w(|p|) conj(f̃(p)) g̃(p)` are split into an angular average
//! at fixed radius and a composite Gauss–Legendre radial integral. For Hermite
//! test functions `conj(f̃) g̃` is a polynomial times a radial Gaussian, so the
//! angular rules below are exact once they resolve the polynomial degree.

use num_complex::Complex;

use super::{check_dims, TestFunction};
use crate::error::{Error, Result};
use crate::quadrature::{composite_legendre, gauss_legendre};
use crate::scalar::{cst, from_usize, to_f64, Scalar};

/// Direction on the unit sphere with its quadrature weight.
#[derive(Debug, Clone)]
pub struct SphereNode<T> {
    pub direction: Vec<T>,
    pub weight: T,
}

/// Angular rule on `S^{s-1}` exact for polynomials of degree `degree`.
///
/// `s = 1` uses the two points `±1`; `s = 2` the trapezoid rule in the angle;
/// `s = 3` the trapezoid rule in the azimuth times Gauss–Legendre in `cos θ`.
pub fn sphere_rule<T: Scalar>(dim: usize, degree: usize) -> Result<Vec<SphereNode<T>>> {
    sphere_grid(dim, degree + 2, degree / 2 + 2)
}

pub(crate) fn sphere_grid<T: Scalar>(dim: usize, n_phi: usize, n_u: usize) -> Result<Vec<SphereNode<T>>> {
    match dim {
        1 => Ok(vec![
            SphereNode {
                direction: vec![T::one()],
                weight: T::one(),
            },
            SphereNode {
                direction: vec![-T::one()],
                weight: T::one(),
            },
        ]),
        2 => {
            let w = T::TAU() / from_usize(n_phi);
            Ok((0..n_phi)
                .map(|k| {
                    let phi = T::TAU() * from_usize(k) / from_usize(n_phi);
                    SphereNode {
                        direction: vec![phi.cos(), phi.sin()],
                        weight: w,
                    }
                })
                .collect())
        }
        3 => {
            let rule = gauss_legendre(n_u);
            let wphi = T::TAU() / from_usize(n_phi);
            let mut out = Vec::with_capacity(n_phi * n_u);
            for (u, wu) in rule.nodes.iter().zip(&rule.weights) {
                let u: T = cst(*u);
                let sin_t = (T::one() - u * u).sqrt();
                for k in 0..n_phi {
                    let phi = T::TAU() * from_usize(k) / from_usize(n_phi);
                    out.push(SphereNode {
                        direction: vec![sin_t * phi.cos(), sin_t * phi.sin(), u],
                        weight: wphi * cst(*wu),
                    });
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!(
            "momentum-space quadrature is implemented for s <= 3, got s = {dim}"
        ))),
    }
}

/// Radius beyond which `conj(f̃) g̃` is negligible (below ~e^{-40} of its peak).
pub(crate) fn radial_extent<T: Scalar>(f: &TestFunction<T>, g: &TestFunction<T>) -> T {
    let sf = f.scale();
    let sg = g.scale();
    let eff = ((sf * sf + sg * sg) / cst(2.0)).sqrt();
    let d = f.total_degree().max(g.total_degree());
    (cst::<T>(8.0) + cst::<T>(1.5) * from_usize::<T>(2 * d + 1).sqrt()) / eff
}

/// Panel count for an integrand oscillating like `e^{itr²}` up to `r_max`.
pub(crate) fn radial_panels<T: Scalar>(r_max: T, t: T) -> usize {
    let osc = to_f64(t.abs() * r_max * r_max) / std::f64::consts::TAU;
    8 + osc.ceil() as usize
}

/// `A(r) = ∫_{S^{s-1}} conj(f̃(rω)) g̃(rω) dω`.
pub(crate) fn angular_product<T: Scalar>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    r: T,
    rule: &[SphereNode<T>],
) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut p = vec![T::zero(); f.dim()];
    for node in rule {
        for (pa, da) in p.iter_mut().zip(&node.direction) {
            *pa = r * *da;
        }
        let fv = f.momentum_with_tables(&f.momentum_axis_tables(&p));
        let gv = g.momentum_with_tables(&g.momentum_axis_tables(&p));
        acc += fv.conj() * gv * node.weight;
    }
    acc
}

/// Marker for the weight convention of [`radial_integral`]: the closure
/// returns `(w₁(r), w₂(r))` and the integrand is `r^{s-1}[w₁ A(r) + w₂ conj A(r)]`.
pub(crate) type RadialWeights<T> = (Complex<T>, Complex<T>);

/// `∫_lo^hi r^{s-1} [w₁(r) A(r) + w₂(r) conj(A(r))] dr` by composite Gauss–Legendre.
pub(crate) fn radial_integral<T: Scalar>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    lo: T,
    hi: T,
    panels: usize,
    order: usize,
    weights: impl Fn(T) -> RadialWeights<T>,
) -> Result<Complex<T>> {
    check_dims(f, g)?;
    let rule = sphere_rule::<T>(f.dim(), f.total_degree() + g.total_degree())?;
    let (xs, ws) = composite_legendre(to_f64(lo), to_f64(hi), panels, order);
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, w) in xs.iter().zip(&ws) {
        let r: T = cst(*x);
        let (w1, w2) = weights(r);
        if w1.norm_sqr() == T::zero() && w2.norm_sqr() == T::zero() {
            continue;
        }
        let a = angular_product(f, g, r, &rule);
        let jac = r.powi(f.dim() as i32 - 1) * cst(*w);
        acc += (w1 * a + w2 * a.conj()) * jac;
    }
    Ok(acc)
}
