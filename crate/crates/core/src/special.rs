//! Special functions: Hermite functions, spherical Bessel squares, log-factorials.

use crate::scalar::{cst, from_usize, Scalar};

/// Normalized Hermite functions `h_0(y) … h_n(y)` with `∫ h_m h_k dy = δ_mk`.
pub fn hermite_functions<T: Scalar>(n: usize, y: T) -> Vec<T> {
    let mut out = hermite_polynomial_parts(n, y);
    let env = (-y * y / cst(2.0)).exp();
    for v in out.iter_mut() {
        *v *= env;
    }
    out
}

/// `h_k(y) e^{y²/2}`: the polynomial factor of each normalized Hermite function.
///
/// Gauss–Hermite quadrature of products of Hermite functions integrates these
/// factors exactly, so they are exposed separately.
pub fn hermite_polynomial_parts<T: Scalar>(n: usize, y: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let p0 = T::PI().powf(cst(-0.25));
    out.push(p0);
    if n == 0 {
        return out;
    }
    let two: T = cst(2.0);
    out.push((two).sqrt() * y * p0);
    for k in 1..n {
        let kf: T = from_usize(k);
        let next = (two / (kf + T::one())).sqrt() * y * out[k]
            - (kf / (kf + T::one())).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Hermite function of width `scale`: `σ^{-1/2} h_k(x/σ)` for `k = 0..=n`.
pub fn scaled_hermite_functions<T: Scalar>(n: usize, x: T, scale: T) -> Vec<T> {
    let norm = scale.sqrt().recip();
    hermite_functions(n, x / scale)
        .into_iter()
        .map(|v| v * norm)
        .collect()
}

/// `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Squares `j_l(x)²` of the spherical Bessel functions for `l = 0..=lmax`.
///
/// Miller's backward recurrence normalized by the sum rule
/// `Σ_l (2l+1) j_l(x)² = 1`, which avoids the sign ambiguity of
/// normalizing against `sin x / x` near its zeros.
pub fn spherical_bessel_squares(lmax: usize, x: f64) -> Vec<f64> {
    let x = x.abs();
    if x < 1e-8 {
        let mut out = vec![0.0; lmax + 1];
        out[0] = 1.0;
        return out;
    }
    let start = lmax + 30 + (x as usize) * 2;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for l in (1..=start).rev() {
        vals[l - 1] = (2.0 * l as f64 + 1.0) / x * vals[l] - vals[l + 1];
        if vals[l - 1].abs() > 1e100 {
            for v in vals[l - 1..=start].iter_mut() {
                *v *= 1e-100;
            }
        }
    }
    let peak = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for v in vals.iter_mut() {
        *v /= peak;
    }
    let mut sum = 0.0;
    for (l, v) in vals.iter().enumerate().take(start + 1) {
        sum += (2.0 * l as f64 + 1.0) * v * v;
    }
    vals.truncate(lmax + 1);
    vals.into_iter().map(|v| v * v / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_hermite;

    #[test]
    fn hermite_functions_are_orthonormal() {
        let rule = gauss_hermite(64);
        let n = 8;
        let mut gram = vec![vec![0.0; n + 1]; n + 1];
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let p = hermite_polynomial_parts(n, *x);
            for i in 0..=n {
                for j in 0..=n {
                    gram[i][j] += w * p[i] * p[j];
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-12, "({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn ground_state_closed_form() {
        let h = hermite_functions(1, 0.7_f64);
        let g = std::f64::consts::PI.powf(-0.25) * (-0.245_f64).exp();
        assert!((h[0] - g).abs() < 1e-15);
        assert!((h[1] - 2f64.sqrt() * 0.7 * g).abs() < 1e-15);
    }

    #[test]
    fn spherical_bessel_matches_closed_forms() {
        for &x in &[0.01, 0.5, 3.0, 7.0, 20.0] {
            let v = spherical_bessel_squares(3, x);
            let j0 = f64::sin(x) / x;
            let j1 = f64::sin(x) / (x * x) - f64::cos(x) / x;
            let j2 = (3.0 / (x * x) - 1.0) * f64::sin(x) / x - 3.0 * f64::cos(x) / (x * x);
            assert!((v[0] - j0 * j0).abs() < 1e-13, "x={x} {} {}", v[0], j0 * j0);
            assert!((v[1] - j1 * j1).abs() < 1e-13, "x={x}");
            assert!((v[2] - j2 * j2).abs() < 1e-12, "x={x}");
        }
    }
}
