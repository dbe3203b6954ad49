//! Gaussian quadrature rules, generated in double precision and cached.
//!
//! Legendre nodes come from Newton iteration on the three-term recurrence.
//! Hermite and Laguerre nodes start from the eigenvalues of the Jacobi
//! matrix (Golub–Welsch) and are polished by Newton steps; weights are
//! Christoffel numbers `1 / Σ_k p_k(x)²` over the orthonormal polynomials,
//! accumulated with rescaling so that 256-point Laguerre rules do not overflow.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes, weights and log-weights of a rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `ln w_i`, finite even where `w_i` underflows.
    pub ln_weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Legendre,
    Hermite,
    Laguerre,
}

type RuleCache = Mutex<HashMap<(Family, usize), Arc<Rule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(family: Family, n: usize, build: fn(usize) -> Rule) -> Arc<Rule> {
    assert!(n >= 1, "quadrature rule needs at least one node");
    if let Some(rule) = cache().lock().expect("rule cache poisoned").get(&(family, n)) {
        return rule.clone();
    }
    let rule = Arc::new(build(n));
    cache()
        .lock()
        .expect("rule cache poisoned")
        .entry((family, n))
        .or_insert(rule)
        .clone()
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    cached(Family::Legendre, n, build_legendre)
}

/// Gauss–Hermite rule for the weight `e^{-x²}` on the real line.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    cached(Family::Hermite, n, build_hermite)
}

/// Gauss–Laguerre rule for the weight `e^{-x}` on `[0, ∞)`.
pub fn gauss_laguerre(n: usize) -> Arc<Rule> {
    cached(Family::Laguerre, n, build_laguerre)
}

fn build_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let ln_weights = weights.iter().map(|w| w.ln()).collect();
    Rule {
        nodes,
        weights,
        ln_weights,
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Orthonormal three-term recurrence `x p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}`.
struct Recurrence {
    a: fn(usize) -> f64,
    b: fn(usize) -> f64,
    p0: f64,
}

const HERMITE: Recurrence = Recurrence {
    a: |_| 0.0,
    b: |k| (k as f64 / 2.0).sqrt(),
    p0: 0.751_125_544_464_942_5, // π^{-1/4}
};

const LAGUERRE: Recurrence = Recurrence {
    a: |k| 2.0 * k as f64 + 1.0,
    b: |k| k as f64,
    p0: 1.0,
};

fn build_hermite(n: usize) -> Rule {
    build_from_recurrence(n, &HERMITE)
}

fn build_laguerre(n: usize) -> Rule {
    build_from_recurrence(n, &LAGUERRE)
}

const RESCALE: f64 = 1e150;

fn build_from_recurrence(n: usize, rec: &Recurrence) -> Rule {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = (rec.a)(k);
        if k + 1 < n {
            let b = (rec.b)(k + 1);
            jacobi[(k, k + 1)] = b;
            jacobi[(k + 1, k)] = b;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, d) = orthonormal_with_derivative(n, *x, rec);
            if d == 0.0 || !d.is_finite() {
                break;
            }
            let dx = p / d;
            *x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    let ln_weights: Vec<f64> = nodes.iter().map(|&x| -ln_christoffel_sum(n, x, rec)).collect();
    let weights = ln_weights.iter().map(|l| l.exp()).collect();
    Rule {
        nodes,
        weights,
        ln_weights,
    }
}

/// Returns `(p_n(x), p_n'(x))` up to a common positive factor.
fn orthonormal_with_derivative(n: usize, x: f64, rec: &Recurrence) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut p = rec.p0;
    let mut d_prev = 0.0;
    let mut d = 0.0;
    for k in 0..n {
        let b_next = (rec.b)(k + 1);
        let b_k = (rec.b)(k);
        let a_k = (rec.a)(k);
        let p_next = ((x - a_k) * p - b_k * p_prev) / b_next;
        let d_next = ((x - a_k) * d + p - b_k * d_prev) / b_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        let scale = p.abs().max(d.abs());
        if scale > RESCALE {
            p /= RESCALE;
            p_prev /= RESCALE;
            d /= RESCALE;
            d_prev /= RESCALE;
        }
    }
    (p, d)
}

/// `ln Σ_{k<n} p_k(x)²`.
fn ln_christoffel_sum(n: usize, x: f64, rec: &Recurrence) -> f64 {
    let mut p_prev = 0.0;
    let mut p = rec.p0;
    let mut sum = p * p;
    let mut ln_scale = 0.0;
    for k in 0..n.saturating_sub(1) {
        let b_next = (rec.b)(k + 1);
        let p_next = ((x - (rec.a)(k)) * p - (rec.b)(k) * p_prev) / b_next;
        p_prev = p;
        p = p_next;
        sum += p * p;
        if p.abs() > RESCALE {
            p /= RESCALE;
            p_prev /= RESCALE;
            sum /= RESCALE * RESCALE;
            ln_scale += 2.0 * RESCALE.ln();
        }
    }
    sum.ln() + ln_scale
}

/// Composite Gauss–Legendre nodes and weights on `[a, b]`.
pub fn composite_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(order);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(mid + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(10);
        for deg in 0..20 {
            let q: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn hermite_moments() {
        for n in [1, 5, 32, 128] {
            let rule = gauss_hermite(n);
            let m0: f64 = rule.weights.iter().sum();
            assert!((m0 - PI.sqrt()).abs() < 1e-13, "n={n}: {m0}");
            let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x * x).sum();
            if n >= 2 {
                assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn laguerre_moments_up_to_large_rules() {
        for n in [1, 8, 32, 64, 128, 256] {
            let rule = gauss_laguerre(n);
            let mut fact = 1.0;
            for k in 0..6.min(2 * n) {
                if k > 0 {
                    fact *= k as f64;
                }
                let m: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert!((m / fact - 1.0).abs() < 1e-12, "n={n} k={k}: {m}");
            }
            assert!(rule.ln_weights.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn composite_rule_covers_interval() {
        let (x, w) = composite_legendre(0.0, 3.0, 4, 8);
        assert_eq!(x.len(), 32);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((int - (3f64.exp() - 1.0)).abs() < 1e-12);
    }
}
