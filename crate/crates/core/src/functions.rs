//! Smooth test functions with exact derivatives.
//!
//! Generator evaluations need `f`, its gradient and Hessian (and for the
//! Taylor checks, third derivatives). Polynomials and smooth bumps cover
//! every use here.

use crate::prelude::*;

pub trait TestFunction {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `d×d` Hessian.
    fn hessian(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `d×d×d` third-derivative tensor. Returns `false` when the
    /// function does not provide one.
    fn third(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Multivariate polynomial `Σ c · Π x_i^{a_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, a)| a.len() == dim), "exponent length must equal dim");
        Self { dim, terms }
    }

    /// `c_0 + c_1 x + c_2 x² + …` in one variable.
    pub fn univariate(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| (*c, vec![k as u32]))
            .collect();
        Self { dim: 1, terms }
    }

    pub fn monomial(powers: &[u32]) -> Self {
        Self { dim: powers.len(), terms: vec![(1.0, powers.to_vec())] }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self { dim, terms: vec![(c, vec![0; dim])] }
    }

    /// `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut a = vec![0; dim];
        a[i] = 1;
        Self::monomial(&a)
    }

    /// `|x|²`.
    pub fn squared_norm(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|i| {
                let mut a = vec![0; dim];
                a[i] = 2;
                (1.0, a)
            })
            .collect();
        Self { dim, terms }
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, a)| a.iter().sum()).max().unwrap_or(0)
    }

    /// Mixed partial derivative `∂^orders p(x)`.
    pub fn partial(&self, x: &[f64], orders: &[u32]) -> f64 {
        let mut total = 0.0;
        'terms: for (c, powers) in &self.terms {
            let mut v = *c;
            for i in 0..self.dim {
                let (a, k) = (powers[i], orders[i]);
                if k > a {
                    continue 'terms;
                }
                for j in 0..k {
                    v *= (a - j) as f64;
                }
                v *= x[i].powi((a - k) as i32);
            }
            total += v;
        }
        total
    }
}

impl TestFunction for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.partial(x, &vec![0; self.dim])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut orders = vec![0; self.dim];
        for i in 0..self.dim {
            orders[i] = 1;
            out[i] = self.partial(x, &orders);
            orders[i] = 0;
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut orders = vec![0; d];
        for i in 0..d {
            for j in 0..d {
                orders[i] += 1;
                orders[j] += 1;
                out[i * d + j] = self.partial(x, &orders);
                orders[i] -= 1;
                orders[j] -= 1;
            }
        }
    }

    fn third(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim;
        let mut orders = vec![0; d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    orders[i] += 1;
                    orders[j] += 1;
                    orders[k] += 1;
                    out[(i * d + j) * d + k] = self.partial(x, &orders);
                    orders[i] -= 1;
                    orders[j] -= 1;
                    orders[k] -= 1;
                }
            }
        }
        true
    }
}

/// Smooth bump `A·exp(1 - 1/(1 - |x - c|²/ρ²))` supported on the open ball
/// of radius `ρ` around `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    center: Vec<f64>,
    radius: f64,
    amplitude: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        assert!(radius > 0.0);
        Self { center, radius, amplitude }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn scaled_radius2(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        r2 / (self.radius * self.radius)
    }

    // g(s) = exp(1 - 1/(1-s)) and its first two derivatives.
    fn profile(s: f64) -> (f64, f64, f64) {
        if s >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let w = 1.0 / (1.0 - s);
        let g = (1.0 - w).exp();
        let g1 = -g * w * w;
        let g2 = g * (w.powi(4) - 2.0 * w.powi(3));
        (g, g1, g2)
    }
}

impl TestFunction for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.amplitude * Self::profile(self.scaled_radius2(x)).0
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (_, g1, _) = Self::profile(self.scaled_radius2(x));
        let rho2 = self.radius * self.radius;
        for i in 0..self.dim() {
            out[i] = self.amplitude * g1 * 2.0 * (x[i] - self.center[i]) / rho2;
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let (_, g1, g2) = Self::profile(self.scaled_radius2(x));
        let rho2 = self.radius * self.radius;
        for i in 0..d {
            let si = 2.0 * (x[i] - self.center[i]) / rho2;
            for j in 0..d {
                let sj = 2.0 * (x[j] - self.center[j]) / rho2;
                let sij = if i == j { 2.0 / rho2 } else { 0.0 };
                out[i * d + j] = self.amplitude * (g2 * si * sj + g1 * sij);
            }
        }
    }
}

/// Observables whose stationary expectations are compared between the
/// queue and the diffusion. Not necessarily smooth.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// `Π x_i^{a_i}`.
    Monomial(Vec<u32>),
    /// `((eᵀx)^+)^k`.
    PositivePart(u32),
    /// `|x|^m` (Euclidean norm).
    AbsPower(u32),
    Poly(Polynomial),
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Observable::Monomial(a) => {
                x.iter().zip(a).map(|(v, k)| v.powi(*k as i32)).product()
            }
            Observable::PositivePart(k) => x.iter().sum::<f64>().max(0.0).powi(*k as i32),
            Observable::AbsPower(m) => {
                x.iter().map(|v| v * v).sum::<f64>().sqrt().powi(*m as i32)
            }
            Observable::Poly(p) => p.value(x),
        }
    }

    /// Total degree of the observable as a polynomial-growth order.
    pub fn order(&self) -> u32 {
        match self {
            Observable::Monomial(a) => a.iter().sum(),
            Observable::PositivePart(k) => *k,
            Observable::AbsPower(m) => *m,
            Observable::Poly(p) => p.degree(),
        }
    }

    pub fn label(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        match self {
            Observable::Monomial(a) => {
                let mut first = true;
                for (i, k) in a.iter().enumerate() {
                    if *k == 0 {
                        continue;
                    }
                    if !first {
                        s.push('*');
                    }
                    first = false;
                    let _ = write!(s, "x{}", i + 1);
                    if *k > 1 {
                        let _ = write!(s, "^{k}");
                    }
                }
                if first {
                    s.push('1');
                }
            }
            Observable::PositivePart(k) => {
                let _ = write!(s, "pos^{k}");
            }
            Observable::AbsPower(m) => {
                let _ = write!(s, "abs^{m}");
            }
            Observable::Poly(p) => {
                let _ = write!(s, "poly{}", p.degree());
            }
        }
        s
    }
}

/// Default comparison family: `x_i`, `x_i x_j` (`i ≤ j`), `(eᵀx)^+` and
/// `((eᵀx)^+)²`.
pub fn default_family(dim: usize) -> Vec<Observable> {
    let mut out = Vec::new();
    for i in 0..dim {
        let mut a = vec![0; dim];
        a[i] = 1;
        out.push(Observable::Monomial(a));
    }
    for i in 0..dim {
        for j in i..dim {
            let mut a = vec![0; dim];
            a[i] += 1;
            a[j] += 1;
            out.push(Observable::Monomial(a));
        }
    }
    out.push(Observable::PositivePart(1));
    out.push(Observable::PositivePart(2));
    out
}
