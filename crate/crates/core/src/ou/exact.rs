//! Exact stationary law of the one-dimensional piecewise OU process.
//!
//! With `d = 1` the density is `π(x) ∝ exp(−(2/Σ)U(x))` for the piecewise
//! quadratic potential `U(x) = βx + c(x)x²/2`, `c = μ` left of zero and `α`
//! right of it. Everything below is computed by adaptive quadrature on the
//! two halves, truncated where the density falls below `1e-16` of its mode.

#[allow(unused_imports)]
use crate::prelude::*;
use crate::quad::{integrate, QuadError, QuadOptions};

/// A continuous law on the line with the primitives needed for
/// Wasserstein computations.
pub trait ContinuousLaw1d {
    /// Interval outside of which the law has negligible mass.
    fn support(&self) -> (f64, f64);

    fn density(&self, x: f64) -> f64;

    /// `P(a < Y ≤ b)`.
    fn mass(&self, a: f64, b: f64) -> f64;

    /// `E[Y; a < Y ≤ b]`.
    fn partial_mean(&self, a: f64, b: f64) -> f64;

    fn cdf(&self, t: f64) -> f64 {
        let (lo, _) = self.support();
        self.mass(lo, t)
    }

    fn quantile(&self, u: f64) -> f64;
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Ou1dError {
    #[error("the exact stationary law is only available for d = 1, got d = {0}")]
    Dimension(usize),
    #[error("need μ > 0, α > 0 and Σ > 0")]
    Parameters,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

// ln(1e16): the density cutoff relative to the mode.
const CUTOFF: f64 = 36.841_361_487_904_734;

#[derive(Clone, Debug, PartialEq)]
pub struct Ou1d {
    beta: f64,
    mu: f64,
    alpha: f64,
    sigma: f64,
    /// Minimum of the potential.
    floor: f64,
    lo: f64,
    hi: f64,
    norm: f64,
    opts: QuadOptions,
}

impl Ou1d {
    pub fn new(beta: f64, mu: f64, alpha: f64, sigma: f64) -> Result<Self, Ou1dError> {
        if !(mu > 0.0 && alpha > 0.0 && sigma > 0.0) || !beta.is_finite() {
            return Err(Ou1dError::Parameters);
        }
        let left_min = if beta >= 0.0 { -beta * beta / (2.0 * mu) } else { 0.0 };
        let right_min = if beta < 0.0 { -beta * beta / (2.0 * alpha) } else { 0.0 };
        let floor = left_min.min(right_min);
        let level = floor + 0.5 * sigma * CUTOFF;
        let lo = (-beta - (beta * beta + 2.0 * mu * level).sqrt()) / mu;
        let hi = (-beta + (beta * beta + 2.0 * alpha * level).sqrt()) / alpha;
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 4000 };
        let mut law = Self { beta, mu, alpha, sigma, floor, lo, hi, norm: 1.0, opts };
        law.norm = law.raw_integral(lo.min(0.0), hi.max(0.0), 0)?;
        Ok(law)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn potential(&self, x: f64) -> f64 {
        let c = if x <= 0.0 { self.mu } else { self.alpha };
        self.beta * x + 0.5 * c * x * x
    }

    fn raw_density(&self, x: f64) -> f64 {
        (-(2.0 / self.sigma) * (self.potential(x) - self.floor)).exp()
    }

    /// `∫_a^b x^k π̃(x) dx` for the unnormalized density, split at the kink.
    fn raw_integral(&self, a: f64, b: f64, k: i32) -> Result<f64, QuadError> {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if a >= b {
            return Ok(0.0);
        }
        let f = |x: f64| x.powi(k) * self.raw_density(x);
        let mut total = 0.0;
        if a < 0.0 {
            total += integrate(f, a, b.min(0.0), &self.opts)?.value;
        }
        if b > 0.0 {
            total += integrate(f, a.max(0.0), b, &self.opts)?.value;
        }
        Ok(total)
    }

    /// `E[Y^k; a < Y ≤ b]`.
    pub fn try_partial_moment(&self, a: f64, b: f64, k: i32) -> Result<f64, QuadError> {
        Ok(self.raw_integral(a, b, k)? / self.norm)
    }

    /// `E Y^k`. Panics only if quadrature fails, which the construction rules
    /// out for moderate `k`.
    pub fn moment(&self, k: i32) -> f64 {
        self.try_partial_moment(self.lo, self.hi, k).expect("moment quadrature")
    }

    /// Expectation of an arbitrary integrand.
    pub fn expect(&self, mut h: impl FnMut(f64) -> f64) -> Result<f64, QuadError> {
        let mut f = |x: f64| h(x) * self.raw_density(x);
        let left = integrate(&mut f, self.lo, 0.0, &self.opts)?.value;
        let right = integrate(&mut f, 0.0, self.hi, &self.opts)?.value;
        Ok((left + right) / self.norm)
    }

    /// Mode of the density.
    pub fn mode(&self) -> f64 {
        if self.beta >= 0.0 {
            -self.beta / self.mu
        } else {
            -self.beta / self.alpha
        }
    }
}

impl ContinuousLaw1d for Ou1d {
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn density(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            self.raw_density(x) / self.norm
        }
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        self.try_partial_moment(a, b, 0).expect("cdf quadrature")
    }

    fn partial_mean(&self, a: f64, b: f64) -> f64 {
        self.try_partial_moment(a, b, 1).expect("partial mean quadrature")
    }

    fn quantile(&self, u: f64) -> f64 {
        let (mut a, mut b) = (self.lo, self.hi);
        if u <= 0.0 {
            return a;
        }
        if u >= 1.0 {
            return b;
        }
        // Safeguarded Newton on F(t) − u, tracking mass incrementally.
        let mut t = self.mode().clamp(a, b);
        let mut ft = self.cdf(t);
        for _ in 0..200 {
            let g = ft - u;
            if g.abs() <= 1e-15 {
                break;
            }
            if g > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let dens = self.density(t);
            let mut next = if dens > 0.0 { t - g / dens } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) {
                break;
            }
            ft += self.mass(t.min(next), t.max(next)) * if next > t { 1.0 } else { -1.0 };
            t = next;
        }
        t
    }
}
