//! Generator comparisons between the queue and the diffusion.
//!
//! Test functions `f` on `R^d` are lifted to queue states through the scaled
//! system size `x = δ(z + q − γn)`. The queue generator acting on the lifted
//! function is evaluated exactly as a finite-difference sum and compared
//! with the diffusion generator, split into a state-space-collapse term
//! (driven by `δq − p(eᵀx)⁺`) and a Taylor remainder.

use crate::ctmc::{for_each_composition, StationaryPmf, SystemParams};
use crate::functions::TestFunction;
use crate::ou::{ContinuousLaw1d, DiffusionModel, Ou1dError};
use crate::prelude::*;
use crate::quad::{gk15, integrate, QuadError, QuadOptions};
use crate::stats::ln_factorial;
use crate::ctmc::ScaledLaw;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SteinError {
    #[error("state dimensions do not match the system (d = {0})")]
    Dimension(usize),
    #[error("busy servers {busy} exceed n = {n}")]
    TooManyBusy { busy: u32, n: u32 },
    #[error("queue is nonempty while only {busy} of {n} servers are busy")]
    IdleWithQueue { busy: u32, n: u32 },
    #[error("x is not the scaled system size of (z, q): off by {0:e}")]
    Inconsistent(f64),
    #[error(transparent)]
    Law(#[from] Ou1dError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// A queue state seen through the lifting: scaled size `x`, queue
/// composition `q` and in-service counts `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedState {
    pub x: Vec<f64>,
    pub q: Vec<u32>,
    pub z: Vec<u32>,
}

impl LiftedState {
    pub fn new(params: &SystemParams, z: Vec<u32>, q: Vec<u32>) -> Result<Self, SteinError> {
        let d = params.dim();
        if z.len() != d || q.len() != d {
            return Err(SteinError::Dimension(d));
        }
        let counts: Vec<u32> = z.iter().zip(&q).map(|(a, b)| a + b).collect();
        let mut x = vec![0.0; d];
        params.scale_point(&counts, &mut x);
        let s = Self { x, q, z };
        s.check(params)?;
        Ok(s)
    }

    pub fn check(&self, params: &SystemParams) -> Result<(), SteinError> {
        let d = params.dim();
        if self.x.len() != d || self.z.len() != d || self.q.len() != d {
            return Err(SteinError::Dimension(d));
        }
        let busy: u32 = self.z.iter().sum();
        let n = params.n;
        if busy > n {
            return Err(SteinError::TooManyBusy { busy, n });
        }
        if busy < n && self.q.iter().any(|&v| v > 0) {
            return Err(SteinError::IdleWithQueue { busy, n });
        }
        let off = (0..d)
            .map(|i| {
                let want =
                    params.delta * ((self.z[i] + self.q[i]) as f64 - params.derived.gamma[i] * n as f64);
                (self.x[i] - want).abs()
            })
            .fold(0.0, f64::max);
        if off > 1e-9 * (1.0 + self.x.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            return Err(SteinError::Inconsistent(off));
        }
        Ok(())
    }
}

/// Queue generator applied to the lifted `f` at a state: arrivals,
/// abandonments and phase completions each move `x` by `±δ` along the
/// coordinate axes.
pub fn ctmc_generator_apply(
    params: &SystemParams,
    f: &dyn TestFunction,
    state: &LiftedState,
) -> Result<f64, SteinError> {
    state.check(params)?;
    Ok(generator_unchecked(params, f, &state.x, &state.q, &state.z))
}

fn generator_unchecked(params: &SystemParams, f: &dyn TestFunction, x: &[f64], q: &[u32], z: &[u32]) -> f64 {
    let d = x.len();
    let delta = params.delta;
    let (p, nu, routing) = (params.pht.p(), params.pht.nu(), params.pht.routing());
    let f0 = f.value(x);
    let mut y = x.to_vec();
    let mut shifted = |i: Option<usize>, j: Option<usize>| {
        y.copy_from_slice(x);
        if let Some(i) = i {
            y[i] -= delta;
        }
        if let Some(j) = j {
            y[j] += delta;
        }
        f.value(&y) - f0
    };
    let mut total = 0.0;
    for i in 0..d {
        if p[i] > 0.0 {
            total += params.lambda * p[i] * shifted(None, Some(i));
        }
        let down = if q[i] > 0 || z[i] > 0 { shifted(Some(i), None) } else { 0.0 };
        if q[i] > 0 {
            total += params.alpha * q[i] as f64 * down;
        }
        if z[i] > 0 {
            let rate = nu[i] * z[i] as f64;
            let mut inner = params.pht.exit_probability(i) * down;
            for j in 0..d {
                let pij = routing[(i, j)];
                if pij > 0.0 {
                    inner += pij * shifted(Some(i), Some(j));
                }
            }
            total += rate * inner;
        }
    }
    total
}

/// Split of `G_U Af(u) − G_Y f(x)` into the collapse term and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorDecomposition {
    pub full_diff: f64,
    pub ssc_term: f64,
    pub error_term: f64,
    /// Explicit second-order part of the error term.
    pub second_order: f64,
    /// Explicit third-order part; `None` when `f` has no third derivatives.
    pub third_order: Option<f64>,
    pub delta: f64,
    pub norm_x: f64,
}

impl TaylorDecomposition {
    /// `δ(1 + |x|²)^m (1 + |x|)^4`, the growth profile of the error bound.
    pub fn bound_shape(&self, m: u32) -> f64 {
        let r = self.norm_x;
        self.delta * (1.0 + r * r).powi(m as i32) * (1.0 + r).powi(4)
    }

    /// `|error_term| / bound_shape(m)`.
    pub fn bound_ratio(&self, m: u32) -> f64 {
        self.error_term.abs() / self.bound_shape(m)
    }
}

/// Decomposes the generator difference at a state. With
/// `w = δq − p(eᵀx)⁺` the collapse term is
/// `Σ_i w_i [(ν_i − α)∂_i f − ν_i Σ_j P_ij ∂_j f]`, i.e. `∇f·(R − αI)w`.
pub fn taylor_decompose(
    params: &SystemParams,
    f: &dyn TestFunction,
    state: &LiftedState,
) -> Result<TaylorDecomposition, SteinError> {
    let queue_side = ctmc_generator_apply(params, f, state)?;
    let model = DiffusionModel::from_params(params);
    let full_diff = queue_side - model.generator_apply(f, &state.x);
    let d = params.dim();
    let (p, nu, routing) = (params.pht.p(), params.pht.nu(), params.pht.routing());
    let delta = params.delta;
    let x = &state.x;
    let pos = x.iter().sum::<f64>().max(0.0);
    let mut grad = vec![0.0; d];
    f.gradient(x, &mut grad);
    let mut ssc_term = 0.0;
    for i in 0..d {
        let w = delta * state.q[i] as f64 - p[i] * pos;
        let mut c = (nu[i] - params.alpha) * grad[i];
        for j in 0..d {
            c -= nu[i] * routing[(i, j)] * grad[j];
        }
        ssc_term += w * c;
    }

    // Every jump is v = δ(e_j − e_i) with e_0 := 0; collect Σ rate·v⊗v and
    // Σ rate·v⊗v⊗v through a visitor over jumps.
    let mut hess = vec![0.0; d * d];
    f.hessian(x, &mut hess);
    let mut third = vec![0.0; d * d * d];
    let has_third = f.third(x, &mut third);
    let mut second_order = 0.0;
    let mut third_order = 0.0;
    let mut jump = |rate: f64, from: Option<usize>, to: Option<usize>| {
        let mut v = vec![0.0; d];
        if let Some(i) = from {
            v[i] -= delta;
        }
        if let Some(j) = to {
            v[j] += delta;
        }
        let mut s2 = 0.0;
        for a in 0..d {
            for b in 0..d {
                s2 += hess[a * d + b] * v[a] * v[b];
            }
        }
        second_order += 0.5 * rate * s2;
        if has_third {
            let mut s3 = 0.0;
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        s3 += third[(a * d + b) * d + c] * v[a] * v[b] * v[c];
                    }
                }
            }
            third_order += rate * s3 / 6.0;
        }
    };
    for i in 0..d {
        jump(params.lambda * p[i], None, Some(i));
        jump(params.alpha * state.q[i] as f64, Some(i), None);
        let rate = nu[i] * state.z[i] as f64;
        jump(rate * params.pht.exit_probability(i), Some(i), None);
        for j in 0..d {
            jump(rate * routing[(i, j)], Some(i), Some(j));
        }
    }
    for a in 0..d {
        for b in 0..d {
            second_order -= 0.5 * model.sigma[(a, b)] * hess[a * d + b];
        }
    }
    Ok(TaylorDecomposition {
        full_diff,
        ssc_term,
        error_term: full_diff - ssc_term,
        second_order,
        third_order: has_third.then_some(third_order),
        delta,
        norm_x: x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    })
}

/// `Σ_u π(u) G_U Af(u)` over the truncated stationary law, with the queue
/// composition averaged over `Multinomial(ℓ, p)`.
pub fn bar_residual(pmf: &StationaryPmf, params: &SystemParams, f: &dyn TestFunction) -> f64 {
    let d = params.dim();
    let p = params.pht.p();
    let ln_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let mut counts = vec![0u32; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    for (idx, &w) in pmf.prob.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let z = pmf.space.z(idx);
        let ell = pmf.space.ell(idx);
        for_each_composition(ell, d, |q| {
            let mut ln = ln_factorial(ell as u64);
            for i in 0..d {
                if q[i] > 0 {
                    if p[i] == 0.0 {
                        return;
                    }
                    ln += q[i] as f64 * ln_p[i];
                }
                ln -= ln_factorial(q[i] as u64);
            }
            for i in 0..d {
                counts[i] = z[i] + q[i];
            }
            params.scale_point(&counts, &mut x);
            total += w * ln.exp() * generator_unchecked(params, f, &x, q, z);
        });
    }
    total
}

/// Numerical solution of the one-dimensional Poisson equation
/// `G_Y f = h − E h(Y)`.
///
/// `f'` is known in closed form up to quadrature,
/// `f'(x) = (2/Σ) π(x)⁻¹ ∫_{−∞}^x h̄ π`, and is tabulated on a grid together
/// with `f'' = (2/Σ)(h̄ − b f')`. The grid is uniform on each side of the
/// kink at 0, which is a node. Between nodes `f'` is the cubic Hermite
/// interpolant of these values, `f''` its derivative and `f` its integral,
/// normalized to `f(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSolution1d {
    nodes: Vec<f64>,
    fp: Vec<f64>,
    fpp: Vec<f64>,
    /// `f` at the nodes, zero at the origin node.
    f: Vec<f64>,
    h_mean: f64,
    beta: f64,
    mu: f64,
    alpha: f64,
    sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonOptions {
    /// Target grid spacing.
    pub step: f64,
    /// Grid covers the `[tail, 1 − tail]` quantile range.
    pub tail: f64,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self { step: 1e-3, tail: 1e-12 }
    }
}

pub fn poisson_solve_1d(
    model: &DiffusionModel,
    h: &dyn Fn(f64) -> f64,
    opts: &PoissonOptions,
) -> Result<PoissonSolution1d, SteinError> {
    let law = model.exact_1d()?;
    let (beta, mu, alpha) = (model.beta, model.r[(0, 0)], model.alpha);
    let sigma = law.sigma();
    let h_mean = law.expect(h)?;
    let a = law.quantile(opts.tail).min(-opts.step);
    let b = law.quantile(1.0 - opts.tail).max(opts.step);
    let n_left = (-a / opts.step).ceil() as usize;
    let n_right = (b / opts.step).ceil() as usize;
    let mut nodes: Vec<f64> = (0..n_left).map(|k| a * (1.0 - k as f64 / n_left as f64)).collect();
    let origin = nodes.len();
    nodes.extend((0..=n_right).map(|k| b * k as f64 / n_right as f64));
    let cells = nodes.len() - 1;

    let (lo, hi) = law.support();
    let qopts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 4000 };
    let mut g = |x: f64| (h(x) - h_mean) * law.density(x);
    let cell: Vec<f64> = (0..cells).map(|k| gk15(&mut g, nodes[k], nodes[k + 1]).value).collect();
    let head = integrate(&mut g, lo.min(a), a, &qopts)?.value;
    let tail = integrate(&mut g, b, hi.max(b), &qopts)?.value;
    // Integrate from whichever end is closer so each value keeps relative
    // accuracy where π is small.
    let mut left = vec![0.0; cells + 1];
    left[0] = head;
    for k in 0..cells {
        left[k + 1] = left[k] + cell[k];
    }
    let mut right = vec![0.0; cells + 1];
    right[cells] = -tail;
    for k in (0..cells).rev() {
        right[k] = right[k + 1] - cell[k];
    }
    let median = law.quantile(0.5);
    let drift = |x: f64| -beta - if x <= 0.0 { mu } else { alpha } * x;
    let mut fp = vec![0.0; cells + 1];
    let mut fpp = vec![0.0; cells + 1];
    for (k, &x) in nodes.iter().enumerate() {
        let integral = if x <= median { left[k] } else { right[k] };
        fp[k] = (2.0 / sigma) * integral / law.density(x);
        fpp[k] = (2.0 / sigma) * (h(x) - h_mean - drift(x) * fp[k]);
    }
    let mut f = vec![0.0; cells + 1];
    for k in 0..cells {
        let s = nodes[k + 1] - nodes[k];
        f[k + 1] = f[k] + 0.5 * s * (fp[k] + fp[k + 1]) + s * s / 12.0 * (fpp[k] - fpp[k + 1]);
    }
    let shift = f[origin];
    f.iter_mut().for_each(|v| *v -= shift);
    Ok(PoissonSolution1d { nodes, fp, fpp, f, h_mean, beta, mu, alpha, sigma })
}

impl PoissonSolution1d {
    pub fn h_mean(&self) -> f64 {
        self.h_mean
    }

    pub fn grid(&self) -> &[f64] {
        &self.nodes
    }

    pub fn drift(&self, x: f64) -> f64 {
        -self.beta - if x <= 0.0 { self.mu } else { self.alpha } * x
    }

    // Cell index, its width and the local coordinate t ∈ [0, 1]; None
    // outside the grid.
    fn locate(&self, x: f64) -> Option<(usize, f64, f64)> {
        let last = self.nodes.len() - 1;
        if !(x >= self.nodes[0] && x <= self.nodes[last]) {
            return None;
        }
        let k = self.nodes.partition_point(|&v| v <= x).clamp(1, last) - 1;
        let s = self.nodes[k + 1] - self.nodes[k];
        Some((k, s, (x - self.nodes[k]) / s))
    }

    fn edge(&self, x: f64) -> usize {
        if x < self.nodes[0] {
            0
        } else {
            self.nodes.len() - 1
        }
    }

    /// `f_h'(x)`; linear extrapolation outside the grid.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((k, s, t)) => {
                let (h00, h10, h01, h11) = hermite(t);
                h00 * self.fp[k] + h10 * s * self.fpp[k] + h01 * self.fp[k + 1] + h11 * s * self.fpp[k + 1]
            }
            None => {
                let e = self.edge(x);
                self.fp[e] + self.fpp[e] * (x - self.nodes[e])
            }
        }
    }

    /// `f_h''(x)`: derivative of the interpolant of `f_h'`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((k, s, t)) => {
                let (d00, d10, d01, d11) = hermite_derivative(t);
                (d00 * self.fp[k] + d01 * self.fp[k + 1]) / s + d10 * self.fpp[k] + d11 * self.fpp[k + 1]
            }
            None => self.fpp[self.edge(x)],
        }
    }

    /// `f_h(x)` with `f_h(0) = 0`.
    pub fn value(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((k, s, t)) => {
                let (i00, i10, i01, i11) = hermite_integral(t);
                self.f[k]
                    + s * (i00 * self.fp[k] + i10 * s * self.fpp[k] + i01 * self.fp[k + 1] + i11 * s * self.fpp[k + 1])
            }
            None => {
                let e = self.edge(x);
                let dx = x - self.nodes[e];
                self.f[e] + self.fp[e] * dx + 0.5 * self.fpp[e] * dx * dx
            }
        }
    }

    /// `G_Y f_h(x) = b f_h' + (Σ/2) f_h''`.
    pub fn generator(&self, x: f64) -> f64 {
        self.drift(x) * self.derivative(x) + 0.5 * self.sigma * self.second_derivative(x)
    }

    /// Largest `|G_Y f_h − h̄|` over the grid nodes and cell midpoints.
    pub fn max_residual(&self, h: &dyn Fn(f64) -> f64) -> f64 {
        let mut worst = 0.0f64;
        for w in self.nodes.windows(2) {
            for x in [w[0], 0.5 * (w[0] + w[1])] {
                worst = worst.max((self.generator(x) - (h(x) - self.h_mean)).abs());
            }
        }
        worst
    }

    /// Smallest `K` with `|f_h'(x)| ≤ K(1 + x²)^m(1 + |x|)` on the grid.
    pub fn gradient_shape_constant(&self, m: u32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.fp)
            .map(|(x, d)| d.abs() / ((1.0 + x * x).powi(m as i32) * (1.0 + x.abs())))
            .fold(0.0, f64::max)
    }
}

fn hermite(t: f64) -> (f64, f64, f64, f64) {
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2)
}

fn hermite_derivative(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    (6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t)
}

fn hermite_integral(t: f64) -> (f64, f64, f64, f64) {
    let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
    (
        0.5 * t4 - t3 + t,
        0.25 * t4 - 2.0 / 3.0 * t3 + 0.5 * t2,
        -0.5 * t4 + t3,
        0.25 * t4 - t3 / 3.0,
    )
}

/// Both sides of `E h(X̃) − E h(Y) = E G_Y f_h(X̃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteinGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl SteinGap {
    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn stein_gap_1d(
    law: &ScaledLaw,
    model: &DiffusionModel,
    h: &dyn Fn(f64) -> f64,
    opts: &PoissonOptions,
) -> Result<SteinGap, SteinError> {
    if law.dim() != 1 {
        return Err(SteinError::Dimension(law.dim()));
    }
    let sol = poisson_solve_1d(model, h, opts)?;
    let lhs = law.expect(|x| h(x[0])) - sol.h_mean();
    let rhs = law.expect(|x| sol.generator(x[0]));
    Ok(SteinGap { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{scaled_system_law, solve_ctmc, SolverOptions};
    use crate::functions::{Bump, Polynomial};
    use crate::phase_type::PhaseType;

    fn h2_params(lambda: f64) -> SystemParams {
        SystemParams::staffed(lambda, 1.0, 0.5, PhaseType::hyperexponential2(0.5, 1.0, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn constants_are_killed() {
        let params = h2_params(50.0);
        let n = params.n;
        let st = LiftedState::new(&params, vec![n - 10, 10], vec![2, 1]).unwrap();
        assert_eq!(ctmc_generator_apply(&params, &Polynomial::constant(2, 4.0), &st).unwrap(), 0.0);
    }

    #[test]
    fn identity_in_one_dimension_gives_minus_beta() {
        let params = SystemParams::new(100.0, 110, 0.5, PhaseType::exponential(1.0).unwrap()).unwrap();
        let st = LiftedState::new(&params, vec![110], vec![0]).unwrap();
        let g = ctmc_generator_apply(&params, &Polynomial::coordinate(1, 0), &st).unwrap();
        assert!((g + 1.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_states_are_rejected() {
        let params = h2_params(50.0);
        assert!(matches!(
            LiftedState::new(&params, vec![1, 1], vec![1, 0]),
            Err(SteinError::IdleWithQueue { .. })
        ));
        let mut st = LiftedState::new(&params, vec![3, 4], vec![0, 0]).unwrap();
        st.x[0] += 0.5;
        assert!(matches!(ctmc_generator_apply(&params, &Polynomial::coordinate(2, 0), &st), Err(SteinError::Inconsistent(_))));
    }

    #[test]
    fn decomposition_identities() {
        let params = h2_params(100.0);
        let n = params.n;
        let quad = Polynomial::new(2, vec![(1.0, vec![2, 0]), (-0.7, vec![1, 1]), (0.4, vec![0, 2]), (0.3, vec![1, 0])]);
        let cubic = Polynomial::new(2, vec![(1.0, vec![3, 0]), (0.5, vec![1, 2]), (-0.2, vec![0, 1])]);
        for (z1, q) in [(50u32, [3u32, 1u32]), (40, [0, 0]), (70, [5, 7])] {
            let st = LiftedState::new(&params, vec![z1, n - z1], q.to_vec()).unwrap();
            let t = taylor_decompose(&params, &quad, &st).unwrap();
            assert_eq!(t.full_diff - t.ssc_term - t.error_term, 0.0);
            assert!((t.error_term - t.second_order).abs() < 1e-9, "{t:?}");
            let c = taylor_decompose(&params, &cubic, &st).unwrap();
            let direct = ctmc_generator_apply(&params, &cubic, &st).unwrap();
            let model = DiffusionModel::from_params(&params);
            let rebuilt = model.generator_apply(&cubic, &st.x) + c.ssc_term + c.second_order + c.third_order.unwrap();
            assert!((direct - rebuilt).abs() < 1e-9, "{direct} vs {rebuilt}");
        }
    }

    #[test]
    fn collapse_term_vanishes_without_queue_below_the_kink() {
        let params = h2_params(100.0);
        let st = LiftedState::new(&params, vec![40, 30], vec![0, 0]).unwrap();
        assert!(st.x.iter().sum::<f64>() <= 0.0);
        let f = Polynomial::new(2, vec![(1.0, vec![2, 1])]);
        assert_eq!(taylor_decompose(&params, &f, &st).unwrap().ssc_term, 0.0);
    }

    #[test]
    fn collapse_term_vanishes_in_one_dimension() {
        let params = SystemParams::new(100.0, 110, 0.5, PhaseType::exponential(1.0).unwrap()).unwrap();
        let st = LiftedState::new(&params, vec![110], vec![7]).unwrap();
        let t = taylor_decompose(&params, &Polynomial::univariate(&[0.0, 0.0, 0.0, 1.0]), &st).unwrap();
        assert!(t.ssc_term.abs() < 1e-12);
    }

    #[test]
    fn quadratic_error_term_scales_with_delta() {
        let f = Polynomial::univariate(&[0.0, 0.3, 1.0]);
        let err = |lambda: f64| {
            let params = SystemParams::staffed(lambda, 1.0, 0.5, PhaseType::exponential(1.0).unwrap()).unwrap();
            let n = params.n;
            let ell = (0.5 * lambda.sqrt()).round() as u32;
            let st = LiftedState::new(&params, vec![n], vec![ell]).unwrap();
            taylor_decompose(&params, &f, &st).unwrap().error_term
        };
        let ratio = err(400.0) / err(100.0);
        assert!((ratio - 0.5).abs() < 0.125, "{ratio}");
    }

    #[test]
    fn bar_vanishes_for_compact_functions() {
        let params = h2_params(20.0);
        let pmf = solve_ctmc(&params, &SolverOptions::default()).unwrap();
        let f = Bump::new(vec![0.2, -0.1], 1.0, 1.0);
        let r = bar_residual(&pmf, &params, &f);
        assert!(r.abs() < 1e-10, "{r:e} (balance residual {:e})", pmf.residual);
        assert_eq!(bar_residual(&pmf, &params, &Polynomial::constant(2, 1.0)), 0.0);
    }

    fn one_d_model(beta: f64, alpha: f64) -> DiffusionModel {
        let pht = PhaseType::exponential(1.0).unwrap();
        DiffusionModel::new(beta, alpha, vec![1.0], &pht.derive())
    }

    #[test]
    fn zero_right_hand_side() {
        let sol = poisson_solve_1d(&one_d_model(1.0, 0.5), &|_| 0.0, &PoissonOptions::default()).unwrap();
        assert!(sol.grid().iter().all(|&x| sol.derivative(x) == 0.0 && sol.value(x) == 0.0));
    }

    #[test]
    fn symmetric_model_odd_h_gives_even_derivative() {
        let sol = poisson_solve_1d(&one_d_model(0.0, 1.0), &|x| x, &PoissonOptions::default()).unwrap();
        for x in [0.3, 1.1, 2.7] {
            assert!((sol.derivative(x) - sol.derivative(-x)).abs() < 1e-8);
        }
    }

    #[test]
    fn poisson_residual_is_small() {
        for h in [&(|x: f64| x) as &dyn Fn(f64) -> f64, &|x: f64| x * x, &|x: f64| x.max(0.0)] {
            let sol = poisson_solve_1d(&one_d_model(1.0, 0.5), h, &PoissonOptions::default()).unwrap();
            let r = sol.max_residual(h);
            assert!(r < 1e-8, "{r}");
            assert!(sol.value(0.0).abs() < 1e-15);
            assert!(sol.gradient_shape_constant(1).is_finite());
        }
    }

    #[test]
    fn stein_gap_identity() {
        let params = SystemParams::staffed(100.0, 1.0, 0.5, PhaseType::exponential(1.0).unwrap()).unwrap();
        let law = scaled_system_law(&solve_ctmc(&params, &SolverOptions::default()).unwrap(), &params);
        let model = DiffusionModel::from_params(&params);
        let gap = stein_gap_1d(&law, &model, &|_| 2.0, &PoissonOptions::default()).unwrap();
        assert!(gap.lhs.abs() < 1e-12 && gap.rhs.abs() < 1e-12);
        let gap = stein_gap_1d(&law, &model, &|x| x, &PoissonOptions::default()).unwrap();
        assert!(gap.discrepancy() < 1e-6, "{gap:?}");
        assert!(gap.lhs.abs() > 1e-3);
    }
}
