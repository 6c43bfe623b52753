//! Stationary distributions of finite generators.
//!
//! The default path uniformizes at the largest outflow rate and runs power
//! iteration. The geometric contraction rate of the balance residual is
//! tracked (Aitken-style) and, when it projects past the iteration budget,
//! the solve switches to a sparse LU of the balance equations with one state
//! pinned.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::ctmc::generator::{Generator, RateMatrix};
use crate::ctmc::space::{state_count, CtmcState, StateSpace};
use crate::ctmc::SystemParams;
use crate::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Power iteration with a sparse direct fallback when it stalls.
    Auto,
    Power,
    Direct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub method: SolveMethod,
    /// Target for `max_j |(πG)_j|`.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Residual checkpoints are this many iterations apart.
    pub check_every: usize,
    /// Queue truncation is doubled until the dropped-arrival fraction is
    /// below this.
    pub queue_tail_tol: f64,
    /// Starting queue capacity; `None` means `ceil(10√λ + 10)`.
    pub initial_queue_cap: Option<u32>,
    pub max_queue_cap: u32,
    pub max_states: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            residual_tol: 1e-12,
            max_iterations: 200_000,
            check_every: 100,
            queue_tail_tol: 1e-9,
            initial_queue_cap: None,
            max_queue_cap: 1 << 20,
            max_states: 20_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("power iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("balance equations are singular (generator not irreducible?)")]
    Singular,
    #[error("stationary solve produced invalid values (residual {residual:e})")]
    Invalid { residual: f64 },
    #[error("state space of {states} states exceeds the configured limit")]
    TooLarge { states: u128 },
    #[error("queue tail mass {tail:e} still above tolerance at capacity {cap}")]
    Truncation { tail: f64, cap: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationarySolution {
    pub pi: Vec<f64>,
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

/// Solves `πG = 0, Σπ = 1` for an irreducible finite generator.
pub fn stationary_vector(
    matrix: &RateMatrix,
    opts: &SolverOptions,
) -> Result<StationarySolution, SolveError> {
    stationary_with_anchor(matrix, opts, None)
}

fn stationary_with_anchor(
    matrix: &RateMatrix,
    opts: &SolverOptions,
    anchor: Option<usize>,
) -> Result<StationarySolution, SolveError> {
    let n = matrix.len();
    if n == 1 {
        return Ok(StationarySolution {
            pi: vec![1.0],
            residual: 0.0,
            method: SolveMethod::Direct,
            iterations: 0,
        });
    }
    match opts.method {
        SolveMethod::Direct => {
            let anchor = match anchor {
                Some(a) => a,
                None => argmax(&power_iteration(matrix, opts, 200, false).pi),
            };
            direct(matrix, anchor, opts)
        }
        SolveMethod::Power => {
            let sol = power_iteration(matrix, opts, opts.max_iterations, false);
            if sol.residual <= opts.residual_tol {
                Ok(sol)
            } else {
                Err(SolveError::NonConvergence { iterations: sol.iterations, residual: sol.residual })
            }
        }
        SolveMethod::Auto => {
            let sol = power_iteration(matrix, opts, opts.max_iterations, true);
            if sol.residual <= opts.residual_tol {
                return Ok(sol);
            }
            let anchor = anchor.unwrap_or_else(|| argmax(&sol.pi));
            let mut out = direct(matrix, anchor, opts)?;
            out.iterations = sol.iterations;
            Ok(out)
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i)
}

/// Uniformized power iteration. With `stop_on_stall`, gives up as soon as
/// the observed contraction rate projects past the iteration budget.
fn power_iteration(
    matrix: &RateMatrix,
    opts: &SolverOptions,
    max_iterations: usize,
    stop_on_stall: bool,
) -> StationarySolution {
    let n = matrix.len();
    let rate = matrix.max_outflow();
    let mut pi = vec![1.0 / n as f64; n];
    let mut flow = vec![0.0; n];
    let check_every = opts.check_every.max(1);
    let mut last_checkpoint: Option<f64> = None;
    let mut residual = f64::INFINITY;
    let mut it = 0;
    if rate == 0.0 {
        return StationarySolution { pi, residual: 0.0, method: SolveMethod::Power, iterations: 0 };
    }
    while it < max_iterations {
        matrix.left_mul(&pi, &mut flow);
        if it % check_every == 0 {
            residual = flow.iter().fold(0.0, |m, v| m.max(v.abs()));
            if residual <= opts.residual_tol {
                break;
            }
            if let Some(prev) = last_checkpoint {
                // Geometric rate per iteration from two checkpoints.
                let ratio = residual / prev;
                if stop_on_stall {
                    let per_step = ratio.powf(1.0 / check_every as f64);
                    let needed = if per_step < 1.0 {
                        (opts.residual_tol / residual).ln() / per_step.ln()
                    } else {
                        f64::INFINITY
                    };
                    if needed > (max_iterations - it) as f64 {
                        break;
                    }
                }
            }
            last_checkpoint = Some(residual);
        }
        for (p, f) in pi.iter_mut().zip(&flow) {
            *p += f / rate;
        }
        it += 1;
        if it % check_every == 0 {
            let s: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|p| *p /= s);
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    if it == max_iterations {
        residual = matrix.balance_residual(&pi);
    }
    StationarySolution { pi, residual, method: SolveMethod::Power, iterations: it }
}

/// Sparse LU of `Gᵀ π = 0` with `π_anchor = 1` moved to the right-hand side.
fn direct(
    matrix: &RateMatrix,
    anchor: usize,
    opts: &SolverOptions,
) -> Result<StationarySolution, SolveError> {
    let first = direct_once(matrix, anchor)?;
    if first.residual <= opts.residual_tol {
        return Ok(first);
    }
    // A poorly chosen anchor loses relative accuracy; re-anchor at the mode.
    let second = direct_once(matrix, argmax(&first.pi))?;
    if second.residual.is_finite() && second.residual <= first.residual {
        Ok(second)
    } else {
        Ok(first)
    }
}

fn direct_once(matrix: &RateMatrix, anchor: usize) -> Result<StationarySolution, SolveError> {
    let n = matrix.len();
    let reduced = |k: usize| if k < anchor { k } else { k - 1 };
    let mut triplets = Vec::with_capacity(matrix.nnz() + n);
    let mut rhs = vec![0.0; n - 1];
    for i in 0..n {
        if i != anchor {
            triplets.push(Triplet::new(reduced(i), reduced(i), matrix.diag(i)));
        }
        for (j, r) in matrix.row(i) {
            if j == anchor {
                continue;
            }
            if i == anchor {
                rhs[reduced(j)] -= r;
            } else {
                triplets.push(Triplet::new(reduced(j), reduced(i), r));
            }
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n - 1, n - 1, &triplets)
        .map_err(|_| SolveError::Singular)?;
    let lu = a.sp_lu().map_err(|_| SolveError::Singular)?;
    let b = Mat::from_fn(n - 1, 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    let mut pi = vec![0.0; n];
    for (i, p) in pi.iter_mut().enumerate() {
        *p = if i == anchor { 1.0 } else { x[(reduced(i), 0)] };
    }
    let scale = pi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(SolveError::Invalid { residual: f64::INFINITY });
    }
    // Round-off can leave tiny negatives in states of negligible mass.
    for p in pi.iter_mut() {
        if *p < 0.0 {
            if *p < -1e-9 * scale {
                return Err(SolveError::Invalid { residual: matrix.balance_residual(&pi) });
            }
            *p = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    let residual = matrix.balance_residual(&pi);
    if !residual.is_finite() {
        return Err(SolveError::Invalid { residual });
    }
    Ok(StationarySolution { pi, residual, method: SolveMethod::Direct, iterations: 0 })
}

/// Stationary law of the truncated reduced chain.
#[derive(Clone, Debug)]
pub struct StationaryPmf {
    pub space: StateSpace,
    pub prob: Vec<f64>,
    pub queue_cap: u32,
    /// Fraction of arrivals lost to the truncation, `P(ℓ = L)`.
    pub tail_bound: f64,
    pub residual: f64,
    pub method: SolveMethod,
}

impl StationaryPmf {
    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = (CtmcState, f64)> + '_ {
        (0..self.len()).map(move |i| (self.space.state(i), self.prob[i]))
    }

    pub fn total_mass(&self) -> f64 {
        self.prob.iter().sum()
    }
}

/// Stationary law of a built generator.
pub fn stationary(
    generator: &Generator,
    params: &SystemParams,
    opts: &SolverOptions,
) -> Result<StationaryPmf, SolveError> {
    let space = &generator.space;
    let sol = if params.lambda == 0.0 {
        // Everything drains to the empty state, which then never leaves.
        let mut pi = vec![0.0; space.len()];
        pi[space.index(&vec![0; space.dim()], 0).unwrap_or(0)] = 1.0;
        let residual = generator.matrix.balance_residual(&pi);
        StationarySolution { pi, residual, method: SolveMethod::Direct, iterations: 0 }
    } else {
        let anchor = generator.central_state(params);
        stationary_with_anchor(&generator.matrix, opts, Some(anchor))?
    };
    let tail_bound = if params.lambda > 0.0 {
        sol.pi.iter().zip(&generator.dropped).map(|(p, r)| p * r).sum::<f64>() / params.lambda
    } else {
        0.0
    };
    Ok(StationaryPmf {
        space: space.clone(),
        prob: sol.pi,
        queue_cap: space.queue_cap(),
        tail_bound,
        residual: sol.residual,
        method: sol.method,
    })
}

/// Builds and solves the truncated chain, doubling the queue capacity until
/// the dropped-arrival fraction is below `opts.queue_tail_tol`.
pub fn solve_ctmc(params: &SystemParams, opts: &SolverOptions) -> Result<StationaryPmf, SolveError> {
    let mut cap = opts
        .initial_queue_cap
        .unwrap_or_else(|| (10.0 * params.lambda.sqrt() + 10.0).ceil() as u32)
        .max(1);
    loop {
        let states = state_count(params.dim(), params.n, cap);
        if states > opts.max_states as u128 {
            return Err(SolveError::TooLarge { states });
        }
        let generator = Generator::build(params, cap);
        let pmf = stationary(&generator, params, opts)?;
        if pmf.tail_bound < opts.queue_tail_tol {
            return Ok(pmf);
        }
        if cap >= opts.max_queue_cap {
            return Err(SolveError::Truncation { tail: pmf.tail_bound, cap });
        }
        cap = (cap * 2).min(opts.max_queue_cap);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_type::PhaseType;

    #[test]
    fn symmetric_toy() {
        let m = RateMatrix::from_dense(&[[-1.0, 1.0], [1.0, -1.0]]);
        for method in [SolveMethod::Power, SolveMethod::Direct, SolveMethod::Auto] {
            let opts = SolverOptions { method, ..Default::default() };
            let s = stationary_vector(&m, &opts).unwrap();
            assert!((s.pi[0] - 0.5).abs() < 1e-12, "{method:?}");
        }
    }

    #[test]
    fn power_and_direct_agree() {
        let params = SystemParams::new(6.0, 5, 0.8, PhaseType::erlang2(2.0).unwrap()).unwrap();
        let g = Generator::build(&params, 12);
        let power = stationary_vector(
            &g.matrix,
            &SolverOptions { method: SolveMethod::Power, ..Default::default() },
        )
        .unwrap();
        let direct = stationary_vector(
            &g.matrix,
            &SolverOptions { method: SolveMethod::Direct, ..Default::default() },
        )
        .unwrap();
        let gap = power.pi.iter().zip(&direct.pi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(gap < 1e-9, "gap {gap}");
        assert!(power.residual <= 1e-10 && direct.residual <= 1e-10);
    }

    #[test]
    fn power_reports_nonconvergence() {
        let params = SystemParams::new(50.0, 55, 0.5, PhaseType::exponential(1.0).unwrap()).unwrap();
        let g = Generator::build(&params, 90);
        let opts = SolverOptions { method: SolveMethod::Power, max_iterations: 10, ..Default::default() };
        assert!(matches!(
            stationary_vector(&g.matrix, &opts),
            Err(SolveError::NonConvergence { iterations: 10, .. })
        ));
    }

    #[test]
    fn structural_zeros_carry_no_mass() {
        let params = SystemParams::new(8.0, 6, 1.0, PhaseType::hyperexponential2(0.4, 1.0, 2.0).unwrap())
            .unwrap();
        let pmf = solve_ctmc(&params, &SolverOptions::default()).unwrap();
        for (st, p) in pmf.support() {
            if st.ell > 0 {
                assert_eq!(st.busy(), 6);
            }
            assert!(p >= 0.0);
        }
        assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
        assert!(pmf.tail_bound < 1e-9);
    }
}
