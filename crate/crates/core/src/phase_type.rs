//! Phase-type service-time distributions.
//!
//! A phase-type law is the absorption time of a CTMC on phases `1..=d`
//! started from `p`, holding an exponential(`ν_i`) time in phase `i` and then
//! moving to phase `j` with probability `P_ij` or being absorbed with
//! probability `1 - Σ_j P_ij`.

use rand::Rng;
use rand_distr::Exp1;

use crate::linalg::Matrix;
use crate::prelude::*;

const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PhaseTypeError {
    #[error("dimension mismatch: p has {p} entries, nu has {nu}, routing is {rows}x{cols}")]
    DimensionMismatch { p: usize, nu: usize, rows: usize, cols: usize },
    #[error("phase-type needs at least one phase")]
    Empty,
    #[error("p is not a probability vector (entry {phase} = {value})")]
    NegativeProbability { phase: usize, value: f64 },
    #[error("p is not a probability vector (sum = {sum})")]
    NotStochastic { sum: f64 },
    #[error("rate of phase {phase} is {value}, must be positive and finite")]
    NonPositiveRate { phase: usize, value: f64 },
    #[error("routing entry P[{row}][{col}] = {value} is invalid")]
    InvalidRouting { row: usize, col: usize, value: f64 },
    #[error("routing diagonal P[{phase}][{phase}] must be zero")]
    NonzeroDiagonal { phase: usize },
    #[error("routing row {row} sums to {sum} > 1")]
    RowSumExceedsOne { row: usize, sum: f64 },
    #[error("routing matrix is not transient: I - P is singular")]
    NotTransient,
    #[error("phase {phase} is redundant: it is never entered")]
    RedundantPhase { phase: usize },
}

/// Service law `(p, ν, P)`. Construction validates every structural
/// requirement, so a `PhaseType` value is always usable.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseType {
    p: Vec<f64>,
    nu: Vec<f64>,
    routing: Matrix,
}

/// Quantities derived from a phase-type law that the queue and diffusion
/// models share.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedParams {
    /// Service rate, the reciprocal of the mean service time.
    pub mu: f64,
    /// `R = (I - Pᵀ) diag(ν)`.
    pub r: Matrix,
    /// `γ = μ R⁻¹ p`: fraction of the server load spent in each phase.
    pub gamma: Vec<f64>,
    /// Diffusion covariance.
    pub sigma: Matrix,
    /// Lower-triangular Cholesky factor of `sigma`.
    pub sqrt_sigma: Matrix,
}

/// One simulated service requirement.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceSample {
    pub duration: f64,
    /// Phases visited, in order (0-based).
    pub trace: Vec<usize>,
}

impl PhaseType {
    pub fn new(p: Vec<f64>, nu: Vec<f64>, routing: Matrix) -> Result<Self, PhaseTypeError> {
        let pht = Self { p, nu, routing };
        pht.validate()?;
        Ok(pht)
    }

    pub fn from_rows<R: AsRef<[f64]>>(
        p: &[f64],
        nu: &[f64],
        routing: &[R],
    ) -> Result<Self, PhaseTypeError> {
        let routing = if routing.is_empty() {
            Matrix::zeros(p.len(), p.len())
        } else {
            if routing.iter().any(|r| r.as_ref().len() != routing.len()) {
                return Err(PhaseTypeError::DimensionMismatch {
                    p: p.len(),
                    nu: nu.len(),
                    rows: routing.len(),
                    cols: routing[0].as_ref().len(),
                });
            }
            Matrix::from_rows(routing)
        };
        Self::new(p.to_vec(), nu.to_vec(), routing)
    }

    /// Exponential service with rate `mu`.
    pub fn exponential(mu: f64) -> Result<Self, PhaseTypeError> {
        Self::new(vec![1.0], vec![mu], Matrix::zeros(1, 1))
    }

    /// Two-phase hyper-exponential: rate `nu1` with probability `p1`, else `nu2`.
    pub fn hyperexponential2(p1: f64, nu1: f64, nu2: f64) -> Result<Self, PhaseTypeError> {
        Self::new(vec![p1, 1.0 - p1], vec![nu1, nu2], Matrix::zeros(2, 2))
    }

    /// Erlang-2: two exponential(`theta`) stages in series.
    pub fn erlang2(theta: f64) -> Result<Self, PhaseTypeError> {
        Self::new(
            vec![1.0, 0.0],
            vec![theta, theta],
            Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]),
        )
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn routing(&self) -> &Matrix {
        &self.routing
    }

    /// Probability of leaving service from phase `i`.
    pub fn exit_probability(&self, i: usize) -> f64 {
        (1.0 - self.routing.row(i).iter().sum::<f64>()).max(0.0)
    }

    /// Checks every structural requirement on `(p, ν, P)` and reports the
    /// first one that fails.
    pub fn validate(&self) -> Result<(), PhaseTypeError> {
        let d = self.p.len();
        if d == 0 {
            return Err(PhaseTypeError::Empty);
        }
        if self.nu.len() != d || self.routing.rows() != d || self.routing.cols() != d {
            return Err(PhaseTypeError::DimensionMismatch {
                p: d,
                nu: self.nu.len(),
                rows: self.routing.rows(),
                cols: self.routing.cols(),
            });
        }
        for (phase, &value) in self.p.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(PhaseTypeError::NegativeProbability { phase, value });
            }
        }
        let sum: f64 = self.p.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(PhaseTypeError::NotStochastic { sum });
        }
        for (phase, &value) in self.nu.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PhaseTypeError::NonPositiveRate { phase, value });
            }
        }
        for row in 0..d {
            for col in 0..d {
                let value = self.routing[(row, col)];
                if !(0.0..=1.0).contains(&value) {
                    return Err(PhaseTypeError::InvalidRouting { row, col, value });
                }
            }
            let sum: f64 = self.routing.row(row).iter().sum();
            if sum > 1.0 + PROB_TOL {
                return Err(PhaseTypeError::RowSumExceedsOne { row, sum });
            }
        }
        if Matrix::identity(d).sub(&self.routing).lu().is_err() {
            return Err(PhaseTypeError::NotTransient);
        }
        if let Some(phase) = (0..d).find(|&i| self.routing[(i, i)] != 0.0) {
            return Err(PhaseTypeError::NonzeroDiagonal { phase });
        }
        for phase in 0..d {
            let entered = self.p[phase] > 0.0 || (0..d).any(|j| self.routing[(j, phase)] > 0.0);
            if !entered {
                return Err(PhaseTypeError::RedundantPhase { phase });
            }
        }
        Ok(())
    }

    /// Computes `μ`, `R`, `γ`, the diffusion covariance and its factor.
    ///
    /// The covariance is
    ///
    /// ```text
    /// Σ = diag(p) + (1/μ) [ Σ_k γ_k ν_k H^k + (I - Pᵀ) diag(ν) diag(γ) (I - P) ]
    /// H^k_ii = P_ki (1 - P_ki),   H^k_ij = -P_ki P_kj  (i ≠ j)
    /// ```
    ///
    /// The `1/μ` weight on the service terms comes from `n/λ → 1/μ` under
    /// square-root staffing; it is 1 for unit-mean service.
    pub fn derive(&self) -> DerivedParams {
        let d = self.dim();
        let p = &self.p;
        let nu = &self.nu;
        let routing = &self.routing;
        let i_minus_pt = Matrix::identity(d).sub(&routing.transpose());
        let r = i_minus_pt.matmul(&Matrix::diag(nu));
        let r_inv_p = r.solve(p).expect("validated phase-type has invertible R");
        let mean: f64 = r_inv_p.iter().sum();
        let mu = 1.0 / mean;
        let gamma: Vec<f64> = r_inv_p.iter().map(|v| mu * v).collect();

        let mut service = Matrix::zeros(d, d);
        for k in 0..d {
            let w = gamma[k] * nu[k];
            for i in 0..d {
                let pki = routing[(k, i)];
                for j in 0..d {
                    let h = if i == j { pki * (1.0 - pki) } else { -pki * routing[(k, j)] };
                    service[(i, j)] += w * h;
                }
            }
        }
        let nu_gamma: Vec<f64> = nu.iter().zip(&gamma).map(|(a, b)| a * b).collect();
        let i_minus_p = Matrix::identity(d).sub(routing);
        let flow = i_minus_pt.matmul(&Matrix::diag(&nu_gamma)).matmul(&i_minus_p);
        let sigma = Matrix::diag(p).add(&service.add(&flow).scale(1.0 / mu));
        // Exact symmetrization; the two products above can differ in the last bit.
        let sigma = Matrix::from_fn(d, d, |i, j| 0.5 * (sigma[(i, j)] + sigma[(j, i)]));
        let sqrt_sigma = sigma.cholesky().expect("diffusion covariance is positive definite");
        DerivedParams { mu, r, gamma, sigma, sqrt_sigma }
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.derive().mu
    }

    /// Draws the initial phase from `p`.
    pub fn initial_phase<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.p, rng).unwrap_or(self.dim() - 1)
    }

    /// Draws the phase following `from`, or `None` on absorption.
    pub fn next_phase<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> Option<usize> {
        pick(self.routing.row(from), rng)
    }

    /// Exponential holding time in phase `i`.
    pub fn holding_time<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.nu[i]
    }

    /// Simulates one service requirement by running the absorbing chain.
    pub fn sample_service<R: Rng + ?Sized>(&self, rng: &mut R) -> ServiceSample {
        let mut phase = self.initial_phase(rng);
        let mut duration = 0.0;
        let mut trace = vec![phase];
        loop {
            duration += self.holding_time(phase, rng);
            match self.next_phase(phase, rng) {
                Some(next) => {
                    phase = next;
                    trace.push(phase);
                }
                None => return ServiceSample { duration, trace },
            }
        }
    }
}

/// Samples an index from a (sub-)probability vector; `None` carries the
/// missing mass.
fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Some(i);
        }
    }
    None
}
