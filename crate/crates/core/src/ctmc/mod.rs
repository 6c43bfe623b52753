//! The reduced Markov chain of the M/Ph/n+M queue.
//!
//! Under FIFO with phases drawn from `p` at arrival, the phases of waiting
//! customers are i.i.d. `p` and independent of everything else, so
//! `(z, ℓ)` (in-service counts per phase, queue length) is a Markov chain.
//! Its stationary law together with the `Multinomial(ℓ, p)` queue
//! composition recovers the exact law of the scaled system size.

mod generator;
mod law;
mod space;
mod stationary;

pub use generator::{Generator, RateMatrix};
pub use law::{moments, scaled_system_law, MomentTable, ScaledLaw};
pub use space::{CtmcState, StateSpace};
pub(crate) use space::for_each_composition;
pub use stationary::{
    solve_ctmc, stationary, stationary_vector, SolveError, SolveMethod, SolverOptions,
    StationaryPmf, StationarySolution,
};

use crate::phase_type::{DerivedParams, PhaseType};
use crate::prelude::*;

/// Square-root staffing: `n = round((λ + β√λ)/μ)` (at least one server) and
/// the β actually realized by that integer `n`.
pub fn staffing(lambda: f64, beta_target: f64, mu: f64) -> (u32, f64) {
    let n = ((lambda + beta_target * lambda.sqrt()) / mu).round().max(1.0) as u32;
    (n, effective_beta(lambda, n, mu))
}

fn effective_beta(lambda: f64, n: u32, mu: f64) -> f64 {
    if lambda > 0.0 {
        (n as f64 * mu - lambda) / lambda.sqrt()
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParamsError {
    #[error("arrival rate must be finite and non-negative, got {0}")]
    ArrivalRate(f64),
    #[error("abandonment rate must be positive, got {0}")]
    Abandonment(f64),
    #[error("need at least one server")]
    NoServers,
}

/// Parameters of one M/Ph/n+M system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub lambda: f64,
    pub n: u32,
    pub alpha: f64,
    pub pht: PhaseType,
    pub derived: DerivedParams,
    /// `(nμ - λ)/√λ` for the actual integer `n`.
    pub beta_eff: f64,
    /// Spatial scale `1/√λ`; taken as 1 when `λ = 0`, where no scaling exists.
    pub delta: f64,
}

impl SystemParams {
    pub fn new(lambda: f64, n: u32, alpha: f64, pht: PhaseType) -> Result<Self, ParamsError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(ParamsError::ArrivalRate(lambda));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ParamsError::Abandonment(alpha));
        }
        if n == 0 {
            return Err(ParamsError::NoServers);
        }
        let derived = pht.derive();
        let beta_eff = effective_beta(lambda, n, derived.mu);
        let delta = if lambda > 0.0 { 1.0 / lambda.sqrt() } else { 1.0 };
        Ok(Self { lambda, n, alpha, pht, derived, beta_eff, delta })
    }

    /// Staffs the system with [`staffing`] for a target β.
    pub fn staffed(
        lambda: f64,
        beta_target: f64,
        alpha: f64,
        pht: PhaseType,
    ) -> Result<Self, ParamsError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(ParamsError::ArrivalRate(lambda));
        }
        let (n, _) = staffing(lambda, beta_target, pht.derive().mu);
        Self::new(lambda, n, alpha, pht)
    }

    pub fn dim(&self) -> usize {
        self.pht.dim()
    }

    pub fn mu(&self) -> f64 {
        self.derived.mu
    }

    /// `γ n`, the centering of the unscaled system size.
    pub fn center(&self) -> Vec<f64> {
        self.derived.gamma.iter().map(|g| g * self.n as f64).collect()
    }

    /// `x = δ(X - γn)` for an integer system-size vector `X`.
    pub fn scale_point(&self, counts: &[u32], out: &mut [f64]) {
        let n = self.n as f64;
        for i in 0..counts.len() {
            out[i] = self.delta * (counts[i] as f64 - self.derived.gamma[i] * n);
        }
    }
}
