//! Steady-state analysis of M/Ph/n+M many-server queues in the Halfin–Whitt
//! regime and of their piecewise Ornstein–Uhlenbeck diffusion approximation.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: building and solving the reduced Markov chain of the queue,
//! simulating the full FIFO system, sampling and integrating the diffusion,
//! and evaluating the Stein-method quantities (generator differences,
//! Poisson-equation solutions, state-space-collapse statistics) that connect
//! the two. File formats and the command line live in the `steinq` crate.
//!
//! Module map:
//!
//! * [`phase_type`]: service-time law `(p, ν, P)` and its derived quantities.
//! * [`ctmc`]: staffing, the truncated reduced chain, its stationary law and
//!   the law of the scaled system size.
//! * [`des`]: event-driven simulation of the full FIFO system.
//! * [`ou`]: the piecewise OU diffusion (drift, generator, sampler, exact
//!   one-dimensional law).
//! * [`stein`]: generator coupling, Taylor decomposition, basic adjoint
//!   relation residuals and the one-dimensional Poisson equation.
//! * [`experiments`]: distances, rate fits and λ sweeps.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod ctmc;
pub mod des;
pub mod experiments;
pub mod functions;
pub mod linalg;
pub mod ou;
pub mod phase_type;
pub mod quad;
pub mod stats;
pub mod stein;

mod prelude {
    #[allow(unused_imports)]
    pub(crate) use alloc::{boxed::Box, string::String, vec, vec::Vec};
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float;
}

pub use ctmc::{
    staffing, CtmcState, Generator, RateMatrix, ScaledLaw, SolveMethod, SolverOptions,
    StationaryPmf, SystemParams,
};

pub use functions::{Bump, Polynomial, TestFunction};

pub use phase_type::{DerivedParams, PhaseType, PhaseTypeError};

pub use des::{SampleSet, SimConfig, SimOutput};

pub use experiments::{DistanceReport, RateFit};

pub use ou::{DiffusionModel, Ou1d, SdeConfig};
