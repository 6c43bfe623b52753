//! The piecewise Ornstein–Uhlenbeck diffusion
//!
//! ```text
//! dY = b(Y) dt + √Σ dW,   b(x) = −pβ − R(x − p(eᵀx)⁺) − αp(eᵀx)⁺
//! ```
//!
//! whose drift is affine on either side of the hyperplane `eᵀx = 0`.

mod cv;
mod exact;

pub use cv::{stationary_means, BatchedMean};
pub use exact::{ContinuousLaw1d, Ou1d, Ou1dError};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;

use crate::ctmc::SystemParams;
use crate::functions::TestFunction;
use crate::linalg::Matrix;
use crate::phase_type::DerivedParams;
use crate::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionModel {
    pub beta: f64,
    pub alpha: f64,
    pub p: Vec<f64>,
    pub r: Matrix,
    pub mu: f64,
    pub gamma: Vec<f64>,
    pub sigma: Matrix,
    pub sqrt_sigma: Matrix,
}

impl DiffusionModel {
    pub fn new(beta: f64, alpha: f64, p: Vec<f64>, derived: &DerivedParams) -> Self {
        Self {
            beta,
            alpha,
            p,
            r: derived.r.clone(),
            mu: derived.mu,
            gamma: derived.gamma.clone(),
            sigma: derived.sigma.clone(),
            sqrt_sigma: derived.sqrt_sigma.clone(),
        }
    }

    /// The diffusion limit of a staffed system, using its realized β.
    pub fn from_params(params: &SystemParams) -> Self {
        Self::new(params.beta_eff, params.alpha, params.pht.p().to_vec(), &params.derived)
    }

    /// Same drift with `Σ = 0`.
    pub fn without_noise(&self) -> Self {
        let d = self.dim();
        Self { sigma: Matrix::zeros(d, d), sqrt_sigma: Matrix::zeros(d, d), ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let pos = x.iter().sum::<f64>().max(0.0);
        for i in 0..d {
            let mut rx = 0.0;
            for j in 0..d {
                rx += self.r[(i, j)] * (x[j] - self.p[j] * pos);
            }
            out[i] = -self.p[i] * self.beta - rx - self.alpha * self.p[i] * pos;
        }
    }

    /// `G_Y f(x) = ∇f·b + ½ Σ_ij Σ_ij ∂_ij f`.
    pub fn generator_apply(&self, f: &dyn TestFunction, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut b = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        self.drift(x, &mut b);
        f.gradient(x, &mut g);
        f.hessian(x, &mut h);
        let mut out = 0.0;
        for i in 0..d {
            out += g[i] * b[i];
            for j in 0..d {
                out += 0.5 * self.sigma[(i, j)] * h[i * d + j];
            }
        }
        out
    }

    /// Zero of the drift on the side of the kink selected by the sign of β.
    pub fn drift_fixed_point(&self) -> Vec<f64> {
        if self.beta >= 0.0 {
            self.gamma.iter().map(|g| -self.beta * g / self.mu).collect()
        } else {
            self.p.iter().map(|p| -self.beta * p / self.alpha).collect()
        }
    }

    /// Exact stationary law; only for `d = 1`.
    pub fn exact_1d(&self) -> Result<Ou1d, Ou1dError> {
        if self.dim() != 1 {
            return Err(Ou1dError::Dimension(self.dim()));
        }
        Ou1d::new(self.beta, self.r[(0, 0)], self.alpha, self.sigma[(0, 0)])
    }

    /// Euler–Maruyama chain `x ← x + b(x)dt + √dt·√Σ·ξ`, started at the drift
    /// fixed point, retaining every `thinning`-th state after burn-in.
    pub fn euler_maruyama_samples(&self, cfg: &SdeConfig) -> Result<SdeSamples, SdeError> {
        if !(cfg.dt > 0.0) || !(cfg.burn_in >= 0.0) || cfg.thinning == 0 {
            return Err(SdeError::Config);
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut x = self.drift_fixed_point();
        let mut b = vec![0.0; d];
        let mut xi = vec![0.0; d];
        let sqrt_dt = cfg.dt.sqrt();
        let noise = Matrix::from_fn(d, d, |i, j| self.sqrt_sigma[(i, j)] * sqrt_dt);
        let burn_steps = (cfg.burn_in / cfg.dt).ceil() as u64;
        let total = burn_steps + cfg.n_samples as u64 * cfg.thinning as u64;
        let mut data = Vec::with_capacity(cfg.n_samples * d);
        for step in 1..=total {
            self.drift(&x, &mut b);
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let mut big = false;
            for i in 0..d {
                let mut w = 0.0;
                for j in 0..=i {
                    w += noise[(i, j)] * xi[j];
                }
                x[i] += b[i] * cfg.dt + w;
                big |= !(x[i].abs() <= 1e6);
            }
            if big {
                return Err(SdeError::BlowUp { time: step as f64 * cfg.dt, x });
            }
            if step > burn_steps && (step - burn_steps).is_multiple_of(cfg.thinning as u64) {
                data.extend_from_slice(&x);
            }
        }
        Ok(SdeSamples { dim: d, data })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    pub burn_in: f64,
    pub n_samples: usize,
    /// Steps between retained samples.
    pub thinning: usize,
    pub seed: u64,
}

impl SdeConfig {
    /// `dt = min(1e-3, 0.1/max(ν_i, α))`, burn-in 50 time units.
    pub fn for_model(nu: &[f64], alpha: f64, n_samples: usize, seed: u64) -> Self {
        let fastest = nu.iter().copied().fold(alpha, f64::max);
        Self { dt: (0.1 / fastest).min(1e-3), burn_in: 50.0, n_samples, thinning: 100, seed }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SdeError {
    #[error("invalid SDE configuration (dt > 0, burn_in ≥ 0, thinning ≥ 1 required)")]
    Config,
    #[error("Euler–Maruyama iterate left |x| ≤ 1e6 at t = {time}: {x:?}")]
    BlowUp { time: f64, x: Vec<f64> },
}

/// Retained SDE states, row-major `len × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdeSamples {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SdeSamples {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.iter().map(|x| x[k]).collect()
    }

    /// `f` evaluated at every sample.
    pub fn map(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        self.iter().map(f).collect()
    }
}
