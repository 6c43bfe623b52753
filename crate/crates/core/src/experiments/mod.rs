//! Distances between the queue and the diffusion, rate fits and λ sweeps.

mod distance;

pub use distance::{sliced_w1, wasserstein1_empirical, wasserstein1_exact_1d, DistanceError, Law1d, PointCloud};

use crate::ctmc::{scaled_system_law, solve_ctmc, ParamsError, ScaledLaw, SolveError, SolverOptions, SystemParams};
use crate::functions::{default_family, Observable};
use crate::ou::{stationary_means, DiffusionModel, Ou1dError, SdeConfig, SdeError, SdeSamples};
use crate::phase_type::PhaseType;
use crate::prelude::*;
use crate::quad::QuadError;
use crate::stats::{iid_estimate, linear_fit, Estimate};

/// Smallest arrival rate a sweep accepts; the rate bound is stated for `λ ≥ 4`.
pub const MIN_LAMBDA: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("a rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("distances must be positive and finite for a log-log fit (λ = {lambda}, value {value})")]
    NonPositive { lambda: f64, value: f64 },
}

/// Least-squares line through `(ln λ, ln distance)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `√λ · distance` per point.
    pub normalized: Vec<f64>,
}

impl RateFit {
    /// max/min of the normalized sequence.
    pub fn normalized_spread(&self) -> f64 {
        let max = self.normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.normalized.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

pub fn fit_rate(lambdas: &[f64], distances: &[f64]) -> Result<RateFit, FitError> {
    let n = lambdas.len().min(distances.len());
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    for (&lambda, &value) in lambdas.iter().zip(distances) {
        if !(value > 0.0 && value.is_finite() && lambda > 0.0) {
            return Err(FitError::NonPositive { lambda, value });
        }
    }
    let xs: Vec<f64> = lambdas[..n].iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = distances[..n].iter().map(|d| d.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    let normalized = lambdas[..n].iter().zip(distances).map(|(l, d)| l.sqrt() * d).collect();
    Ok(RateFit { slope: fit.slope, intercept: fit.intercept, r_squared: fit.r_squared, normalized })
}

/// An absolute gap with its Monte Carlo error. `batches` holds the same
/// quantity recomputed on each batch of the diffusion samples and is empty
/// when both sides are exact.
#[derive(Clone, Debug, PartialEq)]
pub struct Gap {
    pub value: f64,
    pub stderr: f64,
    pub batches: Vec<f64>,
}

impl Gap {
    fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, batches: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentGapEntry {
    pub observable: Observable,
    /// Expectation under the scaled queue law.
    pub queue: f64,
    /// Expectation under the diffusion (exact or sample mean).
    pub diffusion: f64,
    pub gap: Gap,
}

/// Distances between the scaled queue law and the diffusion at one λ.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceReport {
    pub lambda: f64,
    pub n: u32,
    pub beta_eff: f64,
    /// Exact W1 for d = 1 (zero standard error), sliced estimate for d > 1,
    /// `None` when no directions were requested.
    pub w1: Option<Estimate>,
    pub moment_gaps: Vec<MomentGapEntry>,
    /// Euclidean norm of the gaps of all degree-1 monomials.
    pub gap_m1: Gap,
    /// Euclidean norm of the gaps of all degree-2 monomials.
    pub gap_m2: Gap,
    /// `E|X̃|^m` for `m = 1..=max_moment`.
    pub abs_moments: Vec<f64>,
    pub queue_cap: u32,
    pub tail_bound: f64,
}

impl DistanceReport {
    pub fn sqrt_lambda_w1(&self) -> Option<f64> {
        self.w1.map(|w| self.lambda.sqrt() * w.mean)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdeSettings {
    /// `None` picks `min(1e-3, 0.1/max(ν_i, α))`.
    pub dt: Option<f64>,
    pub burn_in: f64,
    pub n_samples: usize,
    pub thinning: usize,
    /// Used unchanged at every λ, so sweep points share their noise.
    pub seed: u64,
}

impl Default for SdeSettings {
    fn default() -> Self {
        Self { dt: None, burn_in: 50.0, n_samples: 1_000_000, thinning: 100, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub beta: f64,
    pub alpha: f64,
    pub pht: PhaseType,
    pub solver: SolverOptions,
    pub sde: SdeSettings,
    /// Directions for the sliced W1 when d > 1; 0 skips it.
    pub n_directions: usize,
    pub n_batches: usize,
    /// Degree of the generator control variates used for diffusion means
    /// when d > 1; 0 gives plain sample means.
    pub cv_degree: u32,
    pub family: Vec<Observable>,
    pub max_moment: u32,
}

impl SweepConfig {
    pub fn new(beta: f64, alpha: f64, pht: PhaseType) -> Self {
        let family = default_family(pht.dim());
        Self {
            beta,
            alpha,
            pht,
            solver: SolverOptions::default(),
            sde: SdeSettings::default(),
            n_directions: 32,
            n_batches: 20,
            cv_degree: 3,
            family,
            max_moment: 4,
        }
    }

    fn sde_config(&self, model: &DiffusionModel) -> SdeConfig {
        let mut cfg = SdeConfig::for_model(self.pht.nu(), model.alpha, self.sde.n_samples, self.sde.seed);
        if let Some(dt) = self.sde.dt {
            cfg.dt = dt;
        }
        cfg.burn_in = self.sde.burn_in;
        cfg.thinning = self.sde.thinning;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("λ = {0} is below the supported range (λ ≥ 4)")]
    LambdaTooSmall(f64),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    ExactLaw(#[from] Ou1dError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// Solves the chain at one λ and compares it with the diffusion.
pub fn distance_report(lambda: f64, cfg: &SweepConfig) -> Result<DistanceReport, SweepError> {
    if !(lambda >= MIN_LAMBDA) {
        return Err(SweepError::LambdaTooSmall(lambda));
    }
    let params = SystemParams::staffed(lambda, cfg.beta, cfg.alpha, cfg.pht.clone())?;
    let pmf = solve_ctmc(&params, &cfg.solver)?;
    let law = scaled_system_law(&pmf, &params);
    let model = DiffusionModel::from_params(&params);
    let abs_moments = (1..=cfg.max_moment)
        .map(|m| law.expect(|x| Observable::AbsPower(m).eval(x)))
        .collect();
    let (w1, moment_gaps) = if params.dim() == 1 {
        exact_comparison(&law, &model, cfg)?
    } else {
        let samples = model.euler_maruyama_samples(&cfg.sde_config(&model))?;
        sampled_comparison(&law, &model, &samples, cfg)?
    };
    let gap_m1 = aggregate(&moment_gaps, 1);
    let gap_m2 = aggregate(&moment_gaps, 2);
    Ok(DistanceReport {
        lambda,
        n: params.n,
        beta_eff: params.beta_eff,
        w1,
        moment_gaps,
        gap_m1,
        gap_m2,
        abs_moments,
        queue_cap: pmf.queue_cap,
        tail_bound: pmf.tail_bound,
    })
}

fn exact_comparison(
    law: &ScaledLaw,
    model: &DiffusionModel,
    cfg: &SweepConfig,
) -> Result<(Option<Estimate>, Vec<MomentGapEntry>), SweepError> {
    let exact = model.exact_1d()?;
    let (xs, ps) = law.sorted_1d();
    let w1 = wasserstein1_exact_1d(Law1d::Discrete { xs: &xs, ps: &ps }, Law1d::Continuous(&exact))?;
    let mut gaps = Vec::with_capacity(cfg.family.len());
    for obs in &cfg.family {
        let queue = law.expect(|x| obs.eval(x));
        let diffusion = exact.expect(|x| obs.eval(&[x]))?;
        gaps.push(MomentGapEntry { observable: obs.clone(), queue, diffusion, gap: Gap::exact((queue - diffusion).abs()) });
    }
    Ok((Some(Estimate { mean: w1, stderr: 0.0 }), gaps))
}

fn sampled_comparison(
    law: &ScaledLaw,
    model: &DiffusionModel,
    samples: &SdeSamples,
    cfg: &SweepConfig,
) -> Result<(Option<Estimate>, Vec<MomentGapEntry>), SweepError> {
    let d = samples.dim;
    let w1 = if cfg.n_directions > 0 {
        let points: Vec<f64> = law.atoms().flat_map(|(x, _)| x.iter().copied()).collect();
        Some(sliced_w1(
            PointCloud { dim: d, points: &points, weights: Some(law.probs()) },
            PointCloud { dim: d, points: &samples.data, weights: None },
            cfg.n_directions,
            cfg.sde.seed ^ 0x5eed,
        )?)
    } else {
        None
    };
    let evals: Vec<Box<dyn Fn(&[f64]) -> f64 + '_>> =
        cfg.family.iter().map(|o| Box::new(move |x: &[f64]| o.eval(x)) as Box<dyn Fn(&[f64]) -> f64>).collect();
    let refs: Vec<&dyn Fn(&[f64]) -> f64> = evals.iter().map(|b| b.as_ref()).collect();
    let means = stationary_means(model, samples, &refs, cfg.cv_degree, cfg.n_batches);
    let gaps = cfg
        .family
        .iter()
        .zip(means)
        .map(|(obs, m)| {
            let queue = law.expect(|x| obs.eval(x));
            let diffusion = m.estimate.mean;
            let batches = m.batch_means.iter().map(|b| (queue - b).abs()).collect();
            MomentGapEntry {
                observable: obs.clone(),
                queue,
                diffusion,
                gap: Gap { value: (queue - diffusion).abs(), stderr: m.estimate.stderr, batches },
            }
        })
        .collect();
    Ok((w1, gaps))
}

fn aggregate(entries: &[MomentGapEntry], degree: u32) -> Gap {
    let selected: Vec<&MomentGapEntry> = entries
        .iter()
        .filter(|e| matches!(e.observable, Observable::Monomial(_)) && e.observable.order() == degree)
        .collect();
    let value = selected.iter().map(|e| e.gap.value * e.gap.value).sum::<f64>().sqrt();
    let n = selected.iter().map(|e| e.gap.batches.len()).min().unwrap_or(0);
    if n == 0 {
        return Gap::exact(value);
    }
    let batches: Vec<f64> = (0..n)
        .map(|b| selected.iter().map(|e| e.gap.batches[b] * e.gap.batches[b]).sum::<f64>().sqrt())
        .collect();
    let stderr = iid_estimate(&batches).stderr;
    Gap { value, stderr, batches }
}

/// Rate fits on the sweep; each is `None` when fewer than three points
/// produced a positive value.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepFits {
    pub w1: Result<RateFit, FitError>,
    pub gap_m1: Result<RateFit, FitError>,
    pub gap_m2: Result<RateFit, FitError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub reports: Vec<DistanceReport>,
    pub failures: Vec<(f64, SweepError)>,
    pub warnings: Vec<String>,
    pub fits: SweepFits,
}

/// Runs [`distance_report`] for each λ in order and fits log–log slopes.
/// Per-λ failures are recorded and the sweep continues.
pub fn rate_sweep(cfg: &SweepConfig, lambdas: &[f64]) -> SweepOutcome {
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    for &lambda in lambdas {
        match distance_report(lambda, cfg) {
            Ok(r) => reports.push(r),
            Err(e) => {
                if let SweepError::LambdaTooSmall(l) = e {
                    warnings.push(alloc::format!("skipped λ = {l}: sweeps require λ ≥ {MIN_LAMBDA}"));
                }
                failures.push((lambda, e));
            }
        }
    }
    if lambdas.len() < 3 {
        warnings.push(alloc::format!("{} λ values given; rate fits need at least 3", lambdas.len()));
    }
    let ls: Vec<f64> = reports.iter().map(|r| r.lambda).collect();
    let pick = |f: &dyn Fn(&DistanceReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    let fits = SweepFits {
        w1: fit_rate(&ls, &pick(&|r| r.w1.map_or(f64::NAN, |w| w.mean))),
        gap_m1: fit_rate(&ls, &pick(&|r| r.gap_m1.value)),
        gap_m2: fit_rate(&ls, &pick(&|r| r.gap_m2.value)),
    };
    SweepOutcome { reports, failures, warnings, fits }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentRatio {
    pub m: u32,
    pub min: f64,
    pub max: f64,
    /// max/min across the sweep; 1 for a single report.
    pub ratio: f64,
    pub flagged: bool,
}

/// Spread of `E|X̃|^m` across the sweep, flagged above `bound`.
pub fn moment_boundedness(reports: &[DistanceReport], bound: f64) -> Vec<MomentRatio> {
    let max_m = reports.iter().map(|r| r.abs_moments.len()).min().unwrap_or(0);
    (0..max_m)
        .map(|k| {
            let vals = reports.iter().map(|r| r.abs_moments[k]);
            let min = vals.clone().fold(f64::INFINITY, f64::min);
            let max = vals.fold(f64::NEG_INFINITY, f64::max);
            let ratio = if reports.len() == 1 || max == min { 1.0 } else { max / min };
            MomentRatio { m: k as u32 + 1, min, max, ratio, flagged: ratio > bound }
        })
        .collect()
}
