//! JSON run configuration.

use std::path::Path;

use serde::Deserialize;
use steinq_core::ctmc::{ParamsError, SolverOptions, SystemParams};
use steinq_core::experiments::{SdeSettings, SweepConfig};
use steinq_core::functions::{default_family, Observable, Polynomial};
use steinq_core::linalg::Matrix;
use steinq_core::{PhaseType, PhaseTypeError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("phase type: {0}")]
    PhaseType(#[from] PhaseTypeError),
    #[error("system parameters: {0}")]
    Params(#[from] ParamsError),
    #[error("preset {preset} needs field `{field}`")]
    MissingPresetField { preset: &'static str, field: &'static str },
    #[error("explicit phase type needs `p` and `nu`")]
    MissingExplicit,
    #[error("config has neither `lambda` nor `lambdas`")]
    NoLambda,
    #[error("polynomial spec: {0}")]
    Polynomial(String),
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
pub enum Preset {
    H2,
    E2,
    #[serde(alias = "exp", alias = "M")]
    Exp,
}

/// Either an explicit `(p, ν, P)` triple or a named preset with its
/// parameters.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseTypeSpec {
    pub preset: Option<Preset>,
    pub p: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    #[serde(rename = "P")]
    pub routing: Option<Vec<Vec<f64>>>,
    pub p1: Option<f64>,
    pub nu1: Option<f64>,
    pub nu2: Option<f64>,
    pub theta: Option<f64>,
    pub mu: Option<f64>,
}

impl PhaseTypeSpec {
    pub fn build(&self) -> Result<PhaseType, ConfigError> {
        let need = |v: Option<f64>, preset, field| v.ok_or(ConfigError::MissingPresetField { preset, field });
        Ok(match self.preset {
            Some(Preset::H2) => PhaseType::hyperexponential2(
                need(self.p1, "H2", "p1")?,
                need(self.nu1, "H2", "nu1")?,
                need(self.nu2, "H2", "nu2")?,
            )?,
            Some(Preset::E2) => PhaseType::erlang2(need(self.theta, "E2", "theta")?)?,
            Some(Preset::Exp) => PhaseType::exponential(need(self.mu, "exp", "mu")?)?,
            None => {
                let (p, nu) = match (&self.p, &self.nu) {
                    (Some(p), Some(nu)) => (p.clone(), nu.clone()),
                    _ => return Err(ConfigError::MissingExplicit),
                };
                let d = p.len();
                let routing = match &self.routing {
                    Some(rows) => Matrix::from_rows(rows),
                    None => Matrix::zeros(d, d),
                };
                PhaseType::new(p, nu, routing)?
            }
        })
    }
}

/// Polynomial `h`: `{"coeffs": [c0, c1, ...]}` in one variable or
/// `{"terms": [[c, [a1, ..., ad]], ...]}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PolySpec {
    Coeffs { coeffs: Vec<f64> },
    Terms { terms: Vec<(f64, Vec<u32>)> },
}

impl PolySpec {
    pub fn build(&self, dim: usize) -> Result<Polynomial, ConfigError> {
        match self {
            PolySpec::Coeffs { coeffs } => {
                if dim != 1 {
                    return Err(ConfigError::Polynomial(format!("`coeffs` form is one-dimensional, model has d = {dim}")));
                }
                Ok(Polynomial::univariate(coeffs))
            }
            PolySpec::Terms { terms } => {
                if let Some((_, a)) = terms.iter().find(|(_, a)| a.len() != dim) {
                    return Err(ConfigError::Polynomial(format!("exponent {a:?} does not have {dim} entries")));
                }
                Ok(Polynomial::new(dim, terms.clone()))
            }
        }
    }

    /// Parses the command-line form: comma-separated coefficients `c0,c1,...`.
    pub fn parse_coeffs(s: &str) -> Result<Self, ConfigError> {
        let coeffs = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::Polynomial(format!("{s:?}: {e}")))?;
        Ok(PolySpec::Coeffs { coeffs })
    }

    pub fn label(&self) -> String {
        match self {
            PolySpec::Coeffs { coeffs } => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("coeffs[{}]", parts.join(" "))
            }
            PolySpec::Terms { terms } => {
                let parts: Vec<String> = terms.iter().map(|(c, a)| format!("{c}{a:?}")).collect();
                parts.join("+")
            }
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeBlock {
    pub dt: Option<f64>,
    pub burn_in: Option<f64>,
    pub n_samples: Option<usize>,
    pub thinning: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub warmup: Option<f64>,
    pub horizon: Option<f64>,
    pub n_samples: Option<usize>,
    pub sample_interval: Option<f64>,
    pub n_batches: Option<usize>,
    pub min_bin_samples: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub lambda: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub alpha: f64,
    /// Fixes the server count instead of square-root staffing.
    pub n: Option<u32>,
    #[serde(alias = "preset")]
    pub phase_type: PhaseTypeSpec,
    pub queue_tail_tol: Option<f64>,
    #[serde(default)]
    pub sde: SdeBlock,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub h_polynomials: Vec<PolySpec>,
    pub n_directions: Option<usize>,
    pub cv_degree: Option<u32>,
}

fn default_beta() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    1
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn phase_type(&self) -> Result<PhaseType, ConfigError> {
        self.phase_type.build()
    }

    /// The single λ, or the first of `lambdas`.
    pub fn lambda(&self) -> Result<f64, ConfigError> {
        self.lambda
            .or_else(|| self.lambdas.as_ref().and_then(|l| l.first().copied()))
            .ok_or(ConfigError::NoLambda)
    }

    pub fn lambdas(&self) -> Result<Vec<f64>, ConfigError> {
        match (&self.lambdas, self.lambda) {
            (Some(l), _) => Ok(l.clone()),
            (None, Some(l)) => Ok(vec![l]),
            (None, None) => Err(ConfigError::NoLambda),
        }
    }

    pub fn params_at(&self, lambda: f64) -> Result<SystemParams, ConfigError> {
        let pht = self.phase_type()?;
        Ok(match self.n {
            Some(n) => SystemParams::new(lambda, n, self.alpha, pht)?,
            None => SystemParams::staffed(lambda, self.beta, self.alpha, pht)?,
        })
    }

    pub fn params(&self) -> Result<SystemParams, ConfigError> {
        self.params_at(self.lambda()?)
    }

    pub fn solver(&self) -> SolverOptions {
        let mut opts = SolverOptions::default();
        if let Some(t) = self.queue_tail_tol {
            opts.queue_tail_tol = t;
        }
        opts
    }

    pub fn sde_settings(&self) -> SdeSettings {
        let d = SdeSettings::default();
        SdeSettings {
            dt: self.sde.dt,
            burn_in: self.sde.burn_in.unwrap_or(d.burn_in),
            n_samples: self.sde.n_samples.unwrap_or(d.n_samples),
            thinning: self.sde.thinning.unwrap_or(d.thinning),
            seed: self.seed,
        }
    }

    pub fn sweep(&self) -> Result<SweepConfig, ConfigError> {
        let pht = self.phase_type()?;
        let dim = pht.dim();
        let mut cfg = SweepConfig::new(self.beta, self.alpha, pht);
        cfg.solver = self.solver();
        cfg.sde = self.sde_settings();
        if let Some(k) = self.n_directions {
            cfg.n_directions = k;
        }
        if let Some(k) = self.cv_degree {
            cfg.cv_degree = k;
        }
        if let Some(b) = self.sim.n_batches {
            cfg.n_batches = b;
        }
        let mut family = default_family(dim);
        for h in &self.h_polynomials {
            family.push(Observable::Poly(h.build(dim)?));
        }
        cfg.family = family;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_and_explicit_forms() {
        let c = Config::from_json(r#"{"lambda": 50, "alpha": 0.5, "phase_type": {"preset": "E2", "theta": 2}}"#).unwrap();
        assert_eq!(c.phase_type().unwrap(), PhaseType::erlang2(2.0).unwrap());
        assert_eq!(c.beta, 1.0);
        let c = Config::from_json(
            r#"{"lambdas": [25, 100, 400], "alpha": 0.5, "beta": 0.5,
                "preset": {"preset": "H2", "p1": 0.5, "nu1": 1, "nu2": 3}}"#,
        )
        .unwrap();
        assert_eq!(c.lambdas().unwrap(), vec![25.0, 100.0, 400.0]);
        assert!((c.phase_type().unwrap().derive().mu - 1.5).abs() < 1e-14);
        let c = Config::from_json(
            r#"{"lambda": 10, "alpha": 1, "phase_type": {"p": [1, 0], "nu": [2, 2], "P": [[0, 1], [0, 0]]}}"#,
        )
        .unwrap();
        assert_eq!(c.phase_type().unwrap(), PhaseType::erlang2(2.0).unwrap());
    }

    #[test]
    fn errors_are_reported() {
        let c = Config::from_json(r#"{"lambda": 5, "alpha": 1, "phase_type": {"preset": "H2", "p1": 0.5}}"#).unwrap();
        assert!(matches!(c.phase_type(), Err(ConfigError::MissingPresetField { field: "nu1", .. })));
        let c = Config::from_json(r#"{"alpha": 1, "phase_type": {"preset": "exp", "mu": 1}}"#).unwrap();
        assert!(matches!(c.lambda(), Err(ConfigError::NoLambda)));
        assert!(Config::from_json(r#"{"lambda": 5, "alpha": 1, "phase_type": {}, "bogus": 1}"#).is_err());
        let bad = Config::from_json(
            r#"{"lambda": 5, "alpha": 1, "phase_type": {"p": [0.5, 0.5], "nu": [1, 1], "P": [[0.5, 0], [0, 0]]}}"#,
        )
        .unwrap();
        assert!(matches!(bad.phase_type(), Err(ConfigError::PhaseType(PhaseTypeError::NonzeroDiagonal { .. }))));
    }

    #[test]
    fn polynomial_specs() {
        let p = PolySpec::parse_coeffs("0, 1, 0.5").unwrap().build(1).unwrap();
        use steinq_core::TestFunction;
        assert_eq!(p.value(&[2.0]), 4.0);
        let t: PolySpec = serde_json::from_str(r#"{"terms": [[2.0, [1, 1]], [1.0, [0, 2]]]}"#).unwrap();
        let q = t.build(2).unwrap();
        assert_eq!(q.value(&[1.0, 3.0]), 15.0);
        assert!(t.build(3).is_err());
        assert!(PolySpec::parse_coeffs("1,x").is_err());
    }
}
