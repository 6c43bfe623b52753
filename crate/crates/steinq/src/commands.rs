//! Subcommand implementations. Each writes its CSV output and returns a
//! short human-readable summary.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use steinq_core::ctmc::{scaled_system_law, solve_ctmc as solve, SystemParams};
use steinq_core::des::{default_warmup, simulate as run_sim, ssc_conditional, ssc_mean_check, SimConfig};
use steinq_core::experiments::{moment_boundedness, rate_sweep as sweep};
use steinq_core::ou::{ContinuousLaw1d, DiffusionModel, SdeConfig};
use steinq_core::stein::{poisson_solve_1d, stein_gap_1d, PoissonOptions};
use steinq_core::TestFunction;

use crate::config::{Config, PolySpec};
use crate::output;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn describe(params: &SystemParams) -> String {
    format!(
        "λ = {}, n = {}, β_eff = {:.6}, α = {}, d = {}, μ = {:.6}",
        params.lambda,
        params.n,
        params.beta_eff,
        params.alpha,
        params.dim(),
        params.mu()
    )
}

pub fn solve_ctmc(cfg: &Config, out: &Path, law_out: Option<&Path>) -> Result<String> {
    let params = cfg.params()?;
    let pmf = solve(&params, &cfg.solver())?;
    let law = scaled_system_law(&pmf, &params);
    output::write_pmf(create(out)?, &pmf)?;
    let law_path = law_out.map_or_else(|| output::law_path(out), Path::to_path_buf);
    output::write_law(create(&law_path)?, &law)?;
    Ok(format!(
        "{}\nstates {}, queue cap {}, tail bound {:.3e}, balance residual {:.3e}, method {:?}\nwrote {} and {}",
        describe(&params),
        pmf.len(),
        pmf.queue_cap,
        pmf.tail_bound,
        pmf.residual,
        pmf.method,
        out.display(),
        law_path.display()
    ))
}

fn sim_config(cfg: &Config, seed: Option<u64>) -> Result<SimConfig> {
    let params = cfg.params()?;
    let interval = cfg.sim.sample_interval.unwrap_or(1.0);
    let warmup = cfg.sim.warmup.unwrap_or_else(|| default_warmup(&params));
    let horizon = cfg
        .sim
        .horizon
        .unwrap_or_else(|| warmup + cfg.sim.n_samples.unwrap_or(10_000) as f64 * interval);
    let sim = SimConfig { params, warmup, horizon, sample_interval: interval, seed: seed.unwrap_or(cfg.seed) };
    sim.validate()?;
    Ok(sim)
}

pub fn simulate(cfg: &Config, seed: Option<u64>, out: &Path) -> Result<String> {
    let sim = sim_config(cfg, seed)?;
    let res = run_sim(&sim)?;
    output::write_snapshots(create(out)?, &res.samples)?;
    let s = &res.stats;
    Ok(format!(
        "{}\n{} snapshots; arrivals {}, departures {}, abandonments {}, events {}, work-conservation violations {}\nwrote {}",
        describe(&sim.params),
        res.samples.len(),
        s.arrivals,
        s.departures,
        s.abandonments,
        s.events,
        s.work_conservation_violations,
        out.display()
    ))
}

pub fn simulate_sde(cfg: &Config, out: &Path) -> Result<String> {
    let params = cfg.params()?;
    let model = DiffusionModel::from_params(&params);
    let settings = cfg.sde_settings();
    let mut sde = SdeConfig::for_model(params.pht.nu(), params.alpha, settings.n_samples, settings.seed);
    if let Some(dt) = settings.dt {
        sde.dt = dt;
    }
    sde.burn_in = settings.burn_in;
    sde.thinning = settings.thinning;
    let samples = model.euler_maruyama_samples(&sde)?;
    output::write_sde(create(out)?, &samples)?;
    Ok(format!(
        "{}\n{} samples at dt = {}, thinning {}, burn-in {}\nwrote {}",
        describe(&params),
        samples.len(),
        sde.dt,
        sde.thinning,
        sde.burn_in,
        out.display()
    ))
}

/// Density and cdf on `points` equally spaced nodes of the support.
pub fn exact_ou1d(cfg: &Config, out: Option<&Path>, points: usize) -> Result<String> {
    let params = cfg.params()?;
    let law = DiffusionModel::from_params(&params).exact_1d()?;
    let mut summary = describe(&params);
    let moments: Vec<String> = (1..=4).map(|k| format!("E Y^{k} = {:.10}", law.moment(k))).collect();
    write!(summary, "\n{}", moments.join(", "))?;
    if let Some(path) = out {
        let (lo, hi) = law.support();
        let points = points.max(2);
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["x", "density", "cdf"])?;
        let mut cdf = 0.0;
        let mut prev = lo;
        for i in 0..points {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            cdf += law.mass(prev, x);
            prev = x;
            w.write_record([x.to_string(), law.density(x).to_string(), cdf.to_string()])?;
        }
        w.flush()?;
        write!(summary, "\nwrote {}", path.display())?;
    }
    Ok(summary)
}

fn h_specs(cfg: &Config, h: Option<&str>) -> Result<Vec<PolySpec>> {
    let specs = match h {
        Some(s) => vec![PolySpec::parse_coeffs(s)?],
        None if !cfg.h_polynomials.is_empty() => cfg.h_polynomials.clone(),
        None => vec![PolySpec::Coeffs { coeffs: vec![0.0, 1.0] }, PolySpec::Coeffs { coeffs: vec![0.0, 0.0, 1.0] }],
    };
    Ok(specs)
}

/// Generator-coupling check: `E h(X̃) − E h(Y)` against `E G_Y f_h(X̃)`.
pub fn stein_check(cfg: &Config, h: Option<&str>, out: &Path) -> Result<String> {
    let params = cfg.params()?;
    if params.dim() != 1 {
        bail!("stein-check solves the Poisson equation in one dimension only; the phase type has d = {}", params.dim());
    }
    let pmf = solve(&params, &cfg.solver())?;
    let law = scaled_system_law(&pmf, &params);
    let model = DiffusionModel::from_params(&params);
    let opts = PoissonOptions::default();
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(["h", "lhs", "rhs", "discrepancy", "poisson_residual"])?;
    let mut summary = describe(&params);
    for spec in h_specs(cfg, h)? {
        let poly = spec.build(1)?;
        let hf = |x: f64| poly.value(&[x]);
        let gap = stein_gap_1d(&law, &model, &hf, &opts)?;
        let residual = poisson_solve_1d(&model, &hf, &opts)?.max_residual(&hf);
        let label = spec.label();
        w.write_record([label.clone(), gap.lhs.to_string(), gap.rhs.to_string(), gap.discrepancy().to_string(), residual.to_string()])?;
        write!(summary, "\n{label}: lhs {:.10e}, rhs {:.10e}, |diff| {:.2e}", gap.lhs, gap.rhs, gap.discrepancy())?;
    }
    w.flush()?;
    write!(summary, "\nwrote {}", out.display())?;
    Ok(summary)
}

pub fn ssc_check(cfg: &Config, seed: Option<u64>, out: &Path) -> Result<String> {
    let sim = sim_config(cfg, seed)?;
    let p = sim.params.pht.p().to_vec();
    let res = run_sim(&sim)?;
    let min = cfg.sim.min_bin_samples.unwrap_or(2000);
    let report = ssc_conditional(&res.samples, &p, min);
    let means = ssc_mean_check(&res.samples, &p, cfg.sim.n_batches.unwrap_or(20));
    output::write_ssc(create(out)?, &report, p.len())?;
    let z: Vec<String> = means.iter().map(|e| format!("{:.2}", e.z_score(0.0))).collect();
    Ok(format!(
        "{}\n{} snapshots, {} bins with ≥ {min} samples, Bonferroni-adjusted min p {:.3e} ({} at 0.01)\nE[δQ − p(eᵀx)⁺] z-scores: [{}]\nwrote {}",
        describe(&sim.params),
        res.samples.len(),
        report.tested,
        report.bonferroni_p,
        if report.rejects(0.01) { "rejected" } else { "not rejected" },
        z.join(", "),
        out.display()
    ))
}

/// Writes `ratefit.csv`, `ratefit_summary.csv` and `moments.csv` into `out_dir`.
pub fn rate_sweep(cfg: &Config, out_dir: &Path) -> Result<String> {
    let lambdas = cfg.lambdas()?;
    let outcome = sweep(&cfg.sweep()?, &lambdas);
    let ratios = moment_boundedness(&outcome.reports, 2.0);
    output::write_ratefit(create(&out_dir.join("ratefit.csv"))?, &outcome)?;
    output::write_fit_summary(create(&out_dir.join("ratefit_summary.csv"))?, &outcome)?;
    output::write_moment_ratios(create(&out_dir.join("moments.csv"))?, &ratios)?;
    let mut summary = String::new();
    for w in &outcome.warnings {
        writeln!(summary, "warning: {w}")?;
    }
    for (lambda, e) in &outcome.failures {
        writeln!(summary, "λ = {lambda} failed: {e}")?;
    }
    for (name, fit) in [("w1", &outcome.fits.w1), ("gap_m1", &outcome.fits.gap_m1), ("gap_m2", &outcome.fits.gap_m2)] {
        match fit {
            Ok(f) => writeln!(summary, "{name}: slope {:.4}, r² {:.4}, max/min √λ·value {:.4}", f.slope, f.r_squared, f.normalized_spread())?,
            Err(e) => writeln!(summary, "{name}: no fit ({e})")?,
        }
    }
    write!(summary, "wrote ratefit.csv, ratefit_summary.csv, moments.csv to {}", out_dir.display())?;
    Ok(summary)
}
