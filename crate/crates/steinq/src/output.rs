//! CSV writers. Floats use Rust's shortest round-trip formatting, so files
//! are reproducible bit for bit.

use std::io::Write;
use std::path::{Path, PathBuf};

use steinq_core::ctmc::{ScaledLaw, StationaryPmf};
use steinq_core::des::{SampleSet, SscReport};
use steinq_core::experiments::{MomentRatio, SweepOutcome};
use steinq_core::ou::SdeSamples;

pub type CsvResult = Result<(), csv::Error>;

fn indexed(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}{i}"))
}

fn writer(out: impl Write) -> csv::Writer<impl Write> {
    csv::Writer::from_writer(out)
}

/// `state_z1..state_zd,ell,prob`.
pub fn write_pmf(out: impl Write, pmf: &StationaryPmf) -> CsvResult {
    let mut w = writer(out);
    let d = pmf.space.dim();
    let mut header: Vec<String> = indexed("state_z", d).collect();
    header.extend(["ell".to_string(), "prob".to_string()]);
    w.write_record(&header)?;
    for (st, p) in pmf.support() {
        let mut row: Vec<String> = st.z.iter().map(|v| v.to_string()).collect();
        row.push(st.ell.to_string());
        row.push(p.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `xtilde_x1..xtilde_xd,prob`.
pub fn write_law(out: impl Write, law: &ScaledLaw) -> CsvResult {
    let mut w = writer(out);
    let mut header: Vec<String> = indexed("xtilde_x", law.dim()).collect();
    header.push("prob".into());
    w.write_record(&header)?;
    for (x, p) in law.atoms() {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(p.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Companion path for the scaled law: `runs/pmf.csv` → `runs/pmf.xtilde.csv`.
pub fn law_path(pmf_path: &Path) -> PathBuf {
    let stem = pmf_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    pmf_path.with_file_name(format!("{stem}.xtilde.csv"))
}

/// `t,x1..xd,q1..qd,z1..zd`.
pub fn write_snapshots(out: impl Write, s: &SampleSet) -> CsvResult {
    let mut w = writer(out);
    let d = s.dim;
    let mut header = vec!["t".to_string()];
    header.extend(indexed("x", d));
    header.extend(indexed("q", d));
    header.extend(indexed("z", d));
    w.write_record(&header)?;
    for i in 0..s.len() {
        let mut row = vec![s.t[i].to_string()];
        row.extend(s.x(i).iter().map(|v| v.to_string()));
        row.extend(s.q(i).iter().map(|v| v.to_string()));
        row.extend(s.z(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `x1..xd` per retained SDE state.
pub fn write_sde(out: impl Write, s: &SdeSamples) -> CsvResult {
    let mut w = writer(out);
    w.write_record(indexed("x", s.dim))?;
    for x in s.iter() {
        w.write_record(x.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// `ell,count,chi_square,df,p_value,q_z_corr1..d,insufficient`.
pub fn write_ssc(out: impl Write, report: &SscReport, dim: usize) -> CsvResult {
    let mut w = writer(out);
    let mut header: Vec<String> = ["ell", "count", "chi_square", "df", "p_value"].map(String::from).to_vec();
    header.extend(indexed("q_z_corr", dim));
    header.push("insufficient".into());
    w.write_record(&header)?;
    for b in &report.bins {
        let mut row = vec![b.ell.to_string(), b.count.to_string(), b.chi_square.to_string(), b.df.to_string(), b.p_value.to_string()];
        row.extend((0..dim).map(|i| b.q_z_correlation.get(i).map_or(String::from("NaN"), |v| v.to_string())));
        row.push(b.insufficient.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per λ: `lambda,n,beta_eff,w1,w1_stderr,sqrtlambda_w1,gap_m1,gap_m1_stderr,gap_m2,gap_m2_stderr`,
/// then `gap_<label>,stderr_<label>` for every observable and `abs_m<k>`.
pub fn write_ratefit(out: impl Write, outcome: &SweepOutcome) -> CsvResult {
    let mut w = writer(out);
    let Some(first) = outcome.reports.first() else {
        w.write_record(["lambda", "n", "beta_eff", "w1", "w1_stderr", "sqrtlambda_w1", "gap_m1", "gap_m1_stderr", "gap_m2", "gap_m2_stderr"])?;
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> =
        ["lambda", "n", "beta_eff", "w1", "w1_stderr", "sqrtlambda_w1", "gap_m1", "gap_m1_stderr", "gap_m2", "gap_m2_stderr"]
            .map(String::from)
            .to_vec();
    for g in &first.moment_gaps {
        let label = g.observable.label();
        header.push(format!("gap_{label}"));
        header.push(format!("stderr_{label}"));
    }
    header.extend((1..=first.abs_moments.len()).map(|k| format!("abs_m{k}")));
    w.write_record(&header)?;
    let nan = || String::from("NaN");
    for r in &outcome.reports {
        let mut row = vec![r.lambda.to_string(), r.n.to_string(), r.beta_eff.to_string()];
        row.push(r.w1.map_or_else(nan, |e| e.mean.to_string()));
        row.push(r.w1.map_or_else(nan, |e| e.stderr.to_string()));
        row.push(r.sqrt_lambda_w1().map_or_else(nan, |v| v.to_string()));
        for g in [&r.gap_m1, &r.gap_m2] {
            row.push(g.value.to_string());
            row.push(g.stderr.to_string());
        }
        for g in &r.moment_gaps {
            row.push(g.gap.value.to_string());
            row.push(g.gap.stderr.to_string());
        }
        row.extend(r.abs_moments.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,slope,intercept,r2`; a failed fit leaves NaN with the reason in
/// a trailing `note` column.
pub fn write_fit_summary(out: impl Write, outcome: &SweepOutcome) -> CsvResult {
    let mut w = writer(out);
    w.write_record(["metric", "slope", "intercept", "r2", "note"])?;
    for (name, fit) in [("w1", &outcome.fits.w1), ("gap_m1", &outcome.fits.gap_m1), ("gap_m2", &outcome.fits.gap_m2)] {
        match fit {
            Ok(f) => w.write_record([name, &f.slope.to_string(), &f.intercept.to_string(), &f.r_squared.to_string(), ""])?,
            Err(e) => w.write_record([name, "NaN", "NaN", "NaN", &e.to_string()])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// `m,min,max,ratio,flagged`.
pub fn write_moment_ratios(out: impl Write, ratios: &[MomentRatio]) -> CsvResult {
    let mut w = writer(out);
    w.write_record(["m", "min", "max", "ratio", "flagged"])?;
    for r in ratios {
        w.write_record([r.m.to_string(), r.min.to_string(), r.max.to_string(), r.ratio.to_string(), r.flagged.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
