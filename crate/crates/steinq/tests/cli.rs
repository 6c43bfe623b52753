use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use steinq::{commands, Config};
use tempfile::TempDir;

const MM: &str = r#"{
    "lambda": 16, "beta": 1, "alpha": 0.5,
    "phase_type": {"preset": "exp", "mu": 1},
    "sim": {"n_samples": 2000},
    "sde": {"n_samples": 2000, "thinning": 10, "burn_in": 5},
    "seed": 11
}"#;

const H2: &str = r#"{
    "lambda": 16, "alpha": 1,
    "phase_type": {"preset": "H2", "p1": 0.5, "nu1": 0.5, "nu2": 1.5},
    "sim": {"n_samples": 3000},
    "seed": 5
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn steinq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_steinq")).args(args).output().unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn probs(path: &Path) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "prob").unwrap();
    r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn solve_ctmc_writes_pmf_and_scaled_law() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "h2.json", H2);
    let out = dir.path().join("pmf.csv");
    // n = ⌈(16 + √16)/0.75⌉
    let o = steinq(&["solve-ctmc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("n = 27"));
    assert_eq!(header(&out), "state_z1,state_z2,ell,prob");
    let law = dir.path().join("pmf.xtilde.csv");
    assert_eq!(header(&law), "xtilde_x1,xtilde_x2,prob");
    for p in [probs(&out), probs(&law)] {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn simulation_is_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "mm.json", MM);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = steinq(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    let a = run("7", "a.csv");
    let b = run("7", "b.csv");
    let c = run("8", "c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("t,x1,q1,z1\n"));
    assert_eq!(text.lines().count(), 2001);
}

#[test]
fn sde_samples_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = Config::from_json(MM).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    commands::simulate_sde(&cfg, &a).unwrap();
    commands::simulate_sde(&cfg, &b).unwrap();
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("x1\n"));
    assert_eq!(text.lines().count(), 2001);
}

#[test]
fn exact_ou1d_table_ends_at_unit_mass() {
    let dir = TempDir::new().unwrap();
    let cfg = Config::from_json(MM).unwrap();
    let out = dir.path().join("ou.csv");
    let summary = commands::exact_ou1d(&cfg, Some(&out), 101).unwrap();
    assert!(summary.contains("E Y^2"));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<Vec<f64>> = r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101);
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2] - 1e-15 && w[0][1] >= 0.0));
    assert!((rows.last().unwrap()[2] - 1.0).abs() < 1e-8);
}

#[test]
fn stein_check_identity_holds() {
    let dir = TempDir::new().unwrap();
    let cfg = Config::from_json(MM).unwrap();
    let out = dir.path().join("stein.csv");
    commands::stein_check(&cfg, None, &out).unwrap();
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["h", "lhs", "rhs", "discrepancy", "poisson_residual"]);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let lhs: f64 = row[1].parse().unwrap();
        let diff: f64 = row[3].parse().unwrap();
        assert!(lhs.abs() > 1e-4);
        assert!(diff < 1e-9, "{row:?}");
    }
    let one = dir.path().join("one.csv");
    commands::stein_check(&cfg, Some("1,0,0,1"), &one).unwrap();
    assert_eq!(csv::Reader::from_path(&one).unwrap().records().count(), 1);
}

#[test]
fn stein_check_rejects_multi_phase() {
    let dir = TempDir::new().unwrap();
    let cfg = Config::from_json(H2).unwrap();
    let err = commands::stein_check(&cfg, None, &dir.path().join("s.csv")).unwrap_err();
    assert!(err.to_string().contains("d = 2"));
}

#[test]
fn ssc_check_reports_bins() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "h2.json", H2);
    let out = dir.path().join("ssc.csv");
    let o = steinq(&["ssc-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("z-scores"));
    assert_eq!(header(&out), "ell,count,chi_square,df,p_value,q_z_corr1,q_z_corr2,insufficient");
}

#[test]
fn rate_sweep_writes_tables_and_warns_on_small_lambda() {
    let dir = TempDir::new().unwrap();
    let cfg = Config::from_json(
        r#"{"lambdas": [2, 16, 36, 64], "alpha": 0.5, "phase_type": {"preset": "exp", "mu": 1}}"#,
    )
    .unwrap();
    let summary = commands::rate_sweep(&cfg, dir.path()).unwrap();
    assert!(summary.contains("warning: skipped λ = 2"), "{summary}");
    let rate = dir.path().join("ratefit.csv");
    assert!(header(&rate).starts_with("lambda,n,beta_eff,w1,w1_stderr,sqrtlambda_w1,gap_m1,gap_m1_stderr"));
    assert_eq!(fs::read_to_string(&rate).unwrap().lines().count(), 4);
    let mut r = csv::Reader::from_path(dir.path().join("ratefit_summary.csv")).unwrap();
    let w1 = r.records().next().unwrap().unwrap();
    assert_eq!(&w1[0], "w1");
    let slope: f64 = w1[1].parse().unwrap();
    assert!(slope < -0.3 && slope > -0.7, "{slope}");
    assert_eq!(header(&dir.path().join("moments.csv")), "m,min,max,ratio,flagged");
}

#[test]
fn bad_config_fails_with_message() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"lambda": 9, "alpha": 1, "phase_type": {"preset": "H2"}}"#);
    let o = steinq(&["solve-ctmc", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
