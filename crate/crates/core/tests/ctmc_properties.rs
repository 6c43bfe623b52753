use proptest::prelude::*;
use steinq_core::ctmc::{moments, scaled_system_law, solve_ctmc, SolverOptions, SystemParams};
use steinq_core::PhaseType;

/// Truncated birth–death law of the total count, by detailed balance.
fn birth_death(lambda: f64, n: u32, mu: f64, alpha: f64, top: u32) -> Vec<f64> {
    let mut w = vec![1.0f64];
    for j in 1..=top {
        let death = mu * j.min(n) as f64 + alpha * j.saturating_sub(n) as f64;
        let prev = *w.last().unwrap();
        w.push(prev * lambda / death);
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn totals(pmf: &steinq_core::StationaryPmf) -> Vec<f64> {
    let mut out = vec![0.0; (pmf.space.servers() + pmf.queue_cap + 1) as usize];
    for (st, p) in pmf.support() {
        out[(st.busy() + st.ell) as usize] += p;
    }
    out
}

#[test]
fn single_server_with_equal_rates_is_poisson() {
    let params = SystemParams::new(1.0, 1, 1.0, PhaseType::exponential(1.0).unwrap()).unwrap();
    let pmf = solve_ctmc(&params, &SolverOptions::default()).unwrap();
    let t = totals(&pmf);
    assert!((t[0] - (-1.0f64).exp()).abs() < 1e-10, "{}", t[0]);
    let mut fact = 1.0;
    for (k, &p) in t.iter().enumerate().take(8) {
        if k > 0 {
            fact *= k as f64;
        }
        assert!((p - (-1.0f64).exp() / fact).abs() < 1e-10, "k={k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn one_dimensional_solver_matches_birth_death(lambda in 1.0..40.0f64, n in 1u32..40, alpha in 0.2..3.0f64, mu in 0.5..2.0f64) {
        let params = SystemParams::new(lambda, n, alpha, PhaseType::exponential(mu).unwrap()).unwrap();
        let pmf = solve_ctmc(&params, &SolverOptions::default()).unwrap();
        let t = totals(&pmf);
        let want = birth_death(lambda, n, mu, alpha, n + pmf.queue_cap);
        for (k, (a, b)) in t.iter().zip(&want).enumerate() {
            prop_assert!((a - b).abs() < 1e-10, "k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn moments_survive_a_larger_truncation() {
    let pht = PhaseType::hyperexponential2(0.5, 1.0, 3.0).unwrap();
    let params = SystemParams::staffed(30.0, 1.0, 0.5, pht).unwrap();
    let base = solve_ctmc(&params, &SolverOptions::default()).unwrap();
    let wider = solve_ctmc(
        &params,
        &SolverOptions { initial_queue_cap: Some(base.queue_cap * 3 / 2), ..Default::default() },
    )
    .unwrap();
    let (a, b) = (moments(&scaled_system_law(&base, &params), 4), moments(&scaled_system_law(&wider, &params), 4));
    for ((pw, va), (_, vb)) in a.mixed.iter().zip(&b.mixed) {
        let degree: u32 = pw.iter().sum();
        // Mixed moments are bounded by the absolute moment of the same degree.
        let scale = if degree == 0 { 1.0 } else { a.abs[degree as usize - 1] };
        assert!((va - vb).abs() <= 1e-8 * scale, "{pw:?}: {va} vs {vb}");
    }
    for k in 0..4 {
        assert!((a.positive_part[k] - b.positive_part[k]).abs() <= 1e-8 * a.positive_part[k]);
        assert!((a.abs[k] - b.abs[k]).abs() <= 1e-8 * a.abs[k]);
    }
}

fn ln_choose(n: u32, k: u32) -> f64 {
    let lf = |m: u32| (1..=m).map(|v| (v as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

#[test]
fn queue_composition_identities_at_the_exact_level() {
    let pht = PhaseType::hyperexponential2(0.3, 1.0, 3.0).unwrap();
    let p = pht.p().to_vec();
    let params = SystemParams::staffed(40.0, 0.5, 0.5, pht).unwrap();
    let pmf = solve_ctmc(&params, &SolverOptions::default()).unwrap();
    let delta = params.delta;
    let n = params.n as f64;
    let mut mean = [0.0f64; 2];
    let mut second = 0.0;
    let mut pos = 0.0;
    for (st, prob) in pmf.support() {
        // Q | ℓ ~ Binomial(ℓ, p_1) in the first coordinate.
        let total = (st.busy() + st.ell) as f64;
        let xpos = (delta * (total - n)).max(0.0);
        pos += prob * xpos;
        for q1 in 0..=st.ell {
            let w = prob * (ln_choose(st.ell, q1) + q1 as f64 * p[0].ln() + (st.ell - q1) as f64 * p[1].ln()).exp();
            let q = [q1 as f64, (st.ell - q1) as f64];
            let r: Vec<f64> = (0..2).map(|i| delta * q[i] - p[i] * xpos).collect();
            mean[0] += w * r[0];
            mean[1] += w * r[1];
            second += w * (r[0] * r[0] + r[1] * r[1]);
        }
    }
    assert!(mean[0].abs() < 1e-12 && mean[1].abs() < 1e-12, "{mean:?}");
    let c = p.iter().map(|pi| pi * (1.0 - pi)).fold(0.0, f64::max) * 2.0;
    assert!(second <= delta * c * pos, "{second} > {}", delta * c * pos);
    assert!(second > 0.0);
}
