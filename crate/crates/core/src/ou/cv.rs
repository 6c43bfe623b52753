//! Stationary expectations from diffusion samples with generator control
//! variates.
//!
//! Under the stationary law `E[G_Y g(Y)] = 0` for smooth `g`, so the values
//! `G_Y g(Y_t)` along a sample path are zero-mean regressors. For each
//! observable `h` the estimator is `mean(h − cᵀG_Y g)` with `c` fitted by
//! least squares over all samples. The regressors are `G_Y` applied to every
//! monomial of total degree `1..=degree`.

use super::{DiffusionModel, SdeSamples};
use crate::ctmc::for_each_composition;
use crate::functions::{Polynomial, TestFunction};
use crate::linalg::Matrix;
use crate::prelude::*;
use crate::stats::{iid_estimate, Estimate};

/// Estimate of a stationary mean together with its per-batch means.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchedMean {
    pub estimate: Estimate,
    pub batch_means: Vec<f64>,
}

fn control_family(dim: usize, degree: u32) -> Vec<Polynomial> {
    let mut out = Vec::new();
    for k in 1..=degree {
        for_each_composition(k, dim, |a| out.push(Polynomial::monomial(a)));
    }
    out
}

fn batch_stats(sums: &[f64], size: usize) -> BatchedMean {
    let batch_means: Vec<f64> = sums.iter().map(|s| s / size as f64).collect();
    let mut estimate = iid_estimate(&batch_means);
    if batch_means.is_empty() {
        estimate = Estimate { mean: f64::NAN, stderr: f64::NAN };
    }
    BatchedMean { estimate, batch_means }
}

/// Means of `observables` over `samples`, with control variates of the given
/// degree (0 gives plain sample means). Samples beyond the last full batch
/// are dropped, so the mean equals the average of the batch means.
pub fn stationary_means(
    model: &DiffusionModel,
    samples: &SdeSamples,
    observables: &[&dyn Fn(&[f64]) -> f64],
    degree: u32,
    n_batches: usize,
) -> Vec<BatchedMean> {
    let n_batches = n_batches.max(2);
    let size = samples.len() / n_batches;
    let used = size * n_batches;
    let family = control_family(samples.dim, degree);
    let k = family.len();
    let m = observables.len();
    let eval_controls = |x: &[f64], out: &mut [f64]| {
        for (o, g) in out.iter_mut().zip(&family) {
            *o = model.generator_apply(g as &dyn TestFunction, x);
        }
    };

    let mut coef = vec![vec![0.0; k]; m];
    if k > 0 && used > k {
        let mut c = vec![0.0; k];
        let mut sum_c = vec![0.0; k];
        let mut cc = vec![0.0; k * k];
        let mut sum_h = vec![0.0; m];
        let mut ch = vec![0.0; k * m];
        for x in samples.iter().take(used) {
            eval_controls(x, &mut c);
            for i in 0..k {
                sum_c[i] += c[i];
                for j in 0..k {
                    cc[i * k + j] += c[i] * c[j];
                }
            }
            for (r, h) in observables.iter().enumerate() {
                let v = h(x);
                sum_h[r] += v;
                for i in 0..k {
                    ch[i * m + r] += c[i] * v;
                }
            }
        }
        let nf = used as f64;
        let a = Matrix::from_fn(k, k, |i, j| cc[i * k + j] - sum_c[i] * sum_c[j] / nf);
        if let Ok(lu) = a.lu() {
            for r in 0..m {
                let rhs: Vec<f64> = (0..k).map(|i| ch[i * m + r] - sum_c[i] * sum_h[r] / nf).collect();
                coef[r] = lu.solve(&rhs);
            }
        }
    }

    let mut sums = vec![vec![0.0; n_batches]; m];
    let mut c = vec![0.0; k];
    for (t, x) in samples.iter().take(used).enumerate() {
        if k > 0 {
            eval_controls(x, &mut c);
        }
        let b = t / size.max(1);
        for (r, h) in observables.iter().enumerate() {
            let adj: f64 = coef[r].iter().zip(&c).map(|(a, v)| a * v).sum();
            sums[r][b] += h(x) - adj;
        }
    }
    sums.iter().map(|s| if size > 0 { batch_stats(s, size) } else { batch_stats(&[], 1) }).collect()
}
