//! Wasserstein-1 distances on the line and sliced estimates in `R^d`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;

use crate::ou::ContinuousLaw1d;
use crate::prelude::*;
use crate::quad::{integrate, QuadError, QuadOptions};
use crate::stats::Estimate;

/// A one-dimensional law given either by atoms or by a continuous cdf.
#[derive(Clone, Copy)]
pub enum Law1d<'a> {
    /// Sorted locations and their probabilities.
    Discrete { xs: &'a [f64], ps: &'a [f64] },
    Continuous(&'a dyn ContinuousLaw1d),
}

impl core::fmt::Debug for Law1d<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Law1d::Discrete { xs, .. } => write!(f, "Discrete({} atoms)", xs.len()),
            Law1d::Continuous(law) => write!(f, "Continuous(support {:?})", law.support()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DistanceError {
    #[error("sample sets differ in size ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("point clouds differ in dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("empty sample set")]
    Empty,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// `∫|F_A − F_B|`, exact up to quadrature.
pub fn wasserstein1_exact_1d(a: Law1d<'_>, b: Law1d<'_>) -> Result<f64, DistanceError> {
    match (a, b) {
        (Law1d::Discrete { xs, ps }, Law1d::Discrete { xs: ys, ps: qs }) => Ok(discrete_discrete(xs, ps, ys, qs)),
        (Law1d::Discrete { xs, ps }, Law1d::Continuous(law)) | (Law1d::Continuous(law), Law1d::Discrete { xs, ps }) => {
            Ok(discrete_continuous(xs, ps, law))
        }
        (Law1d::Continuous(la), Law1d::Continuous(lb)) => continuous_continuous(la, lb),
    }
}

fn discrete_discrete(xs: &[f64], ps: &[f64], ys: &[f64], qs: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut last: Option<f64> = None;
    let mut total = 0.0;
    while i < xs.len() || j < ys.len() {
        let t = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        if let Some(prev) = last {
            total += (fa - fb).abs() * (t - prev);
        }
        while i < xs.len() && xs[i] == t {
            fa += ps[i];
            i += 1;
        }
        while j < ys.len() && ys[j] == t {
            fb += qs[j];
            j += 1;
        }
        last = Some(t);
    }
    total
}

fn discrete_continuous(xs: &[f64], ps: &[f64], law: &dyn ContinuousLaw1d) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let (lo, hi) = law.support();
    let total_mass: f64 = ps.iter().sum();
    // Ψ(t) = ∫_{lo}^t F = tF(t) − m(t) with m the partial mean.
    let psi = |t: f64, f: f64, m: f64| if t <= lo { 0.0 } else { t * f - m };
    let mut f = law.mass(lo, xs[0]);
    let mut m = law.partial_mean(lo, xs[0]);
    let mut total = psi(xs[0], f, m);
    let mut c = 0.0;
    for k in 0..xs.len() {
        c += ps[k] / total_mass;
        let (a, fa, ma) = (xs[k], f, m);
        if k + 1 == xs.len() {
            if a < hi {
                let mean_hi = ma + law.partial_mean(a, hi);
                total += (hi - a) - (psi(hi, 1.0, mean_hi) - psi(a, fa, ma));
            }
            break;
        }
        let b = xs[k + 1];
        let fb = fa + law.mass(a, b);
        let mb = ma + law.partial_mean(a, b);
        let (pa, pb) = (psi(a, fa, ma), psi(b, fb, mb));
        if fb <= c || fa >= c {
            total += (c * (b - a) - (pb - pa)).abs();
        } else {
            let t = law.quantile(c).clamp(a, b);
            let mt = ma + law.partial_mean(a, t);
            let pt = psi(t, c, mt);
            total += (c * (t - a) - (pt - pa)) + ((pb - pt) - c * (b - t));
        }
        f = fb;
        m = mb;
    }
    total
}

fn continuous_continuous(a: &dyn ContinuousLaw1d, b: &dyn ContinuousLaw1d) -> Result<f64, DistanceError> {
    let (la, ha) = a.support();
    let (lb, hb) = b.support();
    let opts = QuadOptions { abs_tol: 1e-11, rel_tol: 1e-10, max_intervals: 2000 };
    Ok(integrate(|t| (a.cdf(t) - b.cdf(t)).abs(), la.min(lb), ha.max(hb), &opts)?.value)
}

/// Mean absolute difference of sorted samples.
pub fn wasserstein1_empirical(a: &[f64], b: &[f64]) -> Result<f64, DistanceError> {
    if a.len() != b.len() {
        return Err(DistanceError::SizeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(DistanceError::Empty);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Weighted points in `R^d`, row-major.
#[derive(Clone, Copy, Debug)]
pub struct PointCloud<'a> {
    pub dim: usize,
    pub points: &'a [f64],
    /// Probabilities per point; `None` means uniform.
    pub weights: Option<&'a [f64]>,
}

impl PointCloud<'_> {
    fn len(&self) -> usize {
        self.points.len() / self.dim.max(1)
    }

    fn projected(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut idx: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = &self.points[i * self.dim..(i + 1) * self.dim];
                let w = self.weights.map_or(1.0 / n as f64, |w| w[i]);
                (x.iter().zip(theta).map(|(a, b)| a * b).sum(), w)
            })
            .collect();
        idx.sort_by(|a, b| a.0.total_cmp(&b.0));
        idx.into_iter().unzip()
    }
}

/// Sliced W1: the average over `n_directions` random unit directions of the
/// exact 1-D W1 between the projected clouds. The standard error is a
/// bootstrap over directions, so it reflects the direction sampling only.
pub fn sliced_w1(
    a: PointCloud<'_>,
    b: PointCloud<'_>,
    n_directions: usize,
    seed: u64,
) -> Result<Estimate, DistanceError> {
    if a.dim != b.dim {
        return Err(DistanceError::DimensionMismatch(a.dim, b.dim));
    }
    if a.len() == 0 || b.len() == 0 || n_directions == 0 {
        return Err(DistanceError::Empty);
    }
    let d = a.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_directions);
    let mut theta = vec![0.0; d];
    for _ in 0..n_directions {
        loop {
            for t in theta.iter_mut() {
                *t = rng.sample(StandardNormal);
            }
            let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                theta.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
        let (xa, pa) = a.projected(&theta);
        let (xb, pb) = b.projected(&theta);
        values.push(discrete_discrete(&xa, &pa, &xb, &pb));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let n_boot = 200;
    let mut boot = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        let s: f64 = (0..values.len()).map(|_| values[rng.random_range(0..values.len())]).sum();
        boot.push(s / values.len() as f64);
    }
    let bm = boot.iter().sum::<f64>() / n_boot as f64;
    let var = boot.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (n_boot - 1) as f64;
    Ok(Estimate { mean, stderr: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ou::Ou1d;

    #[test]
    fn point_masses() {
        let d = wasserstein1_exact_1d(
            Law1d::Discrete { xs: &[0.0], ps: &[1.0] },
            Law1d::Discrete { xs: &[2.5], ps: &[1.0] },
        )
        .unwrap();
        assert!((d - 2.5).abs() < 1e-15);
    }

    #[test]
    fn shifted_gaussians() {
        // Ou1d with α = μ = 1, Σ = 2 is N(−β, 1).
        let a = Ou1d::new(0.0, 1.0, 1.0, 2.0).unwrap();
        let b = Ou1d::new(-0.7, 1.0, 1.0, 2.0).unwrap();
        let d = wasserstein1_exact_1d(Law1d::Continuous(&a), Law1d::Continuous(&b)).unwrap();
        assert!((d - 0.7).abs() < 1e-8, "{d}");
        let same = wasserstein1_exact_1d(Law1d::Continuous(&a), Law1d::Continuous(&a)).unwrap();
        assert!(same.abs() < 1e-12);
    }

    #[test]
    fn point_mass_against_density() {
        // W1(δ_c, N(0,1)) = E|Z − c|.
        let law = Ou1d::new(0.0, 1.0, 1.0, 2.0).unwrap();
        let c: f64 = 0.4;
        let phi = (-c * c / 2.0).exp() / (2.0 * core::f64::consts::PI).sqrt();
        let cdf = 0.5 * libm::erfc(-c / core::f64::consts::SQRT_2);
        let want = 2.0 * phi + c * (2.0 * cdf - 1.0);
        let got = wasserstein1_exact_1d(Law1d::Discrete { xs: &[c], ps: &[1.0] }, Law1d::Continuous(&law)).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn fine_lattice_matches_continuous_route() {
        // A lattice discretization of the density against the density itself,
        // computed through the atom route and through adaptive quadrature.
        let law = Ou1d::new(1.0, 1.0, 0.5, 2.0).unwrap();
        let xs: Vec<f64> = (-60..=80).map(|k| k as f64 * 0.1).collect();
        let ps: Vec<f64> = xs.iter().map(|&x| law.mass(x - 0.05, x + 0.05)).collect();
        let fast = wasserstein1_exact_1d(Law1d::Discrete { xs: &xs, ps: &ps }, Law1d::Continuous(&law)).unwrap();
        let total: f64 = ps.iter().sum();
        let slow = integrate(
            |t| {
                let fa: f64 = xs.iter().zip(&ps).filter(|(x, _)| **x <= t).map(|(_, p)| p / total).sum();
                (fa - law.cdf(t)).abs()
            },
            -8.0,
            10.0,
            &QuadOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 20_000 },
        );
        // Quadrature over a step function converges slowly; compare loosely.
        let slow = slow.map(|r| r.value).unwrap_or(f64::NAN);
        assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
        assert!(fast > 0.0 && fast < 0.05);
    }

    #[test]
    fn empirical() {
        assert_eq!(wasserstein1_empirical(&[0.0, 1.0], &[2.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein1_empirical(&[3.0, 1.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(wasserstein1_empirical(&[1.0], &[1.0, 2.0]), Err(DistanceError::SizeMismatch(1, 2)));
    }

    #[test]
    fn sliced_shift_in_two_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // b is an exact translate of a, so each projection contributes |⟨θ, m⟩|.
        let n = 20_000;
        let m = [0.6, -0.3];
        let a: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + m[i % 2]).collect();
        let est = sliced_w1(
            PointCloud { dim: 2, points: &a, weights: None },
            PointCloud { dim: 2, points: &b, weights: None },
            300,
            1,
        )
        .unwrap();
        let want = (m[0] * m[0] + m[1] * m[1]).sqrt() * 2.0 / core::f64::consts::PI;
        assert!((est.mean - want).abs() < 4.0 * est.stderr + 1e-3, "{est:?} vs {want}");
    }

    #[test]
    fn triangle_and_symmetry() {
        let l1 = Ou1d::new(0.0, 1.0, 1.0, 2.0).unwrap();
        let l2 = Ou1d::new(1.0, 1.0, 0.5, 2.0).unwrap();
        let l3 = Ou1d::new(-0.5, 2.0, 0.3, 1.0).unwrap();
        let w = |a: &Ou1d, b: &Ou1d| wasserstein1_exact_1d(Law1d::Continuous(a), Law1d::Continuous(b)).unwrap();
        assert!((w(&l1, &l2) - w(&l2, &l1)).abs() < 1e-9);
        assert!(w(&l1, &l3) <= w(&l1, &l2) + w(&l2, &l3) + 1e-9);
    }
}
