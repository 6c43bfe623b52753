//! Law of the scaled system size and its moments.

use crate::ctmc::space::{composition_rank, compositions, for_each_composition};
use crate::ctmc::{StationaryPmf, SystemParams};
use crate::prelude::*;
use crate::stats::ln_factorial;

/// Finite discrete law on `R^d`, stored as `(point, probability)` atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledLaw {
    dim: usize,
    points: Vec<f64>,
    /// Integer system sizes `X` behind each atom; empty for laws not built
    /// from a chain.
    counts: Vec<u32>,
    probs: Vec<f64>,
}

impl ScaledLaw {
    /// Law with the given atoms. `points` is row-major `len × dim`.
    pub fn from_points(dim: usize, points: Vec<f64>, probs: Vec<f64>) -> Self {
        assert_eq!(points.len(), dim * probs.len());
        Self { dim, points, counts: Vec::new(), probs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Unscaled `X` of atom `i`, when the law came from a chain.
    pub fn counts(&self, i: usize) -> Option<&[u32]> {
        (!self.counts.is_empty()).then(|| &self.counts[i * self.dim..(i + 1) * self.dim])
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks_exact(self.dim.max(1)).zip(self.probs.iter().copied())
    }

    pub fn expect(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.atoms().map(|(x, p)| if p > 0.0 { p * f(x) } else { 0.0 }).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// One-dimensional atoms sorted by location, with coincident points merged.
    pub fn sorted_1d(&self) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(self.dim, 1, "sorted_1d needs a one-dimensional law");
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.points[a].total_cmp(&self.points[b]));
        let mut xs: Vec<f64> = Vec::with_capacity(idx.len());
        let mut ps: Vec<f64> = Vec::with_capacity(idx.len());
        for i in idx {
            let (x, p) = (self.points[i], self.probs[i]);
            match xs.last() {
                Some(&last) if last == x => *ps.last_mut().unwrap() += p,
                _ => {
                    xs.push(x);
                    ps.push(p);
                }
            }
        }
        (xs, ps)
    }
}

/// Exact law of `δ(Z + Q − γn)` where `Q | ℓ ~ Multinomial(ℓ, p)`.
pub fn scaled_system_law(pmf: &StationaryPmf, params: &SystemParams) -> ScaledLaw {
    let d = params.dim();
    let p = params.pht.p();
    let ln_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let max_total = params.n + pmf.queue_cap;
    let ln_fact: Vec<f64> = (0..=pmf.queue_cap as u64).map(ln_factorial).collect();

    // Dense storage indexed by (eᵀX, rank of X among compositions of eᵀX).
    let mut offsets = Vec::with_capacity(max_total as usize + 2);
    let mut acc = 0usize;
    for total in 0..=max_total {
        offsets.push(acc);
        acc += compositions(total as u64, d as u64) as usize;
    }
    offsets.push(acc);
    let mut dense = vec![0.0; acc];

    let mut x = vec![0u32; d];
    for (idx, &w) in pmf.prob.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let z = pmf.space.z(idx);
        let ell = pmf.space.ell(idx);
        let total = (z.iter().sum::<u32>() + ell) as usize;
        if ell == 0 {
            dense[offsets[total] + composition_rank(z) as usize] += w;
            continue;
        }
        for_each_composition(ell, d, |q| {
            let mut ln = ln_fact[ell as usize];
            for i in 0..d {
                if q[i] > 0 {
                    if p[i] == 0.0 {
                        return;
                    }
                    ln += q[i] as f64 * ln_p[i];
                }
                ln -= ln_fact[q[i] as usize];
            }
            for i in 0..d {
                x[i] = z[i] + q[i];
            }
            dense[offsets[total] + composition_rank(&x) as usize] += w * ln.exp();
        });
    }

    let mut points = Vec::new();
    let mut counts = Vec::new();
    let mut probs = Vec::new();
    let mut scaled = vec![0.0; d];
    for total in 0..=max_total {
        let base = offsets[total as usize];
        let mut k = 0;
        for_each_composition(total, d, |c| {
            let w = dense[base + k];
            k += 1;
            if w > 0.0 {
                params.scale_point(c, &mut scaled);
                points.extend_from_slice(&scaled);
                counts.extend_from_slice(c);
                probs.push(w);
            }
        });
    }
    ScaledLaw { dim: d, points, counts, probs }
}

/// Moments of a [`ScaledLaw`] up to a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    /// `(multi-index a, E Π x_i^{a_i})` for every `|a| ≤ m`, by total degree.
    pub mixed: Vec<(Vec<u32>, f64)>,
    /// `E((eᵀx)^+)^k` for `k = 1..=m`.
    pub positive_part: Vec<f64>,
    /// `E|x|^k` for `k = 1..=m`.
    pub abs: Vec<f64>,
}

impl MomentTable {
    pub fn mixed(&self, powers: &[u32]) -> Option<f64> {
        self.mixed.iter().find(|(a, _)| a.as_slice() == powers).map(|(_, v)| *v)
    }
}

pub fn moments(law: &ScaledLaw, m: u32) -> MomentTable {
    let d = law.dim();
    let mut mixed = Vec::new();
    for degree in 0..=m {
        for_each_composition(degree, d, |a| {
            let v = law.expect(|x| x.iter().zip(a).map(|(xi, k)| xi.powi(*k as i32)).product());
            mixed.push((a.to_vec(), v));
        });
    }
    let positive_part = (1..=m)
        .map(|k| law.expect(|x| x.iter().sum::<f64>().max(0.0).powi(k as i32)))
        .collect();
    let abs = (1..=m)
        .map(|k| law.expect(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt().powi(k as i32)))
        .collect();
    MomentTable { mixed, positive_part, abs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{solve_ctmc, SolverOptions, StateSpace};
    use crate::phase_type::PhaseType;
    use crate::ctmc::SolveMethod;

    #[test]
    fn two_atoms() {
        let law = ScaledLaw::from_points(1, vec![-1.0, 1.0], vec![0.5, 0.5]);
        let t = moments(&law, 2);
        assert_eq!(t.mixed(&[0]), Some(1.0));
        assert_eq!(t.mixed(&[1]), Some(0.0));
        assert_eq!(t.mixed(&[2]), Some(1.0));
        assert_eq!(t.positive_part[0], 0.5);
    }

    #[test]
    fn point_mass_at_origin() {
        let law = ScaledLaw::from_points(2, vec![0.0, 0.0], vec![1.0]);
        let t = moments(&law, 3);
        for (a, v) in &t.mixed {
            let expected = if a.iter().sum::<u32>() == 0 { 1.0 } else { 0.0 };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn multinomial_split() {
        let pht = PhaseType::hyperexponential2(0.5, 1.0, 3.0).unwrap();
        let params = SystemParams::new(4.0, 3, 1.0, pht).unwrap();
        let space = StateSpace::new(2, 3, 2);
        let mut prob = vec![0.0; space.len()];
        prob[space.index(&[1, 2], 2).unwrap()] = 1.0;
        let pmf = StationaryPmf {
            space,
            prob,
            queue_cap: 2,
            tail_bound: 0.0,
            residual: 0.0,
            method: SolveMethod::Direct,
        };
        let law = scaled_system_law(&pmf, &params);
        assert_eq!(law.len(), 3);
        let mut got: Vec<(Vec<u32>, f64)> =
            (0..3).map(|i| (law.counts(i).unwrap().to_vec(), law.prob(i))).collect();
        got.sort_by(|a, b| a.0.cmp(&b.0));
        let want = [(vec![1, 4], 0.25), (vec![2, 3], 0.5), (vec![3, 2], 0.25)];
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-15);
        }
    }

    #[test]
    fn one_dimensional_law_is_shifted_count() {
        let params = SystemParams::new(9.0, 10, 0.7, PhaseType::exponential(1.0).unwrap()).unwrap();
        let pmf = solve_ctmc(&params, &SolverOptions::default()).unwrap();
        let law = scaled_system_law(&pmf, &params);
        assert_eq!(law.len(), pmf.len());
        for i in 0..law.len() {
            let st = pmf.space.state(i);
            let x = (st.z[0] + st.ell) as f64 / 3.0 - 10.0 / 3.0;
            assert!((law.point(i)[0] - x).abs() < 1e-14);
            assert!((law.prob(i) - pmf.prob[i]).abs() < 1e-15);
        }
    }
}
