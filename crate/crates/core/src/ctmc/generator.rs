use crate::ctmc::space::{StateSpace, CtmcState};
use crate::ctmc::SystemParams;
use crate::prelude::*;

/// Sparse CTMC rate matrix: off-diagonal rates in CSR form plus the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

impl RateMatrix {
    /// Builds from per-row transition lists. Duplicate targets are merged,
    /// self-loops and zero rates dropped, and the diagonal set so every row
    /// sums to zero.
    pub fn from_rows(rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut diag = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(j, r)| j != i && r > 0.0);
            row.sort_by_key(|&(j, _)| j);
            let mut out = 0.0;
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut r = 0.0;
                while k < row.len() && row[k].0 == j {
                    r += row[k].1;
                    k += 1;
                }
                cols.push(j as u32);
                rates.push(r);
                out += r;
            }
            diag.push(-out);
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, rates, diag }
    }

    /// Dense generator rows; the given diagonal is ignored and recomputed.
    pub fn from_dense<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        Self::from_rows(rows.iter().map(|r| {
            r.as_ref().iter().enumerate().map(|(j, v)| (j, *v)).collect::<Vec<_>>()
        }))
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// Off-diagonal `(column, rate)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().map(|&c| c as usize).zip(self.rates[range].iter().copied())
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, r)| r)
    }

    /// Largest total outflow rate; the uniformization constant.
    pub fn max_outflow(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// Largest `|Σ_j G_ij|` over rows.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.diag[i] + self.row(i).map(|(_, r)| r).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `πG` into `out`, summing rows in index order.
    pub fn left_mul(&self, pi: &[f64], out: &mut [f64]) {
        for (o, (p, d)) in out.iter_mut().zip(pi.iter().zip(&self.diag)) {
            *o = p * d;
        }
        for i in 0..self.len() {
            let pi_i = pi[i];
            if pi_i == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k] as usize] += pi_i * self.rates[k];
            }
        }
    }

    /// `max_j |(πG)_j|`.
    pub fn balance_residual(&self, pi: &[f64]) -> f64 {
        let mut out = vec![0.0; self.len()];
        self.left_mul(pi, &mut out);
        out.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Generator of the truncated reduced chain together with its state space.
#[derive(Clone, Debug)]
pub struct Generator {
    pub space: StateSpace,
    pub matrix: RateMatrix,
    /// Arrival rate dropped at each state by the queue truncation.
    pub dropped: Vec<f64>,
}

impl Generator {
    /// Builds the generator for queue capacity `queue_cap ≥ 1`.
    ///
    /// Transitions out of `(z, ℓ)`:
    /// * arrival `λ p_i`: into service as phase `i` if a server is free,
    ///   otherwise `ℓ + 1` (dropped at `ℓ = L`);
    /// * abandonment `α ℓ`: `ℓ - 1`;
    /// * phase-`i` completion `ν_i z_i`: to phase `j` w.p. `P_ij`, otherwise a
    ///   departure, after which the head of the queue (if any) starts service
    ///   in a phase drawn from `p`.
    pub fn build(params: &SystemParams, queue_cap: u32) -> Self {
        let space = StateSpace::new(params.dim(), params.n, queue_cap.max(1));
        let pht = &params.pht;
        let d = params.dim();
        let (p, nu, routing) = (pht.p(), pht.nu(), pht.routing());
        let exit: Vec<f64> = (0..d).map(|i| pht.exit_probability(i)).collect();
        let n = params.n;
        let cap = space.queue_cap();
        let mut dropped = vec![0.0; space.len()];
        let mut buf = vec![0u32; d];

        let rows = (0..space.len()).map(|idx| {
            let z = space.z(idx);
            let ell = space.ell(idx);
            let busy: u32 = z.iter().sum();
            let mut row = Vec::with_capacity(2 + d * (d + 1));
            let push = |zz: &[u32], l: u32, rate: f64, row: &mut Vec<(usize, f64)>| {
                if rate > 0.0 {
                    let j = space.index(zz, l).expect("transition stays in the state space");
                    row.push((j, rate));
                }
            };
            if busy < n {
                for i in 0..d {
                    buf.copy_from_slice(z);
                    buf[i] += 1;
                    push(&buf, 0, params.lambda * p[i], &mut row);
                }
            } else if ell < cap {
                push(z, ell + 1, params.lambda, &mut row);
            } else {
                dropped[idx] = params.lambda;
            }
            if ell > 0 {
                push(z, ell - 1, params.alpha * ell as f64, &mut row);
            }
            for i in 0..d {
                if z[i] == 0 {
                    continue;
                }
                let rate = nu[i] * z[i] as f64;
                for j in 0..d {
                    let pij = routing[(i, j)];
                    if pij > 0.0 {
                        buf.copy_from_slice(z);
                        buf[i] -= 1;
                        buf[j] += 1;
                        push(&buf, ell, rate * pij, &mut row);
                    }
                }
                if exit[i] > 0.0 {
                    buf.copy_from_slice(z);
                    buf[i] -= 1;
                    if ell > 0 {
                        for j in 0..d {
                            let saved = buf[j];
                            buf[j] += 1;
                            push(&buf, ell - 1, rate * exit[i] * p[j], &mut row);
                            buf[j] = saved;
                        }
                    } else {
                        push(&buf, 0, rate * exit[i], &mut row);
                    }
                }
            }
            row
        });
        let matrix = RateMatrix::from_rows(rows.collect::<Vec<_>>());
        Self { space, matrix, dropped }
    }

    pub fn state(&self, idx: usize) -> CtmcState {
        self.space.state(idx)
    }

    /// A state near the center of mass (`x ≈ 0`), used to anchor direct solves.
    pub fn central_state(&self, params: &SystemParams) -> usize {
        let n = self.space.servers();
        let target = (params.lambda / params.mu()).round().clamp(0.0, n as f64) as u32;
        let gamma = &params.derived.gamma;
        let mut z: Vec<u32> = gamma.iter().map(|g| (g * target as f64).floor() as u32).collect();
        // Hand out the rounding remainder to the phases with positive load.
        let mut short = target - z.iter().sum::<u32>().min(target);
        let (mut i, d) = (0, z.len());
        while short > 0 {
            if gamma[i % d] > 0.0 {
                z[i % d] += 1;
                short -= 1;
            }
            i += 1;
        }
        self.space.index(&z, 0).unwrap_or(0)
    }
}
