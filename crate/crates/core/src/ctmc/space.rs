//! Enumeration of the truncated reduced state space.
//!
//! States are `(z, ℓ)` with `eᵀz ≤ n` and `ℓ > 0` only when `eᵀz = n`,
//! truncated at `ℓ ≤ L`. They are ordered lexicographically in
//! `(eᵀz, z, ℓ)`, which makes the index of a state computable from the rank
//! of `z` among the compositions of `eᵀz` into `d` parts.

use crate::prelude::*;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CtmcState {
    /// Customers in service, per phase.
    pub z: Vec<u32>,
    /// Queue length.
    pub ell: u32,
}

impl CtmcState {
    pub fn busy(&self) -> u32 {
        self.z.iter().sum()
    }
}

/// `C(n, k)` in `u128`; exact for every count that fits a realistic space.
pub(crate) fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of compositions of `total` into `parts` non-negative integers.
pub(crate) fn compositions(total: u64, parts: u64) -> u128 {
    if parts == 0 {
        return (total == 0) as u128;
    }
    binomial(total + parts - 1, parts - 1)
}

/// Lexicographic rank of `z` among the compositions of `eᵀz` into `z.len()`
/// parts.
pub(crate) fn composition_rank(z: &[u32]) -> u128 {
    let d = z.len() as u64;
    let mut rem: u64 = z.iter().map(|&v| v as u64).sum();
    let mut rank: u128 = 0;
    for (k, &zk) in z.iter().enumerate().take(z.len().saturating_sub(1)) {
        let r = d - k as u64 - 1;
        let a = zk as u64;
        // Σ_{v<a} compositions(rem - v, r) by the hockey-stick identity.
        rank += binomial(rem + r, r) - binomial(rem - a + r, r);
        rem -= a;
    }
    rank
}

/// Calls `f` on every composition of `total` into `parts` parts, in
/// lexicographic order.
pub(crate) fn for_each_composition(total: u32, parts: usize, mut f: impl FnMut(&[u32])) {
    fn rec(buf: &mut Vec<u32>, k: usize, rem: u32, f: &mut dyn FnMut(&[u32])) {
        if k + 1 == buf.len() {
            buf[k] = rem;
            f(buf);
            return;
        }
        for v in 0..=rem {
            buf[k] = v;
            rec(buf, k + 1, rem - v, f);
        }
    }
    if parts == 0 {
        return;
    }
    let mut buf = vec![0; parts];
    rec(&mut buf, 0, total, &mut f);
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    dim: usize,
    servers: u32,
    queue_cap: u32,
    /// `offsets[s]` is the index of the first state with `eᵀz = s`.
    offsets: Vec<usize>,
    z: Vec<u32>,
    ell: Vec<u32>,
}

/// Size of the state space without building it.
pub fn state_count(dim: usize, servers: u32, queue_cap: u32) -> u128 {
    let below: u128 = (0..servers as u64).map(|s| compositions(s, dim as u64)).sum();
    below + compositions(servers as u64, dim as u64) * (queue_cap as u128 + 1)
}

impl StateSpace {
    pub fn new(dim: usize, servers: u32, queue_cap: u32) -> Self {
        let total = state_count(dim, servers, queue_cap) as usize;
        let mut offsets = Vec::with_capacity(servers as usize + 1);
        let mut z = Vec::with_capacity(total * dim);
        let mut ell = Vec::with_capacity(total);
        for s in 0..=servers {
            offsets.push(ell.len());
            let top = if s == servers { queue_cap } else { 0 };
            for_each_composition(s, dim, |c| {
                for l in 0..=top {
                    z.extend_from_slice(c);
                    ell.push(l);
                }
            });
        }
        debug_assert_eq!(ell.len(), total);
        Self { dim, servers, queue_cap, offsets, z, ell }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn servers(&self) -> u32 {
        self.servers
    }

    pub fn queue_cap(&self) -> u32 {
        self.queue_cap
    }

    pub fn len(&self) -> usize {
        self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell.is_empty()
    }

    pub fn z(&self, idx: usize) -> &[u32] {
        &self.z[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn ell(&self, idx: usize) -> u32 {
        self.ell[idx]
    }

    pub fn state(&self, idx: usize) -> CtmcState {
        CtmcState { z: self.z(idx).to_vec(), ell: self.ell(idx) }
    }

    /// Index of `(z, ℓ)`, or `None` when the pair is not in the space.
    pub fn index(&self, z: &[u32], ell: u32) -> Option<usize> {
        if z.len() != self.dim {
            return None;
        }
        let s: u32 = z.iter().sum();
        if s > self.servers || ell > self.queue_cap || (ell > 0 && s < self.servers) {
            return None;
        }
        let rank = composition_rank(z) as usize;
        Some(if s == self.servers {
            self.offsets[s as usize] + rank * (self.queue_cap as usize + 1) + ell as usize
        } else {
            self.offsets[s as usize] + rank
        })
    }
}
