//! Discrete-event simulation of the full FIFO M/Ph/n+M system.
//!
//! Every customer is tracked individually: the phase assigned at arrival,
//! its patience clock while queued and its phase-by-phase service. Four
//! independent ChaCha streams drive inter-arrival times, phase and routing
//! draws, phase holding times and patience times.

use alloc::collections::{BinaryHeap, VecDeque};
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::ctmc::{ScaledLaw, SystemParams};
use crate::prelude::*;
use crate::stats::{batch_means, binomial_pmf, chi_square_sf, ln_factorial, pearson, Estimate};

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    pub warmup: f64,
    /// End of the simulation, measured from time 0.
    pub horizon: f64,
    pub sample_interval: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("need 0 ≤ warmup < horizon, got warmup {warmup}, horizon {horizon}")]
    Horizon { warmup: f64, horizon: f64 },
    #[error("sample interval must be positive, got {0}")]
    Interval(f64),
}

impl SimConfig {
    /// Config with the default warmup `max(100, 20/min(μ, α))` and a horizon
    /// long enough for `n_samples` snapshots.
    pub fn with_samples(params: SystemParams, n_samples: usize, sample_interval: f64, seed: u64) -> Self {
        let warmup = default_warmup(&params);
        let horizon = warmup + n_samples as f64 * sample_interval;
        Self { params, warmup, horizon, sample_interval, seed }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(SimError::Horizon { warmup: self.warmup, horizon: self.horizon });
        }
        if !(self.sample_interval > 0.0) {
            return Err(SimError::Interval(self.sample_interval));
        }
        Ok(())
    }
}

pub fn default_warmup(params: &SystemParams) -> f64 {
    (20.0 / params.mu().min(params.alpha)).max(100.0)
}

/// Snapshots `(t, x, q, z)` taken after warmup, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub dim: usize,
    pub delta: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub q: Vec<u32>,
    pub z: Vec<u32>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn q(&self, i: usize) -> &[u32] {
        &self.q[i * self.dim..(i + 1) * self.dim]
    }

    pub fn z(&self, i: usize) -> &[u32] {
        &self.z[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ell(&self, i: usize) -> u32 {
        self.q(i).iter().sum()
    }

    /// `f(x)` at every snapshot.
    pub fn map_x(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.x(i))).collect()
    }
}

/// Counters collected during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimStats {
    pub arrivals: u64,
    pub departures: u64,
    pub abandonments: u64,
    pub events: u64,
    /// Event epochs at which a server idled while someone waited.
    pub work_conservation_violations: u64,
    /// Abandonment hazard split at elapsed wait `w₀ = 1/(4α)`.
    pub hazard: HazardStats,
}

/// Events and exposure (time at risk) for abandonment, before and after a
/// fixed elapsed wait. Constant hazard means both rates equal `α`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HazardStats {
    pub split: f64,
    pub early_events: u64,
    pub early_exposure: f64,
    pub late_events: u64,
    pub late_exposure: f64,
}

impl HazardStats {
    pub fn early_rate(&self) -> f64 {
        self.early_events as f64 / self.early_exposure
    }

    pub fn late_rate(&self) -> f64 {
        self.late_events as f64 / self.late_exposure
    }

    /// Poisson z-scores of both rates against `alpha`.
    pub fn z_scores(&self, alpha: f64) -> (f64, f64) {
        let z = |k: u64, e: f64| {
            let expected = alpha * e;
            if expected > 0.0 {
                (k as f64 - expected) / expected.sqrt()
            } else {
                0.0
            }
        };
        (z(self.early_events, self.early_exposure), z(self.late_events, self.late_exposure))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub samples: SampleSet,
    pub stats: SimStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Arrival,
    PhaseCompletion,
    Abandonment,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    kind: Kind,
    seq: u64,
    /// Phase for completions, customer id for abandonments.
    tag: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Copy, Debug)]
struct Waiting {
    id: u64,
    phase: usize,
    arrival: f64,
}

struct Streams {
    arrivals: ChaCha8Rng,
    phases: ChaCha8Rng,
    services: ChaCha8Rng,
    patience: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self { arrivals: stream(0), phases: stream(1), services: stream(2), patience: stream(3) }
    }
}

struct Sim<'a> {
    params: &'a SystemParams,
    rng: Streams,
    heap: BinaryHeap<Event>,
    seq: u64,
    queue: VecDeque<Waiting>,
    z: Vec<u32>,
    q: Vec<u32>,
    busy: u32,
    next_id: u64,
    warmup: f64,
    stats: SimStats,
}

impl Sim<'_> {
    fn schedule(&mut self, time: f64, kind: Kind, tag: u64) {
        self.seq += 1;
        self.heap.push(Event { time, kind, seq: self.seq, tag });
    }

    fn start_phase(&mut self, now: f64, phase: usize) {
        self.z[phase] += 1;
        let hold = self.params.pht.holding_time(phase, &mut self.rng.services);
        self.schedule(now + hold, Kind::PhaseCompletion, phase as u64);
    }

    fn leave_queue(&mut self, now: f64, w: &Waiting, abandoned: bool) {
        self.q[w.phase] -= 1;
        if now < self.warmup {
            return;
        }
        let h = &mut self.stats.hazard;
        let wait = now - w.arrival;
        h.early_exposure += wait.min(h.split);
        h.late_exposure += (wait - h.split).max(0.0);
        if abandoned {
            if wait < h.split {
                h.early_events += 1;
            } else {
                h.late_events += 1;
            }
        }
    }

    fn arrival(&mut self, now: f64) {
        self.stats.arrivals += 1;
        let phase = self.params.pht.initial_phase(&mut self.rng.phases);
        let e: f64 = self.rng.patience.sample(Exp1);
        let patience = e / self.params.alpha;
        let id = self.next_id;
        self.next_id += 1;
        if self.busy < self.params.n {
            self.busy += 1;
            self.start_phase(now, phase);
        } else {
            self.queue.push_back(Waiting { id, phase, arrival: now });
            self.q[phase] += 1;
            self.schedule(now + patience, Kind::Abandonment, id);
        }
        let gap: f64 = self.rng.arrivals.sample(Exp1);
        self.schedule(now + gap / self.params.lambda, Kind::Arrival, 0);
    }

    fn completion(&mut self, now: f64, phase: usize) {
        self.z[phase] -= 1;
        match self.params.pht.next_phase(phase, &mut self.rng.phases) {
            Some(next) => self.start_phase(now, next),
            None => {
                self.stats.departures += 1;
                match self.queue.pop_front() {
                    Some(w) => {
                        self.leave_queue(now, &w, false);
                        self.start_phase(now, w.phase);
                    }
                    None => self.busy -= 1,
                }
            }
        }
    }

    fn abandonment(&mut self, now: f64, id: u64) {
        // Customers already in service ignore their patience clock.
        if let Some(pos) = self.queue.iter().position(|w| w.id == id) {
            let w = self.queue.remove(pos).expect("position is in range");
            self.leave_queue(now, &w, true);
            self.stats.abandonments += 1;
        }
    }
}

/// Runs one replication. Identical configs give identical output.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let params = &cfg.params;
    let d = params.dim();
    let mut sim = Sim {
        params,
        rng: Streams::new(cfg.seed),
        heap: BinaryHeap::new(),
        seq: 0,
        queue: VecDeque::new(),
        z: vec![0; d],
        q: vec![0; d],
        busy: 0,
        next_id: 0,
        warmup: cfg.warmup,
        stats: SimStats::default(),
    };
    sim.stats.hazard.split = 0.25 / params.alpha;
    if params.lambda > 0.0 {
        let gap: f64 = sim.rng.arrivals.sample(Exp1);
        sim.schedule(gap / params.lambda, Kind::Arrival, 0);
    }

    let n_snapshots = ((cfg.horizon - cfg.warmup) / cfg.sample_interval).floor() as usize;
    let mut samples = SampleSet {
        dim: d,
        delta: params.delta,
        t: Vec::with_capacity(n_snapshots),
        x: Vec::with_capacity(n_snapshots * d),
        q: Vec::with_capacity(n_snapshots * d),
        z: Vec::with_capacity(n_snapshots * d),
    };
    let mut next_sample = 1usize;
    let sample_time = |k: usize| cfg.warmup + k as f64 * cfg.sample_interval;
    let mut counts = vec![0u32; d];
    let mut x = vec![0.0; d];

    loop {
        let next_event = sim.heap.peek().map_or(f64::INFINITY, |e| e.time);
        while next_sample <= n_snapshots && sample_time(next_sample) < next_event {
            for i in 0..d {
                counts[i] = sim.z[i] + sim.q[i];
            }
            params.scale_point(&counts, &mut x);
            samples.t.push(sample_time(next_sample));
            samples.x.extend_from_slice(&x);
            samples.q.extend_from_slice(&sim.q);
            samples.z.extend_from_slice(&sim.z);
            next_sample += 1;
        }
        if next_sample > n_snapshots || next_event > cfg.horizon {
            break;
        }
        let ev = sim.heap.pop().expect("peeked event");
        sim.stats.events += 1;
        match ev.kind {
            Kind::Arrival => sim.arrival(ev.time),
            Kind::PhaseCompletion => sim.completion(ev.time, ev.tag as usize),
            Kind::Abandonment => sim.abandonment(ev.time, ev.tag),
        }
        if !sim.queue.is_empty() && sim.busy < params.n {
            sim.stats.work_conservation_violations += 1;
        }
    }
    Ok(SimOutput { samples, stats: sim.stats })
}

/// Chi-square comparison of the queue composition given `ℓ` with
/// `Multinomial(ℓ, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SscBin {
    pub ell: u32,
    pub count: usize,
    /// Empirical pmf of `q_i` over `0..=ℓ`, per phase.
    pub marginals: Vec<Vec<f64>>,
    /// Reference `Binomial(ℓ, p_i)` pmf, per phase.
    pub reference: Vec<Vec<f64>>,
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    /// Sample correlation of `q_i` and `z_i` within the bin, per phase.
    pub q_z_correlation: Vec<f64>,
    /// Fewer than the required samples; excluded from the test.
    pub insufficient: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SscReport {
    pub bins: Vec<SscBin>,
    /// Number of bins actually tested.
    pub tested: usize,
    /// Smallest p-value among tested bins, times the number tested.
    pub bonferroni_p: f64,
}

impl SscReport {
    pub fn rejects(&self, level: f64) -> bool {
        self.bonferroni_p < level
    }
}

/// Groups snapshots by queue length and tests each group with at least
/// `min_samples` snapshots. Cells with expected count below 5 are pooled.
pub fn ssc_conditional(samples: &SampleSet, p: &[f64], min_samples: usize) -> SscReport {
    let d = samples.dim;
    let max_ell = (0..samples.len()).map(|i| samples.ell(i)).max().unwrap_or(0);
    let mut by_ell: Vec<Vec<usize>> = vec![Vec::new(); max_ell as usize + 1];
    for i in 0..samples.len() {
        by_ell[samples.ell(i) as usize].push(i);
    }
    let mut bins = Vec::new();
    let mut tested = 0;
    let mut min_p = 1.0f64;
    for (ell, idx) in by_ell.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let ell = ell as u32;
        let count = idx.len();
        let mut marginals = vec![vec![0.0; ell as usize + 1]; d];
        for &i in idx {
            for (k, &qk) in samples.q(i).iter().enumerate() {
                marginals[k][qk as usize] += 1.0 / count as f64;
            }
        }
        let reference: Vec<Vec<f64>> = p
            .iter()
            .map(|&pk| (0..=ell).map(|v| binomial_pmf(ell as u64, v as u64, pk)).collect())
            .collect();
        let q_z_correlation = (0..d)
            .map(|k| {
                let qs: Vec<f64> = idx.iter().map(|&i| samples.q(i)[k] as f64).collect();
                let zs: Vec<f64> = idx.iter().map(|&i| samples.z(i)[k] as f64).collect();
                pearson(&qs, &zs)
            })
            .collect();
        let insufficient = count < min_samples;
        let (chi_square, df) = if insufficient || ell == 0 {
            (0.0, 0)
        } else {
            multinomial_chi_square(samples, idx, ell, p)
        };
        let p_value = if df == 0 { 1.0 } else { chi_square_sf(chi_square, df as f64) };
        if !insufficient {
            tested += 1;
            min_p = min_p.min(p_value);
        }
        bins.push(SscBin {
            ell,
            count,
            marginals,
            reference,
            chi_square,
            df,
            p_value,
            q_z_correlation,
            insufficient,
        });
    }
    SscReport { bins, tested, bonferroni_p: (min_p * tested.max(1) as f64).min(1.0) }
}

fn multinomial_chi_square(samples: &SampleSet, idx: &[usize], ell: u32, p: &[f64]) -> (f64, usize) {
    use alloc::collections::BTreeMap;
    let mut observed: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for &i in idx {
        *observed.entry(samples.q(i).to_vec()).or_default() += 1.0;
    }
    let n = idx.len() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    crate::ctmc::for_each_composition(ell, p.len(), |q| {
        let mut ln = ln_factorial(ell as u64);
        for (k, &qk) in q.iter().enumerate() {
            if qk > 0 {
                ln += qk as f64 * p[k].ln();
            }
            ln -= ln_factorial(qk as u64);
        }
        let expected = n * ln.exp();
        if expected > 0.0 {
            cells.push((observed.get(q).copied().unwrap_or(0.0), expected));
        }
    });
    // Pool small cells (in composition order) until each has expected ≥ 5.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (oc, ec) in cells {
        o += oc;
        e += ec;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    if pooled.len() < 2 {
        return (0.0, 0);
    }
    let chi: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (chi, pooled.len() - 1)
}

/// `E[δQ − p(eᵀx)⁺]` per component with batch-means standard errors.
pub fn ssc_mean_check(samples: &SampleSet, p: &[f64], n_batches: usize) -> Vec<Estimate> {
    (0..samples.dim)
        .map(|k| {
            let v: Vec<f64> = (0..samples.len())
                .map(|i| {
                    let pos = samples.x(i).iter().sum::<f64>().max(0.0);
                    samples.delta * samples.q(i)[k] as f64 - p[k] * pos
                })
                .collect();
            batch_means(&v, n_batches)
        })
        .collect()
}

/// Simulated versus exact value of one moment.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentGap {
    pub powers: Vec<u32>,
    pub exact: f64,
    pub simulated: Estimate,
}

impl MomentGap {
    pub fn gap(&self) -> f64 {
        (self.simulated.mean - self.exact).abs()
    }

    pub fn z_score(&self) -> f64 {
        self.simulated.z_score(self.exact)
    }
}

/// First and second moments of `x` from the simulation against the exact
/// law; standard errors from batch means.
pub fn compare_to_ctmc(samples: &SampleSet, law: &ScaledLaw, n_batches: usize) -> Vec<MomentGap> {
    let d = samples.dim;
    let mut powers = Vec::new();
    for i in 0..d {
        let mut a = vec![0; d];
        a[i] = 1;
        powers.push(a);
    }
    for i in 0..d {
        for j in i..d {
            let mut a = vec![0; d];
            a[i] += 1;
            a[j] += 1;
            powers.push(a);
        }
    }
    powers
        .into_iter()
        .map(|a| {
            let f = |x: &[f64]| x.iter().zip(&a).map(|(v, k)| v.powi(*k as i32)).product::<f64>();
            let exact = law.expect(f);
            let simulated = batch_means(&samples.map_x(f), n_batches);
            MomentGap { powers: a, exact, simulated }
        })
        .collect()
}
