//! Configuration-subspace diagonalization driven by the exact ground state.
//!
//! A trace grows a nested set of computational-basis configurations in
//! increments, projects the Hamiltonian onto the set after every increment,
//! and records the projected ground energy against the exact one.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{projected_ground_energy, LanczosOptions};
use crate::error::{Error, Result};
use crate::groundstate::{GroundState, GroundStateMeta};
use crate::hamiltonian::{Configuration, SparseHamiltonian};

/// How configurations enter the subspace.
///
/// `Sampled` draws i.i.d. from the ground-state distribution by inverse CDF
/// over the support (descending-probability order) using ChaCha8 seeded with
/// `seed` and 53-bit uniform doubles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InclusionStrategy {
    Ordered,
    Sampled { seed: u64 },
}

impl InclusionStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            InclusionStrategy::Ordered => "ordered",
            InclusionStrategy::Sampled { .. } => "sampled",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InclusionStrategy::Ordered => None,
            InclusionStrategy::Sampled { seed } => Some(*seed),
        }
    }
}

/// Increment sizes between projected solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    /// `factor * n_qubits` up to `large_cutoff` qubits, `large_increment` above.
    Proportional { factor: usize, large_cutoff: usize, large_increment: usize },
    Fixed { step: usize },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Proportional { factor: 1, large_cutoff: 16, large_increment: 1000 }
    }
}

pub fn next_increment(n_qubits: usize, schedule: &Schedule) -> usize {
    let inc = match *schedule {
        Schedule::Proportional { factor, large_cutoff, large_increment } => {
            if n_qubits > large_cutoff {
                large_increment
            } else {
                factor * n_qubits
            }
        }
        Schedule::Fixed { step } => step,
    };
    inc.max(1)
}

/// `1 - |E0k - E0| / |E0|`.
pub fn energy_fidelity(e0k: f64, e0: f64) -> Result<f64> {
    if e0 == 0.0 {
        return Err(Error::UndefinedFidelity);
    }
    Ok(1.0 - (e0k - e0).abs() / e0.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Inclusions (Ordered) or draws (Sampled) so far.
    pub m: usize,
    /// Unique configurations in the subspace.
    pub k: usize,
    pub e0k: f64,
    pub fidelity: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceTrace {
    pub strategy: InclusionStrategy,
    pub schedule: Schedule,
    pub e0: f64,
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub target_fidelity: Option<f64>,
    pub max_m: usize,
}

impl StopRule {
    pub fn fidelity(target: f64, max_m: usize) -> Self {
        StopRule { target_fidelity: Some(target), max_m }
    }

    /// Run until the support is exhausted or `max_m` is reached.
    pub fn exhaust(max_m: usize) -> Self {
        StopRule { target_fidelity: None, max_m }
    }
}

/// Grows the configuration set for one strategy.
struct Inclusion<'a> {
    gs: &'a GroundState,
    strategy: InclusionStrategy,
    m: usize,
    configs: Vec<Configuration>,
    seen: HashSet<u64>,
    mass: f64,
    cdf: Vec<f64>,
    rng: Option<ChaCha8Rng>,
}

impl<'a> Inclusion<'a> {
    fn new(gs: &'a GroundState, strategy: InclusionStrategy) -> Self {
        let (cdf, rng) = match strategy {
            InclusionStrategy::Ordered => (Vec::new(), None),
            InclusionStrategy::Sampled { seed } => {
                let mut acc = 0.0;
                let cdf = gs
                    .support()
                    .iter()
                    .map(|&c| {
                        acc += gs.probability(c);
                        acc
                    })
                    .collect();
                (cdf, Some(ChaCha8Rng::seed_from_u64(seed)))
            }
        };
        Inclusion { gs, strategy, m: 0, configs: Vec::new(), seen: HashSet::new(), mass: 0.0, cdf, rng }
    }

    fn exhausted(&self) -> bool {
        self.configs.len() >= self.gs.support().len()
    }

    fn insert(&mut self, c: Configuration) {
        if self.seen.insert(c.0) {
            self.configs.push(c);
            self.mass += self.gs.probability(c);
        }
    }

    fn draw(&mut self) -> Configuration {
        let total = *self.cdf.last().expect("support is non-empty");
        let rng = self.rng.as_mut().expect("sampled strategy has an rng");
        let u = rng.gen::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.gs.support()[idx]
    }

    /// Advances by up to `inc` inclusions or draws.
    fn advance(&mut self, inc: usize) {
        match self.strategy {
            InclusionStrategy::Ordered => {
                let support = self.gs.support();
                let end = (self.m + inc).min(support.len());
                for i in self.m..end {
                    self.insert(support[i]);
                }
                self.m = end;
            }
            InclusionStrategy::Sampled { .. } => {
                for _ in 0..inc {
                    let c = self.draw();
                    self.insert(c);
                }
                self.m += inc;
            }
        }
    }
}

fn projected_energy(h: &SparseHamiltonian, configs: &[Configuration], opts: &LanczosOptions) -> Result<f64> {
    projected_ground_energy(&h.project(configs)?, opts)
}

/// Runs one subspace-growth experiment.
///
/// Stops when the target fidelity is reached, the support is exhausted, or
/// `m` reaches the cap. Hitting the cap with an unmet target is an error
/// carrying the partial trace.
pub fn run_trace(
    gs: &GroundState,
    h: &SparseHamiltonian,
    strategy: InclusionStrategy,
    schedule: &Schedule,
    stop: StopRule,
    opts: &LanczosOptions,
) -> Result<SubspaceTrace> {
    if gs.n_qubits() != h.n_qubits() {
        return Err(Error::Shape { expected: h.n_qubits(), got: gs.n_qubits() });
    }
    let e0 = gs.energy();
    energy_fidelity(e0, e0)?;
    let inc = next_increment(h.n_qubits(), schedule);
    let mut trace = SubspaceTrace { strategy, schedule: *schedule, e0, steps: Vec::new() };
    let mut incl = Inclusion::new(gs, strategy);
    loop {
        let before = incl.configs.len();
        let step_inc = inc.min(stop.max_m.saturating_sub(incl.m)).max(1);
        incl.advance(step_inc);
        let e0k = match trace.steps.last() {
            Some(prev) if incl.configs.len() == before => prev.e0k,
            _ => projected_energy(h, &incl.configs, opts)?,
        };
        let fidelity = energy_fidelity(e0k, e0)?;
        trace.steps.push(TraceStep { m: incl.m, k: incl.configs.len(), e0k, fidelity, mass: incl.mass });

        if stop.target_fidelity.is_some_and(|t| fidelity >= t) || incl.exhausted() {
            return Ok(trace);
        }
        if incl.m >= stop.max_m {
            if stop.target_fidelity.is_some() {
                return Err(Error::CapExceeded { cap: stop.max_m, partial: Box::new(trace) });
            }
            return Ok(trace);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinM {
    /// Exact minimal `k` for Ordered; schedule-resolution `m` for Sampled.
    pub m: usize,
    /// First recorded `m` on the schedule with `F_E >= threshold`.
    pub schedule_m: usize,
    /// Unique configurations at `schedule_m`.
    pub k: usize,
    /// Ordered only: bisected minimal subspace size.
    pub exact_k: Option<usize>,
    pub fidelity: f64,
    pub trace: SubspaceTrace,
}

/// Smallest `m` reaching `threshold`. Ordered runs are refined to the exact
/// minimal `k` by bisecting inside the final increment; nested prefixes make
/// `F_E` monotone in `k`, so the bisection is exact.
pub fn find_min_m(
    gs: &GroundState,
    h: &SparseHamiltonian,
    strategy: InclusionStrategy,
    threshold: f64,
    schedule: &Schedule,
    max_m: usize,
    opts: &LanczosOptions,
) -> Result<MinM> {
    check_threshold(threshold)?;
    let trace = run_trace(gs, h, strategy, schedule, StopRule::fidelity(threshold, max_m), opts)?;
    resolve_min_m(gs, h, &trace, threshold, opts)
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold must lie in (0, 1], got {threshold}")))
    }
}

/// Minimal `m` for `threshold` read off an existing trace that may run past
/// it, so one trace to the highest threshold serves all lower ones.
pub fn resolve_min_m(
    gs: &GroundState,
    h: &SparseHamiltonian,
    trace: &SubspaceTrace,
    threshold: f64,
    opts: &LanczosOptions,
) -> Result<MinM> {
    check_threshold(threshold)?;
    let Some(trace) = trace.prefix_to(threshold) else {
        let cap = trace.steps.last().map_or(0, |s| s.m);
        return Err(Error::CapExceeded { cap, partial: Box::new(trace.clone()) });
    };
    let last = *trace.steps.last().expect("prefix has at least one step");
    let exact_k = match trace.strategy {
        InclusionStrategy::Sampled { .. } => None,
        InclusionStrategy::Ordered => {
            let support = gs.support();
            let mut lo = trace.steps.len().checked_sub(2).map_or(1, |i| trace.steps[i].m + 1);
            let mut hi = last.m;
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                let f = energy_fidelity(projected_energy(h, &support[..mid], opts)?, gs.energy())?;
                if f >= threshold {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            Some(lo)
        }
    };
    Ok(MinM {
        m: exact_k.unwrap_or(last.m),
        schedule_m: last.m,
        k: last.k,
        exact_k,
        fidelity: last.fidelity,
        trace,
    })
}

/// Unique-configuration count after every `every` draws, up to `max_m`.
pub fn sampling_efficiency_trace(gs: &GroundState, seed: u64, max_m: usize, every: usize) -> Vec<(usize, usize)> {
    let every = every.max(1);
    let mut incl = Inclusion::new(gs, InclusionStrategy::Sampled { seed });
    let mut out = Vec::with_capacity(max_m / every + 1);
    while incl.m < max_m {
        incl.advance(every.min(max_m - incl.m));
        out.push((incl.m, incl.configs.len()));
    }
    out
}

pub const TRACE_CSV_HEADER: &str = "model,lattice,n_qubits,strategy,seed,threshold,m,k,E0k,E0,F_E,cumulative_mass";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl SubspaceTrace {
    /// One CSV row per step under [`TRACE_CSV_HEADER`]. `seed` is empty for
    /// Ordered, `threshold` empty when the run had no target.
    pub fn write_csv<W: Write>(&self, meta: &GroundStateMeta, threshold: Option<f64>, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        let seed = self.strategy.seed().map(|s| s.to_string()).unwrap_or_default();
        let threshold = threshold.map(|t| t.to_string()).unwrap_or_default();
        for s in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                meta.model.tag(),
                meta.lattice,
                meta.n_qubits,
                self.strategy.label(),
                seed,
                threshold,
                s.m,
                s.k,
                fmt_f64(s.e0k),
                fmt_f64(self.e0),
                fmt_f64(s.fidelity),
                fmt_f64(s.mass),
            )?;
        }
        Ok(())
    }

    /// Steps up to and including the first with `F_E >= threshold`.
    pub fn prefix_to(&self, threshold: f64) -> Option<SubspaceTrace> {
        let end = self.steps.iter().position(|s| s.fidelity >= threshold)?;
        Some(SubspaceTrace { steps: self.steps[..=end].to_vec(), ..self.clone() })
    }
}
