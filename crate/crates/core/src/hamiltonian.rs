//! Heisenberg and Hubbard Hamiltonians in the computational basis.
//!
//! Bit conventions:
//! - Heisenberg: bit `b` is site `b` in snake order, `1` = spin up.
//! - Hubbard on `N` sites: bits `0..N` hold spin-up occupations in snake
//!   order, bits `N..2N` hold spin-down occupations. Modes are ordered by bit
//!   index, so a hop between qubits `a < b` carries the Jordan-Wigner sign
//!   `(-1)^(occupied qubits strictly between a and b)`.
//!
//! Both operators are real symmetric. Up to [`STORED_ROWS_MAX_QUBITS`] the
//! rows are materialized once; above that they are generated on the fly.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Sector, SectorBasis};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeSpec};
use crate::sparse::{CsrMatrix, LinearOperator};

/// Hard ceiling from the 64-bit configuration word.
pub const MAX_QUBITS: usize = 63;
pub const STORED_ROWS_MAX_QUBITS: usize = 16;

/// A computational-basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(pub u64);

impl Configuration {
    pub fn bits(self) -> u64 {
        self.0
    }
}

impl From<u64> for Configuration {
    fn from(bits: u64) -> Self {
        Configuration(bits)
    }
}

/// Particle sector targeted by the Hubbard ground-state search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filling {
    /// Lowest energy over every `(n_up, n_down)` sector.
    Ground,
    /// `n_up = ceil(N/2)`, `n_down = floor(N/2)`.
    Half,
    Fixed { up: usize, down: usize },
}

impl fmt::Display for Filling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filling::Ground => f.write_str("ground"),
            Filling::Half => f.write_str("half"),
            Filling::Fixed { up, down } => write!(f, "{up},{down}"),
        }
    }
}

impl FromStr for Filling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground" => Ok(Filling::Ground),
            "half" => Ok(Filling::Half),
            _ => {
                let bad = || Error::Config(format!("cannot parse filling {s:?}"));
                let (u, d) = s.split_once(',').ok_or_else(bad)?;
                Ok(Filling::Fixed {
                    up: u.trim().parse().map_err(|_| bad())?,
                    down: d.trim().parse().map_err(|_| bad())?,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Heisenberg { j: f64 },
    Hubbard { t: f64, u: f64, filling: Filling },
}

impl Model {
    pub fn heisenberg() -> Self {
        Model::Heisenberg { j: 1.0 }
    }

    pub fn hubbard() -> Self {
        Model::Hubbard { t: 1.0, u: 2.0, filling: Filling::Ground }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Model::Heisenberg { .. } => "heisenberg",
            Model::Hubbard { .. } => "hubbard",
        }
    }

    pub fn qubits_for(&self, sites: usize) -> usize {
        match self {
            Model::Heisenberg { .. } => sites,
            Model::Hubbard { .. } => 2 * sites,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Heisenberg { j } => write!(f, "heisenberg(J={j})"),
            Model::Hubbard { t, u, filling } => write!(f, "hubbard(t={t},U={u},filling={filling})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    model: Model,
    lattice: LatticeSpec,
    n_sites: usize,
    n_qubits: usize,
    /// Qubit pairs coupled by exchange (Heisenberg) or hopping (Hubbard, both spin blocks).
    pairs: Vec<(usize, usize)>,
    rows: Option<CsrMatrix>,
}

impl SparseHamiltonian {
    pub fn build(model: Model, lattice: &Lattice) -> Result<Self> {
        match model {
            Model::Heisenberg { j } => build_heisenberg(lattice, j),
            Model::Hubbard { t, u, filling } => build_hubbard(lattice, t, u, filling),
        }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `D = 2^n_qubits`.
    pub fn dimension(&self) -> u64 {
        1u64 << self.n_qubits
    }

    pub fn is_stored(&self) -> bool {
        self.rows.is_some()
    }

    /// Calls `f(column, value)` for every nonzero in row `state`, in a fixed
    /// order: diagonal first, then pairs in bond order.
    #[inline]
    pub fn for_each_entry(&self, state: u64, mut f: impl FnMut(u64, f64)) {
        match self.model {
            Model::Heisenberg { j } => {
                let mut diag = 0.0;
                let quarter = 0.25 * j;
                for &(a, b) in &self.pairs {
                    if (state >> a ^ state >> b) & 1 == 0 {
                        diag += quarter;
                    } else {
                        diag -= quarter;
                    }
                }
                if diag != 0.0 {
                    f(state, diag);
                }
                let half = 0.5 * j;
                for &(a, b) in &self.pairs {
                    if (state >> a ^ state >> b) & 1 == 1 {
                        f(state ^ (1 << a | 1 << b), half);
                    }
                }
            }
            Model::Hubbard { t, u, .. } => {
                let mask = (1u64 << self.n_sites) - 1;
                let doubles = (state & mask & (state >> self.n_sites)).count_ones();
                if doubles != 0 && u != 0.0 {
                    f(state, u * doubles as f64);
                }
                for &(a, b) in &self.pairs {
                    if (state >> a ^ state >> b) & 1 == 1 {
                        // a < b; string covers qubits a+1 .. b-1
                        let between = state & ((1u64 << b) - 1) & !((1u64 << (a + 1)) - 1);
                        let sign = if between.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        f(state ^ (1 << a | 1 << b), -t * sign);
                    }
                }
            }
        }
    }

    /// Row `state` as `(column, value)` sorted by column.
    pub fn row(&self, state: u64) -> Vec<(u64, f64)> {
        let mut out = Vec::with_capacity(self.pairs.len() + 1);
        self.for_each_entry(state, |c, v| out.push((c, v)));
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    /// Matrix element `<bra|H|ket>`.
    pub fn element(&self, bra: u64, ket: u64) -> f64 {
        let mut value = 0.0;
        self.for_each_entry(bra, |c, v| {
            if c == ket {
                value += v;
            }
        });
        value
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let d = self.dense_dim()?;
        if v.len() != d {
            return Err(Error::Shape { expected: d, got: v.len() });
        }
        let mut y = vec![0.0; d];
        self.apply_into(v, &mut y);
        Ok(y)
    }

    fn dense_dim(&self) -> Result<usize> {
        if self.n_qubits > 32 {
            return Err(Error::Capacity { n_qubits: self.n_qubits, cap: 32 });
        }
        Ok(1usize << self.n_qubits)
    }

    /// Submatrix on rows/columns `configs`, order preserved.
    pub fn project(&self, configs: &[Configuration]) -> Result<CsrMatrix> {
        let dim = self.dimension();
        let mut position = std::collections::HashMap::with_capacity(configs.len());
        for (i, c) in configs.iter().enumerate() {
            if c.0 >= dim {
                return Err(Error::Index { config: c.0, dim });
            }
            if position.insert(c.0, i as u32).is_some() {
                return Err(Error::InvalidSubspace(format!("duplicate configuration {}", c.0)));
            }
        }
        Ok(CsrMatrix::from_row_fn(configs.len(), |r, out| {
            self.for_each_entry(configs[r].0, |c, v| {
                if let Some(&col) = position.get(&c) {
                    out.push((col, v));
                }
            });
            out.sort_unstable_by_key(|e| e.0);
        }))
    }

    /// The operator restricted to one symmetry sector, stored as CSR.
    pub fn sector_operator(&self, sector: Sector) -> Result<SectorOperator> {
        let basis = SectorBasis::new(sector, self.n_qubits, self.n_sites)?;
        let states = basis.states();
        let matrix = CsrMatrix::from_row_fn(basis.len(), |r, out| {
            self.for_each_entry(states[r], |c, v| {
                debug_assert!(basis.contains(c), "entry leaves the sector");
                out.push((basis.index_of(c) as u32, v));
            });
            out.sort_unstable_by_key(|e| e.0);
        });
        Ok(SectorOperator { basis, matrix })
    }

    /// Sectors scanned by the ground-state search, in preference order for
    /// tie-breaking (first wins on exact degeneracy).
    pub fn target_sectors(&self) -> Result<Vec<Sector>> {
        let n = self.n_sites;
        match self.model {
            Model::Heisenberg { .. } => Ok(vec![Sector::Magnetization { popcount: n.div_ceil(2) }]),
            Model::Hubbard { filling, .. } => match filling {
                Filling::Half => Ok(vec![Sector::Particles { up: n.div_ceil(2), down: n / 2 }]),
                Filling::Fixed { up, down } => {
                    if up > n || down > n {
                        return Err(Error::InvalidSector(format!(
                            "({up},{down}) particles on {n} sites"
                        )));
                    }
                    Ok(vec![Sector::Particles { up, down }])
                }
                Filling::Ground => {
                    // Spin-flip symmetry makes (a, b) and (b, a) isospectral;
                    // only up >= down is scanned. Ordered by |Sz| then total.
                    let mut sectors = Vec::new();
                    for up in 0..=n {
                        for down in 0..=up {
                            if up + down > 0 {
                                sectors.push((up - down, up + down, up, down));
                            }
                        }
                    }
                    sectors.sort_unstable();
                    Ok(sectors.into_iter().map(|(_, _, up, down)| Sector::Particles { up, down }).collect())
                }
            },
        }
    }

    /// Text triplet export: `# dim=<D> model=<tag>` then `row col value`.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# dim={} model={}", self.dimension(), self.model)?;
        for state in 0..self.dimension() {
            for (c, v) in self.row(state) {
                writeln!(w, "{state} {c} {v:.16e}")?;
            }
        }
        Ok(())
    }
}

impl LinearOperator for SparseHamiltonian {
    fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        if let Some(rows) = &self.rows {
            return rows.apply_into(x, y);
        }
        const CHUNK: usize = 4096;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, ys)| {
            let base = (chunk * CHUNK) as u64;
            for (i, out) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                self.for_each_entry(base + i as u64, |c, v| acc += v * x[c as usize]);
                *out = acc;
            }
        });
    }
}

/// Hamiltonian restricted to one sector; vector index `i` is
/// `basis.states()[i]`.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    basis: SectorBasis,
    matrix: CsrMatrix,
}

impl SectorOperator {
    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

impl LinearOperator for SectorOperator {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.apply_into(x, y)
    }
}

fn finalize(model: Model, lattice: &Lattice, n_qubits: usize, pairs: Vec<(usize, usize)>) -> Result<SparseHamiltonian> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity { n_qubits, cap: MAX_QUBITS });
    }
    let mut h = SparseHamiltonian {
        model,
        lattice: lattice.spec(),
        n_sites: lattice.sites(),
        n_qubits,
        pairs,
        rows: None,
    };
    if n_qubits <= STORED_ROWS_MAX_QUBITS {
        let rows = CsrMatrix::from_row_fn(1usize << n_qubits, |r, out| {
            h.for_each_entry(r as u64, |c, v| out.push((c as u32, v)));
            out.sort_unstable_by_key(|e| e.0);
        });
        h.rows = Some(rows);
    }
    Ok(h)
}

/// `H = J sum_<ij> S_i . S_j` with spin-1/2 operators.
pub fn build_heisenberg(lattice: &Lattice, j: f64) -> Result<SparseHamiltonian> {
    if !j.is_finite() {
        return Err(Error::Config(format!("coupling J must be finite, got {j}")));
    }
    finalize(Model::Heisenberg { j }, lattice, lattice.sites(), lattice.bonds().to_vec())
}

/// `H = -t sum_<ij>,s (c+_is c_js + h.c.) + U sum_i n_iu n_id`.
pub fn build_hubbard(lattice: &Lattice, t: f64, u: f64, filling: Filling) -> Result<SparseHamiltonian> {
    if !t.is_finite() || !u.is_finite() {
        return Err(Error::Config(format!("t and U must be finite, got t={t}, U={u}")));
    }
    let n = lattice.sites();
    let n_qubits = 2 * n;
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity { n_qubits, cap: MAX_QUBITS });
    }
    let mut pairs: Vec<(usize, usize)> = lattice.bonds().to_vec();
    pairs.extend(lattice.bonds().iter().map(|&(a, b)| (a + n, b + n)));
    let h = finalize(Model::Hubbard { t, u, filling }, lattice, n_qubits, pairs)?;
    h.target_sectors()?;
    Ok(h)
}
