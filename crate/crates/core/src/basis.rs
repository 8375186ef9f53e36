//! Symmetry sectors of the computational basis.
//!
//! Within a fixed-popcount block, ascending numeric order equals colex order,
//! so the combinatorial number system gives an O(popcount) rank.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_N: usize = 64;

fn binomial_table() -> &'static [[u64; MAX_N + 1]; MAX_N + 1] {
    static TABLE: std::sync::OnceLock<Box<[[u64; MAX_N + 1]; MAX_N + 1]>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Box::new([[0u64; MAX_N + 1]; MAX_N + 1]);
        for n in 0..=MAX_N {
            t[n][0] = 1;
            for k in 1..=n {
                t[n][k] = t[n - 1][k - 1].saturating_add(if k <= n - 1 { t[n - 1][k] } else { 0 });
            }
        }
        t
    })
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n || n > MAX_N {
        0
    } else {
        binomial_table()[n][k]
    }
}

/// Rank of `bits` among all integers with the same popcount, ascending.
pub fn popcount_rank(bits: u64) -> u64 {
    let table = binomial_table();
    let mut rank = 0;
    let mut rest = bits;
    let mut i = 1;
    while rest != 0 {
        let p = rest.trailing_zeros() as usize;
        rank += table[p][i];
        rest &= rest - 1;
        i += 1;
    }
    rank
}

/// All `n`-bit integers with popcount `k`, ascending (Gosper's hack).
pub fn fixed_popcount_states(n: usize, k: usize) -> Vec<u64> {
    let count = binomial(n, k) as usize;
    let mut out = Vec::with_capacity(count);
    if k == 0 {
        out.push(0);
        return out;
    }
    if k > n {
        return out;
    }
    let mut v: u64 = (1u64 << k) - 1;
    for _ in 0..count {
        out.push(v);
        let c = v & v.wrapping_neg();
        let r = v.wrapping_add(c);
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

/// A block of the computational basis fixed by a conserved quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sector {
    Full,
    /// Fixed number of up spins (bits set).
    Magnetization { popcount: usize },
    /// Fixed occupation of the spin-up (low) and spin-down (high) blocks.
    Particles { up: usize, down: usize },
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::Full => f.write_str("full"),
            Sector::Magnetization { popcount } => write!(f, "popcount:{popcount}"),
            Sector::Particles { up, down } => write!(f, "particles:{up},{down}"),
        }
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSector(format!("cannot parse sector {s:?}"));
        if s == "full" {
            return Ok(Sector::Full);
        }
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "popcount" => Ok(Sector::Magnetization { popcount: rest.parse().map_err(|_| bad())? }),
            "particles" => {
                let (u, d) = rest.split_once(',').ok_or_else(bad)?;
                Ok(Sector::Particles {
                    up: u.parse().map_err(|_| bad())?,
                    down: d.parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// Enumerated basis of one sector with O(popcount) state-to-index lookup.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    sector: Sector,
    n_qubits: usize,
    /// Number of qubits in the spin-up block (Particles sectors only).
    block: usize,
    states: Vec<u64>,
    up_dim: u64,
}

impl SectorBasis {
    /// `block` is the number of sites for particle sectors; ignored otherwise.
    pub fn new(sector: Sector, n_qubits: usize, block: usize) -> Result<Self> {
        let states = match sector {
            Sector::Full => {
                if n_qubits > 32 {
                    return Err(Error::Capacity { n_qubits, cap: 32 });
                }
                (0..1u64 << n_qubits).collect()
            }
            Sector::Magnetization { popcount } => {
                if popcount > n_qubits {
                    return Err(Error::InvalidSector(format!(
                        "popcount {popcount} exceeds {n_qubits} qubits"
                    )));
                }
                fixed_popcount_states(n_qubits, popcount)
            }
            Sector::Particles { up, down } => {
                if 2 * block != n_qubits || up > block || down > block {
                    return Err(Error::InvalidSector(format!(
                        "({up},{down}) particles do not fit {block} sites"
                    )));
                }
                let ups = fixed_popcount_states(block, up);
                let downs = fixed_popcount_states(block, down);
                let mut states = Vec::with_capacity(ups.len() * downs.len());
                for &d in &downs {
                    for &u in &ups {
                        states.push(u | (d << block));
                    }
                }
                states
            }
        };
        if states.is_empty() {
            return Err(Error::InvalidSector(format!("sector {sector} is empty")));
        }
        let up_dim = match sector {
            Sector::Particles { up, .. } => binomial(block, up),
            _ => 0,
        };
        Ok(SectorBasis { sector, n_qubits, block, states, up_dim })
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn contains(&self, bits: u64) -> bool {
        if self.n_qubits < 64 && bits >> self.n_qubits != 0 {
            return false;
        }
        match self.sector {
            Sector::Full => true,
            Sector::Magnetization { popcount } => bits.count_ones() as usize == popcount,
            Sector::Particles { up, down } => {
                let mask = (1u64 << self.block) - 1;
                (bits & mask).count_ones() as usize == up && (bits >> self.block).count_ones() as usize == down
            }
        }
    }

    /// Index of `bits` in [`states`](Self::states). The caller guarantees
    /// `contains(bits)`.
    #[inline]
    pub fn index_of(&self, bits: u64) -> usize {
        debug_assert!(self.contains(bits));
        match self.sector {
            Sector::Full => bits as usize,
            Sector::Magnetization { .. } => popcount_rank(bits) as usize,
            Sector::Particles { .. } => {
                let mask = (1u64 << self.block) - 1;
                (popcount_rank(bits >> self.block) * self.up_dim + popcount_rank(bits & mask)) as usize
            }
        }
    }
}
