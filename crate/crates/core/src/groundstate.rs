//! Exact ground state as an amplitude/probability store, plus its
//! configuration-space statistics.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::Sector;
use crate::eigensolver::{lanczos_ground, LanczosOptions};
use crate::error::{Error, Result};
use crate::hamiltonian::{Configuration, Model, SparseHamiltonian};
use crate::lattice::LatticeSpec;

/// Probabilities at or below this count as numerical zero for support.
pub const SUPPORT_CUTOFF: f64 = 1e-16;
pub const NORM_TOL: f64 = 1e-10;
pub const DUMP_VERSION: u32 = 1;
const DUMP_MAGIC: &str = "# sqd ground state";

/// Relative window inside which two sector energies count as degenerate.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateMeta {
    pub model: Model,
    pub lattice: LatticeSpec,
    pub n_qubits: usize,
    pub sector: Sector,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    energy: f64,
    amplitudes: Vec<f64>,
    probabilities: Vec<f64>,
    support: Vec<Configuration>,
    meta: GroundStateMeta,
}

/// Elementwise square of a unit vector.
pub fn probabilities(psi: &[f64]) -> Result<Vec<f64>> {
    let p: Vec<f64> = psi.iter().map(|c| c * c).collect();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::Normalization { norm_sq: total });
    }
    Ok(p)
}

/// `-sum p ln p` in nats; zero entries contribute nothing.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `exp(S)`.
pub fn effective_support(p: &[f64]) -> f64 {
    shannon_entropy(p).exp()
}

impl GroundState {
    pub fn from_amplitudes(energy: f64, amplitudes: Vec<f64>, meta: GroundStateMeta) -> Result<Self> {
        let expected = 1usize << meta.n_qubits;
        if amplitudes.len() != expected {
            return Err(Error::Shape { expected, got: amplitudes.len() });
        }
        let probabilities = probabilities(&amplitudes)?;
        let mut support: Vec<Configuration> = probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > SUPPORT_CUTOFF)
            .map(|(i, _)| Configuration(i as u64))
            .collect();
        support.sort_by(|a, b| {
            probabilities[b.0 as usize].total_cmp(&probabilities[a.0 as usize]).then(a.0.cmp(&b.0))
        });
        Ok(GroundState { energy, amplitudes, probabilities, support, meta })
    }

    /// Solves every target sector of `h` and keeps the lowest. On a
    /// degeneracy within `1e-9` relative the earlier sector in
    /// [`SparseHamiltonian::target_sectors`] order wins.
    pub fn solve(h: &SparseHamiltonian, opts: &LanczosOptions) -> Result<Self> {
        let sectors = h.target_sectors()?;
        let solved: Vec<Result<(Sector, f64, Vec<u64>, Vec<f64>)>> = sectors
            .par_iter()
            .map(|&sector| {
                let op = h.sector_operator(sector)?;
                let r = lanczos_ground(&op, opts)?;
                let vector = r.vector.unwrap_or_default();
                Ok((sector, r.value, op.basis().states().to_vec(), vector))
            })
            .collect();
        let mut best: Option<(Sector, f64, Vec<u64>, Vec<f64>)> = None;
        for item in solved {
            let item = item?;
            let replace = match &best {
                None => true,
                Some((_, e, _, _)) => item.1 < e - DEGENERACY_TOL * e.abs().max(1.0),
            };
            if replace {
                best = Some(item);
            }
        }
        let (sector, energy, states, vector) = best.ok_or_else(|| Error::InvalidSector("no target sector".into()))?;
        let mut amplitudes = vec![0.0; h.dimension() as usize];
        for (&s, &a) in states.iter().zip(&vector) {
            amplitudes[s as usize] = a;
        }
        let meta = GroundStateMeta {
            model: h.model(),
            lattice: h.lattice(),
            n_qubits: h.n_qubits(),
            sector,
            seed: opts.seed,
            tol: opts.tol,
        };
        Self::from_amplitudes(energy, amplitudes, meta)
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, c: Configuration) -> f64 {
        self.probabilities.get(c.0 as usize).copied().unwrap_or(0.0)
    }

    /// Configurations with `p > SUPPORT_CUTOFF`, descending `p`, ties by ascending bits.
    pub fn support(&self) -> &[Configuration] {
        &self.support
    }

    pub fn meta(&self) -> &GroundStateMeta {
        &self.meta
    }

    pub fn n_qubits(&self) -> usize {
        self.meta.n_qubits
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probabilities)
    }

    pub fn effective_support(&self) -> f64 {
        effective_support(&self.probabilities)
    }

    pub fn cumulative_mass<'a>(&self, configs: impl IntoIterator<Item = &'a Configuration>) -> Result<f64> {
        let dim = self.probabilities.len() as u64;
        let mut mass = 0.0;
        for c in configs {
            if c.0 >= dim {
                return Err(Error::Index { config: c.0, dim });
            }
            mass += self.probabilities[c.0 as usize];
        }
        Ok(mass)
    }

    /// Text dump: header block, then one `bits amplitude` line per nonzero
    /// amplitude in support order, then `end`. Amplitudes round-trip exactly.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<ground state dump>", e);
        let model = serde_json::to_string(&self.meta.model).map_err(|e| Error::Format(e.to_string()))?;
        let mut order: Vec<usize> = (0..self.amplitudes.len()).filter(|&i| self.amplitudes[i] != 0.0).collect();
        order.sort_by(|&a, &b| self.probabilities[b].total_cmp(&self.probabilities[a]).then(a.cmp(&b)));
        let mut out = String::new();
        out.push_str(DUMP_MAGIC);
        out.push('\n');
        out.push_str(&format!("version={DUMP_VERSION}\n"));
        out.push_str(&format!("model={model}\n"));
        out.push_str(&format!("lattice={}\n", self.meta.lattice));
        out.push_str(&format!("n_qubits={}\n", self.meta.n_qubits));
        out.push_str(&format!("sector={}\n", self.meta.sector));
        out.push_str(&format!("seed={}\n", self.meta.seed));
        out.push_str(&format!("tol={:e}\n", self.meta.tol));
        out.push_str(&format!("energy={:e}\n", self.energy));
        out.push_str(&format!("entries={}\n", order.len()));
        for i in order {
            out.push_str(&format!("{i} {:e}\n", self.amplitudes[i]));
        }
        out.push_str("end\n");
        w.write_all(out.as_bytes()).map_err(io)
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Self> {
        let fmt = |msg: String| Error::Format(msg);
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(Error::io("<ground state dump>", e)),
                None => Err(fmt("unexpected end of dump".into())),
            }
        };
        if next()? != DUMP_MAGIC {
            return Err(fmt("missing ground-state header".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = next()?;
            match line.split_once('=') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(fmt(format!("expected `{key}=`, found {line:?}"))),
            }
        };
        let version: u32 = field("version")?.parse().map_err(|_| fmt("bad version".into()))?;
        if version != DUMP_VERSION {
            return Err(fmt(format!("unsupported dump version {version}")));
        }
        let model: Model = serde_json::from_str(&field("model")?).map_err(|e| fmt(format!("bad model: {e}")))?;
        let lattice: LatticeSpec = field("lattice")?.parse().map_err(|e: Error| fmt(e.to_string()))?;
        let n_qubits: usize = field("n_qubits")?.parse().map_err(|_| fmt("bad n_qubits".into()))?;
        let sector: Sector = field("sector")?.parse().map_err(|e: Error| fmt(e.to_string()))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| fmt("bad seed".into()))?;
        let tol: f64 = field("tol")?.parse().map_err(|_| fmt("bad tol".into()))?;
        let energy: f64 = field("energy")?.parse().map_err(|_| fmt("bad energy".into()))?;
        let entries: usize = field("entries")?.parse().map_err(|_| fmt("bad entries".into()))?;
        if n_qubits > 32 || model.qubits_for(lattice.sites()) != n_qubits {
            return Err(fmt(format!("n_qubits={n_qubits} inconsistent with {lattice}")));
        }
        let dim = 1usize << n_qubits;
        let mut amplitudes = vec![0.0; dim];
        for _ in 0..entries {
            let line = next()?;
            let (bits, amp) = line.split_once(' ').ok_or_else(|| fmt(format!("bad entry {line:?}")))?;
            let bits: usize = bits.parse().map_err(|_| fmt(format!("bad configuration {bits:?}")))?;
            let amp: f64 = amp.parse().map_err(|_| fmt(format!("bad amplitude {amp:?}")))?;
            if bits >= dim {
                return Err(fmt(format!("configuration {bits} out of range")));
            }
            amplitudes[bits] = amp;
        }
        if next()? != "end" {
            return Err(fmt("missing end marker".into()));
        }
        let meta = GroundStateMeta { model, lattice, n_qubits, sector, seed, tol };
        Self::from_amplitudes(energy, amplitudes, meta).map_err(|e| match e {
            Error::Normalization { .. } => fmt(format!("corrupt amplitudes: {e}")),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_heisenberg, build_hubbard, Filling};
    use crate::lattice::build_chain;

    fn singlet() -> GroundState {
        let h = build_heisenberg(&build_chain(2).unwrap(), 1.0).unwrap();
        GroundState::solve(&h, &LanczosOptions::default()).unwrap()
    }

    #[test]
    fn probability_examples() {
        let mut e3 = vec![0.0; 8];
        e3[3] = 1.0;
        assert_eq!(probabilities(&e3).unwrap()[3], 1.0);
        let s = 0.5f64.sqrt();
        let p = probabilities(&[0.0, s, s, 0.0]).unwrap();
        assert!((p[1] - 0.5).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15);
        assert!(matches!(probabilities(&[1.0, 1.0]), Err(Error::Normalization { .. })));
    }

    #[test]
    fn entropy_examples() {
        let uniform = vec![0.125; 8];
        assert!((shannon_entropy(&uniform) - 8f64.ln()).abs() < 1e-15);
        assert!((effective_support(&uniform) - 8.0).abs() < 1e-12);
        assert_eq!(shannon_entropy(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn singlet_statistics() {
        let gs = singlet();
        assert!((gs.energy() + 0.75).abs() < 1e-12);
        assert!((gs.probability(Configuration(1)) - 0.5).abs() < 1e-12);
        assert!((gs.probability(Configuration(2)) - 0.5).abs() < 1e-12);
        let mut support = gs.support().to_vec();
        support.sort();
        assert_eq!(support, [Configuration(1), Configuration(2)]);
        assert!((gs.effective_support() - 2.0).abs() < 1e-10);
        assert!((gs.cumulative_mass(&[Configuration(1)]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(gs.cumulative_mass(&[]).unwrap(), 0.0);
        let all: Vec<_> = (0..4).map(Configuration).collect();
        assert!((gs.cumulative_mass(&all).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(gs.cumulative_mass(&[Configuration(4)]), Err(Error::Index { .. })));
    }

    #[test]
    fn hubbard_ground_search_picks_lowest_sector() {
        let h = build_hubbard(&build_chain(2).unwrap(), 1.0, 2.0, Filling::Ground).unwrap();
        let gs = GroundState::solve(&h, &LanczosOptions::default()).unwrap();
        assert_eq!(gs.meta().sector, Sector::Particles { up: 1, down: 1 });
        assert!((gs.energy() - (1.0 - 5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trip_and_corruption() {
        let h = build_heisenberg(&build_chain(6).unwrap(), 1.0).unwrap();
        let gs = GroundState::solve(&h, &LanczosOptions::default().with_seed(3)).unwrap();
        let mut buf = Vec::new();
        gs.write_dump(&mut buf).unwrap();
        let back = GroundState::read_dump(&buf[..]).unwrap();
        assert_eq!(back, gs);

        let text = String::from_utf8(buf).unwrap();
        let truncated = &text[..text.len() / 2];
        assert!(matches!(GroundState::read_dump(truncated.as_bytes()), Err(Error::Format(_))));
        let bumped = text.replace("version=1", "version=9");
        assert!(matches!(GroundState::read_dump(bumped.as_bytes()), Err(Error::Format(_))));
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(12);
        let dropped = lines.join("\n") + "\n";
        assert!(matches!(GroundState::read_dump(dropped.as_bytes()), Err(Error::Format(_))));
    }
}
