//! Chains and rectangular lattices with nearest-neighbour bonds.
//!
//! Sites of a rectangle are linearized along a snake path: row `r` runs
//! left-to-right when `r` is even and right-to-left when `r` is odd, with
//! coordinates counted row-major from the top-left corner. All bonds are
//! stored in linear (qubit) indices with `i < j`, sorted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Parsed form of `chain:<n>` / `rect:<h>x<w>` with optional `:periodic`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub height: usize,
    pub width: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn chain(n: usize) -> Self {
        LatticeSpec { kind: LatticeKind::Chain, height: 1, width: n, boundary: Boundary::Open }
    }

    pub fn rect(height: usize, width: usize) -> Self {
        LatticeSpec { kind: LatticeKind::Rect, height, width, boundary: Boundary::Open }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn sites(&self) -> usize {
        self.height * self.width
    }

    /// 1 for chains and single-row rectangles, 2 otherwise.
    pub fn dimensionality(&self) -> usize {
        if self.height > 1 && self.width > 1 {
            2
        } else {
            1
        }
    }

    pub fn build(&self) -> Result<Lattice> {
        let lattice = match self.kind {
            LatticeKind::Chain => build_chain(self.width)?,
            LatticeKind::Rect => build_rect(self.height, self.width)?,
        };
        Ok(match self.boundary {
            Boundary::Open => lattice,
            Boundary::Periodic => lattice.into_periodic(),
        })
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LatticeKind::Chain => write!(f, "chain:{}", self.width)?,
            LatticeKind::Rect => write!(f, "rect:{}x{}", self.height, self.width)?,
        }
        if self.boundary == Boundary::Periodic {
            f.write_str(":periodic")?;
        }
        Ok(())
    }
}

impl FromStr for LatticeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidLattice(format!("cannot parse lattice spec {s:?}"));
        let mut parts = s.trim().split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let dims = parts.next().ok_or_else(bad)?;
        let boundary = match parts.next() {
            None => Boundary::Open,
            Some("periodic") => Boundary::Periodic,
            Some("open") => Boundary::Open,
            Some(_) => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        let spec = match kind {
            "chain" => LatticeSpec::chain(dims.parse().map_err(|_| bad())?),
            "rect" => {
                let (h, w) = dims.split_once('x').ok_or_else(bad)?;
                LatticeSpec::rect(h.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?)
            }
            _ => return Err(bad()),
        };
        Ok(spec.with_boundary(boundary))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    spec: LatticeSpec,
    bonds: Vec<(usize, usize)>,
    /// Row-major coordinate index `r * width + c` to linear (qubit) index.
    ordering: Vec<usize>,
}

impl Lattice {
    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn kind(&self) -> LatticeKind {
        self.spec.kind
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn sites(&self) -> usize {
        self.spec.sites()
    }

    pub fn is_periodic(&self) -> bool {
        self.spec.boundary == Boundary::Periodic
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Linear index of the site at `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> usize {
        self.ordering[row * self.spec.width + col]
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// Adds wrap-around bonds along every dimension of length > 2. A length-2
    /// wrap would duplicate an existing bond and is skipped.
    fn into_periodic(mut self) -> Self {
        let (h, w) = (self.spec.height, self.spec.width);
        let mut extra = Vec::new();
        if w > 2 {
            for r in 0..h {
                extra.push(ordered(self.index(r, w - 1), self.index(r, 0)));
            }
        }
        if h > 2 {
            for c in 0..w {
                extra.push(ordered(self.index(h - 1, c), self.index(0, c)));
            }
        }
        self.bonds.extend(extra);
        self.bonds.sort_unstable();
        self.bonds.dedup();
        self.spec.boundary = Boundary::Periodic;
        self
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn snake_ordering(height: usize, width: usize) -> Vec<usize> {
    let mut ordering = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let col = if r % 2 == 0 { c } else { width - 1 - c };
            ordering.push(r * width + col);
        }
    }
    ordering
}

fn open_bonds(height: usize, width: usize, ordering: &[usize]) -> Vec<(usize, usize)> {
    let at = |r: usize, c: usize| ordering[r * width + c];
    let mut bonds = Vec::with_capacity(height * width * 2);
    for r in 0..height {
        for c in 0..width {
            if c + 1 < width {
                bonds.push(ordered(at(r, c), at(r, c + 1)));
            }
            if r + 1 < height {
                bonds.push(ordered(at(r, c), at(r + 1, c)));
            }
        }
    }
    bonds.sort_unstable();
    bonds
}

/// Open chain `0 - 1 - ... - (n-1)`.
pub fn build_chain(n_sites: usize) -> Result<Lattice> {
    if n_sites < 2 {
        return Err(Error::InvalidLattice(format!("a chain needs at least 2 sites, got {n_sites}")));
    }
    let ordering: Vec<usize> = (0..n_sites).collect();
    let bonds = open_bonds(1, n_sites, &ordering);
    Ok(Lattice { spec: LatticeSpec::chain(n_sites), bonds, ordering })
}

/// Open `height x width` rectangle in snake order.
pub fn build_rect(height: usize, width: usize) -> Result<Lattice> {
    if height == 0 || width == 0 || height * width < 2 {
        return Err(Error::InvalidLattice(format!(
            "a rectangle needs at least 2 sites, got {height}x{width}"
        )));
    }
    let ordering = snake_ordering(height, width);
    let bonds = open_bonds(height, width, &ordering);
    Ok(Lattice { spec: LatticeSpec::rect(height, width), bonds, ordering })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_bonds() {
        assert_eq!(build_chain(2).unwrap().bonds(), &[(0, 1)]);
        let c6 = build_chain(6).unwrap();
        assert_eq!(c6.sites(), 6);
        assert_eq!(c6.bonds().len(), 5);
        assert!(matches!(build_chain(1), Err(Error::InvalidLattice(_))));
        assert!(matches!(build_chain(0), Err(Error::InvalidLattice(_))));
    }

    #[test]
    fn rect_examples() {
        let r = build_rect(2, 2).unwrap();
        assert_eq!((r.sites(), r.bonds().len()), (4, 4));
        assert_eq!(build_rect(1, 6).unwrap().bonds(), build_chain(6).unwrap().bonds());
        let r33 = build_rect(3, 3).unwrap();
        assert_eq!((r33.sites(), r33.bonds().len()), (9, 12));
        assert_eq!(r33.index(1, 2), 3);
        assert!(build_rect(1, 1).is_err());
        assert!(build_rect(0, 4).is_err());
    }

    /// Brute force: every bond joins coordinates at Manhattan distance 1, the
    /// bond set has no duplicates, the count matches the closed form, and
    /// consecutive linear indices are lattice neighbours.
    #[test]
    fn snake_properties_up_to_4x4() {
        for h in 1..=4 {
            for w in 1..=4 {
                if h * w < 2 {
                    continue;
                }
                let lat = build_rect(h, w).unwrap();
                let n = lat.sites();
                let mut coord = vec![(0usize, 0usize); n];
                let mut seen = vec![false; n];
                for r in 0..h {
                    for c in 0..w {
                        let i = lat.index(r, c);
                        assert!(i < n && !seen[i]);
                        seen[i] = true;
                        coord[i] = (r, c);
                    }
                }
                let adjacent = |a: usize, b: usize| {
                    let (ra, ca) = coord[a];
                    let (rb, cb) = coord[b];
                    ra.abs_diff(rb) + ca.abs_diff(cb) == 1
                };
                for &(a, b) in lat.bonds() {
                    assert!(a < b && b < n);
                    assert!(adjacent(a, b), "{h}x{w}: bond ({a},{b})");
                }
                let mut dedup = lat.bonds().to_vec();
                dedup.dedup();
                assert_eq!(dedup.len(), lat.bonds().len());
                assert_eq!(lat.bonds().len(), h * (w - 1) + w * (h - 1));
                for i in 1..n {
                    assert!(adjacent(i - 1, i), "{h}x{w}: snake break at {i}");
                }
            }
        }
    }

    #[test]
    fn periodic_wraps() {
        let ring = "chain:6:periodic".parse::<LatticeSpec>().unwrap().build().unwrap();
        assert_eq!(ring.bonds().len(), 6);
        assert!(ring.bonds().contains(&(0, 5)));
        // 2-site wrap would duplicate (0,1)
        let dimer = "chain:2:periodic".parse::<LatticeSpec>().unwrap().build().unwrap();
        assert_eq!(dimer.bonds(), &[(0, 1)]);
        let torus = "rect:3x3:periodic".parse::<LatticeSpec>().unwrap().build().unwrap();
        assert_eq!(torus.bonds().len(), 18);
    }

    #[test]
    fn spec_strings() {
        for s in ["chain:6", "rect:2x3", "rect:4x4:periodic", "chain:20:periodic"] {
            assert_eq!(s.parse::<LatticeSpec>().unwrap().to_string(), s);
        }
        for s in ["chain", "chain:x", "rect:3", "rect:3x", "ring:4", "chain:4:twisted", "chain:4:periodic:x"] {
            assert!(s.parse::<LatticeSpec>().is_err(), "{s}");
        }
        assert_eq!("rect:2x4".parse::<LatticeSpec>().unwrap().dimensionality(), 2);
        assert_eq!("rect:1x4".parse::<LatticeSpec>().unwrap().dimensionality(), 1);
    }
}
