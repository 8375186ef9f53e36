//! Exact ground states of Heisenberg and Hubbard lattices, configuration
//! subspaces built from them by ordered inclusion or sampling, projected
//! diagonalization, and entropy/scaling analysis.

pub mod analysis;
pub mod basis;
pub mod eigensolver;
pub mod error;
pub mod groundstate;
pub mod hamiltonian;
pub mod lattice;
pub mod plot;
pub mod runner;
pub mod sparse;
pub mod sqd;

pub use basis::Sector;
pub use eigensolver::{dense_eigmin, lanczos_ground, sector_ground, EigenResult, LanczosOptions};
pub use error::{Error, Result};
pub use groundstate::{effective_support, shannon_entropy, GroundState};
pub use hamiltonian::{build_heisenberg, build_hubbard, Configuration, Filling, Model, SparseHamiltonian};
pub use lattice::{build_chain, build_rect, Boundary, Lattice, LatticeSpec};
pub use sqd::{energy_fidelity, find_min_m, resolve_min_m, run_trace, InclusionStrategy, Schedule, StopRule, SubspaceTrace};
pub use runner::{replay, run_experiment, ExperimentConfig, Manifest};
