use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use sqd_core::eigensolver::DEFAULT_TOL;
use sqd_core::runner::{analyze_dir, write_atomic, DEFAULT_MAX_M, DEFAULT_QUBIT_LIMIT};
use sqd_core::sqd::find_min_m;
use sqd_core::{
    Boundary, Error, ExperimentConfig, Filling, GroundState, InclusionStrategy, LanczosOptions, LatticeSpec, Model,
    Schedule, SparseHamiltonian,
};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "sqd", version, about = "Configuration-subspace diagonalization of Heisenberg and Hubbard lattices")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the exact ground state and optionally dump it.
    Solve {
        #[command(flatten)]
        system: SystemArgs,
        /// Ground-state dump path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the full Hamiltonian as `row col value` triplets.
        #[arg(long)]
        export_operator: Option<PathBuf>,
    },
    /// Run a single subspace trace to a fidelity threshold.
    Trace {
        #[command(flatten)]
        system: SystemArgs,
        /// Start from a ground-state dump instead of solving.
        #[arg(long, conflicts_with = "lattice")]
        dump: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every instance of a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the configured sampled seeds with this one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        periodic: bool,
        #[arg(long)]
        allow_large: bool,
    },
    /// Recompute fits, tables and plots from an existing sweep directory.
    Analyze {
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun a trace from a stored ground state.
    Replay {
        #[arg(long)]
        dump: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Heisenberg,
    Hubbard,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Ordered,
    Sampled,
}

#[derive(Args)]
struct SystemArgs {
    /// Lattice spec: `chain:N` or `rect:HxW`, optionally `:periodic`.
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long, value_enum, default_value = "heisenberg")]
    model: ModelArg,
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 2.0)]
    u: f64,
    /// `ground`, `half` or `up,down`.
    #[arg(long, default_value = "ground")]
    filling: String,
    #[arg(long)]
    periodic: bool,
    #[arg(long)]
    allow_large: bool,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Lanczos start-vector seed.
    #[arg(long, default_value_t = 0)]
    solver_seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "ordered")]
    strategy: StrategyArg,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.99)]
    threshold: f64,
    /// Constant increment instead of the qubit-proportional schedule.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_M)]
    max_m: usize,
    /// Trace CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn strategy(&self) -> InclusionStrategy {
        match self.strategy {
            StrategyArg::Ordered => InclusionStrategy::Ordered,
            StrategyArg::Sampled => InclusionStrategy::Sampled { seed: self.seed },
        }
    }

    fn schedule(&self) -> Schedule {
        self.step.map_or_else(Schedule::default, |step| Schedule::Fixed { step })
    }
}

impl SystemArgs {
    fn opts(&self) -> LanczosOptions {
        LanczosOptions::default().with_tol(self.tol).with_seed(self.solver_seed)
    }

    fn hamiltonian(&self) -> sqd_core::Result<SparseHamiltonian> {
        let raw = self.lattice.as_deref().ok_or_else(|| Error::Config("--lattice is required".into()))?;
        let mut spec: LatticeSpec = raw.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        if self.periodic {
            spec = spec.with_boundary(Boundary::Periodic);
        }
        let model = match self.model {
            ModelArg::Heisenberg => Model::Heisenberg { j: self.j },
            ModelArg::Hubbard => {
                let filling: Filling = self.filling.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
                Model::Hubbard { t: self.t, u: self.u, filling }
            }
        };
        let n_qubits = model.qubits_for(spec.sites());
        if n_qubits > DEFAULT_QUBIT_LIMIT && !self.allow_large {
            return Err(Error::Config(format!("{n_qubits} qubits exceeds {DEFAULT_QUBIT_LIMIT}; pass --allow-large")));
        }
        SparseHamiltonian::build(model, &spec.build()?)
    }
}

fn load_dump(path: &Path) -> sqd_core::Result<GroundState> {
    let file = fs::File::open(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    GroundState::read_dump(io::BufReader::new(file))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> sqd_core::Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => io::stdout().write_all(bytes).map_err(|e| Error::Io { path: "<stdout>".into(), source: e }),
    }
}

fn summarize(gs: &GroundState) {
    eprintln!(
        "E0 = {:.12}  sector = {}  S = {:.6}  N_eff = {:.4}  support = {}",
        gs.energy(),
        gs.meta().sector,
        gs.entropy(),
        gs.effective_support(),
        gs.support().len()
    );
}

fn trace_and_emit(gs: &GroundState, h: &SparseHamiltonian, run: &RunArgs, opts: &LanczosOptions) -> sqd_core::Result<()> {
    let mm = find_min_m(gs, h, run.strategy(), run.threshold, &run.schedule(), run.max_m, opts)?;
    let mut csv = Vec::new();
    mm.trace.write_csv(gs.meta(), Some(run.threshold), &mut csv).expect("in-memory write");
    emit(run.out.as_deref(), &csv)?;
    eprintln!("threshold {}: m = {} k = {} F_E = {:.10}", run.threshold, mm.m, mm.k, mm.fidelity);
    Ok(())
}

fn run(cli: Cli) -> sqd_core::Result<u8> {
    match cli.command {
        Command::Solve { system, out, export_operator } => {
            let h = system.hamiltonian()?;
            if let Some(path) = export_operator {
                let file = fs::File::create(&path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
                h.write_triplets(BufWriter::new(file)).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
            }
            let gs = GroundState::solve(&h, &system.opts())?;
            summarize(&gs);
            if let Some(path) = out {
                let mut bytes = Vec::new();
                gs.write_dump(&mut bytes)?;
                write_atomic(&path, &bytes)?;
            }
            Ok(0)
        }
        Command::Trace { system, dump, run } => {
            let opts = system.opts();
            let (gs, h) = match dump {
                Some(path) => {
                    let gs = load_dump(&path)?;
                    let h = SparseHamiltonian::build(gs.meta().model, &gs.meta().lattice.build()?)?;
                    (gs, h)
                }
                None => {
                    let h = system.hamiltonian()?;
                    (GroundState::solve(&h, &opts)?, h)
                }
            };
            summarize(&gs);
            trace_and_emit(&gs, &h, &run, &opts)?;
            Ok(0)
        }
        Command::Sweep { config, out, seed, periodic, allow_large } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(seed) = seed {
                cfg.strategies.sampled_seeds = vec![seed];
            }
            cfg.periodic |= periodic;
            cfg.allow_large |= allow_large;
            if cli.threads.is_some() {
                cfg.threads = cli.threads;
            }
            let manifest = sqd_core::run_experiment(&cfg)?;
            let failed = manifest.failed();
            eprintln!(
                "{} instances, {} failed, {} files in {}",
                manifest.instances.len(),
                failed,
                manifest.files.len(),
                cfg.output_dir.display()
            );
            Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
        }
        Command::Analyze { out } => {
            let summary = analyze_dir(&out)?;
            for row in &summary.scaling {
                eprintln!(
                    "{}-{}d {} t={}: alpha = {:.4} r2 = {:.4}",
                    row.model, row.dim, row.strategy, row.threshold, row.fit.alpha, row.fit.r_squared
                );
            }
            for note in &summary.skipped {
                eprintln!("skipped {note}");
            }
            Ok(0)
        }
        Command::Replay { dump, run } => {
            let gs = load_dump(&dump)?;
            let h = SparseHamiltonian::build(gs.meta().model, &gs.meta().lattice.build()?)?;
            let opts = LanczosOptions::default().with_tol(gs.meta().tol).with_seed(gs.meta().seed);
            trace_and_emit(&gs, &h, &run, &opts)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("cannot size thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidLattice(_) | Error::Capacity { .. } => EXIT_CONFIG,
                _ => EXIT_PARTIAL,
            })
        }
    }
}
