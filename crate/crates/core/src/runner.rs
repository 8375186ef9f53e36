//! Experiment orchestration: declarative sweep configs, per-instance
//! pipelines, artifact files and a hashed manifest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    compare_k_to_neff, fit_exponential, write_kneff_csv, write_scaling_csv, KNeffRow, ScalingFit, ScalingRow,
};
use crate::eigensolver::{LanczosOptions, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::hamiltonian::{Filling, Model, SparseHamiltonian};
use crate::lattice::{Boundary, LatticeSpec};
use crate::plot::{Plot, Style};
use crate::sqd::{
    fmt_f64, next_increment, resolve_min_m, run_trace, sampling_efficiency_trace, InclusionStrategy, MinM, Schedule,
    StopRule, SubspaceTrace,
};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.90, 0.95, 0.99];
/// Largest instance accepted without `allow_large`.
pub const DEFAULT_QUBIT_LIMIT: usize = 20;
pub const DEFAULT_MAX_M: usize = 2_000_000;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Heisenberg,
    Hubbard,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "two")]
    pub u: f64,
    /// `ground`, `half` or `up,down`.
    #[serde(default)]
    pub filling: Option<String>,
}

impl ModelConfig {
    pub fn model(&self) -> Result<Model> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{name} must be finite, got {v}")))
            }
        };
        match self.kind {
            ModelKind::Heisenberg => Ok(Model::Heisenberg { j: finite("J", self.j)? }),
            ModelKind::Hubbard => {
                let filling = match &self.filling {
                    None => Filling::Ground,
                    Some(s) => s.parse::<Filling>().map_err(|e| Error::Config(e.to_string()))?,
                };
                Ok(Model::Hubbard { t: finite("t", self.t)?, u: finite("U", self.u)?, filling })
            }
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    #[serde(default = "yes")]
    pub ordered: bool,
    #[serde(default)]
    pub sampled_seeds: Vec<u64>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig { ordered: true, sampled_seeds: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_factor")]
    pub factor: usize,
    #[serde(default = "default_cutoff")]
    pub large_cutoff: usize,
    #[serde(default = "default_large_increment")]
    pub large_increment: usize,
    /// Overrides the proportional schedule with a constant increment.
    #[serde(default)]
    pub step: Option<usize>,
}

fn default_factor() -> usize {
    1
}

fn default_cutoff() -> usize {
    16
}

fn default_large_increment() -> usize {
    1000
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { factor: 1, large_cutoff: 16, large_increment: 1000, step: None }
    }
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Schedule {
        match self.step {
            Some(step) => Schedule::Fixed { step },
            None => Schedule::Proportional {
                factor: self.factor,
                large_cutoff: self.large_cutoff,
                large_increment: self.large_increment,
            },
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Cap on inclusions or draws per trace.
    #[serde(default)]
    pub max_m: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: DEFAULT_TOL, max_iter: None, seed: 0, max_m: None }
    }
}

fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("sqd-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Lattice specs such as `chain:6` or `rect:2x3:periodic`.
    pub lattices: Vec<String>,
    /// Makes every lattice without an explicit boundary periodic.
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub strategies: StrategyConfig,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub allow_large: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// A validated instance: lattice plus derived qubit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub lattice: LatticeSpec,
    pub n_qubits: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn strategies(&self) -> Vec<InclusionStrategy> {
        let mut out = Vec::new();
        if self.strategies.ordered {
            out.push(InclusionStrategy::Ordered);
        }
        out.extend(self.strategies.sampled_seeds.iter().map(|&seed| InclusionStrategy::Sampled { seed }));
        out
    }

    pub fn lanczos(&self) -> LanczosOptions {
        LanczosOptions { tol: self.solver.tol, max_iter: self.solver.max_iter, seed: self.solver.seed, ..Default::default() }
    }

    pub fn max_m(&self) -> usize {
        self.solver.max_m.unwrap_or(DEFAULT_MAX_M)
    }

    /// Checks everything that can be checked without solving and returns
    /// the instances in config order.
    pub fn validate(&self) -> Result<Vec<Instance>> {
        let model = self.model.model()?;
        if self.lattices.is_empty() {
            return Err(Error::Config("no lattices listed".into()));
        }
        if self.strategies().is_empty() {
            return Err(Error::Config("no strategies enabled".into()));
        }
        if self.thresholds.is_empty() {
            return Err(Error::Config("no thresholds listed".into()));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Config(format!("threshold {t} outside (0, 1]")));
        }
        let seeds: BTreeSet<u64> = self.strategies.sampled_seeds.iter().copied().collect();
        if seeds.len() != self.strategies.sampled_seeds.len() {
            return Err(Error::Config("sampled seeds must be distinct".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::Config(format!("solver tol must be positive, got {}", self.solver.tol)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        let mut instances = Vec::new();
        for raw in &self.lattices {
            let mut spec: LatticeSpec = raw.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
            if self.periodic && raw.trim().matches(':').count() == 1 {
                spec = spec.with_boundary(Boundary::Periodic);
            }
            if !seen.insert(spec.to_string()) {
                return Err(Error::Config(format!("lattice {spec} listed twice")));
            }
            let n_qubits = model.qubits_for(spec.sites());
            if n_qubits > DEFAULT_QUBIT_LIMIT && !self.allow_large {
                return Err(Error::Config(format!(
                    "{spec} needs {n_qubits} qubits, above {DEFAULT_QUBIT_LIMIT}; set allow_large to run it"
                )));
            }
            instances.push(Instance { lattice: spec, n_qubits });
        }
        Ok(instances)
    }
}

/// File-system friendly instance name, e.g. `heisenberg_chain-6`.
pub fn instance_id(model: &Model, lattice: &LatticeSpec) -> String {
    format!("{}_{}", model.tag(), lattice.to_string().replace(':', "-"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cache key over everything that determines the ground state.
pub fn ground_state_key(model: &Model, lattice: &LatticeSpec, opts: &LanczosOptions) -> String {
    let text = format!("{model}|{lattice}|tol={:e}|seed={}|max_iter={:?}", opts.tol, opts.seed, opts.max_iter);
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// Writes to a sibling temp file and renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

/// Loads the cached dump when it matches, otherwise solves and stores it.
pub fn cached_ground_state(h: &SparseHamiltonian, opts: &LanczosOptions, dir: &Path) -> Result<(GroundState, PathBuf)> {
    let model = h.model();
    let lattice = h.lattice();
    let path = dir.join(format!("{}-{}.dump", instance_id(&model, &lattice), ground_state_key(&model, &lattice, opts)));
    if let Ok(file) = fs::File::open(&path) {
        match GroundState::read_dump(BufReader::new(file)) {
            Ok(gs) if gs.meta().model == model && gs.meta().lattice == lattice && gs.meta().tol == opts.tol => {
                info!("reusing cached ground state {}", path.display());
                return Ok((gs, path));
            }
            Ok(_) => warn!("cached dump {} does not match; recomputing", path.display()),
            Err(e) => warn!("ignoring unreadable dump {}: {e}", path.display()),
        }
    }
    let gs = GroundState::solve(h, opts)?;
    let mut bytes = Vec::new();
    gs.write_dump(&mut bytes)?;
    write_atomic(&path, &bytes)?;
    Ok((gs, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinRecord {
    pub strategy: InclusionStrategy,
    pub threshold: f64,
    pub m: usize,
    pub schedule_m: usize,
    pub k: usize,
    pub exact_k: Option<usize>,
    pub fidelity: f64,
}

impl MinRecord {
    fn from_min(strategy: InclusionStrategy, threshold: f64, mm: &MinM) -> Self {
        MinRecord {
            strategy,
            threshold,
            m: mm.m,
            schedule_m: mm.schedule_m,
            k: mm.k,
            exact_k: mm.exact_k,
            fidelity: mm.fidelity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub energy: f64,
    pub entropy: f64,
    pub neff: f64,
    pub sector: String,
    pub records: Vec<MinRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub id: String,
    pub lattice: String,
    pub dim: usize,
    pub n_qubits: usize,
    pub result: std::result::Result<InstanceResult, String>,
}

fn threshold_tag(t: f64) -> String {
    format!("t{t}")
}

fn strategy_tag(s: InclusionStrategy) -> String {
    match s {
        InclusionStrategy::Ordered => "ordered".into(),
        InclusionStrategy::Sampled { seed } => format!("sampled-s{seed}"),
    }
}

/// Expected unique count after `m` i.i.d. draws: `sum_i 1 - (1 - p_i)^m`.
pub fn expected_unique(p: &[f64], m: usize) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -f64::exp_m1(m as f64 * f64::ln_1p(-x))).sum()
}

fn run_instance(cfg: &ExperimentConfig, model: Model, inst: &Instance, out: &Path) -> Result<InstanceResult> {
    let lattice = inst.lattice.build()?;
    let h = SparseHamiltonian::build(model, &lattice)?;
    let opts = cfg.lanczos();
    let (gs, _) = cached_ground_state(&h, &opts, &out.join("ground"))?;
    let id = instance_id(&model, &inst.lattice);
    let schedule = cfg.schedule.schedule();
    let top = cfg.thresholds.iter().copied().fold(0.0, f64::max);
    let mut records = Vec::new();
    for strategy in cfg.strategies() {
        let trace = run_trace(&gs, &h, strategy, &schedule, StopRule::fidelity(top, cfg.max_m()), &opts)?;
        for &threshold in &cfg.thresholds {
            let mm = resolve_min_m(&gs, &h, &trace, threshold, &opts)?;
            let csv = render(|w| mm.trace.write_csv(gs.meta(), Some(threshold), w));
            let name = format!("{id}_{}_{}.csv", strategy_tag(strategy), threshold_tag(threshold));
            write_atomic(&out.join("traces").join(name), &csv)?;
            records.push(MinRecord::from_min(strategy, threshold, &mm));
        }
        if let InclusionStrategy::Sampled { seed } = strategy {
            let last_m = trace.steps.last().map_or(0, |s| s.m);
            let every = next_increment(gs.n_qubits(), &schedule);
            let curve = sampling_efficiency_trace(&gs, seed, last_m, every);
            let csv = render(|w| {
                use std::io::Write;
                writeln!(w, "m,k,expected_k")?;
                for (m, k) in &curve {
                    writeln!(w, "{m},{k},{}", fmt_f64(expected_unique(gs.probabilities(), *m)))?;
                }
                Ok(())
            });
            write_atomic(&out.join("efficiency").join(format!("{id}_s{seed}.csv")), &csv)?;
        }
    }
    Ok(InstanceResult {
        energy: gs.energy(),
        entropy: gs.entropy(),
        neff: gs.effective_support(),
        sector: gs.meta().sector.to_string(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestInstance {
    pub id: String,
    pub lattice: String,
    pub n_qubits: usize,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub instances: Vec<ManifestInstance>,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.instances.iter().filter(|i| i.status != "ok").count()
    }

    pub fn file(&self, path: &str) -> Option<&ManifestFile> {
        self.files.iter().find(|f| f.path == path)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<ManifestFile>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.collect::<std::io::Result<_>>().map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || (dir == root && name == MANIFEST) {
            continue;
        }
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let rel = path.strip_prefix(root).expect("under root").components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            out.push(ManifestFile { path: rel, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
    }
    Ok(())
}

/// Hash of the config with run-location settings (output dir, threads)
/// cleared, so identical experiments hash alike wherever they run.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut canon = cfg.clone();
    canon.output_dir = PathBuf::new();
    canon.threads = None;
    sha256_hex(canon.to_toml_string().as_bytes())
}

/// Runs every instance of the config, writes all artifacts under
/// `output_dir`, and returns the manifest (also written as `manifest.json`).
///
/// A failing instance is recorded as failed; the rest of the sweep proceeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    let instances = cfg.validate()?;
    let model = cfg.model.model()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let work = || -> Vec<InstanceOutcome> {
        instances
            .par_iter()
            .map(|inst| {
                let id = instance_id(&model, &inst.lattice);
                info!("instance {id}: {} qubits", inst.n_qubits);
                let result = run_instance(cfg, model, inst, &out).map_err(|e| {
                    warn!("instance {id} failed: {e}");
                    e.to_string()
                });
                InstanceOutcome {
                    id,
                    lattice: inst.lattice.to_string(),
                    dim: inst.lattice.dimensionality(),
                    n_qubits: inst.n_qubits,
                    result,
                }
            })
            .collect()
    };
    let outcomes = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    write_atomic(&out.join("instances.csv"), &render(|w| write_instances_csv(&model, &outcomes, w)))?;
    write_atomic(&out.join("minm.csv"), &render(|w| write_minm_csv(&model, &outcomes, w)))?;
    if let Err(e) = analyze_dir(&out) {
        warn!("analysis skipped: {e}");
    }

    let mut files = Vec::new();
    collect_files(&out, &out, &mut files)?;
    let manifest = Manifest {
        config_sha256: config_hash(cfg),
        instances: outcomes
            .iter()
            .map(|o| ManifestInstance {
                id: o.id.clone(),
                lattice: o.lattice.clone(),
                n_qubits: o.n_qubits,
                status: if o.result.is_ok() { "ok".into() } else { "failed".into() },
                error: o.result.as_ref().err().cloned(),
            })
            .collect(),
        files,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out.join(MANIFEST), &json)?;
    Ok(manifest)
}

pub const INSTANCES_CSV_HEADER: &str = "model,lattice,dim,n_qubits,sector,E0,entropy,neff,status";
pub const MINM_CSV_HEADER: &str = "model,lattice,dim,n_qubits,strategy,seed,threshold,m,schedule_m,k,exact_k,F_E";

fn write_instances_csv(model: &Model, outcomes: &[InstanceOutcome], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "{INSTANCES_CSV_HEADER}")?;
    for o in outcomes {
        match &o.result {
            Ok(r) => writeln!(
                w,
                "{},{},{},{},{},{},{},{},ok",
                model.tag(),
                o.lattice,
                o.dim,
                o.n_qubits,
                r.sector.replace(',', "/"),
                fmt_f64(r.energy),
                fmt_f64(r.entropy),
                fmt_f64(r.neff)
            )?,
            Err(_) => writeln!(w, "{},{},{},{},,,,,failed", model.tag(), o.lattice, o.dim, o.n_qubits)?,
        }
    }
    Ok(())
}

fn write_minm_csv(model: &Model, outcomes: &[InstanceOutcome], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "{MINM_CSV_HEADER}")?;
    for o in outcomes {
        let Ok(r) = &o.result else { continue };
        for rec in &r.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                model.tag(),
                o.lattice,
                o.dim,
                o.n_qubits,
                rec.strategy.label(),
                rec.strategy.seed().map(|s| s.to_string()).unwrap_or_default(),
                rec.threshold,
                rec.m,
                rec.schedule_m,
                rec.k,
                rec.exact_k.map(|k| k.to_string()).unwrap_or_default(),
                fmt_f64(rec.fidelity)
            )?;
        }
    }
    Ok(())
}

/// Header-keyed rows of a simple comma-separated file.
fn read_table(path: &Path) -> Result<Vec<HashMap<String, String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::Format(format!("{} row {}: {} cells, expected {}", path.display(), i + 2, cells.len(), header.len())));
            }
            Ok(header.iter().cloned().zip(cells.into_iter().map(str::to_string)).collect())
        })
        .collect()
}

fn cell<T: std::str::FromStr>(row: &HashMap<String, String>, key: &str) -> Result<T> {
    let raw = row.get(key).ok_or_else(|| Error::Format(format!("missing column {key}")))?;
    raw.parse().map_err(|_| Error::Format(format!("bad value {raw:?} in column {key}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub scaling: Vec<ScalingRow>,
    pub kneff: Vec<(String, KNeffRow)>,
    /// Groups with too few sizes or invalid data, with the reason.
    pub skipped: Vec<String>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

type SeriesKey = (String, usize, String, String);

/// Recomputes fits, `k` versus `N_eff`, and plots from the CSVs of a sweep
/// directory. Ordered uses the exact minimal `k`; sampled seeds are reduced
/// to their median `m`.
pub fn analyze_dir(dir: &Path) -> Result<AnalysisSummary> {
    let minm = read_table(&dir.join("minm.csv"))?;
    let instances = read_table(&dir.join("instances.csv"))?;

    let mut series: BTreeMap<SeriesKey, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for row in &minm {
        let model: String = cell(row, "model")?;
        let dim: usize = cell(row, "dim")?;
        let threshold: String = cell(row, "threshold")?;
        let strategy: String = cell(row, "strategy")?;
        let l: usize = cell(row, "n_qubits")?;
        let m: f64 = if strategy == "ordered" { cell(row, "exact_k")? } else { cell(row, "m")? };
        series.entry((model, dim, threshold, strategy)).or_default().entry(l).or_default().push(m);
    }

    let mut scaling = Vec::new();
    let mut skipped = Vec::new();
    let mut fits: BTreeMap<SeriesKey, (Vec<(usize, f64)>, Option<ScalingFit>)> = BTreeMap::new();
    for (key, by_l) in &series {
        let pts: Vec<(usize, f64)> = by_l.iter().map(|(&l, ms)| (l, median(&mut ms.clone()))).collect();
        let fit = match fit_exponential(&pts) {
            Ok(fit) => {
                scaling.push(ScalingRow {
                    model: key.0.clone(),
                    dim: key.1,
                    threshold: key.2.parse().unwrap_or(f64::NAN),
                    strategy: key.3.clone(),
                    fit: fit.clone(),
                });
                Some(fit)
            }
            Err(e) => {
                skipped.push(format!("{}-{}d {} t={}: {e}", key.0, key.1, key.3, key.2));
                None
            }
        };
        fits.insert(key.clone(), (pts, fit));
    }
    write_atomic(&dir.join("scaling.csv"), &render(|w| write_scaling_csv(&scaling, w)))?;

    // k versus N_eff at the highest threshold, ordered strategy
    let mut neff: BTreeMap<(String, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for row in instances.iter().filter(|r| r.get("status").map(String::as_str) == Some("ok")) {
        let key = (cell::<String>(row, "model")?, cell::<usize>(row, "dim")?);
        neff.entry(key).or_default().push((cell(row, "n_qubits")?, cell(row, "neff")?));
    }
    let top = series
        .keys()
        .filter(|k| k.3 == "ordered")
        .filter_map(|k| k.2.parse::<f64>().ok())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut kneff = Vec::new();
    for ((model, dim), ns) in &neff {
        let key = (model.clone(), *dim, top.to_string(), "ordered".to_string());
        let Some((pts, _)) = fits.get(&key) else { continue };
        let grid: BTreeSet<usize> = pts.iter().map(|p| p.0).collect();
        let ns: Vec<(usize, f64)> = ns.iter().copied().filter(|p| grid.contains(&p.0)).collect();
        match compare_k_to_neff(pts, &ns) {
            Ok(report) => kneff.extend(report.rows.into_iter().map(|r| (format!("{model}-{dim}d"), r))),
            Err(e) => skipped.push(format!("{model}-{dim}d k/N_eff: {e}")),
        }
    }
    write_atomic(&dir.join("kneff.csv"), &render(|w| write_kneff_csv(&kneff, w)))?;

    let mut plot = Plot::new("Minimal subspace size", "qubits L", "m", true);
    for (i, (key, (pts, fit))) in fits.iter().enumerate() {
        let label = format!("{}-{}d {} {}", key.0, key.1, key.3, key.2);
        plot.push(label, pts.iter().map(|&(l, m)| (l as f64, m)).collect(), Style::LineMarkers, i);
        if let Some(fit) = fit {
            let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
            plot.push(format!("fit a={:.3}", fit.alpha), vec![(lo as f64, fit.predict(lo)), (hi as f64, fit.predict(hi))], Style::Dashed, i);
        }
    }
    write_atomic(&dir.join("scaling.svg"), plot.to_svg().as_bytes())?;

    let mut plot = Plot::new("Subspace size versus effective support", "qubits L", "count", true);
    let mut by_model: BTreeMap<&str, Vec<&KNeffRow>> = BTreeMap::new();
    for (model, row) in &kneff {
        by_model.entry(model).or_default().push(row);
    }
    for (i, (model, rows)) in by_model.iter().enumerate() {
        plot.push(format!("{model} k"), rows.iter().map(|r| (r.l as f64, r.k)).collect(), Style::LineMarkers, i);
        plot.push(format!("{model} N_eff"), rows.iter().map(|r| (r.l as f64, r.neff)).collect(), Style::Dashed, i);
    }
    write_atomic(&dir.join("kneff.svg"), plot.to_svg().as_bytes())?;

    let traces = dir.join("traces");
    let suffix = format!("_ordered_{}.csv", threshold_tag(top));
    let mut plot = Plot::new("Energy fidelity versus captured mass", "cumulative probability mass", "F_E", false);
    for (i, path) in sorted_files(&traces)?.iter().filter(|p| p.to_string_lossy().ends_with(&suffix)).enumerate() {
        let rows = read_table(path)?;
        let mut curve = Vec::with_capacity(rows.len());
        for r in &rows {
            curve.push((cell::<f64>(r, "cumulative_mass")?, cell::<f64>(r, "F_E")?));
        }
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        let name = path.file_name().unwrap_or_default().to_string_lossy().trim_end_matches(&suffix).to_string();
        plot.push(name, curve, Style::LineMarkers, i);
    }
    write_atomic(&dir.join("mass_fidelity.svg"), plot.to_svg().as_bytes())?;

    let mut plot = Plot::new("Unique configurations versus draws", "draws m", "unique k", true);
    for (i, path) in sorted_files(&dir.join("efficiency"))?.iter().enumerate() {
        let rows = read_table(path)?;
        let mut seen = Vec::new();
        let mut expected = Vec::new();
        for r in &rows {
            let m: f64 = cell(r, "m")?;
            seen.push((m, cell::<f64>(r, "k")?));
            expected.push((m, cell::<f64>(r, "expected_k")?));
        }
        let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        plot.push(name.clone(), seen, Style::Markers, i);
        plot.push(format!("{name} expected"), expected, Style::Dashed, i);
    }
    write_atomic(&dir.join("sampling_efficiency.svg"), plot.to_svg().as_bytes())?;

    Ok(AnalysisSummary { scaling, kneff, skipped })
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    out.sort();
    Ok(out)
}

/// Reruns a trace from a stored ground state. Only projected solves are
/// performed; the full Hamiltonian is rebuilt but never diagonalized.
pub fn replay(
    dump: &Path,
    strategy: InclusionStrategy,
    threshold: f64,
    schedule: &Schedule,
    max_m: usize,
    opts: &LanczosOptions,
) -> Result<(GroundState, SubspaceTrace)> {
    let file = fs::File::open(dump).map_err(|e| Error::io(dump, e))?;
    let gs = GroundState::read_dump(BufReader::new(file))?;
    let lattice = gs.meta().lattice.build()?;
    let h = SparseHamiltonian::build(gs.meta().model, &lattice)?;
    let mm = crate::sqd::find_min_m(&gs, &h, strategy, threshold, schedule, max_m, opts)?;
    Ok((gs, mm.trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
lattices = ["chain:6"]
thresholds = [0.99]

[model]
kind = "heisenberg"
"#;

    #[test]
    fn parses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
        assert_eq!(cfg.model.model().unwrap(), Model::heisenberg());
        assert_eq!(cfg.strategies(), vec![InclusionStrategy::Ordered]);
        assert_eq!(cfg.schedule.schedule(), Schedule::default());
        assert_eq!(cfg.validate().unwrap()[0].n_qubits, 6);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn hubbard_model_config() {
        let cfg = ExperimentConfig::from_toml_str(
            "lattices = [\"rect:2x2\"]\n[model]\nkind = \"hubbard\"\nfilling = \"half\"\n",
        )
        .unwrap();
        assert_eq!(cfg.model.model().unwrap(), Model::Hubbard { t: 1.0, u: 2.0, filling: Filling::Half });
        assert_eq!(cfg.validate().unwrap()[0].n_qubits, 8);
    }

    #[test]
    fn rejects_bad_configs() {
        let with = |extra: &str| ExperimentConfig::from_toml_str(&format!("{extra}\n{SMALL}"));
        assert!(matches!(with("allow_large = false\nbogus = 1"), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
        cfg.thresholds = vec![1.5];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.thresholds = vec![0.9];
        cfg.strategies.sampled_seeds = vec![3, 3];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.strategies.sampled_seeds = vec![];
        cfg.lattices = vec!["chain:22".into()];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.allow_large = true;
        assert!(cfg.validate().is_ok());
        cfg.lattices = vec!["ring:5".into()];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn periodic_flag_respects_explicit_boundary() {
        let mut cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
        cfg.periodic = true;
        cfg.lattices = vec!["chain:6".into(), "rect:2x3:open".into()];
        let inst = cfg.validate().unwrap();
        assert_eq!(inst[0].lattice.boundary, Boundary::Periodic);
        assert_eq!(inst[1].lattice.boundary, Boundary::Open);
    }

    #[test]
    fn expected_unique_limits() {
        let p = [0.5, 0.25, 0.25];
        assert_eq!(expected_unique(&p, 0), 0.0);
        assert!((expected_unique(&p, 1) - 1.0).abs() < 1e-15);
        assert!((expected_unique(&p, 2) - (0.75 + 2.0 * 0.4375)).abs() < 1e-15);
        assert!((expected_unique(&p, 200) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ids_and_keys() {
        let spec: LatticeSpec = "rect:2x3:periodic".parse().unwrap();
        assert_eq!(instance_id(&Model::hubbard(), &spec), "hubbard_rect-2x3-periodic");
        let a = ground_state_key(&Model::heisenberg(), &spec, &LanczosOptions::default());
        let b = ground_state_key(&Model::heisenberg(), &spec, &LanczosOptions::default().with_tol(1e-9));
        assert_eq!(a.len(), 16);
        assert_ne!(a, b);
    }
}
