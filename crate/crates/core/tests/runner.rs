//! End-to-end sweeps: artifact layout, failure isolation, determinism and replay.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use sqd_core::runner::{analyze_dir, MANIFEST};
use sqd_core::{replay, run_experiment, Error, ExperimentConfig, InclusionStrategy, LanczosOptions, Manifest, Schedule};

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(text).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn files_under(dir: &Path, sub: &str) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir.join(sub))
        .map(|it| it.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

const SMALLEST: &str = r#"
lattices = ["chain:6"]
thresholds = [0.99]

[model]
kind = "heisenberg"
"#;

#[test]
fn smallest_sweep_writes_one_of_each() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = run_experiment(&config(SMALLEST, tmp.path())).unwrap();
    assert_eq!(manifest.failed(), 0);
    assert_eq!(files_under(tmp.path(), "ground").len(), 1);
    assert_eq!(files_under(tmp.path(), "traces"), vec!["heisenberg_chain-6_ordered_t0.99.csv"]);
    let minm = fs::read_to_string(tmp.path().join("minm.csv")).unwrap();
    let rows: Vec<&str> = minm.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("heisenberg,chain:6,1,6,ordered,,0.99,16,"), "{}", rows[0]);

    let on_disk: Manifest = serde_json::from_slice(&fs::read(tmp.path().join(MANIFEST)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    for f in &manifest.files {
        let bytes = fs::read(tmp.path().join(&f.path)).unwrap();
        assert_eq!(sha256(&bytes), f.sha256, "{}", f.path);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
}

#[test]
fn failing_instance_is_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"
lattices = ["chain:4", "chain:1", "rect:2x2"]
thresholds = [0.9, 0.99]
[model]
kind = "heisenberg"
"#,
        tmp.path(),
    );
    let manifest = run_experiment(&cfg).unwrap();
    let status: Vec<(&str, &str)> = manifest.instances.iter().map(|i| (i.lattice.as_str(), i.status.as_str())).collect();
    assert_eq!(status, vec![("chain:4", "ok"), ("chain:1", "failed"), ("rect:2x2", "ok")]);
    assert!(manifest.instances[1].error.as_deref().unwrap().contains("at least 2 sites"));
    let instances = fs::read_to_string(tmp.path().join("instances.csv")).unwrap();
    assert!(instances.lines().any(|l| l.starts_with("heisenberg,chain:1,") && l.ends_with(",failed")));
    assert_eq!(files_under(tmp.path(), "traces").len(), 4);
}

const SAMPLED: &str = r#"
lattices = ["chain:6", "chain:8", "rect:2x3"]
thresholds = [0.9, 0.99]

[model]
kind = "heisenberg"

[strategies]
ordered = true
sampled_seeds = [1, 2]
"#;

#[test]
fn repeated_sweeps_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&config(SAMPLED, a.path())).unwrap();
    let mut cfg = config(SAMPLED, b.path());
    cfg.threads = Some(1);
    let mb = run_experiment(&cfg).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(fs::read(a.path().join(MANIFEST)).unwrap(), fs::read(b.path().join(MANIFEST)).unwrap());
}

#[test]
fn seed_change_touches_only_sampled_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&config(SAMPLED, a.path())).unwrap();
    let mut cfg = config(SAMPLED, b.path());
    cfg.strategies.sampled_seeds = vec![1, 3];
    let mb = run_experiment(&cfg).unwrap();
    assert_ne!(ma.config_sha256, mb.config_sha256);
    for f in &ma.files {
        if f.path.starts_with("ground/") || (f.path.starts_with("traces/") && f.path.contains("_ordered_")) || f.path.contains("_s1") {
            assert_eq!(mb.file(&f.path), Some(f), "{}", f.path);
        }
    }
    let changed = |p: &str| ma.file(p).map(|f| &f.sha256) != mb.file(p).map(|f| &f.sha256);
    assert!(changed("traces/heisenberg_chain-8_sampled-s2_t0.99.csv"));
    assert!(mb.file("traces/heisenberg_chain-8_sampled-s3_t0.99.csv").is_some());
}

#[test]
fn replay_reproduces_archived_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = run_experiment(&config(SAMPLED, tmp.path())).unwrap();
    let dump = tmp.path().join("ground").join(
        files_under(tmp.path(), "ground").into_iter().find(|n| n.starts_with("heisenberg_chain-8-")).unwrap(),
    );
    for (strategy, tag) in [(InclusionStrategy::Ordered, "ordered"), (InclusionStrategy::Sampled { seed: 2 }, "sampled-s2")] {
        let (gs, trace) = replay(&dump, strategy, 0.99, &Schedule::default(), 2_000_000, &LanczosOptions::default()).unwrap();
        let mut csv = Vec::new();
        trace.write_csv(gs.meta(), Some(0.99), &mut csv).unwrap();
        let archived = manifest.file(&format!("traces/heisenberg_chain-8_{tag}_t0.99.csv")).unwrap();
        assert_eq!(sha256(&csv), archived.sha256, "{tag}");
    }
}

#[test]
fn truncated_dump_is_a_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(SMALLEST, tmp.path())).unwrap();
    let name = files_under(tmp.path(), "ground").pop().unwrap();
    let dump = tmp.path().join("ground").join(name);
    let bytes = fs::read(&dump).unwrap();
    let cut = tmp.path().join("cut.dump");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let err = replay(&cut, InclusionStrategy::Ordered, 0.99, &Schedule::default(), 1000, &LanczosOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err}");
}

#[test]
fn analysis_reruns_from_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(SAMPLED, tmp.path());
    cfg.lattices = vec!["chain:4".into(), "chain:6".into(), "chain:8".into()];
    let manifest = run_experiment(&cfg).unwrap();
    let summary = analyze_dir(tmp.path()).unwrap();
    let ordered: Vec<_> = summary.scaling.iter().filter(|r| r.strategy == "ordered").collect();
    assert_eq!(ordered.len(), 2);
    assert!(ordered.iter().all(|r| r.fit.alpha > 0.0 && r.fit.points.len() == 3));
    for name in ["scaling.csv", "kneff.csv", "scaling.svg", "kneff.svg", "mass_fidelity.svg", "sampling_efficiency.svg"] {
        let bytes = fs::read(tmp.path().join(name)).unwrap();
        assert_eq!(Some(sha256(&bytes).as_str()), manifest.file(name).map(|f| f.sha256.as_str()), "{name}");
    }
}
