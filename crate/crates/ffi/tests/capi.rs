use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sqd_ffi::*;

fn last_error() -> String {
    let p = sqd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn heisenberg_dimer_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(sqd_hamiltonian_heisenberg(1, 2, false, 1.0, &mut h), SqdStatus::Ok);
        let mut n = 0u32;
        let mut dim = 0u64;
        assert_eq!(sqd_hamiltonian_n_qubits(h, &mut n), SqdStatus::Ok);
        assert_eq!(sqd_hamiltonian_dim(h, &mut dim), SqdStatus::Ok);
        assert_eq!((n, dim), (2, 4));

        // H |01> = -1/4 |01> + 1/2 |10>
        let x = [0.0, 1.0, 0.0, 0.0];
        let mut y = [0.0; 4];
        assert_eq!(sqd_hamiltonian_apply(h, x.as_ptr(), y.as_mut_ptr(), 4), SqdStatus::Ok);
        assert_eq!(y, [0.0, -0.25, 0.5, 0.0]);

        let mut gs = ptr::null_mut();
        assert_eq!(sqd_ground_state_solve(h, 0.0, 7, &mut gs), SqdStatus::Ok);
        let (mut e, mut s, mut neff) = (0.0, 0.0, 0.0);
        assert_eq!(sqd_ground_state_energy(gs, &mut e), SqdStatus::Ok);
        assert_eq!(sqd_ground_state_entropy(gs, &mut s), SqdStatus::Ok);
        assert_eq!(sqd_ground_state_neff(gs, &mut neff), SqdStatus::Ok);
        assert!((e + 0.75).abs() < 1e-12);
        assert!((s - 2f64.ln()).abs() < 1e-10);
        assert!((neff - 2.0).abs() < 1e-10);

        let mut p = [0.0; 4];
        assert_eq!(sqd_ground_state_probabilities(gs, p.as_mut_ptr(), 4), SqdStatus::Ok);
        assert!((p[1] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
        assert_eq!(sqd_ground_state_probabilities(gs, p.as_mut_ptr(), 3), SqdStatus::Shape);

        let mut r = SqdMinResult::default();
        assert_eq!(sqd_find_min_k(gs, h, SqdStrategy::Ordered, 0, 0.99, 1000, &mut r), SqdStatus::Ok);
        assert_eq!(r.m, 2);
        assert!((r.fidelity - 1.0).abs() < 1e-12);

        sqd_ground_state_free(gs);
        sqd_hamiltonian_free(h);
    }
}

#[test]
fn hubbard_dimer_energy() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(sqd_hamiltonian_hubbard(1, 2, false, 1.0, 2.0, 1, 1, &mut h), SqdStatus::Ok);
        let mut gs = ptr::null_mut();
        assert_eq!(sqd_ground_state_solve(h, 1e-12, 0, &mut gs), SqdStatus::Ok);
        let mut e = 0.0;
        sqd_ground_state_energy(gs, &mut e);
        assert!((e - (1.0 - 5f64.sqrt())).abs() < 1e-10);
        sqd_ground_state_free(gs);
        sqd_hamiltonian_free(h);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(sqd_hamiltonian_heisenberg(1, 1, false, 1.0, &mut h), SqdStatus::InvalidLattice);
        assert!(h.is_null());
        assert!(last_error().contains("at least 2 sites"));
        assert_eq!(sqd_hamiltonian_hubbard(1, 4, false, 1.0, 2.0, 1, -1, &mut h), SqdStatus::InvalidArgument);
        assert_eq!(sqd_hamiltonian_heisenberg(1, 4, false, 1.0, ptr::null_mut()), SqdStatus::NullPointer);
        let mut dim = 0;
        assert_eq!(sqd_hamiltonian_dim(ptr::null(), &mut dim), SqdStatus::NullPointer);

        let mut f = 0.0;
        assert_eq!(sqd_energy_fidelity(1.0, 0.0, &mut f), SqdStatus::UndefinedFidelity);
        assert_eq!(sqd_energy_fidelity(-9.0, -10.0, &mut f), SqdStatus::Ok);
        assert!((f - 0.9).abs() < 1e-15);
        assert!(sqd_last_error_message().is_null());

        sqd_hamiltonian_heisenberg(1, 4, false, 1.0, &mut h);
        let x = [0.0; 3];
        let mut y = [0.0; 3];
        assert_eq!(sqd_hamiltonian_apply(h, x.as_ptr(), y.as_mut_ptr(), 3), SqdStatus::Shape);
        sqd_hamiltonian_free(h);
        sqd_hamiltonian_free(ptr::null_mut());
        sqd_ground_state_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sqd.h")).unwrap();
    for name in [
        "typedef struct SqdHamiltonian SqdHamiltonian;",
        "SQD_STATUS_OK = 0",
        "sqd_hamiltonian_heisenberg(",
        "sqd_hamiltonian_hubbard(",
        "sqd_hamiltonian_apply(",
        "sqd_ground_state_solve(",
        "sqd_ground_state_probabilities(",
        "sqd_find_min_k(",
        "sqd_energy_fidelity(",
        "sqd_last_error_message(",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "sqd.h"

int main(void) {
    SqdHamiltonian *h = NULL;
    SqdGroundState *gs = NULL;
    double e = 0.0;
    SqdMinResult r;
    if (sqd_hamiltonian_heisenberg(1, 6, false, 1.0, &h) != SQD_STATUS_OK) return 2;
    if (sqd_ground_state_solve(h, 0.0, 0, &gs) != SQD_STATUS_OK) return 3;
    sqd_ground_state_energy(gs, &e);
    if (sqd_find_min_k(gs, h, SQD_STRATEGY_ORDERED, 0, 0.99, 1000, &r) != SQD_STATUS_OK) return 4;
    printf("%.10f %llu\n", e, (unsigned long long)r.m);
    if (sqd_hamiltonian_heisenberg(1, 1, false, 1.0, &h) != SQD_STATUS_INVALID_LATTICE) return 5;
    if (sqd_last_error_message() == NULL) return 6;
    sqd_ground_state_free(gs);
    return 0;
}
"#;

/// Compiles and runs a C client against the static library and header.
#[test]
fn c_client_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libsqd_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("capi");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("client.c");
    let bin = dir.join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C client exited with {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut parts = text.split_whitespace();
    let e: f64 = parts.next().unwrap().parse().unwrap();
    let m: u64 = parts.next().unwrap().parse().unwrap();
    assert!((e + 2.4935771339).abs() < 1e-9, "{e}");
    assert_eq!(m, 16);
}
