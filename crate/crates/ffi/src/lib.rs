//! C ABI for `sqd-core`.
//!
//! Every function returns an [`SqdStatus`] and writes results through out
//! pointers. Handles are opaque and owned by the caller until passed to the
//! matching `_free` function. On failure, [`sqd_last_error_message`] describes
//! the most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sqd_core::sqd::find_min_m;
use sqd_core::{
    Boundary, Error, Filling, GroundState, InclusionStrategy, LanczosOptions, LatticeSpec, Model, Schedule,
    SparseHamiltonian,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidLattice = 3,
    Capacity = 4,
    Shape = 5,
    InvalidSector = 6,
    Convergence = 7,
    Normalization = 8,
    Index = 9,
    UndefinedFidelity = 10,
    CapExceeded = 11,
    Format = 12,
    Io = 13,
    Panic = 14,
    Other = 15,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqdStrategy {
    Ordered = 0,
    Sampled = 1,
}

/// Outcome of a minimal-subspace search.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SqdMinResult {
    /// Exact minimal subspace size (ordered) or draws at the crossing (sampled).
    pub m: u64,
    /// Unique configurations at the schedule crossing.
    pub k: u64,
    /// Energy fidelity at the schedule crossing.
    pub fidelity: f64,
}

/// Opaque Hamiltonian handle.
pub struct SqdHamiltonian {
    inner: SparseHamiltonian,
}

/// Opaque ground-state handle.
pub struct SqdGroundState {
    inner: GroundState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SqdStatus {
    match e {
        Error::InvalidLattice(_) => SqdStatus::InvalidLattice,
        Error::Capacity { .. } => SqdStatus::Capacity,
        Error::Shape { .. } => SqdStatus::Shape,
        Error::InvalidSector(_) => SqdStatus::InvalidSector,
        Error::Convergence { .. } => SqdStatus::Convergence,
        Error::Normalization { .. } => SqdStatus::Normalization,
        Error::Index { .. } => SqdStatus::Index,
        Error::UndefinedFidelity => SqdStatus::UndefinedFidelity,
        Error::CapExceeded { .. } => SqdStatus::CapExceeded,
        Error::Format(_) => SqdStatus::Format,
        Error::Io { .. } => SqdStatus::Io,
        Error::Config(_) | Error::InvalidMatrix(_) | Error::InvalidSubspace(_) => SqdStatus::InvalidArgument,
        _ => SqdStatus::Other,
    }
}

fn fail(status: SqdStatus, msg: impl Into<String>) -> SqdStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), SqdStatus>) -> SqdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SqdStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SqdStatus::Panic, format!("panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SqdStatus>;
}

impl<T> OrStatus<T> for sqd_core::Result<T> {
    fn or_status(self) -> Result<T, SqdStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, SqdStatus> {
    // SAFETY: caller passes either null or a live handle from this library.
    unsafe { p.as_ref() }.ok_or_else(|| fail(SqdStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), SqdStatus> {
    if out.is_null() {
        return Err(fail(SqdStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and, per the caller contract, valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

fn lattice(height: u32, width: u32, periodic: bool) -> LatticeSpec {
    let spec = if height == 1 { LatticeSpec::chain(width as usize) } else { LatticeSpec::rect(height as usize, width as usize) };
    spec.with_boundary(if periodic { Boundary::Periodic } else { Boundary::Open })
}

unsafe fn build(model: Model, spec: LatticeSpec, out: *mut *mut SqdHamiltonian) -> Result<(), SqdStatus> {
    if out.is_null() {
        return Err(fail(SqdStatus::NullPointer, "out is null"));
    }
    let inner = SparseHamiltonian::build(model, &spec.build().or_status()?).or_status()?;
    // SAFETY: checked non-null above.
    unsafe { out.write(Box::into_raw(Box::new(SqdHamiltonian { inner }))) };
    Ok(())
}

/// Heisenberg model `J sum S_i . S_j` on a `height x width` lattice
/// (`height == 1` is a chain).
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn sqd_hamiltonian_heisenberg(
    height: u32,
    width: u32,
    periodic: bool,
    j: f64,
    out: *mut *mut SqdHamiltonian,
) -> SqdStatus {
    guard(|| unsafe { build(Model::Heisenberg { j }, lattice(height, width, periodic), out) })
}

/// Hubbard model with hopping `t` and on-site `u`. Negative `n_up` and
/// `n_down` select the lowest-energy particle sector; otherwise the sector is
/// fixed to `(n_up, n_down)`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn sqd_hamiltonian_hubbard(
    height: u32,
    width: u32,
    periodic: bool,
    t: f64,
    u: f64,
    n_up: i32,
    n_down: i32,
    out: *mut *mut SqdHamiltonian,
) -> SqdStatus {
    guard(|| {
        let filling = match (n_up, n_down) {
            (a, b) if a < 0 && b < 0 => Filling::Ground,
            (a, b) if a >= 0 && b >= 0 => Filling::Fixed { up: a as usize, down: b as usize },
            _ => return Err(fail(SqdStatus::InvalidArgument, "n_up and n_down must both be negative or both non-negative")),
        };
        unsafe { build(Model::Hubbard { t, u, filling }, lattice(height, width, periodic), out) }
    })
}

/// # Safety
/// `h` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqd_hamiltonian_free(h: *mut SqdHamiltonian) {
    if !h.is_null() {
        // SAFETY: created by Box::into_raw in `build`.
        drop(unsafe { Box::from_raw(h) });
    }
}

/// # Safety
/// `h` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sqd_hamiltonian_n_qubits(h: *const SqdHamiltonian, out: *mut u32) -> SqdStatus {
    guard(|| unsafe { write_out(out, deref(h, "h")?.inner.n_qubits() as u32, "out") })
}

/// Hilbert-space dimension `2^n_qubits`.
///
/// # Safety
/// `h` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sqd_hamiltonian_dim(h: *const SqdHamiltonian, out: *mut u64) -> SqdStatus {
    guard(|| unsafe { write_out(out, deref(h, "h")?.inner.dimension(), "out") })
}

/// `y = H x` for vectors of length `len`, which must equal the dimension.
///
/// # Safety
/// `x` must be readable and `y` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sqd_hamiltonian_apply(h: *const SqdHamiltonian, x: *const f64, y: *mut f64, len: usize) -> SqdStatus {
    guard(|| {
        let h = unsafe { deref(h, "h")? };
        if x.is_null() || y.is_null() {
            return Err(fail(SqdStatus::NullPointer, "x or y is null"));
        }
        // SAFETY: caller guarantees `len` readable doubles at `x`.
        let xs = unsafe { std::slice::from_raw_parts(x, len) };
        let out = h.inner.apply(xs).or_status()?;
        // SAFETY: `out.len() == len` after the shape check in `apply`.
        unsafe { ptr::copy_nonoverlapping(out.as_ptr(), y, len) };
        Ok(())
    })
}

/// Exact ground state by Lanczos. `tol <= 0` selects the default tolerance.
///
/// # Safety
/// `h` must be a live handle and `out` valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn sqd_ground_state_solve(
    h: *const SqdHamiltonian,
    tol: f64,
    seed: u64,
    out: *mut *mut SqdGroundState,
) -> SqdStatus {
    guard(|| {
        let h = unsafe { deref(h, "h")? };
        let mut opts = LanczosOptions::default().with_seed(seed);
        if tol > 0.0 {
            opts = opts.with_tol(tol);
        }
        if out.is_null() {
            return Err(fail(SqdStatus::NullPointer, "out is null"));
        }
        let inner = GroundState::solve(&h.inner, &opts).or_status()?;
        unsafe { write_out(out, Box::into_raw(Box::new(SqdGroundState { inner })), "out") }
    })
}

/// # Safety
/// `gs` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqd_ground_state_free(gs: *mut SqdGroundState) {
    if !gs.is_null() {
        // SAFETY: created by Box::into_raw in `sqd_ground_state_solve`.
        drop(unsafe { Box::from_raw(gs) });
    }
}

/// # Safety
/// `gs` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sqd_ground_state_energy(gs: *const SqdGroundState, out: *mut f64) -> SqdStatus {
    guard(|| unsafe { write_out(out, deref(gs, "gs")?.inner.energy(), "out") })
}

/// Shannon entropy of the configuration distribution, in nats.
///
/// # Safety
/// `gs` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sqd_ground_state_entropy(gs: *const SqdGroundState, out: *mut f64) -> SqdStatus {
    guard(|| unsafe { write_out(out, deref(gs, "gs")?.inner.entropy(), "out") })
}

/// Effective support `exp(S)`.
///
/// # Safety
/// `gs` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sqd_ground_state_neff(gs: *const SqdGroundState, out: *mut f64) -> SqdStatus {
    guard(|| unsafe { write_out(out, deref(gs, "gs")?.inner.effective_support(), "out") })
}

/// Copies the `2^n_qubits` configuration probabilities into `out`.
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sqd_ground_state_probabilities(gs: *const SqdGroundState, out: *mut f64, len: usize) -> SqdStatus {
    guard(|| {
        let p = unsafe { deref(gs, "gs")? }.inner.probabilities();
        if p.len() != len {
            return Err(fail(SqdStatus::Shape, format!("buffer holds {len} values, need {}", p.len())));
        }
        if out.is_null() {
            return Err(fail(SqdStatus::NullPointer, "out is null"));
        }
        // SAFETY: caller guarantees `len` writable doubles.
        unsafe { ptr::copy_nonoverlapping(p.as_ptr(), out, len) };
        Ok(())
    })
}

/// Smallest subspace reaching `threshold` energy fidelity with the default
/// increment schedule. `seed` is used only by the sampled strategy.
///
/// # Safety
/// `gs` and `h` must be live handles for the same system; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqd_find_min_k(
    gs: *const SqdGroundState,
    h: *const SqdHamiltonian,
    strategy: SqdStrategy,
    seed: u64,
    threshold: f64,
    max_m: u64,
    out: *mut SqdMinResult,
) -> SqdStatus {
    guard(|| {
        let gs = unsafe { deref(gs, "gs")? };
        let h = unsafe { deref(h, "h")? };
        let strategy = match strategy {
            SqdStrategy::Ordered => InclusionStrategy::Ordered,
            SqdStrategy::Sampled => InclusionStrategy::Sampled { seed },
        };
        let opts = LanczosOptions::default().with_tol(gs.inner.meta().tol).with_seed(gs.inner.meta().seed);
        let mm = find_min_m(&gs.inner, &h.inner, strategy, threshold, &Schedule::default(), max_m as usize, &opts)
            .or_status()?;
        unsafe { write_out(out, SqdMinResult { m: mm.m as u64, k: mm.k as u64, fidelity: mm.fidelity }, "out") }
    })
}

/// `1 - |e0k - e0| / |e0|`.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sqd_energy_fidelity(e0k: f64, e0: f64, out: *mut f64) -> SqdStatus {
    guard(|| unsafe { write_out(out, sqd_core::energy_fidelity(e0k, e0).or_status()?, "out") })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sqd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sqd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
