//! C ABI over pe-core.
//!
//! States cross the boundary as opaque `PeState` handles. Every call returns a
//! `PeStatus`; on failure `pe_last_error()` holds a message for the calling thread.
//! Strings returned through `char **` are owned by the caller and released with
//! `pe_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pe_core::activation::{activate, ActivationSpec};
use pe_core::measures::{e_ssr, m_pe_f, MpeSearch, SsrMeasure};
use pe_core::nonclassicality::binomial_poisson_distance;
use pe_core::witness_pipeline::{estimate_moments, optimize_witness_params, pe_lower_bound, BootstrapOptions, SpinShotDataset};
use pe_core::{BlockDiagonalState, Error, ModePartition};

/// Opaque number-block-diagonal state.
pub struct PeState(BlockDiagonalState);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Input rejected: bad shape, cap exceeded, malformed JSON and the like.
    Validation = 3,
    Io = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PeStatus, msg: impl Into<String>) -> PeStatus {
    set_error(msg.into());
    status
}

impl From<Error> for PeStatus {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() { PeStatus::Validation } else { PeStatus::Io };
        fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), PeStatus>) -> PeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PeStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PeStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, PeStatus> {
    if p.is_null() {
        return Err(fail(PeStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(PeStatus::InvalidUtf8, e.to_string()))
}

unsafe fn state_arg<'a>(p: *const PeState) -> Result<&'a BlockDiagonalState, PeStatus> {
    p.as_ref().map(|s| &s.0).ok_or_else(|| fail(PeStatus::NullPointer, "null state handle"))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), PeStatus> {
    if out.is_null() {
        return Err(fail(PeStatus::NullPointer, "null output pointer"));
    }
    out.write(v);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), PeStatus> {
    let c = CString::new(s).map_err(|e| fail(PeStatus::Validation, e.to_string()))?;
    write_out(out, c.into_raw())
}

fn new_handle(s: BlockDiagonalState) -> *mut PeState {
    Box::into_raw(Box::new(PeState(s)))
}

/// Message for the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn pe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Fock state |n_0, ..., n_{m-1}⟩.
///
/// # Safety
/// `occupation` must point to `modes` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_state_fock(occupation: *const usize, modes: usize, out: *mut *mut PeState) -> PeStatus {
    guard(|| {
        if occupation.is_null() && modes > 0 {
            return Err(fail(PeStatus::NullPointer, "null occupation"));
        }
        let occ = if modes == 0 { &[][..] } else { std::slice::from_raw_parts(occupation, modes) };
        let s = BlockDiagonalState::fock(occ)?;
        write_out(out, new_handle(s))
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_state_from_json(json: *const c_char, out: *mut *mut PeState) -> PeStatus {
    guard(|| {
        let s = BlockDiagonalState::from_json(str_arg(json)?)?;
        write_out(out, new_handle(s))
    })
}

/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_state_to_json(state: *const PeState, out: *mut *mut c_char) -> PeStatus {
    guard(|| {
        let json = state_arg(state)?.to_json()?;
        write_string(out, json)
    })
}

/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_state_modes(state: *const PeState, out: *mut usize) -> PeStatus {
    guard(|| write_out(out, state_arg(state)?.modes()))
}

/// # Safety
/// `state` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pe_state_free(state: *mut PeState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// SSR-restricted negativity of a 2m-mode state across modes 0..m | m..2m.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_e_ssr_halves(state: *const PeState, out: *mut f64) -> PeStatus {
    guard(|| {
        let s = state_arg(state)?;
        if s.modes() % 2 != 0 {
            return Err(fail(PeStatus::Validation, "odd number of modes"));
        }
        let v = e_ssr(s, &ModePartition::halves(s.modes() / 2), SsrMeasure::Negativity)?;
        write_out(out, v)
    })
}

/// Balanced activation of an m-mode state; writes the SSR negativity of the output.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_activate_balanced(state: *const PeState, out: *mut f64) -> PeStatus {
    guard(|| {
        let rep = activate(&ActivationSpec::balanced(state_arg(state)?.clone())?)?;
        write_out(out, rep.e_ssr_negativity)
    })
}

/// Fisher-information PE monotone. Two-mode states use the exact search, others
/// the restart search with `restarts` starts from `seed`.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_m_pe_f(state: *const PeState, seed: u64, restarts: usize, out: *mut f64) -> PeStatus {
    guard(|| {
        let s = state_arg(state)?;
        let search = if s.modes() == 2 { MpeSearch::TwoModeExact } else { MpeSearch::GeneralRestarts { seed, restarts } };
        write_out(out, m_pe_f(s, search)?.value)
    })
}

/// Total variation between Binomial(n, p) and Poisson(np).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_binomial_poisson_distance(n: u64, p: f64, out: *mut f64) -> PeStatus {
    guard(|| write_out(out, binomial_poisson_distance(n, p)?.distance))
}

/// Witness lower bound from a shot CSV and metadata JSON, with optimized gains.
/// Writes the bound result as JSON.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_witness_bound(
    data_path: *const c_char,
    meta_path: *const c_char,
    resamples: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> PeStatus {
    guard(|| {
        let data = SpinShotDataset::read(Path::new(str_arg(data_path)?), Path::new(str_arg(meta_path)?))?;
        let opt = optimize_witness_params(&estimate_moments(&data)?);
        let r = pe_lower_bound(&data, opt.params, BootstrapOptions { resamples, seed })?;
        write_string(out, serde_json::to_string(&r).map_err(|e| PeStatus::from(Error::from(e)))?)
    })
}
