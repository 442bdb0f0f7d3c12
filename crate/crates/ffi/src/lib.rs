//! C ABI surface over the core analysis library.
//!
//! Conventions: chains are opaque handles created by the constructors and
//! released with `mixchain_chain_free`; every fallible call returns a
//! status code (`MIXCHAIN_OK` = 0) and writes results through out
//! pointers; the most recent error message is retrievable per thread via
//! `mixchain_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use mixchain::chain::{ChainFile, ChainModel};
use mixchain::error::Error;
use mixchain::{mixing, spectral};

pub const MIXCHAIN_OK: i32 = 0;
pub const MIXCHAIN_ERR_NULL_POINTER: i32 = -1;
pub const MIXCHAIN_ERR_PARSE: i32 = -2;
pub const MIXCHAIN_ERR_VALIDATION: i32 = -3;
pub const MIXCHAIN_ERR_TOO_LARGE: i32 = -4;
pub const MIXCHAIN_ERR_NOT_REVERSIBLE: i32 = -5;
pub const MIXCHAIN_ERR_OTHER: i32 = -6;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_for(err: &Error) -> i32 {
    match err {
        Error::Parse(_) => MIXCHAIN_ERR_PARSE,
        Error::StateSpaceTooLarge { .. } | Error::SubsetTooLarge { .. } => MIXCHAIN_ERR_TOO_LARGE,
        Error::NotReversible { .. } => MIXCHAIN_ERR_NOT_REVERSIBLE,
        Error::NotSquare { .. }
        | Error::EmptyStateSpace
        | Error::DuplicateState(_)
        | Error::NegativeEntry { .. }
        | Error::RowSumViolation { .. }
        | Error::NotStationary { .. }
        | Error::BadParameter(_) => MIXCHAIN_ERR_VALIDATION,
        _ => MIXCHAIN_ERR_OTHER,
    }
}

fn fail(err: Error) -> i32 {
    let code = code_for(&err);
    set_error(err.to_string());
    code
}

/// Opaque chain handle.
pub struct MixchainChain {
    model: ChainModel,
}

/// Most recent error message on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mixchain_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Parses a chain from the JSON chain-file format. On success writes a new
/// handle through `out`.
///
/// # Safety
/// `json` must be a valid NUL-terminated C string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn mixchain_chain_from_json(
    json: *const c_char,
    out: *mut *mut MixchainChain,
) -> i32 {
    if json.is_null() || out.is_null() {
        return MIXCHAIN_ERR_NULL_POINTER;
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(e) => return fail(Error::Parse(e.to_string())),
    };
    let file: ChainFile = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => return fail(Error::Parse(e.to_string())),
    };
    match ChainModel::from_file(file) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(MixchainChain { model }));
            MIXCHAIN_OK
        }
        Err(e) => fail(e),
    }
}

/// Builds a chain from a dense row-major k-by-k transition matrix; the
/// stationary distribution is computed internally.
///
/// # Safety
/// `rows` must point to k*k doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixchain_chain_from_transition(
    rows: *const f64,
    k: usize,
    out: *mut *mut MixchainChain,
) -> i32 {
    if rows.is_null() || out.is_null() {
        return MIXCHAIN_ERR_NULL_POINTER;
    }
    let flat = std::slice::from_raw_parts(rows, k * k);
    let matrix: Vec<Vec<f64>> = (0..k).map(|i| flat[i * k..(i + 1) * k].to_vec()).collect();
    match ChainModel::validate(None, matrix, None) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(MixchainChain { model }));
            MIXCHAIN_OK
        }
        Err(e) => fail(e),
    }
}

/// Releases a chain handle. Null is a no-op.
///
/// # Safety
/// `chain` must be a handle from a constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mixchain_chain_free(chain: *mut MixchainChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of states.
///
/// # Safety
/// `chain` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mixchain_chain_len(chain: *const MixchainChain) -> usize {
    if chain.is_null() {
        return 0;
    }
    (*chain).model.len()
}

/// Copies the stationary distribution into `out` (length k).
///
/// # Safety
/// `chain` must be a live handle; `out` must hold k doubles.
#[no_mangle]
pub unsafe extern "C" fn mixchain_chain_stationary(
    chain: *const MixchainChain,
    out: *mut f64,
) -> i32 {
    if chain.is_null() || out.is_null() {
        return MIXCHAIN_ERR_NULL_POINTER;
    }
    let model = &(*chain).model;
    for i in 0..model.len() {
        *out.add(i) = model.mu(i);
    }
    MIXCHAIN_OK
}

unsafe fn coefficient_at(
    chain: *const MixchainChain,
    lag: u64,
    out: *mut f64,
    f: impl Fn(&ChainModel, u64) -> Result<f64, Error>,
) -> i32 {
    if chain.is_null() || out.is_null() {
        return MIXCHAIN_ERR_NULL_POINTER;
    }
    if lag == 0 {
        return fail(Error::BadParameter("lag must be positive".into()));
    }
    match f(&(*chain).model, lag) {
        Ok(v) => {
            *out = v;
            MIXCHAIN_OK
        }
        Err(e) => fail(e),
    }
}

/// alpha(lag).
///
/// # Safety
/// `chain` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixchain_alpha(
    chain: *const MixchainChain,
    lag: u64,
    out: *mut f64,
) -> i32 {
    coefficient_at(chain, lag, out, |m, n| {
        mixing::alpha_coefficient(&m.joint_at_lag(n))
    })
}

/// rho(lag).
///
/// # Safety
/// `chain` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixchain_rho(
    chain: *const MixchainChain,
    lag: u64,
    out: *mut f64,
) -> i32 {
    coefficient_at(chain, lag, out, |m, n| {
        Ok(mixing::rho_coefficient(&m.joint_at_lag(n)))
    })
}

/// beta(lag).
///
/// # Safety
/// `chain` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixchain_beta(
    chain: *const MixchainChain,
    lag: u64,
    out: *mut f64,
) -> i32 {
    coefficient_at(chain, lag, out, |m, n| {
        Ok(mixing::beta_coefficient(&m.joint_at_lag(n)))
    })
}

/// Second-largest eigenvalue modulus (reversible chains) or rho(1)
/// otherwise, and the gap 1 - slem.
///
/// # Safety
/// `chain` must be a live handle; `slem` and `gap` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixchain_slem_and_gap(
    chain: *const MixchainChain,
    slem: *mut f64,
    gap: *mut f64,
) -> i32 {
    if chain.is_null() || slem.is_null() || gap.is_null() {
        return MIXCHAIN_ERR_NULL_POINTER;
    }
    let report = spectral::slem_and_gap(&(*chain).model);
    *slem = report.slem;
    *gap = report.gap;
    MIXCHAIN_OK
}

/// Writes 1 through `out` if the chain satisfies detailed balance, else 0.
///
/// # Safety
/// `chain` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mixchain_is_reversible(
    chain: *const MixchainChain,
    out: *mut i32,
) -> i32 {
    if chain.is_null() || out.is_null() {
        return MIXCHAIN_ERR_NULL_POINTER;
    }
    *out = i32::from((*chain).model.check_reversibility().0);
    MIXCHAIN_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    fn handle_for(json: &str) -> *mut MixchainChain {
        let c = CString::new(json).unwrap();
        let mut out = ptr::null_mut();
        let code = unsafe { mixchain_chain_from_json(c.as_ptr(), &mut out) };
        assert_eq!(code, MIXCHAIN_OK);
        out
    }

    const TWO_STATE: &str = r#"{"states":["0","1"],"transition":[[0.75,0.25],[0.25,0.75]]}"#;

    #[test]
    fn round_trip_through_the_c_surface() {
        let h = handle_for(TWO_STATE);
        unsafe {
            assert_eq!(mixchain_chain_len(h), 2);
            let mut mu = [0.0f64; 2];
            assert_eq!(mixchain_chain_stationary(h, mu.as_mut_ptr()), MIXCHAIN_OK);
            assert!((mu[0] - 0.5).abs() < 1e-14);
            let mut v = 0.0f64;
            assert_eq!(mixchain_rho(h, 1, &mut v), MIXCHAIN_OK);
            assert!((v - 0.5).abs() < 1e-12);
            assert_eq!(mixchain_alpha(h, 1, &mut v), MIXCHAIN_OK);
            assert!((v - 0.125).abs() < 1e-14);
            assert_eq!(mixchain_beta(h, 1, &mut v), MIXCHAIN_OK);
            assert!((v - 0.25).abs() < 1e-14);
            let (mut s, mut g) = (0.0f64, 0.0f64);
            assert_eq!(mixchain_slem_and_gap(h, &mut s, &mut g), MIXCHAIN_OK);
            assert!((s - 0.5).abs() < 1e-12 && (g - 0.5).abs() < 1e-12);
            let mut rev = 0i32;
            assert_eq!(mixchain_is_reversible(h, &mut rev), MIXCHAIN_OK);
            assert_eq!(rev, 1);
            mixchain_chain_free(h);
        }
    }

    #[test]
    fn dense_constructor() {
        let rows = [0.75f64, 0.25, 0.25, 0.75];
        let mut out = ptr::null_mut();
        let code = unsafe { mixchain_chain_from_transition(rows.as_ptr(), 2, &mut out) };
        assert_eq!(code, MIXCHAIN_OK);
        unsafe { mixchain_chain_free(out) };
    }

    #[test]
    fn parse_failure_sets_error_message() {
        let c = CString::new("not json").unwrap();
        let mut out = ptr::null_mut();
        let code = unsafe { mixchain_chain_from_json(c.as_ptr(), &mut out) };
        assert_eq!(code, MIXCHAIN_ERR_PARSE);
        let msg = mixchain_last_error();
        assert!(!msg.is_null());
        let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap();
        assert!(!text.is_empty());
    }

    #[test]
    fn validation_failure_code() {
        let c = CString::new(r#"{"states":["0"],"transition":[[0.5]]}"#).unwrap();
        let mut out = ptr::null_mut();
        let code = unsafe { mixchain_chain_from_json(c.as_ptr(), &mut out) };
        assert_eq!(code, MIXCHAIN_ERR_VALIDATION);
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            assert_eq!(
                mixchain_chain_from_json(ptr::null(), ptr::null_mut()),
                MIXCHAIN_ERR_NULL_POINTER
            );
            let mut v = 0.0;
            assert_eq!(mixchain_rho(ptr::null(), 1, &mut v), MIXCHAIN_ERR_NULL_POINTER);
            mixchain_chain_free(ptr::null_mut());
        }
    }
}
