//! C ABI over `skewdyn`: opaque map handles, status codes, JSON reports.
//!
//! Strings returned through `out_json` are owned by the caller and released
//! with [`skewdyn_string_free`]. Maps are released with [`skewdyn_map_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use skewdyn::critpost::{certify_axiom_a, chain_analysis, ChainConfig, DEFAULT_MARGIN};
use skewdyn::error::Error;
use skewdyn::families::{make_airplane_skew, make_fa};
use skewdyn::poly::{c, SkewProduct};
use skewdyn::sets::{assemble_j2, augment_with_cycles, sample_base_julia};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkewdynStatus {
    Ok = 0,
    Io = 1,
    Precondition = 2,
    Numerical = 3,
    Parse = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Opaque skew product.
pub struct SkewdynMap {
    inner: SkewProduct,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let s = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(e: &Error) -> SkewdynStatus {
    match e {
        Error::Precondition(_) => SkewdynStatus::Precondition,
        Error::Numerical(_) => SkewdynStatus::Numerical,
        Error::Parse(_) => SkewdynStatus::Parse,
        Error::Io(_) | Error::Json(_) => SkewdynStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), SkewdynStatus>>(f: F) -> SkewdynStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkewdynStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside skewdyn".into());
            SkewdynStatus::Panic
        }
    }
}

fn lift<T>(r: skewdyn::error::Result<T>) -> Result<T, SkewdynStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null_err(what: &str) -> SkewdynStatus {
    set_error(format!("null pointer: {what}"));
    SkewdynStatus::NullPointer
}

fn put_string(out: *mut *mut c_char, s: String) -> Result<(), SkewdynStatus> {
    let cs = CString::new(s).map_err(|_| null_err("interior nul"))?;
    // SAFETY: caller passed a valid, non-null out pointer (checked by callers).
    unsafe { *out = cs.into_raw() };
    Ok(())
}

fn map_ref<'a>(m: *const SkewdynMap) -> Result<&'a SkewdynMap, SkewdynStatus> {
    // SAFETY: non-null handles come from this library and stay valid until freed.
    unsafe { m.as_ref() }.ok_or_else(|| null_err("map"))
}

fn put_map(out: *mut *mut SkewdynMap, f: SkewProduct) {
    // SAFETY: out checked non-null by callers.
    unsafe { *out = Box::into_raw(Box::new(SkewdynMap { inner: f })) };
}

/// Message of the last failure on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn skewdyn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// `F_a(z, w) = (z^2, w^2 + a z)`.
///
/// # Safety
/// Pointer arguments must be NULL or valid for the access described.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_map_fa(a_re: f64, a_im: f64, out: *mut *mut SkewdynMap) -> SkewdynStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        if !(a_re.is_finite() && a_im.is_finite()) {
            set_error("parameter must be finite".into());
            return Err(SkewdynStatus::Precondition);
        }
        put_map(out, make_fa(c(a_re, a_im)));
        Ok(())
    })
}

/// Airplane-base family at superattracting period `n`.
///
/// # Safety
/// Pointer arguments must be NULL or valid for the access described.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_map_airplane(n: usize, out: *mut *mut SkewdynMap) -> SkewdynStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        put_map(out, lift(make_airplane_skew(n))?);
        Ok(())
    })
}

/// Map from its text form (`[p]` and `[q]` coefficient sections).
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_map_from_text(text: *const c_char, out: *mut *mut SkewdynMap) -> SkewdynStatus {
    guard(|| {
        if text.is_null() {
            return Err(null_err("text"));
        }
        if out.is_null() {
            return Err(null_err("out"));
        }
        // SAFETY: documented precondition.
        let s = unsafe { CStr::from_ptr(text) }.to_str().map_err(|_| {
            set_error("text is not UTF-8".into());
            SkewdynStatus::Parse
        })?;
        put_map(out, lift(SkewProduct::from_text(s))?);
        Ok(())
    })
}

/// Releases a map. NULL is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_map_free(m: *mut SkewdynMap) {
    if !m.is_null() {
        // SAFETY: documented precondition.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Degree of the map.
///
/// # Safety
/// Pointer arguments must be NULL or valid for the access described.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_map_degree(m: *const SkewdynMap, out: *mut usize) -> SkewdynStatus {
    guard(|| {
        let m = map_ref(m)?;
        if out.is_null() {
            return Err(null_err("out"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = m.inner.degree };
        Ok(())
    })
}

/// Image of `(z, w)`, written as `[re z', im z', re w', im w']`.
///
/// # Safety
/// `out` must point to four writable doubles.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_map_eval(m: *const SkewdynMap, z_re: f64, z_im: f64, w_re: f64, w_im: f64, out: *mut f64) -> SkewdynStatus {
    guard(|| {
        let m = map_ref(m)?;
        if out.is_null() {
            return Err(null_err("out"));
        }
        let (z, w) = m.inner.eval(c(z_re, z_im), c(w_re, w_im));
        // SAFETY: documented precondition.
        let o = unsafe { std::slice::from_raw_parts_mut(out, 4) };
        o.copy_from_slice(&[z.re, z.im, w.re, w.im]);
        Ok(())
    })
}

/// Text form of the map (free with [`skewdyn_string_free`]).
///
/// # Safety
/// Pointer arguments must be NULL or valid for the access described.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_map_to_text(m: *const SkewdynMap, out: *mut *mut c_char) -> SkewdynStatus {
    guard(|| {
        let m = map_ref(m)?;
        if out.is_null() {
            return Err(null_err("out"));
        }
        put_string(out, m.inner.to_text())
    })
}

/// Axiom A certification report as JSON.
///
/// # Safety
/// Pointer arguments must be NULL or valid for the access described.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_certify_json(m: *const SkewdynMap, base_samples: usize, seed: u64, out_json: *mut *mut c_char) -> SkewdynStatus {
    guard(|| {
        let m = map_ref(m)?;
        if out_json.is_null() {
            return Err(null_err("out_json"));
        }
        let f = &m.inner;
        let base0 = lift(sample_base_julia(&f.p, base_samples, seed))?;
        let base = lift(augment_with_cycles(&f.p, &base0, 3, 20))?;
        let j2 = lift(assemble_j2(f, &base0, 32, 30, 10.0, seed))?;
        let rep = lift(certify_axiom_a(f, &base, &j2, DEFAULT_MARGIN))?;
        put_string(out_json, rep.to_json().to_string())
    })
}

/// Accumulation-chain report as JSON.
///
/// # Safety
/// Pointer arguments must be NULL or valid for the access described.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_chain_json(m: *const SkewdynMap, n_base: usize, seed: u64, out_json: *mut *mut c_char) -> SkewdynStatus {
    guard(|| {
        let m = map_ref(m)?;
        if out_json.is_null() {
            return Err(null_err("out_json"));
        }
        let cfg = ChainConfig { n_base, seed, ..ChainConfig::default() };
        let rep = lift(chain_analysis(&m.inner, &cfg))?;
        put_string(out_json, rep.to_json().to_string())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn skewdyn_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: documented precondition.
        drop(unsafe { CString::from_raw(s) });
    }
}
