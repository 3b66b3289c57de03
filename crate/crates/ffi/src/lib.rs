//! C ABI over `conetail`.
//!
//! Every fallible call returns a `ConetailStatus`; on failure the message is kept
//! per thread and read back with `conetail_last_error`. Objects are opaque heap
//! handles released with their `_free` function. Strings returned by the library
//! are released with `conetail_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use conetail::convolution::{convolve, self_convolve};
use conetail::montecarlo::{estimate_tail_prob, SimKind};
use conetail::samplers::{JumpModel, RngStream};
use conetail::{Error, MRVSpectrum, RectSet, TailMeasure};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConetailStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed or out-of-range input.
    InvalidInput = 3,
    /// The set lies on a null-convergence cone.
    NullConvergence = 4,
    /// A structural hypothesis of the requested operation fails.
    Hypothesis = 5,
    /// Other numeric failure.
    Numeric = 6,
    Panic = 7,
}

pub struct ConetailMeasure(TailMeasure);
pub struct ConetailRectSet(RectSet);
pub struct ConetailSpectrum(MRVSpectrum);
pub struct ConetailModel(JumpModel);
pub struct ConetailRng(RngStream);

/// Result of a Monte Carlo estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ConetailEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub hits: u64,
    pub n_samples: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ConetailStatus {
    match e {
        Error::NullConvOnly { .. } => ConetailStatus::NullConvergence,
        Error::HypothesisViolated { .. } | Error::AssumptionAViolated(_) | Error::RegimeMismatch(_) => {
            ConetailStatus::Hypothesis
        }
        e if e.is_input_error() => ConetailStatus::InvalidInput,
        _ => ConetailStatus::Numeric,
    }
}

enum Fail {
    Status(ConetailStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ConetailStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ConetailStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(format!("{}: {e}", e.code()));
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside conetail".into());
            ConetailStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(ConetailStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(ConetailStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn json_err(e: serde_json::Error) -> Fail {
    Fail::Lib(Error::from(e))
}

/// Message of the last failed call on this thread; empty if none. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn conetail_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn conetail_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn conetail_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `p` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn conetail_measure_free(p: *mut ConetailMeasure) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn conetail_rectset_free(p: *mut ConetailRectSet) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn conetail_spectrum_free(p: *mut ConetailSpectrum) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn conetail_model_free(p: *mut ConetailModel) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn conetail_rng_free(p: *mut ConetailRng) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_measure_from_json(json: *const c_char, out: *mut *mut ConetailMeasure) -> ConetailStatus {
    guard(|| put(out, ConetailMeasure(serde_json::from_str(text(json, "json")?).map_err(json_err)?)))
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_rectset_from_json(json: *const c_char, out: *mut *mut ConetailRectSet) -> ConetailStatus {
    guard(|| put(out, ConetailRectSet(serde_json::from_str(text(json, "json")?).map_err(json_err)?)))
}

/// Rectangle `{z_j > x_j, j in S}` from 0-based `indices` and thresholds, both of length `len`.
///
/// # Safety
/// `indices` and `thresholds` point to `len` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_rectset_new(
    dim: usize,
    indices: *const usize,
    thresholds: *const f64,
    len: usize,
    out: *mut *mut ConetailRectSet,
) -> ConetailStatus {
    guard(|| {
        if len > 0 && (indices.is_null() || thresholds.is_null()) {
            return Err(null("indices or thresholds"));
        }
        let (idx, xs) = if len == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(indices, len), std::slice::from_raw_parts(thresholds, len))
        };
        let set = RectSet::new(dim, idx.iter().copied().zip(xs.iter().copied()))?;
        put(out, ConetailRectSet(set))
    })
}

/// # Safety
/// Handles are valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_measure_eval(m: *const ConetailMeasure, a: *const ConetailRectSet, out: *mut f64) -> ConetailStatus {
    guard(|| {
        let v = borrow(m, "measure")?.0.eval(&borrow(a, "set")?.0)?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = v;
        Ok(())
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_spectrum_from_json(json: *const c_char, out: *mut *mut ConetailSpectrum) -> ConetailStatus {
    guard(|| put(out, ConetailSpectrum(MRVSpectrum::from_json(text(json, "json")?)?)))
}

/// Writes a newly allocated JSON string to `out`; free it with `conetail_string_free`.
///
/// # Safety
/// `s` is valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_spectrum_to_json(s: *const ConetailSpectrum, out: *mut *mut c_char) -> ConetailStatus {
    guard(|| {
        let json = borrow(s, "spectrum")?.0.to_json();
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Dimension and `Delta` of a spectrum.
///
/// # Safety
/// `s` is valid; the outputs are writable or null.
#[no_mangle]
pub unsafe extern "C" fn conetail_spectrum_shape(s: *const ConetailSpectrum, d: *mut usize, delta: *mut usize) -> ConetailStatus {
    guard(|| {
        let s = &borrow(s, "spectrum")?.0;
        if let Some(d) = d.as_mut() {
            *d = s.d();
        }
        if let Some(delta) = delta.as_mut() {
            *delta = s.delta();
        }
        Ok(())
    })
}

/// Spectrum of the sum of independent vectors with spectra `s1` and `s2`.
///
/// # Safety
/// Handles are valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_convolve(
    s1: *const ConetailSpectrum,
    s2: *const ConetailSpectrum,
    out: *mut *mut ConetailSpectrum,
) -> ConetailStatus {
    guard(|| {
        let r = convolve(&borrow(s1, "spec1")?.0, &borrow(s2, "spec2")?.0)?;
        put(out, ConetailSpectrum(r.spectrum))
    })
}

/// Spectrum of the `n`-fold i.i.d. sum.
///
/// # Safety
/// `s` is valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_self_convolve(s: *const ConetailSpectrum, n: usize, out: *mut *mut ConetailSpectrum) -> ConetailStatus {
    guard(|| put(out, ConetailSpectrum(self_convolve(&borrow(s, "spectrum")?.0, n)?)))
}

/// `mu_i(A)/b_i^{<-}(t)`; on a null-convergence cone `*upper_bound` is set to 1 and
/// `*value` carries the rate bound.
///
/// # Safety
/// Handles are valid; `value` is writable; `upper_bound` is writable or null.
#[no_mangle]
pub unsafe extern "C" fn conetail_tail_prob_approx(
    s: *const ConetailSpectrum,
    a: *const ConetailRectSet,
    t: f64,
    value: *mut f64,
    upper_bound: *mut i32,
) -> ConetailStatus {
    guard(|| {
        let r = borrow(s, "spectrum")?.0.tail_prob_approx(&borrow(a, "set")?.0, t)?;
        *value.as_mut().ok_or_else(|| null("value"))? = r.value;
        if let Some(u) = upper_bound.as_mut() {
            *u = r.upper_bound as i32;
        }
        Ok(())
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_model_from_json(json: *const c_char, out: *mut *mut ConetailModel) -> ConetailStatus {
    guard(|| put(out, ConetailModel(JumpModel::from_json(text(json, "json")?)?)))
}

/// # Safety
/// `m` is valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_model_dim(m: *const ConetailModel, out: *mut usize) -> ConetailStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("output pointer"))? = borrow(m, "model")?.0.d();
        Ok(())
    })
}

/// Spectrum implied by a sampler model.
///
/// # Safety
/// `m` is valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_model_spectrum(m: *const ConetailModel, out: *mut *mut ConetailSpectrum) -> ConetailStatus {
    guard(|| put(out, ConetailSpectrum(borrow(m, "model")?.0.spectrum()?)))
}

/// A random stream; the same `(seed, stream)` gives the same draws.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_rng_new(seed: u64, stream: u64, out: *mut *mut ConetailRng) -> ConetailStatus {
    guard(|| put(out, ConetailRng(RngStream::new(seed, stream))))
}

/// One draw of the model into `out[0..len]`; `len` must equal the model dimension.
/// A stream must not be used from two threads at once.
///
/// # Safety
/// Handles are valid; `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn conetail_sample_vector(
    m: *const ConetailModel,
    rng: *mut ConetailRng,
    out: *mut f64,
    len: usize,
) -> ConetailStatus {
    guard(|| {
        let m = &borrow(m, "model")?.0;
        let rng = &mut rng.as_mut().ok_or_else(|| null("rng"))?.0;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        if len != m.d() {
            return Err(Error::DimensionMismatch { expected: m.d(), got: len }.into());
        }
        m.sample_into(rng, std::slice::from_raw_parts_mut(out, len));
        Ok(())
    })
}

/// Crude Monte Carlo estimate of `P(X in tA)`. `kind` is `"vector"`, `"sum:N"` or `"cp:LAMBDA:S"`.
///
/// # Safety
/// Handles and `kind` are valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn conetail_estimate_tail_prob(
    kind: *const c_char,
    m: *const ConetailModel,
    a: *const ConetailRectSet,
    t: f64,
    n_samples: u64,
    seed: u64,
    out: *mut ConetailEstimate,
) -> ConetailStatus {
    guard(|| {
        let kind: SimKind = text(kind, "kind")?.parse()?;
        let e = estimate_tail_prob(kind, &borrow(m, "model")?.0, &borrow(a, "set")?.0, t, n_samples, seed)?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = ConetailEstimate {
            p_hat: e.p_hat,
            stderr: e.stderr,
            ci_lo: e.ci_lo,
            ci_hi: e.ci_hi,
            hits: e.hits,
            n_samples: e.n_samples,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::NullConvOnly { level: 2 }), ConetailStatus::NullConvergence);
        assert_eq!(status_of(&Error::RegimeMismatch("x".into())), ConetailStatus::Hypothesis);
        assert_eq!(status_of(&Error::BadModel("x".into())), ConetailStatus::InvalidInput);
        assert_eq!(status_of(&Error::ZeroExponent), ConetailStatus::Numeric);
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, ConetailStatus::Panic);
    }
}
