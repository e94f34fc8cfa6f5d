//! C ABI for `barcode-grad`.
//!
//! Every function returns a [`BgStatus`]. Results come back through out-pointers.
//! After a non-`Ok` status, [`bg_last_error_message`] describes the failure on the calling thread.
//! Handles are opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use barcode_grad::barcode::{bottleneck, wasserstein, Barcode};
use barcode_grad::complex::{ComplexFile, FilterFunction};
use barcode_grad::config::Config;
use barcode_grad::error::Error;
use barcode_grad::persistence::diagram;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    NotAFiltration = 4,
    BadDegree = 5,
    IndexOutOfRange = 6,
    InfiniteDistance = 7,
    Singular = 8,
    Internal = 9,
}

/// A simplicial complex together with filter values on its simplices.
pub struct BgFilter(FilterFunction);

/// A barcode: finite bars plus births of infinite bars.
pub struct BgBarcode(Barcode);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BgStatus {
    match e {
        Error::NotAFiltration { .. } | Error::OrderViolation(_) => BgStatus::NotAFiltration,
        Error::BadDegree { .. } => BgStatus::BadDegree,
        Error::SingularParameter { .. } | Error::StalledAtSingularity | Error::UnstableDirection => {
            BgStatus::Singular
        }
        Error::InfiniteLoss => BgStatus::InfiniteDistance,
        _ => BgStatus::InvalidInput,
    }
}

fn fail(status: BgStatus, msg: impl Into<String>) -> BgStatus {
    set_error(msg.into());
    status
}

fn guard(body: impl FnOnce() -> BgStatus) -> BgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => fail(BgStatus::Internal, "internal panic"),
    }
}

fn from_core(e: Error) -> BgStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, BgStatus> {
    if p.is_null() {
        return Err(fail(BgStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BgStatus::InvalidUtf8, "string is not valid UTF-8"))
}

macro_rules! nonnull {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(BgStatus::NullPointer, concat!("null argument: ", stringify!($p)));
        })+
    };
}

/// Message for the most recent failure on this thread. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses `{"simplices": [[...], ...], "values": [...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bg_filter_from_json(json: *const c_char, out: *mut *mut BgFilter) -> BgStatus {
    guard(|| {
        nonnull!(out);
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ComplexFile::from_json(text).and_then(|c| c.filter()) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(BgFilter(f)));
                BgStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `filter` must come from [`bg_filter_from_json`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bg_filter_free(filter: *mut BgFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_filter_num_simplices(filter: *const BgFilter, out: *mut usize) -> BgStatus {
    guard(|| {
        nonnull!(filter, out);
        *out = (*filter).0.complex().len();
        BgStatus::Ok
    })
}

/// Barcode of `filter` in `degree`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_diagram(filter: *const BgFilter, degree: usize, out: *mut *mut BgBarcode) -> BgStatus {
    guard(|| {
        nonnull!(filter, out);
        match diagram(&(*filter).0, degree) {
            Ok(b) => {
                *out = Box::into_raw(Box::new(BgBarcode(b)));
                BgStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Builds a barcode from `n_finite` (birth, death) pairs and `n_infinite` births.
/// Array pointers may be null when their count is zero.
///
/// # Safety
/// Each non-null array must hold at least its stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn bg_barcode_new(
    births: *const f64,
    deaths: *const f64,
    n_finite: usize,
    infinite_births: *const f64,
    n_infinite: usize,
    out: *mut *mut BgBarcode,
) -> BgStatus {
    guard(|| {
        nonnull!(out);
        if n_finite > 0 {
            nonnull!(births, deaths);
        }
        if n_infinite > 0 {
            nonnull!(infinite_births);
        }
        let slice = |p: *const f64, n: usize| if n == 0 { &[][..] } else { std::slice::from_raw_parts(p, n) };
        let b = slice(births, n_finite);
        let d = slice(deaths, n_finite);
        if let Some(i) = (0..n_finite).find(|&i| !(b[i].is_finite() && d[i].is_finite() && b[i] <= d[i])) {
            return fail(BgStatus::InvalidInput, format!("bar {i} is not a finite interval with birth <= death"));
        }
        let inf = slice(infinite_births, n_infinite);
        if inf.iter().any(|x| !x.is_finite()) {
            return fail(BgStatus::InvalidInput, "infinite bars need finite births");
        }
        let finite = b.iter().copied().zip(d.iter().copied()).collect();
        *out = Box::into_raw(Box::new(BgBarcode(Barcode::new(finite, inf.to_vec()))));
        BgStatus::Ok
    })
}

/// # Safety
/// `barcode` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bg_barcode_free(barcode: *mut BgBarcode) {
    if !barcode.is_null() {
        drop(Box::from_raw(barcode));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_barcode_len(barcode: *const BgBarcode, n_finite: *mut usize, n_infinite: *mut usize) -> BgStatus {
    guard(|| {
        nonnull!(barcode, n_finite, n_infinite);
        *n_finite = (*barcode).0.finite().len();
        *n_infinite = (*barcode).0.infinite().len();
        BgStatus::Ok
    })
}

/// Finite bar `index`, in the barcode's sorted order.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_barcode_finite(
    barcode: *const BgBarcode,
    index: usize,
    birth: *mut f64,
    death: *mut f64,
) -> BgStatus {
    guard(|| {
        nonnull!(barcode, birth, death);
        match (*barcode).0.finite().get(index) {
            Some(&(b, d)) => {
                *birth = b;
                *death = d;
                BgStatus::Ok
            }
            None => fail(BgStatus::IndexOutOfRange, format!("no finite bar {index}")),
        }
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_barcode_infinite(barcode: *const BgBarcode, index: usize, birth: *mut f64) -> BgStatus {
    guard(|| {
        nonnull!(barcode, birth);
        match (*barcode).0.infinite().get(index) {
            Some(&b) => {
                *birth = b;
                BgStatus::Ok
            }
            None => fail(BgStatus::IndexOutOfRange, format!("no infinite bar {index}")),
        }
    })
}

/// Bottleneck distance. Writes infinity and returns `Ok` when infinite-bar counts differ.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_bottleneck(a: *const BgBarcode, b: *const BgBarcode, out: *mut f64) -> BgStatus {
    guard(|| {
        nonnull!(a, b, out);
        *out = bottleneck(&(*a).0, &(*b).0);
        BgStatus::Ok
    })
}

/// `q`-Wasserstein distance. Writes infinity and returns `Ok` when infinite-bar counts differ.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_wasserstein(a: *const BgBarcode, b: *const BgBarcode, q: f64, out: *mut f64) -> BgStatus {
    guard(|| {
        nonnull!(a, b, out);
        match wasserstein(&(*a).0, &(*b).0, q) {
            Ok(d) => {
                *out = d;
                BgStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Runs the optimizer on a JSON configuration and returns the trace as JSON lines.
/// The returned string must be released with [`bg_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `trace_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bg_optimize(config_json: *const c_char, trace_out: *mut *mut c_char) -> BgStatus {
    guard(|| {
        nonnull!(trace_out);
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let trace = match Config::from_json(text).and_then(|c| c.build()).and_then(|p| p.run()) {
            Ok(t) => t,
            Err(e) => return from_core(e),
        };
        *trace_out = CString::new(trace.to_jsonl()).expect("JSON has no NUL bytes").into_raw();
        BgStatus::Ok
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
