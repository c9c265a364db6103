//! C ABI over `operad-cells`.
//!
//! Every function returns an `OC_*` status code. Objects are opaque handles
//! released with the matching `*_free`. Strings are copied into caller
//! buffers: `*out_len` always receives the length without the terminating
//! NUL, and `OC_BUFFER` is returned when `cap` cannot hold it plus the NUL.
//! The message of the last failure on the calling thread is available from
//! `oc_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num::complex::Complex64;
use operad_cells::cacti_core::CactusCell;
use operad_cells::chain_algebra::{homology, GradedComplex};
use operad_cells::cli::catalog::{Catalog, CellKind};
use operad_cells::flowtrace::{extract_cell, weights_from_f64, Configuration, Tolerances, TraceResult};
use operad_cells::genfun::{f_series, o_series, p_series};
use operad_cells::metatree::{bar_differential, enumerate_bar_cells_with_limit, enumerate_fm_cells_with_limit, fm_differential, BarCell, FmCell};
use operad_cells::{Error, ErrorClass};

pub const OC_OK: i32 = 0;
pub const OC_NULL: i32 = 1;
pub const OC_VALIDATION: i32 = 2;
pub const OC_RESOURCE: i32 = 3;
pub const OC_BUFFER: i32 = 4;
pub const OC_INTERNAL: i32 = 5;
pub const OC_VERIFICATION: i32 = 6;

pub const OC_KIND_CACTI: u32 = 0;
pub const OC_KIND_BAR: u32 = 1;
pub const OC_KIND_FM: u32 = 2;

pub const OC_SERIES_P: u32 = 0;
pub const OC_SERIES_O: u32 = 1;
pub const OC_SERIES_F: u32 = 2;

/// An enumerated cell catalog.
pub struct OcCatalog {
    inner: Catalog,
}

/// The result of tracing one weighted configuration.
pub struct OcTrace {
    inner: TraceResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(e: Error) -> i32 {
    let code = match e.class() {
        ErrorClass::Validation => OC_VALIDATION,
        ErrorClass::Resource => OC_RESOURCE,
        ErrorClass::Verification => OC_VERIFICATION,
    };
    set_error(e.to_string());
    code
}

fn null(what: &str) -> i32 {
    set_error(format!("null pointer: {what}"));
    OC_NULL
}

/// Runs `f`, turning panics into `OC_INTERNAL`.
fn guard(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            OC_INTERNAL
        }
    }
}

unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize, out_len: *mut usize) -> i32 {
    if !out_len.is_null() {
        *out_len = s.len();
    }
    if buf.is_null() || cap < s.len() + 1 {
        set_error(format!("buffer of {cap} bytes cannot hold {} bytes", s.len() + 1));
        return OC_BUFFER;
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    OC_OK
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, i32> {
    if p.is_null() {
        return Err(null("string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(Error::Parse("string is not UTF-8".into())))
}

fn kind_of(kind: u32) -> Result<CellKind, i32> {
    match kind {
        OC_KIND_CACTI => Ok(CellKind::Cacti),
        OC_KIND_BAR => Ok(CellKind::Bar),
        OC_KIND_FM => Ok(CellKind::Fm),
        _ => Err(fail(Error::Parse(format!("unknown cell kind {kind}")))),
    }
}

macro_rules! try_code {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(code) => return code,
        }
    };
}

macro_rules! try_oc {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the message of the last failure on this thread.
///
/// # Safety
/// `buf` must be writable for `cap` bytes; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn oc_last_error_message(buf: *mut c_char, cap: usize, out_len: *mut usize) -> i32 {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    copy_out(&msg, buf, cap, out_len)
}

/// Enumerates all cells of `kind` and arity `k`, refusing more than `limit` cells.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with `oc_catalog_free`.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_enumerate(kind: u32, k: u32, limit: u64, out: *mut *mut OcCatalog) -> i32 {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let kind = try_code!(kind_of(kind));
        let cat = try_oc!(Catalog::enumerate(kind, k as usize, limit));
        *out = Box::into_raw(Box::new(OcCatalog { inner: cat }));
        OC_OK
    })
}

/// Reads and validates a catalog file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_read(path: *const c_char, out: *mut *mut OcCatalog) -> i32 {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = try_code!(read_str(path));
        let cat = try_oc!(Catalog::read(Path::new(path)));
        *out = Box::into_raw(Box::new(OcCatalog { inner: cat }));
        OC_OK
    })
}

/// # Safety
/// `cat` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_write(cat: *const OcCatalog, path: *const c_char) -> i32 {
    guard(|| {
        let Some(cat) = cat.as_ref() else { return null("catalog") };
        let path = try_code!(read_str(path));
        try_oc!(cat.inner.write(Path::new(path)));
        OC_OK
    })
}

/// Number of cells in the catalog.
///
/// # Safety
/// `cat` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_len(cat: *const OcCatalog, out: *mut usize) -> i32 {
    guard(|| {
        let Some(cat) = cat.as_ref() else { return null("catalog") };
        if out.is_null() {
            return null("out");
        }
        *out = cat.inner.records.len();
        OC_OK
    })
}

/// Number of cells of dimension `dim`; zero beyond the top dimension.
///
/// # Safety
/// `cat` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_count(cat: *const OcCatalog, dim: usize, out: *mut u64) -> i32 {
    guard(|| {
        let Some(cat) = cat.as_ref() else { return null("catalog") };
        if out.is_null() {
            return null("out");
        }
        *out = cat.inner.counts().get(dim).copied().unwrap_or(0);
        OC_OK
    })
}

/// Text form and dimension of record `index` (canonical order).
///
/// # Safety
/// `cat` must come from this library; `buf` writable for `cap` bytes;
/// `out_len` and `dim` may be null.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_record(
    cat: *const OcCatalog,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
    dim: *mut usize,
) -> i32 {
    guard(|| {
        let Some(cat) = cat.as_ref() else { return null("catalog") };
        let Some(r) = cat.inner.records.get(index) else {
            return fail(Error::ArityMismatch { expected: cat.inner.records.len(), found: index });
        };
        if !dim.is_null() {
            *dim = r.dim;
        }
        copy_out(&r.text, buf, cap, out_len)
    })
}

/// Hex SHA-256 of the catalog records.
///
/// # Safety
/// As for `oc_catalog_record`.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_hash(cat: *const OcCatalog, buf: *mut c_char, cap: usize, out_len: *mut usize) -> i32 {
    guard(|| {
        let Some(cat) = cat.as_ref() else { return null("catalog") };
        copy_out(&cat.inner.hash(), buf, cap, out_len)
    })
}

/// # Safety
/// `cat` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oc_catalog_free(cat: *mut OcCatalog) {
    if !cat.is_null() {
        drop(Box::from_raw(cat));
    }
}

/// The boundary of a cell given in text form, as `+1 word` lines.
///
/// # Safety
/// `cell` must be NUL-terminated; `buf` writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn oc_cell_boundary(
    kind: u32,
    cell: *const c_char,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> i32 {
    guard(|| {
        let kind = try_code!(kind_of(kind));
        let text = try_code!(read_str(cell));
        let terms: Vec<(i64, String)> = match kind {
            CellKind::Cacti => try_oc!(CactusCell::parse(text)).boundary().into_iter().map(|(s, c)| (s, c.to_string())).collect(),
            CellKind::Bar => {
                bar_differential(&try_oc!(BarCell::parse(text))).into_terms().into_iter().map(|(s, c)| (s, c.to_string())).collect()
            }
            CellKind::Fm => {
                fm_differential(&try_oc!(FmCell::parse(text))).into_terms().into_iter().map(|(s, c)| (s, c.to_string())).collect()
            }
        };
        let s: String = terms.iter().map(|(s, c)| format!("{s:+} {c}\n")).collect();
        copy_out(&s, buf, cap, out_len)
    })
}

/// Betti numbers of the complex of `kind` in arity `k`, after checking
/// `d^2 = 0`. `*out_len` receives the number of degrees; `*torsion_free`
/// whether all torsion vanishes.
///
/// # Safety
/// `betti` writable for `cap` entries; the other pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn oc_homology(
    kind: u32,
    k: u32,
    limit: u64,
    betti: *mut u64,
    cap: usize,
    out_len: *mut usize,
    torsion_free: *mut bool,
) -> i32 {
    guard(|| {
        let kind = try_code!(kind_of(kind));
        let k = k as usize;
        let cx = try_oc!(match kind {
            CellKind::Cacti => operad_cells::cacti_core::enumerate_cells_with_limit(k, limit)
                .and_then(|c| GradedComplex::from_cells(&c, |x| x.boundary())),
            CellKind::Bar => enumerate_bar_cells_with_limit(k, limit)
                .and_then(|c| GradedComplex::from_cells(&c, |x| bar_differential(x).into_terms())),
            CellKind::Fm => enumerate_fm_cells_with_limit(k, limit)
                .and_then(|c| GradedComplex::from_cells(&c, |x| fm_differential(x).into_terms())),
        });
        match try_oc!(operad_cells::chain_algebra::verify_d2(&cx)) {
            operad_cells::chain_algebra::D2Report::Ok => {}
            other => return fail(Error::Verification(format!("{other:?}"))),
        }
        let h = try_oc!(homology(&cx));
        if !out_len.is_null() {
            *out_len = h.betti.len();
        }
        if !torsion_free.is_null() {
            *torsion_free = h.is_torsion_free();
        }
        if betti.is_null() || cap < h.betti.len() {
            set_error(format!("betti buffer of {cap} entries, need {}", h.betti.len()));
            return OC_BUFFER;
        }
        for (i, &b) in h.betti.iter().enumerate() {
            *betti.add(i) = b as u64;
        }
        OC_OK
    })
}

/// `[x^xdeg]` of a counting series, e.g. `1 + 3t + 2t^2`, to `t`-order `m`.
///
/// # Safety
/// `buf` writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn oc_series_coefficient(
    which: u32,
    m: u32,
    xdeg: u32,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> i32 {
    guard(|| {
        let (m, k) = (m as usize, xdeg as usize);
        let s = try_oc!(match which {
            OC_SERIES_P => p_series(m, k),
            OC_SERIES_O => o_series(m, k),
            OC_SERIES_F => f_series(m, k),
            _ => Err(Error::Parse(format!("unknown series {which}"))),
        });
        copy_out(&operad_cells::genfun::format_t_poly(&s.x_coeff(k)), buf, cap, out_len)
    })
}

/// Traces `k` points (`xy` holds `x_1, y_1, .., x_k, y_k`) with positive
/// `weights` (rescaled to sum to one) and extracts their bar cell.
///
/// # Safety
/// `xy` readable for `2k` doubles, `weights` for `k`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oc_trace(xy: *const f64, weights: *const f64, k: usize, out: *mut *mut OcTrace) -> i32 {
    guard(|| {
        if xy.is_null() || weights.is_null() || out.is_null() {
            return null("trace argument");
        }
        let xy = std::slice::from_raw_parts(xy, 2 * k);
        let w = std::slice::from_raw_parts(weights, k);
        let pts: Vec<Complex64> = xy.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let cfg = try_oc!(Configuration::new(pts));
        let w = try_oc!(weights_from_f64(w));
        let r = try_oc!(extract_cell(&cfg, &w, &Tolerances::default()));
        *out = Box::into_raw(Box::new(OcTrace { inner: r }));
        OC_OK
    })
}

/// Text form of the traced bar cell.
///
/// # Safety
/// `t` from `oc_trace`; `buf` writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn oc_trace_cell(t: *const OcTrace, buf: *mut c_char, cap: usize, out_len: *mut usize) -> i32 {
    guard(|| {
        let Some(t) = t.as_ref() else { return null("trace") };
        copy_out(&t.inner.cell.to_string(), buf, cap, out_len)
    })
}

/// The whole cactus with its arc lengths, e.g. `212 (1/2,1,1/2)`.
///
/// # Safety
/// As for `oc_trace_cell`.
#[no_mangle]
pub unsafe extern "C" fn oc_trace_cactus(t: *const OcTrace, buf: *mut c_char, cap: usize, out_len: *mut usize) -> i32 {
    guard(|| {
        let Some(t) = t.as_ref() else { return null("trace") };
        copy_out(&t.inner.cactus.to_string(), buf, cap, out_len)
    })
}

/// Number of critical points, counted without multiplicity.
///
/// # Safety
/// `t` from `oc_trace`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn oc_trace_critical_count(t: *const OcTrace, out: *mut usize) -> i32 {
    guard(|| {
        let Some(t) = t.as_ref() else { return null("trace") };
        if out.is_null() {
            return null("out");
        }
        *out = t.inner.flow.critical.points.len();
        OC_OK
    })
}

/// # Safety
/// `t` must come from `oc_trace` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oc_trace_free(t: *mut OcTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}
