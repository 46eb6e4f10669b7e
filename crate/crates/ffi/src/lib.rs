//! C ABI over `manifold-core`.
//!
//! Every entry point returns an [`MfStatus`]; on failure the message is
//! available from [`mf_last_error_message`] on the same thread. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use manifold_core::complementarity::complementarity;
use manifold_core::dataset::{ClassId, Dataset, ModelId};
use manifold_core::divergence::{kl_divergence, to_distribution, DivergenceConfig};
use manifold_core::ingest::load_bundle;
use manifold_core::slicing::{cell_points, quadrant_counts, CellSpec, CoordinateMode, FilterMode, QuadrantCounts};
use manifold_core::Error;

/// Opaque dataset handle.
pub struct MfDataset(Dataset);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    TaskMismatch = 6,
    OutOfRange = 7,
    EmptyInput = 8,
    InvalidArgument = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfFilterMode {
    All = 0,
    Union = 1,
    Gt = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MfQuadrantCounts {
    pub n_q1: usize,
    pub n_q2: usize,
    pub n_q3: usize,
    pub n_q4: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MfStatus {
    match e.code() {
        "io" => MfStatus::Io,
        "parse" | "json" | "row_count_mismatch" => MfStatus::Parse,
        "validation" | "negative_count" => MfStatus::Validation,
        "task_mismatch" => MfStatus::TaskMismatch,
        "instance_out_of_range" => MfStatus::OutOfRange,
        "empty_cell" | "empty_support" | "empty_subset" => MfStatus::EmptyInput,
        _ => MfStatus::InvalidArgument,
    }
}

struct Failure(MfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: MfStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            MfStatus::Panic
        }
    }
}

unsafe fn dataset<'a>(ptr: *const MfDataset) -> Result<&'a Dataset, Failure> {
    ptr.as_ref()
        .map(|d| &d.0)
        .ok_or_else(|| fail(MfStatus::NullPointer, "dataset handle is null"))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| fail(MfStatus::NullPointer, format!("{what} is null")))
}

fn cell(d: &Dataset, x: usize, y: usize, class: usize, mode: MfFilterMode) -> Result<CellSpec, Failure> {
    let mode = match mode {
        MfFilterMode::All => FilterMode::All,
        MfFilterMode::Union => FilterMode::Union,
        MfFilterMode::Gt => FilterMode::Gt,
    };
    let spec = CellSpec::classification(ModelId(x), ModelId(y), ClassId(class), mode);
    spec.check(d)?;
    Ok(spec)
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load and validate a bundle manifest.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_dataset_load(manifest_path: *const c_char, out: *mut *mut MfDataset) -> MfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        if manifest_path.is_null() {
            return Err(fail(MfStatus::NullPointer, "manifest path is null"));
        }
        let path = CStr::from_ptr(manifest_path)
            .to_str()
            .map_err(|_| fail(MfStatus::InvalidUtf8, "manifest path is not UTF-8"))?;
        let d = load_bundle(Path::new(path))?;
        *out = Box::into_raw(Box::new(MfDataset(d)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from [`mf_dataset_load`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mf_dataset_free(ds: *mut MfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of instances; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_dataset_len(ds: *const MfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_dataset_num_models(ds: *const MfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.models.len())
}

/// 0 for regression datasets.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_dataset_num_classes(ds: *const MfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.num_classes())
}

/// Quadrant counts of the classification cell (x, y, class) in confidence coordinates.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_cell_quadrant_counts(
    ds: *const MfDataset,
    x_model: usize,
    y_model: usize,
    class: usize,
    filter_mode: MfFilterMode,
    out: *mut MfQuadrantCounts,
) -> MfStatus {
    guard(|| {
        let d = dataset(ds)?;
        let out = out_ref(out, "out")?;
        let spec = cell(d, x_model, y_model, class, filter_mode)?;
        let c = quadrant_counts(&cell_points(d, &spec, CoordinateMode::Confidence)?);
        *out = MfQuadrantCounts {
            n_q1: c.n_q1,
            n_q2: c.n_q2,
            n_q3: c.n_q3,
            n_q4: c.n_q4,
        };
        Ok(())
    })
}

/// Complementarity score of a set of counts, in [-1, 1].
///
/// # Safety
/// `counts` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_complementarity(counts: *const MfQuadrantCounts, out: *mut f64) -> MfStatus {
    guard(|| {
        let c = counts
            .as_ref()
            .ok_or_else(|| fail(MfStatus::NullPointer, "counts is null"))?;
        let out = out_ref(out, "out")?;
        *out = complementarity(QuadrantCounts::new(c.n_q1, c.n_q2, c.n_q3, c.n_q4))?.value;
        Ok(())
    })
}

/// KL divergence in nats between two non-negative aggregate vectors of
/// length `len`, each smoothed with `alpha` and normalized.
///
/// # Safety
/// `p` and `q` must point to `len` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_kl_divergence(
    p: *const f64,
    q: *const f64,
    len: usize,
    alpha: f64,
    out: *mut f64,
) -> MfStatus {
    guard(|| {
        if p.is_null() || q.is_null() {
            return Err(fail(MfStatus::NullPointer, "input vector is null"));
        }
        let out = out_ref(out, "out")?;
        let cfg = DivergenceConfig {
            smoothing_alpha: alpha,
            ..DivergenceConfig::default()
        };
        cfg.validate()?;
        let support: Vec<String> = (0..len).map(|i| i.to_string()).collect();
        let agg = |v: &[f64]| support.iter().cloned().zip(v.iter().copied()).collect();
        let (p, q) = (std::slice::from_raw_parts(p, len), std::slice::from_raw_parts(q, len));
        let pd = to_distribution(&agg(p), &support, &cfg)?;
        let qd = to_distribution(&agg(q), &support, &cfg)?;
        *out = kl_divergence(&pd, &qd)?;
        Ok(())
    })
}

/// Points of a classification cell as the JSON array served by the API.
/// Release the string with [`mf_string_free`].
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_cell_points_json(
    ds: *const MfDataset,
    x_model: usize,
    y_model: usize,
    class: usize,
    filter_mode: MfFilterMode,
    out: *mut *mut c_char,
) -> MfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let d = dataset(ds)?;
        let spec = cell(d, x_model, y_model, class, filter_mode)?;
        let pts = cell_points(d, &spec, CoordinateMode::Confidence)?;
        let json = serde_json::to_string(&pts).map_err(Error::from)?;
        *out = CString::new(json)
            .map_err(|_| fail(MfStatus::InvalidArgument, "interior NUL in output"))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
