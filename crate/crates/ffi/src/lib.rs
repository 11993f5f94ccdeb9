//! C ABI over `dccc-core`.
//!
//! Every function returns a [`DcccStatus`]; on failure the message is
//! available from [`dccc_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dccc_core::config::{get_key, parse_config, set_key};
use dccc_core::trainer::{pseudo_label, reports_csv, train, train_to_dir, EpochReport, TrainOutcome};
use dccc_core::{DcccError, TrainConfig};
use ndarray::Array2;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Parse = 4,
    Io = 5,
    Numerical = 6,
    Degenerate = 7,
    Contract = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Experiment configuration.
pub struct DcccConfig {
    inner: TrainConfig,
}

/// A finished training run.
pub struct DcccRun {
    outcome: TrainOutcome,
}

/// One epoch's metrics; absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcccEpochReport {
    pub epoch: usize,
    pub eps: f64,
    pub clusters: usize,
    pub outliers: usize,
    pub loss: f64,
    pub nmi: f64,
    pub ari: f64,
    pub intra: f64,
    pub inter: f64,
    pub map: f64,
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

impl From<&EpochReport> for DcccEpochReport {
    fn from(r: &EpochReport) -> Self {
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        DcccEpochReport {
            epoch: r.epoch,
            eps: r.eps,
            clusters: r.clusters,
            outliers: r.outliers,
            loss: v(r.loss),
            nmi: v(r.nmi),
            ari: v(r.ari),
            intra: v(r.intra),
            inter: v(r.inter),
            map: v(r.map),
            r1: v(r.r1),
            r5: v(r.r5),
            r10: v(r.r10),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DcccStatus, String);

impl From<DcccError> for Failure {
    fn from(e: DcccError) -> Self {
        let status = match &e {
            DcccError::Config { .. } => DcccStatus::Config,
            DcccError::Parse { .. } => DcccStatus::Parse,
            DcccError::Numerical(_) => DcccStatus::Numerical,
            DcccError::Contract(_) => DcccStatus::Contract,
            DcccError::Degenerate(_) => DcccStatus::Degenerate,
            DcccError::Io { .. } | DcccError::Json { .. } => DcccStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: DcccStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DcccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DcccStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DcccStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(DcccStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DcccStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(DcccStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(DcccStatus::NullPointer, format!("{name} is null")))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn dccc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dccc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New config holding the defaults.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dccc_config_default(out: *mut *mut DcccConfig) -> DcccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(DcccConfig {
            inner: TrainConfig::default(),
        }));
        Ok(())
    })
}

/// Parses a `key = value` config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dccc_config_from_file(path: *const c_char, out: *mut *mut DcccConfig) -> DcccStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let inner = parse_config(Path::new(path))?;
        *out = Box::into_raw(Box::new(DcccConfig { inner }));
        Ok(())
    })
}

/// Sets one key. The config is left unchanged when the result is invalid.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dccc_config_set(cfg: *mut DcccConfig, key: *const c_char, value: *const c_char) -> DcccStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut next = cfg.inner.clone();
        set_key(&mut next, key, value)?;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// Writes the value of `key` as a NUL-terminated string into `buf`.
/// `needed` (optional) receives the required size including the NUL.
///
/// # Safety
/// `cfg` must come from this library, `key` must be NUL-terminated and
/// `buf` must hold `len` bytes (it may be NULL when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn dccc_config_get(
    cfg: *const DcccConfig,
    key: *const c_char,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> DcccStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let value = get_key(&cfg.inner, key)
            .ok_or_else(|| fail(DcccStatus::Config, format!("invalid config field `{key}`: unknown key")))?;
        let bytes = value.as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = bytes.len() + 1;
        }
        if len < bytes.len() + 1 {
            return Err(fail(DcccStatus::BufferTooSmall, format!("need {} bytes", bytes.len() + 1)));
        }
        if buf.is_null() {
            return Err(fail(DcccStatus::NullPointer, "buf is null"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        *buf.add(bytes.len()) = 0;
        Ok(())
    })
}

/// DBSCAN radius the config's schedule uses at `epoch` (from 0).
///
/// # Safety
/// `cfg` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dccc_config_eps_at(cfg: *const DcccConfig, epoch: usize, out: *mut f64) -> DcccStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        *out_arg(out, "out")? = cfg.inner.schedule.eps_at(epoch);
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn dccc_config_free(cfg: *mut DcccConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs a full training in memory.
///
/// # Safety
/// `cfg` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dccc_train(cfg: *const DcccConfig, out: *mut *mut DcccRun) -> DcccStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        let outcome = train(&cfg.inner)?;
        *out = Box::into_raw(Box::new(DcccRun { outcome }));
        Ok(())
    })
}

/// Trains and writes `reports.csv` and `checkpoint.json` into `dir`.
///
/// # Safety
/// `cfg` must come from this library, `dir` must be NUL-terminated and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dccc_train_to_dir(cfg: *const DcccConfig, dir: *const c_char, out: *mut *mut DcccRun) -> DcccStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let dir = str_arg(dir, "dir")?;
        let out = out_arg(out, "out")?;
        let outcome = train_to_dir(&cfg.inner, Path::new(dir))?;
        *out = Box::into_raw(Box::new(DcccRun { outcome }));
        Ok(())
    })
}

/// Number of epoch reports in a run.
///
/// # Safety
/// `run` must come from this library or be NULL (gives 0).
#[no_mangle]
pub unsafe extern "C" fn dccc_run_num_epochs(run: *const DcccRun) -> usize {
    run.as_ref().map_or(0, |r| r.outcome.reports.len())
}

/// # Safety
/// `run` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dccc_run_report(run: *const DcccRun, epoch: usize, out: *mut DcccEpochReport) -> DcccStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let out = out_arg(out, "out")?;
        let reports = &run.outcome.reports;
        let r = reports.get(epoch).ok_or_else(|| {
            fail(
                DcccStatus::InvalidArgument,
                format!("epoch {epoch} out of range (run has {})", reports.len()),
            )
        })?;
        *out = r.into();
        Ok(())
    })
}

/// Copies the reports CSV into `buf` like [`dccc_config_get`].
///
/// # Safety
/// `run` must come from this library and `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dccc_run_reports_csv(run: *const DcccRun, buf: *mut c_char, len: usize, needed: *mut usize) -> DcccStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let csv = reports_csv(&run.outcome.reports);
        if let Some(n) = needed.as_mut() {
            *n = csv.len() + 1;
        }
        if len < csv.len() + 1 {
            return Err(fail(DcccStatus::BufferTooSmall, format!("need {} bytes", csv.len() + 1)));
        }
        if buf.is_null() {
            return Err(fail(DcccStatus::NullPointer, "buf is null"));
        }
        ptr::copy_nonoverlapping(csv.as_ptr(), buf.cast::<u8>(), csv.len());
        *buf.add(csv.len()) = 0;
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn dccc_run_free(run: *mut DcccRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Clusters `n` row-major feature vectors of length `dim` with kNN-set
/// Jaccard distances and DBSCAN. Rows are L2-normalized first.
/// `labels` receives `n` cluster ids, -1 for outliers.
///
/// # Safety
/// `features` must hold `n * dim` doubles and `labels` `n` slots;
/// `num_clusters` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dccc_cluster_features(
    features: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    eps: f64,
    min_samples: usize,
    labels: *mut i64,
    num_clusters: *mut usize,
) -> DcccStatus {
    guard(|| {
        if features.is_null() || labels.is_null() {
            return Err(fail(DcccStatus::NullPointer, "features or labels is null"));
        }
        if n == 0 || dim == 0 {
            return Err(fail(DcccStatus::InvalidArgument, "n and dim must be positive"));
        }
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| fail(DcccStatus::InvalidArgument, "n * dim overflows"))?;
        let raw = std::slice::from_raw_parts(features, len);
        let mut f = Array2::from_shape_vec((n, dim), raw.to_vec())
            .map_err(|e| fail(DcccStatus::InvalidArgument, e.to_string()))?;
        for (i, mut row) in f.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(fail(DcccStatus::InvalidArgument, format!("row {i} has zero or non-finite norm")));
            }
            row /= norm;
        }
        let pseudo = pseudo_label(&f, eps, min_samples, k)?;
        let out = std::slice::from_raw_parts_mut(labels, n);
        for (slot, a) in out.iter_mut().zip(&pseudo.assignment) {
            *slot = a.map_or(-1, |c| c as i64);
        }
        if let Some(c) = num_clusters.as_mut() {
            *c = pseudo.num_clusters;
        }
        Ok(())
    })
}
