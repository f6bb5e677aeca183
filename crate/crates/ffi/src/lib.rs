//! C ABI over the popaudit library.
//!
//! Every fallible function returns a [`PopauditStatus`] and writes its result
//! through an out-pointer. On failure a description is kept per thread and can
//! be read with [`popaudit_last_error_message`] until the next call on the
//! same thread. Handles are opaque and must be released with their `_free`
//! function; passing null to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;

use popaudit::metrics;
use popaudit::pipeline::{self, AuditConfig, AuditReport, DatasetConfig};
use popaudit::popularity::{Basis, GroupRatios};
use popaudit::{Dataset, Error, UserGroup};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopauditStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    InvalidData = 6,
    Diverged = 7,
    NotFound = 8,
    ModelFailed = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopauditFormat {
    /// `ratings.dat` and `movies.dat` of MovieLens 1M.
    Ml1m = 0,
    /// `u.data` and `u.item` of MovieLens 100K.
    Ml100k = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopauditBasis {
    Item = 0,
    Genre = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopauditGroup {
    Blockbuster = 0,
    Diverse = 1,
    Niche = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PopauditStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub density: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PopauditGroupMetrics {
    pub members: usize,
    pub app: f64,
    pub arp: f64,
    pub pl: f64,
    pub mean_user_pl: f64,
    pub upd: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PopauditAccuracy {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
    pub evaluated_users: usize,
}

/// A loaded rating dataset with genres attached.
pub struct PopauditDataset {
    inner: Dataset,
}

/// The result of a full audit run.
pub struct PopauditReport {
    inner: AuditReport,
}

struct Failure {
    status: PopauditStatus,
    message: String,
}

impl Failure {
    fn new(status: PopauditStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

fn status_of(e: &Error) -> PopauditStatus {
    match e {
        Error::Io { .. } => PopauditStatus::Io,
        Error::Parse { .. } | Error::RatingOutOfRange { .. } | Error::Json(_) => PopauditStatus::Parse,
        Error::EmptyDataset | Error::EmptyProfile(_) | Error::EmptyGroup(_) | Error::TooFew { .. } => {
            PopauditStatus::InvalidData
        }
        Error::InvalidArgument(_) | Error::Config(_) => PopauditStatus::Config,
        Error::Diverged(_) => PopauditStatus::Diverged,
        Error::Stage { source, .. } => status_of(source),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(status_of(&e), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn ffi_call(f: impl FnOnce() -> Result<(), Failure>) -> PopauditStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            PopauditStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {what}"));
            PopauditStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(PopauditStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PopauditStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(PopauditStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(PopauditStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

fn basis(b: PopauditBasis) -> Basis {
    match b {
        PopauditBasis::Item => Basis::Item,
        PopauditBasis::Genre => Basis::Genre,
    }
}

fn group(g: PopauditGroup) -> UserGroup {
    match g {
        PopauditGroup::Blockbuster => UserGroup::Blockbuster,
        PopauditGroup::Diverse => UserGroup::Diverse,
        PopauditGroup::Niche => UserGroup::Niche,
    }
}

fn completed_audit<'a>(report: &'a AuditReport, name: &str) -> Result<&'a pipeline::ModelAudit, Failure> {
    let algorithm = name.parse().map_err(Failure::from)?;
    let outcome = report
        .algorithm(algorithm)
        .ok_or_else(|| Failure::new(PopauditStatus::NotFound, format!("{name} is not part of this audit")))?;
    match &outcome.outcome {
        pipeline::Outcome::Completed(a) => Ok(a),
        pipeline::Outcome::Failed { error } => Err(Failure::new(PopauditStatus::ModelFailed, error.clone())),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn popaudit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next popaudit call on this thread.
#[no_mangle]
pub extern "C" fn popaudit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Load a rating file and its genre file.
///
/// # Safety
/// `ratings_path` and `genres_path` must be NUL-terminated strings and `out`
/// a valid pointer. On success `*out` owns a handle to release with
/// `popaudit_dataset_free`.
#[no_mangle]
pub unsafe extern "C" fn popaudit_dataset_load(
    ratings_path: *const c_char,
    genres_path: *const c_char,
    format: PopauditFormat,
    out: *mut *mut PopauditDataset,
) -> PopauditStatus {
    ffi_call(|| {
        let ratings = str_arg(ratings_path, "ratings_path")?;
        let genres = str_arg(genres_path, "genres_path")?;
        if out.is_null() {
            return Err(Failure::new(PopauditStatus::NullPointer, "out is null"));
        }
        let mut cfg = match format {
            PopauditFormat::Ml1m => DatasetConfig::ml1m(""),
            PopauditFormat::Ml100k => DatasetConfig::ml100k(""),
        };
        cfg.ratings = ratings.into();
        cfg.genres = genres.into();
        let (inner, _) = pipeline::load_dataset(&cfg)?;
        write_out(out, Box::into_raw(Box::new(PopauditDataset { inner })))
    })
}

/// # Safety
/// `dataset` must be null or a handle from `popaudit_dataset_load` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn popaudit_dataset_free(dataset: *mut PopauditDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn popaudit_dataset_stats(dataset: *const PopauditDataset, out: *mut PopauditStats) -> PopauditStatus {
    ffi_call(|| {
        let s = ref_arg(dataset, "dataset")?.inner.stats();
        write_out(
            out,
            PopauditStats {
                users: s.users,
                items: s.items,
                interactions: s.interactions,
                density: s.density,
            },
        )
    })
}

/// Run a full audit from a JSON config document. Relative paths inside the
/// config resolve against `base_dir`, which may be null for the current
/// directory.
///
/// # Safety
/// `config_json` must be a NUL-terminated string, `base_dir` null or a
/// NUL-terminated string and `out` a valid pointer. On success `*out` owns a
/// handle to release with `popaudit_report_free`.
#[no_mangle]
pub unsafe extern "C" fn popaudit_audit_run(
    config_json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut PopauditReport,
) -> PopauditStatus {
    ffi_call(|| {
        let text = str_arg(config_json, "config_json")?;
        let base = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        if out.is_null() {
            return Err(Failure::new(PopauditStatus::NullPointer, "out is null"));
        }
        let config = AuditConfig::from_json(text, Path::new(base))?;
        let inner = pipeline::run_audit(&config)?;
        write_out(out, Box::into_raw(Box::new(PopauditReport { inner })))
    })
}

/// # Safety
/// `report` must be null or a handle from `popaudit_audit_run` that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn popaudit_report_free(report: *mut PopauditReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Write every CSV table, `audit.json` and the text summary into `dir`.
///
/// # Safety
/// `report` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn popaudit_report_emit(report: *const PopauditReport, dir: *const c_char) -> PopauditStatus {
    ffi_call(|| {
        let report = ref_arg(report, "report")?;
        let dir = str_arg(dir, "dir")?;
        pipeline::emit_reports(&report.inner, dir)?;
        Ok(())
    })
}

/// Number of algorithms in the report, including failed ones. Returns 0 for
/// a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn popaudit_report_algorithm_count(report: *const PopauditReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.algorithms.len())
}

/// Group-level popularity metrics of one algorithm. `algorithm` is matched
/// case-insensitively.
///
/// # Safety
/// `report` must be a live handle, `algorithm` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn popaudit_report_group_metrics(
    report: *const PopauditReport,
    algorithm: *const c_char,
    basis_kind: PopauditBasis,
    user_group: PopauditGroup,
    out: *mut PopauditGroupMetrics,
) -> PopauditStatus {
    ffi_call(|| {
        let report = ref_arg(report, "report")?;
        let audit = completed_audit(&report.inner, str_arg(algorithm, "algorithm")?)?;
        let g = audit.group(basis(basis_kind), group(user_group));
        write_out(
            out,
            PopauditGroupMetrics {
                members: g.members,
                app: g.app,
                arp: g.arp,
                pl: g.pl,
                mean_user_pl: g.mean_user_pl,
                upd: g.upd,
            },
        )
    })
}

/// Mean top-10 accuracy of one algorithm.
///
/// # Safety
/// `report` must be a live handle, `algorithm` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn popaudit_report_accuracy(
    report: *const PopauditReport,
    algorithm: *const c_char,
    out: *mut PopauditAccuracy,
) -> PopauditStatus {
    ffi_call(|| {
        let report = ref_arg(report, "report")?;
        let a = completed_audit(&report.inner, str_arg(algorithm, "algorithm")?)?.accuracy;
        write_out(
            out,
            PopauditAccuracy {
                precision: a.precision,
                recall: a.recall,
                ndcg: a.ndcg,
                evaluated_users: a.evaluated_users,
            },
        )
    })
}

/// Percentage of users in `item_group` (item basis) that fall into
/// `genre_group` (genre basis).
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn popaudit_report_overlap(
    report: *const PopauditReport,
    item_group: PopauditGroup,
    genre_group: PopauditGroup,
    out: *mut f64,
) -> PopauditStatus {
    ffi_call(|| {
        let report = ref_arg(report, "report")?;
        write_out(out, report.inner.overlap.get(group(item_group), group(genre_group)))
    })
}

/// Serialise the report as the JSON document written to `audit.json`. The
/// string must be released with `popaudit_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn popaudit_report_to_json(report: *const PopauditReport, out: *mut *mut c_char) -> PopauditStatus {
    ffi_call(|| {
        let report = ref_arg(report, "report")?;
        let text = serde_json::to_string(&report.inner).map_err(|e| Failure::from(Error::from(e)))?;
        let c = CString::new(text).map_err(|e| Failure::new(PopauditStatus::Parse, e.to_string()))?;
        write_out(out, c.into_raw())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn popaudit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Jensen-Shannon divergence in bits between two Head/Mid/Tail ratio vectors.
///
/// # Safety
/// `p` and `q` must each point to 3 readable doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn popaudit_jsd(p: *const f64, q: *const f64, out: *mut f64) -> PopauditStatus {
    ffi_call(|| {
        if p.is_null() || q.is_null() {
            return Err(Failure::new(PopauditStatus::NullPointer, "ratio vector is null"));
        }
        let p = GroupRatios(std::slice::from_raw_parts(p, 3).try_into().unwrap());
        let q = GroupRatios(std::slice::from_raw_parts(q, 3).try_into().unwrap());
        write_out(out, metrics::jsd(&p, &q)?)
    })
}

/// `(arp - app) / app`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn popaudit_popularity_lift(app: f64, arp: f64, out: *mut f64) -> PopauditStatus {
    ffi_call(|| write_out(out, metrics::popularity_lift(app, arp)?))
}
