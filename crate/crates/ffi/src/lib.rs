//! C ABI for leap2trend.
//!
//! Every function returns an [`L2tStatus`]; on failure a message is kept per
//! thread and can be read with [`l2t_last_error_message`]. Strings handed out
//! by the library must be released with [`l2t_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use leap2trend::evaluation::{self, Classification, Confusion};
use leap2trend::pipeline::{Pipeline, PipelineError, RunConfig, Stage};
use leap2trend::ranking;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L2tStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    MissingStage = 4,
    StaleArtifact = 5,
    Data = 6,
    Panic = 7,
}

/// Macro-averaged scores over the "emerging" and "not emerging" classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct L2tMetrics {
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
}

/// A configured pipeline run. Opaque to C.
pub struct L2tRun {
    pipeline: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|c| c != '\0');
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(L2tStatus, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Config(_) => L2tStatus::Config,
            PipelineError::MissingStage { .. } => L2tStatus::MissingStage,
            PipelineError::StaleArtifact(_) => L2tStatus::StaleArtifact,
            _ => L2tStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(L2tStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(L2tStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure or panic, and converts the outcome to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> L2tStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            L2tStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            L2tStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(L2tStatus::Data, "string contains a NUL byte".into()))
}

/// Message for the most recent failure on this thread, or NULL after a success.
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn l2t_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn l2t_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates a TOML run configuration. Relative paths in the file
/// are resolved against its directory.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2t_run_open(config_path: *const c_char, threads: usize, out: *mut *mut L2tRun) -> L2tStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(config_path, "config_path")?;
        let cfg = RunConfig::load(Path::new(path))?;
        let pipeline = Pipeline::new(cfg)?.with_threads(threads);
        out.write(Box::into_raw(Box::new(L2tRun { pipeline })));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`l2t_run_open`] and must not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn l2t_run_free(run: *mut L2tRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Runs one stage by name (`ingest`, `keywords`, `embed`, `rank`, `detect`, `evaluate`).
///
/// # Safety
/// `run` must be a live handle and `stage` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn l2t_run_stage(run: *mut L2tRun, stage: *const c_char) -> L2tStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let stage: Stage = str_arg(stage, "stage")?.parse().map_err(|e: String| invalid(e))?;
        run.pipeline.run_stage(stage)?;
        Ok(())
    })
}

/// Runs every stage in order.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn l2t_run_all(run: *mut L2tRun) -> L2tStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        run.pipeline.run_all()?;
        Ok(())
    })
}

/// The evaluation report of a completed run as JSON. Free with [`l2t_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2t_run_report_json(run: *const L2tRun, out: *mut *mut c_char) -> L2tStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let manifest = run.pipeline.manifest()?;
        if !manifest.stages.contains_key(Stage::Evaluate.name()) {
            return Err(PipelineError::MissingStage {
                stage: "report".into(),
                missing: Stage::Evaluate.name().into(),
            }
            .into());
        }
        let path = run.pipeline.out_dir().join("evaluate/report.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Failure(L2tStatus::Data, format!("{}: {e}", path.display())))?;
        out.write(to_c_string(text)?);
        Ok(())
    })
}

/// Cosine similarity of two vectors of length `len`.
///
/// # Safety
/// `u` and `v` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2t_cosine(u: *const f64, v: *const f64, len: usize, out: *mut f64) -> L2tStatus {
    guard(|| {
        let (u, v) = (slice_arg(u, len, "u")?, slice_arg(v, len, "v")?);
        let c = ranking::cosine(u, v).map_err(|e| invalid(e.to_string()))?;
        write_out(out, c, "out")
    })
}

/// Least-squares slope of `ys` against x = 1..len. Needs `len >= 2`.
///
/// # Safety
/// `ys` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2t_slope(ys: *const f64, len: usize, out: *mut f64) -> L2tStatus {
    guard(|| {
        let ys = slice_arg(ys, len, "ys")?;
        if ys.len() < 2 {
            return Err(invalid("slope needs at least two points"));
        }
        write_out(out, evaluation::ols_slope(ys), "out")
    })
}

/// Area under the ROC curve. `has_score[i] == 0` marks an instance without a
/// score, which ranks below every scored one. Labels are nonzero for positives.
///
/// # Safety
/// All three arrays must hold `len` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2t_auc(
    scores: *const f64,
    has_score: *const u8,
    labels: *const u8,
    len: usize,
    out: *mut f64,
) -> L2tStatus {
    guard(|| {
        let scores = slice_arg(scores, len, "scores")?;
        let has = slice_arg(has_score, len, "has_score")?;
        let labels = slice_arg(labels, len, "labels")?;
        let inst: Vec<(Option<f64>, bool)> = (0..len)
            .map(|i| ((has[i] != 0).then_some(scores[i]), labels[i] != 0))
            .collect();
        let (_, auc) = evaluation::roc_auc(&inst).map_err(|e| invalid(e.to_string()))?;
        write_out(out, auc, "out")
    })
}

fn metrics(c: Confusion) -> L2tMetrics {
    let m = Classification::from_confusion(c, 0);
    L2tMetrics {
        precision_macro: m.precision_macro,
        recall_macro: m.recall_macro,
        f1_macro: m.f1_macro,
    }
}

/// Macro metrics from confusion counts.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2t_macro_metrics(tp: usize, fp: usize, tn: usize, fn_: usize, out: *mut L2tMetrics) -> L2tStatus {
    guard(|| write_out(out, metrics(Confusion { tp, fp, tn, fn_ }), "out"))
}

/// Metrics of the baseline that flags every instance as emerging.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l2t_zero_rule(positives: usize, negatives: usize, out: *mut L2tMetrics) -> L2tStatus {
    guard(|| {
        if positives + negatives == 0 {
            return Err(invalid("no instances"));
        }
        let c = Confusion {
            tp: positives,
            fp: negatives,
            tn: 0,
            fn_: 0,
        };
        write_out(out, metrics(c), "out")
    })
}
