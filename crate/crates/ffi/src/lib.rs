//! C ABI over `smd_scorecard`.
//!
//! Every fallible call returns an [`SmdStatus`]; on failure the message and
//! the `E<code>` number are available from [`smd_last_error_message`] and
//! [`smd_last_error_code`] on the same thread. Handles are opaque and must be
//! released with their `_free` function. Strings returned as `char *` are
//! owned by the caller and released with [`smd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use smd_scorecard::aggregate::verdict;
use smd_scorecard::card::{build_card, render, CardDocument, CardFormat, Manifest};
use smd_scorecard::engine::{evaluate, load_inputs, Inputs, InputPaths};
use smd_scorecard::ingest::{report_to_json, EvalConfig};
use smd_scorecard::model::{Criterion, EmbeddingSet, QualityReport, Thresholds, Verdict};
use smd_scorecard::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Bad config, inputs or arguments; the caller can fix these.
    Invalid = 3,
    /// The report no longer matches its digest.
    ReportChanged = 4,
    Internal = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdVerdict {
    Good = 0,
    Moderate = 1,
    Low = 2,
    NotEvaluated = 3,
}

impl From<Verdict> for SmdVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Good => SmdVerdict::Good,
            Verdict::Moderate => SmdVerdict::Moderate,
            Verdict::Low => SmdVerdict::Low,
            Verdict::NotEvaluated => SmdVerdict::NotEvaluated,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdCriterion {
    Congruence = 0,
    Coverage = 1,
    Constraint = 2,
    Completeness = 3,
    Compliance = 4,
    Comprehension = 5,
    Consistency = 6,
}

impl From<SmdCriterion> for Criterion {
    fn from(c: SmdCriterion) -> Self {
        Criterion::ALL[c as usize]
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdCardFormat {
    Structured = 0,
    Markdown = 1,
    Html = 2,
}

impl From<SmdCardFormat> for CardFormat {
    fn from(f: SmdCardFormat) -> Self {
        match f {
            SmdCardFormat::Structured => CardFormat::Structured,
            SmdCardFormat::Markdown => CardFormat::Markdown,
            SmdCardFormat::Html => CardFormat::Html,
        }
    }
}

/// Parsed evaluation config.
pub struct SmdConfig(EvalConfig);

/// Sealed quality report.
pub struct SmdReport(QualityReport);

/// Built card.
pub struct SmdCard(CardDocument);

struct LastError {
    code: u32,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_last_error(code: u32, message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(LastError { code, message }));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(SmdStatus, u32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ReportChanged { .. } => SmdStatus::ReportChanged,
            e if e.is_validation() => SmdStatus::Invalid,
            _ => SmdStatus::Internal,
        };
        let message = match &e {
            Error::Validation(list) => list.join("\n"),
            other => other.to_string(),
        };
        Failure(status, e.code(), message)
    }
}

fn null(name: &str) -> Failure {
    Failure(SmdStatus::NullArgument, 0, format!("`{name}` is null"))
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmdStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmdStatus::Ok,
        Ok(Err(Failure(status, code, message))) => {
            set_last_error(code, message);
            status
        }
        Err(_) => {
            set_last_error(0, "internal panic".into());
            SmdStatus::Panic
        }
    }
}

unsafe fn required_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SmdStatus::InvalidUtf8, 0, format!("`{name}` is not UTF-8")))
}

unsafe fn optional_str<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        required_str(p, name).map(Some)
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SmdStatus::Internal, 0, "output contains a nul byte".into()))
}

unsafe fn matrix(data: *const f64, rows: usize, dim: usize, name: &str) -> Result<EmbeddingSet, Failure> {
    if data.is_null() {
        return Err(null(name));
    }
    let values = std::slice::from_raw_parts(data, rows * dim).to_vec();
    let ids = (0..rows).map(|i| i.to_string()).collect();
    Ok(EmbeddingSet::new(ids, values, dim)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `E<code>` number of the last failure on this thread, or 0.
#[no_mangle]
pub extern "C" fn smd_last_error_code() -> u32 {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |e| e.code))
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn smd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Verdict for a criterion score under the given thresholds.
#[no_mangle]
pub extern "C" fn smd_verdict(score: f64, good: f64, moderate: f64) -> SmdVerdict {
    verdict(score, Thresholds { good, moderate }).into()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn smd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a TOML config. Relative paths inside it resolve against
/// `base_dir` (NULL for the working directory).
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_config_from_toml(
    toml_text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut SmdConfig,
) -> SmdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = required_str(toml_text, "toml_text")?;
        let base = optional_str(base_dir, "base_dir")?.unwrap_or(".");
        put(out, SmdConfig(EvalConfig::from_toml_str(text, Path::new(base))?));
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle from [`smd_config_from_toml`].
#[no_mangle]
pub unsafe extern "C" fn smd_config_free(config: *mut SmdConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Evaluates files on disk, as the `evaluate` command does. `real`, `table`
/// and `images` may be NULL.
///
/// # Safety
/// `config` must be a live handle; strings NULL or NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn smd_evaluate_files(
    config: *const SmdConfig,
    real: *const c_char,
    synthetic: *const c_char,
    table: *const c_char,
    images: *const c_char,
    out: *mut *mut SmdReport,
) -> SmdStatus {
    guard(|| {
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let real = optional_str(real, "real")?.map(Path::new);
        let synthetic = Path::new(required_str(synthetic, "synthetic")?);
        let table = optional_str(table, "table")?.map(Path::new);
        let images = optional_str(images, "images")?.map(Path::new);
        let inputs = load_inputs(
            &config.0,
            InputPaths {
                real,
                synthetic,
                table,
                images,
            },
        )?;
        put(out, SmdReport(evaluate(inputs, &config.0)?));
        Ok(())
    })
}

/// Evaluates row-major embedding matrices of width `dim`. `real` may be
/// NULL for metrics that need only the synthetic set.
///
/// # Safety
/// `real` (if not NULL) must hold `real_rows * dim` doubles and `synthetic`
/// `synthetic_rows * dim`; `config` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smd_evaluate_embeddings(
    config: *const SmdConfig,
    real: *const f64,
    real_rows: usize,
    synthetic: *const f64,
    synthetic_rows: usize,
    dim: usize,
    out: *mut *mut SmdReport,
) -> SmdStatus {
    guard(|| {
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut inputs = Inputs::new(matrix(synthetic, synthetic_rows, dim, "synthetic")?);
        if !real.is_null() {
            inputs = inputs.with_real(matrix(real, real_rows, dim, "real")?);
        }
        put(out, SmdReport(evaluate(inputs, &config.0)?));
        Ok(())
    })
}

/// Parses a report serialized by [`smd_report_to_json`] or the CLI.
///
/// # Safety
/// `json` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smd_report_from_json(json: *const c_char, out: *mut *mut SmdReport) -> SmdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = required_str(json, "json")?;
        let report: QualityReport = serde_json::from_str(text)
            .map_err(|e| Failure::from(Error::InvalidData(format!("not a quality report: {e}"))))?;
        put(out, SmdReport(report));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` writable. Free the result with
/// [`smd_string_free`].
#[no_mangle]
pub unsafe extern "C" fn smd_report_to_json(report: *const SmdReport, out: *mut *mut c_char) -> SmdStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(report_to_json(&report.0)?)?;
        Ok(())
    })
}

/// Global score and verdict of one criterion. The score is NaN when the
/// criterion was not evaluated.
///
/// # Safety
/// `report` must be a live handle; `score` and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn smd_report_criterion(
    report: *const SmdReport,
    criterion: SmdCriterion,
    score: *mut f64,
    verdict: *mut SmdVerdict,
) -> SmdStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        if score.is_null() || verdict.is_null() {
            return Err(null("score/verdict"));
        }
        let summary = report.0.global.criterion(criterion.into());
        *score = summary.and_then(|s| s.score).unwrap_or(f64::NAN);
        *verdict = summary.map_or(SmdVerdict::NotEvaluated, |s| s.verdict.into());
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn smd_report_free(report: *mut SmdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Builds a card from a TOML manifest and an optional report.
///
/// # Safety
/// `manifest_toml` must be NUL-terminated; `report` NULL or a live handle;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smd_card_build(
    manifest_toml: *const c_char,
    report: *const SmdReport,
    out: *mut *mut SmdCard,
) -> SmdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let manifest = Manifest::from_toml_str(required_str(manifest_toml, "manifest_toml")?)?;
        let report = report.as_ref().map(|r| &r.0);
        put(out, SmdCard(build_card(&manifest, report)?));
        Ok(())
    })
}

/// # Safety
/// `card` must be a live handle; `out` writable. Free the result with
/// [`smd_string_free`].
#[no_mangle]
pub unsafe extern "C" fn smd_card_render(card: *const SmdCard, format: SmdCardFormat, out: *mut *mut c_char) -> SmdStatus {
    guard(|| {
        let card = card.as_ref().ok_or_else(|| null("card"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(render(&card.0, format.into()))?;
        Ok(())
    })
}

/// # Safety
/// `card` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn smd_card_free(card: *mut SmdCard) {
    if !card.is_null() {
        drop(Box::from_raw(card));
    }
}
