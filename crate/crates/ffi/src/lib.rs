//! C ABI over `afie-core`.
//!
//! Every fallible function returns an [`AfieStatus`]; on failure a message is
//! available from [`afie_last_error`] on the same thread. Strings handed out
//! by the library must be released with [`afie_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use afie_core::config::RunConfig;
use afie_core::document::{parse_document, Document, DocumentFormat, Table};
use afie_core::eval::{format_ratio, ratio_from_decimal_str, reta_correct, rpd, RetaLevel};
use afie_core::money::{parse_money, MoneyValue};
use afie_core::pipeline::Pipeline;
use afie_core::prompt::{CompletionLevel, Keyword};
use afie_core::segment::segment_document;
use afie_core::serialize::{serialize_table, SerializationFormat};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfieStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Pipeline = 5,
    Undefined = 6,
    Panic = 99,
}

/// A parsed document.
pub struct AfieDocument(Document);

/// A configured extraction pipeline.
pub struct AfiePipeline(Pipeline);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

struct Failure(AfieStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: AfieStatus, message: impl std::fmt::Display) -> FfiResult<T> {
    Err(Failure(status, message.to_string()))
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> AfieStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AfieStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AfieStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(AfieStatus::NullArgument, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(AfieStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return fail(AfieStatus::NullArgument, "output pointer is null");
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let s = CString::new(s).or_else(|_| fail(AfieStatus::InvalidArgument, "result contains NUL"))?;
    write_out(out, s.into_raw())
}

fn format_arg(format: *const c_char) -> FfiResult<SerializationFormat> {
    match unsafe { opt_str_arg(format, "format") }? {
        None => Ok(SerializationFormat::Plain),
        Some(f) => f.parse().or_else(|e| fail(AfieStatus::InvalidArgument, e)),
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next library call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn afie_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn afie_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a document from its JSON element form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afie_document_parse(json: *const c_char, out: *mut *mut AfieDocument) -> AfieStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let doc = parse_document(json.as_bytes(), DocumentFormat::JsonElements)
            .or_else(|e| fail(AfieStatus::Parse, e))?;
        write_out(out, Box::into_raw(Box::new(AfieDocument(doc))))
    })
}

/// # Safety
/// `doc` must come from [`afie_document_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn afie_document_free(doc: *mut AfieDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Number of elements in `doc`, or 0 for null.
///
/// # Safety
/// `doc` must be null or a live document.
#[no_mangle]
pub unsafe extern "C" fn afie_document_element_count(doc: *const AfieDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.0.elements.len())
}

/// Serializes a table given as a JSON array of rows. `format` is one of
/// `plain`, `csv`, `xml`, `html`; null means `plain`.
///
/// # Safety
/// String arguments must be NUL-terminated or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn afie_table_serialize(
    rows_json: *const c_char,
    format: *const c_char,
    out: *mut *mut c_char,
) -> AfieStatus {
    guard(|| {
        let rows: Vec<Vec<String>> = serde_json::from_str(str_arg(rows_json, "rows_json")?)
            .or_else(|e| fail(AfieStatus::Parse, e))?;
        if rows.is_empty() {
            return fail(AfieStatus::InvalidArgument, "table has no rows");
        }
        let format = format_arg(format)?;
        write_string(out, serialize_table(&Table::new(rows), format))
    })
}

/// Parses a money string and renders it in millions at `precision` places,
/// e.g. `"$65.135 billion"` at 2 gives `"65,135.00"`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afie_money_normalize(
    text: *const c_char,
    precision: u32,
    out: *mut *mut c_char,
) -> AfieStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let amount = parse_money(text).or_else(|e| fail(AfieStatus::Parse, e))?;
        write_string(out, MoneyValue::new(amount, precision).render())
    })
}

/// Whether `prediction` is within `level` (e.g. `"5%"`) of `truth`. A null
/// prediction counts as absent and is never correct.
///
/// # Safety
/// `truth` and `level` must be NUL-terminated; `prediction` may be null.
#[no_mangle]
pub unsafe extern "C" fn afie_reta_correct(
    truth: *const c_char,
    prediction: *const c_char,
    level: *const c_char,
    out: *mut bool,
) -> AfieStatus {
    guard(|| {
        let truth = parse_money(str_arg(truth, "truth")?).or_else(|e| fail(AfieStatus::Parse, e))?;
        let prediction = match opt_str_arg(prediction, "prediction")? {
            Some(p) => Some(parse_money(p).or_else(|e| fail(AfieStatus::Parse, e))?),
            None => None,
        };
        let level: RetaLevel = str_arg(level, "level")?
            .parse()
            .or_else(|e| fail(AfieStatus::InvalidArgument, e))?;
        write_out(out, reta_correct(truth, prediction, &level.tolerance()))
    })
}

/// Relative percentage difference of two accuracies given as decimal strings,
/// rendered as a fraction at `places` decimals.
///
/// # Safety
/// Both inputs must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afie_rpd(
    acc_x: *const c_char,
    acc_y: *const c_char,
    places: u32,
    out: *mut *mut c_char,
) -> AfieStatus {
    guard(|| {
        let x = ratio_from_decimal_str(str_arg(acc_x, "acc_x")?).or_else(|e| fail(AfieStatus::Parse, e))?;
        let y = ratio_from_decimal_str(str_arg(acc_y, "acc_y")?).or_else(|e| fail(AfieStatus::Parse, e))?;
        let r = rpd(&x, &y).or_else(|e| fail(AfieStatus::Undefined, e))?;
        write_string(out, format_ratio(&r, places))
    })
}

/// Builds a pipeline from TOML run configuration. Null means all defaults,
/// which selects the offline mock backend.
///
/// # Safety
/// `config_toml` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afie_pipeline_new(config_toml: *const c_char, out: *mut *mut AfiePipeline) -> AfieStatus {
    guard(|| {
        let config = match opt_str_arg(config_toml, "config_toml")? {
            Some(text) => RunConfig::from_toml(text).or_else(|e| fail(AfieStatus::InvalidArgument, e))?,
            None => RunConfig::default(),
        };
        let pipeline = config.build_pipeline().or_else(|e| fail(AfieStatus::InvalidArgument, e))?;
        write_out(out, Box::into_raw(Box::new(AfiePipeline(pipeline))))
    })
}

/// # Safety
/// `pipeline` must come from [`afie_pipeline_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn afie_pipeline_free(pipeline: *mut AfiePipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Segments `doc` under the pipeline's budget and format; writes a JSON array.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afie_pipeline_segment(
    pipeline: *const AfiePipeline,
    doc: *const AfieDocument,
    out: *mut *mut c_char,
) -> AfieStatus {
    guard(|| {
        let (Some(p), Some(d)) = (pipeline.as_ref(), doc.as_ref()) else {
            return fail(AfieStatus::NullArgument, "pipeline or document is null");
        };
        let segments =
            segment_document(&d.0, &p.0.segmentation_config()).or_else(|e| fail(AfieStatus::Pipeline, e))?;
        write_string(out, serde_json::to_string(&segments).expect("segments serialize"))
    })
}

/// Extracts one attribute; writes the extraction result as JSON. `company`
/// and `time` may be null; `completion` is `A`, `A_T`, `A_C` or `A_T_C`.
///
/// # Safety
/// Handles must be live; strings NUL-terminated or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn afie_pipeline_extract(
    pipeline: *const AfiePipeline,
    doc: *const AfieDocument,
    attribute: *const c_char,
    company: *const c_char,
    time: *const c_char,
    completion: *const c_char,
    out: *mut *mut c_char,
) -> AfieStatus {
    guard(|| {
        let (Some(p), Some(d)) = (pipeline.as_ref(), doc.as_ref()) else {
            return fail(AfieStatus::NullArgument, "pipeline or document is null");
        };
        let level: CompletionLevel = str_arg(completion, "completion")?
            .parse()
            .or_else(|e| fail(AfieStatus::InvalidArgument, e))?;
        let kw = Keyword::new(
            str_arg(attribute, "attribute")?,
            opt_str_arg(company, "company")?.map(str::to_string),
            opt_str_arg(time, "time")?.map(str::to_string),
            level,
        );
        let result = p.0.run_extraction(&d.0, &kw).or_else(|e| fail(AfieStatus::Pipeline, e))?;
        write_string(out, serde_json::to_string(&result).expect("result serializes"))
    })
}
