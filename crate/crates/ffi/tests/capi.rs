use std::ffi::{c_char, CStr, CString};
use std::ptr;

use afie_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

/// Takes ownership of a returned string.
fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { afie_string_free(p) };
    s
}

fn last_error() -> String {
    let p = afie_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

const DOC: &str = r#"{
  "id": "d", "company": "ACME", "period": "2022Q4", "report_type": "10-Q",
  "elements": [
    {"type": "paragraph", "text": "Revenue of ACME for 2022Q4 was $5.000 million."},
    {"type": "table", "rows": [["Item", "Amount"], ["Cash", "1,200"]]}
  ]
}"#;

fn parse_doc() -> *mut AfieDocument {
    let mut doc = ptr::null_mut();
    let json = c(DOC);
    assert_eq!(unsafe { afie_document_parse(json.as_ptr(), &mut doc) }, AfieStatus::Ok, "{}", last_error());
    doc
}

#[test]
fn money_normalization() {
    let mut out = ptr::null_mut();
    let text = c("$65.135 billion");
    assert_eq!(unsafe { afie_money_normalize(text.as_ptr(), 2, &mut out) }, AfieStatus::Ok);
    assert_eq!(take(out), "65,135.00");
    assert!(afie_last_error().is_null());

    let bad = c("sixty");
    assert_eq!(unsafe { afie_money_normalize(bad.as_ptr(), 2, &mut out) }, AfieStatus::Parse);
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_rejected() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { afie_money_normalize(ptr::null(), 2, &mut out) }, AfieStatus::NullArgument);
    let text = c("1");
    assert_eq!(unsafe { afie_money_normalize(text.as_ptr(), 2, ptr::null_mut()) }, AfieStatus::NullArgument);
    unsafe {
        afie_string_free(ptr::null_mut());
        afie_document_free(ptr::null_mut());
        afie_pipeline_free(ptr::null_mut());
    }
}

#[test]
fn document_round_trip_and_errors() {
    let doc = parse_doc();
    assert_eq!(unsafe { afie_document_element_count(doc) }, 2);
    unsafe { afie_document_free(doc) };

    let mut doc = ptr::null_mut();
    let broken = c("{\"id\": ");
    assert_eq!(unsafe { afie_document_parse(broken.as_ptr(), &mut doc) }, AfieStatus::Parse);
    assert!(doc.is_null());
}

#[test]
fn table_serialization() {
    let rows = c(r#"[["a","b"],["1","2"]]"#);
    let mut out = ptr::null_mut();
    let fmt = c("csv");
    assert_eq!(unsafe { afie_table_serialize(rows.as_ptr(), fmt.as_ptr(), &mut out) }, AfieStatus::Ok);
    assert_eq!(take(out), "a,b\n1,2");
    let fmt = c("yaml");
    assert_eq!(
        unsafe { afie_table_serialize(rows.as_ptr(), fmt.as_ptr(), &mut out) },
        AfieStatus::InvalidArgument
    );
}

#[test]
fn reta_and_rpd() {
    let mut ok = false;
    let (truth, pred, level) = (c("100"), c("104.9"), c("5%"));
    assert_eq!(unsafe { afie_reta_correct(truth.as_ptr(), pred.as_ptr(), level.as_ptr(), &mut ok) }, AfieStatus::Ok);
    assert!(ok);
    let level = c("1%");
    unsafe { afie_reta_correct(truth.as_ptr(), pred.as_ptr(), level.as_ptr(), &mut ok) };
    assert!(!ok);
    unsafe { afie_reta_correct(truth.as_ptr(), ptr::null(), level.as_ptr(), &mut ok) };
    assert!(!ok);

    let mut out = ptr::null_mut();
    let (x, y) = (c("0.5"), c("0.25"));
    assert_eq!(unsafe { afie_rpd(x.as_ptr(), y.as_ptr(), 4, &mut out) }, AfieStatus::Ok);
    assert_eq!(take(out), "0.6667");
    let zero = c("0");
    assert_eq!(unsafe { afie_rpd(zero.as_ptr(), zero.as_ptr(), 4, &mut out) }, AfieStatus::Undefined);
}

#[test]
fn mock_pipeline_extracts() {
    let doc = parse_doc();
    let mut pipeline = ptr::null_mut();
    assert_eq!(unsafe { afie_pipeline_new(ptr::null(), &mut pipeline) }, AfieStatus::Ok, "{}", last_error());

    let mut out = ptr::null_mut();
    let (attr, company, time, level) = (c("Revenue"), c("ACME"), c("2022Q4"), c("A_T_C"));
    let status = unsafe {
        afie_pipeline_extract(pipeline, doc, attr.as_ptr(), company.as_ptr(), time.as_ptr(), level.as_ptr(), &mut out)
    };
    assert_eq!(status, AfieStatus::Ok, "{}", last_error());
    let result: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(result["value"], "5.00");

    // A_T_C without a company cannot be completed
    let status = unsafe {
        afie_pipeline_extract(pipeline, doc, attr.as_ptr(), ptr::null(), time.as_ptr(), level.as_ptr(), &mut out)
    };
    assert_eq!(status, AfieStatus::Pipeline);

    assert_eq!(unsafe { afie_pipeline_segment(pipeline, doc, &mut out) }, AfieStatus::Ok);
    let segments: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(segments.as_array().unwrap().len(), 1);

    unsafe {
        afie_pipeline_free(pipeline);
        afie_document_free(doc);
    }
}

#[test]
fn invalid_config_rejected() {
    let mut pipeline = ptr::null_mut();
    let cfg = c("top_k = 0");
    assert_eq!(unsafe { afie_pipeline_new(cfg.as_ptr(), &mut pipeline) }, AfieStatus::InvalidArgument);
    assert!(pipeline.is_null());
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/afie.h");
    for name in [
        "afie_last_error",
        "afie_string_free",
        "afie_document_parse",
        "afie_document_free",
        "afie_table_serialize",
        "afie_money_normalize",
        "afie_reta_correct",
        "afie_rpd",
        "afie_pipeline_new",
        "afie_pipeline_extract",
        "typedef struct AfieDocument AfieDocument",
        "AFIE_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    // target/<profile>/deps/capi-* -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    let archive = lib_dir.join("libafie_ffi.a");
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    // `cargo test` does not rebuild the archive; `cargo build` does
    let modified = |p: &std::path::Path| std::fs::metadata(p).and_then(|m| m.modified()).ok();
    if modified(&archive) < modified(&manifest.join("src/lib.rs")) {
        eprintln!("skipping: {} missing or stale, run `cargo build` first", archive.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("cc is available");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
