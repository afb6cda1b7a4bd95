use std::ffi::{c_char, CStr, CString};
use std::ptr;

use qsopt_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { qsopt_string_free(s) };
    out
}

fn last_error() -> String {
    let p = qsopt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn drug_campaign() -> *mut QsoptCampaign {
    let name = CString::new("drug").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { qsopt_default_config(name.as_ptr(), 8, 24, 5, &mut cfg) }, QsoptStatus::Ok);
    let cfg = CString::new(take(cfg)).unwrap();
    let id = CString::new("ffi").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_new(id.as_ptr(), cfg.as_ptr(), &mut h) }, QsoptStatus::Ok);
    h
}

#[test]
fn ask_tell_through_handles() {
    let h = drug_campaign();
    assert_eq!(unsafe { qsopt_campaign_is_active(h) }, 1);

    let mut model = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_model(h, &mut model) }, QsoptStatus::NotFitted);
    assert!(last_error().contains("not fitted"));
    assert!(model.is_null());

    let drug = CString::new("drug").unwrap();
    for i in 0..8 {
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { qsopt_campaign_suggest(h, &mut s) }, QsoptStatus::Ok);
        let s: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
        let point = CString::new(s["point"].to_string()).unwrap();
        let mut y = 0.0;
        assert_eq!(unsafe { qsopt_oracle_evaluate(drug.as_ptr(), point.as_ptr(), &mut y) }, QsoptStatus::Ok);
        let nonce = CString::new(format!("n{i}")).unwrap();
        let mut appended = false;
        let st = unsafe { qsopt_campaign_observe(h, point.as_ptr(), y, nonce.as_ptr(), false, &mut appended) };
        assert_eq!(st, QsoptStatus::Ok);
        assert!(appended);
        let st = unsafe { qsopt_campaign_observe(h, point.as_ptr(), y, nonce.as_ptr(), false, &mut appended) };
        assert_eq!(st, QsoptStatus::Ok);
        assert!(!appended);
    }
    let mut n = 0;
    assert_eq!(unsafe { qsopt_campaign_runs(h, &mut n) }, QsoptStatus::Ok);
    assert_eq!(n, 8);

    let mut model = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_model(h, &mut model) }, QsoptStatus::Ok);
    let m: serde_json::Value = serde_json::from_str(&take(model)).unwrap();
    assert_eq!(m["latent"].as_array().unwrap().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("c.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { qsopt_campaign_attach(h, path.as_ptr()) }, QsoptStatus::Ok);
    let mut j = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_to_json(h, &mut j) }, QsoptStatus::Ok);
    let live = take(j);

    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_load(path.as_ptr(), &mut h2) }, QsoptStatus::Ok);
    let mut j2 = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_to_json(h2, &mut j2) }, QsoptStatus::Ok);
    assert_eq!(live, take(j2));
    unsafe {
        qsopt_campaign_free(h);
        qsopt_campaign_free(h2);
    }
}

#[test]
fn error_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_new(ptr::null(), ptr::null(), &mut h) }, QsoptStatus::NullArgument);
    let id = CString::new("x").unwrap();
    let bad = CString::new("{\"k\": 3").unwrap();
    assert_eq!(unsafe { qsopt_campaign_new(id.as_ptr(), bad.as_ptr(), &mut h) }, QsoptStatus::Json);
    assert!(h.is_null());
    let missing = CString::new("/nonexistent/dir/c.json").unwrap();
    assert_eq!(unsafe { qsopt_campaign_load(missing.as_ptr(), &mut h) }, QsoptStatus::Io);
    let name = CString::new("nope").unwrap();
    let point = CString::new("{\"x\":[0.5],\"o\":[1]}").unwrap();
    let mut y = 0.0;
    assert_eq!(unsafe { qsopt_oracle_evaluate(name.as_ptr(), point.as_ptr(), &mut y) }, QsoptStatus::InvalidInput);
    assert!(!last_error().is_empty());

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { qsopt_campaign_suggest(ptr::null_mut(), &mut s) }, QsoptStatus::NullArgument);
    assert_eq!(unsafe { qsopt_campaign_is_active(ptr::null()) }, -1);

    let h = drug_campaign();
    let wrong = CString::new("{\"x\":[1,1,0],\"o\":[3,2,1]}").unwrap();
    let st = unsafe { qsopt_campaign_observe(h, wrong.as_ptr(), f64::NAN, ptr::null(), true, ptr::null_mut()) };
    assert_eq!(st, QsoptStatus::InvalidInput);
    unsafe { qsopt_string_free(ptr::null_mut()) };
    let mut n = 0;
    assert_eq!(unsafe { qsopt_campaign_runs(h, &mut n) }, QsoptStatus::Ok);
    assert!(qsopt_last_error().is_null());
    unsafe { qsopt_campaign_free(h) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qsopt.h")).unwrap();
    for f in [
        "qsopt_version",
        "qsopt_last_error",
        "qsopt_string_free",
        "qsopt_campaign_new",
        "qsopt_campaign_load",
        "qsopt_campaign_free",
        "qsopt_campaign_suggest",
        "qsopt_campaign_observe",
        "qsopt_campaign_model",
        "typedef struct QsoptCampaign QsoptCampaign",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let v = unsafe { CStr::from_ptr(qsopt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));

    // compile the header as C when a compiler is around
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .arg(format!("-I{}", concat!(env!("CARGO_MANIFEST_DIR"), "/include")))
        .stdin(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            use std::io::Write;
            c.stdin.take().unwrap().write_all(b"#include \"qsopt.h\"\nint main(void){return qsopt_version()==0;}\n")?;
            c.wait_with_output()
        })
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
