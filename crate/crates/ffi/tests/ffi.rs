use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use leap2trend_ffi::*;

fn last_error() -> String {
    let p = l2t_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn numeric_helpers() {
    let mut out = 0.0;
    unsafe {
        let (u, v) = ([1.0, 0.0, 1.0], [2.0, 0.0, 2.0]);
        assert_eq!(l2t_cosine(u.as_ptr(), v.as_ptr(), 3, &mut out), L2tStatus::Ok);
        assert!((out - 1.0).abs() < 1e-12);
        assert!(l2t_last_error_message().is_null());

        let ys = [3.0, 5.0, 7.0, 9.0];
        assert_eq!(l2t_slope(ys.as_ptr(), 4, &mut out), L2tStatus::Ok);
        assert_eq!(out, 2.0);
        assert_eq!(l2t_slope(ys.as_ptr(), 1, &mut out), L2tStatus::InvalidArgument);
        assert!(last_error().contains("two points"));

        let scores = [0.1, 0.4, 0.35, 0.8];
        let has = [1u8, 1, 1, 1];
        let labels = [0u8, 0, 1, 1];
        assert_eq!(l2t_auc(scores.as_ptr(), has.as_ptr(), labels.as_ptr(), 4, &mut out), L2tStatus::Ok);
        assert!((out - 0.75).abs() < 1e-12);
        let one_class = [1u8; 4];
        assert_eq!(
            l2t_auc(scores.as_ptr(), has.as_ptr(), one_class.as_ptr(), 4, &mut out),
            L2tStatus::InvalidArgument
        );

        let mut m = L2tMetrics::default();
        assert_eq!(l2t_zero_rule(6, 4, &mut m), L2tStatus::Ok);
        assert!((m.precision_macro - 0.3).abs() < 1e-12);
        assert!((m.recall_macro - 0.5).abs() < 1e-12);
        assert!((m.f1_macro - 0.375).abs() < 1e-12);
        assert_eq!(l2t_macro_metrics(5, 0, 5, 0, &mut m), L2tStatus::Ok);
        assert_eq!(m.f1_macro, 1.0);
    }
}

#[test]
fn null_and_mismatched_arguments() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(l2t_cosine(ptr::null(), ptr::null(), 2, &mut out), L2tStatus::NullPointer);
        assert!(last_error().contains("u is null"));
        let u = [0.0, 0.0];
        assert_eq!(l2t_cosine(u.as_ptr(), u.as_ptr(), 2, &mut out), L2tStatus::InvalidArgument);
        assert_eq!(l2t_slope(u.as_ptr(), 2, ptr::null_mut()), L2tStatus::NullPointer);
        assert_eq!(l2t_zero_rule(0, 0, ptr::null_mut()), L2tStatus::InvalidArgument);
        l2t_run_free(ptr::null_mut());
        l2t_string_free(ptr::null_mut());
    }
}

#[test]
fn runs_the_pipeline_through_a_handle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = leap2trend::synth::write_fixture(tmp.path(), 0).unwrap();
    let cfg = CString::new(cfg.to_str().unwrap()).unwrap();
    unsafe {
        let missing = CString::new("/no/such/config.toml").unwrap();
        let mut run = ptr::null_mut();
        assert_eq!(l2t_run_open(missing.as_ptr(), 0, &mut run), L2tStatus::Config);
        assert!(run.is_null());

        assert_eq!(l2t_run_open(cfg.as_ptr(), 2, &mut run), L2tStatus::Ok);
        assert!(!run.is_null());
        let mut json = ptr::null_mut();
        assert_eq!(l2t_run_report_json(run, &mut json), L2tStatus::MissingStage);

        let rank = CString::new("rank").unwrap();
        assert_eq!(l2t_run_stage(run, rank.as_ptr()), L2tStatus::MissingStage);
        assert!(last_error().contains("embed") || last_error().contains("ingest"));
        let bogus = CString::new("bogus").unwrap();
        assert_eq!(l2t_run_stage(run, bogus.as_ptr()), L2tStatus::InvalidArgument);

        assert_eq!(l2t_run_all(run), L2tStatus::Ok);
        assert_eq!(l2t_run_report_json(run, &mut json), L2tStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        l2t_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["report"]["f1_macro"].as_f64().unwrap() > v["report"]["zero_rule"]["f1_macro"].as_f64().unwrap());
        l2t_run_free(run);
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/leap2trend.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["l2t_run_open", "l2t_run_all", "l2t_auc", "l2t_zero_rule", "l2t_last_error_message"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping compile check");
        return;
    };
    assert!(cc.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"leap2trend.h\"\nint main(void) { L2tRun *r = 0; L2tMetrics m; \
         return l2t_run_open(\"x\", 0, &r) == L2T_STATUS_OK && l2t_zero_rule(1, 1, &m) == L2T_STATUS_OK; }\n",
    )
    .unwrap();
    let o = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
