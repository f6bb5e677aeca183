use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use popaudit::pipeline::{self, AuditConfig};
use popaudit::popularity::Basis;
use popaudit::recommenders::Algorithm;
use popaudit::UserGroup;
use popaudit_ffi::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/mini").join(name)
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> Option<String> {
    let p = popaudit_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn config_text() -> String {
    std::fs::read_to_string(fixture("config.json")).unwrap()
}

fn run_fixture() -> *mut PopauditReport {
    let text = c(&config_text());
    let base = c(fixture("").to_str().unwrap());
    let mut report = ptr::null_mut();
    let s = unsafe { popaudit_audit_run(text.as_ptr(), base.as_ptr(), &mut report) };
    assert_eq!(s, PopauditStatus::Ok, "{:?}", last_error());
    assert!(!report.is_null());
    report
}

#[test]
fn dataset_round_trip() {
    let ratings = c(fixture("ratings.dat").to_str().unwrap());
    let genres = c(fixture("movies.dat").to_str().unwrap());
    let mut data = ptr::null_mut();
    let s = unsafe { popaudit_dataset_load(ratings.as_ptr(), genres.as_ptr(), PopauditFormat::Ml1m, &mut data) };
    assert_eq!(s, PopauditStatus::Ok);
    let mut stats = PopauditStats::default();
    assert_eq!(unsafe { popaudit_dataset_stats(data, &mut stats) }, PopauditStatus::Ok);
    assert_eq!((stats.users, stats.items), (100, 150));
    assert!(last_error().is_none());
    unsafe { popaudit_dataset_free(data) };
    unsafe { popaudit_dataset_free(ptr::null_mut()) };
}

#[test]
fn load_errors_map_to_status_codes() {
    let missing = c("/nonexistent/ratings.dat");
    let genres = c(fixture("movies.dat").to_str().unwrap());
    let mut data = ptr::null_mut();
    let s = unsafe { popaudit_dataset_load(missing.as_ptr(), genres.as_ptr(), PopauditFormat::Ml1m, &mut data) };
    assert_eq!(s, PopauditStatus::Io);
    assert!(data.is_null());
    assert!(last_error().unwrap().contains("nonexistent"));

    let s = unsafe { popaudit_dataset_load(ptr::null(), genres.as_ptr(), PopauditFormat::Ml1m, &mut data) };
    assert_eq!(s, PopauditStatus::NullPointer);
    assert!(last_error().unwrap().contains("ratings_path"));

    let bad = [0xffu8, 0xfe, 0];
    let s = unsafe { popaudit_dataset_load(bad.as_ptr().cast(), genres.as_ptr(), PopauditFormat::Ml1m, &mut data) };
    assert_eq!(s, PopauditStatus::InvalidUtf8);

    let wrong_format = c(fixture("ratings.dat").to_str().unwrap());
    let s = unsafe { popaudit_dataset_load(wrong_format.as_ptr(), genres.as_ptr(), PopauditFormat::Ml100k, &mut data) };
    assert_eq!(s, PopauditStatus::Parse, "{:?}", last_error());
}

#[test]
fn audit_matches_the_rust_api() {
    let report = run_fixture();
    assert_eq!(unsafe { popaudit_report_algorithm_count(report) }, 2);

    let cfg = AuditConfig::from_file(fixture("config.json")).unwrap();
    let expected = pipeline::run_audit(&cfg).unwrap();
    let audit = expected.algorithm(Algorithm::ItemKNN).unwrap().audit().unwrap();

    let name = c("itemknn");
    let mut g = PopauditGroupMetrics::default();
    let s = unsafe {
        popaudit_report_group_metrics(report, name.as_ptr(), PopauditBasis::Item, PopauditGroup::Niche, &mut g)
    };
    assert_eq!(s, PopauditStatus::Ok);
    let want = audit.group(Basis::Item, UserGroup::Niche);
    assert_eq!(g.members, want.members);
    assert_eq!(g.pl, want.pl);
    assert_eq!(g.upd, want.upd);
    assert_eq!(g.mean_user_pl, want.mean_user_pl);

    let mut acc = PopauditAccuracy::default();
    assert_eq!(unsafe { popaudit_report_accuracy(report, name.as_ptr(), &mut acc) }, PopauditStatus::Ok);
    assert_eq!(acc.precision, audit.accuracy.precision);
    assert_eq!(acc.evaluated_users, audit.accuracy.evaluated_users);

    let mut pct = 0.0;
    let s = unsafe { popaudit_report_overlap(report, PopauditGroup::Niche, PopauditGroup::Niche, &mut pct) };
    assert_eq!(s, PopauditStatus::Ok);
    assert_eq!(pct, expected.overlap.get(UserGroup::Niche, UserGroup::Niche));

    let missing = c("BPR");
    let s = unsafe { popaudit_report_accuracy(report, missing.as_ptr(), &mut acc) };
    assert_eq!(s, PopauditStatus::NotFound);
    let unknown = c("DeepFM");
    let s = unsafe { popaudit_report_accuracy(report, unknown.as_ptr(), &mut acc) };
    assert_eq!(s, PopauditStatus::Config);

    unsafe { popaudit_report_free(report) };
}

#[test]
fn report_emits_files_and_json() {
    let report = run_fixture();
    let dir = tempfile::tempdir().unwrap();
    let d = c(dir.path().to_str().unwrap());
    assert_eq!(unsafe { popaudit_report_emit(report, d.as_ptr()) }, PopauditStatus::Ok);
    assert!(dir.path().join("audit.json").exists());
    assert!(dir.path().join("group_metrics_Popular.csv").exists());

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { popaudit_report_to_json(report, &mut json) }, PopauditStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { popaudit_string_free(json) };
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["algorithms"].as_array().unwrap().len(), 2);
    unsafe { popaudit_report_free(report) };
}

#[test]
fn failed_models_and_bad_configs_are_reported() {
    let mut cfg: serde_json::Value = serde_json::from_str(&config_text()).unwrap();
    cfg["algorithms"] = serde_json::json!([
        {"algorithm": "BiasedMF", "params": {"learn_rate": 50.0}},
        {"algorithm": "Popular"}
    ]);
    let text = c(&cfg.to_string());
    let base = c(fixture("").to_str().unwrap());
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { popaudit_audit_run(text.as_ptr(), base.as_ptr(), &mut report) }, PopauditStatus::Ok);
    let name = c("BiasedMF");
    let mut acc = PopauditAccuracy::default();
    assert_eq!(unsafe { popaudit_report_accuracy(report, name.as_ptr(), &mut acc) }, PopauditStatus::ModelFailed);
    assert!(last_error().unwrap().contains("diverged"));
    unsafe { popaudit_report_free(report) };

    cfg["split_ratio"] = serde_json::json!(2.0);
    let text = c(&cfg.to_string());
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { popaudit_audit_run(text.as_ptr(), base.as_ptr(), &mut report) }, PopauditStatus::Config);
    assert!(report.is_null());
}

#[test]
fn math_helpers() {
    let p = [0.5, 0.5, 0.0];
    let q = [0.0, 0.5, 0.5];
    let mut d = 0.0;
    assert_eq!(unsafe { popaudit_jsd(p.as_ptr(), q.as_ptr(), &mut d) }, PopauditStatus::Ok);
    assert!((d - 0.5).abs() < 1e-12);
    assert_eq!(unsafe { popaudit_jsd(p.as_ptr(), p.as_ptr(), &mut d) }, PopauditStatus::Ok);
    assert_eq!(d, 0.0);
    let not_simplex = [0.5, 0.7, 0.0];
    assert_eq!(unsafe { popaudit_jsd(p.as_ptr(), not_simplex.as_ptr(), &mut d) }, PopauditStatus::Config);
    assert_eq!(unsafe { popaudit_jsd(ptr::null(), p.as_ptr(), &mut d) }, PopauditStatus::NullPointer);

    let mut lift = 0.0;
    assert_eq!(unsafe { popaudit_popularity_lift(0.1, 0.15, &mut lift) }, PopauditStatus::Ok);
    assert!((lift - 0.5).abs() < 1e-12);
    assert_eq!(unsafe { popaudit_popularity_lift(0.0, 0.15, &mut lift) }, PopauditStatus::Config);
    assert_eq!(unsafe { popaudit_popularity_lift(0.1, 0.15, ptr::null_mut()) }, PopauditStatus::NullPointer);

    let v = unsafe { CStr::from_ptr(popaudit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_handles_are_rejected() {
    let mut stats = PopauditStats::default();
    assert_eq!(unsafe { popaudit_dataset_stats(ptr::null(), &mut stats) }, PopauditStatus::NullPointer);
    assert_eq!(unsafe { popaudit_report_algorithm_count(ptr::null()) }, 0);
    let d = c("/tmp");
    assert_eq!(unsafe { popaudit_report_emit(ptr::null(), d.as_ptr()) }, PopauditStatus::NullPointer);
    unsafe { popaudit_report_free(ptr::null_mut()) };
    unsafe { popaudit_string_free(ptr::null_mut()) };
}
