use std::ffi::{c_char, CStr, CString};
use std::ptr;

use livinglab::corpus::synth::SiteProfile;
use livinglab::site::Site;
use livinglab_ffi::*;
use serde_json::Value;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
    ll_string_free(s);
    text
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ll_last_error()) }.to_string_lossy().into_owned()
}

const CONFIG: &str = r#"
data_dir = "data"

[[sites]]
site_id = "ss"
synthetic = { profile = "social_science", scale = 40, seed = 2 }
"#;

const DRAFT: &str = r#"{
    "site_id": "ss",
    "task": "dataset_recommendation",
    "baseline_system": "topic-jaccard",
    "candidate_systems": ["shuffled-datasets"],
    "method": "team_draft",
    "seed": 3
}"#;

unsafe fn open(config: &CString) -> *mut LlLab {
    let mut lab = ptr::null_mut();
    assert_eq!(ll_lab_open(config.as_ptr(), &mut lab), LlStatus::Ok, "{}", last_error());
    assert!(!lab.is_null());
    lab
}

#[test]
fn experiment_round_trip_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("lab.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let config = c(config_path.to_str().unwrap());

    unsafe {
        let lab = open(&config);
        let mut id = ptr::null_mut();
        assert_eq!(ll_experiment_create(lab, c(DRAFT).as_ptr(), &mut id), LlStatus::Ok, "{}", last_error());
        let id = c(&take(id));
        assert_eq!(id.to_str().unwrap(), "exp-0001");

        // A draft experiment takes no sessions.
        let mut session = ptr::null_mut();
        let seed = c("no-such-record");
        let status = ll_session_create(lab, id.as_ptr(), ptr::null(), seed.as_ptr(), &mut session);
        assert_eq!(status, LlStatus::Conflict);

        assert_eq!(ll_experiment_start(lab, id.as_ptr()), LlStatus::Ok);
        assert_eq!(ll_experiment_start(lab, id.as_ptr()), LlStatus::Conflict);
        let status = ll_session_create(lab, id.as_ptr(), ptr::null(), seed.as_ptr(), &mut session);
        assert_eq!(status, LlStatus::NotFound, "{}", last_error());
        let both = ll_session_create(lab, id.as_ptr(), seed.as_ptr(), seed.as_ptr(), &mut session);
        assert_eq!(both, LlStatus::InvalidArgument);

        let mut report = ptr::null_mut();
        assert_eq!(ll_report_json(lab, c("exp-0404").as_ptr(), &mut report), LlStatus::NotFound);
        assert!(last_error().contains("exp-0404"));
        ll_lab_free(lab);
    }

    // The same synthetic site supplies a valid seed record.
    let site = Site::generate("ss", SiteProfile::SocialScience, 40, 2).unwrap();
    let seed = c(&site.head_items.queries()[0].query_id);

    unsafe {
        let lab = open(&config);
        let id = c("exp-0001");
        let mut session = ptr::null_mut();
        let status = ll_session_create(lab, id.as_ptr(), ptr::null(), seed.as_ptr(), &mut session);
        assert_eq!(status, LlStatus::Ok, "{}", last_error());
        let created: Value = serde_json::from_str(&take(session)).unwrap();
        let sid = c(created["session_id"].as_str().unwrap());
        assert!(!created["docs"].as_array().unwrap().is_empty());

        let clicks = [0usize];
        assert_eq!(ll_session_feedback(lab, sid.as_ptr(), clicks.as_ptr(), 1), LlStatus::Ok, "{}", last_error());
        assert_eq!(ll_session_feedback(lab, sid.as_ptr(), ptr::null(), 0), LlStatus::Conflict);
        assert_eq!(ll_experiment_stop(lab, id.as_ptr()), LlStatus::Ok);

        let mut report = ptr::null_mut();
        assert_eq!(ll_report_json(lab, id.as_ptr(), &mut report), LlStatus::Ok);
        let report: Value = serde_json::from_str(&take(report)).unwrap();
        let profile = &report["profiles"][0];
        assert_eq!(profile["sessions_with_feedback"], 1);
        assert_eq!(report["state"], "stopped");
        ll_lab_free(lab);
    }
    assert!(dir.path().join("data/snapshot.json").is_file());
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/livinglab.h")).unwrap();
    for symbol in [
        "ll_lab_open", "ll_lab_free", "ll_experiment_create", "ll_session_create",
        "ll_session_feedback", "ll_report_json", "ll_sign_test", "ll_string_free", "ll_last_error",
        "typedef struct LlLab LlLab",
    ] {
        assert!(header.contains(symbol), "{symbol}");
    }
}
