use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use nrmab_ffi::*;

const TINY: &str = include_str!("../../core/data/tiny4.json");

fn last_error() -> String {
    let p = nrmab_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny() -> *mut NrmabInstance {
    let json = CString::new(TINY).unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { nrmab_instance_from_json(json.as_ptr(), &mut inst) },
        NrmabStatus::Ok
    );
    inst
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { nrmab_string_free(p) };
    s
}

#[test]
fn instance_round_trips_through_json() {
    let inst = tiny();
    unsafe {
        assert_eq!(nrmab_instance_num_nodes(inst), 4);
        assert_eq!(nrmab_instance_budget(inst), 2);
        let mut out = ptr::null_mut();
        assert_eq!(nrmab_instance_to_json(inst, &mut out), NrmabStatus::Ok);
        let text = take_string(out);
        let again = CString::new(text.clone()).unwrap();
        let mut second = ptr::null_mut();
        assert_eq!(
            nrmab_instance_from_json(again.as_ptr(), &mut second),
            NrmabStatus::Ok
        );
        let mut out2 = ptr::null_mut();
        nrmab_instance_to_json(second, &mut out2);
        assert_eq!(take_string(out2), text);
        nrmab_instance_free(second);
        nrmab_instance_free(inst);
    }
}

#[test]
fn null_and_bad_input_report_status_and_message() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            nrmab_instance_from_json(ptr::null(), &mut inst),
            NrmabStatus::NullPointer
        );
        assert!(last_error().contains("json"));
        let junk = CString::new("{\"nope\": 1}").unwrap();
        assert_eq!(
            nrmab_instance_from_json(junk.as_ptr(), &mut inst),
            NrmabStatus::InvalidArgument
        );
        assert!(inst.is_null());
        assert_eq!(nrmab_instance_num_nodes(ptr::null()), 0);
        nrmab_instance_free(ptr::null_mut());
        nrmab_string_free(ptr::null_mut());
        assert_eq!(
            nrmab_instance_generate(5, 2, 9, 0.9, 0.1, 0, &mut inst),
            NrmabStatus::InvalidArgument
        );
        assert!(last_error().contains("budget"));
    }
}

#[test]
fn step_is_reproducible_and_respects_the_budget() {
    let inst = tiny();
    unsafe {
        let s = [0u8, 1, 0, 0];
        let a = [0u32, 2];
        let mut x = [9u8; 4];
        let mut y = [9u8; 4];
        assert_eq!(
            nrmab_step(inst, s.as_ptr(), 4, a.as_ptr(), 2, 5, 3, x.as_mut_ptr()),
            NrmabStatus::Ok
        );
        assert_eq!(
            nrmab_step(inst, s.as_ptr(), 4, a.as_ptr(), 2, 5, 3, y.as_mut_ptr()),
            NrmabStatus::Ok
        );
        assert_eq!(x, y);
        assert!(x.iter().all(|&b| b <= 1));
        let too_many = [0u32, 1, 2];
        assert_eq!(
            nrmab_step(
                inst,
                s.as_ptr(),
                4,
                too_many.as_ptr(),
                3,
                5,
                3,
                x.as_mut_ptr()
            ),
            NrmabStatus::InvalidArgument
        );
        assert_eq!(
            nrmab_step(inst, s.as_ptr(), 3, a.as_ptr(), 2, 5, 3, x.as_mut_ptr()),
            NrmabStatus::InvalidArgument
        );
        let mut r = 0.0;
        assert_eq!(nrmab_reward(inst, s.as_ptr(), 4, &mut r), NrmabStatus::Ok);
        assert!(r > 0.0);
        nrmab_instance_free(inst);
    }
}

#[test]
fn policy_select_reports_short_buffers() {
    let inst = tiny();
    unsafe {
        let name = CString::new("whittle").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(
            nrmab_policy_new(inst, name.as_ptr(), ptr::null(), 0, &mut p),
            NrmabStatus::Ok
        );
        let s = [0u8; 4];
        let mut buf = [0u32; 4];
        let mut len = 0;
        assert_eq!(
            nrmab_policy_select(p, s.as_ptr(), 4, 0, 0, buf.as_mut_ptr(), 4, &mut len),
            NrmabStatus::Ok
        );
        assert_eq!(len, 2);
        assert!(buf[0] < buf[1]);
        assert_eq!(
            nrmab_policy_select(p, s.as_ptr(), 4, 0, 0, buf.as_mut_ptr(), 1, &mut len),
            NrmabStatus::BufferTooSmall
        );
        assert_eq!(len, 2);
        nrmab_policy_free(p);

        let bad = CString::new("greedy").unwrap();
        assert_eq!(
            nrmab_policy_new(inst, bad.as_ptr(), ptr::null(), 0, &mut p),
            NrmabStatus::InvalidArgument
        );
        assert!(last_error().contains("valid names"));
        nrmab_instance_free(inst);
    }
}

#[test]
fn tabular_learner_over_cap_is_a_cap_error() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            nrmab_instance_generate(30, 40, 3, 0.9, 0.03, 1, &mut inst),
            NrmabStatus::Ok
        );
        let name = CString::new("tabular-qlearn").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(
            nrmab_policy_new(inst, name.as_ptr(), ptr::null(), 0, &mut p),
            NrmabStatus::CapExceeded
        );
        nrmab_instance_free(inst);
    }
}

#[test]
fn evaluate_and_verify_return_documents() {
    let inst = tiny();
    unsafe {
        let cfg = CString::new(
            r#"{"policies":["none","random"],"seeds":[1],"runs_per_seed":4,"horizon":5}"#,
        )
        .unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            nrmab_evaluate(inst, cfg.as_ptr(), &mut out),
            NrmabStatus::Ok
        );
        let summary: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(summary["policies"]["random"]["episodes"], 4);

        let mut report = ptr::null_mut();
        assert_eq!(nrmab_verify(inst, 3, &mut report), NrmabStatus::Ok);
        let reports: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert!(reports
            .as_array()
            .unwrap()
            .iter()
            .all(|r| r["verdict"] != "fail"));
        nrmab_instance_free(inst);
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libnrmab_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or {} missing", lib.display());
        return;
    }
    let exe = tempfile::tempdir().unwrap();
    let bin = exe.path().join("smoke");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("nodes=8 edges=10"), "{text}");
}
