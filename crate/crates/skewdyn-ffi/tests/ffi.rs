use std::ffi::{CStr, CString};
use std::ptr;

use skewdyn_ffi::*;

#[test]
fn fa_eval_and_free() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(skewdyn_map_fa(-1.0, 0.0, &mut m), SkewdynStatus::Ok);
        let mut out = [0.0f64; 4];
        assert_eq!(skewdyn_map_eval(m, 0.0, 1.0, 2.0, 0.0, out.as_mut_ptr()), SkewdynStatus::Ok);
        // (i^2, 4 - i)
        assert_eq!(out, [-1.0, 0.0, 4.0, -1.0]);
        let mut d = 0usize;
        assert_eq!(skewdyn_map_degree(m, &mut d), SkewdynStatus::Ok);
        assert_eq!(d, 2);
        skewdyn_map_free(m);
    }
}

#[test]
fn text_round_trip() {
    let mut m = ptr::null_mut();
    let mut txt = ptr::null_mut();
    unsafe {
        assert_eq!(skewdyn_map_fa(0.5, 0.25, &mut m), SkewdynStatus::Ok);
        assert_eq!(skewdyn_map_to_text(m, &mut txt), SkewdynStatus::Ok);
        let mut m2 = ptr::null_mut();
        assert_eq!(skewdyn_map_from_text(txt, &mut m2), SkewdynStatus::Ok);
        let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
        skewdyn_map_eval(m, 0.3, -0.2, 0.7, 0.1, a.as_mut_ptr());
        skewdyn_map_eval(m2, 0.3, -0.2, 0.7, 0.1, b.as_mut_ptr());
        assert_eq!(a, b);
        skewdyn_string_free(txt);
        skewdyn_map_free(m);
        skewdyn_map_free(m2);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut d = 0usize;
        assert_eq!(skewdyn_map_degree(ptr::null(), &mut d), SkewdynStatus::NullPointer);
        assert_eq!(skewdyn_map_fa(f64::NAN, 0.0, &mut ptr::null_mut()), SkewdynStatus::Precondition);
        let bad = CString::new("[p]\nnot numbers\n").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(skewdyn_map_from_text(bad.as_ptr(), &mut m), SkewdynStatus::Parse);
        let msg = CStr::from_ptr(skewdyn_last_error()).to_str().unwrap();
        assert!(msg.contains("parse"), "{msg}");
        assert_eq!(skewdyn_map_airplane(1, &mut m), SkewdynStatus::Precondition);
        skewdyn_map_free(ptr::null_mut());
        skewdyn_string_free(ptr::null_mut());
    }
}

#[test]
fn certify_report_json() {
    let mut m = ptr::null_mut();
    let mut js = ptr::null_mut();
    unsafe {
        assert_eq!(skewdyn_map_fa(0.0, 0.0, &mut m), SkewdynStatus::Ok);
        assert_eq!(skewdyn_certify_json(m, 100, 7, &mut js), SkewdynStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(js).to_str().unwrap()).unwrap();
        assert_eq!(v["verdict"], "Certified-P2");
        skewdyn_string_free(js);
        skewdyn_map_free(m);
    }
}

#[test]
fn header_lists_entry_points() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/skewdyn.h")).unwrap();
    for f in ["skewdyn_map_fa", "skewdyn_map_free", "skewdyn_certify_json", "skewdyn_chain_json", "skewdyn_string_free", "SKEWDYN_STATUS_NULL_POINTER"] {
        assert!(h.contains(f), "{f} missing from header");
    }
}
