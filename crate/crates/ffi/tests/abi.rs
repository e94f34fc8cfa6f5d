use std::ffi::{CStr, CString};
use std::ptr;

use barcode_grad_ffi::*;

fn filter(json: &str) -> (BgStatus, *mut BgFilter) {
    let text = CString::new(json).unwrap();
    let mut f = ptr::null_mut();
    let s = unsafe { bg_filter_from_json(text.as_ptr(), &mut f) };
    (s, f)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(bg_last_error_message()) }.to_str().unwrap().to_owned()
}

fn bars(b: *const BgBarcode) -> (Vec<(f64, f64)>, Vec<f64>) {
    let (mut nf, mut ni) = (0, 0);
    unsafe {
        assert_eq!(bg_barcode_len(b, &mut nf, &mut ni), BgStatus::Ok);
        let finite = (0..nf)
            .map(|i| {
                let (mut x, mut y) = (0.0, 0.0);
                assert_eq!(bg_barcode_finite(b, i, &mut x, &mut y), BgStatus::Ok);
                (x, y)
            })
            .collect();
        let infinite = (0..ni)
            .map(|i| {
                let mut x = 0.0;
                assert_eq!(bg_barcode_infinite(b, i, &mut x), BgStatus::Ok);
                x
            })
            .collect();
        (finite, infinite)
    }
}

#[test]
fn segment_barcode_through_handles() {
    let (s, f) = filter(r#"{"simplices": [[0, 1]], "values": [0, 1, 2]}"#);
    assert_eq!(s, BgStatus::Ok);
    let mut n = 0;
    unsafe {
        assert_eq!(bg_filter_num_simplices(f, &mut n), BgStatus::Ok);
        assert_eq!(n, 3);
        let mut b = ptr::null_mut();
        assert_eq!(bg_diagram(f, 0, &mut b), BgStatus::Ok);
        assert_eq!(bars(b), (vec![(1.0, 2.0)], vec![0.0]));
        let (mut x, mut y) = (0.0, 0.0);
        assert_eq!(bg_barcode_finite(b, 1, &mut x, &mut y), BgStatus::IndexOutOfRange);
        assert_eq!(bg_diagram(f, 3, &mut b), BgStatus::BadDegree);
        bg_barcode_free(b);
        bg_filter_free(f);
    }
}

#[test]
fn distances_match_hand_values() {
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(bg_barcode_new([0.0].as_ptr(), [2.0].as_ptr(), 1, ptr::null(), 0, &mut a), BgStatus::Ok);
        assert_eq!(bg_barcode_new([0.5].as_ptr(), [2.0].as_ptr(), 1, ptr::null(), 0, &mut b), BgStatus::Ok);
        assert_eq!(bg_barcode_new(ptr::null(), ptr::null(), 0, [0.0].as_ptr(), 1, &mut c), BgStatus::Ok);
        let mut d = 0.0;
        assert_eq!(bg_bottleneck(a, b, &mut d), BgStatus::Ok);
        assert_eq!(d, 0.5);
        assert_eq!(bg_wasserstein(a, b, 1.0, &mut d), BgStatus::Ok);
        assert_eq!(d, 0.5);
        assert_eq!(bg_bottleneck(a, c, &mut d), BgStatus::Ok);
        assert_eq!(d, f64::INFINITY);
        assert_eq!(bg_wasserstein(a, b, -1.0, &mut d), BgStatus::InvalidInput);
        for h in [a, b, c] {
            bg_barcode_free(h);
        }
    }
}

#[test]
fn errors_are_reported() {
    let (s, f) = filter(r#"{"simplices": [[0, 1]], "values": [0, 1, 0.5]}"#);
    assert_eq!(s, BgStatus::NotAFiltration);
    assert!(f.is_null());
    assert!(last_error().contains("not a filtration"));

    let (s, _) = filter("{");
    assert_eq!(s, BgStatus::InvalidInput);

    let mut out = ptr::null_mut();
    let s = unsafe { bg_filter_from_json(ptr::null(), &mut out) };
    assert_eq!(s, BgStatus::NullPointer);

    let mut b = ptr::null_mut();
    let s = unsafe { bg_barcode_new([2.0].as_ptr(), [1.0].as_ptr(), 1, ptr::null(), 0, &mut b) };
    assert_eq!(s, BgStatus::InvalidInput);
    assert!(b.is_null());

    unsafe {
        bg_filter_free(ptr::null_mut());
        bg_barcode_free(ptr::null_mut());
        bg_string_free(ptr::null_mut());
    }
}

#[test]
fn optimize_returns_trace() {
    let config = CString::new(
        r#"{
        "parametrization": {"kind": "raw_filter", "simplices": [[0, 1]], "values": [0, 1, 2]},
        "loss": {"terms": [{"degree": 0, "loss": {"kind": "total_persistence"}}]},
        "optimizer": {"schedule": {"kind": "constant", "rate": 0.1}, "max_iters": 3, "grad_tol": 1e-9, "probe_seed": 0}
    }"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(bg_optimize(config.as_ptr(), &mut out), BgStatus::Ok);
        let trace = CStr::from_ptr(out).to_str().unwrap().to_owned();
        bg_string_free(out);
        let lines: Vec<&str> = trace.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("\"iter\":0"));
    }
    let bad = CString::new(r#"{"parametrization": {}}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { bg_optimize(bad.as_ptr(), &mut out) }, BgStatus::InvalidInput);
    assert!(out.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/barcode_grad.h");
    for name in [
        "bg_last_error_message",
        "bg_filter_from_json",
        "bg_filter_free",
        "bg_filter_num_simplices",
        "bg_diagram",
        "bg_barcode_new",
        "bg_barcode_free",
        "bg_barcode_len",
        "bg_barcode_finite",
        "bg_barcode_infinite",
        "bg_bottleneck",
        "bg_wasserstein",
        "bg_optimize",
        "bg_string_free",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct BgFilter BgFilter;"));
    assert!(header.contains("BG_STATUS_OK = 0"));
}
