//! The C ABI exercised from Rust.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use proxcausal_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    pc_string_free(s);
    out
}

fn last_error() -> String {
    let p = pc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

unsafe fn sample(n: usize, seed: u64) -> *mut PcDataset {
    let mut scm = ptr::null_mut();
    assert_eq!(pc_scenario_new(c("synthetic-main").as_ptr(), &mut scm), PcStatus::Ok);
    let mut ds = ptr::null_mut();
    assert_eq!(pc_scm_sample(scm, n, seed, &mut ds), PcStatus::Ok);
    pc_scm_free(scm);
    ds
}

#[test]
fn sampling_and_csv_round_trip() {
    unsafe {
        let ds = sample(200, 3);
        assert_eq!(pc_dataset_rows(ds), 200);
        assert_eq!(pc_dataset_columns(ds), 9);

        let mut text = ptr::null_mut();
        assert_eq!(pc_dataset_to_csv(ds, &mut text), PcStatus::Ok);
        let csv = take(text);
        let mut back = ptr::null_mut();
        assert_eq!(pc_dataset_from_csv(c(&csv).as_ptr(), &mut back), PcStatus::Ok);

        let (mut p1, mut n1, mut p2, mut n2) = (ptr::null(), 0, ptr::null(), 0);
        assert_eq!(pc_dataset_column(ds, c("Y2").as_ptr(), &mut p1, &mut n1), PcStatus::Ok);
        assert_eq!(pc_dataset_column(back, c("Y2").as_ptr(), &mut p2, &mut n2), PcStatus::Ok);
        assert_eq!(n1, 200);
        assert_eq!(std::slice::from_raw_parts(p1, n1), std::slice::from_raw_parts(p2, n2));

        pc_dataset_free(back);
        pc_dataset_free(ds);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut scm = ptr::null_mut();
        assert_eq!(pc_scenario_new(c("nope").as_ptr(), &mut scm), PcStatus::UnknownScenario);
        assert!(scm.is_null());
        assert!(last_error().starts_with("unknown-scenario"));

        assert_eq!(pc_scenario_new(ptr::null(), &mut scm), PcStatus::NullPointer);

        let ds = sample(100, 1);
        let (mut p, mut n) = (ptr::null(), 0);
        assert_eq!(pc_dataset_column(ds, c("Q7").as_ptr(), &mut p, &mut n), PcStatus::UnknownVariable);

        let bad = [0xffu8, 0];
        assert_eq!(pc_dataset_column(ds, bad.as_ptr().cast(), &mut p, &mut n), PcStatus::InvalidUtf8);

        // Success clears the message.
        assert_eq!(pc_dataset_column(ds, c("A1").as_ptr(), &mut p, &mut n), PcStatus::Ok);
        assert!(pc_last_error().is_null());
        pc_dataset_free(ds);

        // Freeing NULL is a no-op.
        pc_dataset_free(ptr::null_mut());
        pc_scm_free(ptr::null_mut());
        pc_graph_free(ptr::null_mut());
        pc_curve_free(ptr::null_mut());
        pc_string_free(ptr::null_mut());
    }
}

#[test]
fn edge_test_and_discovery() {
    unsafe {
        let ds = sample(600, 4);
        let mut r = PcTestResult::default();
        let status = pc_test_edge(
            ds,
            c("A2").as_ptr(),
            c("Y2").as_ptr(),
            c("A1").as_ptr(),
            15,
            8,
            5,
            0.05,
            &mut r,
        );
        assert_eq!(status, PcStatus::Ok);
        assert_eq!(r.dof, 60 - r.design_rank);
        assert_eq!(r.reject, r.p_value < 0.05);

        let mut g = ptr::null_mut();
        assert_eq!(pc_discover(ds, 15, 8, 5, 1.0, PcProxyRule::SmallestOther, &mut g), PcStatus::Ok);
        let (mut ti, mut tj) = (0, 0);
        assert_eq!(pc_graph_shape(g, &mut ti, &mut tj), PcStatus::Ok);
        assert_eq!((ti, tj), (5, 4));
        let mut present = false;
        assert_eq!(pc_graph_edge(g, 4, 3, &mut present), PcStatus::Ok);
        assert!(present);
        assert_eq!(pc_graph_edge(g, 5, 0, &mut present), PcStatus::OutOfRange);
        let mut json = ptr::null_mut();
        assert_eq!(pc_graph_to_json(g, &mut json), PcStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(v["p_values"].as_array().unwrap().len(), 5);
        pc_graph_free(g);
        pc_dataset_free(ds);
    }
}

#[test]
fn truth_graph_proxies_and_estimate() {
    unsafe {
        let mut scm = ptr::null_mut();
        assert_eq!(pc_scenario_new(c("synthetic-main").as_ptr(), &mut scm), PcStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(pc_graph_truth(scm, &mut g), PcStatus::Ok);
        let (mut z, mut w) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(pc_select_proxies(g, c("A3->Y1").as_ptr(), &mut z, &mut w), PcStatus::Ok);
        let (z, w) = (take(z), take(w));
        assert_eq!((z.as_str(), w.as_str()), ("Y3", "A5"));
        pc_graph_free(g);

        let mut ds = ptr::null_mut();
        assert_eq!(pc_scm_sample(scm, 300, 2, &mut ds), PcStatus::Ok);
        let mut curve = ptr::null_mut();
        let status = pc_estimate(
            ds,
            c("A3->Y1").as_ptr(),
            c(&z).as_ptr(),
            c(&w).as_ptr(),
            7,
            -1.0,
            1.0,
            true,
            &mut curve,
        );
        assert_eq!(status, PcStatus::Ok, "{}", last_error());
        assert_eq!(pc_curve_len(curve), 7);
        assert_eq!(pc_curve_dim(curve), 1);
        let (mut dose, mut est) = ([f64::NAN], f64::NAN);
        assert_eq!(pc_curve_point(curve, 6, dose.as_mut_ptr(), &mut est), PcStatus::Ok);
        assert!((dose[0] - 1.0).abs() < 1e-12);
        assert!(est.is_finite());
        assert_eq!(pc_curve_point(curve, 7, dose.as_mut_ptr(), &mut est), PcStatus::OutOfRange);
        let mut json = ptr::null_mut();
        assert_eq!(pc_curve_to_json(curve, &mut json), PcStatus::Ok);
        assert!(take(json).contains("\"estimates\""));
        pc_curve_free(curve);

        let mut truth = f64::NAN;
        let status = pc_scm_ground_truth(scm, c("Y1").as_ptr(), c("A3").as_ptr(), [0.5].as_ptr(), 1, 2000, 1, &mut truth);
        assert_eq!(status, PcStatus::Ok, "{}", last_error());
        assert!(truth.is_finite());

        assert_eq!(pc_estimate(ds, c("A3->Y1").as_ptr(), c(&z).as_ptr(), c(&w).as_ptr(), 0, 0.0, 1.0, true, &mut curve), PcStatus::Precondition);
        pc_dataset_free(ds);
        pc_scm_free(scm);
    }
}

#[test]
fn chi_square_tail() {
    assert!((pc_chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-12);
    assert!(pc_chi_square_sf(1.0, 0).is_nan());
    assert!(pc_chi_square_sf(-1.0, 2).is_nan());
    let v = unsafe { CStr::from_ptr(pc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn benchmark_round_trip() {
    let config = r#"{"scenario":"synthetic-main","n":200,"seed":5,"reps":1,"replicates":100,"targets":["A3->Y1"]}"#;
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(pc_benchmark(c(config).as_ptr(), &mut out), PcStatus::Ok, "{}", last_error());
        let report = take(out);
        let mut again = ptr::null_mut();
        assert_eq!(pc_benchmark(c(&report).as_ptr(), &mut again), PcStatus::Ok);
        assert_eq!(take(again), report);

        assert_eq!(pc_benchmark(c("{\"bogus\":1}").as_ptr(), &mut out), PcStatus::Json, "{}", last_error());
        assert!(last_error().contains("bogus"));
    }
}
