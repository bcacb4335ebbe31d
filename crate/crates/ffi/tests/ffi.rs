use std::ffi::{CStr, CString};
use std::ptr;

use pe_ffi::*;

fn last_error() -> String {
    let p = pe_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fock(occ: &[usize]) -> *mut PeState {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pe_state_fock(occ.as_ptr(), occ.len(), &mut h) }, PeStatus::Ok);
    h
}

#[test]
fn hong_ou_mandel_input_activates() {
    let h = fock(&[1, 1]);
    let mut v = 0.0;
    unsafe {
        assert_eq!(pe_activate_balanced(h, &mut v), PeStatus::Ok);
        // sector (1,1) carries probability ½ and negativity ½
        assert!((v - 0.25).abs() < 1e-12);
        assert_eq!(pe_m_pe_f(h, 0, 8, &mut v), PeStatus::Ok);
        assert!((v - 4.0).abs() < 1e-8);
        let mut m = 0usize;
        assert_eq!(pe_state_modes(h, &mut m), PeStatus::Ok);
        assert_eq!(m, 2);
        pe_state_free(h);
    }
}

#[test]
fn json_round_trip_through_handles() {
    let h = fock(&[2, 0, 1]);
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(pe_state_to_json(h, &mut s), PeStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(pe_state_from_json(s, &mut back), PeStatus::Ok);
        let mut s2 = ptr::null_mut();
        assert_eq!(pe_state_to_json(back, &mut s2), PeStatus::Ok);
        assert_eq!(CStr::from_ptr(s), CStr::from_ptr(s2));
        pe_string_free(s);
        pe_string_free(s2);
        pe_state_free(h);
        pe_state_free(back);
    }
}

#[test]
fn errors_are_reported_by_status_and_message() {
    unsafe {
        let mut h = ptr::null_mut();
        let big = [9usize, 9];
        assert_eq!(pe_state_fock(big.as_ptr(), 2, &mut h), PeStatus::Ok);
        let mut v = 0.0;
        assert_eq!(pe_activate_balanced(h, &mut v), PeStatus::Validation);
        assert!(last_error().contains("max_particles"));
        pe_state_free(h);

        assert_eq!(pe_activate_balanced(ptr::null(), &mut v), PeStatus::NullPointer);
        let bad = CString::new("{not json").unwrap();
        assert_eq!(pe_state_from_json(bad.as_ptr(), &mut h), PeStatus::Validation);
        let missing = CString::new("/nonexistent/shots.csv").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(pe_witness_bound(missing.as_ptr(), missing.as_ptr(), 10, 0, &mut out), PeStatus::Io);

        // success clears the message
        assert_eq!(pe_binomial_poisson_distance(10, 0.1, &mut v), PeStatus::Ok);
        assert!(pe_last_error().is_null());
        assert!(v > 0.0 && v <= 0.1);

        let three = fock(&[1, 0, 0]);
        assert_eq!(pe_e_ssr_halves(three, &mut v), PeStatus::Validation);
        pe_state_free(three);
    }
}

#[test]
fn null_frees_are_harmless() {
    unsafe {
        pe_state_free(ptr::null_mut());
        pe_string_free(ptr::null_mut());
    }
    assert!(!unsafe { CStr::from_ptr(pe_version()) }.to_bytes().is_empty());
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/pe_toolkit.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 10);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}
