use std::ffi::{c_char, CString};
use std::ptr;

use airspread_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 512];
    let n = unsafe { airspread_last_error(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    buf.truncate(n.min(511));
    String::from_utf8(buf).unwrap()
}

fn quick_config() -> *mut AirspreadConfig {
    let mut config = ptr::null_mut();
    unsafe {
        assert_eq!(airspread_config_default(&mut config), AirspreadStatus::Ok);
        for kv in [
            "grid.cell_size=0.2",
            "time.dt=0.1",
            "time.horizon_minutes=0.1",
            "run.realizations=2",
        ] {
            let kv = CString::new(kv).unwrap();
            assert_eq!(airspread_config_set(config, kv.as_ptr()), AirspreadStatus::Ok);
        }
    }
    config
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { std::ffi::CStr::from_ptr(airspread_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(airspread_config_default(ptr::null_mut()), AirspreadStatus::NullPointer);
        assert_eq!(last_error(), "out is null");
        let mut out = ptr::null_mut();
        assert_eq!(airspread_run_realization(ptr::null(), 0, &mut out), AirspreadStatus::NullPointer);
        assert!(out.is_null());
        airspread_config_free(ptr::null_mut());
        airspread_realization_free(ptr::null_mut());
        airspread_ensemble_free(ptr::null_mut());
    }
}

#[test]
fn config_errors_map_to_status_codes() {
    let config = quick_config();
    unsafe {
        let bad = CString::new("grid.no_such_key=1").unwrap();
        assert_eq!(airspread_config_set(config, bad.as_ptr()), AirspreadStatus::Config);
        assert!(last_error().contains("no_such_key"));

        let mut parsed = ptr::null_mut();
        let broken = CString::new("[grid\ncell_size = ").unwrap();
        assert_eq!(airspread_config_parse(broken.as_ptr(), &mut parsed), AirspreadStatus::Format);
        assert!(parsed.is_null());

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            airspread_config_parse(invalid.as_ptr().cast::<c_char>(), &mut parsed),
            AirspreadStatus::InvalidUtf8
        );

        let mut hash = [0 as c_char; 8];
        assert_eq!(airspread_config_hash(config, hash.as_mut_ptr(), hash.len()), AirspreadStatus::BufferTooSmall);
        let mut hash = [0 as c_char; 17];
        assert_eq!(airspread_config_hash(config, hash.as_mut_ptr(), hash.len()), AirspreadStatus::Ok);
        assert_eq!(hash[16], 0);
        airspread_config_free(config);
    }
}

#[test]
fn last_error_truncates_and_reports_full_length() {
    unsafe {
        assert_eq!(airspread_config_default(ptr::null_mut()), AirspreadStatus::NullPointer);
        let full = airspread_last_error(ptr::null_mut(), 0);
        assert_eq!(full, "out is null".len());
        let mut buf = [1 as c_char; 4];
        assert_eq!(airspread_last_error(buf.as_mut_ptr(), buf.len()), full);
        assert_eq!(buf.map(|c| c as u8), *b"out\0");
    }
}

#[test]
fn realization_round_trip() {
    let config = quick_config();
    unsafe {
        let mut result = ptr::null_mut();
        assert_eq!(airspread_run_realization(config, 0, &mut result), AirspreadStatus::Ok);
        let mut n = 0usize;
        assert_eq!(airspread_realization_sample_count(result, &mut n), AirspreadStatus::Ok);
        assert!(n >= 2);
        let (mut t, mut s, mut e, mut i) = (vec![0.0; n], vec![0u64; n], vec![0u64; n], vec![0u64; n]);
        assert_eq!(
            airspread_realization_series(result, t.as_mut_ptr(), s.as_mut_ptr(), e.as_mut_ptr(), i.as_mut_ptr(), n - 1),
            AirspreadStatus::BufferTooSmall
        );
        assert_eq!(
            airspread_realization_series(result, t.as_mut_ptr(), s.as_mut_ptr(), e.as_mut_ptr(), i.as_mut_ptr(), n),
            AirspreadStatus::Ok
        );
        assert_eq!(t[0], 0.0);
        assert_eq!(i[0], 1);
        let population = s[0] + e[0] + i[0];
        assert!((0..n).all(|k| s[k] + e[k] + i[k] == population));

        let mut index = usize::MAX;
        assert_eq!(airspread_realization_index_agent(result, &mut index), AirspreadStatus::Ok);
        assert!((index as u64) < population);

        let mut ledger = AirspreadLedger::default();
        assert_eq!(airspread_realization_ledger(result, &mut ledger), AirspreadStatus::Ok);
        let accounted = ledger.absorbed + ledger.decayed + ledger.vented + ledger.outflow + ledger.field;
        assert!((ledger.emitted - accounted).abs() <= 1e-9 * ledger.emitted.max(1.0));

        let mut exposed = -1.0;
        assert_eq!(airspread_realization_final_exposed(result, &mut exposed), AirspreadStatus::Ok);
        assert!((0.0..=1.0).contains(&exposed));
        airspread_realization_free(result);
        airspread_config_free(config);
    }
}

#[test]
fn ensemble_round_trip() {
    let config = quick_config();
    unsafe {
        let mut ensemble = ptr::null_mut();
        assert_eq!(airspread_run_ensemble(config, &mut ensemble), AirspreadStatus::Ok);
        let (mut samples, mut count) = (0usize, 0usize);
        assert_eq!(airspread_ensemble_sample_count(ensemble, &mut samples), AirspreadStatus::Ok);
        assert_eq!(airspread_ensemble_realization_count(ensemble, &mut count), AirspreadStatus::Ok);
        assert_eq!(count, 2);
        let mut times = vec![0.0; samples];
        assert_eq!(airspread_ensemble_times(ensemble, times.as_mut_ptr(), samples), AirspreadStatus::Ok);
        let (mut mean, mut std) = (vec![0.0; samples], vec![0.0; samples]);
        assert_eq!(
            airspread_ensemble_series(ensemble, AirspreadCompartment::Susceptible, mean.as_mut_ptr(), std.as_mut_ptr(), samples),
            AirspreadStatus::Ok
        );
        assert!(mean.iter().all(|m| (0.0..=1.0).contains(m)));
        let mut finals = vec![0.0; count];
        assert_eq!(airspread_ensemble_final_exposed(ensemble, finals.as_mut_ptr(), count), AirspreadStatus::Ok);
        airspread_ensemble_free(ensemble);
        airspread_config_free(config);
    }
}

#[test]
fn statistics_match_the_core_crate() {
    let a = [0.12, 0.25, 0.08, 0.31, 0.19];
    let b = [0.22, 0.35, 0.41, 0.18, 0.29, 0.33];
    let mut out = AirspreadTestResult::default();
    unsafe {
        assert_eq!(airspread_welch_t_test(a.as_ptr(), a.len(), b.as_ptr(), b.len(), &mut out), AirspreadStatus::Ok);
    }
    let core = airspread::harness::welch_t_test(&a, &b).unwrap();
    assert_eq!((out.statistic, out.p_value, out.df), (core.statistic, core.p_value, core.df));

    let groups = [a.as_ptr(), b.as_ptr()];
    let lens = [a.len(), b.len()];
    unsafe {
        assert_eq!(airspread_levene_test(groups.as_ptr(), lens.as_ptr(), 2, &mut out), AirspreadStatus::Ok);
        assert_eq!(airspread_welch_t_test(a.as_ptr(), 1, b.as_ptr(), 1, &mut out), AirspreadStatus::InvalidArgument);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/airspread.h");
    let text = std::fs::read_to_string(header).unwrap();
    assert!(text.contains("AirspreadStatus airspread_run_realization("));
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        return;
    };
    assert!(status.success());
}
