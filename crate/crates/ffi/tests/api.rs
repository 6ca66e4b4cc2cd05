use std::ffi::{CStr, CString};
use std::ptr;

use classroom_abm_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; unsafe { cabm_last_error_message(ptr::null_mut(), 0) }];
    unsafe { cabm_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn calibration_defaults() {
    let mut inputs = unsafe { std::mem::zeroed() };
    let mut out = unsafe { std::mem::zeroed::<CabmCalibration>() };
    unsafe {
        assert_eq!(cabm_calibration_inputs_default(&mut inputs), CabmStatus::Ok);
        assert_eq!(cabm_calibrate(&inputs, &mut out), CabmStatus::Ok);
    }
    assert!((out.beta_max_per_day - 8.176054419356268).abs() < 1e-9);
}

#[test]
fn pair_rate_matches_peak_and_tail() {
    let mut kp = unsafe { std::mem::zeroed::<CabmKernelParams>() };
    let mut at0 = 0.0;
    let mut at2 = 0.0;
    unsafe {
        assert_eq!(cabm_kernel_params_default(&mut kp), CabmStatus::Ok);
        assert_eq!(cabm_pair_rate(&kp, 0.0, 0.0, 0.0, &mut at0), CabmStatus::Ok);
        assert_eq!(cabm_pair_rate(&kp, 2.0, 0.0, 0.0, &mut at2), CabmStatus::Ok);
    }
    assert_eq!(at0, kp.beta_max);
    assert!((at2 / at0 - 0.6065306597126334).abs() < 1e-12);
}

#[test]
fn errors_set_status_and_message() {
    cabm_clear_last_error();
    assert_eq!(cabm_last_error_length(), 0);
    let status = unsafe { cabm_calibrate(ptr::null(), ptr::null_mut()) };
    assert_eq!(status, CabmStatus::NullPointer);
    assert!(last_error().contains("null"));

    let mut kp = unsafe { std::mem::zeroed::<CabmKernelParams>() };
    unsafe { cabm_kernel_params_default(&mut kp) };
    kp.sigma_r = -1.0;
    let mut out = 0.0;
    assert_eq!(unsafe { cabm_pair_rate(&kp, 1.0, 0.0, 0.0, &mut out) }, CabmStatus::InvalidArgument);
    assert!(last_error().contains("sigma_r"));

    let missing = CString::new("/nonexistent/obs.csv").unwrap();
    let mut obs = ptr::null_mut();
    assert_eq!(
        unsafe { cabm_observation_load(missing.as_ptr(), CabmInputFormat::Fused, &mut obs) },
        CabmStatus::Io
    );
    assert!(obs.is_null());
}

#[test]
fn truncated_error_message_is_terminated() {
    unsafe { cabm_calibrate(ptr::null(), ptr::null_mut()) };
    let mut buf = [1 as std::ffi::c_char; 4];
    let full = unsafe { cabm_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 4);
    assert_eq!(buf[3], 0);
}

#[test]
fn synth_sweep_and_write() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut cfg = std::mem::zeroed::<CabmSynthConfig>();
        assert_eq!(cabm_synth_config_default(&mut cfg), CabmStatus::Ok);
        cfg.session_length = 300;
        let mut obs = ptr::null_mut();
        assert_eq!(cabm_observation_synth(&cfg, &mut obs), CabmStatus::Ok);
        let mut n = 0;
        cabm_observation_roster_size(obs, &mut n);
        assert_eq!(n, 15);

        let path = CString::new(dir.path().join("obs.csv").to_str().unwrap()).unwrap();
        assert_eq!(cabm_observation_save(obs, path.as_ptr()), CabmStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(cabm_observation_load(path.as_ptr(), CabmInputFormat::Fused, &mut loaded), CabmStatus::Ok);
        let mut len = 0;
        cabm_observation_session_length(loaded, &mut len);
        assert_eq!(len, 300);

        let mut opt = std::mem::zeroed::<CabmSweepOptions>();
        cabm_sweep_options_default(&mut opt);
        opt.reps_per_patient_zero = 2;
        opt.horizon_days = 5;
        opt.scenario = CabmScenario::HalfVax;
        let mut res = ptr::null_mut();
        assert_eq!(cabm_sweep(loaded, ptr::null(), &opt, &mut res), CabmStatus::Ok);
        let mut runs = 0;
        cabm_results_len(res, &mut runs);
        assert_eq!(runs, 30);

        let mut sat = 0.0;
        assert_eq!(cabm_results_saturation(res, 0, &mut sat), CabmStatus::Ok);
        assert!((0.0..=1.0).contains(&sat));
        let mut counts = [0u32; 4];
        assert_eq!(cabm_results_final_counts(res, 0, counts.as_mut_ptr()), CabmStatus::Ok);
        assert_eq!(counts.iter().sum::<u32>(), 7);
        let (mut days, mut present) = (0.0, false);
        assert_eq!(cabm_results_nth_symptomatic(res, 0, 1, &mut days, &mut present), CabmStatus::Ok);
        assert_eq!(present, !days.is_nan());
        assert_eq!(cabm_results_saturation(res, runs, &mut sat), CabmStatus::OutOfRange);
        let mut ne = 0.0;
        assert_eq!(cabm_results_emergence_proportion(res, 3, &mut ne), CabmStatus::Ok);

        let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
        assert_eq!(cabm_results_write(res, out.as_ptr()), CabmStatus::Ok);
        for f in ["summary.csv", "curves.csv", "emergence.csv"] {
            assert!(dir.path().join("out").join(f).exists());
        }
        cabm_results_free(res);
        cabm_observation_free(loaded);
        cabm_observation_free(obs);
        cabm_results_free(ptr::null_mut());
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(cabm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
