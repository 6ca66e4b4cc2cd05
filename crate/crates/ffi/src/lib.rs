//! C ABI for the classroom simulator.
//!
//! Every fallible function returns a [`CabmStatus`]. On failure the message
//! is kept per thread and can be read with [`cabm_last_error_message`].
//! Handles returned through out-pointers are owned by the caller and must be
//! released with the matching `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use classroom_abm::cli::render_outputs;
use classroom_abm::kernel::{calibrate_beta_max, pair_rate, CalibrationInputs, KernelParams, PairGeometry, TransmissionMode};
use classroom_abm::metrics::{emergence_proportion, nth_symptomatic, saturation};
use classroom_abm::scenario::{sweep, ScenarioCell, ScenarioConfig, SimParams};
use classroom_abm::synthgen::{generate, mixed_schedule, ScheduleBlock, SynthConfig};
use classroom_abm::trajectory::{load_observation, save_observation, Activity, InputFormat, Observation};
use classroom_abm::RunOutcome;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CabmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Simulation = 5,
    OutOfRange = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (CabmStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CabmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CabmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            CabmStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes either null or a valid pointer.
    unsafe { p.as_ref() }.ok_or((CabmStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or((CabmStatus::NullPointer, format!("{name} is null")))
}

fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err((CabmStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null, NUL-terminated per the API contract.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (CabmStatus::InvalidArgument, format!("{name} is not UTF-8")))?;
    Ok(Path::new(s))
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    (CabmStatus::InvalidArgument, e.to_string())
}

/// Length of the last error message including the terminating NUL, or 0.
#[no_mangle]
pub extern "C" fn cabm_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes_with_nul().len()))
}

/// Copies the last error message into `buf` (truncated and NUL-terminated
/// when `len` is too small). Returns the full length including the NUL.
#[no_mangle]
pub unsafe extern "C" fn cabm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: `buf` has room for `len` bytes per the API contract.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn cabm_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cabm_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabmCalibrationInputs {
    pub r0: f64,
    /// Per day.
    pub gamma: f64,
    pub n_contacts: f64,
    pub contact_radius_m: f64,
    pub contact_duration_min: f64,
    pub sigma_r_m: f64,
    pub sigma_theta_rad: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabmCalibration {
    pub rho_daily: f64,
    pub beta_bar_daily: f64,
    pub beta_max_per_day: f64,
    pub beta_max_per_second: f64,
}

#[no_mangle]
pub unsafe extern "C" fn cabm_calibration_inputs_default(out: *mut CabmCalibrationInputs) -> CabmStatus {
    guard(|| {
        let d = CalibrationInputs::default();
        *out_ptr(out, "out")? = CabmCalibrationInputs {
            r0: d.r0,
            gamma: d.gamma,
            n_contacts: d.n_contacts,
            contact_radius_m: d.contact_radius,
            contact_duration_min: d.contact_duration,
            sigma_r_m: d.sigma_r,
            sigma_theta_rad: d.sigma_theta,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cabm_calibrate(inputs: *const CabmCalibrationInputs, out: *mut CabmCalibration) -> CabmStatus {
    guard(|| {
        let i = non_null(inputs, "inputs")?;
        let out = out_ptr(out, "out")?;
        for (name, v) in [
            ("n_contacts", i.n_contacts),
            ("contact_radius_m", i.contact_radius_m),
            ("contact_duration_min", i.contact_duration_min),
            ("sigma_r_m", i.sigma_r_m),
            ("sigma_theta_rad", i.sigma_theta_rad),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(i.r0 >= 0.0 && i.gamma >= 0.0) {
            return Err(invalid("r0 and gamma must be non-negative"));
        }
        let c = calibrate_beta_max(&CalibrationInputs {
            r0: i.r0,
            gamma: i.gamma,
            n_contacts: i.n_contacts,
            contact_radius: i.contact_radius_m,
            contact_duration: i.contact_duration_min,
            sigma_r: i.sigma_r_m,
            sigma_theta: i.sigma_theta_rad,
        });
        *out = CabmCalibration {
            rho_daily: c.rho_daily,
            beta_bar_daily: c.beta_bar_daily,
            beta_max_per_day: c.beta_max_per_day,
            beta_max_per_second: c.beta_max_per_second,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabmKernelParams {
    /// Per second.
    pub beta_max: f64,
    pub sigma_r: f64,
    pub sigma_theta: f64,
    /// Per hour; used only in airborne mode.
    pub lambda_decay: f64,
    pub min_distance: f64,
    pub airborne: bool,
}

impl From<KernelParams> for CabmKernelParams {
    fn from(k: KernelParams) -> Self {
        Self {
            beta_max: k.beta_max,
            sigma_r: k.sigma_r,
            sigma_theta: k.sigma_theta,
            lambda_decay: k.lambda_decay,
            min_distance: k.min_distance,
            airborne: k.mode == TransmissionMode::Airborne,
        }
    }
}

impl CabmKernelParams {
    fn to_core(self) -> Result<KernelParams, Failure> {
        let k = KernelParams {
            beta_max: self.beta_max,
            sigma_r: self.sigma_r,
            sigma_theta: self.sigma_theta,
            lambda_decay: self.lambda_decay,
            mode: if self.airborne { TransmissionMode::Airborne } else { TransmissionMode::Droplet },
            min_distance: self.min_distance,
        };
        k.validate().map_err(invalid)?;
        Ok(k)
    }
}

#[no_mangle]
pub unsafe extern "C" fn cabm_kernel_params_default(out: *mut CabmKernelParams) -> CabmStatus {
    guard(|| {
        *out_ptr(out, "out")? = KernelParams::default().into();
        Ok(())
    })
}

/// Pair rate per second at distance `r` (meters) and facing angles
/// `theta_i`, `theta_j` (radians).
#[no_mangle]
pub unsafe extern "C" fn cabm_pair_rate(
    params: *const CabmKernelParams,
    r: f64,
    theta_i: f64,
    theta_j: f64,
    out: *mut f64,
) -> CabmStatus {
    guard(|| {
        let kp = non_null(params, "params")?.to_core()?;
        let out = out_ptr(out, "out")?;
        if !(r >= 0.0 && r.is_finite() && theta_i.is_finite() && theta_j.is_finite()) {
            return Err(invalid("geometry must be finite with r >= 0"));
        }
        *out = pair_rate(&PairGeometry { r, theta_i, theta_j }, &kp);
        Ok(())
    })
}

/// Opaque observation handle.
pub struct CabmObservation(Observation);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CabmInputFormat {
    Fused = 0,
    Raw = 1,
}

#[no_mangle]
pub unsafe extern "C" fn cabm_observation_load(
    path: *const c_char,
    format: CabmInputFormat,
    out: *mut *mut CabmObservation,
) -> CabmStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_ptr(out, "out")?;
        let format = match format {
            CabmInputFormat::Fused => InputFormat::Fused,
            CabmInputFormat::Raw => InputFormat::Raw,
        };
        let obs = load_observation(path, format).map_err(|e| {
            let status = match e {
                classroom_abm::trajectory::TrajectoryError::Io { .. } => CabmStatus::Io,
                _ => CabmStatus::Data,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(CabmObservation(obs)));
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CabmRegime {
    Mixed = 0,
    Structured = 1,
    Unstructured = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabmSynthConfig {
    pub n_children: usize,
    pub n_teachers: usize,
    pub room_width: f64,
    pub room_height: f64,
    /// Seconds.
    pub session_length: u32,
    pub regime: CabmRegime,
    pub speed_min: f64,
    pub speed_max: f64,
    pub children_per_cluster: usize,
    pub seed: u64,
}

#[no_mangle]
pub unsafe extern "C" fn cabm_synth_config_default(out: *mut CabmSynthConfig) -> CabmStatus {
    guard(|| {
        let d = SynthConfig::default();
        *out_ptr(out, "out")? = CabmSynthConfig {
            n_children: d.n_children,
            n_teachers: d.n_teachers,
            room_width: d.room_width,
            room_height: d.room_height,
            session_length: d.session_length,
            regime: CabmRegime::Mixed,
            speed_min: d.speed_min,
            speed_max: d.speed_max,
            children_per_cluster: d.children_per_cluster,
            seed: d.seed,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cabm_observation_synth(
    config: *const CabmSynthConfig,
    out: *mut *mut CabmObservation,
) -> CabmStatus {
    guard(|| {
        let c = non_null(config, "config")?;
        let out = out_ptr(out, "out")?;
        let single = |regime| {
            (c.session_length > 0)
                .then_some(ScheduleBlock {
                    start_s: 0,
                    end_s: c.session_length,
                    regime,
                })
                .into_iter()
                .collect()
        };
        let schedule = match c.regime {
            CabmRegime::Mixed => mixed_schedule(c.session_length),
            CabmRegime::Structured => single(Activity::Structured),
            CabmRegime::Unstructured => single(Activity::Unstructured),
        };
        let cfg = SynthConfig {
            n_children: c.n_children,
            n_teachers: c.n_teachers,
            room_width: c.room_width,
            room_height: c.room_height,
            session_length: c.session_length,
            schedule,
            speed_min: c.speed_min,
            speed_max: c.speed_max,
            children_per_cluster: c.children_per_cluster,
            seed: c.seed,
            ..SynthConfig::default()
        };
        let obs = generate(&cfg).map_err(invalid)?;
        *out = Box::into_raw(Box::new(CabmObservation(obs)));
        Ok(())
    })
}

/// Writes the fused CSV and its metadata sidecar.
#[no_mangle]
pub unsafe extern "C" fn cabm_observation_save(obs: *const CabmObservation, path: *const c_char) -> CabmStatus {
    guard(|| {
        let obs = non_null(obs, "obs")?;
        let path = path_arg(path, "path")?;
        save_observation(&obs.0, path).map_err(|e| (CabmStatus::Io, e.to_string()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn cabm_observation_roster_size(obs: *const CabmObservation, out: *mut usize) -> CabmStatus {
    guard(|| {
        *out_ptr(out, "out")? = non_null(obs, "obs")?.0.roster.len();
        Ok(())
    })
}

/// Session length in seconds (one frame per second).
#[no_mangle]
pub unsafe extern "C" fn cabm_observation_session_length(
    obs: *const CabmObservation,
    out: *mut usize,
) -> CabmStatus {
    guard(|| {
        *out_ptr(out, "out")? = non_null(obs, "obs")?.0.session_length();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cabm_observation_free(obs: *mut CabmObservation) {
    if !obs.is_null() {
        // SAFETY: `obs` came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(obs) });
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CabmScenario {
    FullNovax = 0,
    FullVax = 1,
    HalfNovax = 2,
    HalfVax = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabmSweepOptions {
    pub scenario: CabmScenario,
    pub reps_per_patient_zero: u32,
    pub horizon_days: u32,
    pub base_seed: u64,
    pub vaccine_efficacy: f64,
    /// 0 uses all available cores.
    pub workers: usize,
}

#[no_mangle]
pub unsafe extern "C" fn cabm_sweep_options_default(out: *mut CabmSweepOptions) -> CabmStatus {
    guard(|| {
        let d = ScenarioConfig::default();
        *out_ptr(out, "out")? = CabmSweepOptions {
            scenario: CabmScenario::FullNovax,
            reps_per_patient_zero: d.reps_per_patient_zero,
            horizon_days: d.horizon_days,
            base_seed: d.base_seed,
            vaccine_efficacy: d.vaccine_efficacy,
            workers: 0,
        };
        Ok(())
    })
}

/// Opaque collection of run outcomes.
pub struct CabmResults(Vec<RunOutcome>);

/// Every roster member as patient zero for `reps_per_patient_zero`
/// replicates. `kernel` may be null for the calibrated defaults.
#[no_mangle]
pub unsafe extern "C" fn cabm_sweep(
    obs: *const CabmObservation,
    kernel: *const CabmKernelParams,
    options: *const CabmSweepOptions,
    out: *mut *mut CabmResults,
) -> CabmStatus {
    guard(|| {
        let obs = non_null(obs, "obs")?;
        let o = non_null(options, "options")?;
        let out = out_ptr(out, "out")?;
        let kernel = if kernel.is_null() {
            KernelParams::default()
        } else {
            non_null(kernel, "kernel")?.to_core()?
        };
        let sc = ScenarioConfig {
            vaccine_efficacy: o.vaccine_efficacy,
            horizon_days: o.horizon_days,
            reps_per_patient_zero: o.reps_per_patient_zero,
            base_seed: o.base_seed,
            ..ScenarioConfig::default()
        }
        .with_cell(ScenarioCell::ALL[o.scenario as usize]);
        let params = SimParams {
            kernel,
            ..SimParams::default()
        };
        let workers = (o.workers > 0).then_some(o.workers);
        let runs = sweep(&obs.0, &sc, &params, workers).map_err(|e| (CabmStatus::Simulation, e.to_string()))?;
        *out = Box::into_raw(Box::new(CabmResults(runs)));
        Ok(())
    })
}

fn run_at<'a>(res: *const CabmResults, index: usize) -> Result<&'a RunOutcome, Failure> {
    let res: &'a CabmResults = non_null(res, "results")?;
    res.0
        .get(index)
        .ok_or((CabmStatus::OutOfRange, format!("index {index} out of range for {} runs", res.0.len())))
}

#[no_mangle]
pub unsafe extern "C" fn cabm_results_len(res: *const CabmResults, out: *mut usize) -> CabmStatus {
    guard(|| {
        *out_ptr(out, "out")? = non_null(res, "results")?.0.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cabm_results_saturation(res: *const CabmResults, index: usize, out: *mut f64) -> CabmStatus {
    guard(|| {
        let run = run_at(res, index)?;
        *out_ptr(out, "out")? = saturation(run);
        Ok(())
    })
}

/// Final `[S, E, I, R]` counts into `out[0..4]`.
#[no_mangle]
pub unsafe extern "C" fn cabm_results_final_counts(res: *const CabmResults, index: usize, out: *mut u32) -> CabmStatus {
    guard(|| {
        let run = run_at(res, index)?;
        if out.is_null() {
            return Err((CabmStatus::NullPointer, "out is null".into()));
        }
        for (k, &c) in run.final_counts.iter().enumerate() {
            // SAFETY: `out` points to four writable values per the API contract.
            unsafe { *out.add(k) = c as u32 };
        }
        Ok(())
    })
}

/// Days to the `n`th symptomatic onset; `*present` is false when it never
/// occurs.
#[no_mangle]
pub unsafe extern "C" fn cabm_results_nth_symptomatic(
    res: *const CabmResults,
    index: usize,
    n: usize,
    out_days: *mut f64,
    out_present: *mut bool,
) -> CabmStatus {
    guard(|| {
        let run = run_at(res, index)?;
        if n == 0 {
            return Err(invalid("n is 1-based"));
        }
        let days = out_ptr(out_days, "out_days")?;
        let present = out_ptr(out_present, "out_present")?;
        match nth_symptomatic(run, n) {
            Some(d) => {
                *days = d;
                *present = true;
            }
            None => {
                *days = f64::NAN;
                *present = false;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cabm_results_emergence_proportion(
    res: *const CabmResults,
    n: usize,
    out: *mut f64,
) -> CabmStatus {
    guard(|| {
        let res = non_null(res, "results")?;
        let out = out_ptr(out, "out")?;
        if n == 0 {
            return Err(invalid("n is 1-based"));
        }
        *out = emergence_proportion(&res.0, n).map_err(|e| (CabmStatus::Data, e.to_string()))?;
        Ok(())
    })
}

/// Writes `summary.csv`, `curves.csv` and `emergence.csv` into `dir`.
#[no_mangle]
pub unsafe extern "C" fn cabm_results_write(res: *const CabmResults, dir: *const c_char) -> CabmStatus {
    guard(|| {
        let res = non_null(res, "results")?;
        let dir = path_arg(dir, "dir")?;
        let files = render_outputs(&res.0).map_err(|e| (CabmStatus::Data, e))?;
        std::fs::create_dir_all(dir).map_err(|e| (CabmStatus::Io, format!("{}: {e}", dir.display())))?;
        for (name, bytes) in files {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| (CabmStatus::Io, format!("{}: {e}", p.display())))?;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cabm_results_free(res: *mut CabmResults) {
    if !res.is_null() {
        // SAFETY: `res` came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(res) });
    }
}
