//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_angle, parse_length, ConfigLayer, ResolvedConfig};
use crate::kernel::{calibrate_beta_max, density, CalibrationInputs, TransmissionMode};
use crate::manifest::{sha256_bytes, InputDigest, RunManifest, MANIFEST_FILE};
use crate::metrics::output::{write_curves, write_emergence, write_summary};
use crate::scenario::{sweep_with_table, HalfClassMode, RateTable, RunOutcome, Weekday};
use crate::synthgen::{generate, mixed_schedule, SynthConfig};
use crate::trajectory::{load_observation, save_observation, Activity, InputFormat, Observation};

pub const WORKERS_ENV: &str = "CLASSROOM_ABM_WORKERS";
pub const OUTPUT_FILES: [&str; 3] = ["summary.csv", "curves.csv", "emergence.csv"];

#[derive(Debug, Parser)]
#[command(name = "classroom-abm", version, about = "Classroom SEIR transmission simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the calibrated peak kernel rate and intermediate quantities.
    Calibrate(CalibrateArgs),
    /// Run scenario sweeps over observations and write outcome tables.
    Simulate(SimulateArgs),
    /// Write a synthetic classroom observation.
    Synth(SynthArgs),
    /// Fuse raw hip-tag tracks into a 1 Hz centroid/facing CSV.
    Fuse(FuseArgs),
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 2.0)]
    r0: f64,
    /// Recovery rate, per day.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Average daily close contacts.
    #[arg(long, default_value_t = 10.0)]
    contacts: f64,
    /// Close-contact radius (`m` or `ft` suffix).
    #[arg(long, default_value = "6ft", value_parser = parse_length)]
    contact_radius: f64,
    /// Close-contact time per day, minutes.
    #[arg(long, default_value_t = 15.0)]
    contact_duration: f64,
    /// Kernel distance scale (`m` or `ft` suffix).
    #[arg(long, default_value = "2m", value_parser = parse_length)]
    sigma_r: f64,
    /// Kernel orientation scale (`rad` or `deg` suffix).
    #[arg(long, default_value = "45deg", value_parser = parse_angle)]
    sigma_theta: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Observation CSV (repeatable).
    #[arg(long = "observation", short = 'i', required_unless_present = "manifest")]
    observations: Vec<PathBuf>,
    #[arg(long, default_value = "fused")]
    format: InputFormat,
    /// Output directory.
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Re-run exactly from a previous manifest.
    #[arg(long, conflicts_with_all = ["config", "observations", "scenarios", "reps", "horizon_days", "seed", "vaccine_efficacy", "half_class_mode", "start_weekday", "beta_max", "mode", "r0"])]
    manifest: Option<PathBuf>,
    /// Comma-separated scenario cells, e.g. `full-novax,half-vax`.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<String>>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    horizon_days: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    vaccine_efficacy: Option<f64>,
    #[arg(long, value_parser = parse_half_mode)]
    half_class_mode: Option<HalfClassMode>,
    #[arg(long)]
    start_weekday: Option<Weekday>,
    /// Peak kernel rate per second; calibrated when omitted.
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<TransmissionMode>,
    #[arg(long)]
    r0: Option<f64>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 12)]
    children: usize,
    #[arg(long, default_value_t = 3)]
    teachers: usize,
    /// Room size `WIDTHxHEIGHT` in meters.
    #[arg(long, default_value = "8x8", value_parser = parse_room)]
    room: (f64, f64),
    /// Session length, seconds.
    #[arg(long, default_value_t = 10_800)]
    session_length: u32,
    /// `mixed`, `structured` or `unstructured`.
    #[arg(long, default_value = "mixed")]
    regime: String,
    #[arg(long, default_value_t = 0.2)]
    speed_min: f64,
    #[arg(long, default_value_t = 1.0)]
    speed_max: f64,
    #[arg(long, default_value_t = 4)]
    children_per_cluster: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    class_id: String,
    /// Output CSV; the sidecar is written next to it.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Raw hip-tag CSV.
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// Fused CSV; the sidecar is written next to it.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

fn parse_room(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    Ok((parse_length(w)?, parse_length(h)?))
}

fn parse_mode(s: &str) -> Result<TransmissionMode, String> {
    match s {
        "droplet" => Ok(TransmissionMode::Droplet),
        "airborne" => Ok(TransmissionMode::Airborne),
        _ => Err(format!("unknown mode {s:?}")),
    }
}

fn parse_half_mode(s: &str) -> Result<HalfClassMode, String> {
    match s {
        "resample" => Ok(HalfClassMode::Resample),
        "fixed" => Ok(HalfClassMode::Fixed),
        _ => Err(format!("unknown half-class mode {s:?}")),
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let result = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(&a, &mut stdout.lock()),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Synth(a) => cmd_synth(&a, &mut stdout.lock()),
        Command::Fuse(a) => cmd_fuse(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) | CliError::Runtime(m) => m,
            };
            eprintln!("error: {msg}");
            e.code()
        }
    }
}

fn cmd_calibrate(a: &CalibrateArgs, out: &mut impl Write) -> Result<(), CliError> {
    let inputs = CalibrationInputs {
        r0: a.r0,
        gamma: a.gamma,
        n_contacts: a.contacts,
        contact_radius: a.contact_radius,
        contact_duration: a.contact_duration,
        sigma_r: a.sigma_r,
        sigma_theta: a.sigma_theta,
    };
    let positive = [
        ("contacts", inputs.n_contacts),
        ("contact-radius", inputs.contact_radius),
        ("contact-duration", inputs.contact_duration),
        ("sigma-r", inputs.sigma_r),
        ("sigma-theta", inputs.sigma_theta),
    ];
    if let Some((name, v)) = positive.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
        return Err(CliError::Usage(format!("--{name} must be positive, got {v}")));
    }
    if !(inputs.r0 >= 0.0 && inputs.gamma >= 0.0) {
        return Err(CliError::Usage("--r0 and --gamma must be non-negative".into()));
    }
    let c = calibrate_beta_max(&inputs);
    let lines = [
        ("r0", inputs.r0),
        ("gamma_per_day", inputs.gamma),
        ("n_contacts", inputs.n_contacts),
        ("contact_radius_m", inputs.contact_radius),
        ("contact_duration_min", inputs.contact_duration),
        ("sigma_r_m", inputs.sigma_r),
        ("sigma_theta_rad", inputs.sigma_theta),
        ("rho_daily", c.rho_daily),
        ("beta_bar_daily", c.beta_bar_daily),
        ("beta_max_per_day", c.beta_max_per_day),
        ("beta_max_per_second", c.beta_max_per_second),
    ];
    for (k, v) in lines {
        writeln!(out, "{k}={v}").map_err(runtime)?;
    }
    Ok(())
}

struct Batch {
    config_path: Option<String>,
    resolved: ResolvedConfig,
    inputs: Vec<(PathBuf, InputFormat)>,
}

fn batch_from_flags(a: &SimulateArgs) -> Result<Batch, CliError> {
    let file = match &a.config {
        Some(p) => ConfigLayer::load(p).map_err(runtime)?,
        None => ConfigLayer::default(),
    };
    let mut flags = ConfigLayer {
        scenarios: a.scenarios.clone(),
        vaccine_efficacy: a.vaccine_efficacy,
        horizon_days: a.horizon_days,
        reps: a.reps,
        base_seed: a.seed,
        half_class_mode: a.half_class_mode,
        start_weekday: a.start_weekday,
        ..ConfigLayer::default()
    };
    flags.kernel.beta_max = a.beta_max;
    flags.kernel.mode = a.mode;
    flags.calibration.r0 = a.r0;
    let layer = ConfigLayer::default().merge(&file).merge(&flags);
    let resolved = ResolvedConfig::resolve(&layer).map_err(|e| {
        // A bad value given on the command line is a usage error; one from
        // the file is a data error.
        if ResolvedConfig::resolve(&ConfigLayer::default().merge(&file)).is_ok() {
            CliError::Usage(e.to_string())
        } else {
            runtime(e)
        }
    })?;
    Ok(Batch {
        config_path: a.config.as_ref().map(|p| p.display().to_string()),
        resolved,
        inputs: a.observations.iter().map(|p| (p.clone(), a.format)).collect(),
    })
}

fn batch_from_manifest(path: &Path) -> Result<Batch, CliError> {
    let m = RunManifest::load(path).map_err(CliError::Runtime)?;
    for input in &m.inputs {
        input.verify().map_err(CliError::Runtime)?;
    }
    Ok(Batch {
        config_path: m.config_path,
        resolved: m.resolved,
        inputs: m.inputs.iter().map(|i| (PathBuf::from(&i.path), i.format)).collect(),
    })
}

/// Runs every requested cell on every observation. Outcomes are ordered by
/// cell, then observation, then patient zero and replicate.
pub fn simulate_batch(
    resolved: &ResolvedConfig,
    observations: &[Observation],
    workers: Option<usize>,
) -> Result<Vec<RunOutcome>, String> {
    let params = &resolved.params;
    let tables: Vec<Option<RateTable>> = observations
        .iter()
        .map(|o| (params.kernel.mode == TransmissionMode::Droplet).then(|| RateTable::build(o, &params.kernel)))
        .collect();
    let mut outcomes = Vec::new();
    for cell in &resolved.scenarios {
        let sc = resolved.scenario.with_cell(*cell);
        for (obs, table) in observations.iter().zip(&tables) {
            let runs = sweep_with_table(obs, table.as_ref(), &sc, params, workers)
                .map_err(|e| format!("{} ({cell}): {e}", obs.class_id))?;
            outcomes.extend(runs);
        }
    }
    Ok(outcomes)
}

/// Serializes the three outcome tables in memory.
pub fn render_outputs(outcomes: &[RunOutcome]) -> Result<Vec<(&'static str, Vec<u8>)>, String> {
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    let mut emergence = Vec::new();
    write_summary(&mut summary, outcomes).map_err(|e| e.to_string())?;
    write_curves(&mut curves, outcomes).map_err(|e| e.to_string())?;
    write_emergence(&mut emergence, outcomes).map_err(|e| e.to_string())?;
    Ok(vec![(OUTPUT_FILES[0], summary), (OUTPUT_FILES[1], curves), (OUTPUT_FILES[2], emergence)])
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    if a.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let batch = match &a.manifest {
        Some(m) => batch_from_manifest(m)?,
        None => batch_from_flags(a)?,
    };
    let mut observations = Vec::with_capacity(batch.inputs.len());
    let mut digests = Vec::with_capacity(batch.inputs.len());
    for (path, format) in &batch.inputs {
        observations.push(load_observation(path, *format).map_err(runtime)?);
        digests.push(InputDigest::of(path, *format).map_err(|e| runtime(format!("{}: {e}", path.display())))?);
    }
    let outcomes = simulate_batch(&batch.resolved, &observations, a.workers).map_err(CliError::Runtime)?;
    let files = render_outputs(&outcomes).map_err(CliError::Runtime)?;

    let mut manifest = RunManifest::new(batch.config_path, batch.resolved, digests);
    for (name, bytes) in &files {
        manifest.outputs.insert((*name).to_string(), sha256_bytes(bytes));
    }
    let manifest_bytes = manifest.to_json().into_bytes();

    fs::create_dir_all(&a.out).map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let all = files
        .iter()
        .map(|(n, b)| (*n, b.as_slice()))
        .chain(std::iter::once((MANIFEST_FILE, manifest_bytes.as_slice())));
    for (name, bytes) in all {
        let path = a.out.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(runtime(format!("{}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &mut impl Write) -> Result<(), CliError> {
    let schedule = match a.regime.as_str() {
        "mixed" => mixed_schedule(a.session_length),
        "structured" | "unstructured" => {
            let r = if a.regime == "structured" { Activity::Structured } else { Activity::Unstructured };
            SynthConfig {
                session_length: a.session_length,
                ..SynthConfig::default()
            }
            .with_single_regime(r)
            .schedule
        }
        other => return Err(CliError::Usage(format!("unknown regime {other:?}"))),
    };
    let cfg = SynthConfig {
        class_id: a.class_id.clone(),
        n_children: a.children,
        n_teachers: a.teachers,
        room_width: a.room.0,
        room_height: a.room.1,
        session_length: a.session_length,
        schedule,
        speed_min: a.speed_min,
        speed_max: a.speed_max,
        children_per_cluster: a.children_per_cluster,
        seed: a.seed,
    };
    let obs = generate(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    save_observation(&obs, &a.out).map_err(runtime)?;
    let rho = density(obs.roster.len(), obs.room_area).map_err(runtime)?;
    writeln!(out, "density={rho}").map_err(runtime)?;
    Ok(())
}

fn cmd_fuse(a: &FuseArgs) -> Result<(), CliError> {
    let obs = load_observation(&a.input, InputFormat::Raw).map_err(runtime)?;
    save_observation(&obs, &a.out).map_err(runtime)
}
