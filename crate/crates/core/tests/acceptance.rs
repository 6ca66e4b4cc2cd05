//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The process exits non-zero when a criterion fails that is not listed in
//! `DOCUMENTED_FAILURES` (see README, "Acceptance status").

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use classroom_abm::epidemic::{sample_incubation, EpidemicState, SimRng};
use classroom_abm::geometry::Vec2;
use classroom_abm::kernel::{clamped_geometry, pair_rate, relative_geometry, KernelParams, PairGeometry};
use classroom_abm::metrics::{emergence_proportion, first_symptomatic_person, saturation};
use classroom_abm::scenario::{
    build_calendar, run_simulation, run_simulation_with_table, sweep, RateTable, ScenarioCell, ScenarioConfig, SimParams, Weekday,
};
use classroom_abm::synthgen::{generate, SynthConfig};
use classroom_abm::trajectory::{Observation, Person, Pose, Role, TrajectoryFrame};
use classroom_abm::{DiseaseParams, RunOutcome};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};

/// Criteria expected to fail, with the reason printed next to the FAIL line.
const DOCUMENTED_FAILURES: &[(u32, &str)] = &[(
    5,
    "share is bounded by the symptomatic probability and reaches 0.75 only without secondary cases",
)];

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn check(id: u32, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Verdict {
    check_within(id, name, None, f)
}

/// Runs a criterion and fails it when it exceeds `budget`.
fn check_within(id: u32, name: &'static str, budget: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (mut pass, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            pass = false;
            detail.push_str(&format!("; over the {:.0?} budget", b));
        }
    }
    let v = Verdict {
        id,
        name,
        pass,
        detail,
        elapsed,
    };
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {}. {} ({:.1?}): {}", v.id, v.name, v.elapsed, v.detail);
    if !v.pass {
        if let Some((_, why)) = DOCUMENTED_FAILURES.iter().find(|(i, _)| *i == v.id) {
            println!("       documented failure: {why}");
        }
    }
    v
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_classroom-abm")
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn key(out: &str, k: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{k}=")))
        .unwrap_or_else(|| panic!("missing {k}"))
        .parse()
        .unwrap()
}

fn binomial_3sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn c1_calibration() -> (bool, String) {
    let (code, out) = cli(&["calibrate"]);
    let b = key(&out, "beta_max_per_day");
    let oracle = 8.176054419356268;
    let pass = code == 0 && (b - oracle).abs() <= 1e-9 * oracle && (b - 8.18).abs() <= 0.09;
    (pass, format!("beta_max = {b}/day (oracle {oracle}, target 8.18 +/- 0.09)"))
}

fn c2_kernel() -> (bool, String) {
    let kp = KernelParams::default();
    let at = |r, ti, tj| pair_rate(&PairGeometry { r, theta_i: ti, theta_j: tj }, &kp);
    let origin_exact = at(0.0, 0.0, 0.0) == kp.beta_max;
    let ratio = at(2.0, 0.0, 0.0) / kp.beta_max;
    let ratio_ok = (ratio - 0.6065306597126334).abs() <= 1e-12;

    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let coord = -10.0..10.0f64;
    let ang = -PI..PI;
    let symmetry = runner
        .run(
            &(coord.clone(), coord.clone(), ang.clone(), coord.clone(), coord, ang),
            |(xi, yi, ai, xj, yj, aj)| {
                let (pi, pj) = (Vec2::new(xi, yi), Vec2::new(xj, yj));
                prop_assume!(pi.distance(pj) > 1e-6);
                let (fi, fj) = (Vec2::from_angle(ai), Vec2::from_angle(aj));
                let a = pair_rate(&relative_geometry(pi, fi, pj, fj).unwrap(), &kp);
                let b = pair_rate(&relative_geometry(pj, fj, pi, fi).unwrap(), &kp);
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
                prop_assert!((0.0..=kp.beta_max).contains(&a));
                Ok(())
            },
        )
        .is_ok();
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let monotone = runner
        .run(
            &(0.0..20.0f64, 0.0..20.0f64, 0.0..PI, 0.0..PI, 0.0..PI),
            |(r1, r2, t1, t2, tj)| {
                let (lo, hi) = (r1.min(r2), r1.max(r2));
                prop_assert!(at(lo, t1, tj) >= at(hi, t1, tj));
                let (tlo, thi) = (t1.min(t2), t1.max(t2));
                prop_assert!(at(lo, tlo, tj) >= at(lo, thi, tj));
                Ok(())
            },
        )
        .is_ok();
    (
        origin_exact && ratio_ok && symmetry && monotone,
        format!(
            "rate(0,0,0) == beta_max: {origin_exact}; rate(2 m)/beta_max = {ratio:.15}; \
             symmetry 1e4 cases: {symmetry}; monotonicity 1e4 cases: {monotone}"
        ),
    )
}

fn static_pair(a: Pose, b: Pose, seconds: usize) -> Observation {
    let frames = (0..seconds)
        .map(|t| TrajectoryFrame {
            t: t as i64,
            poses: vec![Some(a), Some(b)],
        })
        .collect();
    Observation::new(
        "pair",
        vec![Person::new("a", Role::Child), Person::new("b", Role::Child)],
        25.0,
        frames,
        None,
    )
    .unwrap()
}

fn c3_two_agent() -> (bool, String) {
    const SESSION: usize = 3600;
    const RUNS: u64 = 10_000;
    let params = SimParams::default();
    let sc = ScenarioConfig {
        horizon_days: 1,
        ..ScenarioConfig::default()
    };
    let cal = build_calendar(1, SESSION as f64, Weekday::Monday);
    let mut geo_rng = SimRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut all = true;
    for g in 0..10u64 {
        let r = geo_rng.random_range(0.3..2.5);
        let (ta, tb): (f64, f64) = (geo_rng.random_range(-PI / 2.0..PI / 2.0), geo_rng.random_range(-PI / 2.0..PI / 2.0));
        let a = Pose {
            pos: Vec2::new(0.0, 0.0),
            facing: Vec2::from_angle(ta),
        };
        let b = Pose {
            pos: Vec2::new(r, 0.0),
            facing: Vec2::from_angle(PI + tb),
        };
        let beta = pair_rate(
            &clamped_geometry(a.pos, a.facing, b.pos, b.facing, params.kernel.min_distance),
            &params.kernel,
        );
        let p = 1.0 - (1.0 - beta * params.disease.dt).powi(SESSION as i32);
        let obs = static_pair(a, b, SESSION);
        let table = RateTable::build(&obs, &params.kernel);
        let infected = (0..RUNS)
            .filter(|&k| {
                let o = run_simulation_with_table(&obs, Some(&table), &cal, &sc, &params, "a", g * RUNS + k).unwrap();
                o.events.iter().any(|e| e.person == 1 && e.t < SESSION as f64)
            })
            .count();
        let freq = infected as f64 / RUNS as f64;
        let z = (freq - p).abs() / (binomial_3sigma(p, RUNS as usize) / 3.0);
        worst = worst.max(z);
        all &= z <= 3.0;
    }
    // Frozen closed-form value for face-to-face at 1 m.
    let beta1 = KernelParams::default().beta_max * (-1.0f64 / 8.0).exp();
    let closed = 1.0 - (1.0 - beta1).powi(3600);
    let frozen_ok = (closed - 0.25966451189249184).abs() < 1e-12;
    (
        all && frozen_ok,
        format!("10 geometries x 10^4 runs, worst |z| = {worst:.2} (limit 3); closed form frozen value matches: {frozen_ok}"),
    )
}

fn c4_disease_clocks() -> (bool, String) {
    const N: u64 = 10_000;
    let dp = DiseaseParams::default();
    let roster = [Person::new("pz", Role::Child), Person::new("x", Role::Child)];
    let kp = KernelParams::default();
    let here = Pose {
        pos: Vec2::new(0.0, 0.0),
        facing: Vec2::new(1.0, 0.0),
    };
    let mut symptomatic = 0usize;
    let mut durations = Vec::with_capacity(N as usize);
    for seed in 0..N {
        let mut s = EpidemicState::new(&roster, &[false, false], SimRng::seed_from_u64(seed));
        s.seed_patient_zero_at(0, &dp);
        // A unit pair rate makes the infection certain on the first step.
        s.step_with(|_| Some(here), |_, _| 1.0, &kp, &dp);
        s.progress_offclass(400.0 * 86_400.0, &dp);
        let x = &s.agents[1];
        let (ti, tinf, trec) = (x.t_infected.unwrap(), x.t_infectious.unwrap(), x.t_recovered.unwrap());
        assert_eq!(tinf - ti, 86_400.0, "agent infectious before exactly 24 h (seed {seed})");
        symptomatic += usize::from(x.will_be_symptomatic);
        durations.push((trec - tinf) / 86_400.0);
    }
    let mut rng = SimRng::seed_from_u64(77);
    let incubation: Vec<f64> = (0..N).map(|_| sample_incubation(&mut rng, &dp)).collect();
    let inc = incubation.iter().sum::<f64>() / N as f64;
    let dur = durations.iter().sum::<f64>() / N as f64;
    let frac = symptomatic as f64 / N as f64;
    let pass = (inc - 4.0).abs() <= 0.12 && (dur - 10.0).abs() <= 0.3 && (frac - 0.75).abs() <= 0.013;
    (
        pass,
        format!("incubation {inc:.3} d, infectious {dur:.3} d, symptomatic {frac:.4}; latency exactly 24 h for all agents"),
    )
}

fn c5_patient_zero_first() -> (bool, String) {
    let obs = generate(&SynthConfig::default()).unwrap();
    let sc = ScenarioConfig {
        reps_per_patient_zero: 282,
        base_seed: 5,
        ..ScenarioConfig::default()
    };
    let runs = sweep(&obs, &sc, &SimParams::default(), None).unwrap();
    let n = runs.len();
    let hits = runs
        .iter()
        .filter(|o| first_symptomatic_person(o) == Some(o.patient_zero.as_str()))
        .count();
    let share = hits as f64 / n as f64;
    let band = binomial_3sigma(share, n);
    let mean_sat = runs.iter().map(saturation).sum::<f64>() / n as f64;
    (
        (share - 0.75).abs() <= 0.02 && band <= 0.02,
        format!("share {share:.4} over {n} runs (3 sigma {band:.4}, target 0.75 +/- 0.02); mean saturation {mean_sat:.3}"),
    )
}

fn dense_classroom() -> Observation {
    let side = 60.0f64.sqrt();
    generate(&SynthConfig {
        class_id: "dense".into(),
        room_width: side,
        room_height: side,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn dense_sweep(obs: &Observation) -> (Vec<(ScenarioCell, Vec<RunOutcome>)>, Duration) {
    let params = SimParams::default();
    let start = Instant::now();
    let cells = ScenarioCell::ALL
        .into_iter()
        .map(|cell| {
            let sc = ScenarioConfig::default().with_cell(cell);
            (cell, sweep(obs, &sc, &params, None).unwrap())
        })
        .collect();
    (cells, start.elapsed())
}

fn cell<'a>(cells: &'a [(ScenarioCell, Vec<RunOutcome>)], label: &str) -> &'a [RunOutcome] {
    &cells.iter().find(|(c, _)| c.to_string() == label).unwrap().1
}

fn lower_at_3sigma(lo: (f64, f64), hi: (f64, f64)) -> bool {
    hi.0 - lo.0 > 3.0 * (lo.1 * lo.1 + hi.1 * hi.1).sqrt()
}

fn c6_directional(cells: &[(ScenarioCell, Vec<RunOutcome>)]) -> (bool, String) {
    let sat = |l: &str| mean_se(&cell(cells, l).iter().map(saturation).collect::<Vec<_>>());
    let (full, half, vax) = (sat("full-novax"), sat("half-novax"), sat("full-vax"));
    let n = cell(cells, "full-novax").len();
    let half_drop = 1.0 - half.0 / full.0;
    let vax_drop = 1.0 - vax.0 / full.0;
    let within2 = |x: f64, r: f64| x >= r / 2.0 && x <= 2.0 * r;
    (
        n >= 500 && lower_at_3sigma(half, full) && lower_at_3sigma(vax, full),
        format!(
            "{n} runs/cell; saturation full {:.3}+/-{:.3}, half {:.3}+/-{:.3}, vax {:.3}+/-{:.3}; \
             half reduction {:.1}% (reference 18.2%, within 2x: {}), vaccination reduction {:.1}% (reference 25.3%, within 2x: {})",
            full.0,
            full.1,
            half.0,
            half.1,
            vax.0,
            vax.1,
            100.0 * half_drop,
            within2(half_drop, 0.182),
            100.0 * vax_drop,
            within2(vax_drop, 0.253)
        ),
    )
}

fn c7_non_emergence(cells: &[(ScenarioCell, Vec<RunOutcome>)]) -> (bool, String) {
    let ne = |l: &str| {
        let runs = cell(cells, l);
        let p = emergence_proportion(runs, 2).unwrap();
        (p, (p * (1.0 - p) / runs.len() as f64).sqrt())
    };
    let (full, half, vax) = (ne("full-novax"), ne("half-novax"), ne("full-vax"));
    (
        lower_at_3sigma(full, half) && lower_at_3sigma(full, vax),
        format!(
            "no 2nd symptomatic case: full {:.3}, half {:.3}, vaccinated {:.3}",
            full.0, half.0, vax.0
        ),
    )
}

fn c8_determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let obs = d.join("obs.csv");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (code, _) = cli(&["synth", "--session-length", "900", "--seed", "3", "-o", &s(&obs)]);
    assert_eq!(code, 0);
    let run = |out: &str, workers: &str| {
        cli(&["simulate", "-i", &s(&obs), "-o", &s(&d.join(out)), "--reps", "3", "--horizon-days", "7", "--workers", workers]).0
    };
    let codes = [run("w1", "1"), run("wn", "4")];
    let manifest = d.join("w1").join("manifest.json");
    let rerun = cli(&["simulate", "--manifest", &s(&manifest), "-o", &s(&d.join("re")), "--workers", "2"]).0;
    let files = ["summary.csv", "curves.csv", "emergence.csv", "manifest.json"];
    let same = |a: &str, b: &str| {
        files
            .iter()
            .all(|f| std::fs::read(d.join(a).join(f)).unwrap() == std::fs::read(d.join(b).join(f)).unwrap())
    };
    let ok = codes == [0, 0] && rerun == 0 && same("w1", "wn") && same("w1", "re");
    (ok, format!("workers 1 vs 4 and manifest rerun byte-identical: {ok}"))
}

fn c9_performance(obs: &Observation, sweep_time: Duration) -> (bool, String) {
    let params = SimParams::default();
    let sc = ScenarioConfig::default();
    let cal = build_calendar(28, obs.session_length() as f64, Weekday::Monday);
    let start = Instant::now();
    run_simulation(obs, &cal, &sc, &params, "c01", 1).unwrap();
    let single = start.elapsed();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    // Linear scaling to 8 workers from what this machine offers.
    let projected = sweep_time.as_secs_f64() * cores.min(8) as f64 / 8.0;
    (
        single.as_secs_f64() <= 2.0 && projected <= 15.0 * 60.0,
        format!(
            "single 28-day run {:.3} s (limit 2 s); 4 cells x 60 reps x 15 patient zeros {:.1} s on {cores} core(s), \
             projected {projected:.1} s on 8 (limit 900 s)",
            single.as_secs_f64(),
            sweep_time.as_secs_f64()
        ),
    )
}

/// Id, name, runtime budget in seconds, body.
type QuickCriterion = (u32, &'static str, Option<u64>, fn() -> (bool, String));

fn main() {
    println!("acceptance suite");
    // Optional criterion numbers on the command line restrict the run.
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u32| only.is_empty() || only.contains(&id);
    let mut verdicts = Vec::new();
    let quick: [QuickCriterion; 5] = [
        (1, "calibration constant", Some(1), c1_calibration),
        (2, "kernel point checks and properties", Some(1), c2_kernel),
        (3, "two-agent closed form", Some(60), c3_two_agent),
        (4, "disease clock statistics", Some(10), c4_disease_clocks),
        (5, "patient zero is first symptomatic case", None, c5_patient_zero_first),
    ];
    for (id, name, budget, f) in quick {
        if wanted(id) {
            verdicts.push(check_within(id, name, budget.map(Duration::from_secs), f));
        }
    }
    if [6, 7, 9].into_iter().any(wanted) {
        let obs = dense_classroom();
        let (cells, sweep_time) = dense_sweep(&obs);
        if wanted(6) {
            verdicts.push(check(6, "directional scenario effects", || c6_directional(&cells)));
        }
        if wanted(7) {
            verdicts.push(check(7, "non-emergence ordering", || c7_non_emergence(&cells)));
        }
        if wanted(9) {
            verdicts.push(check(9, "performance", || c9_performance(&obs, sweep_time)));
        }
    }
    if wanted(8) {
        verdicts.push(check(8, "determinism and worker invariance", c8_determinism));
    }
    verdicts.sort_by_key(|v| v.id);

    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("{passed}/{} criteria passed", verdicts.len());
    let undocumented: Vec<u32> = verdicts
        .iter()
        .filter(|v| !v.pass && !DOCUMENTED_FAILURES.iter().any(|(i, _)| *i == v.id))
        .map(|v| v.id)
        .collect();
    for v in verdicts.iter().filter(|v| v.pass && DOCUMENTED_FAILURES.iter().any(|(i, _)| *i == v.id)) {
        println!("note: criterion {} is listed as a documented failure but passed", v.id);
    }
    if !undocumented.is_empty() {
        println!("undocumented failures: {undocumented:?}");
        std::process::exit(1);
    }
}
