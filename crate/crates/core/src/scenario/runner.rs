use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_vaccination, build_calendar, half_class_members, DensityVariant, HalfClassMode, ScenarioConfig,
    ScenarioError, SchoolCalendar, SimParams, VaccinationVariant,
};
use crate::epidemic::{Compartment, EpidemicState, Event, EventKind, SimRng};
use crate::kernel::{clamped_geometry, pair_rate, KernelParams, TransmissionMode, SECONDS_PER_HOUR};
use crate::metrics::{mean_pair_rate, CompensatedSum, TransmissionLikelihood};
use crate::trajectory::{Observation, Person, Pose};

/// Complete record of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub scenario: String,
    pub observation_id: String,
    pub patient_zero: String,
    pub seed: u64,
    /// Roster of this run (the retained subset for half-class runs).
    pub roster: Vec<Person>,
    pub immune: Vec<bool>,
    pub events: Vec<Event>,
    /// `[S, E, I, R]` at every whole hour from 0 to the horizon inclusive.
    pub hourly_counts: Vec<[u32; 4]>,
    pub final_counts: [usize; 4],
    pub horizon_days: u32,
    pub likelihood: Option<TransmissionLikelihood>,
}

impl RunOutcome {
    pub fn roster_size(&self) -> usize {
        self.roster.len()
    }
}

/// Pair rates of every frame of an observation, for droplet-mode replays.
///
/// Rates are symmetric in the pair and bitwise equal to evaluating the
/// kernel on the frame directly.
#[derive(Debug, Clone)]
pub struct RateTable {
    n: usize,
    pairs: usize,
    rates: Vec<f64>,
    /// Mean rate over co-present pairs of the whole roster.
    full_mean: f64,
}

impl RateTable {
    pub fn build(obs: &Observation, kp: &KernelParams) -> Self {
        let n = obs.roster.len();
        let pairs = n * n.saturating_sub(1) / 2;
        let rates: Vec<f64> = obs
            .frames
            .par_iter()
            .flat_map_iter(|f| {
                (0..n).flat_map(move |i| {
                    (i + 1..n).map(move |j| match (f.poses[i], f.poses[j]) {
                        (Some(a), Some(b)) => {
                            pair_rate(&clamped_geometry(a.pos, a.facing, b.pos, b.facing, kp.min_distance), kp)
                        }
                        _ => 0.0,
                    })
                })
            })
            .collect();
        // Absent pairs hold 0.0, which leaves a compensated sum unchanged.
        let sum: CompensatedSum = rates.iter().copied().collect();
        let count: usize = obs
            .frames
            .iter()
            .map(|f| {
                let m = f.poses.iter().filter(|p| p.is_some()).count();
                m * m.saturating_sub(1) / 2
            })
            .sum();
        let full_mean = if count == 0 { 0.0 } else { sum.value() / count as f64 };
        Self {
            n,
            pairs,
            rates,
            full_mean,
        }
    }

    fn check_shape(&self, obs: &Observation) -> Result<(), ScenarioError> {
        if self.n != obs.roster.len() || self.rates.len() != self.pairs * obs.frames.len() {
            return Err(ScenarioError::InvalidConfig(
                "rate table was built for a different observation".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, frame: usize, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let k = a * self.n - a * (a + 1) / 2 + (b - a - 1);
        self.rates[frame * self.pairs + k]
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-task seed, stable across platforms, worker counts and task order.
pub fn derive_seed(base_seed: u64, patient_zero: u64, rep: u64) -> u64 {
    mix(mix(mix(base_seed) ^ patient_zero) ^ rep.rotate_left(32))
}

/// Compartment counts at each whole hour, rebuilt from an event log.
pub fn hourly_counts(n_agents: usize, events: &[Event], horizon_days: u32) -> Vec<[u32; 4]> {
    let mut times = vec![[f64::INFINITY; 3]; n_agents];
    for e in events {
        let slot = match e.kind {
            EventKind::Infected => 0,
            EventKind::Infectious => 1,
            EventKind::Recovered => 2,
            EventKind::Symptomatic => continue,
        };
        times[e.person][slot] = e.t;
    }
    let hours = horizon_days as usize * 24;
    (0..=hours)
        .map(|h| {
            let t = h as f64 * SECONDS_PER_HOUR;
            let mut c = [0u32; 4];
            for tm in &times {
                let k = if tm[2] <= t {
                    3
                } else if tm[1] <= t {
                    2
                } else if tm[0] <= t {
                    1
                } else {
                    0
                };
                c[k] += 1;
            }
            c
        })
        .collect()
}

/// Alternates in-class replay of the observation with out-of-class progress
/// until the horizon or until nobody is exposed or infectious.
fn drive(
    state: &mut EpidemicState,
    cal: &SchoolCalendar,
    params: &SimParams,
    n_frames: usize,
    pose: impl Fn(usize, usize) -> Option<Pose>,
    rate: impl Fn(usize, usize, usize) -> f64,
) {
    let dp = &params.disease;
    let airborne = params.kernel.mode == TransmissionMode::Airborne;
    let horizon = cal.horizon_s();

    'sessions: for session in &cal.sessions {
        if state.is_run_complete() || session.start >= horizon {
            break;
        }
        if session.start > state.clock {
            state.progress_offclass(session.start - state.clock, dp);
        }
        let steps = ((session.length.min(horizon - session.start) / dp.dt).floor() as usize).min(n_frames);
        let mut k = 0;
        while k < steps {
            if state.is_run_complete() {
                break 'sessions;
            }
            let idle = !state.any_susceptible()
                || (!state.any_infectious() && !(airborne && state.agents.iter().any(|a| !a.exposure_buffer.is_empty())));
            if idle {
                // Nothing can be transmitted before the next scheduled
                // transition; jump there (or to the session end).
                let target = if state.any_susceptible() {
                    state
                        .next_due()
                        .map(|t| (((t - session.start) / dp.dt).ceil().max(0.0) as usize).min(steps))
                        .unwrap_or(steps)
                } else {
                    steps
                };
                if target > k {
                    state.progress_offclass((target - k) as f64 * dp.dt, dp);
                    k = target;
                    continue;
                }
            }
            state.step_with(|i| pose(k, i), |i, j| rate(k, i, j), &params.kernel, dp);
            k += 1;
        }
    }

    if state.clock < horizon {
        if state.is_run_complete() {
            state.flush_scheduled(horizon);
        } else {
            state.progress_offclass(horizon - state.clock, dp);
        }
    }
}

struct Task<'a> {
    obs: &'a Observation,
    table: Option<&'a RateTable>,
    /// Roster indices of `obs` taking part in the run.
    members: &'a [usize],
    patient_zero: usize,
}

fn execute(
    task: &Task<'_>,
    cal: &SchoolCalendar,
    sc: &ScenarioConfig,
    params: &SimParams,
    mut rng: SimRng,
    seed: u64,
    likelihood: Option<TransmissionLikelihood>,
) -> RunOutcome {
    let obs = task.obs;
    let members = task.members;
    let roster: Vec<Person> = members.iter().map(|&i| obs.roster[i].clone()).collect();
    let immune = match sc.vaccination_variant {
        VaccinationVariant::None => vec![false; roster.len()],
        VaccinationVariant::Teachers => apply_vaccination(&roster, sc.vaccine_efficacy, &mut rng),
    };
    let pz_local = members
        .iter()
        .position(|&m| m == task.patient_zero)
        .expect("patient zero is a run member");

    let mut state = EpidemicState::new(&roster, &immune, rng);
    state.seed_patient_zero_at(pz_local, &params.disease);

    let pose = |k: usize, i: usize| obs.frames[k].poses[members[i]];
    match task.table {
        Some(table) => drive(&mut state, cal, params, obs.frames.len(), pose, |k, i, j| {
            table.get(k, members[i], members[j])
        }),
        None => {
            let kp = params.kernel;
            drive(&mut state, cal, params, obs.frames.len(), pose, |k, i, j| {
                match (pose(k, i), pose(k, j)) {
                    (Some(a), Some(b)) => {
                        pair_rate(&clamped_geometry(a.pos, a.facing, b.pos, b.facing, kp.min_distance), &kp)
                    }
                    _ => 0.0,
                }
            })
        }
    }

    let hourly = hourly_counts(roster.len(), &state.events, cal.horizon_days);
    let final_counts = state.counts();
    debug_assert!(state
        .agents
        .iter()
        .all(|a| !a.immune || a.compartment == Compartment::Susceptible));
    RunOutcome {
        scenario: sc.cell().to_string(),
        observation_id: obs.class_id.clone(),
        patient_zero: obs.roster[task.patient_zero].id.clone(),
        seed,
        roster,
        immune,
        events: state.events,
        hourly_counts: hourly,
        final_counts,
        horizon_days: cal.horizon_days,
        likelihood,
    }
}

fn likelihood_for(
    obs: &Observation,
    members: &[usize],
    kp: &KernelParams,
    table: Option<&RateTable>,
    sessions: usize,
) -> Option<TransmissionLikelihood> {
    if members.len() < 2 {
        return None;
    }
    if let Some(t) = table.filter(|t| members.len() == t.n && members.iter().enumerate().all(|(k, &m)| k == m)) {
        return Some(TransmissionLikelihood::new(t.full_mean, obs.session_length(), sessions));
    }
    let present = |k: usize, i: usize| obs.frames[k].poses[members[i]].is_some();
    let beta_hat = match table {
        Some(t) => mean_pair_rate(obs.frames.len(), members.len(), present, |k, i, j| {
            t.get(k, members[i], members[j])
        }),
        None => mean_pair_rate(obs.frames.len(), members.len(), present, |k, i, j| {
            let (a, b) = (
                obs.frames[k].poses[members[i]].unwrap(),
                obs.frames[k].poses[members[j]].unwrap(),
            );
            pair_rate(&clamped_geometry(a.pos, a.facing, b.pos, b.facing, kp.min_distance), kp)
        }),
    };
    Some(TransmissionLikelihood::new(beta_hat, obs.session_length(), sessions))
}

/// One run on `obs` as given (apply [`super::apply_half_class`] first for
/// half-class runs). Teacher immunity is drawn from the run's generator when
/// the scenario vaccinates.
pub fn run_simulation(
    obs: &Observation,
    cal: &SchoolCalendar,
    sc: &ScenarioConfig,
    params: &SimParams,
    patient_zero: &str,
    seed: u64,
) -> Result<RunOutcome, ScenarioError> {
    sc.validate()?;
    params.validate()?;
    let table = (params.kernel.mode == TransmissionMode::Droplet).then(|| RateTable::build(obs, &params.kernel));
    run_simulation_with_table(obs, table.as_ref(), cal, sc, params, patient_zero, seed)
}

/// [`run_simulation`] reusing a prebuilt droplet-mode rate table.
pub fn run_simulation_with_table(
    obs: &Observation,
    table: Option<&RateTable>,
    cal: &SchoolCalendar,
    sc: &ScenarioConfig,
    params: &SimParams,
    patient_zero: &str,
    seed: u64,
) -> Result<RunOutcome, ScenarioError> {
    sc.validate()?;
    params.validate()?;
    if let Some(t) = table {
        t.check_shape(obs)?;
    }
    let pz = obs
        .index_of(patient_zero)
        .ok_or_else(|| crate::epidemic::EpidemicError::UnknownPerson(patient_zero.to_string()))?;
    let members: Vec<usize> = (0..obs.roster.len()).collect();
    let task = Task {
        obs,
        table,
        members: &members,
        patient_zero: pz,
    };
    let likelihood = likelihood_for(obs, &members, &params.kernel, table, cal.sessions.len());
    Ok(execute(&task, cal, sc, params, SimRng::seed_from_u64(seed), seed, likelihood))
}

/// Every roster member as patient zero × `reps_per_patient_zero` replicates.
///
/// Outcomes come back ordered by (patient zero roster index, replicate) and
/// are identical for any `workers` value.
pub fn sweep(
    obs: &Observation,
    sc: &ScenarioConfig,
    params: &SimParams,
    workers: Option<usize>,
) -> Result<Vec<RunOutcome>, ScenarioError> {
    sc.validate()?;
    params.validate()?;
    let table = (params.kernel.mode == TransmissionMode::Droplet).then(|| RateTable::build(obs, &params.kernel));
    sweep_with_table(obs, table.as_ref(), sc, params, workers)
}

/// [`sweep`] reusing a prebuilt droplet-mode rate table.
pub fn sweep_with_table(
    obs: &Observation,
    table: Option<&RateTable>,
    sc: &ScenarioConfig,
    params: &SimParams,
    workers: Option<usize>,
) -> Result<Vec<RunOutcome>, ScenarioError> {
    if let Some(t) = table {
        t.check_shape(obs)?;
    }
    let cal = build_calendar(sc.horizon_days, obs.session_length() as f64, sc.start_weekday);
    let everyone: Vec<usize> = (0..obs.roster.len()).collect();
    let half = sc.density_variant == DensityVariant::Half;

    let fixed_half = if half && sc.half_class_mode == HalfClassMode::Fixed {
        let mut rng = SimRng::seed_from_u64(derive_seed(sc.base_seed, u64::MAX, 0));
        Some(half_class_members(&obs.roster, &mut rng, None)?)
    } else {
        if half && !obs.roster.iter().any(|p| p.role == crate::trajectory::Role::Teacher) {
            return Err(ScenarioError::NoTeacher);
        }
        None
    };
    let patient_zeros: Vec<usize> = fixed_half.clone().unwrap_or_else(|| everyone.clone());
    let tasks: Vec<(usize, u32)> = patient_zeros
        .iter()
        .flat_map(|&pz| (0..sc.reps_per_patient_zero).map(move |rep| (pz, rep)))
        .collect();

    let shared_members = fixed_half.as_deref().unwrap_or(&everyone);
    let shared_likelihood = likelihood_for(obs, shared_members, &params.kernel, table, cal.sessions.len());

    let run_one = |&(pz, rep): &(usize, u32)| -> Result<RunOutcome, ScenarioError> {
        let seed = derive_seed(sc.base_seed, pz as u64, u64::from(rep));
        let mut rng = SimRng::seed_from_u64(seed);
        let (members, likelihood) = if half && fixed_half.is_none() {
            let m = half_class_members(&obs.roster, &mut rng, Some(pz))?;
            let l = likelihood_for(obs, &m, &params.kernel, table, cal.sessions.len());
            (m, l)
        } else {
            (shared_members.to_vec(), shared_likelihood)
        };
        let task = Task {
            obs,
            table,
            members: &members,
            patient_zero: pz,
        };
        Ok(execute(&task, &cal, sc, params, rng, seed, likelihood))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| ScenarioError::Pool(e.to_string()))?;
    pool.install(|| tasks.par_iter().map(run_one).collect())
}
