//! Per-agent SEIR state machine and the stochastic transmission step.
//!
//! Each infection pre-samples the agent's whole disease course: infectious
//! exactly `latency` after infection, symptomatic (with probability
//! `p_symptomatic`) after an incubation period measured from infection, and
//! recovered after an exponential infectious period. Those scheduled
//! transitions are applied as the clock passes them, both in class and
//! between sessions. Transmission only happens in class, one frame per step.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{
    airborne_decay, clamped_geometry, pair_rate, KernelParams, TransmissionMode, SECONDS_PER_DAY,
    SECONDS_PER_HOUR,
};
use crate::trajectory::{Person, Pose, TrajectoryFrame};

/// Deterministic generator used for every stochastic draw of a run.
pub type SimRng = ChaCha8Rng;

/// Airborne emissions older than this no longer contribute, seconds.
pub const EMISSION_HORIZON_S: f64 = 3.0 * SECONDS_PER_HOUR;
/// Spacing between recorded airborne emissions, seconds.
pub const EMISSION_INTERVAL_S: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpidemicError {
    #[error("unknown person {0:?}")]
    UnknownPerson(String),
    #[error("frame carries {got} slots but the roster has {expected} members")]
    FrameRosterMismatch { expected: usize, got: usize },
    #[error("invalid disease parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncubationModel {
    /// Exponential waiting time with the configured mean.
    #[default]
    Exponential,
    /// Poisson-distributed whole number of days.
    PoissonDays,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryModel {
    /// Exponential infectious period drawn at infection.
    #[default]
    PreSampled,
    /// Bernoulli(γ·dt) recovery draw at every second.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    /// Infection → infectious, hours.
    pub latency: f64,
    pub p_symptomatic: f64,
    /// Mean infection → symptom onset, days.
    pub mean_incubation: f64,
    /// Recovery rate, per day.
    pub gamma: f64,
    /// Step size, seconds.
    pub dt: f64,
    #[serde(default)]
    pub incubation_model: IncubationModel,
    #[serde(default)]
    pub recovery_model: RecoveryModel,
}

impl Default for DiseaseParams {
    fn default() -> Self {
        Self {
            latency: 24.0,
            p_symptomatic: 0.75,
            mean_incubation: 4.0,
            gamma: 0.1,
            dt: 1.0,
            incubation_model: IncubationModel::Exponential,
            recovery_model: RecoveryModel::PreSampled,
        }
    }
}

impl DiseaseParams {
    pub fn validate(&self) -> Result<(), EpidemicError> {
        let bad = |m: String| Err(EpidemicError::InvalidParams(m));
        if !(0.0..=1.0).contains(&self.p_symptomatic) {
            return bad(format!("p_symptomatic = {}", self.p_symptomatic));
        }
        for (name, v) in [
            ("latency", self.latency),
            ("mean_incubation", self.mean_incubation),
            ("gamma", self.gamma),
            ("dt", self.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v}"));
            }
        }
        Ok(())
    }

    pub fn latency_s(&self) -> f64 {
        self.latency * SECONDS_PER_HOUR
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Compartment {
    Susceptible,
    Exposed,
    Infectious,
    Recovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Infected,
    Infectious,
    Symptomatic,
    Recovered,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Infected => "infected",
            EventKind::Infectious => "infectious",
            EventKind::Symptomatic => "symptomatic",
            EventKind::Recovered => "recovered",
        }
    }
}

/// One entry of a run's event log. `person` and `source` index the run roster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub person: usize,
    /// Absolute seconds since the start of Day 0.
    pub t: f64,
    pub source: Option<usize>,
}

/// A recorded airborne emission of an infectious agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Schedule {
    infectious_at: Option<f64>,
    symptomatic_at: Option<f64>,
    recovered_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub person_id: String,
    pub compartment: Compartment,
    /// Effective vaccination: never infected.
    pub immune: bool,
    pub t_infected: Option<f64>,
    pub t_infectious: Option<f64>,
    pub t_symptomatic: Option<f64>,
    pub t_recovered: Option<f64>,
    pub will_be_symptomatic: bool,
    /// Airborne mode only: this agent's recent emissions, oldest first.
    pub exposure_buffer: VecDeque<Emission>,
    pending: Schedule,
}

impl AgentState {
    pub fn new(person_id: impl Into<String>, immune: bool) -> Self {
        Self {
            person_id: person_id.into(),
            compartment: Compartment::Susceptible,
            immune,
            t_infected: None,
            t_infectious: None,
            t_symptomatic: None,
            t_recovered: None,
            will_be_symptomatic: false,
            exposure_buffer: VecDeque::new(),
            pending: Schedule::default(),
        }
    }

    pub fn is_susceptible(&self) -> bool {
        self.compartment == Compartment::Susceptible && !self.immune
    }

    fn next_due(&self) -> Option<f64> {
        [
            self.pending.infectious_at,
            self.pending.symptomatic_at,
            self.pending.recovered_at,
        ]
        .into_iter()
        .flatten()
        .min_by(f64::total_cmp)
    }
}

/// Incubation period in days, measured from infection.
pub fn sample_incubation<R: Rng + ?Sized>(rng: &mut R, dp: &DiseaseParams) -> f64 {
    match dp.incubation_model {
        IncubationModel::Exponential => Exp::new(1.0 / dp.mean_incubation)
            .expect("positive mean")
            .sample(rng),
        IncubationModel::PoissonDays => Poisson::new(dp.mean_incubation)
            .expect("positive mean")
            .sample(rng),
    }
}

/// Infectious period in days for the pre-sampled recovery model.
pub fn sample_infectious_duration<R: Rng + ?Sized>(rng: &mut R, dp: &DiseaseParams) -> f64 {
    Exp::new(dp.gamma).expect("positive rate").sample(rng)
}

/// Epidemiological state of one run.
#[derive(Debug, Clone)]
pub struct EpidemicState {
    /// Absolute seconds since the start of Day 0.
    pub clock: f64,
    pub agents: Vec<AgentState>,
    pub rng: SimRng,
    pub events: Vec<Event>,
    // Scratch buffers reused across steps.
    infectious_scratch: Vec<usize>,
    source_scratch: Vec<(usize, f64)>,
}

impl EpidemicState {
    /// Everyone susceptible at clock 0. `immune` is indexed like `roster`.
    pub fn new(roster: &[Person], immune: &[bool], rng: SimRng) -> Self {
        assert_eq!(roster.len(), immune.len(), "one immunity flag per roster member");
        Self {
            clock: 0.0,
            agents: roster
                .iter()
                .zip(immune)
                .map(|(p, &imm)| AgentState::new(p.id.clone(), imm))
                .collect(),
            rng,
            events: Vec::new(),
            infectious_scratch: Vec::new(),
            source_scratch: Vec::new(),
        }
    }

    pub fn index_of(&self, person_id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.person_id == person_id)
    }

    pub fn seed_patient_zero(&mut self, person_id: &str, dp: &DiseaseParams) -> Result<(), EpidemicError> {
        let idx = self
            .index_of(person_id)
            .ok_or_else(|| EpidemicError::UnknownPerson(person_id.to_string()))?;
        self.seed_patient_zero_at(idx, dp);
        Ok(())
    }

    /// Makes agent `idx` infectious at the current clock, infected `latency`
    /// earlier. An immune agent stays susceptible and nothing happens.
    pub fn seed_patient_zero_at(&mut self, idx: usize, dp: &DiseaseParams) {
        if self.agents[idx].immune {
            return;
        }
        let t_infected = self.clock - dp.latency_s();
        self.infect(idx, t_infected, None, dp);
        self.apply_due(self.clock);
    }

    fn infect(&mut self, idx: usize, t: f64, source: Option<usize>, dp: &DiseaseParams) {
        let symptomatic = self.rng.random_bool(dp.p_symptomatic);
        let incubation = sample_incubation(&mut self.rng, dp);
        let infectious_at = t + dp.latency_s();
        let recovered_at = match dp.recovery_model {
            RecoveryModel::PreSampled => {
                Some(infectious_at + sample_infectious_duration(&mut self.rng, dp) * SECONDS_PER_DAY)
            }
            RecoveryModel::PerStep => None,
        };
        let agent = &mut self.agents[idx];
        debug_assert_eq!(agent.compartment, Compartment::Susceptible);
        agent.compartment = Compartment::Exposed;
        agent.t_infected = Some(t);
        agent.will_be_symptomatic = symptomatic;
        agent.pending = Schedule {
            infectious_at: Some(infectious_at),
            symptomatic_at: symptomatic.then_some(t + incubation * SECONDS_PER_DAY),
            recovered_at,
        };
        self.events.push(Event {
            kind: EventKind::Infected,
            person: idx,
            t,
            source,
        });
    }

    /// Applies every scheduled transition due at or before `until`, in time order.
    fn apply_due(&mut self, until: f64) {
        let mut due: Vec<(f64, usize, EventKind)> = Vec::new();
        for (i, a) in self.agents.iter().enumerate() {
            let s = &a.pending;
            if let Some(t) = s.infectious_at.filter(|&t| t <= until) {
                due.push((t, i, EventKind::Infectious));
            }
            if let Some(t) = s.symptomatic_at.filter(|&t| t <= until) {
                due.push((t, i, EventKind::Symptomatic));
            }
            if let Some(t) = s.recovered_at.filter(|&t| t <= until) {
                due.push((t, i, EventKind::Recovered));
            }
        }
        if due.is_empty() {
            return;
        }
        due.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (t, i, kind) in due {
            let a = &mut self.agents[i];
            match kind {
                EventKind::Infectious => {
                    a.compartment = Compartment::Infectious;
                    a.t_infectious = Some(t);
                    a.pending.infectious_at = None;
                }
                EventKind::Symptomatic => {
                    a.t_symptomatic = Some(t);
                    a.pending.symptomatic_at = None;
                }
                EventKind::Recovered => {
                    a.compartment = Compartment::Recovered;
                    a.t_recovered = Some(t);
                    a.pending.recovered_at = None;
                }
                EventKind::Infected => unreachable!("infections are never scheduled"),
            }
            self.events.push(Event {
                kind,
                person: i,
                t,
                source: None,
            });
        }
    }

    /// Earliest scheduled transition still pending.
    pub fn next_due(&self) -> Option<f64> {
        self.agents.iter().filter_map(AgentState::next_due).min_by(f64::total_cmp)
    }

    /// True when no agent is exposed or infectious.
    pub fn is_run_complete(&self) -> bool {
        !self
            .agents
            .iter()
            .any(|a| matches!(a.compartment, Compartment::Exposed | Compartment::Infectious))
    }

    pub fn any_infectious(&self) -> bool {
        self.agents.iter().any(|a| a.compartment == Compartment::Infectious)
    }

    pub fn any_susceptible(&self) -> bool {
        self.agents.iter().any(AgentState::is_susceptible)
    }

    fn any_emissions(&self) -> bool {
        self.agents.iter().any(|a| !a.exposure_buffer.is_empty())
    }

    /// `[S, E, I, R]` head counts.
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for a in &self.agents {
            c[a.compartment as usize] += 1;
        }
        c
    }

    /// One in-class second driven by `frame`, with pair rates computed from
    /// the frame's poses.
    pub fn transmission_step(
        &mut self,
        frame: &TrajectoryFrame,
        kp: &KernelParams,
        dp: &DiseaseParams,
    ) -> Result<(), EpidemicError> {
        if frame.poses.len() != self.agents.len() {
            return Err(EpidemicError::FrameRosterMismatch {
                expected: self.agents.len(),
                got: frame.poses.len(),
            });
        }
        let poses = &frame.poses;
        self.step_with(
            |i| poses[i],
            |i, j| match (poses[i], poses[j]) {
                (Some(a), Some(b)) => {
                    pair_rate(&clamped_geometry(a.pos, a.facing, b.pos, b.facing, kp.min_distance), kp)
                }
                _ => 0.0,
            },
            kp,
            dp,
        );
        Ok(())
    }

    /// One in-class second. `pose(i)` gives agent `i`'s pose (`None` when
    /// absent) and `rate(i, j)` the contemporaneous pair rate per second.
    ///
    /// For every present susceptible agent the per-source probabilities
    /// `min(β_ij·dt, 1)` combine as `1 − Π(1 − ·)` and a single Bernoulli
    /// draw decides infection; the source is then drawn in proportion to its
    /// share. Draws only happen when the combined probability is positive.
    pub fn step_with(
        &mut self,
        pose: impl Fn(usize) -> Option<Pose>,
        rate: impl Fn(usize, usize) -> f64,
        kp: &KernelParams,
        dp: &DiseaseParams,
    ) {
        let now = self.clock;
        self.apply_due(now);

        let airborne = kp.mode == TransmissionMode::Airborne;
        let mut infectious = std::mem::take(&mut self.infectious_scratch);
        let mut sources = std::mem::take(&mut self.source_scratch);
        infectious.clear();
        infectious.extend(
            (0..self.agents.len())
                .filter(|&j| self.agents[j].compartment == Compartment::Infectious && pose(j).is_some()),
        );

        if !infectious.is_empty() || (airborne && self.any_emissions()) {
            // Airborne emissions are weighted so that a stationary source's
            // decayed history integrates to (1 − e^(−λ·horizon)) of its
            // contemporaneous rate.
            let emission_weight = kp.lambda_decay / SECONDS_PER_HOUR * EMISSION_INTERVAL_S;
            for i in 0..self.agents.len() {
                if !self.agents[i].is_susceptible() {
                    continue;
                }
                let Some(me) = pose(i) else { continue };
                sources.clear();
                let mut escape = 1.0;
                for &j in &infectious {
                    let p = (rate(i, j) * dp.dt).min(1.0);
                    if p > 0.0 {
                        escape *= 1.0 - p;
                        sources.push((j, p));
                    }
                }
                if airborne {
                    for (j, src) in self.agents.iter().enumerate() {
                        for e in &src.exposure_buffer {
                            let age = now - e.t;
                            if age <= 0.0 {
                                continue;
                            }
                            let g = clamped_geometry(me.pos, me.facing, e.pose.pos, e.pose.facing, kp.min_distance);
                            let r = airborne_decay(pair_rate(&g, kp), age / SECONDS_PER_HOUR, kp.lambda_decay)
                                * emission_weight;
                            let p = (r * dp.dt).min(1.0);
                            if p > 0.0 {
                                escape *= 1.0 - p;
                                sources.push((j, p));
                            }
                        }
                    }
                }
                let p_inf = 1.0 - escape;
                if p_inf > 0.0 && self.rng.random::<f64>() < p_inf {
                    let total: f64 = sources.iter().map(|s| s.1).sum();
                    let mut pick = self.rng.random::<f64>() * total;
                    let mut chosen = sources[sources.len() - 1].0;
                    for &(j, p) in &sources {
                        if pick < p {
                            chosen = j;
                            break;
                        }
                        pick -= p;
                    }
                    self.infect(i, now, Some(chosen), dp);
                }
            }
        }

        if airborne {
            self.record_emissions(now, &pose);
        }
        if dp.recovery_model == RecoveryModel::PerStep {
            self.per_step_recovery(now, dp);
        }
        self.infectious_scratch = infectious;
        self.source_scratch = sources;
        self.clock = now + dp.dt;
    }

    fn record_emissions(&mut self, now: f64, pose: &impl Fn(usize) -> Option<Pose>) {
        let emit = (now / EMISSION_INTERVAL_S).fract() == 0.0;
        for (j, a) in self.agents.iter_mut().enumerate() {
            while a.exposure_buffer.front().is_some_and(|e| now - e.t > EMISSION_HORIZON_S) {
                a.exposure_buffer.pop_front();
            }
            if emit && a.compartment == Compartment::Infectious {
                if let Some(p) = pose(j) {
                    a.exposure_buffer.push_back(Emission { t: now, pose: p });
                }
            }
        }
    }

    fn per_step_recovery(&mut self, now: f64, dp: &DiseaseParams) {
        let p = (dp.gamma / SECONDS_PER_DAY * dp.dt).min(1.0);
        for i in 0..self.agents.len() {
            let a = &self.agents[i];
            if a.compartment == Compartment::Infectious && a.pending.recovered_at.is_none() && self.rng.random_bool(p) {
                self.agents[i].pending.recovered_at = Some(now + dp.dt);
            }
        }
    }

    /// Out-of-class time: disease clocks advance, nobody is infected.
    pub fn progress_offclass(&mut self, duration: f64, dp: &DiseaseParams) {
        debug_assert!(duration >= 0.0);
        let end = self.clock + duration;
        if dp.recovery_model == RecoveryModel::PerStep {
            while self.clock + dp.dt <= end {
                let now = self.clock;
                self.apply_due(now);
                self.per_step_recovery(now, dp);
                self.clock = now + dp.dt;
            }
        }
        self.apply_due(end);
        for a in &mut self.agents {
            a.exposure_buffer.retain(|e| end - e.t <= EMISSION_HORIZON_S);
        }
        self.clock = end;
    }

    /// Logs transitions already scheduled up to `until` without moving the
    /// clock. Used once a run is complete so late symptom onsets are kept.
    pub fn flush_scheduled(&mut self, until: f64) {
        self.apply_due(until);
    }
}
