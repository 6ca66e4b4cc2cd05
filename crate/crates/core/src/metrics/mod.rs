//! Policy outcomes computed from run outcomes.

pub mod output;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epidemic::EventKind;
use crate::kernel::{clamped_geometry, pair_rate, KernelParams, SECONDS_PER_DAY};
use crate::scenario::RunOutcome;
use crate::trajectory::Observation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("transmission likelihood needs at least two people")]
    SinglePerson,
    #[error("no outcomes to aggregate")]
    EmptyCollection,
    #[error("outcomes mix roster sizes or horizons ({0})")]
    MixedCohorts(String),
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Mean kernel rate `β̂`, exposure time `T` and their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLikelihood {
    /// Per second.
    pub beta_hat: f64,
    /// Total scheduled in-class seconds over the horizon.
    pub exposure_t: f64,
    pub beta_hat_t: f64,
}

impl TransmissionLikelihood {
    pub fn new(beta_hat: f64, session_length_s: usize, sessions: usize) -> Self {
        let exposure_t = session_length_s as f64 * sessions as f64;
        Self {
            beta_hat,
            exposure_t,
            beta_hat_t: beta_hat * exposure_t,
        }
    }
}

/// Average of `rate(frame, i, j)` over every unordered pair present in a
/// frame, over all frames. Zero when no pair is ever co-present.
pub fn mean_pair_rate(
    n_frames: usize,
    n_people: usize,
    present: impl Fn(usize, usize) -> bool,
    rate: impl Fn(usize, usize, usize) -> f64,
) -> f64 {
    let mut sum = CompensatedSum::default();
    let mut count: u64 = 0;
    let mut here = Vec::with_capacity(n_people);
    for k in 0..n_frames {
        here.clear();
        here.extend((0..n_people).filter(|&i| present(k, i)));
        for (a, &i) in here.iter().enumerate() {
            for &j in &here[a + 1..] {
                sum.add(rate(k, i, j));
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum.value() / count as f64
    }
}

pub fn transmission_likelihood(
    obs: &Observation,
    kp: &KernelParams,
    horizon_sessions: usize,
) -> Result<TransmissionLikelihood, MetricsError> {
    if obs.roster.len() < 2 {
        return Err(MetricsError::SinglePerson);
    }
    let beta_hat = mean_pair_rate(
        obs.frames.len(),
        obs.roster.len(),
        |k, i| obs.frames[k].poses[i].is_some(),
        |k, i, j| {
            let (a, b) = (obs.frames[k].poses[i].unwrap(), obs.frames[k].poses[j].unwrap());
            pair_rate(&clamped_geometry(a.pos, a.facing, b.pos, b.facing, kp.min_distance), kp)
        },
    );
    Ok(TransmissionLikelihood::new(beta_hat, obs.session_length(), horizon_sessions))
}

/// Fraction of the run roster ever infected, patient zero included.
pub fn saturation(outcome: &RunOutcome) -> f64 {
    if outcome.roster.is_empty() {
        return 0.0;
    }
    let ever = outcome
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Infected)
        .count();
    ever as f64 / outcome.roster.len() as f64
}

/// Days from Day 0 to the `n`th (1-based) distinct symptom onset.
///
/// Patient zero's onset can precede Day 0 since its infection is back-dated
/// by the latency period; such values come out negative.
pub fn nth_symptomatic(outcome: &RunOutcome, n: usize) -> Option<f64> {
    assert!(n >= 1, "n is 1-based");
    let mut onsets: Vec<(f64, usize)> = outcome
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Symptomatic)
        .map(|e| (e.t, e.person))
        .collect();
    onsets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    onsets.dedup_by_key(|o| o.1);
    onsets.get(n - 1).map(|o| o.0 / SECONDS_PER_DAY)
}

/// Roster id of the first symptomatic person, if any.
pub fn first_symptomatic_person(outcome: &RunOutcome) -> Option<&str> {
    outcome
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Symptomatic)
        .min_by(|a, b| a.t.total_cmp(&b.t).then(a.person.cmp(&b.person)))
        .map(|e| outcome.roster[e.person].id.as_str())
}

/// Fraction of outcomes in which the `n`th symptomatic case never appears.
pub fn emergence_proportion(outcomes: &[RunOutcome], n: usize) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyCollection);
    }
    let missing = outcomes.iter().filter(|o| nth_symptomatic(o, n).is_none()).count();
    Ok(missing as f64 / outcomes.len() as f64)
}

/// Median of `nth_symptomatic` over outcomes, counting non-emergence as
/// never. `None` when the median itself is "never".
pub fn median_nth_symptomatic(outcomes: &[RunOutcome], n: usize) -> Option<f64> {
    let mut v: Vec<f64> = outcomes
        .iter()
        .map(|o| nth_symptomatic(o, n).unwrap_or(f64::INFINITY))
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    let med = if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    };
    med.is_finite().then_some(med)
}

/// Per-run summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub saturation: f64,
    pub beta_hat: f64,
    pub exposure_t: f64,
    pub beta_hat_t: f64,
    pub t_symptomatic: [Option<f64>; 3],
}

pub fn summarize(outcome: &RunOutcome) -> OutcomeSummary {
    let l = outcome.likelihood.unwrap_or(TransmissionLikelihood {
        beta_hat: 0.0,
        exposure_t: 0.0,
        beta_hat_t: 0.0,
    });
    OutcomeSummary {
        saturation: saturation(outcome),
        beta_hat: l.beta_hat,
        exposure_t: l.exposure_t,
        beta_hat_t: l.beta_hat_t,
        t_symptomatic: [1, 2, 3].map(|n| nth_symptomatic(outcome, n)),
    }
}

/// Mean and (population) standard deviation per hourly bin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HourlyCurves {
    /// Ever-infected proportion `(E + I + R) / roster`.
    pub infected_prop_mean: Vec<f64>,
    pub infected_prop_std: Vec<f64>,
    /// `[S, E, I, R]` means.
    pub mean: Vec<[f64; 4]>,
    pub std: Vec<[f64; 4]>,
    pub runs: usize,
}

impl HourlyCurves {
    pub fn hours(&self) -> usize {
        self.mean.len()
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().collect::<CompensatedSum>().value() / n as f64;
    let var = values.map(|x| (x - mean) * (x - mean)).collect::<CompensatedSum>().value() / n as f64;
    (mean, var.max(0.0).sqrt())
}

/// Hourly mean/std across runs of one cohort (same roster size and horizon).
pub fn aggregate_hourly(outcomes: &[RunOutcome]) -> Result<HourlyCurves, MetricsError> {
    let first = outcomes.first().ok_or(MetricsError::EmptyCollection)?;
    if let Some(o) = outcomes.iter().find(|o| o.roster.len() != first.roster.len()) {
        return Err(MetricsError::MixedCohorts(format!(
            "roster {} vs {}",
            first.roster.len(),
            o.roster.len()
        )));
    }
    aggregate_hourly_pooled(outcomes)
}

/// Like [`aggregate_hourly`] but only requires a common horizon; counts
/// from different roster sizes are averaged as they are.
pub fn aggregate_hourly_pooled(outcomes: &[RunOutcome]) -> Result<HourlyCurves, MetricsError> {
    let first = outcomes.first().ok_or(MetricsError::EmptyCollection)?;
    let bins = first.hourly_counts.len();
    if let Some(o) = outcomes.iter().find(|o| o.hourly_counts.len() != bins) {
        return Err(MetricsError::MixedCohorts(format!(
            "{} vs {} hourly bins",
            bins,
            o.hourly_counts.len()
        )));
    }
    let n = outcomes.len();
    let mut curves = HourlyCurves {
        runs: n,
        ..HourlyCurves::default()
    };
    for h in 0..bins {
        let prop = outcomes.iter().map(move |o| {
            let c = o.hourly_counts[h];
            f64::from(c[1] + c[2] + c[3]) / o.roster.len() as f64
        });
        let (pm, ps) = mean_std(prop, n);
        curves.infected_prop_mean.push(pm);
        curves.infected_prop_std.push(ps);
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for c in 0..4 {
            let (m, s) = mean_std(outcomes.iter().map(move |o| f64::from(o.hourly_counts[h][c])), n);
            mean[c] = m;
            std[c] = s;
        }
        curves.mean.push(mean);
        curves.std.push(std);
    }
    Ok(curves)
}
