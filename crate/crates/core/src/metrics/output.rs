//! CSV writers for run summaries, hourly curves and emergence tables.

use std::io::Write;

use super::{aggregate_hourly_pooled, emergence_proportion, median_nth_symptomatic, summarize, MetricsError};
use crate::scenario::RunOutcome;

pub const SUMMARY_HEADER: [&str; 11] = [
    "scenario",
    "observation",
    "patient_zero",
    "seed",
    "saturation",
    "beta_hat",
    "T",
    "beta_hat_T",
    "t_sympt_1",
    "t_sympt_2",
    "t_sympt_3",
];
pub const CURVES_HEADER: [&str; 8] = [
    "scenario",
    "hour",
    "mean_infected_prop",
    "std_infected_prop",
    "mean_S",
    "mean_E",
    "mean_I",
    "mean_R",
];
pub const EMERGENCE_HEADER: [&str; 4] = ["scenario", "n", "proportion_not_emerged", "median_days"];

/// Symptomatic ranks reported in summary and emergence tables.
pub const EMERGENCE_RANKS: [usize; 3] = [1, 2, 3];

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Scenario labels in first-appearance order.
fn scenarios(outcomes: &[RunOutcome]) -> Vec<&str> {
    let mut seen: Vec<&str> = Vec::new();
    for o in outcomes {
        if !seen.contains(&o.scenario.as_str()) {
            seen.push(&o.scenario);
        }
    }
    seen
}

fn cohort(outcomes: &[RunOutcome], scenario: &str) -> Vec<RunOutcome> {
    outcomes.iter().filter(|o| o.scenario == scenario).cloned().collect()
}

pub fn write_summary<W: Write>(out: W, outcomes: &[RunOutcome]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for o in outcomes {
        let s = summarize(o);
        w.write_record([
            o.scenario.clone(),
            o.observation_id.clone(),
            o.patient_zero.clone(),
            o.seed.to_string(),
            s.saturation.to_string(),
            s.beta_hat.to_string(),
            s.exposure_t.to_string(),
            s.beta_hat_t.to_string(),
            opt(s.t_symptomatic[0]),
            opt(s.t_symptomatic[1]),
            opt(s.t_symptomatic[2]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One block of hourly rows per scenario, pooled over observations.
pub fn write_curves<W: Write>(out: W, outcomes: &[RunOutcome]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVES_HEADER)?;
    for sc in scenarios(outcomes) {
        let curves = aggregate_hourly_pooled(&cohort(outcomes, sc))?;
        for h in 0..curves.hours() {
            let m = curves.mean[h];
            w.write_record([
                sc.to_string(),
                h.to_string(),
                curves.infected_prop_mean[h].to_string(),
                curves.infected_prop_std[h].to_string(),
                m[0].to_string(),
                m[1].to_string(),
                m[2].to_string(),
                m[3].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_emergence<W: Write>(out: W, outcomes: &[RunOutcome]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EMERGENCE_HEADER)?;
    for sc in scenarios(outcomes) {
        let runs = cohort(outcomes, sc);
        for n in EMERGENCE_RANKS {
            w.write_record([
                sc.to_string(),
                n.to_string(),
                emergence_proportion(&runs, n)?.to_string(),
                opt(median_nth_symptomatic(&runs, n)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
