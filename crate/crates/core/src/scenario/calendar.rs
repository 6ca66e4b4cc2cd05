use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kernel::SECONDS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    #[default]
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    const ALL: [Weekday; 7] = [
        Weekday::Monday,
        Weekday::Tuesday,
        Weekday::Wednesday,
        Weekday::Thursday,
        Weekday::Friday,
        Weekday::Saturday,
        Weekday::Sunday,
    ];

    pub fn plus_days(self, days: u32) -> Weekday {
        Self::ALL[(self as usize + days as usize) % 7]
    }

    pub fn is_school_day(self) -> bool {
        !matches!(self, Weekday::Saturday | Weekday::Sunday)
    }
}

impl fmt::Display for Weekday {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format!("{self:?}").to_lowercase())
    }
}

impl FromStr for Weekday {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|d| {
                let name = d.to_string();
                s == name || (s.len() >= 3 && name.starts_with(&s))
            })
            .ok_or_else(|| format!("unknown weekday {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Session {
    /// Absolute seconds since the start of Day 0.
    pub start: f64,
    pub length: f64,
    pub weekday: Weekday,
}

/// Class sessions on Monday–Friday of each day in the horizon, one per day
/// at the same time of day. Day 0 starts at the first day's session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchoolCalendar {
    pub sessions: Vec<Session>,
    pub horizon_days: u32,
}

impl SchoolCalendar {
    pub fn horizon_s(&self) -> f64 {
        f64::from(self.horizon_days) * SECONDS_PER_DAY
    }

    /// Start-to-start gaps between consecutive sessions, seconds.
    pub fn gaps(&self) -> Vec<f64> {
        self.sessions.windows(2).map(|w| w[1].start - w[0].start).collect()
    }
}

pub fn build_calendar(horizon_days: u32, session_length: f64, start_weekday: Weekday) -> SchoolCalendar {
    let sessions = (0..horizon_days)
        .filter_map(|d| {
            let weekday = start_weekday.plus_days(d);
            weekday.is_school_day().then_some(Session {
                start: f64::from(d) * SECONDS_PER_DAY,
                length: session_length,
                weekday,
            })
        })
        .collect();
    SchoolCalendar {
        sessions,
        horizon_days,
    }
}
