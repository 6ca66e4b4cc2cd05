//! Observation file formats.
//!
//! Fused CSV: `t_s,person_id,role,present,x_m,y_m,facing_x,facing_y`, one
//! row per person per second, position columns empty when absent.
//!
//! Raw-tag CSV: `t_s,person_id,role,side,x_m,y_m` with `side` in `{L,R}`.
//!
//! Both are accompanied by a TOML sidecar (`<stem>.meta.toml`) holding the
//! class id, the room area, an optional roster and optional activity
//! intervals.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fusion::{fuse_tags, Side, TagSample};
use super::resample::resample;
use super::{Activity, Observation, Person, Pose, Role, TrajectoryError, TrajectoryFrame};
use crate::geometry::Vec2;

pub const FUSED_HEADER: [&str; 8] = [
    "t_s", "person_id", "role", "present", "x_m", "y_m", "facing_x", "facing_y",
];
pub const RAW_HEADER: [&str; 6] = ["t_s", "person_id", "role", "side", "x_m", "y_m"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// Left/right hip tags, fused and resampled on load.
    Raw,
    /// Already fused 1 Hz tracks.
    Fused,
}

impl FromStr for InputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" | "raw-tags" => Ok(Self::Raw),
            "fused" => Ok(Self::Fused),
            other => Err(format!("unknown observation format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityInterval {
    pub start_s: i64,
    pub end_s: i64,
    pub label: Activity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub class_id: String,
    pub room_area_m2: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roster: Vec<Person>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub activity: Vec<ActivityInterval>,
}

/// `data/obs.csv` → `data/obs.meta.toml`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.toml")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrajectoryError + '_ {
    move |source| TrajectoryError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, TrajectoryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| {
        let (line, col) = e
            .span()
            .map(|span| {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() as u64 + 1;
                let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
                (line, col.to_string())
            })
            .unwrap_or((0, String::new()));
        TrajectoryError::Parse {
            path: path.display().to_string(),
            line,
            column: col,
            message: e.message().to_string(),
        }
    })
}

pub fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<(), TrajectoryError> {
    let text = toml::to_string(sidecar).map_err(|e| TrajectoryError::Validation(e.to_string()))?;
    fs::write(path, text).map_err(io_err(path))
}

/// Column lookup over a CSV header that reports missing columns as a schema error.
struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(path: &Path, headers: &csv::StringRecord, required: &[&str]) -> Result<Self, TrajectoryError> {
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        let missing: Vec<String> = required
            .iter()
            .filter(|c| !index.contains_key(**c))
            .map(|c| c.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(TrajectoryError::Schema {
                path: path.display().to_string(),
                missing,
            });
        }
        Ok(Self { index })
    }
}

struct Row<'a> {
    path: &'a Path,
    line: u64,
    record: &'a csv::StringRecord,
    columns: &'a Columns,
}

impl Row<'_> {
    fn raw(&self, col: &str) -> &str {
        self.record.get(self.columns.index[col]).unwrap_or("").trim()
    }

    fn err(&self, col: &str, message: String) -> TrajectoryError {
        TrajectoryError::Parse {
            path: self.path.display().to_string(),
            line: self.line,
            column: col.to_string(),
            message,
        }
    }

    fn parse<T: FromStr>(&self, col: &str) -> Result<T, TrajectoryError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(col);
        raw.parse::<T>()
            .map_err(|e| self.err(col, format!("cannot parse {raw:?}: {e}")))
    }

    fn finite(&self, col: &str) -> Result<f64, TrajectoryError> {
        let v: f64 = self.parse(col)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(col, format!("non-finite value {v}")))
        }
    }
}

fn for_each_row(
    path: &Path,
    required: &[&str],
    mut f: impl FnMut(&Row<'_>) -> Result<(), TrajectoryError>,
) -> Result<(), TrajectoryError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let csv_err = |e: csv::Error| TrajectoryError::Parse {
        path: path.display().to_string(),
        line: e.position().map_or(0, |p| p.line()),
        column: String::new(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let columns = Columns::new(path, &headers, required)?;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(csv_err)? {
        let line = record.position().map_or(0, |p| p.line());
        f(&Row {
            path,
            line,
            record: &record,
            columns: &columns,
        })?;
    }
    Ok(())
}

/// Resolves the roster: the sidecar's when given, otherwise first-appearance order.
fn resolve_roster(sidecar: &Sidecar, seen: &[(String, Role)]) -> Result<Vec<Person>, TrajectoryError> {
    if sidecar.roster.is_empty() {
        return Ok(seen.iter().map(|(id, role)| Person::new(id.clone(), *role)).collect());
    }
    for (id, role) in seen {
        match sidecar.roster.iter().find(|p| &p.id == id) {
            None => {
                return Err(TrajectoryError::Validation(format!(
                    "person {id:?} appears in the track file but not in the roster"
                )))
            }
            Some(p) if p.role != *role => {
                return Err(TrajectoryError::Validation(format!(
                    "person {id:?} has role {role} in the track file but {} in the roster",
                    p.role
                )))
            }
            Some(_) => {}
        }
    }
    Ok(sidecar.roster.clone())
}

fn activity_labels(intervals: &[ActivityInterval], frames: &[TrajectoryFrame]) -> Result<Option<Vec<Activity>>, TrajectoryError> {
    if intervals.is_empty() {
        return Ok(None);
    }
    let mut labels = Vec::with_capacity(frames.len());
    for f in frames {
        let hit = intervals
            .iter()
            .find(|iv| iv.start_s <= f.t && f.t < iv.end_s)
            .ok_or_else(|| TrajectoryError::Validation(format!("no activity label covers t={}", f.t)))?;
        labels.push(hit.label);
    }
    Ok(Some(labels))
}

fn activity_intervals(obs: &Observation) -> Vec<ActivityInterval> {
    let Some(labels) = &obs.activity else {
        return Vec::new();
    };
    let mut out: Vec<ActivityInterval> = Vec::new();
    for (f, &label) in obs.frames.iter().zip(labels) {
        match out.last_mut() {
            Some(iv) if iv.label == label && iv.end_s == f.t => iv.end_s = f.t + 1,
            _ => out.push(ActivityInterval {
                start_s: f.t,
                end_s: f.t + 1,
                label,
            }),
        }
    }
    out
}

fn load_fused(path: &Path, sidecar: &Sidecar) -> Result<Observation, TrajectoryError> {
    let mut seen: Vec<(String, Role)> = Vec::new();
    let mut seen_idx: HashMap<String, usize> = HashMap::new();
    let mut rows: BTreeMap<i64, Vec<(usize, Option<Pose>)>> = BTreeMap::new();

    for_each_row(path, &FUSED_HEADER, |row| {
        let t: i64 = row.parse("t_s")?;
        let id = row.raw("person_id").to_string();
        if id.is_empty() {
            return Err(row.err("person_id", "empty person id".into()));
        }
        let role: Role = row.parse("role")?;
        let k = *seen_idx.entry(id.clone()).or_insert_with(|| {
            seen.push((id.clone(), role));
            seen.len() - 1
        });
        if seen[k].1 != role {
            return Err(row.err("role", format!("role of {id:?} changes within the file")));
        }
        let present = match row.raw("present") {
            "1" => true,
            "0" => false,
            other => return Err(row.err("present", format!("expected 0 or 1, got {other:?}"))),
        };
        let pose = if present {
            let pos = Vec2::new(row.finite("x_m")?, row.finite("y_m")?);
            let facing = Vec2::new(row.finite("facing_x")?, row.finite("facing_y")?);
            Some(Pose { pos, facing })
        } else {
            None
        };
        let slot = rows.entry(t).or_default();
        if slot.iter().any(|(j, _)| *j == k) {
            return Err(row.err("t_s", format!("duplicate row for {id:?} at t={t}")));
        }
        slot.push((k, pose));
        Ok(())
    })?;

    let roster = resolve_roster(sidecar, &seen)?;
    let roster_idx: HashMap<&str, usize> = roster.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let remap: Vec<usize> = seen.iter().map(|(id, _)| roster_idx[id.as_str()]).collect();

    let mut frames = Vec::new();
    if let (Some((&first, _)), Some((&last, _))) = (rows.first_key_value(), rows.last_key_value()) {
        for t in first..=last {
            let mut poses = vec![None; roster.len()];
            if let Some(entries) = rows.get(&t) {
                for &(k, pose) in entries {
                    poses[remap[k]] = pose;
                }
            }
            frames.push(TrajectoryFrame { t, poses });
        }
    }
    let activity = activity_labels(&sidecar.activity, &frames)?;
    Observation::new(sidecar.class_id.clone(), roster, sidecar.room_area_m2, frames, activity)
}

fn load_raw(path: &Path, sidecar: &Sidecar) -> Result<Observation, TrajectoryError> {
    let mut seen: Vec<(String, Role)> = Vec::new();
    let mut tags: HashMap<String, (Vec<TagSample>, Vec<TagSample>)> = HashMap::new();

    for_each_row(path, &RAW_HEADER, |row| {
        let t = row.finite("t_s")?;
        if t < 0.0 {
            return Err(row.err("t_s", format!("negative time {t}")));
        }
        let id = row.raw("person_id").to_string();
        if id.is_empty() {
            return Err(row.err("person_id", "empty person id".into()));
        }
        let role: Role = row.parse("role")?;
        match seen.iter().find(|(s, _)| *s == id) {
            None => seen.push((id.clone(), role)),
            Some((_, r)) if *r != role => {
                return Err(row.err("role", format!("role of {id:?} changes within the file")))
            }
            Some(_) => {}
        }
        let side = match row.raw("side") {
            "L" | "l" => Side::Left,
            "R" | "r" => Side::Right,
            other => return Err(row.err("side", format!("expected L or R, got {other:?}"))),
        };
        let sample = TagSample {
            t,
            person_id: id.clone(),
            side,
            x: row.finite("x_m")?,
            y: row.finite("y_m")?,
        };
        let entry = tags.entry(id).or_default();
        match side {
            Side::Left => entry.0.push(sample),
            Side::Right => entry.1.push(sample),
        }
        Ok(())
    })?;

    let roster = resolve_roster(sidecar, &seen)?;
    let mut fused = Vec::with_capacity(roster.len());
    for person in &roster {
        let track = match tags.get_mut(&person.id) {
            Some((left, right)) => {
                left.sort_by(|a, b| a.t.total_cmp(&b.t));
                right.sort_by(|a, b| a.t.total_cmp(&b.t));
                match fuse_tags(left, right) {
                    Ok(f) => f.samples,
                    Err(TrajectoryError::UnpairedWindow { .. }) => Vec::new(),
                    Err(e) => return Err(e),
                }
            }
            None => Vec::new(),
        };
        fused.push(track);
    }

    let start = fused.iter().filter_map(|s| s.first()).map(|s| s.t.ceil() as i64).min();
    let end = fused.iter().filter_map(|s| s.last()).map(|s| s.t.floor() as i64).max();
    let mut frames = Vec::new();
    if let (Some(start), Some(end)) = (start, end) {
        let len = usize::try_from(end - start + 1).unwrap_or(0);
        let tracks = fused
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    resample(s, start, len).map(Some)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        for k in 0..len {
            frames.push(TrajectoryFrame {
                t: start + k as i64,
                poses: tracks.iter().map(|tr| tr.as_ref().and_then(|u| u.poses[k])).collect(),
            });
        }
    }
    let activity = activity_labels(&sidecar.activity, &frames)?;
    Observation::new(sidecar.class_id.clone(), roster, sidecar.room_area_m2, frames, activity)
}

/// Reads an observation and its sidecar and checks every invariant.
pub fn load_observation(path: &Path, format: InputFormat) -> Result<Observation, TrajectoryError> {
    let sidecar = read_sidecar(&sidecar_path(path))?;
    match format {
        InputFormat::Fused => load_fused(path, &sidecar),
        InputFormat::Raw => load_raw(path, &sidecar),
    }
}

/// Writes the fused CSV plus its sidecar.
pub fn save_observation(obs: &Observation, path: &Path) -> Result<(), TrajectoryError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| TrajectoryError::Io {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    let wrap = |e: csv::Error| TrajectoryError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    writer.write_record(FUSED_HEADER).map_err(wrap)?;
    for frame in &obs.frames {
        let t = frame.t.to_string();
        for (person, pose) in obs.roster.iter().zip(&frame.poses) {
            let fields: [String; 4] = match pose {
                Some(p) => [
                    p.pos.x.to_string(),
                    p.pos.y.to_string(),
                    p.facing.x.to_string(),
                    p.facing.y.to_string(),
                ],
                None => Default::default(),
            };
            let present = if pose.is_some() { "1" } else { "0" };
            writer
                .write_record([
                    t.as_str(),
                    person.id.as_str(),
                    person.role.as_str(),
                    present,
                    &fields[0],
                    &fields[1],
                    &fields[2],
                    &fields[3],
                ])
                .map_err(wrap)?;
        }
    }
    writer.flush().map_err(io_err(path))?;
    write_sidecar(
        &sidecar_path(path),
        &Sidecar {
            class_id: obs.class_id.clone(),
            room_area_m2: obs.room_area,
            roster: obs.roster.clone(),
            activity: activity_intervals(obs),
        },
    )
}
