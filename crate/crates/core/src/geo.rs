//! Geocoded scenarios and their mapping onto the grid.
//!
//! The region is treated as an affine lat/lon rectangle. Row 0 is the
//! northernmost band and column 0 the westernmost. Points on the maximum
//! edge are folded into the last row/column so the rectangle is fully
//! covered.

use std::collections::HashSet;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Agent, Cell, EntityId, EnvError, GridConfig, Victim, VictimStatus, WorldState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("point ({lat}, {lon}) lies outside the scenario bounds")]
    OutOfRegion { lat: f64, lon: f64 },
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("parse error at {location}: {reason}")]
    ParseError { location: String, reason: String },
    #[error("duplicate id {0:?} within a snapshot")]
    DuplicateId(String),
    #[error("snapshot timestamps are not strictly increasing ({previous} then {next})")]
    NonMonotonicTimestamps { previous: String, next: String },
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Default for GeoBounds {
    /// The downtown Houston study region.
    fn default() -> Self {
        Self {
            lat_min: 29.422486,
            lat_max: 30.154665,
            lon_min: -95.874178,
            lon_max: -95.069705,
        }
    }
}

impl GeoBounds {
    pub fn validate(&self) -> Result<(), GeoError> {
        let all = [self.lat_min, self.lat_max, self.lon_min, self.lon_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::InvalidBounds("non-finite coordinate".into()));
        }
        if self.lat_min >= self.lat_max {
            return Err(GeoError::InvalidBounds("lat_min must be below lat_max".into()));
        }
        if self.lon_min >= self.lon_max {
            return Err(GeoError::InvalidBounds("lon_min must be below lon_max".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat)
            && (self.lon_min..=self.lon_max).contains(&p.lon)
    }

    pub fn clamp(&self, p: GeoPoint) -> GeoPoint {
        GeoPoint {
            lat: p.lat.clamp(self.lat_min, self.lat_max),
            lon: p.lon.clamp(self.lon_min, self.lon_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

fn band(offset: f64, span: f64, count: u32) -> u32 {
    let raw = (offset / span * count as f64).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as u64).min(count as u64 - 1) as u32
    }
}

/// Maps a geographic point to its grid cell.
pub fn geo_to_cell(
    bounds: &GeoBounds,
    rows: u32,
    cols: u32,
    p: GeoPoint,
    clamp: bool,
) -> Result<Cell, GeoError> {
    if !p.lat.is_finite() || !p.lon.is_finite() {
        return Err(GeoError::NonFinite);
    }
    let p = if bounds.contains(p) {
        p
    } else if clamp {
        bounds.clamp(p)
    } else {
        return Err(GeoError::OutOfRegion {
            lat: p.lat,
            lon: p.lon,
        });
    };
    let row = band(bounds.lat_max - p.lat, bounds.lat_max - bounds.lat_min, rows);
    let col = band(p.lon - bounds.lon_min, bounds.lon_max - bounds.lon_min, cols);
    Ok(Cell::new(row, col))
}

/// Geographic center of a cell.
pub fn cell_center(bounds: &GeoBounds, rows: u32, cols: u32, cell: Cell) -> GeoPoint {
    let lat_step = (bounds.lat_max - bounds.lat_min) / rows as f64;
    let lon_step = (bounds.lon_max - bounds.lon_min) / cols as f64;
    GeoPoint {
        lat: bounds.lat_max - (cell.row as f64 + 0.5) * lat_step,
        lon: bounds.lon_min + (cell.col as f64 + 0.5) * lon_step,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoEntity {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

impl GeoEntity {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64) -> Self {
        Self {
            id: id.into(),
            lat,
            lon,
        }
    }

    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSnapshot {
    pub timestamp: String,
    #[serde(default)]
    pub volunteers: Vec<GeoEntity>,
    #[serde(default)]
    pub victims: Vec<GeoEntity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: u32,
    pub cols: u32,
}

impl Default for GridDims {
    fn default() -> Self {
        Self { rows: 25, cols: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bounds: GeoBounds,
    pub grid: GridDims,
    #[serde(default)]
    pub snapshots: Vec<ScenarioSnapshot>,
}

impl Scenario {
    fn validate(&self) -> Result<(), GeoError> {
        self.bounds.validate()?;
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return Err(GeoError::ParseError {
                location: "grid".into(),
                reason: "rows and cols must be at least 1".into(),
            });
        }
        let mut previous: Option<(DateTime<FixedOffset>, &str)> = None;
        for (i, snap) in self.snapshots.iter().enumerate() {
            let ts = DateTime::parse_from_rfc3339(&snap.timestamp).map_err(|e| {
                GeoError::ParseError {
                    location: format!("snapshots[{i}].timestamp"),
                    reason: format!("{:?}: {e}", snap.timestamp),
                }
            })?;
            if let Some((prev, prev_text)) = previous {
                if ts <= prev {
                    return Err(GeoError::NonMonotonicTimestamps {
                        previous: prev_text.to_string(),
                        next: snap.timestamp.clone(),
                    });
                }
            }
            previous = Some((ts, &snap.timestamp));
            unique_ids(&snap.volunteers)?;
            unique_ids(&snap.victims)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn unique_ids(entities: &[GeoEntity]) -> Result<(), GeoError> {
    let mut seen = HashSet::new();
    for e in entities {
        if !seen.insert(e.id.as_str()) {
            return Err(GeoError::DuplicateId(e.id.clone()));
        }
    }
    Ok(())
}

/// Parses a scenario document. JSON objects are detected by a leading `{`;
/// anything else is read as CSV with the default bounds and a 25x25 grid.
pub fn parse_scenario(text: &str) -> Result<Scenario, GeoError> {
    if text.trim_start().starts_with('{') {
        parse_scenario_json(text)
    } else {
        parse_scenario_csv(text, GeoBounds::default(), GridDims::default())
    }
}

pub fn parse_scenario_json(text: &str) -> Result<Scenario, GeoError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| GeoError::ParseError {
        location: format!("line {} column {}", e.line(), e.column()),
        reason: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    timestamp: String,
    role: String,
    id: String,
    lat: f64,
    lon: f64,
}

/// Reads `timestamp,role,id,lat,lon` rows. Consecutive rows sharing a
/// timestamp form one snapshot.
pub fn parse_scenario_csv(
    text: &str,
    bounds: GeoBounds,
    grid: GridDims,
) -> Result<Scenario, GeoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let expected = ["timestamp", "role", "id", "lat", "lon"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(GeoError::ParseError {
            location: "line 1".into(),
            reason: format!("expected header {}", expected.join(",")),
        });
    }

    let mut snapshots: Vec<ScenarioSnapshot> = Vec::new();
    for record in reader.deserialize::<CsvRow>() {
        let row = record.map_err(csv_error)?;
        if snapshots.last().map(|s| s.timestamp != row.timestamp).unwrap_or(true) {
            snapshots.push(ScenarioSnapshot {
                timestamp: row.timestamp.clone(),
                volunteers: Vec::new(),
                victims: Vec::new(),
            });
        }
        let snap = snapshots.last_mut().expect("pushed above");
        let entity = GeoEntity::new(row.id, row.lat, row.lon);
        match row.role.as_str() {
            "volunteer" => snap.volunteers.push(entity),
            "victim" => snap.victims.push(entity),
            other => {
                return Err(GeoError::ParseError {
                    location: format!("timestamp {}", row.timestamp),
                    reason: format!("unknown role {other:?}"),
                })
            }
        }
    }

    let scenario = Scenario {
        bounds,
        grid,
        snapshots,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Checks that every entity maps onto the grid. With `clamp`, out-of-region
/// coordinates are moved onto the nearest edge instead of being rejected.
pub fn normalize_scenario(scenario: &Scenario, clamp: bool) -> Result<Scenario, GeoError> {
    let mut out = scenario.clone();
    for snap in &mut out.snapshots {
        for e in snap.volunteers.iter_mut().chain(snap.victims.iter_mut()) {
            let p = e.point();
            geo_to_cell(&out.bounds, out.grid.rows, out.grid.cols, p, clamp)?;
            if !out.bounds.contains(p) {
                let q = out.bounds.clamp(p);
                e.lat = q.lat;
                e.lon = q.lon;
            }
        }
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> GeoError {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "input".to_string());
    GeoError::ParseError {
        location,
        reason: e.to_string(),
    }
}

fn map_entities(
    entities: &[GeoEntity],
    bounds: &GeoBounds,
    config: &GridConfig,
    clamp: bool,
) -> Result<Vec<(EntityId, Cell)>, GeoError> {
    entities
        .iter()
        .map(|e| {
            let cell = geo_to_cell(bounds, config.rows, config.cols, e.point(), clamp)?;
            Ok((EntityId::new(&e.id), cell))
        })
        .collect()
}

/// Builds a fresh world from one snapshot, keeping the snapshot's ids.
pub fn snapshot_to_world(
    snap: &ScenarioSnapshot,
    bounds: &GeoBounds,
    config: &GridConfig,
    clamp: bool,
) -> Result<WorldState, GeoError> {
    let agents = map_entities(&snap.volunteers, bounds, config, clamp)?;
    let victims = map_entities(&snap.victims, bounds, config, clamp)?;
    Ok(WorldState::from_entities(config, agents, victims)?)
}

/// Merges an hourly snapshot into an existing world.
///
/// New ids are added. Agents and waiting victims whose ids reappear move to
/// the snapshot position. Rescued victims stay rescued where they are.
/// Entities missing from the snapshot are kept.
pub fn apply_snapshot(
    world: &WorldState,
    snap: &ScenarioSnapshot,
    bounds: &GeoBounds,
    config: &GridConfig,
    clamp: bool,
) -> Result<WorldState, GeoError> {
    let agents = map_entities(&snap.volunteers, bounds, config, clamp)?;
    let victims = map_entities(&snap.victims, bounds, config, clamp)?;

    let mut next = world.clone();
    for (id, cell) in agents {
        match next.agents.iter_mut().find(|a| a.id == id) {
            Some(agent) => agent.cell = cell,
            None => next.agents.push(Agent { id, cell }),
        }
    }
    for (id, cell) in victims {
        match next.victims.iter_mut().find(|v| v.id == id) {
            Some(victim) if victim.is_waiting() => victim.cell = cell,
            Some(_) => {}
            None => next.victims.push(Victim {
                id,
                cell,
                status: VictimStatus::Waiting,
            }),
        }
    }
    next.check(config)?;
    Ok(next)
}
