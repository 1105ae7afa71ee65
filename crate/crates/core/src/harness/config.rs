//! Simulation configuration: TOML files layered over defaults, plus dotted
//! `key=value` overrides.
//!
//! ```toml
//! [room]
//! preset = "conference-1"     # <archetype>-<index>, or
//! # file = "rooms/lab.toml"   # a room file, relative to this config
//!
//! [grid]
//! cell_size = 0.1             # m
//!
//! [time]
//! dt = 0.02                   # s
//! horizon_minutes = 90.0
//! sample_interval = 1.0       # s between series samples
//!
//! [flow]                      # viscosity, turbulent_multiplier, gravity, ...
//! [pathogen]                  # decay_rate, diffusivity, capture_radius, kernel_scales
//! [population]                # t_in = { mean = 1.42, std = 0.25 }, ...
//!
//! [pip.mask]
//! eta = 0.0
//! kappa = 0.0
//! mode = "symmetric"          # or "exhale-only"
//!
//! [pip.ventilation]
//! chi = 0.0
//! period_minutes = 30.0
//!
//! [run]
//! seed = 1
//! realizations = 1
//! # output_dir = "out"
//! ```
//!
//! Every key must exist in the schema and keep the type of its default
//! (integers are accepted where floats are expected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use crate::agents::PopulationDistributions;
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::geometry::{load_room, preset_room, Archetype, RoomSpec};
use crate::interventions::{MaskPolicy, VentilationPolicy};
use crate::transport::PathogenParams;

/// Keys that have no default value, with the TOML type they take.
const OPTIONAL_KEYS: [(&str, &str); 4] = [
    ("room.preset", "string"),
    ("room.file", "string"),
    ("flow.lid_velocity", "array"),
    ("run.output_dir", "string"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for RoomSource {
    fn default() -> Self {
        Self {
            preset: Some("conference-1".into()),
            file: None,
        }
    }
}

/// Splits `movie-theater-5` into its archetype and index.
pub fn parse_preset_id(id: &str) -> Result<(Archetype, u8)> {
    let bad = || Error::InvalidArgument(format!("unknown preset `{id}` (expected e.g. `classroom-1`)"));
    let (slug, index) = id.rsplit_once('-').ok_or_else(bad)?;
    let archetype = Archetype::from_slug(slug).ok_or_else(bad)?;
    let index: u8 = index.parse().map_err(|_| bad())?;
    Ok((archetype, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cell_size: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cell_size: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub horizon_minutes: f64,
    pub sample_interval: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            horizon_minutes: 90.0,
            sample_interval: 1.0,
        }
    }
}

impl TimeConfig {
    pub fn steps(&self) -> usize {
        (self.horizon_minutes * 60.0 / self.dt).round() as usize
    }

    pub fn sample_every(&self) -> usize {
        ((self.sample_interval / self.dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipConfig {
    pub mask: MaskPolicy,
    pub ventilation: VentilationPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            realizations: 1,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub room: RoomSource,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub flow: FlowParams,
    pub pathogen: PathogenParams,
    pub population: PopulationDistributions,
    pub pip: PipConfig,
    pub run: RunConfig,
}

impl SimConfig {
    /// Reads `path` over the defaults. Relative room files resolve against
    /// the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingConfig(path.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        };
        let mut config = Self::parse(&text, path)?;
        if let Some(file) = &config.room.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    config.room.file = Some(dir.join(file));
                }
            }
        }
        Ok(config)
    }

    /// Parses TOML text over the defaults; `origin` only labels errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: Value = toml::from_str(text).map_err(|e| Error::Format {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut tree = Self::default().to_value();
        let Value::Table(top) = file else {
            unreachable!("a TOML document is a table")
        };
        for (key, value) in top {
            merge(&mut tree, &key, value)?;
        }
        Self::from_value(tree)
    }

    /// Applies `key=value` overrides in order. Values are TOML literals; a
    /// value that does not parse as one is taken as a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut tree = self.to_value();
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("override `{item}` is not key=value")))?;
            let key = key.trim();
            let value = parse_literal(raw.trim());
            let path: Vec<&str> = key.split('.').collect();
            set_path(&mut tree, &path, value, key)?;
        }
        Self::from_value(tree)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        match (&self.room.preset, &self.room.file) {
            (Some(_), Some(_)) => return fail("room: set either preset or file, not both".into()),
            (None, None) => return fail("room: set preset or file".into()),
            (Some(p), None) => {
                parse_preset_id(p).map_err(|e| Error::Config(e.to_string()))?;
            }
            (None, Some(_)) => {}
        }
        if !(self.grid.cell_size > 0.0 && self.grid.cell_size.is_finite()) {
            return fail(format!("grid.cell_size must be positive, got {}", self.grid.cell_size));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return fail(format!("time.dt must be positive, got {}", t.dt));
        }
        if !(t.horizon_minutes > 0.0 && t.horizon_minutes.is_finite()) {
            return fail(format!("time.horizon_minutes must be positive, got {}", t.horizon_minutes));
        }
        if !(t.sample_interval > 0.0 && t.sample_interval.is_finite()) {
            return fail(format!("time.sample_interval must be positive, got {}", t.sample_interval));
        }
        if t.steps() == 0 {
            return fail("time.horizon_minutes is shorter than one step".into());
        }
        if self.run.realizations == 0 {
            return fail("run.realizations must be at least 1".into());
        }
        if self.run.seed > i64::MAX as u64 {
            return fail("run.seed must fit in a signed 64-bit integer".into());
        }
        self.flow.validate().map_err(Error::Config)?;
        self.pathogen.validate().map_err(Error::Config)?;
        self.population.validate().map_err(Error::Config)?;
        self.pip.mask.validate().map_err(Error::Config)?;
        self.pip.ventilation.validate().map_err(Error::Config)?;
        Ok(())
    }

    pub fn resolve_room(&self) -> Result<RoomSpec> {
        match (&self.room.preset, &self.room.file) {
            (Some(id), None) => {
                let (archetype, index) = parse_preset_id(id)?;
                preset_room(archetype, index)
            }
            (None, Some(file)) => load_room(file),
            _ => Err(Error::Config("room: set exactly one of preset or file".into())),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    fn to_value(&self) -> Value {
        Value::try_from(self).expect("config converts to a TOML value")
    }

    fn from_value(tree: Value) -> Result<Self> {
        let config: Self = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

fn parse_literal(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

fn optional_type(key: &str) -> Option<&'static str> {
    OPTIONAL_KEYS.iter().find(|(k, _)| *k == key).map(|(_, t)| *t)
}

/// Merges a file value at dotted `key` into the defaults tree.
fn merge(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    match value {
        Value::Table(t) if is_table_at(tree, key) => {
            // A room source replaces the default one wholesale.
            if key == "room" && (t.contains_key("preset") || t.contains_key("file")) {
                if let Some(Value::Table(room)) = lookup_mut(tree, key) {
                    room.remove("preset");
                    room.remove("file");
                }
            }
            for (k, v) in t {
                merge(tree, &format!("{key}.{k}"), v)?;
            }
            Ok(())
        }
        value => {
            let path: Vec<&str> = key.split('.').collect();
            set_leaf(tree, &path, value, key)
        }
    }
}

fn is_table_at(tree: &Value, key: &str) -> bool {
    let mut cur = tree;
    for part in key.split('.') {
        match cur.get(part) {
            Some(v) => cur = v,
            None => return false,
        }
    }
    cur.is_table() && optional_type(key).is_none()
}

fn lookup_mut<'a>(tree: &'a mut Value, key: &str) -> Option<&'a mut Value> {
    let mut cur = tree;
    for part in key.split('.') {
        cur = cur.get_mut(part)?;
    }
    Some(cur)
}

/// Override entry point: tables may be replaced only by tables of known
/// keys, so route through the same leaf check.
fn set_path(tree: &mut Value, path: &[&str], value: Value, key: &str) -> Result<()> {
    if let Value::Table(t) = value {
        for (k, v) in t {
            let sub = format!("{key}.{k}");
            let p: Vec<&str> = sub.split('.').collect();
            set_path(tree, &p, v, &sub)?;
        }
        return Ok(());
    }
    if key == "room.preset" || key == "room.file" {
        if let Some(Value::Table(room)) = lookup_mut(tree, "room") {
            room.remove("preset");
            room.remove("file");
        }
    }
    set_leaf(tree, path, value, key)
}

fn set_leaf(tree: &mut Value, path: &[&str], value: Value, key: &str) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty key");
    let mut cur = tree;
    for part in parents {
        cur = match cur.get_mut(*part) {
            Some(v) if v.is_table() => v,
            _ => return Err(Error::UnknownKey(key.to_string())),
        };
    }
    let table = cur.as_table_mut().expect("checked table");
    let expected = match table.get(*last) {
        Some(existing) => type_name(existing),
        None => optional_type(key).ok_or_else(|| Error::UnknownKey(key.to_string()))?,
    };
    let value = match (expected, value) {
        ("float", Value::Integer(i)) => Value::Float(i as f64),
        (_, v) => v,
    };
    let found = type_name(&value);
    // Arrays are checked element-wise by deserialization.
    if found != expected {
        return Err(Error::TypeMismatch {
            key: key.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    let value = match value {
        Value::Array(items) => Value::Array(
            items
                .into_iter()
                .map(|v| match v {
                    Value::Integer(i) => Value::Float(i as f64),
                    v => v,
                })
                .collect(),
        ),
        v => v,
    };
    table.insert(last.to_string(), value);
    Ok(())
}
