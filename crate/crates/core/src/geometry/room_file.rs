//! TOML room description files.
//!
//! ```toml
//! name = "Seminar room"
//! archetype = "custom"          # optional; classroom | conference | movie-theater | restaurant | custom
//!
//! [dimensions]
//! L = 6.0                       # meters along x
//! W = 4.0                       # meters along y
//! H = 2.8                       # meters along z
//!
//! [[obstacles]]                 # closed axis-aligned boxes
//! min = [2.0, 1.5, 0.0]
//! max = [4.0, 2.5, 0.75]
//!
//! [[seats]]                     # seat base; the mouth sits 0.8 m above it
//! x = 1.5
//! y = 1.0
//! z = 0.0
//! alpha = 1.5707963267948966    # yaw from +x, radians in [0, 2π)
//! beta = 1.5707963267948966     # optional polar angle from +z, radians in [0, π]
//!
//! [[outlets]]                   # optional open boundary patches
//! min = [2.5, 1.5, 2.8]
//! max = [3.5, 2.5, 2.8]
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Aabb, Archetype, RoomSpec, Seat};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomFile {
    name: String,
    #[serde(default = "custom")]
    archetype: Archetype,
    dimensions: Dimensions,
    #[serde(default)]
    obstacles: Vec<Aabb>,
    #[serde(default)]
    seats: Vec<Seat>,
    #[serde(default)]
    outlets: Vec<Aabb>,
}

fn custom() -> Archetype {
    Archetype::Custom
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dimensions {
    #[serde(rename = "L")]
    length: f64,
    #[serde(rename = "W")]
    width: f64,
    #[serde(rename = "H")]
    height: f64,
}

pub fn load_room(path: impl AsRef<Path>) -> Result<RoomSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_room(&text, path)
}

/// Parses and validates room TOML; `origin` only labels error messages.
pub fn parse_room(text: &str, origin: &Path) -> Result<RoomSpec> {
    let file: RoomFile = toml::from_str(text).map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let room = RoomSpec {
        name: file.name,
        archetype: file.archetype,
        length: file.dimensions.length,
        width: file.dimensions.width,
        height: file.dimensions.height,
        obstacles: file.obstacles,
        seats: file.seats,
        outlets: file.outlets,
    };
    room.validate()?;
    Ok(room)
}

pub fn render_room(room: &RoomSpec) -> String {
    let file = RoomFile {
        name: room.name.clone(),
        archetype: room.archetype,
        dimensions: Dimensions {
            length: room.length,
            width: room.width,
            height: room.height,
        },
        obstacles: room.obstacles.clone(),
        seats: room.seats.clone(),
        outlets: room.outlets.clone(),
    };
    toml::to_string(&file).expect("room serializes to TOML")
}
