//! Room description, archetype presets and voxelization.
//!
//! Coordinates are in meters with the origin at a floor corner: `x` runs
//! along the room length `L`, `y` along the width `W` and `z` up to the
//! ceiling height `H`.

mod grid;
mod presets;
mod room_file;

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{build_grid, CellKind, FaceKind, Grid, MouthSite};
pub use presets::{preset_room, PRESET_TABLE};
pub use room_file::{load_room, parse_room, render_room};

/// Height of an agent's body box.
pub const BODY_HEIGHT: f64 = 1.70;
/// Extent of the body box across the facing direction.
pub const BODY_WIDTH: f64 = 0.55;
/// Extent of the body box along the facing direction.
pub const BODY_LENGTH: f64 = 0.40;
/// Mouth height above the seat base.
pub const MOUTH_HEIGHT: f64 = 0.80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    Classroom,
    Conference,
    MovieTheater,
    Restaurant,
    Custom,
}

impl Archetype {
    pub const PRESETS: [Archetype; 4] = [
        Archetype::Classroom,
        Archetype::Conference,
        Archetype::MovieTheater,
        Archetype::Restaurant,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Archetype::Classroom => "classroom",
            Archetype::Conference => "conference",
            Archetype::MovieTheater => "movie-theater",
            Archetype::Restaurant => "restaurant",
            Archetype::Custom => "custom",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        [
            Archetype::Classroom,
            Archetype::Conference,
            Archetype::MovieTheater,
            Archetype::Restaurant,
            Archetype::Custom,
        ]
        .into_iter()
        .find(|a| a.slug() == s)
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Interiors overlap; boxes that only touch do not intersect.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] < other.max[a] && other.min[a] < self.max[a])
    }

    pub fn within(&self, outer: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] >= outer.min[a] && self.max[a] <= outer.max[a])
    }

    fn is_ordered(&self) -> bool {
        (0..3).all(|a| self.min[a].is_finite() && self.max[a].is_finite() && self.min[a] <= self.max[a])
    }
}

/// Where an agent sits and which way it faces.
///
/// `alpha` is the yaw in the xy-plane measured from +x; `beta` is the polar
/// angle of the breathing direction measured from +z, so `beta = π/2` is
/// horizontal. Only `alpha` orients the body box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seat {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha: f64,
    #[serde(default = "horizontal")]
    pub beta: f64,
}

fn horizontal() -> f64 {
    FRAC_PI_2
}

impl Seat {
    pub fn new(x: f64, y: f64, z: f64, alpha: f64) -> Self {
        Self {
            x,
            y,
            z,
            alpha: alpha.rem_euclid(TAU),
            beta: FRAC_PI_2,
        }
    }

    pub fn mouth(&self) -> [f64; 3] {
        [self.x, self.y, self.z + MOUTH_HEIGHT]
    }

    /// Unit breathing direction.
    pub fn facing(&self) -> [f64; 3] {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        [ca * sb, sa * sb, cb]
    }

    /// Horizontal unit vector the body faces.
    pub fn yaw_dir(&self) -> [f64; 2] {
        let (s, c) = self.alpha.sin_cos();
        [c, s]
    }

    /// Point membership in the yaw-oriented body box.
    pub fn body_contains(&self, p: [f64; 3]) -> bool {
        if p[2] < self.z || p[2] > self.z + BODY_HEIGHT {
            return false;
        }
        let [c, s] = self.yaw_dir();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        let along = dx * c + dy * s;
        let across = -dx * s + dy * c;
        along.abs() <= 0.5 * BODY_LENGTH && across.abs() <= 0.5 * BODY_WIDTH
    }

    /// Axis-aligned bound of the oriented body box.
    pub fn body_bounds(&self) -> Aabb {
        let [c, s] = self.yaw_dir();
        let (hl, hw) = (0.5 * BODY_LENGTH, 0.5 * BODY_WIDTH);
        let hx = hl * c.abs() + hw * s.abs();
        let hy = hl * s.abs() + hw * c.abs();
        Aabb::new(
            [self.x - hx, self.y - hy, self.z],
            [self.x + hx, self.y + hy, self.z + BODY_HEIGHT],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub name: String,
    pub archetype: Archetype,
    /// Length along x.
    pub length: f64,
    /// Width along y.
    pub width: f64,
    /// Height along z.
    pub height: f64,
    pub obstacles: Vec<Aabb>,
    pub seats: Vec<Seat>,
    /// Regions of the room boundary that are open to the outside (stress-free).
    /// Boundary faces whose centers fall inside one of these boxes let air
    /// out; everything else is a no-slip wall.
    pub outlets: Vec<Aabb>,
}

impl RoomSpec {
    pub fn bounds(&self) -> Aabb {
        Aabb::new([0.0; 3], [self.length, self.width, self.height])
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Persons per cubic meter.
    pub fn density(&self) -> f64 {
        self.seats.len() as f64 / self.volume()
    }

    /// A square ceiling vent of side `side` centered over the floor plan.
    pub fn ceiling_vent(&self, side: f64) -> Aabb {
        let (cx, cy) = (0.5 * self.length, 0.5 * self.width);
        let h = 0.5 * side;
        Aabb::new([cx - h, cy - h, self.height], [cx + h, cy + h, self.height])
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.length, self.width, self.height];
        if dims.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::Validation(format!(
                "room dimensions must be positive, got L={} W={} H={}",
                self.length, self.width, self.height
            )));
        }
        let room = self.bounds();
        for (i, ob) in self.obstacles.iter().enumerate() {
            if !ob.is_ordered() {
                return Err(Error::Validation(format!("obstacle {i} has min > max")));
            }
            if !ob.within(&room) {
                return Err(Error::Validation(format!("obstacle {i} extends outside the room")));
            }
        }
        for (i, out) in self.outlets.iter().enumerate() {
            if !out.is_ordered() {
                return Err(Error::Validation(format!("outlet {i} has min > max")));
            }
        }
        for (i, seat) in self.seats.iter().enumerate() {
            let finite = [seat.x, seat.y, seat.z, seat.alpha, seat.beta]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::Validation(format!("seat {i} has a non-finite field")));
            }
            if !(0.0..TAU).contains(&seat.alpha) {
                return Err(Error::Validation(format!("seat {i}: alpha must lie in [0, 2π)")));
            }
            if !(0.0..=PI).contains(&seat.beta) {
                return Err(Error::Validation(format!("seat {i}: beta must lie in [0, π]")));
            }
            let body = seat.body_bounds();
            if !body.within(&room) {
                return Err(Error::Validation(format!("seat {i}: body extends outside the room")));
            }
            if !room.contains(seat.mouth()) {
                return Err(Error::Validation(format!("seat {i}: mouth lies outside the room")));
            }
            if let Some(j) = self.obstacles.iter().position(|ob| ob.intersects(&body)) {
                return Err(Error::Validation(format!("seat {i}: body intersects obstacle {j}")));
            }
        }
        for i in 0..self.seats.len() {
            let bi = self.seats[i].body_bounds();
            for j in (i + 1)..self.seats.len() {
                if bi.intersects(&self.seats[j].body_bounds()) {
                    return Err(Error::Validation(format!("seat {i}: body overlaps seat {j}")));
                }
            }
        }
        Ok(())
    }
}
