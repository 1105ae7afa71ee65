//! The twenty built-in rooms: five of each archetype.
//!
//! Dimensions and head counts are fixed; seat layouts are generated
//! procedurally from the archetype.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

use super::{Aabb, Archetype, RoomSpec, Seat, BODY_HEIGHT};

/// (archetype, index, N, L, W, H)
pub const PRESET_TABLE: [(Archetype, u8, usize, f64, f64, f64); 20] = [
    (Archetype::Classroom, 1, 33, 10.00, 6.00, 2.60),
    (Archetype::Classroom, 2, 28, 8.00, 5.63, 2.88),
    (Archetype::Classroom, 3, 27, 7.80, 7.70, 2.61),
    (Archetype::Classroom, 4, 31, 9.00, 7.00, 3.04),
    (Archetype::Classroom, 5, 36, 8.77, 14.25, 3.20),
    (Archetype::Restaurant, 1, 19, 12.12, 8.25, 2.75),
    (Archetype::Restaurant, 2, 23, 25.00, 14.00, 2.83),
    (Archetype::Restaurant, 3, 37, 26.25, 20.00, 3.63),
    (Archetype::Restaurant, 4, 48, 21.88, 16.00, 3.00),
    (Archetype::Restaurant, 5, 67, 13.87, 10.95, 4.40),
    (Archetype::MovieTheater, 1, 240, 22.89, 18.00, 11.25),
    (Archetype::MovieTheater, 2, 112, 12.72, 10.00, 7.00),
    (Archetype::MovieTheater, 3, 270, 24.72, 19.44, 12.15),
    (Archetype::MovieTheater, 4, 400, 18.94, 14.80, 9.30),
    (Archetype::MovieTheater, 5, 720, 36.00, 28.30, 17.68),
    (Archetype::Conference, 1, 9, 6.50, 4.00, 3.12),
    (Archetype::Conference, 2, 11, 7.98, 3.76, 2.79),
    (Archetype::Conference, 3, 16, 10.00, 4.09, 2.90),
    (Archetype::Conference, 4, 17, 11.84, 5.20, 2.91),
    (Archetype::Conference, 5, 24, 11.21, 6.70, 2.81),
];

const TABLE_HEIGHT: f64 = 0.75;
const VENT_SIDE: f64 = 1.0;
/// Seat center to table edge.
const TABLE_GAP: f64 = 0.45;
const MIN_ROW_PITCH: f64 = 0.55;
const MIN_COL_PITCH: f64 = 0.60;

pub fn preset_room(archetype: Archetype, index: u8) -> Result<RoomSpec> {
    let &(_, _, n, l, w, h) = PRESET_TABLE
        .iter()
        .find(|(a, i, ..)| *a == archetype && *i == index)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("no preset room {archetype} {index} (indices run 1..=5)"))
        })?;
    let mut room = RoomSpec {
        name: format!("{} {}", display_name(archetype), index),
        archetype,
        length: l,
        width: w,
        height: h,
        obstacles: Vec::new(),
        seats: Vec::new(),
        outlets: Vec::new(),
    };
    match archetype {
        Archetype::Classroom => classroom(&mut room, n),
        Archetype::Conference => conference(&mut room, n),
        Archetype::MovieTheater => theater(&mut room, n),
        Archetype::Restaurant => restaurant(&mut room, n),
        Archetype::Custom => unreachable!("no custom presets in the table"),
    }
    room.outlets.push(room.ceiling_vent(VENT_SIDE));
    debug_assert_eq!(room.seats.len(), n);
    Ok(room)
}

fn display_name(a: Archetype) -> &'static str {
    match a {
        Archetype::Classroom => "Classroom",
        Archetype::Conference => "Conference",
        Archetype::MovieTheater => "Movie theater",
        Archetype::Restaurant => "Restaurant",
        Archetype::Custom => "Custom",
    }
}

/// Row-major seating facing the x = 0 wall. Returns the x of each row.
fn rows_facing_front(
    room: &mut RoomSpec,
    n: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    row_z: impl Fn(usize) -> f64,
) -> (Vec<f64>, f64) {
    let depth = x_range.1 - x_range.0;
    let width = y_range.1 - y_range.0;
    let max_cols = (width / MIN_COL_PITCH).floor() as usize;
    let max_rows = (depth / MIN_ROW_PITCH).floor() as usize;
    let mut cols = ((n as f64 * width / depth).sqrt().ceil() as usize).clamp(1, max_cols);
    while n.div_ceil(cols) > max_rows && cols < max_cols {
        cols += 1;
    }
    let rows = n.div_ceil(cols);
    let row_pitch = (depth / rows as f64).min(1.2);
    let col_pitch = width / cols as f64;

    let mut xs = Vec::with_capacity(rows);
    let mut left = n;
    for r in 0..rows {
        let x = x_range.0 + (r as f64 + 0.5) * row_pitch;
        xs.push(x);
        let in_row = left.min(cols);
        // Center a partial last row.
        let offset = 0.5 * (cols - in_row) as f64 * col_pitch;
        for c in 0..in_row {
            let y = y_range.0 + offset + (c as f64 + 0.5) * col_pitch;
            room.seats.push(Seat::new(x, y, row_z(r), PI));
        }
        left -= in_row;
    }
    (xs, row_pitch)
}

fn classroom(room: &mut RoomSpec, n: usize) {
    let (l, w) = (room.length, room.width);
    // Teacher's desk near the front wall.
    room.obstacles.push(Aabb::new(
        [0.5, 0.5 * w - 0.7, 0.0],
        [1.3, 0.5 * w + 0.7, TABLE_HEIGHT],
    ));
    rows_facing_front(room, n, (2.0, l - 0.5), (0.5, w - 0.5), |_| 0.0);
}

fn theater(room: &mut RoomSpec, n: usize) {
    let (l, w, h) = (room.length, room.width, room.height);
    let x0 = 3.0;
    let depth = l - 0.5 - x0;
    // Rows are sized first so the riser height can use the full headroom.
    let width = w - 1.0;
    let cols_guess = ((n as f64 * width / depth).sqrt().ceil() as usize).max(1);
    let rows_guess = n.div_ceil(cols_guess).max(1);
    let rise = ((h - BODY_HEIGHT - 0.5) / rows_guess as f64).clamp(0.0, 0.25);
    let (xs, pitch) = rows_facing_front(room, n, (x0, l - 0.5), (0.5, w - 0.5), |r| r as f64 * rise);
    // Stepped floor under every row but the first.
    let last = xs.len().saturating_sub(1);
    for (r, x) in xs.iter().enumerate().skip(1) {
        let back = if r == last { l } else { x + 0.5 * pitch };
        room.obstacles.push(Aabb::new(
            [x - 0.5 * pitch, 0.0, 0.0],
            [back, w, r as f64 * rise],
        ));
    }
}

fn conference(room: &mut RoomSpec, n: usize) {
    let (l, w) = (room.length, room.width);
    let table_w = (w - 2.6).min(1.6);
    let table = Aabb::new(
        [1.4, 0.5 * (w - table_w), 0.0],
        [l - 1.4, 0.5 * (w + table_w), TABLE_HEIGHT],
    );
    room.obstacles.push(table);
    let len = table.max[0] - table.min[0];
    let side_cap = (len / 0.75).floor() as usize;
    let end_cap = (table_w / 0.75).floor().max(1.0) as usize;

    let on_sides = n.min(2 * side_cap);
    let near = on_sides.div_ceil(2);
    let far = on_sides / 2;
    let ends = n - on_sides;
    assert!(ends <= 2 * end_cap, "conference table too small for {n} seats");

    let spread = |count: usize, lo: f64, span: f64| {
        (0..count).map(move |j| lo + (j as f64 + 0.5) * span / count as f64)
    };
    for x in spread(near, table.min[0], len) {
        room.seats.push(Seat::new(x, table.min[1] - TABLE_GAP, 0.0, FRAC_PI_2));
    }
    for x in spread(far, table.min[0], len) {
        room.seats.push(Seat::new(x, table.max[1] + TABLE_GAP, 0.0, 1.5 * PI));
    }
    for y in spread(ends.div_ceil(2), table.min[1], table_w) {
        room.seats.push(Seat::new(table.min[0] - TABLE_GAP, y, 0.0, 0.0));
    }
    for y in spread(ends / 2, table.min[1], table_w) {
        room.seats.push(Seat::new(table.max[0] + TABLE_GAP, y, 0.0, PI));
    }
}

fn restaurant(room: &mut RoomSpec, n: usize) {
    const SLOT: f64 = 3.0;
    const RADIUS: f64 = 1.1;
    const HALF_TABLE: f64 = 0.4;
    let (l, w) = (room.length, room.width);
    let sx = ((l - 0.4) / SLOT).floor() as usize;
    let sy = ((w - 0.4) / SLOT).floor() as usize;
    let capacity = sx * sy;
    let tables = n.div_ceil(4).max(n.div_ceil(6)).min(capacity);
    assert!(tables * 6 >= n, "restaurant too small for {n} seats");

    // Varied party sizes, nudged until they sum to n.
    const PATTERN: [usize; 6] = [4, 6, 2, 5, 3, 4];
    let mut sizes: Vec<usize> = (0..tables).map(|t| PATTERN[t % PATTERN.len()]).collect();
    let mut total: usize = sizes.iter().sum();
    while total > n {
        let t = (0..tables).rev().max_by_key(|&t| sizes[t]).unwrap();
        sizes[t] -= 1;
        total -= 1;
    }
    while total < n {
        let t = (0..tables).min_by_key(|&t| sizes[t]).unwrap();
        sizes[t] += 1;
        total += 1;
    }

    let px = (l - 0.4) / sx as f64;
    let py = (w - 0.4) / sy as f64;
    for (ti, &k) in sizes.iter().enumerate() {
        // Spread the occupied slots across the floor.
        let slot = ti * capacity / tables;
        let (cx, cy) = (
            0.2 + ((slot % sx) as f64 + 0.5) * px,
            0.2 + ((slot / sx) as f64 + 0.5) * py,
        );
        room.obstacles.push(Aabb::new(
            [cx - HALF_TABLE, cy - HALF_TABLE, 0.0],
            [cx + HALF_TABLE, cy + HALF_TABLE, TABLE_HEIGHT],
        ));
        for j in 0..k {
            let theta = TAU * j as f64 / k as f64 + PI / k as f64;
            let (s, c) = theta.sin_cos();
            room.seats
                .push(Seat::new(cx + RADIUS * c, cy + RADIUS * s, 0.0, theta + PI));
        }
    }
}
