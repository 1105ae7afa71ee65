use crate::error::{Error, Result};
use crate::flow::PoissonOperator;

use super::{Aabb, RoomSpec, Seat, BODY_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellKind {
    Fluid,
    Obstacle,
    Body,
    /// Cell whose center lies beyond the room walls (last layer when a room
    /// dimension is not a multiple of the cell size).
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FaceKind {
    /// Fixed zero normal velocity.
    Solid,
    /// Between two fluid cells.
    Fluid,
    /// Boundary face inside an outlet; pressure is held at zero outside.
    Open,
}

/// The fluid cell an agent breathes through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MouthSite {
    pub cell: usize,
    pub ijk: [usize; 3],
    /// Center of the mouth cell.
    pub position: [f64; 3],
    /// Unit breathing direction.
    pub direction: [f64; 3],
}

/// Uniform MAC grid over the room.
///
/// Velocities live on faces: `u` has `(nx+1)·ny·nz` entries indexed
/// `i + (nx+1)·(j + ny·k)`, and likewise for `v` and `w` along their axes.
/// Pressure and concentration are cell-centered, indexed `i + nx·(j + ny·k)`.
/// Concentration counts particles per cell.
#[derive(Debug, Clone)]
pub struct Grid {
    pub delta: f64,
    pub dims: [usize; 3],
    pub cells: Vec<CellKind>,
    pub vel: [Vec<f64>; 3],
    pub face_kind: [Vec<FaceKind>; 3],
    pub pressure: Vec<f64>,
    pub conc: Vec<f64>,
    /// One entry per body passed to [`build_grid`], in order.
    pub mouths: Vec<MouthSite>,
    pub(crate) poisson: PoissonOperator,
}

impl Grid {
    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn ijk(&self, c: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [c % nx, (c / nx) % ny, c / (nx * ny)]
    }

    /// Face array dimensions for `axis`.
    #[inline]
    pub fn face_dims(&self, axis: usize) -> [usize; 3] {
        let mut d = self.dims;
        d[axis] += 1;
        d
    }

    #[inline]
    pub fn face_idx(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let d = self.face_dims(axis);
        i + d[0] * (j + d[1] * k)
    }

    /// Faces of cell `ijk` along `axis`: (low face, high face).
    #[inline]
    pub fn cell_faces(&self, axis: usize, ijk: [usize; 3]) -> (usize, usize) {
        let [i, j, k] = ijk;
        let lo = self.face_idx(axis, i, j, k);
        let mut hi = ijk;
        hi[axis] += 1;
        (lo, self.face_idx(axis, hi[0], hi[1], hi[2]))
    }

    pub fn cell_center(&self, ijk: [usize; 3]) -> [f64; 3] {
        let d = self.delta;
        [
            (ijk[0] as f64 + 0.5) * d,
            (ijk[1] as f64 + 0.5) * d,
            (ijk[2] as f64 + 0.5) * d,
        ]
    }

    pub fn cell_of_point(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let f = (p[a] / self.delta).floor();
            if f < 0.0 || f >= self.dims[a] as f64 {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    #[inline]
    pub fn is_fluid(&self, c: usize) -> bool {
        self.cells[c] == CellKind::Fluid
    }

    pub fn fluid_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == CellKind::Fluid).count()
    }

    pub fn occupied_count(&self) -> usize {
        self.cell_count() - self.fluid_count()
    }

    pub fn occupancy(&self) -> Vec<bool> {
        self.cells.iter().map(|c| *c != CellKind::Fluid).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.delta.powi(3)
    }

    /// Total airborne particles.
    pub fn total_mass(&self) -> f64 {
        self.conc.iter().sum()
    }

    /// Discrete divergence of the face velocity field in cell `c` (1/s).
    pub fn divergence(&self, c: usize) -> f64 {
        let ijk = self.ijk(c);
        let mut net = 0.0;
        for a in 0..3 {
            let (lo, hi) = self.cell_faces(a, ijk);
            net += self.vel[a][hi] - self.vel[a][lo];
        }
        net / self.delta
    }

    /// Largest normal face speed.
    pub fn max_face_speed(&self) -> f64 {
        self.vel
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn reset_fields(&mut self) {
        for a in 0..3 {
            self.vel[a].iter_mut().for_each(|x| *x = 0.0);
        }
        self.pressure.iter_mut().for_each(|x| *x = 0.0);
        self.conc.iter_mut().for_each(|x| *x = 0.0);
    }

    /// The cells on either side of a face; `None` outside the domain.
    pub fn face_cells(&self, axis: usize, f: usize) -> (Option<usize>, Option<usize>) {
        let d = self.face_dims(axis);
        let i = f % d[0];
        let j = (f / d[0]) % d[1];
        let k = f / (d[0] * d[1]);
        let mut ijk = [i, j, k];
        let hi = (ijk[axis] < self.dims[axis]).then(|| self.idx(ijk[0], ijk[1], ijk[2]));
        let lo = if ijk[axis] == 0 {
            None
        } else {
            ijk[axis] -= 1;
            Some(self.idx(ijk[0], ijk[1], ijk[2]))
        };
        (lo, hi)
    }

    /// Calls `visit(face, lo, hi)` for every `axis` face in index order,
    /// with the neighboring cells as in [`Grid::face_cells`].
    #[inline]
    pub fn for_each_face(&self, axis: usize, mut visit: impl FnMut(usize, Option<usize>, Option<usize>)) {
        let d = self.face_dims(axis);
        let [nx, ny, _] = self.dims;
        let stride = [1, nx, nx * ny][axis];
        let n = self.dims[axis];
        let mut f = 0;
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let along = [i, j, k][axis];
                    let c = i + nx * (j + ny * k);
                    let hi = (along < n).then_some(c);
                    let lo = (along > 0).then(|| c - stride);
                    visit(f, lo, hi);
                    f += 1;
                }
            }
        }
    }

    fn face_center(&self, axis: usize, f: usize) -> [f64; 3] {
        let d = self.face_dims(axis);
        let ijk = [f % d[0], (f / d[0]) % d[1], f / (d[0] * d[1])];
        let mut p = [0.0; 3];
        for a in 0..3 {
            let off = if a == axis { 0.0 } else { 0.5 };
            p[a] = (ijk[a] as f64 + off) * self.delta;
        }
        p
    }
}

/// Index range of cells along one axis whose centers may fall in `[lo, hi]`.
fn center_range(lo: f64, hi: f64, delta: f64, n: usize) -> std::ops::Range<usize> {
    let a = (lo / delta - 0.5).ceil().max(0.0);
    let b = (hi / delta - 0.5).floor() + 1.0;
    let b = b.clamp(0.0, n as f64);
    (a.min(b) as usize)..(b as usize)
}

/// Voxelizes `room` at cell size `delta`, marking obstacles and the body
/// boxes of every seat in `bodies` as occupied, and locates each body's
/// mouth cell. A cell is occupied when its center lies inside a box.
///
/// All fields start at rest and free of particles.
pub fn build_grid(room: &RoomSpec, delta: f64, bodies: &[Seat]) -> Result<Grid> {
    let min_dim = room.length.min(room.width).min(room.height);
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("cell size must be positive, got {delta}")));
    }
    // Bodies need at least four cells across the room; an empty room two.
    let (parts, what) = if bodies.is_empty() { (2.0, "half") } else { (4.0, "a quarter") };
    if delta > min_dim / parts {
        return Err(Error::InvalidArgument(format!(
            "cell size {delta} exceeds {what} of the smallest room dimension ({min_dim})"
        )));
    }
    // Guard against L/δ landing a hair above an integer.
    let n = |len: f64| ((len / delta) - 1e-9).ceil().max(1.0) as usize;
    let dims = [n(room.length), n(room.width), n(room.height)];
    let total = dims[0] * dims[1] * dims[2];

    let mut grid = Grid {
        delta,
        dims,
        cells: vec![CellKind::Fluid; total],
        vel: [0, 1, 2].map(|a| {
            let mut d = dims;
            d[a] += 1;
            vec![0.0; d[0] * d[1] * d[2]]
        }),
        face_kind: [Vec::new(), Vec::new(), Vec::new()],
        pressure: vec![0.0; total],
        conc: vec![0.0; total],
        mouths: Vec::with_capacity(bodies.len()),
        poisson: PoissonOperator::default(),
    };

    let room_box = room.bounds();
    for c in 0..total {
        if !room_box.contains(grid.cell_center(grid.ijk(c))) {
            grid.cells[c] = CellKind::Exterior;
        }
    }

    for ob in &room.obstacles {
        mark_box(&mut grid, ob, |p| ob.contains(p), CellKind::Obstacle);
    }
    for (b, seat) in bodies.iter().enumerate() {
        let hits = mark_box(&mut grid, &seat.body_bounds(), |p| seat.body_contains(p), CellKind::Body);
        if hits == 0 {
            return Err(Error::Resolution(format!(
                "cell size {delta} m does not resolve the body of seat {b}"
            )));
        }
    }

    let mut outlet_hits = vec![0usize; room.outlets.len()];
    for axis in 0..3 {
        let nf = grid.vel[axis].len();
        let mut kinds = vec![FaceKind::Solid; nf];
        for (f, kind) in kinds.iter_mut().enumerate() {
            let (lo, hi) = grid.face_cells(axis, f);
            let fluid = |c: Option<usize>| c.is_some_and(|c| grid.is_fluid(c));
            let outside =
                |c: Option<usize>| c.is_none_or(|c| grid.cells[c] == CellKind::Exterior);
            *kind = if fluid(lo) && fluid(hi) {
                FaceKind::Fluid
            } else if (fluid(lo) && outside(hi)) || (fluid(hi) && outside(lo)) {
                let p = grid.face_center(axis, f);
                let hit = room.outlets.iter().position(|o| outlet_covers(o, axis, p, delta));
                if let Some(o) = hit {
                    outlet_hits[o] += 1;
                    FaceKind::Open
                } else {
                    FaceKind::Solid
                }
            } else {
                FaceKind::Solid
            };
        }
        grid.face_kind[axis] = kinds;
    }

    if let Some(o) = outlet_hits.iter().position(|h| *h == 0) {
        return Err(Error::Resolution(format!("outlet {o} covers no boundary face at cell size {delta}")));
    }

    for (b, seat) in bodies.iter().enumerate() {
        let site = locate_mouth(&grid, seat)
            .ok_or_else(|| Error::Resolution(format!("no fluid mouth cell in front of seat {b}")))?;
        grid.mouths.push(site);
    }

    let mouths: Vec<(usize, [f64; 3])> = grid.mouths.iter().map(|m| (m.cell, m.direction)).collect();
    grid.poisson = PoissonOperator::new(&grid, &mouths);
    Ok(grid)
}

/// In-plane the face center must lie inside the outlet; across the face
/// half a cell of slack absorbs walls that fall between face planes.
fn outlet_covers(outlet: &Aabb, axis: usize, p: [f64; 3], delta: f64) -> bool {
    (0..3).all(|a| {
        let slack = if a == axis { 0.5 * delta } else { 0.0 };
        p[a] >= outlet.min[a] - slack && p[a] <= outlet.max[a] + slack
    })
}

fn mark_box(grid: &mut Grid, bounds: &Aabb, inside: impl Fn([f64; 3]) -> bool, kind: CellKind) -> usize {
    let d = grid.delta;
    let ri = center_range(bounds.min[0], bounds.max[0], d, grid.dims[0]);
    let rj = center_range(bounds.min[1], bounds.max[1], d, grid.dims[1]);
    let rk = center_range(bounds.min[2], bounds.max[2], d, grid.dims[2]);
    let mut hits = 0;
    for k in rk {
        for j in rj.clone() {
            for i in ri.clone() {
                if inside(grid.cell_center([i, j, k])) {
                    let c = grid.idx(i, j, k);
                    hits += 1;
                    if grid.cells[c] == CellKind::Fluid {
                        grid.cells[c] = kind;
                    }
                }
            }
        }
    }
    hits
}

/// Walks from the mouth point along the yaw direction until leaving the
/// body box and reaching a fluid cell.
fn locate_mouth(grid: &Grid, seat: &Seat) -> Option<MouthSite> {
    let start = seat.mouth();
    let [dx, dy] = seat.yaw_dir();
    let step = grid.delta / 4.0;
    let limit = 0.5 * BODY_LENGTH + 3.0 * grid.delta;
    let mut s = 0.5 * BODY_LENGTH;
    while s <= limit {
        let p = [start[0] + s * dx, start[1] + s * dy, start[2]];
        if let Some(ijk) = grid.cell_of_point(p) {
            let c = grid.idx(ijk[0], ijk[1], ijk[2]);
            if grid.is_fluid(c) && !seat.body_contains(grid.cell_center(ijk)) {
                return Some(MouthSite {
                    cell: c,
                    ijk,
                    position: grid.cell_center(ijk),
                    direction: seat.facing(),
                });
            }
        }
        s += step;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Archetype;

    fn empty_room(l: f64, w: f64, h: f64) -> RoomSpec {
        RoomSpec {
            name: "empty".into(),
            archetype: Archetype::Custom,
            length: l,
            width: w,
            height: h,
            obstacles: vec![],
            seats: vec![],
            outlets: vec![],
        }
    }

    #[test]
    fn unit_room_at_half_meter() {
        let g = build_grid(&empty_room(1.0, 1.0, 1.0), 0.5, &[]).unwrap();
        assert_eq!(g.dims, [2, 2, 2]);
        assert_eq!(g.fluid_count(), 8);
        assert!(g.conc.iter().all(|c| *c == 0.0));
        assert_eq!(g.cell_center([1, 0, 1]), [0.75, 0.25, 0.75]);
    }

    #[test]
    fn filled_room_is_all_occupied() {
        let mut room = empty_room(1.0, 1.0, 1.0);
        room.obstacles.push(room.bounds());
        let g = build_grid(&room, 0.25, &[]).unwrap();
        assert_eq!(g.fluid_count(), 0);
        assert!(g.face_kind.iter().flatten().all(|f| *f == FaceKind::Solid));
    }

    #[test]
    fn coarse_cells_are_rejected() {
        assert!(matches!(
            build_grid(&empty_room(1.0, 1.0, 1.0), 0.6, &[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_grid(&empty_room(1.0, 1.0, 1.0), 0.0, &[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn unresolvable_body_is_a_resolution_error() {
        // A 0.40 m long body can slip between 0.5 m cell centers.
        let room = empty_room(4.0, 4.0, 2.6);
        let seat = Seat::new(1.0, 1.0, 0.0, 0.0);
        assert!(matches!(build_grid(&room, 0.5, &[seat]), Err(Error::Resolution(_))));
    }

    #[test]
    fn exterior_layer_when_not_a_multiple() {
        let g = build_grid(&empty_room(1.04, 1.0, 1.0), 0.1, &[]).unwrap();
        assert_eq!(g.dims, [11, 10, 10]);
        assert_eq!(g.fluid_count(), 10 * 10 * 10);
        let exact = build_grid(&empty_room(1.0, 1.0, 1.0), 0.1, &[]).unwrap();
        assert_eq!(exact.dims, [10, 10, 10]);
    }

    #[test]
    fn mouth_is_fluid_and_in_front_of_body() {
        let room = empty_room(4.0, 3.0, 2.6);
        let seat = Seat::new(2.0, 1.5, 0.0, 0.0);
        let g = build_grid(&room, 0.1, &[seat]).unwrap();
        let m = g.mouths[0];
        assert!(g.is_fluid(m.cell));
        assert!(m.position[0] > 2.2 && m.position[0] < 2.3);
        assert!((m.position[2] - 0.85).abs() < 1e-9);
        // The cell just behind the mouth belongs to the body.
        let behind = g.idx(m.ijk[0] - 1, m.ijk[1], m.ijk[2]);
        assert_eq!(g.cells[behind], CellKind::Body);
    }

    #[test]
    fn outlet_opens_ceiling_faces() {
        let mut room = empty_room(1.0, 1.0, 1.0);
        room.outlets.push(room.ceiling_vent(0.2));
        let g = build_grid(&room, 0.1, &[]).unwrap();
        let open: Vec<usize> = g.face_kind[2]
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == FaceKind::Open)
            .map(|(f, _)| f)
            .collect();
        // Face centers at 0.45 and 0.55 fall inside [0.4, 0.6].
        assert_eq!(open.len(), 2 * 2);
        assert!(g.face_kind[0].iter().all(|k| *k != FaceKind::Open));

        room.outlets[0] = room.ceiling_vent(0.05);
        assert!(matches!(build_grid(&room, 0.1, &[]), Err(Error::Resolution(_))));
    }
}
