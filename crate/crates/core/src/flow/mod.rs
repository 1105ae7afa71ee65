//! One operator-split time step of the incompressible flow.
//!
//! The step is: semi-Lagrangian advection of the face velocities (first
//! order backtrace, trilinear sampling), explicit diffusion with a constant
//! effective viscosity, breathing boundary conditions, gravity, then a
//! pressure projection that makes every fluid cell divergence-free except
//! mouth cells, whose divergence is the breathing flow rate over the cell
//! volume. Mouth faces are driven: their velocity is prescribed (zero
//! between breaths) and the projection leaves them alone. Advection and diffusion are explicit, so [`step_flow`] refuses
//! steps with a face CFL number above 1 or a diffusion number above 1/6.

mod pressure;
pub mod snapshot;

use serde::{Deserialize, Serialize};

use crate::agents::{breathing_phase, Agent, Phase};
use crate::error::{Error, Result};
use crate::geometry::{FaceKind, Grid, MouthSite};

pub(crate) use pressure::PoissonOperator;
pub use pressure::SolveStats;

/// Molecular kinematic viscosity of air (m²/s).
pub const AIR_VISCOSITY: f64 = 1.5e-5;
pub const CFL_LIMIT: f64 = 1.0;
pub const DIFFUSION_LIMIT: f64 = 1.0 / 6.0;
/// Direction components below this are rounding noise from the angles.
const DIRECTION_EPS: f64 = 1e-9;
/// Memory cap (in f64 values) for cached breathing pressure responses.
const MAX_RESPONSE_VALUES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    /// Base kinematic viscosity (m²/s).
    pub viscosity: f64,
    /// Eddy-viscosity multiplier; the effective viscosity is
    /// `viscosity * turbulent_multiplier`.
    pub turbulent_multiplier: f64,
    pub gravity: [f64; 3],
    /// Allowed divergence after projection: absolute (1/s) on ordinary
    /// fluid cells, relative to the prescribed source on mouth cells.
    pub pressure_tolerance: f64,
    pub max_pressure_iterations: usize,
    /// Tangential (x, y) velocity of the ceiling, for driven-cavity setups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lid_velocity: Option<[f64; 2]>,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            viscosity: AIR_VISCOSITY,
            turbulent_multiplier: 1.0,
            gravity: [0.0, 0.0, -9.81],
            pressure_tolerance: 1e-6,
            max_pressure_iterations: 2000,
            lid_velocity: None,
        }
    }
}

impl FlowParams {
    pub fn effective_viscosity(&self) -> f64 {
        self.viscosity * self.turbulent_multiplier
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.effective_viscosity() >= 0.0 && self.effective_viscosity().is_finite()) {
            return Err("flow viscosity must be non-negative".into());
        }
        if !(self.pressure_tolerance > 0.0) {
            return Err("flow.pressure_tolerance must be positive".into());
        }
        if self.max_pressure_iterations == 0 {
            return Err("flow.max_pressure_iterations must be at least 1".into());
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err("flow.gravity must be finite".into());
        }
        Ok(())
    }
}

/// Breathing boundary condition at a mouth cell. Positive `flow_rate`
/// (m³/s) exhales, negative inhales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreathingBc {
    pub agent: usize,
    pub cell: usize,
    pub direction: [f64; 3],
    pub flow_rate: f64,
}

/// One condition per agent that is inhaling or exhaling at `t`.
pub fn collect_breathing_bcs(agents: &[Agent], mouths: &[MouthSite], t: f64) -> Vec<BreathingBc> {
    agents
        .iter()
        .zip(mouths)
        .enumerate()
        .filter_map(|(i, (agent, mouth))| {
            let flow_rate = match breathing_phase(agent, t) {
                Phase::Inhale => -agent.breathing.q_in,
                Phase::Exhale => agent.breathing.q_out,
                Phase::Pause | Phase::Pause2 => return None,
            };
            Some(BreathingBc {
                agent: i,
                cell: mouth.cell,
                direction: mouth.direction,
                flow_rate,
            })
        })
        .collect()
}

/// `max |u_face| · dt / δ`.
pub fn cfl_number(grid: &Grid, dt: f64) -> f64 {
    grid.max_face_speed() * dt / grid.delta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowStepReport {
    pub cfl: f64,
    pub pressure: SolveStats,
}

/// Advances the velocity field by `dt` seconds.
pub fn step_flow(grid: &mut Grid, params: &FlowParams, bcs: &[BreathingBc], dt: f64) -> Result<FlowStepReport> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let cfl = cfl_number(grid, dt);
    if cfl > CFL_LIMIT {
        return Err(Error::Stability(format!("CFL number {cfl:.3} exceeds {CFL_LIMIT}")));
    }
    let nu = params.effective_viscosity();
    let diffusion_number = nu * dt / (grid.delta * grid.delta);
    if diffusion_number > DIFFUSION_LIMIT {
        return Err(Error::Stability(format!(
            "viscous diffusion number {diffusion_number:.4} exceeds 1/6"
        )));
    }

    if grid.max_face_speed() > 0.0 {
        advect_velocity(grid, dt);
    }
    if nu > 0.0 {
        diffuse_velocity(grid, diffusion_number, params.lid_velocity);
    }
    let sources = apply_breathing(grid, bcs);
    for (a, g) in params.gravity.iter().enumerate() {
        if *g != 0.0 {
            let dv = g * dt;
            for (f, (v, k)) in grid.vel[a].iter_mut().zip(&grid.face_kind[a]).enumerate() {
                if *k != FaceKind::Solid && !grid.poisson.is_driven(a, f) {
                    *v += dv;
                }
            }
        }
    }
    let pressure = project(grid, params, &sources, dt)?;
    Ok(FlowStepReport { cfl, pressure })
}

/// Trilinear interpolation of a face component at lattice coordinates `s`
/// (already clamped to the lattice).
#[inline]
fn trilinear(field: &[f64], d: [usize; 3], s: [f64; 3]) -> f64 {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    let mut step = [0usize; 3];
    for b in 0..3 {
        if d[b] > 1 {
            // `s` is non-negative, so truncation is the floor.
            let i = (s[b] as usize).min(d[b] - 2);
            base[b] = i;
            frac[b] = s[b] - i as f64;
            step[b] = 1;
        }
    }
    let sj = d[0];
    let sk = d[0] * d[1];
    let f000 = base[0] + sj * base[1] + sk * base[2];
    let (di, dj, dk) = (step[0], step[1] * sj, step[2] * sk);
    let at = |o: usize| field[f000 + o];
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let c00 = lerp(at(0), at(di), frac[0]);
    let c10 = lerp(at(dj), at(dj + di), frac[0]);
    let c01 = lerp(at(dk), at(dk + di), frac[0]);
    let c11 = lerp(at(dk + dj), at(dk + dj + di), frac[0]);
    lerp(lerp(c00, c10, frac[1]), lerp(c01, c11, frac[1]), frac[2])
}

fn advect_velocity(grid: &mut Grid, dt: f64) {
    let courant = dt / grid.delta;
    let dims = grid.dims;
    let [nx, ny, nz] = dims;
    let cell_stride = [1, nx, nx * ny];
    let fd = [0, 1, 2].map(|a| grid.face_dims(a));

    // Cell-centered average of each component.
    let n = grid.cell_count();
    let mut centered = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (b, cc) in centered.iter_mut().enumerate() {
        let d = fd[b];
        let up = [1, d[0], d[0] * d[1]][b];
        let v = &grid.vel[b];
        let mut c = 0;
        for k in 0..nz {
            for j in 0..ny {
                let row = d[0] * (j + d[1] * k);
                for i in 0..nx {
                    cc[c] = 0.5 * (v[row + i] + v[row + i + up]);
                    c += 1;
                }
            }
        }
    }

    let mut next: [Vec<f64>; 3] = grid.vel.clone();
    for axis in 0..3 {
        let d = fd[axis];
        let src = &grid.vel[axis];
        let kinds = &grid.face_kind[axis];
        let out = &mut next[axis];
        let upper = d.map(|x| (x - 1) as f64);
        let mut face = 0;
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = face;
                    face += 1;
                    if kinds[f] == FaceKind::Solid {
                        continue;
                    }
                    let ijk = [i, j, k];
                    // For the last face along `axis` this overshoots, but
                    // stepping back one stride still lands on the low cell.
                    let c = i + nx * (j + ny * k);
                    let has_hi = ijk[axis] < dims[axis];
                    let has_lo = ijk[axis] > 0;
                    let mut s = [0.0; 3];
                    for b in 0..3 {
                        let v = if b == axis {
                            src[f]
                        } else {
                            let cc = &centered[b];
                            match (has_lo, has_hi) {
                                (true, true) => 0.5 * (cc[c - cell_stride[axis]] + cc[c]),
                                (true, false) => cc[c - cell_stride[axis]],
                                (false, true) => cc[c],
                                (false, false) => 0.0,
                            }
                        };
                        s[b] = (ijk[b] as f64 - courant * v).clamp(0.0, upper[b]);
                    }
                    out[f] = trilinear(src, d, s);
                }
            }
        }
    }
    grid.vel = next;
}

/// Explicit Laplacian step. Tangential neighbors beyond a wall mirror the
/// face value (no-slip halfway between face centers); the ceiling may move
/// with `lid`.
fn diffuse_velocity(grid: &mut Grid, number: f64, lid: Option<[f64; 2]>) {
    let mut next = grid.vel.clone();
    for axis in 0..3 {
        let d = grid.face_dims(axis);
        let kinds = &grid.face_kind[axis];
        let vel = &grid.vel[axis];
        let strides = [1, d[0], d[0] * d[1]];
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = i + d[0] * (j + d[1] * k);
                    if kinds[f] == FaceKind::Solid {
                        continue;
                    }
                    let u = vel[f];
                    let ijk = [i, j, k];
                    let interior = (0..3).all(|b| ijk[b] > 0 && ijk[b] + 1 < d[b])
                        && (0..3).filter(|b| *b != axis).all(|b| {
                            kinds[f - strides[b]] != FaceKind::Solid && kinds[f + strides[b]] != FaceKind::Solid
                        });
                    if interior {
                        let sum: f64 = strides.iter().map(|s| vel[f - s] + vel[f + s]).sum();
                        next[axis][f] = u + number * (sum - 6.0 * u);
                        continue;
                    }
                    let mut lap = 0.0;
                    for b in 0..3 {
                        for up in [false, true] {
                            let inside = if up { ijk[b] + 1 < d[b] } else { ijk[b] > 0 };
                            let nb = if inside {
                                let g = if up { f + strides[b] } else { f - strides[b] };
                                if kinds[g] == FaceKind::Solid && b != axis {
                                    -u
                                } else {
                                    vel[g]
                                }
                            } else if b == axis {
                                // Only open faces reach here: zero gradient.
                                u
                            } else {
                                let moving = match lid {
                                    Some(l) if up && b == 2 && axis < 2 => l[axis],
                                    _ => 0.0,
                                };
                                2.0 * moving - u
                            };
                            lap += nb - u;
                        }
                    }
                    next[axis][f] = u + number * lap;
                }
            }
        }
    }
    grid.vel = next;
}

/// Faces a mouth at `cell` breathes through: the non-solid faces it points
/// at, as `(axis, face, signed share)` with shares split by the direction
/// components.
pub(crate) fn mouth_faces(grid: &Grid, cell: usize, direction: [f64; 3]) -> Vec<(usize, usize, f64)> {
    let ijk = grid.ijk(cell);
    let faces: Vec<(usize, usize, f64)> = (0..3)
        .filter(|a| direction[*a].abs() > DIRECTION_EPS)
        .filter_map(|a| {
            let (lo, hi) = grid.cell_faces(a, ijk);
            let f = if direction[a] > 0.0 { hi } else { lo };
            (grid.face_kind[a][f] != FaceKind::Solid).then_some((a, f, direction[a]))
        })
        .collect();
    let total: f64 = faces.iter().map(|x| x.2.abs()).sum();
    faces.into_iter().map(|(a, f, d)| (a, f, d / total)).collect()
}

/// Prescribes the velocity of every driven face (zero for a mouth at rest)
/// and returns the divergence source (1/s) per mouth cell. Mouths not yet
/// known to the pressure operator are registered first.
fn apply_breathing(grid: &mut Grid, bcs: &[BreathingBc]) -> Vec<(usize, f64)> {
    let find = |grid: &Grid, bc: &BreathingBc| {
        grid.poisson
            .drives
            .iter()
            .position(|d| d.cell == bc.cell && d.direction == bc.direction)
    };
    let missing: Vec<(usize, [f64; 3])> = bcs
        .iter()
        .filter(|bc| find(grid, bc).is_none())
        .map(|bc| (bc.cell, bc.direction))
        .collect();
    if !missing.is_empty() {
        let old = std::mem::take(&mut grid.poisson.drives);
        let mut mouths: Vec<(usize, [f64; 3])> = old.iter().map(|d| (d.cell, d.direction)).collect();
        for m in missing {
            if !mouths.contains(&m) {
                mouths.push(m);
            }
        }
        grid.poisson = PoissonOperator::new(grid, &mouths);
        for (new, old) in grid.poisson.drives.iter_mut().zip(old) {
            new.rate = old.rate;
        }
    }

    let mut rates = vec![0.0; grid.poisson.drives.len()];
    let mut sources: Vec<(usize, f64)> = Vec::new();
    for bc in bcs {
        if let Some(m) = find(grid, bc) {
            rates[m] += bc.flow_rate;
        }
        let s = bc.flow_rate / grid.cell_volume();
        match sources.iter_mut().find(|s| s.0 == bc.cell) {
            Some(e) => e.1 += s,
            None => sources.push((bc.cell, s)),
        }
    }
    let area = grid.delta * grid.delta;
    for d in &grid.poisson.drives {
        for &(a, f, _) in &d.faces {
            grid.vel[a][f] = 0.0;
        }
    }
    for (d, rate) in grid.poisson.drives.iter_mut().zip(rates) {
        for &(a, f, share) in &d.faces {
            grid.vel[a][f] += rate * share / area;
        }
        d.change = rate - d.rate;
        d.rate = rate;
    }
    sources
}

/// Projects the face velocities so each fluid cell's divergence equals its
/// source (zero away from mouths).
fn project(grid: &mut Grid, params: &FlowParams, sources: &[(usize, f64)], dt: f64) -> Result<SolveStats> {
    let delta = grid.delta;
    let h2 = delta * delta;
    let n = grid.cell_count();
    let mut rhs = vec![0.0; n];
    let mut target = vec![0.0; n];
    for (c, s) in sources {
        if *s != 0.0 && grid.poisson.is_sealed(*c) {
            return Err(Error::InvalidArgument(format!(
                "breathing at cell {c}, which lies in a region with no outlet"
            )));
        }
        target[*c] += s;
    }
    for c in 0..n {
        if grid.poisson.is_active(c) {
            rhs[c] = h2 * (target[c] - grid.divergence(c));
        }
    }
    // Absolute bound on ordinary cells, relative bound on mouth cells, with
    // half the budget left for rounding in the velocity update.
    let tol = 0.5 * params.pressure_tolerance;
    let tight: Vec<(usize, f64)> = sources
        .iter()
        .filter(|(c, s)| *s != 0.0 && s.abs() < 1.0 && grid.poisson.is_active(*c))
        .map(|(c, s)| (*c, tol * s.abs() * h2))
        .collect();

    // Warm start from the previous kinematic pressure, swapping the
    // response to last step's breathing changes for this step's.
    let mut phi: Vec<f64> = (0..n)
        .map(|c| if grid.poisson.is_active(c) { grid.pressure[c] * dt } else { 0.0 })
        .collect();
    let mut op = std::mem::take(&mut grid.poisson);
    let keep_responses = op.drives.len() * n <= MAX_RESPONSE_VALUES;
    for m in 0..op.drives.len() {
        let d = &op.drives[m];
        let weight = d.change - d.previous_change;
        if weight != 0.0 && keep_responses {
            if d.response.is_none() {
                let response = breathing_response(grid, &mut op, m)?;
                op.drives[m].response = Some(response);
            }
            let response = op.drives[m].response.as_deref().unwrap_or_default();
            for (p, r) in phi.iter_mut().zip(response) {
                *p += weight * r;
            }
        }
        let d = &mut op.drives[m];
        d.previous_change = d.change;
    }
    let solved = op.solve(&rhs, &mut phi, tol * h2, &tight, params.max_pressure_iterations);
    grid.poisson = op;
    let mut stats = solved?;
    stats.residual /= h2;

    for axis in 0..3 {
        let mut vel = std::mem::take(&mut grid.vel[axis]);
        let kinds = &grid.face_kind[axis];
        grid.for_each_face(axis, |f, lo, hi| {
            if kinds[f] == FaceKind::Solid || grid.poisson.is_driven(axis, f) {
                return;
            }
            // Outside the room, and in exterior or pinned cells, the
            // pressure is zero.
            let at = |c: Option<usize>| c.map_or(0.0, |c| phi[c]);
            vel[f] -= (at(hi) - at(lo)) / delta;
        });
        grid.vel[axis] = vel;
    }
    for (c, p) in grid.pressure.iter_mut().zip(&phi) {
        *c = p / dt;
    }
    Ok(stats)
}

/// Pressure increment (times `dt`) caused by a unit rise in the flow rate of
/// drive `m`.
fn breathing_response(grid: &Grid, op: &mut PoissonOperator, m: usize) -> Result<Vec<f64>> {
    let n = grid.cell_count();
    let delta = grid.delta;
    let h2 = delta * delta;
    let d = &op.drives[m];
    let mut div = vec![0.0; n];
    for &(a, f, share) in &d.faces {
        let v = share / h2;
        let (lo, hi) = grid.face_cells(a, f);
        if let Some(lo) = lo {
            div[lo] += v / delta;
        }
        if let Some(hi) = hi {
            div[hi] -= v / delta;
        }
    }
    let mut rhs = vec![0.0; n];
    for c in 0..n {
        if op.is_active(c) {
            let target = if c == d.cell { 1.0 / grid.cell_volume() } else { 0.0 };
            rhs[c] = h2 * (target - div[c]);
        }
    }
    let scale = rhs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut x = vec![0.0; n];
    if scale > 0.0 {
        op.solve(&rhs, &mut x, 1e-10 * scale, &[], 10 * n)?;
    }
    Ok(x)
}
