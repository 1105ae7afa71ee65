//! Pathogen concentration: advection, turbulent diffusion and airborne decay,
//! plus the exhale and inhale kernels.
//!
//! The field obeys `∂C/∂t + ∇·(uC) = ∇·(τ_d ∇C) − D C`. Concentration is
//! stored as particles per cell, so sums over cells are particle counts.
//! Advection is first-order upwind finite volume on the face velocities,
//! diffusion is explicit, and decay is the exact factor `exp(−D Δt)`.
//! Particles carried through open boundary faces leave the room and are
//! reported as outflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::DIFFUSION_LIMIT;
use crate::geometry::{FaceKind, Grid, MouthSite};

const SECONDS_PER_MINUTE: f64 = 60.0;
/// Kernel weights below `exp(-KERNEL_CUTOFF)` are dropped.
const KERNEL_CUTOFF: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathogenParams {
    /// Airborne decay rate D (1/min).
    pub decay_rate: f64,
    /// Isotropic turbulent diffusivity τ_d (m²/s).
    pub diffusivity: f64,
    /// Inhale capture radius γ (m).
    pub capture_radius: f64,
    /// Exhale kernel length scales along the facing, lateral and vertical
    /// mouth axes (m).
    pub kernel_scales: [f64; 3],
}

impl Default for PathogenParams {
    fn default() -> Self {
        Self {
            decay_rate: 5.5e-3,
            diffusivity: 1e-4,
            capture_radius: 0.34,
            kernel_scales: [0.17; 3],
        }
    }
}

impl PathogenParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err("pathogen.decay_rate must be non-negative".into());
        }
        if !(self.diffusivity >= 0.0 && self.diffusivity.is_finite()) {
            return Err("pathogen.diffusivity must be non-negative".into());
        }
        if !(self.capture_radius > 0.0 && self.capture_radius.is_finite()) {
            return Err("pathogen.capture_radius must be positive".into());
        }
        if self.kernel_scales.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err("pathogen.kernel_scales must be positive".into());
        }
        Ok(())
    }

    /// Fraction of airborne particles surviving `dt` seconds.
    pub fn decay_factor(&self, dt: f64) -> f64 {
        (-self.decay_rate / SECONDS_PER_MINUTE * dt).exp()
    }
}

/// Particles that left the field during one transport step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TransportReport {
    pub decayed: f64,
    /// Carried out through open boundary faces.
    pub outflow: f64,
}

/// Advances the concentration by `dt` seconds with the current velocities.
pub fn step_transport(grid: &mut Grid, params: &PathogenParams, dt: f64) -> Result<TransportReport> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let number = params.diffusivity * dt / (grid.delta * grid.delta);
    if number > DIFFUSION_LIMIT {
        return Err(Error::Stability(format!(
            "scalar diffusion number {number:.4} exceeds 1/6"
        )));
    }
    let mut report = TransportReport::default();
    if grid.conc.iter().all(|c| *c == 0.0) {
        return Ok(report);
    }
    if grid.max_face_speed() > 0.0 {
        report.outflow = advect(grid, dt)?;
    }
    if number > 0.0 {
        diffuse(grid, number);
    }
    let factor = params.decay_factor(dt);
    if factor != 1.0 {
        let before = grid.total_mass();
        grid.conc.iter_mut().for_each(|c| *c *= factor);
        report.decayed = before - grid.total_mass();
    }
    if let Some(c) = grid.conc.iter().position(|c| *c < 0.0) {
        return Err(Error::Internal(format!(
            "negative concentration {:e} in cell {c} after transport",
            grid.conc[c]
        )));
    }
    Ok(report)
}

/// Upwind flux update. Returns the particles that left through open faces.
fn advect(grid: &mut Grid, dt: f64) -> Result<f64> {
    let courant = dt / grid.delta;
    // A cell cannot export more than it holds. Six faces at the top speed
    // bound every cell's export, so the scan is only needed near the limit.
    if 6.0 * grid.max_face_speed() * courant > 1.0 {
        let mut outgoing = vec![0.0; grid.cell_count()];
        for axis in 0..3 {
            let (vel, kinds) = (&grid.vel[axis], &grid.face_kind[axis]);
            grid.for_each_face(axis, |f, lo, hi| {
                let u = vel[f];
                if kinds[f] == FaceKind::Solid || u == 0.0 {
                    return;
                }
                if let Some(c) = if u > 0.0 { lo } else { hi } {
                    outgoing[c] += u.abs() * courant;
                }
            });
        }
        if let Some((c, w)) = outgoing
            .iter()
            .enumerate()
            .filter(|(c, _)| grid.conc[*c] > 0.0)
            .find(|(_, w)| **w > 1.0)
        {
            return Err(Error::Stability(format!(
                "cell {c} would export {w:.3} of its particles in one step"
            )));
        }
    }

    let mut next = grid.conc.clone();
    let mut outflow = 0.0;
    let conc = &grid.conc;
    for axis in 0..3 {
        let (vel, kinds) = (&grid.vel[axis], &grid.face_kind[axis]);
        grid.for_each_face(axis, |f, lo, hi| {
            let u = vel[f];
            if kinds[f] == FaceKind::Solid || u == 0.0 {
                return;
            }
            let (from, to) = if u > 0.0 { (lo, hi) } else { (hi, lo) };
            // Air entering through an open face carries no particles.
            let Some(from) = from else { return };
            let flux = u.abs() * courant * conc[from];
            next[from] -= flux;
            match to {
                Some(to) if grid.is_fluid(to) => next[to] += flux,
                _ => outflow += flux,
            }
        });
    }
    // Rounding can leave a sliver below zero in a fully drained cell.
    for (v, before) in next.iter_mut().zip(conc) {
        if *v < 0.0 && *v >= -1e-12 * before {
            *v = 0.0;
        }
    }
    grid.conc = next;
    Ok(outflow)
}

/// Explicit diffusion across fluid-fluid faces only.
fn diffuse(grid: &mut Grid, number: f64) {
    // Summing each axis separately keeps the update exactly mirror symmetric.
    let conc = &grid.conc;
    let mut change = vec![0.0; conc.len()];
    let mut along = vec![0.0; conc.len()];
    for axis in 0..3 {
        let kinds = &grid.face_kind[axis];
        along.iter_mut().for_each(|x| *x = 0.0);
        grid.for_each_face(axis, |f, lo, hi| {
            if kinds[f] != FaceKind::Fluid {
                return;
            }
            if let (Some(lo), Some(hi)) = (lo, hi) {
                let flux = number * (conc[lo] - conc[hi]);
                along[lo] -= flux;
                along[hi] += flux;
            }
        });
        change.iter_mut().zip(&along).for_each(|(c, a)| *c += a);
    }
    grid.conc.iter_mut().zip(&change).for_each(|(c, d)| *c += d);
}

/// Orthonormal mouth frame: facing, lateral (horizontal, to the left of
/// facing) and their cross product.
fn mouth_frame(direction: [f64; 3]) -> [[f64; 3]; 3] {
    let d = direction;
    let horiz = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let lat = if horiz > 1e-12 {
        [-d[1] / horiz, d[0] / horiz, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let vert = [
        d[1] * lat[2] - d[2] * lat[1],
        d[2] * lat[0] - d[0] * lat[2],
        d[0] * lat[1] - d[1] * lat[0],
    ];
    [d, lat, vert]
}

/// Normalized exhale weights of one mouth. The weights depend only on the
/// geometry, so a realization builds each kernel once.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaleKernel {
    pub weights: Vec<(usize, f64)>,
}

impl ExhaleKernel {
    pub fn new(grid: &Grid, mouth: &MouthSite, params: &PathogenParams) -> Result<Self> {
        let frame = mouth_frame(mouth.direction);
        let origin = mouth.position;
        let w = params.kernel_scales;
        let reach = KERNEL_CUTOFF * w.iter().fold(0.0_f64, |m, x| m.max(*x));
        let range = |axis: usize| {
            let lo = ((origin[axis] - reach) / grid.delta).floor().max(0.0) as usize;
            let hi = (((origin[axis] + reach) / grid.delta).ceil() as usize).min(grid.dims[axis]);
            lo..hi
        };
        let mut weights = Vec::new();
        for k in range(2) {
            for j in range(1) {
                for i in range(0) {
                    let c = grid.idx(i, j, k);
                    if !grid.is_fluid(c) {
                        continue;
                    }
                    let p = grid.cell_center([i, j, k]);
                    let r = [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]];
                    let proj = |e: [f64; 3]| r[0] * e[0] + r[1] * e[1] + r[2] * e[2];
                    let along = proj(frame[0]);
                    // Tolerance keeps cells on the mouth plane.
                    if along < -1e-9 * grid.delta {
                        continue;
                    }
                    let exponent = along.abs() / w[0] + proj(frame[1]).abs() / w[1] + proj(frame[2]).abs() / w[2];
                    if exponent <= KERNEL_CUTOFF {
                        weights.push((c, (-exponent).exp()));
                    }
                }
            }
        }
        let total: f64 = weights.iter().map(|x| x.1).sum();
        if !(total > 0.0) {
            return Err(Error::Injection(format!(
                "no fluid cell in front of the mouth at cell {}",
                mouth.cell
            )));
        }
        weights.iter_mut().for_each(|x| x.1 /= total);
        Ok(Self { weights })
    }

    /// Adds `amount` particles to the field.
    pub fn inject(&self, grid: &mut Grid, amount: f64) {
        if amount == 0.0 {
            return;
        }
        for (c, w) in &self.weights {
            grid.conc[*c] += amount * w;
        }
    }
}

/// Spreads `amount` particles over the cells in front of `mouth`.
pub fn inject_exhaled(grid: &mut Grid, mouth: &MouthSite, amount: f64, params: &PathogenParams) -> Result<()> {
    if !(amount >= 0.0 && amount.is_finite()) {
        return Err(Error::InvalidArgument(format!("exhaled amount must be non-negative, got {amount}")));
    }
    if amount == 0.0 {
        return Ok(());
    }
    ExhaleKernel::new(grid, mouth, params)?.inject(grid, amount);
    Ok(())
}

/// Fluid cells whose centers lie within the capture radius of a mouth.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureZone {
    pub cells: Vec<usize>,
    /// Fluid volume of the zone (m³).
    pub volume: f64,
}

impl CaptureZone {
    pub fn new(grid: &Grid, center: [f64; 3], radius: f64) -> Self {
        let range = |axis: usize| {
            let lo = ((center[axis] - radius) / grid.delta).floor().max(0.0) as usize;
            let hi = (((center[axis] + radius) / grid.delta).ceil().max(0.0) as usize).min(grid.dims[axis]);
            lo..hi
        };
        let r2 = radius * radius;
        let mut cells = Vec::new();
        for k in range(2) {
            for j in range(1) {
                for i in range(0) {
                    let c = grid.idx(i, j, k);
                    let p = grid.cell_center([i, j, k]);
                    let d2: f64 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
                    if grid.is_fluid(c) && d2 <= r2 {
                        cells.push(c);
                    }
                }
            }
        }
        let volume = cells.len() as f64 * grid.cell_volume();
        Self { cells, volume }
    }

    /// Removes the share `inhaled_volume / volume` (at most all) of every
    /// zone cell and returns the particles removed.
    pub fn absorb(&self, grid: &mut Grid, inhaled_volume: f64) -> f64 {
        if self.cells.is_empty() || inhaled_volume <= 0.0 {
            return 0.0;
        }
        let fraction = (inhaled_volume / self.volume).min(1.0);
        let mut absorbed = 0.0;
        for &c in &self.cells {
            let taken = if fraction == 1.0 { grid.conc[c] } else { grid.conc[c] * fraction };
            grid.conc[c] -= taken;
            absorbed += taken;
        }
        absorbed
    }
}

/// Inhales `inhaled_volume` m³ around `mouth` and returns the particles
/// removed from the field.
pub fn absorb_inhaled(grid: &mut Grid, mouth: [f64; 3], radius: f64, inhaled_volume: f64) -> f64 {
    CaptureZone::new(grid, mouth, radius).absorb(grid, inhaled_volume)
}
