//! Pressure Poisson operator and MIC(0)-preconditioned conjugate gradients.
//!
//! The system is laid out over the whole cell lattice. Rows of non-fluid
//! and pinned cells are empty and their unknowns stay zero. Solid faces and
//! driven faces (mouth faces whose velocity is prescribed) carry no
//! coupling; open boundary faces hold the pressure at zero outside the
//! room. A fluid region with no open face has a singular operator; its
//! lowest-index cell is pinned to zero. Everything is sequential, so
//! results do not depend on the thread count.

use crate::error::{Error, Result};
use crate::geometry::{FaceKind, Grid};

const NONE: u32 = u32::MAX;
const MIC_TAU: f64 = 0.97;
const MIC_SIGMA: f64 = 0.25;

#[derive(Debug, Clone, Default)]
pub(crate) struct PoissonOperator {
    strides: [usize; 3],
    active: Vec<bool>,
    /// Number of coupled or open faces of each unknown.
    diag: Vec<f64>,
    /// 1 where cell `c` couples to `c + stride` along the axis, else 0.
    coupling: [Vec<f64>; 3],
    precon: Vec<f64>,
    /// `coupling · precon` of the lower cell.
    lower: [Vec<f64>; 3],
    /// The pinned grid cell of each closed fluid region.
    pub(crate) pinned: Vec<usize>,
    /// Closed-region number of each unknown, `NONE` in open regions.
    component: Vec<u32>,
    /// Faces with a prescribed velocity, per axis.
    driven: [Vec<bool>; 3],
    pub(crate) drives: Vec<Drive>,
    scratch: Scratch,
}

/// A mouth whose faces are driven.
#[derive(Debug, Clone)]
pub(crate) struct Drive {
    pub(crate) cell: usize,
    pub(crate) direction: [f64; 3],
    /// Driven faces as `(axis, face, signed share of the flow rate)`.
    pub(crate) faces: Vec<(usize, usize, f64)>,
    /// Flow rate currently prescribed (m³/s).
    pub(crate) rate: f64,
    /// Rate change made by the current step.
    pub(crate) change: f64,
    /// Rate change made by the previous step.
    pub(crate) previous_change: f64,
    /// Pressure response to a unit rate change, computed on first use.
    pub(crate) response: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    r: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Largest divergence error (1/s) left by the solve.
    pub residual: f64,
}

impl PoissonOperator {
    /// Builds the operator with the fluid faces of each mouth, given as
    /// `(cell, direction)`, driven.
    pub(crate) fn new(grid: &Grid, mouths: &[(usize, [f64; 3])]) -> Self {
        let n = grid.cell_count();
        let [nx, ny, _] = grid.dims;
        let strides = [1, nx, nx * ny];
        let mut driven_mask = [0, 1, 2].map(|a| vec![false; grid.vel[a].len()]);
        let mut drives = Vec::with_capacity(mouths.len());
        for &(cell, direction) in mouths {
            let faces: Vec<(usize, usize, f64)> = super::mouth_faces(grid, cell, direction)
                .into_iter()
                .filter(|(a, f, _)| grid.face_kind[*a][*f] == FaceKind::Fluid)
                .collect();
            for (a, f, _) in &faces {
                driven_mask[*a][*f] = true;
            }
            drives.push(Drive {
                cell,
                direction,
                faces,
                rate: 0.0,
                change: 0.0,
                previous_change: 0.0,
                response: None,
            });
        }
        let couples = |a: usize, f: usize| grid.face_kind[a][f] == FaceKind::Fluid && !driven_mask[a][f];

        // Flood-fill fluid regions through coupled faces.
        let mut region = vec![NONE; n];
        let mut region_open = Vec::new();
        let mut region_seed = Vec::new();
        let mut stack = Vec::new();
        for seed in 0..n {
            if !grid.is_fluid(seed) || region[seed] != NONE {
                continue;
            }
            let id = region_open.len() as u32;
            region_open.push(false);
            region_seed.push(seed);
            region[seed] = id;
            stack.push(seed);
            while let Some(c) = stack.pop() {
                let ijk = grid.ijk(c);
                for a in 0..3 {
                    let (lo, hi) = grid.cell_faces(a, ijk);
                    for (f, up) in [(lo, false), (hi, true)] {
                        if grid.face_kind[a][f] == FaceKind::Open {
                            region_open[id as usize] = true;
                        } else if couples(a, f) {
                            let nb = if up { c + strides[a] } else { c - strides[a] };
                            if region[nb] == NONE {
                                region[nb] = id;
                                stack.push(nb);
                            }
                        }
                    }
                }
            }
        }
        let pinned: Vec<usize> = region_open
            .iter()
            .zip(&region_seed)
            .filter(|(open, _)| !**open)
            .map(|(_, seed)| *seed)
            .collect();

        let mut active: Vec<bool> = (0..n).map(|c| grid.is_fluid(c)).collect();
        pinned.iter().for_each(|p| active[*p] = false);
        let closed: Vec<u32> = (0..region_open.len())
            .map(|r| pinned.iter().position(|p| region[*p] == r as u32).map_or(NONE, |p| p as u32))
            .collect();
        let component: Vec<u32> = (0..n)
            .map(|c| if active[c] { closed[region[c] as usize] } else { NONE })
            .collect();

        let mut diag = vec![0.0; n];
        let mut coupling = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for c in 0..n {
            if !active[c] {
                continue;
            }
            let ijk = grid.ijk(c);
            for a in 0..3 {
                let (lo, hi) = grid.cell_faces(a, ijk);
                for (f, up) in [(lo, false), (hi, true)] {
                    if grid.face_kind[a][f] == FaceKind::Open {
                        diag[c] += 1.0;
                    } else if couples(a, f) {
                        diag[c] += 1.0;
                        let nb = if up { c + strides[a] } else { c - strides[a] };
                        if up && active[nb] {
                            coupling[a][c] = 1.0;
                        }
                    }
                }
            }
        }

        let mut op = PoissonOperator {
            strides,
            active,
            diag,
            coupling,
            precon: vec![0.0; n],
            lower: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            pinned,
            component,
            driven: driven_mask,
            drives,
            scratch: Scratch {
                r: vec![0.0; n],
                z: vec![0.0; n],
                s: vec![0.0; n],
                q: vec![0.0; n],
            },
        };
        op.factor();
        op
    }

    pub(crate) fn len(&self) -> usize {
        self.active.len()
    }

    pub(crate) fn is_active(&self, c: usize) -> bool {
        self.active[c]
    }

    pub(crate) fn is_driven(&self, axis: usize, f: usize) -> bool {
        self.driven[axis][f]
    }

    /// Whether cell `c` lies in a fluid region without an open face.
    pub(crate) fn is_sealed(&self, c: usize) -> bool {
        self.component[c] != NONE || self.pinned.contains(&c)
    }

    /// Modified incomplete Cholesky, level zero.
    fn factor(&mut self) {
        let s = self.strides;
        for c in 0..self.len() {
            if !self.active[c] {
                continue;
            }
            let mut e = self.diag[c];
            for a in 0..3 {
                if c < s[a] {
                    continue;
                }
                let m = c - s[a];
                let w = self.coupling[a][m];
                if w == 0.0 {
                    continue;
                }
                let pm = self.precon[m];
                let others: f64 = (0..3).filter(|b| *b != a).map(|b| self.coupling[b][m]).sum();
                e -= (w * pm).powi(2) + MIC_TAU * w * others * pm * pm;
            }
            if e < MIC_SIGMA * self.diag[c] {
                e = self.diag[c];
            }
            self.precon[c] = if e > 0.0 { 1.0 / e.sqrt() } else { 0.0 };
        }
        for a in 0..3 {
            for c in 0..self.len() {
                self.lower[a][c] = self.coupling[a][c] * self.precon[c];
            }
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o = d * xi;
        }
        for a in 0..3 {
            let s = self.strides[a];
            let n = self.len();
            if s >= n {
                continue;
            }
            let w = &self.coupling[a][..n - s];
            for ((o, wi), xp) in out[..n - s].iter_mut().zip(w).zip(&x[s..]) {
                *o -= wi * xp;
            }
            for ((o, wi), xm) in out[s..].iter_mut().zip(w).zip(&x[..n - s]) {
                *o -= wi * xm;
            }
        }
    }

    fn precondition(&self, r: &[f64], q: &mut [f64], z: &mut [f64]) {
        let n = self.len();
        let [sx, sy, sz] = self.strides;
        let [lx, ly, lz] = &self.lower;
        let pre = &self.precon[..n];
        let (r, q, z) = (&r[..n], &mut q[..n], &mut z[..n]);
        let edge = sz.min(n);
        for c in 0..edge {
            let mut t = r[c];
            if c >= sx {
                t += lx[c - sx] * q[c - sx];
            }
            if c >= sy {
                t += ly[c - sy] * q[c - sy];
            }
            q[c] = t * pre[c];
        }
        for c in edge..n {
            let t = r[c] + lx[c - 1] * q[c - 1] + ly[c - sy] * q[c - sy] + lz[c - sz] * q[c - sz];
            q[c] = t * pre[c];
        }
        let inner = n.saturating_sub(sz);
        for c in (inner..n).rev() {
            let mut t = q[c];
            if c + sx < n {
                t += lx[c] * z[c + sx];
            }
            if c + sy < n {
                t += ly[c] * z[c + sy];
            }
            z[c] = t * pre[c];
        }
        for c in (0..inner).rev() {
            let t = q[c] + lx[c] * z[c + 1] + ly[c] * z[c + sy] + lz[c] * z[c + sz];
            z[c] = t * pre[c];
        }
    }

    /// Largest equation error, counting the implied equation of each pinned
    /// cell (minus the sum of its region's residuals).
    fn residual_norm(&self, r: &[f64], sums: &mut [f64]) -> f64 {
        let mut max = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if !self.pinned.is_empty() {
            sums.iter_mut().for_each(|s| *s = 0.0);
            for (ri, c) in r.iter().zip(&self.component) {
                if *c != NONE {
                    sums[*c as usize] += ri;
                }
            }
            max = sums.iter().fold(max, |m, s| m.max(s.abs()));
        }
        max
    }

    /// Solves `A x = b` in place over the full lattice; entries of `b` and
    /// `x` outside the unknowns must be zero. Convergence is judged on
    /// `max|b - A x| <= tol`, and on the tighter bound given for each cell
    /// in `tight`.
    pub(crate) fn solve(
        &mut self,
        b: &[f64],
        x: &mut [f64],
        tol: f64,
        tight: &[(usize, f64)],
        max_iter: usize,
    ) -> Result<SolveStats> {
        let mut scratch = std::mem::take(&mut self.scratch);
        let Scratch { r, z, s, q } = &mut scratch;
        let mut sums = vec![0.0; self.pinned.len()];

        self.apply(x, q);
        for ((ri, bi), qi) in r.iter_mut().zip(b).zip(q.iter()) {
            *ri = bi - qi;
        }
        let converged = |r: &[f64], res: f64| res <= tol && tight.iter().all(|(c, t)| r[*c].abs() <= *t);
        let mut res = self.residual_norm(r, &mut sums);
        let mut it = 0;
        if !converged(r, res) {
            self.precondition(r, q, z);
            s.copy_from_slice(z);
            let mut rho = dot(z, r);
            while it < max_iter {
                it += 1;
                self.apply(s, q);
                let sq = dot(s, q);
                if sq <= 0.0 || !sq.is_finite() {
                    break;
                }
                let alpha = rho / sq;
                for (xi, si) in x.iter_mut().zip(s.iter()) {
                    *xi += alpha * si;
                }
                for (ri, qi) in r.iter_mut().zip(q.iter()) {
                    *ri -= alpha * qi;
                }
                res = self.residual_norm(r, &mut sums);
                if converged(r, res) {
                    break;
                }
                self.precondition(r, q, z);
                let rho_new = dot(z, r);
                let beta = rho_new / rho;
                rho = rho_new;
                for (si, zi) in s.iter_mut().zip(z.iter()) {
                    *si = zi + beta * *si;
                }
            }
        }
        let done = converged(r, res);
        self.scratch = scratch;
        if done {
            Ok(SolveStats { iterations: it, residual: res })
        } else {
            Err(Error::Convergence {
                residual: res,
                iterations: it,
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
