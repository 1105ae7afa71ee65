//! Mask-wearing and air-ventilation policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::geometry::Grid;

/// Which breaths a mask filters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Exhaled and inhaled particles alike.
    #[default]
    Symmetric,
    /// Exhaled particles only.
    ExhaleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskPolicy {
    /// Share of agents wearing a mask (η).
    pub eta: f64,
    /// Share of particles a mask filters (κ).
    pub kappa: f64,
    #[serde(default)]
    pub mode: MaskMode,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        Self {
            eta: 0.0,
            kappa: 0.0,
            mode: MaskMode::Symmetric,
        }
    }
}

impl MaskPolicy {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("eta", self.eta), ("kappa", self.kappa)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("pip.mask.{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VentilationPolicy {
    /// Share of airborne particles removed per event (χ).
    pub chi: f64,
    /// Minutes between events (ζ).
    pub period_minutes: f64,
}

impl Default for VentilationPolicy {
    fn default() -> Self {
        Self {
            chi: 0.0,
            period_minutes: 30.0,
        }
    }
}

impl VentilationPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(format!("pip.ventilation.chi must lie in [0, 1], got {}", self.chi));
        }
        if !(self.period_minutes > 0.0 && self.period_minutes.is_finite()) {
            return Err(format!(
                "pip.ventilation.period_minutes must be positive, got {}",
                self.period_minutes
            ));
        }
        Ok(())
    }

    /// Steps between events, at least one.
    pub fn period_steps(&self, dt: f64) -> usize {
        ((self.period_minutes * 60.0 / dt).round() as usize).max(1)
    }
}

/// Masks each agent independently with probability `eta`. Every agent
/// consumes exactly one uniform draw, so the same stream gives nested mask
/// sets for increasing `eta`.
pub fn assign_masks<R: Rng + ?Sized>(agents: &mut [Agent], eta: f64, rng: &mut R) {
    for agent in agents {
        let u: f64 = rng.gen();
        agent.masked = u < eta;
    }
}

fn attenuate(agent: &Agent, amount: f64, kappa: f64) -> f64 {
    if agent.masked {
        amount * (1.0 - kappa)
    } else {
        amount
    }
}

/// Particles that pass the agent's mask on the way out.
pub fn filter_emission(agent: &Agent, raw: f64, kappa: f64) -> f64 {
    attenuate(agent, raw, kappa)
}

/// Particles that pass the agent's mask on the way in.
pub fn filter_intake(agent: &Agent, absorbed: f64, kappa: f64) -> f64 {
    attenuate(agent, absorbed, kappa)
}

/// Removes the share `chi` of every cell's particles and returns the amount
/// removed. Velocities are untouched.
pub fn apply_ventilation(grid: &mut Grid, chi: f64) -> f64 {
    let before = grid.total_mass();
    if chi == 1.0 {
        grid.conc.iter_mut().for_each(|c| *c = 0.0);
    } else if chi != 0.0 {
        let keep = 1.0 - chi;
        grid.conc.iter_mut().for_each(|c| *c *= keep);
    }
    before - grid.total_mass()
}
