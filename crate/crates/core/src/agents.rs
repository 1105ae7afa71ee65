//! The seated population: breathing cycles, pathogen load and SEI state.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Seat;

const SECONDS_PER_MINUTE: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpiState {
    Susceptible,
    Exposed,
    Infected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Inhale,
    Pause,
    Exhale,
    Pause2,
}

/// Breathing durations (s) and flow rates (m³/s) of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breathing {
    pub t_in: f64,
    pub t_pause1: f64,
    pub t_out: f64,
    pub t_pause2: f64,
    pub q_in: f64,
    pub q_out: f64,
}

impl Breathing {
    pub fn cycle(&self) -> f64 {
        self.t_in + self.t_pause1 + self.t_out + self.t_pause2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: usize,
    pub seat: Seat,
    /// Seconds into the cycle at t = 0.
    pub phase_offset: f64,
    pub breathing: Breathing,
    /// Load above which a susceptible agent becomes exposed (particles).
    pub infection_threshold: f64,
    /// Host clearance rate (1/min).
    pub clearance_rate: f64,
    /// Particles released per exhale while infected.
    pub emission_per_exhale: f64,
    pub state: EpiState,
    /// Particles inside the body.
    pub load: f64,
    /// Simulation time (s) of the S→E transition.
    pub exposed_since: Option<f64>,
    pub masked: bool,
}

/// Mean and standard deviation of a truncated normal parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanStd {
    pub mean: f64,
    #[serde(default)]
    pub std: f64,
}

impl MeanStd {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    /// Normal draw, redrawn until it reaches 10% of the mean.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.std == 0.0 {
            return self.mean;
        }
        let normal = Normal::new(self.mean, self.std).expect("validated std");
        let floor = 0.1 * self.mean;
        loop {
            let x = normal.sample(rng);
            if x >= floor {
                return x;
            }
        }
    }
}

/// Population parameter distributions. Durations in seconds, flow rates in
/// m³/s, clearance in 1/min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationDistributions {
    pub t_in: MeanStd,
    pub t_out: MeanStd,
    pub pause: MeanStd,
    pub q_in: MeanStd,
    pub q_out: MeanStd,
    pub infection_threshold: MeanStd,
    pub emission_per_exhale: MeanStd,
    pub clearance_rate: MeanStd,
    /// Exposed→infected rate (1/min); agents stay exposed for `1/rate` minutes.
    pub incubation_rate: f64,
}

impl Default for PopulationDistributions {
    fn default() -> Self {
        Self {
            t_in: MeanStd::new(1.42, 0.25),
            t_out: MeanStd::new(2.28, 0.47),
            pause: MeanStd::new(0.39, 0.04),
            q_in: MeanStd::new(304e-6, 71e-6),
            q_out: MeanStd::new(198e-6, 41e-6),
            infection_threshold: MeanStd::new(1e8, 0.0),
            emission_per_exhale: MeanStd::new(1.3e7, 0.0),
            clearance_rate: MeanStd::new(6.6e-4, 0.0),
            incubation_rate: 1.01e-4,
        }
    }
}

impl PopulationDistributions {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("t_in", self.t_in),
            ("t_out", self.t_out),
            ("pause", self.pause),
            ("q_in", self.q_in),
            ("q_out", self.q_out),
            ("infection_threshold", self.infection_threshold),
            ("emission_per_exhale", self.emission_per_exhale),
            ("clearance_rate", self.clearance_rate),
        ];
        for (name, d) in all {
            // Zero emission and clearance are legitimate experiment knobs.
            let mean_ok = if matches!(name, "emission_per_exhale" | "clearance_rate") {
                d.mean >= 0.0
            } else {
                d.mean > 0.0
            };
            if !mean_ok || !d.mean.is_finite() || !(d.std >= 0.0 && d.std.is_finite()) {
                return Err(format!("population.{name}: bad mean/std {}/{}", d.mean, d.std));
            }
        }
        if !(self.incubation_rate > 0.0 && self.incubation_rate.is_finite()) {
            return Err("population.incubation_rate must be positive".into());
        }
        Ok(())
    }

    /// Seconds an agent stays exposed before turning infected.
    pub fn incubation_seconds(&self) -> f64 {
        SECONDS_PER_MINUTE / self.incubation_rate
    }
}

/// Draws a susceptible, unmasked agent for `seat`.
pub fn sample_agent<R: Rng + ?Sized>(rng: &mut R, dists: &PopulationDistributions, id: usize, seat: Seat) -> Agent {
    let breathing = Breathing {
        t_in: dists.t_in.sample(rng),
        t_pause1: dists.pause.sample(rng),
        t_out: dists.t_out.sample(rng),
        t_pause2: dists.pause.sample(rng),
        q_in: dists.q_in.sample(rng),
        q_out: dists.q_out.sample(rng),
    };
    let infection_threshold = dists.infection_threshold.sample(rng);
    let emission_per_exhale = dists.emission_per_exhale.sample(rng);
    let clearance_rate = dists.clearance_rate.sample(rng);
    let phase_offset = rng.gen::<f64>() * breathing.cycle();
    Agent {
        id,
        seat,
        phase_offset,
        breathing,
        infection_threshold,
        clearance_rate,
        emission_per_exhale,
        state: EpiState::Susceptible,
        load: 0.0,
        exposed_since: None,
        masked: false,
    }
}

/// Phase at time `t`. Sub-intervals are half-open: the cycle position
/// `(t + offset) mod cycle` is `Inhale` on `[0, t_in)`, `Pause` on
/// `[t_in, t_in + t_pause1)`, `Exhale` on the next `t_out` seconds and
/// `Pause2` for the rest.
pub fn breathing_phase(agent: &Agent, t: f64) -> Phase {
    let b = &agent.breathing;
    let tau = (t + agent.phase_offset).rem_euclid(b.cycle());
    let mut edge = b.t_in;
    if tau < edge {
        return Phase::Inhale;
    }
    edge += b.t_pause1;
    if tau < edge {
        return Phase::Pause;
    }
    edge += b.t_out;
    if tau < edge {
        return Phase::Exhale;
    }
    Phase::Pause2
}

/// Absorbs `absorbed` particles over a step ending at time `t` and advances
/// the SEI state. Clearance only runs while susceptible.
pub fn update_epidemiology(agent: &mut Agent, absorbed: f64, dt: f64, t: f64, incubation_seconds: f64) {
    debug_assert!(absorbed >= 0.0);
    match agent.state {
        EpiState::Susceptible => {
            let decay = (-agent.clearance_rate / SECONDS_PER_MINUTE * dt).exp();
            agent.load = agent.load * decay + absorbed;
            if agent.load > agent.infection_threshold {
                agent.state = EpiState::Exposed;
                agent.exposed_since = Some(t);
            }
        }
        EpiState::Exposed => {
            agent.load += absorbed;
            let since = agent.exposed_since.expect("exposed agents carry a timestamp");
            if t - since >= incubation_seconds {
                agent.state = EpiState::Infected;
            }
        }
        EpiState::Infected => agent.load += absorbed,
    }
}

/// Particles released by one exhale before any mask.
pub fn emission_for_exhale(agent: &Agent) -> f64 {
    match agent.state {
        EpiState::Infected => agent.emission_per_exhale,
        EpiState::Susceptible | EpiState::Exposed => 0.0,
    }
}

/// Marks `agent` as the index case.
pub fn infect(agent: &mut Agent) {
    agent.state = EpiState::Infected;
}
