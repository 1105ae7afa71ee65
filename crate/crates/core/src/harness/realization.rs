//! One realization: the per-step loop over breathing, flow, transport,
//! inhalation and epidemiology.
//!
//! The airflow does not depend on masks or ventilation, so a realization
//! can carry several PIP settings ("lanes") over one shared flow solve.
//! Each lane owns its concentration field, population state and ledger;
//! with a single lane this is an ordinary run.

use serde::Serialize;

use crate::agents::{
    breathing_phase, emission_for_exhale, infect, sample_agent, update_epidemiology, Agent, EpiState, Phase,
};
use crate::error::{Error, Result};
use crate::flow::{collect_breathing_bcs, step_flow};
use crate::geometry::{build_grid, Grid, RoomSpec};
use crate::interventions::{
    apply_ventilation, assign_masks, filter_emission, filter_intake, MaskMode, MaskPolicy, VentilationPolicy,
};
use crate::transport::{step_transport, CaptureZone, ExhaleKernel};

use super::config::SimConfig;
use super::rng::{stream, Stream};
use rand::Rng;

/// The intervention settings of one lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipSetting {
    pub mask: MaskPolicy,
    pub ventilation: VentilationPolicy,
}

/// Particle accounting of one realization. Airborne particles satisfy
/// `emitted = absorbed + decayed + vented + outflow + field`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ParticleLedger {
    /// Released into the air, after exhale masks.
    pub emitted: f64,
    /// Held back by masks on the way out.
    pub mask_trapped_out: f64,
    /// Removed from the air by inhalation.
    pub absorbed: f64,
    /// Part of `absorbed` held back by masks on the way in.
    pub mask_trapped_in: f64,
    pub decayed: f64,
    pub vented: f64,
    /// Carried out through open boundary patches.
    pub outflow: f64,
    /// Airborne at the end of the run.
    pub field: f64,
}

impl ParticleLedger {
    pub fn residual(&self) -> f64 {
        self.emitted - (self.absorbed + self.decayed + self.vented + self.outflow + self.field)
    }

    /// `|residual| / emitted`, or the bare residual when nothing was emitted.
    pub fn relative_residual(&self) -> f64 {
        let r = self.residual().abs();
        if self.emitted > 0.0 {
            r / self.emitted
        } else {
            r
        }
    }

    /// Particles that reached agents' bodies.
    pub fn body_intake(&self) -> f64 {
        self.absorbed - self.mask_trapped_in
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeiCounts {
    pub t: f64,
    pub s: usize,
    pub e: usize,
    pub i: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Exposed,
    Infected,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Exposed => "exposed",
            EventKind::Infected => "infected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentEvent {
    pub agent: usize,
    pub kind: EventKind,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentRecord {
    pub id: usize,
    pub masked: bool,
    pub exposed_at: Option<f64>,
    pub infected_at: Option<f64>,
    pub final_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationResult {
    pub index: usize,
    pub index_agent: usize,
    pub population: usize,
    pub pip: PipSetting,
    pub series: Vec<SeiCounts>,
    pub agents: Vec<AgentRecord>,
    pub events: Vec<AgentEvent>,
    pub ledger: ParticleLedger,
    /// Start of the index agent's first exhale (s).
    pub first_index_exhale: Option<f64>,
    pub config_hash: String,
}

impl RealizationResult {
    /// Exposed or infected agents at the end, excluding the index agent, as
    /// a share of the population.
    pub fn final_exposed_fraction(&self) -> f64 {
        let last = self.series.last().expect("series has the t = 0 sample");
        (last.e + last.i).saturating_sub(1) as f64 / self.population as f64
    }
}

/// Everything a realization needs that does not depend on its index: the
/// room, the voxelized grid and the per-agent kernels.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: SimConfig,
    room: RoomSpec,
    grid: Grid,
    kernels: Vec<ExhaleKernel>,
    zones: Vec<CaptureZone>,
    hash: String,
}

impl Scenario {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let room = config.resolve_room()?;
        Self::with_room(config, room)
    }

    /// Like [`Scenario::new`] with an explicit room, ignoring `config.room`.
    pub fn with_room(config: &SimConfig, room: RoomSpec) -> Result<Self> {
        config.validate()?;
        if room.seats.is_empty() {
            return Err(Error::Config(format!("room `{}` has no seats", room.name)));
        }
        let grid = build_grid(&room, config.grid.cell_size, &room.seats)?;
        let kernels = grid
            .mouths
            .iter()
            .map(|m| ExhaleKernel::new(&grid, m, &config.pathogen))
            .collect::<Result<Vec<_>>>()?;
        let zones = grid
            .mouths
            .iter()
            .map(|m| CaptureZone::new(&grid, m.position, config.pathogen.capture_radius))
            .collect();
        Ok(Self {
            config: config.clone(),
            hash: config.hash(),
            room,
            grid,
            kernels,
            zones,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn room(&self) -> &RoomSpec {
        &self.room
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pip(&self) -> PipSetting {
        PipSetting {
            mask: self.config.pip.mask,
            ventilation: self.config.pip.ventilation,
        }
    }

    /// Runs realization `index` with the configured PIPs.
    pub fn run(&self, index: usize) -> Result<RealizationResult> {
        let mut out = self.run_lanes(index, &[self.pip()])?;
        Ok(out.remove(0))
    }

    /// Runs realization `index` once per PIP setting, sharing the agents,
    /// index case, mask draws and airflow.
    pub fn run_lanes(&self, index: usize, pips: &[PipSetting]) -> Result<Vec<RealizationResult>> {
        for p in pips {
            p.mask.validate().map_err(Error::InvalidArgument)?;
            p.ventilation.validate().map_err(Error::InvalidArgument)?;
        }
        simulate(self, index, pips, &mut |_, _| false)
    }

    /// Runs realization `index` with the configured PIPs, ending early once
    /// `stop(t, events)` holds after a step. The series then ends at `t`.
    pub fn run_until(
        &self,
        index: usize,
        mut stop: impl FnMut(f64, &[AgentEvent]) -> bool,
    ) -> Result<RealizationResult> {
        let mut out = simulate(self, index, &[self.pip()], &mut stop)?;
        Ok(out.remove(0))
    }
}

/// Builds the scenario and runs one realization.
pub fn run_realization(config: &SimConfig, index: usize) -> Result<RealizationResult> {
    Scenario::new(config)?.run(index)
}

struct Lane {
    pip: PipSetting,
    conc: Vec<f64>,
    agents: Vec<Agent>,
    ledger: ParticleLedger,
    series: Vec<SeiCounts>,
    events: Vec<AgentEvent>,
    records: Vec<AgentRecord>,
    vent_every: usize,
    intake: Vec<f64>,
}

impl Lane {
    fn counts(&self, t: f64) -> SeiCounts {
        let mut c = SeiCounts { t, s: 0, e: 0, i: 0 };
        for a in &self.agents {
            match a.state {
                EpiState::Susceptible => c.s += 1,
                EpiState::Exposed => c.e += 1,
                EpiState::Infected => c.i += 1,
            }
        }
        c
    }

    /// True when nothing airborne can ever happen again in this lane.
    fn is_quiet(&self) -> bool {
        self.agents.iter().all(|a| {
            a.state != EpiState::Exposed
                && filter_emission(a, emission_for_exhale(a), self.pip.mask.kappa) == 0.0
        }) && self.conc.iter().all(|c| *c == 0.0)
    }
}

fn simulate(
    scenario: &Scenario,
    index: usize,
    pips: &[PipSetting],
    stop: &mut dyn FnMut(f64, &[AgentEvent]) -> bool,
) -> Result<Vec<RealizationResult>> {
    let cfg = &scenario.config;
    let seed = cfg.run.seed;
    let dt = cfg.time.dt;
    let steps = cfg.time.steps();
    let sample_every = cfg.time.sample_every();
    let incubation = cfg.population.incubation_seconds();
    let n_agents = scenario.room.seats.len();

    let mut rng = stream(seed, Stream::Agents, index as u64);
    let base: Vec<Agent> = scenario
        .room
        .seats
        .iter()
        .enumerate()
        .map(|(id, seat)| sample_agent(&mut rng, &cfg.population, id, *seat))
        .collect();
    let index_agent = stream(seed, Stream::IndexCase, index as u64).gen_range(0..n_agents);

    let mut grid = scenario.grid.clone();
    let mut lanes: Vec<Lane> = pips
        .iter()
        .map(|pip| {
            let mut agents = base.clone();
            assign_masks(&mut agents, pip.mask.eta, &mut stream(seed, Stream::Masks, index as u64));
            infect(&mut agents[index_agent]);
            let mut lane = Lane {
                pip: *pip,
                conc: grid.conc.clone(),
                records: agents
                    .iter()
                    .map(|a| AgentRecord {
                        id: a.id,
                        masked: a.masked,
                        exposed_at: None,
                        infected_at: None,
                        final_load: 0.0,
                    })
                    .collect(),
                agents,
                ledger: ParticleLedger::default(),
                series: Vec::with_capacity(steps / sample_every + 2),
                events: Vec::new(),
                vent_every: pip.ventilation.period_steps(dt),
                intake: vec![0.0; n_agents],
            };
            lane.series.push(lane.counts(0.0));
            lane
        })
        .collect();

    let mut previous: Vec<Option<Phase>> = vec![None; n_agents];
    let mut first_index_exhale = None;
    let mut quiet = false;
    for n in 0..steps {
        let t = n as f64 * dt;
        let t_next = (n + 1) as f64 * dt;
        let phases: Vec<Phase> = base.iter().map(|a| breathing_phase(a, t)).collect();

        // Exhale onsets release one breath's worth of particles.
        for (a, phase) in phases.iter().enumerate() {
            if *phase != Phase::Exhale || previous[a] == Some(Phase::Exhale) {
                continue;
            }
            if a == index_agent && first_index_exhale.is_none() {
                first_index_exhale = Some(t);
            }
            for lane in lanes.iter_mut() {
                let agent = &lane.agents[a];
                let raw = emission_for_exhale(agent);
                if raw == 0.0 {
                    continue;
                }
                let released = filter_emission(agent, raw, lane.pip.mask.kappa);
                lane.ledger.emitted += released;
                lane.ledger.mask_trapped_out += raw - released;
                if released > 0.0 {
                    std::mem::swap(&mut grid.conc, &mut lane.conc);
                    scenario.kernels[a].inject(&mut grid, released);
                    std::mem::swap(&mut grid.conc, &mut lane.conc);
                }
            }
        }

        if !quiet {
            quiet = lanes.iter().all(Lane::is_quiet);
        }
        if !quiet {
            let bcs = collect_breathing_bcs(&base, &grid.mouths, t);
            step_flow(&mut grid, &cfg.flow, &bcs, dt).map_err(|e| e.at_step(n))?;
        }

        for lane in lanes.iter_mut() {
            std::mem::swap(&mut grid.conc, &mut lane.conc);
            lane.intake.iter_mut().for_each(|x| *x = 0.0);
            if !quiet {
                let report = step_transport(&mut grid, &cfg.pathogen, dt).map_err(|e| e.at_step(n))?;
                lane.ledger.decayed += report.decayed;
                lane.ledger.outflow += report.outflow;
                for a in 0..n_agents {
                    if phases[a] != Phase::Inhale {
                        continue;
                    }
                    let agent = &lane.agents[a];
                    let absorbed = scenario.zones[a].absorb(&mut grid, agent.breathing.q_in * dt);
                    let intake = match lane.pip.mask.mode {
                        MaskMode::Symmetric => filter_intake(agent, absorbed, lane.pip.mask.kappa),
                        MaskMode::ExhaleOnly => absorbed,
                    };
                    lane.ledger.absorbed += absorbed;
                    lane.ledger.mask_trapped_in += absorbed - intake;
                    lane.intake[a] = intake;
                }
            }
            if lane.pip.ventilation.chi > 0.0 && (n + 1) % lane.vent_every == 0 {
                lane.ledger.vented += apply_ventilation(&mut grid, lane.pip.ventilation.chi);
            }
            std::mem::swap(&mut grid.conc, &mut lane.conc);

            for a in 0..n_agents {
                let agent = &mut lane.agents[a];
                let before = agent.state;
                update_epidemiology(agent, lane.intake[a], dt, t_next, incubation);
                if agent.state != before {
                    let kind = match agent.state {
                        EpiState::Exposed => {
                            lane.records[a].exposed_at = Some(t_next);
                            EventKind::Exposed
                        }
                        _ => {
                            lane.records[a].infected_at = Some(t_next);
                            EventKind::Infected
                        }
                    };
                    lane.events.push(AgentEvent {
                        agent: a,
                        kind,
                        t: t_next,
                    });
                }
            }
            if (n + 1) % sample_every == 0 || n + 1 == steps {
                lane.series.push(lane.counts(t_next));
            }
        }
        previous.iter_mut().zip(&phases).for_each(|(p, q)| *p = Some(*q));
        if lanes.iter().all(|lane| stop(t_next, &lane.events)) {
            for lane in lanes.iter_mut() {
                if lane.series.last().map(|c| c.t) != Some(t_next) {
                    lane.series.push(lane.counts(t_next));
                }
            }
            break;
        }
    }

    Ok(lanes
        .into_iter()
        .map(|mut lane| {
            lane.ledger.field = lane.conc.iter().sum();
            for (r, a) in lane.records.iter_mut().zip(&lane.agents) {
                r.final_load = a.load;
            }
            RealizationResult {
                index,
                index_agent,
                population: n_agents,
                pip: lane.pip,
                series: lane.series,
                agents: lane.records,
                events: lane.events,
                ledger: lane.ledger,
                first_index_exhale,
                config_hash: scenario.hash.clone(),
            }
        })
        .collect())
}
