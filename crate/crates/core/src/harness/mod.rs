//! Simulation orchestration: configs, realizations, ensembles, PIP sweeps,
//! statistics and result files.

pub mod config;
pub mod ensemble;
pub mod output;
pub mod realization;
pub mod rng;
pub mod stats;

pub use config::{parse_preset_id, SimConfig};
pub use ensemble::{mean_std, run_ensemble, run_ensemble_with_results, sweep_pip, EnsembleSummary, Heatmap, PipKind};
pub use realization::{
    run_realization, AgentEvent, AgentRecord, EventKind, ParticleLedger, PipSetting, RealizationResult, Scenario,
    SeiCounts,
};
pub use stats::{levene_test, welch_t_test, TestResult};
