//! Room-scale simulation of airborne pathogen spread.
//!
//! An incompressible flow solver on a uniform staggered grid carries a
//! pathogen concentration field, and an agent-based SEI population
//! breathes that field in and out. Masks and periodic ventilation act on
//! emission, intake and the field.
//!
//! ```no_run
//! use airspread::harness::{run_realization, SimConfig};
//!
//! let config = SimConfig::default()
//!     .with_overrides(&["time.horizon_minutes=5", "pip.mask.eta=0.5"])
//!     .unwrap();
//! let result = run_realization(&config, 0).unwrap();
//! println!("{}", result.final_exposed_fraction());
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod cli;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod interventions;
pub mod transport;

pub use error::{Error, Result};
