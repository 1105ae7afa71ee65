//! Monte Carlo ensembles and PIP sweeps.
//!
//! Realizations run on the rayon pool. Each one depends only on
//! `(config, index)`, and results are gathered in index order, so the
//! output is identical to a serial run for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interventions::{MaskPolicy, VentilationPolicy};

use super::config::SimConfig;
use super::realization::{PipSetting, RealizationResult, Scenario};

/// Per-sample mean and standard deviation of the S, E and I fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub population: usize,
    pub times: Vec<f64>,
    /// `[S, E, I]` mean fractions, one entry per sample time.
    pub mean: [Vec<f64>; 3],
    /// `[S, E, I]` sample standard deviations (zero for one realization).
    pub std: [Vec<f64>; 3],
    /// Final exposed fraction of each realization, in index order.
    pub final_exposed: Vec<f64>,
}

/// Mean and sample standard deviation (`n − 1`); zero spread for `n = 1`.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EnsembleSummary {
    pub fn from_results(results: &[RealizationResult]) -> Result<Self> {
        let first = results
            .first()
            .ok_or_else(|| Error::InvalidArgument("an ensemble needs at least one realization".into()))?;
        let population = first.population;
        let times: Vec<f64> = first.series.iter().map(|c| c.t).collect();
        for r in results {
            if r.series.len() != times.len() || r.population != population {
                return Err(Error::Internal("realizations disagree on sampling".into()));
            }
        }
        let n = population as f64;
        let mut mean: [Vec<f64>; 3] = Default::default();
        let mut std: [Vec<f64>; 3] = Default::default();
        let mut column = Vec::with_capacity(results.len());
        for k in 0..times.len() {
            for (which, (m, s)) in mean.iter_mut().zip(std.iter_mut()).enumerate() {
                column.clear();
                column.extend(results.iter().map(|r| {
                    let c = r.series[k];
                    [c.s, c.e, c.i][which] as f64 / n
                }));
                let (mu, sd) = mean_std(&column);
                m.push(mu);
                s.push(sd);
            }
        }
        Ok(Self {
            population,
            times,
            mean,
            std,
            final_exposed: results.iter().map(RealizationResult::final_exposed_fraction).collect(),
        })
    }

    pub fn mean_final_exposed(&self) -> f64 {
        mean_std(&self.final_exposed).0
    }
}

/// Runs `config.run.realizations` realizations of one scenario.
pub fn run_ensemble(config: &SimConfig) -> Result<EnsembleSummary> {
    Ok(run_ensemble_with_results(config)?.0)
}

pub fn run_ensemble_with_results(config: &SimConfig) -> Result<(EnsembleSummary, Vec<RealizationResult>)> {
    let scenario = Scenario::new(config)?;
    let results = run_indexed(config.run.realizations, |i| scenario.run(i))?;
    Ok((EnsembleSummary::from_results(&results)?, results))
}

/// Evaluates `f` on `0..n` in parallel; the lowest failing index wins.
fn run_indexed<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let outcomes: Vec<Result<T>> = (0..n).into_par_iter().map(&f).collect();
    outcomes
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.in_realization(i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PipKind {
    /// Axis 1 is coverage η, axis 2 filtration κ.
    Mask,
    /// Axis 1 is removal fraction χ, axis 2 period ζ in minutes.
    Ventilation,
}

impl PipKind {
    pub fn axis_names(self) -> (&'static str, &'static str) {
        match self {
            PipKind::Mask => ("eta", "kappa"),
            PipKind::Ventilation => ("chi", "period_minutes"),
        }
    }
}

/// Mean and spread of the final exposed fraction over a PIP grid.
/// `mean[i][j]` belongs to `(axis1[i], axis2[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub kind: PipKind,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub realizations: usize,
}

/// Runs every grid cell on the same realizations (common random numbers);
/// the cells share agents, index cases, mask draws and airflow.
pub fn sweep_pip(config: &SimConfig, axis1: &[f64], axis2: &[f64], kind: PipKind) -> Result<Heatmap> {
    if axis1.is_empty() || axis2.is_empty() {
        return Err(Error::InvalidArgument("sweep axes must be non-empty".into()));
    }
    let mut pips = Vec::with_capacity(axis1.len() * axis2.len());
    for &a in axis1 {
        for &b in axis2 {
            let pip = match kind {
                PipKind::Mask => PipSetting {
                    mask: MaskPolicy {
                        eta: a,
                        kappa: b,
                        ..config.pip.mask
                    },
                    ventilation: config.pip.ventilation,
                },
                PipKind::Ventilation => PipSetting {
                    mask: config.pip.mask,
                    ventilation: VentilationPolicy {
                        chi: a,
                        period_minutes: b,
                    },
                },
            };
            pip.mask.validate().map_err(Error::InvalidArgument)?;
            pip.ventilation.validate().map_err(Error::InvalidArgument)?;
            pips.push(pip);
        }
    }
    let scenario = Scenario::new(config)?;
    let n = config.run.realizations;
    let per_realization = run_indexed(n, |i| {
        Ok(scenario
            .run_lanes(i, &pips)?
            .iter()
            .map(RealizationResult::final_exposed_fraction)
            .collect::<Vec<f64>>())
    })?;
    let mut mean = vec![vec![0.0; axis2.len()]; axis1.len()];
    let mut std = mean.clone();
    let mut column = Vec::with_capacity(n);
    for i in 0..axis1.len() {
        for j in 0..axis2.len() {
            column.clear();
            column.extend(per_realization.iter().map(|r| r[i * axis2.len() + j]));
            (mean[i][j], std[i][j]) = mean_std(&column);
        }
    }
    Ok(Heatmap {
        kind,
        axis1: axis1.to_vec(),
        axis2: axis2.to_vec(),
        mean,
        std,
        realizations: n,
    })
}
