//! Result files.
//!
//! All files are plain text, start with `#` comment lines naming the format
//! and version, and contain no timestamps, so identical runs write
//! identical bytes. Numbers use Rust's shortest round-trip formatting.
//!
//! | file                   | columns                                               |
//! |------------------------|-------------------------------------------------------|
//! | realization CSV        | `t_seconds,S,E,I`                                     |
//! | event log CSV          | `agent_id,event,t_seconds`                            |
//! | ensemble CSV           | `t_seconds,mean_S,std_S,mean_E,std_E,mean_I,std_I`    |
//! | final exposure CSV     | `realization,final_exposed_fraction`                  |
//! | heatmap CSV            | `<axis1>,<axis2>,mean_exposed_fraction,std`           |
//! | manifest (TOML)        | `[manifest]` metadata plus the full `[config]`        |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use toml::Value;

use crate::error::{Error, Result};

use super::config::SimConfig;
use super::ensemble::{EnsembleSummary, Heatmap};
use super::realization::{PipSetting, RealizationResult};

pub const FORMAT_VERSION: u32 = 1;

fn pip_header(out: &mut String, pip: &PipSetting) {
    let m = pip.mask;
    let v = pip.ventilation;
    let mode = match m.mode {
        crate::interventions::MaskMode::Symmetric => "symmetric",
        crate::interventions::MaskMode::ExhaleOnly => "exhale-only",
    };
    let _ = writeln!(out, "# pip.mask.eta = {}", m.eta);
    let _ = writeln!(out, "# pip.mask.kappa = {}", m.kappa);
    let _ = writeln!(out, "# pip.mask.mode = {mode}");
    let _ = writeln!(out, "# pip.ventilation.chi = {}", v.chi);
    let _ = writeln!(out, "# pip.ventilation.period_minutes = {}", v.period_minutes);
}

fn common_header(out: &mut String, kind: &str, config: &SimConfig) {
    let _ = writeln!(out, "# airspread {kind} v{FORMAT_VERSION}");
    let _ = writeln!(out, "# config_hash = {}", config.hash());
    let _ = writeln!(out, "# pathogen.diffusivity = {}", config.pathogen.diffusivity);
}

pub fn render_realization_csv(result: &RealizationResult, config: &SimConfig) -> String {
    let mut out = String::new();
    common_header(&mut out, "realization", config);
    pip_header(&mut out, &result.pip);
    let _ = writeln!(out, "# realization = {}", result.index);
    let _ = writeln!(out, "# index_agent = {}", result.index_agent);
    let l = result.ledger;
    let _ = writeln!(
        out,
        "# ledger: emitted = {}, absorbed = {}, decayed = {}, vented = {}, outflow = {}, field = {}, mask_trapped_out = {}, mask_trapped_in = {}",
        l.emitted, l.absorbed, l.decayed, l.vented, l.outflow, l.field, l.mask_trapped_out, l.mask_trapped_in
    );
    out.push_str("t_seconds,S,E,I\n");
    for c in &result.series {
        let _ = writeln!(out, "{},{},{},{}", c.t, c.s, c.e, c.i);
    }
    out
}

pub fn render_events_csv(result: &RealizationResult) -> String {
    let mut out = format!("# airspread events v{FORMAT_VERSION}\nagent_id,event,t_seconds\n");
    for e in &result.events {
        let _ = writeln!(out, "{},{},{}", e.agent, e.kind.as_str(), e.t);
    }
    out
}

pub fn render_ensemble_csv(summary: &EnsembleSummary, config: &SimConfig) -> String {
    let mut out = String::new();
    common_header(&mut out, "ensemble", config);
    pip_header(
        &mut out,
        &PipSetting {
            mask: config.pip.mask,
            ventilation: config.pip.ventilation,
        },
    );
    let _ = writeln!(out, "# realizations = {}", summary.final_exposed.len());
    let _ = writeln!(out, "# population = {}", summary.population);
    out.push_str("t_seconds,mean_S,std_S,mean_E,std_E,mean_I,std_I\n");
    for (k, t) in summary.times.iter().enumerate() {
        let _ = write!(out, "{t}");
        for c in 0..3 {
            let _ = write!(out, ",{},{}", summary.mean[c][k], summary.std[c][k]);
        }
        out.push('\n');
    }
    out
}

pub fn render_final_exposed_csv(summary: &EnsembleSummary) -> String {
    let mut out = format!("# airspread final-exposure v{FORMAT_VERSION}\nrealization,final_exposed_fraction\n");
    for (i, f) in summary.final_exposed.iter().enumerate() {
        let _ = writeln!(out, "{i},{f}");
    }
    out
}

pub fn render_heatmap_csv(map: &Heatmap, config: &SimConfig) -> String {
    let mut out = String::new();
    common_header(&mut out, "heatmap", config);
    let (a1, a2) = map.kind.axis_names();
    let _ = writeln!(out, "# realizations = {}", map.realizations);
    let _ = writeln!(out, "{a1},{a2},mean_exposed_fraction,std");
    for (i, x) in map.axis1.iter().enumerate() {
        for (j, y) in map.axis2.iter().enumerate() {
            let _ = writeln!(out, "{x},{y},{},{}", map.mean[i][j], map.std[i][j]);
        }
    }
    out
}

/// Everything needed to rerun: the command line, code version, seeds and
/// the fully resolved config.
pub fn render_manifest(config: &SimConfig, command: &str) -> String {
    let mut manifest = toml::Table::new();
    manifest.insert("format_version".into(), Value::Integer(FORMAT_VERSION as i64));
    manifest.insert("code_version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    manifest.insert("command".into(), Value::String(command.into()));
    manifest.insert("config_hash".into(), Value::String(config.hash()));
    manifest.insert("seed".into(), Value::Integer(config.run.seed as i64));
    manifest.insert("realizations".into(), Value::Integer(config.run.realizations as i64));
    let mut top = toml::Table::new();
    top.insert("manifest".into(), Value::Table(manifest));
    top.insert(
        "config".into(),
        Value::try_from(config).expect("config converts to a TOML value"),
    );
    toml::to_string(&top).expect("manifest serializes")
}

/// Reads the `config` table of a manifest back into a config.
pub fn config_from_manifest(text: &str, origin: &Path) -> Result<SimConfig> {
    let mut top: toml::Table = toml::from_str(text).map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let config = top.remove("config").ok_or_else(|| Error::Format {
        path: origin.to_path_buf(),
        message: "missing [config] table".into(),
    })?;
    SimConfig::parse(&toml::to_string(&config).expect("table serializes"), origin)
}

/// Reads the value column of a final-exposure or two-column CSV, skipping
/// `#` comments and the header line.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if !header_seen => {}
            Err(_) => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("line {}: `{field}` is not a number", n + 1),
                })
            }
        }
        header_seen = true;
    }
    Ok(values)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Writes `realization_NNNN.csv` and `events_NNNN.csv` under `dir`.
pub fn write_realization(dir: &Path, result: &RealizationResult, config: &SimConfig) -> Result<()> {
    write_file(
        &dir.join(format!("realization_{:04}.csv", result.index)),
        &render_realization_csv(result, config),
    )?;
    write_file(
        &dir.join(format!("events_{:04}.csv", result.index)),
        &render_events_csv(result),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::realization::{AgentEvent, EventKind, ParticleLedger, SeiCounts};

    fn result() -> RealizationResult {
        let config = SimConfig::default();
        RealizationResult {
            index: 2,
            index_agent: 1,
            population: 2,
            pip: PipSetting {
                mask: config.pip.mask,
                ventilation: config.pip.ventilation,
            },
            series: vec![
                SeiCounts { t: 0.0, s: 1, e: 0, i: 1 },
                SeiCounts { t: 1.0, s: 0, e: 1, i: 1 },
            ],
            agents: vec![],
            events: vec![AgentEvent {
                agent: 0,
                kind: EventKind::Exposed,
                t: 0.5,
            }],
            ledger: ParticleLedger::default(),
            first_index_exhale: Some(0.1),
            config_hash: config.hash(),
        }
    }

    #[test]
    fn realization_csv_shape() {
        let text = render_realization_csv(&result(), &SimConfig::default());
        assert!(text.starts_with("# airspread realization v1\n"));
        assert!(text.contains("# pathogen.diffusivity = 0.0001\n"));
        assert!(text.contains("# pip.mask.eta = 0\n"));
        assert!(text.ends_with("t_seconds,S,E,I\n0,1,0,1\n1,0,1,1\n"));
        assert_eq!(render_events_csv(&result()), "# airspread events v1\nagent_id,event,t_seconds\n0,exposed,0.5\n");
    }

    #[test]
    fn manifest_reproduces_the_config() {
        let config = SimConfig::default().with_overrides(&["run.seed=42", "pip.mask.eta=0.25"]).unwrap();
        let text = render_manifest(&config, "run");
        assert_eq!(config_from_manifest(&text, Path::new("m.toml")).unwrap(), config);
    }

    #[test]
    fn samples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let summary = EnsembleSummary {
            population: 4,
            times: vec![0.0],
            mean: Default::default(),
            std: Default::default(),
            final_exposed: vec![0.25, 0.5, 0.0],
        };
        let path = dir.path().join("f.csv");
        write_file(&path, &render_final_exposed_csv(&summary)).unwrap();
        assert_eq!(read_samples(&path).unwrap(), vec![0.25, 0.5, 0.0]);
    }
}
