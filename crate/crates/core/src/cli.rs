//! Command-line front end.
//!
//! Standard output carries machine-readable results only: listings, echoed
//! configs and one JSON summary line per command. Progress and diagnostics
//! go to standard error.
//!
//! Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | simulation, validation or I/O failure     |
//! | 2    | usage error (bad flags or arguments)      |
//! | 3    | `--set` or config file names an unknown key |
//! | 4    | a config value has the wrong type         |
//! | 5    | the config file does not exist            |

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::geometry::{preset_room, PRESET_TABLE};
use crate::harness::output::{
    read_samples, render_ensemble_csv, render_final_exposed_csv, render_heatmap_csv, render_manifest, write_file,
    write_realization,
};
use crate::harness::{
    levene_test, run_ensemble_with_results, sweep_pip, welch_t_test, PipKind, Scenario, SimConfig, TestResult,
};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "AIRSPREAD_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "airspread-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNKNOWN_KEY: i32 = 3;
pub const EXIT_TYPE_MISMATCH: i32 = 4;
pub const EXIT_MISSING_CONFIG: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PipArg {
    Mask,
    Ventilation,
}

impl From<PipArg> for PipKind {
    fn from(p: PipArg) -> Self {
        match p {
            PipArg::Mask => PipKind::Mask,
            PipArg::Ventilation => PipKind::Ventilation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Action {
    /// Run one realization.
    Run {
        /// Realization index; selects the random substreams.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Run `run.realizations` realizations and summarize them.
    Ensemble,
    /// Sweep a PIP over a two-axis grid with common random numbers.
    Sweep {
        #[arg(long, value_enum)]
        pip: PipArg,
        /// Comma-separated values: eta for masks, chi for ventilation.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        axis1: Vec<f64>,
        /// Comma-separated values: kappa for masks, period in minutes for ventilation.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        axis2: Vec<f64>,
    },
    /// List the preset rooms.
    Presets,
    /// Welch t-test on the first two sample files, Levene across all.
    Analyze {
        /// Final-exposure CSVs or ensemble output directories.
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
    },
    /// Check a config and print it fully resolved.
    ValidateConfig,
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "airspread", version, about = "Airborne pathogen spread in a room")]
pub struct Command {
    #[command(subcommand)]
    pub action: Action,
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set pip.mask.eta=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,
    /// Output directory (default: run.output_dir, then $AIRSPREAD_OUTPUT_DIR,
    /// then ./airspread-out).
    #[arg(long = "out", global = true)]
    pub output_dir: Option<PathBuf>,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("`{s}` is not KEY=VALUE"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("`{s}` has an empty key"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// A rejected command line: the message and the exit code to use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownKey(_) => EXIT_UNKNOWN_KEY,
        Error::TypeMismatch { .. } => EXIT_TYPE_MISMATCH,
        Error::MissingConfig(_) => EXIT_MISSING_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn cli_error(e: Error) -> CliError {
    CliError {
        code: exit_code(&e),
        message: e.to_string(),
    }
}

/// Parses `argv` (including the program name) and checks that the config
/// exists and every override names a known key with a value of the right
/// type. Value ranges are checked later, by [`execute`].
pub fn parse_args<I, S>(argv: I) -> Result<Command, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cmd = Command::try_parse_from(argv).map_err(|e| {
        let code = match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.render().to_string(),
        }
    })?;
    if let Some(path) = &cmd.config {
        if !path.exists() {
            return Err(cli_error(Error::MissingConfig(path.clone())));
        }
    }
    match SimConfig::default().with_overrides(&cmd.override_strings()) {
        Err(e @ (Error::UnknownKey(_) | Error::TypeMismatch { .. } | Error::InvalidArgument(_))) => {
            Err(cli_error(e))
        }
        _ => Ok(cmd),
    }
}

impl Command {
    fn override_strings(&self) -> Vec<String> {
        self.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect()
    }

    /// Argument vector that parses back to this command.
    pub fn render(&self) -> Vec<String> {
        let mut args = vec!["airspread".to_string()];
        match &self.action {
            Action::Run { index } => args.extend(["run".into(), "--index".into(), index.to_string()]),
            Action::Ensemble => args.push("ensemble".into()),
            Action::Sweep { pip, axis1, axis2 } => {
                let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
                let pip = match pip {
                    PipArg::Mask => "mask",
                    PipArg::Ventilation => "ventilation",
                };
                args.extend([
                    "sweep".into(),
                    "--pip".into(),
                    pip.into(),
                    "--axis1".into(),
                    join(axis1),
                    "--axis2".into(),
                    join(axis2),
                ]);
            }
            Action::Presets => args.push("presets".into()),
            Action::Analyze { files } => {
                args.push("analyze".into());
                args.extend(files.iter().map(|f| f.display().to_string()));
            }
            Action::ValidateConfig => args.push("validate-config".into()),
        }
        if let Some(c) = &self.config {
            args.extend(["--config".into(), c.display().to_string()]);
        }
        for o in self.override_strings() {
            args.extend(["--set".into(), o]);
        }
        if let Some(o) = &self.output_dir {
            args.extend(["--out".into(), o.display().to_string()]);
        }
        args
    }

    /// The config file (or defaults) with the overrides applied.
    pub fn resolve_config(&self) -> Result<SimConfig, Error> {
        let base = match &self.config {
            Some(path) => SimConfig::load(path)?,
            None => SimConfig::default(),
        };
        base.with_overrides(&self.override_strings())
    }

    fn output_dir(&self, config: &SimConfig) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| config.run.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cmd: &Command) -> i32 {
    match dispatch(cmd) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses and executes `argv`; the entry point of the binary.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(cmd) => execute(&cmd),
        Err(e) => {
            if e.code == EXIT_OK {
                print!("{}", e.message);
            } else {
                eprint!("{}", e.message);
                if !e.message.ends_with('\n') {
                    eprintln!();
                }
            }
            e.code
        }
    }
}

fn test_json(r: &TestResult) -> serde_json::Value {
    json!({ "statistic": r.statistic, "p_value": r.p_value, "df": r.df })
}

fn dispatch(cmd: &Command) -> Result<serde_json::Value, Error> {
    match &cmd.action {
        Action::Presets => {
            for (archetype, index, n, l, w, h) in PRESET_TABLE {
                let room = preset_room(archetype, index)?;
                println!(
                    "{}-{index}\t{}\tL={l:.2}\tW={w:.2}\tH={h:.2}\tN={n}\tdensity={:.3}",
                    archetype.slug(),
                    room.name,
                    room.density()
                );
            }
            Ok(json!({ "command": "presets", "count": PRESET_TABLE.len() }))
        }
        Action::Analyze { files } => {
            let samples = files
                .iter()
                .map(|f| {
                    let path = if f.is_dir() { f.join("final_exposed.csv") } else { f.clone() };
                    read_samples(&path)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let welch = welch_t_test(&samples[0], &samples[1])?;
            let groups: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
            let levene = levene_test(&groups)?;
            Ok(json!({
                "command": "analyze",
                "welch": test_json(&welch),
                "levene": test_json(&levene),
            }))
        }
        Action::ValidateConfig => {
            let config = cmd.resolve_config()?;
            let room = config.resolve_room()?;
            print!("{}", config.to_toml());
            Ok(json!({
                "command": "validate-config",
                "valid": true,
                "config_hash": config.hash(),
                "room": room.name,
                "population": room.seats.len(),
            }))
        }
        Action::Run { index } => {
            let config = cmd.resolve_config()?;
            let out = cmd.output_dir(&config);
            eprintln!("building scenario ({} steps)", config.time.steps());
            let scenario = Scenario::new(&config)?;
            let result = scenario.run(*index)?;
            write_realization(&out, &result, &config)?;
            write_manifest(&out, &config, cmd)?;
            eprintln!("wrote {}", out.display());
            Ok(json!({
                "command": "run",
                "realization": result.index,
                "population": result.population,
                "index_agent": result.index_agent,
                "final_exposed_fraction": result.final_exposed_fraction(),
                "ledger_relative_residual": result.ledger.relative_residual(),
                "config_hash": result.config_hash,
                "output_dir": out.display().to_string(),
            }))
        }
        Action::Ensemble => {
            let config = cmd.resolve_config()?;
            let out = cmd.output_dir(&config);
            eprintln!(
                "running {} realizations of {} steps",
                config.run.realizations,
                config.time.steps()
            );
            let (summary, results) = run_ensemble_with_results(&config)?;
            for r in &results {
                write_realization(&out, r, &config)?;
            }
            write_file(&out.join("ensemble.csv"), &render_ensemble_csv(&summary, &config))?;
            write_file(&out.join("final_exposed.csv"), &render_final_exposed_csv(&summary))?;
            write_manifest(&out, &config, cmd)?;
            eprintln!("wrote {}", out.display());
            Ok(json!({
                "command": "ensemble",
                "realizations": results.len(),
                "population": summary.population,
                "mean_final_exposed_fraction": summary.mean_final_exposed(),
                "config_hash": config.hash(),
                "output_dir": out.display().to_string(),
            }))
        }
        Action::Sweep { pip, axis1, axis2 } => {
            let config = cmd.resolve_config()?;
            let out = cmd.output_dir(&config);
            eprintln!(
                "sweeping {}x{} cells over {} realizations",
                axis1.len(),
                axis2.len(),
                config.run.realizations
            );
            let map = sweep_pip(&config, axis1, axis2, (*pip).into())?;
            write_file(&out.join("heatmap.csv"), &render_heatmap_csv(&map, &config))?;
            write_manifest(&out, &config, cmd)?;
            eprintln!("wrote {}", out.display());
            Ok(json!({
                "command": "sweep",
                "cells": axis1.len() * axis2.len(),
                "realizations": map.realizations,
                "mean_exposed_fraction": map.mean,
                "config_hash": config.hash(),
                "output_dir": out.display().to_string(),
            }))
        }
    }
}

fn write_manifest(out: &Path, config: &SimConfig, cmd: &Command) -> Result<(), Error> {
    // The manifest embeds the resolved config, so the command line is kept
    // without paths that would differ between machines.
    let action = cmd.render().get(1).cloned().unwrap_or_default();
    write_file(&out.join("manifest.toml"), &render_manifest(config, &action))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Command, CliError> {
        parse_args(std::iter::once("airspread").chain(args.iter().copied()))
    }

    #[test]
    fn run_with_override() {
        let cmd = parse(&["run", "--config", "Cargo.toml", "--set", "pip.mask.eta=0.5"]).unwrap();
        assert_eq!(cmd.action, Action::Run { index: 0 });
        assert_eq!(cmd.overrides, vec![("pip.mask.eta".to_string(), "0.5".to_string())]);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(parse(&[]).unwrap_err().code, EXIT_USAGE);
        assert_eq!(parse(&["fly"]).unwrap_err().code, EXIT_USAGE);
        assert_eq!(parse(&["run", "--bogus"]).unwrap_err().code, EXIT_USAGE);
        assert_eq!(parse(&["run", "--set", "novalue"]).unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn config_errors_have_distinct_codes() {
        assert_eq!(parse(&["run", "--set", "pip.mask.colour=1"]).unwrap_err().code, EXIT_UNKNOWN_KEY);
        assert_eq!(parse(&["run", "--set", "run.seed=abc"]).unwrap_err().code, EXIT_TYPE_MISMATCH);
        assert_eq!(
            parse(&["run", "--config", "/no/such/config.toml"]).unwrap_err().code,
            EXIT_MISSING_CONFIG
        );
    }

    #[test]
    fn render_round_trips() {
        for args in [
            vec!["run", "--index", "3", "--set", "pip.mask.eta=0.5", "--set", "run.seed=9"],
            vec!["sweep", "--pip", "ventilation", "--axis1", "0,0.5,1", "--axis2", "5"],
            vec!["analyze", "a.csv", "b.csv", "--out", "x"],
            vec!["presets"],
            vec!["ensemble", "--config", "Cargo.toml"],
            vec!["validate-config"],
        ] {
            let cmd = parse(&args).unwrap();
            assert_eq!(parse_args(cmd.render()).unwrap(), cmd);
        }
    }
}
