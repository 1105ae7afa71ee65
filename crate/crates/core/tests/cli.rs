use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use airspread::geometry::{render_room, Archetype, RoomSpec, Seat};
use airspread::harness::output::read_samples;
use airspread::harness::welch_t_test;

fn airspread(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airspread"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AIRSPREAD_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn summary(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).lines().last().unwrap()).unwrap()
}

/// A two-person room and a config that runs it for `seconds`.
fn toy(dir: &Path, seconds: f64) {
    let mut room = RoomSpec {
        name: "pair".into(),
        archetype: Archetype::Custom,
        length: 2.4,
        width: 1.2,
        height: 2.2,
        obstacles: vec![],
        seats: vec![
            Seat::new(0.75, 0.6, 0.0, 0.0),
            Seat::new(1.65, 0.6, 0.0, std::f64::consts::PI),
        ],
        outlets: vec![],
    };
    room.outlets.push(room.ceiling_vent(0.4));
    fs::write(dir.join("pair.toml"), render_room(&room)).unwrap();
    fs::write(
        dir.join("sim.toml"),
        format!(
            "[room]\nfile = \"pair.toml\"\n[grid]\ncell_size = 0.2\n[time]\ndt = 0.1\nhorizon_minutes = {}\n",
            seconds / 60.0
        ),
    )
    .unwrap();
}

#[test]
fn no_arguments_print_usage_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = airspread(&[], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());
}

#[test]
fn presets_lists_twenty_rooms() {
    let dir = tempfile::tempdir().unwrap();
    let o = airspread(&["presets"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('{')).collect();
    assert_eq!(rows.len(), 20);
    assert!(rows[0].starts_with("classroom-1\t"));
    assert!(rows.iter().any(|r| r.starts_with("conference-1\t") && r.contains("N=9")));
    assert_eq!(summary(&o)["count"], 20);
}

#[test]
fn config_errors_have_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path(), 60.0);
    let ok = airspread(&["validate-config", "--config", "sim.toml"], dir.path());
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("cell_size = 0.2"));
    assert_eq!(summary(&ok)["population"], 2);

    let unknown = airspread(&["validate-config", "--set", "grid.cells=3"], dir.path());
    assert_eq!(unknown.status.code(), Some(3));
    let mismatch = airspread(&["validate-config", "--set", "grid.cell_size=fine"], dir.path());
    assert_eq!(mismatch.status.code(), Some(4));
    let missing = airspread(&["validate-config", "--config", "nope.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(5));
    let invalid = airspread(&["validate-config", "--set", "pip.mask.eta=2"], dir.path());
    assert_eq!(invalid.status.code(), Some(1));
}

#[test]
fn run_writes_a_consistent_series_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path(), 60.0);
    let o = airspread(&["run", "--config", "sim.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/realization_0000.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 61);
    assert!(rows.iter().all(|r| r[1] + r[2] + r[3] == 2.0));
    assert!(csv.contains("# pathogen.diffusivity = 0.0001"));
    let manifest = fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap();
    assert!(manifest.contains(&format!("config_hash = \"{}\"", summary(&o)["config_hash"].as_str().unwrap())));
    assert!(dir.path().join("out/events_0000.csv").exists());
}

#[test]
fn ensembles_repeat_bitwise_and_feed_analyze() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path(), 20.0);
    for out in ["a", "b"] {
        let o = airspread(
            &["ensemble", "--config", "sim.toml", "--set", "run.realizations=4", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4 * 2 + 3);
    for name in &names {
        assert_eq!(fs::read(dir.path().join("a").join(name)).unwrap(), fs::read(dir.path().join("b").join(name)).unwrap());
    }

    // Jittered samples so the test statistic is defined.
    let a = "realization,final_exposed_fraction\n0,0.1\n1,0.3\n2,0.2\n";
    let b = "realization,final_exposed_fraction\n0,0.4\n1,0.5\n2,0.7\n3,0.6\n";
    fs::write(dir.path().join("a.csv"), a).unwrap();
    fs::write(dir.path().join("b.csv"), b).unwrap();
    let o = airspread(&["analyze", "a.csv", "b.csv"], dir.path());
    assert!(o.status.success());
    let got = summary(&o);
    let want = welch_t_test(
        &read_samples(&dir.path().join("a.csv")).unwrap(),
        &read_samples(&dir.path().join("b.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(got["welch"]["statistic"].as_f64().unwrap(), want.statistic);
    assert_eq!(got["welch"]["p_value"].as_f64().unwrap(), want.p_value);
}
