//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the timed criteria run alone. Pass criterion
//! numbers as arguments to run a subset, e.g. `cargo test --test acceptance -- 3 9`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use airspread::flow::{step_flow, BreathingBc, FlowParams};
use airspread::geometry::{build_grid, preset_room, Archetype, RoomSpec, Seat};
use airspread::harness::output::{render_events_csv, render_final_exposed_csv, render_realization_csv};
use airspread::harness::{
    levene_test, welch_t_test, EnsembleSummary, EventKind, PipSetting, RealizationResult, Scenario, SimConfig,
};
use airspread::interventions::{apply_ventilation, MaskPolicy, VentilationPolicy};
use airspread::transport::{step_transport, PathogenParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(overrides: &[&str]) -> SimConfig {
    SimConfig::default().with_overrides(overrides).unwrap()
}

fn sei_ok(r: &RealizationResult) -> bool {
    let n = r.population;
    let Some(first) = r.series.first() else { return false };
    (first.s, first.e, first.i) == (n - 1, 0, 1)
        && r.series.iter().all(|c| c.s + c.e + c.i == n)
        && r.series.windows(2).all(|w| w[1].s <= w[0].s && w[1].i >= w[0].i)
}

fn projection() -> Outcome {
    let mut room = RoomSpec {
        name: "box".into(),
        archetype: Archetype::Custom,
        length: 3.2,
        width: 3.2,
        height: 3.2,
        obstacles: vec![],
        seats: vec![],
        outlets: vec![],
    };
    // Exhaling into a fully closed box has no solution, so the lid has a vent.
    room.outlets.push(room.ceiling_vent(0.4));
    let mut g = build_grid(&room, 0.1, &[]).unwrap();
    assert_eq!(g.dims, [32, 32, 32]);
    let q = 1.98e-4;
    let bc = BreathingBc {
        agent: 0,
        cell: g.idx(16, 16, 16),
        direction: [1.0, 0.0, 0.0],
        flow_rate: q,
    };
    let params = FlowParams::default();
    let start = Instant::now();
    let (mut worst, mut mouth_err) = (0.0_f64, 0.0_f64);
    let want = q / g.cell_volume();
    for _ in 0..100 {
        step_flow(&mut g, &params, &[bc], 0.02).unwrap();
        for c in 0..g.cell_count() {
            if c == bc.cell {
                mouth_err = mouth_err.max((g.divergence(c) - want).abs() / want);
            } else if g.is_fluid(c) {
                worst = worst.max(g.divergence(c).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && mouth_err <= 1e-6 && secs < 10.0,
        format!("max |div| {worst:.2e} off the mouth, mouth relative error {mouth_err:.2e}, 100 steps in {secs:.2} s"),
    )
}

fn pure_decay() -> Outcome {
    let room = RoomSpec {
        name: "cell".into(),
        archetype: Archetype::Custom,
        length: 0.4,
        width: 0.4,
        height: 0.4,
        obstacles: vec![],
        seats: vec![],
        outlets: vec![],
    };
    let mut g = build_grid(&room, 0.1, &[]).unwrap();
    let initial: Vec<f64> = (0..g.cell_count()).map(|c| 1e6 + 37.5 * c as f64).collect();
    g.conc.copy_from_slice(&initial);
    let params = PathogenParams {
        decay_rate: 5.5e-3,
        diffusivity: 0.0,
        ..PathogenParams::default()
    };
    let (dt, minutes) = (0.1, 90.0);
    for _ in 0..(minutes * 60.0 / dt) as usize {
        step_transport(&mut g, &params, dt).unwrap();
    }
    let factor = (-5.5e-3 * minutes).exp();
    let err = g
        .conc
        .iter()
        .zip(&initial)
        .map(|(c, c0)| ((c - c0 * factor) / (c0 * factor)).abs())
        .fold(0.0, f64::max);
    outcome(err <= 1e-9, format!("max relative error {err:.2e} after 90 min"))
}

fn pair_room(length: f64, width: f64, vent: f64) -> RoomSpec {
    let mut room = RoomSpec {
        name: "pair".into(),
        archetype: Archetype::Custom,
        length,
        width,
        height: 2.5,
        obstacles: vec![],
        seats: vec![],
        outlets: vec![],
    };
    room.outlets.push(room.ceiling_vent(vent));
    room
}

fn budget_run() -> RealizationResult {
    let mut room = pair_room(2.4, 1.2, 0.4);
    room.seats = vec![Seat::new(0.75, 0.6, 0.0, 0.0), Seat::new(1.65, 0.6, 0.0, PI)];
    let cfg = config(&["grid.cell_size=0.1", "time.horizon_minutes=5"]);
    Scenario::with_room(&cfg, room).unwrap().run(0).unwrap()
}

fn budget(r: &RealizationResult, secs: f64) -> Outcome {
    let l = r.ledger;
    let rel = l.relative_residual();
    outcome(
        rel <= 1e-6 && l.emitted > 0.0 && secs < 120.0,
        format!(
            "emitted {:.6e}, absorbed {:.6e}, decayed {:.6e}, vented {:.6e}, outflow {:.6e}, field {:.6e}, relative residual {rel:.2e}, {secs:.1} s",
            l.emitted, l.absorbed, l.decayed, l.vented, l.outflow, l.field
        ),
    )
}

fn conference(overrides: &[&str]) -> SimConfig {
    let mut all = vec![
        "room.preset=conference-1",
        "grid.cell_size=0.2",
        "time.dt=0.2",
        "time.horizon_minutes=15",
        "run.realizations=20",
    ];
    all.extend_from_slice(overrides);
    config(&all)
}

fn total_filtration() -> (Outcome, Vec<RealizationResult>) {
    let cfg = conference(&["pip.mask.eta=1", "pip.mask.kappa=1"]);
    let scenario = Scenario::new(&cfg).unwrap();
    let results: Vec<RealizationResult> = (0..20).map(|i| scenario.run(i).unwrap()).collect();
    let exposed: Vec<f64> = results.iter().map(RealizationResult::final_exposed_fraction).collect();
    let pass = exposed.iter().all(|x| *x == 0.0) && results.iter().all(|r| r.ledger.emitted == 0.0);
    let total: f64 = exposed.iter().sum();
    (
        outcome(pass, format!("20 realizations, summed final exposed fraction {total}")),
        results,
    )
}

/// Neumaier summation, so the sum ratio is not blurred by rounding.
fn compensated_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut carry) = (0.0_f64, 0.0);
    for &x in xs {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

fn ventilation() -> Outcome {
    let room = preset_room(Archetype::Conference, 1).unwrap();
    let mut g = build_grid(&room, 0.2, &room.seats).unwrap();
    for c in 0..g.cell_count() {
        if g.is_fluid(c) {
            g.conc[c] = (c % 97) as f64 * 1.3e4 + 1.0;
        }
    }
    let before = g.conc.clone();
    let total = g.total_mass();
    let removed = apply_ventilation(&mut g, 0.2);
    let cellwise = g.conc.iter().zip(&before).all(|(c, b)| *c == b * 0.8);
    let ratio = compensated_sum(&g.conc) / compensated_sum(&before);
    let accounted = ((total - removed) - g.total_mass()).abs() <= 1e-9 * total;
    let vel_before = g.vel.clone();
    apply_ventilation(&mut g, 1.0);
    let zeroed = g.total_mass() == 0.0 && g.conc.iter().all(|c| *c == 0.0) && g.vel == vel_before;
    outcome(
        cellwise && (ratio - 0.8).abs() <= 2.0 * f64::EPSILON && accounted && zeroed,
        format!("chi=0.2 scales every cell by 0.8 (sum ratio {ratio:.17}); chi=1 leaves sum {}", g.total_mass()),
    )
}

/// First exposure time of a seated pair, stopping at `deadline`.
fn first_exposure(face_to_face: bool, seed: u64, deadline: f64) -> Option<f64> {
    let mut room = pair_room(5.0, 3.0, 1.0);
    let (cx, cy) = (2.5, 1.5);
    room.seats = if face_to_face {
        vec![Seat::new(cx - 0.25, cy, 0.0, 0.0), Seat::new(cx + 0.25, cy, 0.0, PI)]
    } else {
        vec![Seat::new(cx - 1.5, cy, 0.0, PI), Seat::new(cx + 1.5, cy, 0.0, 0.0)]
    };
    let seed = format!("run.seed={seed}");
    let cfg = config(&["grid.cell_size=0.1", "time.dt=0.2", "time.horizon_minutes=15", &seed]);
    let exposed = |events: &[airspread::harness::AgentEvent]| {
        events.iter().find(|e| e.kind == EventKind::Exposed).map(|e| e.t)
    };
    let r = Scenario::with_room(&cfg, room)
        .unwrap()
        .run_until(0, |t, events| exposed(events).is_some() || t >= deadline)
        .unwrap();
    exposed(&r.events)
}

fn breathing_zone() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut rows = Vec::new();
    for seed in 1..=10 {
        let ff = first_exposure(true, seed, f64::INFINITY);
        // Back to back only needs to run until the face-to-face exposure.
        let bb = first_exposure(false, seed, ff.unwrap_or(f64::INFINITY));
        let ok = matches!((ff, bb), (Some(f), b) if b.is_none_or(|b| f < b));
        pass &= ok;
        let show = |t: Option<f64>| t.map_or("none".to_string(), |t| format!("{t:.1}s"));
        rows.push(format!("seed {seed} ff {} bb {}", show(ff), show(bb)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 900.0, format!("{}; {secs:.0} s", rows.join(", ")))
}

fn monotonicity() -> (Outcome, Vec<RealizationResult>) {
    let cfg = conference(&[]);
    let scenario = Scenario::new(&cfg).unwrap();
    let mask = |kappa| PipSetting {
        mask: MaskPolicy {
            eta: 1.0,
            kappa,
            ..MaskPolicy::default()
        },
        ventilation: VentilationPolicy::default(),
    };
    let vent = |chi| PipSetting {
        mask: MaskPolicy::default(),
        ventilation: VentilationPolicy {
            chi,
            period_minutes: 5.0,
        },
    };
    let lanes = [mask(0.0), mask(0.5), mask(1.0), vent(0.0), vent(0.5), vent(1.0)];
    let mut sums = [0.0; 6];
    let mut loads = [0.0; 6];
    let mut all = Vec::new();
    for i in 0..20 {
        let results = scenario.run_lanes(i, &lanes).unwrap();
        for ((s, l), r) in sums.iter_mut().zip(loads.iter_mut()).zip(&results) {
            *s += r.final_exposed_fraction();
            let others = r.agents.iter().filter(|a| a.id != r.index_agent);
            *l += others.map(|a| a.final_load).sum::<f64>() / (r.population - 1) as f64;
        }
        all.extend(results);
    }
    let means = sums.map(|s| s / 20.0);
    let loads = loads.map(|l| l / 20.0);
    let pass = means[0] >= means[1] && means[1] >= means[2] && means[3] >= means[4] && means[4] >= means[5];
    (
        outcome(
            pass,
            format!(
                "kappa 0/0.5/1: {:.4} {:.4} {:.4}; chi 0/0.5/1: {:.4} {:.4} {:.4}; \
                 mean load kappa {:.3e} {:.3e} {:.3e}, chi {:.3e} {:.3e} {:.3e}",
                means[0], means[1], means[2], means[3], means[4], means[5],
                loads[0], loads[1], loads[2], loads[3], loads[4], loads[5]
            ),
        ),
        all,
    )
}

/// Welch statistic and degrees of freedom from the textbook formulas.
fn welch_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1.0);
        (n, m, v / n)
    };
    let (na, ma, sa) = stats(a);
    let (nb, mb, sb) = stats(b);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    (t, df)
}

fn statistics() -> Outcome {
    #[allow(clippy::type_complexity)]
    let welch: [(&[f64], &[f64], f64, f64, f64); 3] = [
        (
            &[19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0],
            &[
                28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9, 21.6, 24.3,
                20.4, 23.9, 13.3,
            ],
            -2.225512039969852,
            0.035484530830010325,
            24.524634944257343,
        ),
        (
            &[0.12, 0.25, 0.08, 0.31, 0.19],
            &[0.22, 0.35, 0.41, 0.18, 0.29, 0.33],
            -1.9602044538614047,
            0.08441006224857528,
            8.279810731528181,
        ),
        (
            &[3.1, 2.9, 3.3, 3.0],
            &[2.0, 4.5, 1.2, 5.1, 3.3, 2.8, 4.0],
            -0.3702633478326529,
            0.7232902534038685,
            6.314479267388187,
        ),
    ];
    let levene: [(&[&[f64]], f64, f64); 3] = [
        (
            &[
                &[8.88, 9.12, 9.04, 8.98, 9.00, 9.08, 9.01, 8.85, 9.06, 8.99],
                &[8.88, 8.95, 9.29, 9.44, 9.15, 9.58, 8.36, 9.18, 8.67, 9.05],
                &[8.95, 9.12, 8.95, 8.85, 9.03, 8.84, 9.07, 8.98, 8.86, 8.98],
            ],
            7.905194483442054,
            0.001983795817472731,
        ),
        (&[&[0.1, 0.3, 0.2, 0.4], &[1.0, 3.0, 2.0, 5.0]], 6.322709163346614, 0.045624894422604416),
        (
            &[&[2.5, 3.1, 2.8, 3.6, 2.2], &[4.1, 3.9, 4.4, 4.0], &[1.5, 5.5, 3.0, 2.0, 6.0, 4.2]],
            10.386701648079406,
            0.0024096736169854933,
        ),
    ];
    let mut worst = 0.0_f64;
    for (a, b, t, p, df) in welch {
        let r = welch_t_test(a, b).unwrap();
        let (ot, odf) = welch_oracle(a, b);
        for (x, y) in [(r.statistic, t), (r.p_value, p), (r.df, df), (r.statistic, ot), (r.df, odf)] {
            worst = worst.max((x - y).abs());
        }
    }
    for (groups, w, p) in levene {
        let r = levene_test(groups).unwrap();
        worst = worst.max((r.statistic - w).abs()).max((r.p_value - p).abs());
    }
    let same: &[f64] = &[1.5, 2.5, 4.0, 3.25];
    let t0 = welch_t_test(same, same).unwrap().statistic;
    let w0 = levene_test(&[same, same]).unwrap().statistic;
    outcome(
        worst <= 1e-10 && t0 == 0.0 && w0 == 0.0,
        format!("max deviation {worst:.2e}; identical samples give t={t0}, W={w0}"),
    )
}

fn realization_bytes(r: &RealizationResult, cfg: &SimConfig) -> Vec<u8> {
    let mut bytes = render_realization_csv(r, cfg).into_bytes();
    bytes.extend(render_events_csv(r).into_bytes());
    bytes
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut lines: Vec<(u32, Outcome)> = Vec::new();
    let mut sei_runs: Vec<RealizationResult> = Vec::new();
    let mut budget_result = None;
    let mut filtration_results = Vec::new();

    if run(1) {
        lines.push((1, projection()));
    }
    if run(2) {
        lines.push((2, pure_decay()));
    }
    if run(3) || run(4) || run(10) {
        let start = Instant::now();
        let r = budget_run();
        let secs = start.elapsed().as_secs_f64();
        if run(3) {
            lines.push((3, budget(&r, secs)));
        }
        sei_runs.push(r.clone());
        budget_result = Some(r);
    }
    if run(5) || run(4) || run(10) {
        let (o, results) = total_filtration();
        if run(5) {
            lines.push((5, o));
        }
        sei_runs.extend(results.iter().cloned());
        filtration_results = results;
    }
    if run(6) {
        lines.push((6, ventilation()));
    }
    if run(7) {
        lines.push((7, breathing_zone()));
    }
    if run(8) || run(4) {
        let (o, results) = monotonicity();
        if run(8) {
            lines.push((8, o));
        }
        sei_runs.extend(results);
    }
    if run(4) {
        let bad = sei_runs.iter().filter(|r| !sei_ok(r)).count();
        lines.push((
            4,
            outcome(
                bad == 0 && !sei_runs.is_empty(),
                format!("{} realizations checked, {bad} violations", sei_runs.len()),
            ),
        ));
    }
    if run(9) {
        lines.push((9, statistics()));
    }
    if run(10) {
        let first = budget_result.as_ref().unwrap();
        let cfg = config(&["grid.cell_size=0.1", "time.horizon_minutes=5"]);
        let again = budget_run();
        let same_run = realization_bytes(first, &cfg) == realization_bytes(&again, &cfg);
        let ens = conference(&["pip.mask.eta=1", "pip.mask.kappa=1"]);
        let summary = EnsembleSummary::from_results(&filtration_results).unwrap();
        let scenario = Scenario::new(&ens).unwrap();
        let rerun: Vec<RealizationResult> = (0..20).map(|i| scenario.run(i).unwrap()).collect();
        let same_ensemble = render_final_exposed_csv(&summary)
            == render_final_exposed_csv(&EnsembleSummary::from_results(&rerun).unwrap())
            && filtration_results
                .iter()
                .zip(&rerun)
                .all(|(a, b)| realization_bytes(a, &ens) == realization_bytes(b, &ens));
        lines.push((
            10,
            outcome(
                same_run && same_ensemble,
                format!("budget run identical: {same_run}; filtration ensemble identical: {same_ensemble}"),
            ),
        ));
    }

    lines.sort_by_key(|(n, _)| *n);
    let mut failed = 0;
    for (n, o) in &lines {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("criterion {n}: {verdict} ({})", o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
