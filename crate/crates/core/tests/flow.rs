use airspread::flow::{cfl_number, step_flow, BreathingBc, FlowParams};
use airspread::geometry::{build_grid, Archetype, FaceKind, Grid, RoomSpec, Seat};
use proptest::prelude::*;

fn cube(side: f64, vent: bool) -> RoomSpec {
    let mut room = RoomSpec {
        name: "cube".into(),
        archetype: Archetype::Custom,
        length: side,
        width: side,
        height: side,
        obstacles: vec![],
        seats: vec![],
        outlets: vec![],
    };
    if vent {
        room.outlets.push(room.ceiling_vent(0.25 * side));
    }
    room
}

/// Cell-centered velocity, averaged from the two faces of each cell.
fn centered(g: &Grid) -> Vec<[f64; 3]> {
    (0..g.cell_count())
        .map(|c| {
            let ijk = g.ijk(c);
            [0, 1, 2].map(|a| {
                let (lo, hi) = g.cell_faces(a, ijk);
                0.5 * (g.vel[a][lo] + g.vel[a][hi])
            })
        })
        .collect()
}

/// Unit cube with a ceiling sliding at 0.1 m/s, Reynolds number about 33.
fn cavity(delta: f64) -> Vec<[f64; 3]> {
    let mut g = build_grid(&cube(1.0, false), delta, &[]).unwrap();
    let params = FlowParams {
        viscosity: 3e-3,
        gravity: [0.0; 3],
        lid_velocity: Some([0.1, 0.0]),
        ..FlowParams::default()
    };
    let dt = (0.15 * delta * delta / params.viscosity).min(0.05);
    for _ in 0..(200.0 / dt) as usize {
        step_flow(&mut g, &params, &[], dt).unwrap();
    }
    centered(&g)
}

#[test]
fn lid_driven_cavity_converges_under_refinement() {
    let n = 16;
    let coarse = cavity(1.0 / n as f64);
    let fine = cavity(0.5 / n as f64);
    let (mut err, mut norm) = (0.0, 0.0);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let mut avg = [0.0; 3];
                for (di, dj, dk) in (0..8).map(|b| (b & 1, (b >> 1) & 1, b >> 2)) {
                    let f = (2 * i + di) + 2 * n * ((2 * j + dj) + 2 * n * (2 * k + dk));
                    (0..3).for_each(|a| avg[a] += fine[f][a] / 8.0);
                }
                let c = coarse[i + n * (j + n * k)];
                for a in 0..3 {
                    err += (c[a] - avg[a]).powi(2);
                    norm += avg[a].powi(2);
                }
            }
        }
    }
    let rel = (err / norm).sqrt();
    assert!(norm > 0.0);
    assert!(rel <= 0.10, "relative L2 difference {rel}");
}

#[test]
fn sealed_exhale_flux_leaves_through_the_vent() {
    // The mouth's net outflow over one step is Q·Δt, and the vent carries it out.
    let mut g = build_grid(&cube(1.6, true), 0.1, &[]).unwrap();
    let cell = g.idx(8, 8, 4);
    let q = 1.98e-4;
    let dt = 0.02;
    let bc = BreathingBc {
        agent: 0,
        cell,
        direction: [0.0, 1.0, 0.0],
        flow_rate: q,
    };
    step_flow(&mut g, &FlowParams::default(), &[bc], dt).unwrap();
    let area = g.delta * g.delta;
    let ijk = g.ijk(cell);
    let mut out = 0.0;
    for a in 0..3 {
        let (lo, hi) = g.cell_faces(a, ijk);
        out += (g.vel[a][hi] - g.vel[a][lo]) * area * dt;
    }
    let tol = 1e-6 * g.delta.powi(3);
    assert!((out - q * dt).abs() <= tol, "{out} vs {}", q * dt);
    let mut vented = 0.0;
    for a in 0..3 {
        for f in 0..g.vel[a].len() {
            if g.face_kind[a][f] == FaceKind::Open {
                let (lo, _) = g.face_cells(a, f);
                let sign = if lo.is_some() { 1.0 } else { -1.0 };
                vented += sign * g.vel[a][f] * area * dt;
            }
        }
    }
    assert!((vented - q * dt).abs() <= 1e-6 * q * dt * 1e3, "{vented}");
}

#[test]
fn cfl_matches_a_direct_scan() {
    let mut g = build_grid(&cube(1.6, true), 0.1, &[]).unwrap();
    let bc = BreathingBc {
        agent: 0,
        cell: g.idx(4, 5, 6),
        direction: [1.0, 0.0, 0.0],
        flow_rate: 1.98e-4,
    };
    step_flow(&mut g, &FlowParams::default(), &[bc], 0.02).unwrap();
    let mut max = 0.0_f64;
    for a in 0..3 {
        for v in &g.vel[a] {
            max = max.max(v.abs());
        }
    }
    assert!(max > 0.0);
    assert_eq!(cfl_number(&g, 0.02), max * 0.02 / 0.1);
}

fn direction(alpha: f64, beta: f64) -> [f64; 3] {
    Seat {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        alpha,
        beta,
    }
    .facing()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_bounds_divergence_and_keeps_walls_closed(
        mouths in prop::collection::vec((1usize..7, 1usize..7, 1usize..7, 0.0..std::f64::consts::TAU, 0.3..2.8f64, 1e-5..3.04e-4f64, any::<bool>()), 1..4),
        steps in 1usize..6,
    ) {
        let mut g = build_grid(&cube(0.8, true), 0.1, &[]).unwrap();
        let mut bcs: Vec<BreathingBc> = Vec::new();
        for (n, (i, j, k, alpha, beta, q, inhale)) in mouths.into_iter().enumerate() {
            let cell = g.idx(i, j, k);
            if bcs.iter().any(|b| b.cell == cell) {
                continue;
            }
            bcs.push(BreathingBc { agent: n, cell, direction: direction(alpha, beta), flow_rate: if inhale { -q } else { q } });
        }
        let params = FlowParams::default();
        for _ in 0..steps {
            step_flow(&mut g, &params, &bcs, 0.02).unwrap();
        }
        let volume = g.cell_volume();
        for c in 0..g.cell_count() {
            let div = g.divergence(c);
            match bcs.iter().find(|b| b.cell == c) {
                Some(b) => {
                    let want = b.flow_rate / volume;
                    prop_assert!((div - want).abs() <= 1e-6 * want.abs(), "mouth {c}: {div} vs {want}");
                }
                None => prop_assert!(div.abs() <= params.pressure_tolerance, "cell {c}: {div}"),
            }
        }
        for a in 0..3 {
            for (v, kind) in g.vel[a].iter().zip(&g.face_kind[a]) {
                if *kind == FaceKind::Solid {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_field_without_inputs_stays_zero(side in 4usize..9, vent in any::<bool>()) {
        let mut g = build_grid(&cube(0.1 * side as f64, vent), 0.1, &[]).unwrap();
        let params = FlowParams { gravity: [0.0; 3], ..FlowParams::default() };
        for _ in 0..3 {
            step_flow(&mut g, &params, &[], 0.05).unwrap();
        }
        prop_assert!(g.vel.iter().flatten().all(|v| *v == 0.0));
    }
}
