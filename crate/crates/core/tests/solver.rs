use nnlci::geometry::{CaseRole, CaseSpec, Point};
use nnlci::interpolation::limited_gradient;
use nnlci::mesh::{generate_channel_mesh, BoundaryTag, Face, MeshLevels, MeshResolution};
use nnlci::solver::{apply_boundary, freestream, residual, rusanov_flux, solve_steady, Solver, SolverConfig};
use nnlci::state::{ConservedState, PrimitiveState, GAMMA};

fn smooth_states(mesh: &nnlci::mesh::Mesh) -> Vec<ConservedState> {
    mesh.centroids
        .iter()
        .map(|c| {
            PrimitiveState::from_rho_u_v_p(
                1.0 + 0.2 * (2.0 * c.x).sin(),
                2.0 + 0.3 * c.y,
                0.2 * (3.0 * c.x).cos(),
                0.7 + 0.1 * c.x * c.y,
                GAMMA,
            )
            .to_conserved(GAMMA)
        })
        .collect()
}

#[test]
fn residual_matches_cell_by_cell_recomputation() {
    let case = CaseSpec::translated(0.1, 0.0, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 20, 5).unwrap();
    let cfg = SolverConfig::default();
    let states = smooth_states(&mesh);
    let free = freestream(&case, &cfg);
    let r = residual(&mesh, &states, &case, &cfg).unwrap();

    let ghost = |c: usize, k: usize, u: &ConservedState| -> (Point, Point, BoundaryTag, ConservedState) {
        let (a, b) = mesh.edge(c, k);
        let n = mesh.scaled_normal(c, k);
        let n = n * (1.0 / n.norm());
        let Face::Boundary(tag) = mesh.faces[c][k] else { unreachable!() };
        let mid = a.midpoint(b);
        let xc = mesh.centroids[c];
        let mirrored = xc + n * (2.0 * (mid - xc).dot(n));
        (mirrored, n, tag, apply_boundary(u, tag, n, &free))
    };
    let gradient = |c: usize| {
        let nbrs: Vec<(Point, ConservedState)> = (0..3)
            .map(|k| match mesh.faces[c][k] {
                Face::Interior(o) => (mesh.centroids[o], states[o]),
                Face::Boundary(_) => {
                    let (p, _, _, g) = ghost(c, k, &states[c]);
                    (p, g)
                }
            })
            .collect();
        limited_gradient(mesh.centroids[c], states[c], &nbrs)
    };
    let at = |c: usize, p: Point| {
        let [gx, gy] = gradient(c);
        let d = p - mesh.centroids[c];
        states[c] + gx * d.x + gy * d.y
    };

    for (c, rc) in r.iter().enumerate() {
        let mut sum = ConservedState::new(0.0, 0.0, 0.0, 0.0);
        for k in 0..3 {
            let (a, b) = mesh.edge(c, k);
            let mid = a.midpoint(b);
            let sn = mesh.scaled_normal(c, k);
            let len = sn.norm();
            let n = sn * (1.0 / len);
            let ul = at(c, mid);
            let ur = match mesh.faces[c][k] {
                Face::Interior(o) => at(o, mid),
                Face::Boundary(tag) => apply_boundary(&ul, tag, n, &free),
            };
            sum += rusanov_flux(&ul, &ur, n, GAMMA).unwrap() * len;
        }
        let expected = sum * (-1.0 / mesh.areas[c]);
        for v in 0..4 {
            let scale = expected[v].abs().max(1.0);
            assert!(
                (rc[v] - expected[v]).abs() < 1e-11 * scale,
                "cell {c} var {v}: {} vs {}",
                rc[v],
                expected[v]
            );
        }
    }
}

#[test]
fn uniform_stream_is_preserved_in_a_flat_channel() {
    let case = CaseSpec::flat(CaseRole::Training);
    let levels = MeshLevels::build(&case, &MeshResolution::DESK).unwrap();
    let cfg = SolverConfig::default();
    let mesh = &levels.finest;
    let mut solver = Solver::new(mesh, &case, cfg).unwrap();
    let mut states = solver.initial_states();
    let before = states.clone();
    solver.step(&mut states).unwrap();
    let r = residual(mesh, &states, &case, &cfg).unwrap();
    let worst = r.iter().flat_map(|u| u.0).fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(worst < 1e-11, "{worst}");
    for (a, b) in states.iter().zip(&before) {
        assert!((*a - *b).norm_l1() < 1e-12);
    }
}

#[test]
fn flat_channel_converges_immediately() {
    let case = CaseSpec::flat(CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 12, 4).unwrap();
    let sol = solve_steady(&mesh, &case, &SolverConfig::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.steps <= 2);
}

#[test]
fn global_steps_conserve_up_to_boundary_flux() {
    let case = CaseSpec::translated(0.25, 0.05, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 20, 5).unwrap();
    let cfg = SolverConfig {
        local_time_stepping: false,
        ..Default::default()
    };
    let mut solver = Solver::new(&mesh, &case, cfg).unwrap();
    let mut states = solver.initial_states();
    for _ in 0..30 {
        solver.step(&mut states).unwrap();
    }
    let integral = |s: &[ConservedState]| {
        s.iter()
            .zip(&mesh.areas)
            .fold(ConservedState::new(0.0, 0.0, 0.0, 0.0), |acc, (u, &a)| acc + *u * a)
    };
    let start = integral(&states);
    let mut inflow = ConservedState::new(0.0, 0.0, 0.0, 0.0);
    for _ in 0..50 {
        let r = solver.step(&mut states).unwrap();
        let (net, gross) = (r.boundary_inflow.unwrap(), r.boundary_gross.unwrap());
        for v in 0..4 {
            assert!(gross[v] >= net[v].abs());
        }
        inflow += net;
    }
    let change = integral(&states) - start;
    for v in 0..4 {
        let scale = change[v].abs().max(inflow[v].abs());
        assert!((change[v] - inflow[v]).abs() <= 1e-9 * scale, "var {v}: {} vs {}", change[v], inflow[v]);
    }
}

#[test]
fn local_steps_report_no_boundary_integral() {
    let case = CaseSpec::translated(0.0, 0.0, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 20, 5).unwrap();
    let mut solver = Solver::new(&mesh, &case, SolverConfig::default()).unwrap();
    let mut states = solver.initial_states();
    assert!(solver.step(&mut states).unwrap().boundary_inflow.is_none());
}

#[test]
fn bumped_channel_solution_stays_physical_and_compresses() {
    let case = CaseSpec::translated(0.0, 0.0, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 20, 5).unwrap();
    let cfg = SolverConfig {
        max_steps: 800,
        ..Default::default()
    };
    let sol = solve_steady(&mesh, &case, &cfg).unwrap();
    assert!(sol.states.iter().all(|u| u.is_physical(GAMMA)));
    let r0 = sol.history[0];
    assert!(*sol.history.last().unwrap() < 0.05 * r0);
    let p_inf = 1.0 / GAMMA;
    let p_max = sol.states.iter().map(|u| u.pressure(GAMMA)).fold(0.0, f64::max);
    assert!(p_max > 1.2 * p_inf, "bump should compress the flow: {p_max}");
}

#[test]
fn unphysical_start_is_reported_with_cell() {
    let case = CaseSpec::translated(0.0, 0.0, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 20, 5).unwrap();
    let mut solver = Solver::new(&mesh, &case, SolverConfig::default()).unwrap();
    let mut states = solver.initial_states();
    states[37] = ConservedState::new(-1.0, 0.0, 0.0, 1.0);
    let err = solver.step(&mut states).unwrap_err();
    assert!(matches!(err, nnlci::Error::Diverged { .. } | nnlci::Error::State { .. }), "{err}");
}
