use nnlci::dataset::{CaseData, Normalizer};
use nnlci::evaluation::{centerline_profile, derived_fields, predict_field, MetricSums};
use nnlci::geometry::{CaseRole, CaseSpec, Point};
use nnlci::mesh::{generate_channel_mesh, Level, MeshLevels, MeshResolution};
use nnlci::nn::MlpModel;
use nnlci::solver::{freestream, SolverConfig};
use nnlci::spatial::CentroidTree;
use nnlci::state::{ConservedState, PrimitiveState, GAMMA};

fn linear(p: Point) -> ConservedState {
    PrimitiveState::from_rho_u_v_p(1.0 + 0.3 * p.x - 0.4 * p.y, 0.5, 0.1, 1.0, GAMMA).to_conserved(GAMMA)
}

fn desk_data(f: impl Fn(Point) -> ConservedState) -> CaseData {
    let case = CaseSpec::translated(0.15, 0.0, CaseRole::Testing);
    let meshes = MeshLevels::build(&case, &MeshResolution::DESK).unwrap();
    let states = Level::ALL.map(|l| meshes.get(l).centroids.iter().map(|&c| f(c)).collect());
    CaseData::new(case, meshes, states).unwrap()
}

#[test]
fn static_gas_has_unit_pressure_and_no_motion() {
    let case = CaseSpec::translated(0.0, 0.0, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 12, 4).unwrap();
    let states = vec![ConservedState::new(1.0, 0.0, 0.0, 2.5); mesh.n_cells()];
    let d = derived_fields(&states, &mesh, GAMMA).unwrap();
    assert!(d.pressure.iter().all(|&p| (p - 1.0).abs() < 1e-15));
    assert!(d.mach.iter().all(|&m| m == 0.0));
    assert!(d.density_gradient.iter().all(|&g| g == 0.0));
}

#[test]
fn density_gradient_of_linear_field_is_exact_inside() {
    let case = CaseSpec::translated(0.0, 0.0, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 24, 8).unwrap();
    let states: Vec<_> = mesh.centroids.iter().map(|&c| linear(c)).collect();
    let d = derived_fields(&states, &mesh, GAMMA).unwrap();
    let mut checked = 0;
    for c in (0..mesh.n_cells()).filter(|&c| !mesh.is_boundary_cell(c)) {
        assert!((d.density_gradient[c] - 0.5).abs() < 1e-12, "cell {c}: {}", d.density_gradient[c]);
        checked += 1;
    }
    assert!(checked > mesh.n_cells() / 2);
}

#[test]
fn derived_fields_reject_wrong_length() {
    let case = CaseSpec::translated(0.0, 0.0, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 12, 4).unwrap();
    assert!(derived_fields(&[ConservedState::new(1.0, 0.0, 0.0, 2.5)], &mesh, GAMMA).is_err());
}

#[test]
fn centerline_of_free_stream_is_uniform() {
    let case = CaseSpec::translated(0.0, 0.05, CaseRole::Training);
    let mesh = generate_channel_mesh(&case, 24, 8).unwrap();
    let tree = CentroidTree::build(&mesh);
    let u = freestream(&case, &SolverConfig::default());
    let states = vec![u; mesh.n_cells()];
    let profile = centerline_profile(&mesh, &tree, &states, 0.4, GAMMA).unwrap();
    assert!(profile.len() >= 24);
    assert!(profile.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(profile.iter().all(|&(_, m)| (m - case.mach()).abs() < 1e-12));
    assert!(centerline_profile(&mesh, &tree, &states, 0.9, GAMMA).is_err());
}

#[test]
fn prediction_covers_every_finest_cell_once() {
    let data = desk_data(linear);
    let sampler = data.sampler();
    let expected_valid = data
        .meshes
        .finest
        .centroids
        .iter()
        .filter(|&&c| sampler.assemble(c).is_some())
        .count();
    let mut model = MlpModel::zeros(&[202, 4]).unwrap();
    model.normalizer = Some(Normalizer {
        state_min: [0.0, 0.0, 0.0, 0.0],
        state_max: [2.0, 2.0, 2.0, 4.0],
        h_min: [0.1, 0.05],
        h_max: [0.2, 0.1],
    });
    let report = predict_field(&model, &data, GAMMA).unwrap();
    assert_eq!(report.len(), expected_valid);
    assert_eq!(report.len() + report.excluded, data.meshes.finest.n_cells());
    assert!(report.excluded > 0 && !report.is_empty());
    // a zero network predicts the bottom of the normalized range
    assert!(report.predicted.iter().all(|u| u.0 == [0.0; 4]));
    // truth is the finest cell value, baseline the finer interpolation
    for (k, &cell) in report.cells.iter().enumerate() {
        assert_eq!(report.truth[k], data.states[2][cell]);
        assert_eq!(report.points[k], data.meshes.finest.centroids[cell]);
        let lin = linear(report.points[k]);
        assert!((report.baseline[k] - lin).norm_l1() < 1e-12);
    }
    let sums = MetricSums::of(&report);
    assert_eq!(sums.excluded, report.excluded);
    assert!((sums.relative_l1().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn predicted_field_falls_back_to_finer_interpolation() {
    let data = desk_data(linear);
    let mut model = MlpModel::zeros(&[202, 4]).unwrap();
    model.normalizer = Some(Normalizer {
        state_min: [0.0; 4],
        state_max: [1.0; 4],
        h_min: [0.0; 2],
        h_max: [1.0; 2],
    });
    let report = predict_field(&model, &data, GAMMA).unwrap();
    let field = report.predicted_field(&data).unwrap();
    let finer = data.field(Level::Finer);
    assert_eq!(field.len(), data.meshes.finest.n_cells());
    let mut predicted = vec![false; field.len()];
    for &c in &report.cells {
        predicted[c] = true;
    }
    for (c, u) in field.iter().enumerate() {
        if predicted[c] {
            assert_eq!(u.0, [0.0; 4]);
        } else {
            assert_eq!(*u, finer.value_at(data.meshes.finest.centroids[c]).unwrap(), "cell {c}");
        }
    }
}
