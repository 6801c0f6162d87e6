use idsm_core::fem::{boundary_trace, FemSpace, SegmentGrid, SolveOptions};
use idsm_core::mesh::build_disk_mesh;
use idsm_core::scenario::Scenario;
use idsm_core::synth::{generate_reference, guard_inverse_crime, MeasurementSet, ReferenceConfig};
use idsm_core::CellField;

const HORIZON: f64 = 1.0;

fn relative_gap(a: &idsm_core::fem::BoundaryTrace, b: &idsm_core::fem::BoundaryTrace, w: &[f64]) -> f64 {
    a.difference(b).unwrap().norm(w) / b.norm(w)
}

#[test]
fn reference_matches_inversion_background_and_sees_inclusions() {
    let ex1 = Scenario::builtin("ex1").unwrap();
    let empty = ex1.without_inclusions();
    let cfg = ReferenceConfig {
        horizon: Some(HORIZON),
        ..ReferenceConfig::default()
    };
    let mesh = build_disk_mesh(3000).unwrap();
    guard_inverse_crime(&cfg, mesh.cell_count(), 0.0125).unwrap();
    let w = mesh.boundary_vertex_weights();

    let reference_empty = generate_reference(&empty, &cfg, &mesh).unwrap();
    let reference_ex1 = generate_reference(&ex1, &cfg, &mesh).unwrap();

    let space = FemSpace::new(mesh.clone()).unwrap();
    let grid = SegmentGrid::new(0.0, HORIZON, 0.0125).unwrap();
    let none = CellField::zeros(1, mesh.cell_count());
    let traj = space
        .forward_solve(
            &grid,
            &none,
            &[],
            &empty.sources.forcing(&mesh),
            &empty.sources.initial_state(&mesh),
            SolveOptions::default(),
        )
        .unwrap();
    let local = boundary_trace(&traj, &mesh).unwrap();
    let local = local.resample(&reference_empty.times).unwrap();

    let discretization = relative_gap(&local, &reference_empty, &w);
    assert!(discretization < 0.01, "cross-mesh gap {discretization}");
    let signal = relative_gap(&reference_ex1, &reference_empty, &w);
    assert!(signal > discretization, "inclusion signal {signal} vs {discretization}");

    // initial row is h exactly
    for (&v, &x) in mesh.boundary_vertices.iter().zip(&reference_ex1.values[0]) {
        assert_eq!(x, ex1.sources.h(mesh.vertices[v]));
    }
}

#[test]
fn noise_moments_over_many_entries() {
    let nb = 200;
    let times: Vec<f64> = (0..=1000).map(|n| 0.01 * n as f64).collect();
    let values = times
        .iter()
        .map(|&t| (0..nb).map(|i| 3.0 + (t + 0.05 * i as f64).sin()).collect())
        .collect();
    let clean = idsm_core::fem::BoundaryTrace::new(times, values).unwrap();
    let set = MeasurementSet::new(clean, 0.05, 11).unwrap();
    let ratios: Vec<f64> = set
        .noisy
        .values
        .iter()
        .flatten()
        .zip(set.clean.values.iter().flatten())
        .map(|(n, c)| n / c - 1.0)
        .collect();
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let std = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let expected = 0.05 / 3f64.sqrt();
    assert!(ratios.iter().all(|r| r.abs() <= 0.05 + 1e-15));
    assert!((std - expected).abs() < 0.1 * expected, "std {std}");
    assert!(mean.abs() < 3.0 * expected / n.sqrt(), "mean {mean}");
}
