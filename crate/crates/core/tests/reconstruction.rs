use std::ops::ControlFlow;

use idsm_core::idsm::{Reconstructor, RunConfig, UpdateScheme};
use idsm_core::mesh::build_disk_mesh;
use idsm_core::scenario::Scenario;
use idsm_core::synth::{generate_reference, MeasurementSet, ReferenceConfig};

fn data(scenario: &Scenario, horizon: f64, fine: &idsm_core::Mesh, cells: usize) -> MeasurementSet {
    let cfg = ReferenceConfig {
        cells,
        horizon: Some(horizon),
        ..ReferenceConfig::default()
    };
    MeasurementSet::new(generate_reference(scenario, &cfg, fine).unwrap(), 0.05, 3).unwrap()
}

fn setup(name: &str, horizon: f64, config: impl FnOnce(&mut RunConfig)) -> (Reconstructor, MeasurementSet) {
    let scenario = Scenario::builtin(name).unwrap();
    let fine = build_disk_mesh(1500).unwrap();
    let coarse = build_disk_mesh(400).unwrap();
    let set = data(&scenario, horizon, &fine, 2600);
    let mut cfg = RunConfig::for_scenario(&scenario);
    cfg.horizon = Some(horizon);
    config(&mut cfg);
    (Reconstructor::new(scenario, fine, coarse, cfg).unwrap(), set)
}

#[test]
fn null_data_accepts_first_candidate() {
    let scenario = Scenario::builtin("ex1").unwrap();
    let fine = build_disk_mesh(1500).unwrap();
    let coarse = build_disk_mesh(400).unwrap();
    let set = data(&scenario.without_inclusions(), 0.5, &fine, 2600);
    let mut cfg = RunConfig::for_scenario(&scenario);
    cfg.horizon = Some(0.5);
    let run = Reconstructor::new(scenario, fine, coarse, cfg)
        .unwrap()
        .run(&set)
        .unwrap();
    assert_eq!(run.segments.len(), 5);
    for s in &run.segments {
        assert_eq!(s.counters.as_tuple(), (1, 1, 1, 1));
        assert_eq!(s.iterations, 1);
        assert!(!s.capped);
    }
    assert_eq!(run.mean_counters()[4], 4.0);
}

#[test]
fn one_update_costs_an_adjoint_and_a_forward_solve() {
    for scheme in [UpdateScheme::Dfp, UpdateScheme::Bfg] {
        let (rec, set) = setup("ex1", 0.1, |c| {
            c.tolerance = 1e-6;
            c.max_inner = 2;
            c.scheme = scheme;
        });
        let run = rec.run(&set).unwrap();
        let s = &run.segments[0];
        assert_eq!(s.counters.as_tuple(), (1, 2, 2, 1));
        assert!(s.capped);
        assert_eq!(s.updates + s.skipped_updates, 1);
        if s.updates == 1 {
            assert!(run.state.kernel.rank() > 0);
        }
    }
}

#[test]
fn estimates_respect_bounds() {
    let (rec, set) = setup("ex2", 0.3, |c| c.tolerance = 0.02);
    let run = rec.run(&set).unwrap();
    let bounds = &rec.scenario().bounds;
    for s in &run.segments {
        for (l, b) in bounds.iter().enumerate() {
            assert!(s.estimate.component(l).iter().all(|v| *v >= b.lo && *v <= b.hi));
        }
        assert!(s.counters.total() >= 4 && s.counters.total() <= 4 + 2 * 7);
    }
}

#[test]
fn resumed_run_matches_straight_run() {
    let (rec, set) = setup("ex1", 0.3, |c| c.tolerance = 0.02);
    let straight = rec.run(&set).unwrap();
    let first = rec
        .run_from(&set, rec.initial_state().unwrap(), &mut |_, _| ControlFlow::Break(()))
        .unwrap();
    assert_eq!(first.segments.len(), 1);
    let rest = rec
        .run_from(&set, first.state.clone(), &mut |_, _| ControlFlow::Continue(()))
        .unwrap();
    let mut joined = first.segments.clone();
    joined.extend(rest.segments);
    assert_eq!(joined, straight.segments);
    assert_eq!(rest.state, straight.state);
}

#[test]
fn full_horizon_has_one_report_per_segment() {
    let scenario = Scenario::builtin("ex4").unwrap();
    let fine = build_disk_mesh(600).unwrap();
    let coarse = build_disk_mesh(150).unwrap();
    let set = data(&scenario, 10.0, &fine, 900);
    let rec = Reconstructor::new(scenario.clone(), fine, coarse, RunConfig::for_scenario(&scenario)).unwrap();
    let run = rec.run(&set).unwrap();
    assert_eq!(run.segments.len(), 100);
    assert_eq!(run.segments[99].t_end, 10.0);
}

#[test]
fn misaligned_horizon_is_rejected() {
    let scenario = Scenario::builtin("ex1").unwrap();
    let mut cfg = RunConfig::for_scenario(&scenario);
    cfg.horizon = Some(0.25);
    let r = Reconstructor::new(
        scenario,
        build_disk_mesh(200).unwrap(),
        build_disk_mesh(60).unwrap(),
        cfg,
    );
    assert!(r.is_err());
}
