use idsm_core::fem::{boundary_trace, FemSpace, Forcing, NoForcing, SegmentGrid, SolveOptions};
use idsm_core::mesh::build_disk_mesh;
use idsm_core::{CellField, NodalField};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn exact(x: f64, y: f64, t: f64) -> f64 {
    (-t).exp() * (2.0 * x).sin() * y.cos()
}

struct Manufactured {
    centroids: Vec<[f64; 2]>,
    boundary: Vec<[f64; 2]>,
}

impl Forcing for Manufactured {
    fn volume(&self, t: f64, out: &mut [f64]) -> bool {
        for (o, &[x, y]) in out.iter_mut().zip(&self.centroids) {
            *o = 4.0 * exact(x, y, t);
        }
        true
    }

    fn flux(&self, t: f64, out: &mut [f64]) -> bool {
        for (o, &[x, y]) in out.iter_mut().zip(&self.boundary) {
            let e = (-t).exp();
            *o = e * (2.0 * (2.0 * x).cos() * y.cos() * x - (2.0 * x).sin() * y.sin() * y);
        }
        true
    }
}

fn manufactured_run(cells: usize, dt: f64, horizon: f64) -> (FemSpace, Vec<f64>) {
    let mesh = build_disk_mesh(cells).unwrap();
    let forcing = Manufactured {
        centroids: mesh.centroids(),
        boundary: mesh.boundary_vertices.iter().map(|&v| mesh.vertices[v]).collect(),
    };
    let space = FemSpace::new(mesh).unwrap();
    let mesh = space.mesh();
    let grid = SegmentGrid::new(0.0, horizon, dt).unwrap();
    let init = NodalField {
        values: mesh.vertices.iter().map(|&[x, y]| exact(x, y, 0.0)).collect(),
    };
    let none = CellField::zeros(0, mesh.cell_count());
    let traj = space
        .forward_solve(&grid, &none, &[], &forcing, &init, SolveOptions::default())
        .unwrap();
    let last = traj.terminal().values.clone();
    (space, last)
}

fn l2(space: &FemSpace, v: &[f64]) -> f64 {
    space.mass().bilinear(v, v).sqrt()
}

fn manufactured_error(cells: usize) -> (f64, f64) {
    let (space, last) = manufactured_run(cells, 0.0025, 0.2);
    let mesh = space.mesh();
    let err: Vec<f64> = mesh
        .vertices
        .iter()
        .zip(&last)
        .map(|(&[x, y], v)| v - exact(x, y, 0.2))
        .collect();
    (mesh.max_cell_diameter(), l2(&space, &err))
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let runs: Vec<(f64, f64)> = [600, 2400, 9600].iter().map(|&n| manufactured_error(n)).collect();
    for w in runs.windows(2) {
        let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
        assert!(order > 1.7 && order < 2.6, "observed order {order} from {runs:?}");
    }
}

/// Manufactured data switched on smoothly from rest.
struct Ramped(Manufactured);

impl Forcing for Ramped {
    fn volume(&self, t: f64, out: &mut [f64]) -> bool {
        self.0.volume(t, out);
        out.iter_mut().for_each(|v| *v *= t * t);
        true
    }

    fn flux(&self, t: f64, out: &mut [f64]) -> bool {
        self.0.flux(t, out);
        out.iter_mut().for_each(|v| *v *= t * t);
        true
    }
}

fn ramped_run(space: &FemSpace, dt: f64) -> Vec<f64> {
    let mesh = space.mesh();
    let forcing = Ramped(Manufactured {
        centroids: mesh.centroids(),
        boundary: mesh.boundary_vertices.iter().map(|&v| mesh.vertices[v]).collect(),
    });
    let grid = SegmentGrid::new(0.0, 0.4, dt).unwrap();
    let none = CellField::zeros(0, mesh.cell_count());
    let zero = NodalField::zeros(mesh.vertex_count());
    let traj = space
        .forward_solve(&grid, &none, &[], &forcing, &zero, SolveOptions::default())
        .unwrap();
    traj.terminal().values.clone()
}

#[test]
fn time_stepping_converges_at_second_order() {
    // against a much finer step on the same mesh
    let space = FemSpace::new(build_disk_mesh(1200).unwrap()).unwrap();
    let reference = ramped_run(&space, 0.4 / 512.0);
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let d: Vec<f64> = ramped_run(&space, dt)
                .iter()
                .zip(&reference)
                .map(|(a, b)| a - b)
                .collect();
            l2(&space, &d)
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "observed order {order} from {errs:?}");
    }
}

struct Source {
    modes: Vec<[f64; 5]>,
    centroids: Vec<[f64; 2]>,
}

impl Source {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m[0] * (m[1] * x + m[2] * y + m[3]).cos() * (1.0 + m[4] * t))
            .sum()
    }
}

impl Forcing for Source {
    fn volume(&self, t: f64, out: &mut [f64]) -> bool {
        for (o, &[x, y]) in out.iter_mut().zip(&self.centroids) {
            *o = self.eval(x, y, t);
        }
        true
    }

    fn flux(&self, _t: f64, _out: &mut [f64]) -> bool {
        false
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

#[test]
fn adjoint_identity_holds_to_discretization_accuracy() {
    let space = FemSpace::new(build_disk_mesh(7002).unwrap()).unwrap();
    let mesh = space.mesh();
    let grid = SegmentGrid::new(0.0, 0.1, 0.0125).unwrap();
    let weights = mesh.boundary_vertex_weights();
    let angles = mesh.boundary_angles();
    let tw = grid.trapezoid_weights();
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (0..3)
            .map(|_| {
                [
                    uniform(&mut rng, 0.5, 2.0),
                    uniform(&mut rng, -3.0, 3.0),
                    uniform(&mut rng, -3.0, 3.0),
                    uniform(&mut rng, 0.0, 6.0),
                    uniform(&mut rng, -5.0, 5.0),
                ]
            })
            .collect();
        let v = Source {
            modes,
            centroids: mesh.centroids(),
        };
        let (k, phase, rate) = (
            1.0 + (rng.next_u64() % 4) as f64,
            uniform(&mut rng, 0.0, 6.0),
            uniform(&mut rng, -5.0, 5.0),
        );
        let flux_rows: Vec<Vec<f64>> = grid
            .times()
            .iter()
            .map(|&t| {
                angles
                    .iter()
                    .map(|&a| (k * a + phase).cos() * (1.0 + rate * t) + 0.3)
                    .collect()
            })
            .collect();
        let flux = idsm_core::fem::BoundaryTrace::new(grid.times(), flux_rows).unwrap();

        let none = CellField::zeros(0, mesh.cell_count());
        let zero = NodalField::zeros(mesh.vertex_count());
        let w = space
            .forward_solve(&grid, &none, &[], &v, &zero, SolveOptions::default())
            .unwrap();
        let rhs = flux.inner(&boundary_trace(&w, mesh).unwrap(), &weights);

        let z = space.backward_adjoint_solve(&grid, &flux).unwrap();
        let lhs: f64 = grid
            .times()
            .iter()
            .zip(&z.states)
            .zip(&tw)
            .map(|((&t, zs), wt)| {
                let vn: Vec<f64> = mesh.vertices.iter().map(|&[x, y]| v.eval(x, y, t)).collect();
                wt * space.mass().bilinear(&zs.values, &vn)
            })
            .sum();
        let rel = (lhs - rhs).abs() / rhs.abs();
        assert!(rel < 0.02, "seed {seed}: lhs {lhs} rhs {rhs} rel {rel}");
    }
    let _ = NoForcing;
}
