use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::Ordering;

#[allow(unused_imports)]
use num_traits::Float;

use super::{check_nodal, BoundaryTrace, FemSpace, Forcing, InhomogeneityOp, Medium, SegmentGrid, Trajectory};
use crate::error::Result;
use crate::field::{CellField, NodalField};
use crate::mesh::Mesh;
use crate::sparse::{CholeskyFactor, SymMatrix};

/// Options for the time stepper.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    /// Re-evaluate the power-potential weight at the new state (up to three
    /// sweeps per step) instead of lagging it.
    pub picard: bool,
}

const PICARD_SWEEPS: usize = 3;
const PICARD_TOL: f64 = 1e-8;

/// Cumulative sweep counters of a [`FemSpace`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub neumann: usize,
    pub dirichlet: usize,
    pub adjoint: usize,
    pub factorizations: usize,
}

enum BoundaryData<'a> {
    Neumann(&'a dyn Forcing),
    Dirichlet(&'a BoundaryTrace),
}

impl FemSpace {
    /// Crank–Nicolson solve with Neumann data from `forcing`.
    pub fn forward_solve(
        &self,
        grid: &SegmentGrid,
        medium: &dyn Medium,
        ops: &[InhomogeneityOp],
        forcing: &dyn Forcing,
        init: &NodalField,
        options: SolveOptions,
    ) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(grid.nodes());
        self.forward_observe(grid, medium, ops, forcing, init, options, &mut |_, _, y| {
            states.push(NodalField { values: y.to_vec() });
        })?;
        Ok(Trajectory {
            times: grid.times(),
            states,
        })
    }

    /// Like [`forward_solve`](Self::forward_solve) but hands every state to
    /// `observer` (step index, time, values) instead of storing it.
    #[allow(clippy::too_many_arguments)]
    pub fn forward_observe(
        &self,
        grid: &SegmentGrid,
        medium: &dyn Medium,
        ops: &[InhomogeneityOp],
        forcing: &dyn Forcing,
        init: &NodalField,
        options: SolveOptions,
        observer: &mut dyn FnMut(usize, f64, &[f64]),
    ) -> Result<()> {
        self.counters.neumann.fetch_add(1, Ordering::Relaxed);
        self.march(
            grid,
            medium,
            ops,
            forcing,
            BoundaryData::Neumann(forcing),
            init,
            options,
            observer,
        )
    }

    /// Crank–Nicolson solve with boundary values prescribed by `trace`
    /// (linearly interpolated in time). Only the volume part of `forcing` is
    /// used.
    pub fn dirichlet_solve(
        &self,
        grid: &SegmentGrid,
        medium: &dyn Medium,
        ops: &[InhomogeneityOp],
        forcing: &dyn Forcing,
        trace: &BoundaryTrace,
        init: &NodalField,
    ) -> Result<Trajectory> {
        crate::error::check_len("dirichlet trace", self.mesh().boundary_count(), trace.boundary_count())?;
        self.counters.dirichlet.fetch_add(1, Ordering::Relaxed);
        let mut states = Vec::with_capacity(grid.nodes());
        self.march(
            grid,
            medium,
            ops,
            forcing,
            BoundaryData::Dirichlet(trace),
            init,
            SolveOptions::default(),
            &mut |_, _, y| states.push(NodalField { values: y.to_vec() }),
        )?;
        Ok(Trajectory {
            times: grid.times(),
            states,
        })
    }

    /// Solves `∂t z + Δz = 0` backward from `z(t_end) = 0` with `∂n z =
    /// flux`, as a forward Crank–Nicolson solve in reversed time.
    pub fn backward_adjoint_solve(&self, grid: &SegmentGrid, flux: &BoundaryTrace) -> Result<Trajectory> {
        let mesh = self.mesh();
        crate::error::check_len("adjoint flux", mesh.boundary_count(), flux.boundary_count())?;
        self.counters.adjoint.fetch_add(1, Ordering::Relaxed);
        let n = mesh.vertex_count();
        let factor = self.background_factor(grid.dt)?;
        let inv_dt = 1.0 / grid.dt;
        let mut z = vec![0.0; n];
        let mut states = vec![NodalField { values: z.clone() }];
        let (mut mz, mut kz, mut g) = (vec![0.0; n], vec![0.0; n], vec![0.0; mesh.boundary_count()]);
        let mut work = Vec::with_capacity(n);
        for k in 0..grid.steps {
            // reversed step from τ_k to τ_{k+1}, i.e. from t_{S−k} to t_{S−k−1}
            let t_mid = 0.5 * (grid.time(grid.steps - k) + grid.time(grid.steps - k - 1));
            self.mass().mul_vec(&z, &mut mz);
            self.laplace().mul_vec(&z, &mut kz);
            let mut rhs: Vec<f64> = mz.iter().zip(&kz).map(|(m, a)| inv_dt * m - 0.5 * a).collect();
            flux.at(t_mid, &mut g)?;
            self.add_neumann_load(&g, &mut rhs);
            factor.solve_in_place(&mut rhs, &mut work);
            z = rhs;
            states.push(NodalField { values: z.clone() });
        }
        states.reverse();
        Ok(Trajectory {
            times: grid.times(),
            states,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn march(
        &self,
        grid: &SegmentGrid,
        medium: &dyn Medium,
        ops: &[InhomogeneityOp],
        forcing: &dyn Forcing,
        boundary: BoundaryData<'_>,
        init: &NodalField,
        options: SolveOptions,
        observer: &mut dyn FnMut(usize, f64, &[f64]),
    ) -> Result<()> {
        let mesh = self.mesh();
        check_nodal(mesh, init)?;
        let n = mesh.vertex_count();
        let nb = mesh.boundary_count();
        let inv_dt = 1.0 / grid.dt;
        let nonlinear = ops.iter().any(InhomogeneityOp::is_nonlinear);
        let background = ops.is_empty();
        let frozen = (medium.is_static() || background) && !nonlinear;
        let dirichlet = matches!(boundary, BoundaryData::Dirichlet(_));

        let mut u = CellField::zeros(medium.components(), mesh.cell_count());
        if !background {
            medium.sample(grid.time(0), &mut u)?;
        }
        let mut y = init.values.clone();
        observer(0, grid.time(0), &y);

        let lhs_of = |a: &SymMatrix| SymMatrix::combine(inv_dt, self.mass(), 0.5, a);
        let factor_of = |lhs: &SymMatrix| -> Result<CholeskyFactor> {
            if dirichlet {
                let mut c = lhs.clone();
                c.constrain(self.boundary_mask());
                self.factor(&c)
            } else {
                self.factor(lhs)
            }
        };

        let mut a_now = if background {
            self.laplace().clone()
        } else {
            self.operator(&u, ops, Some(&y))?
        };
        // reused across steps when the operator does not change
        let mut fixed: Option<(SymMatrix, CholeskyFactor)> = None;
        if frozen {
            let lhs = lhs_of(&a_now);
            let f = if background && !dirichlet {
                None
            } else {
                Some(factor_of(&lhs)?)
            };
            if let Some(f) = f {
                fixed = Some((lhs, f));
            }
        }
        let cached_background = if frozen && background && !dirichlet {
            Some(self.background_factor(grid.dt)?)
        } else {
            None
        };

        let mut varying: Option<(CellField, SymMatrix, CholeskyFactor)> = None;
        let (mut my, mut ay) = (vec![0.0; n], vec![0.0; n]);
        let mut f_cells = vec![0.0; mesh.cell_count()];
        let mut g = vec![0.0; nb];
        let mut lift = vec![0.0; n];
        let mut lift_out = vec![0.0; n];
        let mut work = Vec::with_capacity(n);

        for k in 0..grid.steps {
            let (t0, t1) = (grid.time(k), grid.time(k + 1));
            let th = 0.5 * (t0 + t1);
            self.mass().mul_vec(&y, &mut my);
            a_now.mul_vec(&y, &mut ay);
            let mut base: Vec<f64> = my.iter().zip(&ay).map(|(m, a)| inv_dt * m - 0.5 * a).collect();
            if forcing.volume(th, &mut f_cells) {
                self.add_volume_load(&f_cells, &mut base);
            }
            let mut bvals = None;
            match boundary {
                BoundaryData::Neumann(src) => {
                    if src.flux(th, &mut g) {
                        self.add_neumann_load(&g, &mut base);
                    }
                }
                BoundaryData::Dirichlet(trace) => {
                    trace.at(t1, &mut g)?;
                    bvals = Some(g.clone());
                }
            }

            let solve = |lhs: &SymMatrix,
                         factor: &CholeskyFactor,
                         work: &mut Vec<f64>,
                         lift: &mut [f64],
                         lift_out: &mut [f64]|
             -> Vec<f64> {
                let mut rhs = base.clone();
                if let Some(b) = &bvals {
                    lift.iter_mut().for_each(|v| *v = 0.0);
                    for (&v, &val) in mesh.boundary_vertices.iter().zip(b) {
                        lift[v] = val;
                    }
                    lhs.mul_vec(lift, lift_out);
                    for i in 0..n {
                        rhs[i] -= lift_out[i];
                    }
                    for (&v, &val) in mesh.boundary_vertices.iter().zip(b) {
                        rhs[v] = val;
                    }
                }
                factor.solve_in_place(&mut rhs, work);
                rhs
            };

            let y_new = if let Some(f) = &cached_background {
                solve(self.laplace(), f, &mut work, &mut lift, &mut lift_out)
            } else if let Some((lhs, f)) = &fixed {
                solve(lhs, f, &mut work, &mut lift, &mut lift_out)
            } else {
                if !background && !medium.is_static() {
                    medium.sample(t1, &mut u)?;
                }
                if nonlinear {
                    let a_next = self.operator(&u, ops, Some(&y))?;
                    let lhs = lhs_of(&a_next);
                    let f = factor_of(&lhs)?;
                    let mut y_new = solve(&lhs, &f, &mut work, &mut lift, &mut lift_out);
                    if options.picard {
                        for _ in 0..PICARD_SWEEPS {
                            let a_it = self.operator(&u, ops, Some(&y_new))?;
                            let lhs = lhs_of(&a_it);
                            let f = factor_of(&lhs)?;
                            let next = solve(&lhs, &f, &mut work, &mut lift, &mut lift_out);
                            let diff = next
                                .iter()
                                .zip(&y_new)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>()
                                .sqrt();
                            let size = next.iter().map(|a| a * a).sum::<f64>().sqrt();
                            y_new = next;
                            if diff <= PICARD_TOL * size.max(1e-300) {
                                break;
                            }
                        }
                    }
                    a_now = self.operator(&u, ops, Some(&y_new))?;
                    y_new
                } else {
                    // the factor is kept while the sampled medium stays identical
                    if varying.as_ref().is_none_or(|(prev, _, _)| *prev != u) {
                        let a_next = self.operator(&u, ops, None)?;
                        let lhs = lhs_of(&a_next);
                        let f = factor_of(&lhs)?;
                        a_now = a_next;
                        varying = Some((u.clone(), lhs, f));
                    }
                    let (_, lhs, f) = varying.as_ref().unwrap();
                    solve(lhs, f, &mut work, &mut lift, &mut lift_out)
                }
            };
            y = y_new;
            observer(k + 1, t1, &y);
        }
        Ok(())
    }
}

/// Boundary values of every state of `traj`.
pub fn boundary_trace(traj: &Trajectory, mesh: &Mesh) -> Result<BoundaryTrace> {
    let values = traj
        .states
        .iter()
        .map(|s| {
            check_nodal(mesh, s)?;
            Ok(mesh.boundary_vertices.iter().map(|&v| s.values[v]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    BoundaryTrace::new(traj.times.clone(), values)
}
