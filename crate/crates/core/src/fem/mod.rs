//! P1 finite elements on triangle meshes with Crank–Nicolson stepping.
//!
//! [`FemSpace`] owns a mesh together with its sparsity pattern, symbolic
//! factorization and mass matrix. The forward (Neumann), Dirichlet and
//! backward adjoint solvers all run on top of it.

mod assemble;
mod solve;

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

pub use assemble::{assemble_mass, assemble_neumann_load, assemble_reaction, assemble_stiffness, FemSpace};
pub use solve::{boundary_trace, SolveOptions, SolveStats};

use crate::error::{Error, Result};
use crate::field::{CellField, NodalField};
use crate::mesh::Mesh;

/// Uniform time grid of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
}

impl SegmentGrid {
    /// Partitions `[t_start, t_end]` into steps of length `dt`; the span must
    /// be an integer multiple of `dt`.
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("time step {dt} must be positive")));
        }
        let span = t_end - t_start;
        if !(span > 0.0) {
            return Err(Error::InvalidGrid(format!("empty interval [{t_start}, {t_end}]")));
        }
        let ratio = span / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "span {span} is not a multiple of dt = {dt}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            dt,
            steps: steps as usize,
        })
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nodes()).map(|k| self.time(k)).collect()
    }

    /// Trapezoid weights over the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = alloc::vec![self.dt; self.nodes()];
        w[0] *= 0.5;
        w[self.steps] *= 0.5;
        w
    }
}

/// Values on the boundary vertices at a sequence of instants.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl BoundaryTrace {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("trace without samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("trace times must increase strictly".into()));
        }
        crate::error::check_len("trace rows", times.len(), values.len())?;
        let width = values[0].len();
        for row in &values {
            crate::error::check_len("trace row", width, row.len())?;
        }
        Ok(Self { times, values })
    }

    pub fn zeros(times: Vec<f64>, boundary: usize) -> Self {
        let values = alloc::vec![alloc::vec![0.0; boundary]; times.len()];
        Self { times, values }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn boundary_count(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Linear interpolation in time.
    pub fn at(&self, t: f64, out: &mut [f64]) -> Result<()> {
        crate::error::check_len("trace interpolation", self.boundary_count(), out.len())?;
        let (first, last) = (self.times[0], self.times[self.len() - 1]);
        let tol = 1e-9 * (1.0 + last.abs());
        if t < first - tol || t > last + tol {
            return Err(Error::OutOfHorizon {
                t,
                start: first,
                end: last,
            });
        }
        if self.len() == 1 || t <= first {
            out.copy_from_slice(&self.values[0]);
            return Ok(());
        }
        if t >= last {
            out.copy_from_slice(&self.values[self.len() - 1]);
            return Ok(());
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let s = (t - t0) / (t1 - t0);
        for ((o, a), b) in out.iter_mut().zip(&self.values[i - 1]).zip(&self.values[i]) {
            *o = (1.0 - s) * a + s * b;
        }
        Ok(())
    }

    /// Resamples onto new instants.
    pub fn resample(&self, times: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len());
        for &t in times {
            let mut row = alloc::vec![0.0; self.boundary_count()];
            self.at(t, &mut row)?;
            values.push(row);
        }
        Self::new(times.to_vec(), values)
    }

    /// `self − other` on identical instants.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        crate::error::check_len("trace difference", self.len(), other.len())?;
        crate::error::check_len("trace difference", self.boundary_count(), other.boundary_count())?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(Self {
            times: self.times.clone(),
            values,
        })
    }

    /// Space-time `L²(Γ × [t_0, t_last])` inner product: boundary vertex
    /// weights in space and the trapezoid rule in time.
    pub fn inner(&self, other: &Self, vertex_weights: &[f64]) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        for j in 0..n {
            let w = trapezoid_weight(&self.times, j);
            let row: f64 = self.values[j]
                .iter()
                .zip(&other.values[j])
                .zip(vertex_weights)
                .map(|((a, b), s)| a * b * s)
                .sum();
            total += w * row;
        }
        total
    }

    pub fn norm(&self, vertex_weights: &[f64]) -> f64 {
        self.inner(self, vertex_weights).max(0.0).sqrt()
    }
}

pub(crate) fn trapezoid_weight(times: &[f64], j: usize) -> f64 {
    let n = times.len();
    if n < 2 {
        return 0.0;
    }
    let left = if j > 0 { times[j] - times[j - 1] } else { 0.0 };
    let right = if j + 1 < n { times[j + 1] - times[j] } else { 0.0 };
    0.5 * (left + right)
}

/// Nodal solution at every node of a segment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<NodalField>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> &NodalField {
        &self.states[0]
    }

    pub fn terminal(&self) -> &NodalField {
        &self.states[self.states.len() - 1]
    }
}

/// How a component of `u` enters the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InhomogeneityKind {
    /// `−∇·((1 + u)∇y)`.
    Conductivity,
    /// `u y`.
    Potential,
    /// `u |y|^{p−2} y`.
    PowerPotential { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InhomogeneityOp {
    pub kind: InhomogeneityKind,
    pub component: usize,
}

impl InhomogeneityOp {
    pub fn conductivity(component: usize) -> Self {
        Self {
            kind: InhomogeneityKind::Conductivity,
            component,
        }
    }

    pub fn potential(component: usize) -> Self {
        Self {
            kind: InhomogeneityKind::Potential,
            component,
        }
    }

    pub fn power_potential(component: usize, p: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::Config(format!("power potential needs p >= 2, got {p}")));
        }
        Ok(Self {
            kind: InhomogeneityKind::PowerPotential { p },
            component,
        })
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self.kind, InhomogeneityKind::PowerPotential { .. })
    }
}

/// Fine-mesh inhomogeneity coefficients as a function of time.
pub trait Medium {
    /// Writes all components at time `t` into `out`.
    fn sample(&self, t: f64, out: &mut CellField) -> Result<()>;

    fn components(&self) -> usize;

    /// True when `sample` does not depend on `t`.
    fn is_static(&self) -> bool {
        false
    }
}

impl Medium for CellField {
    fn sample(&self, _t: f64, out: &mut CellField) -> Result<()> {
        crate::error::check_len("medium cells", out.cells, self.cells)?;
        out.clone_from(self);
        Ok(())
    }

    fn components(&self) -> usize {
        self.components
    }

    fn is_static(&self) -> bool {
        true
    }
}

/// Volume source and Neumann flux data.
pub trait Forcing {
    /// Source density per cell at `t`. Returns `false` (leaving `out`
    /// unspecified) when the source vanishes.
    fn volume(&self, t: f64, out: &mut [f64]) -> bool;

    /// Outward normal flux per boundary vertex at `t`. Returns `false` when
    /// it vanishes.
    fn flux(&self, t: f64, out: &mut [f64]) -> bool;
}

/// Homogeneous source and flux.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn volume(&self, _t: f64, _out: &mut [f64]) -> bool {
        false
    }

    fn flux(&self, _t: f64, _out: &mut [f64]) -> bool {
        false
    }
}

/// Checks that `mesh` and `field` agree on the vertex count.
pub(crate) fn check_nodal(mesh: &Mesh, field: &NodalField) -> Result<()> {
    crate::error::check_len("nodal field", mesh.vertex_count(), field.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_partition() {
        let g = SegmentGrid::new(0.3, 0.4, 0.0125).unwrap();
        assert_eq!(g.steps, 8);
        assert_eq!(g.time(8), 0.4);
        let w: f64 = g.trapezoid_weights().iter().sum();
        assert!((w - 0.1).abs() < 1e-15);
        assert!(SegmentGrid::new(0.0, 0.1, 0.03).is_err());
        assert!(SegmentGrid::new(0.0, 0.1, 0.0).is_err());
        assert!(SegmentGrid::new(0.1, 0.1, 0.01).is_err());
    }

    #[test]
    fn trace_interpolation() {
        let tr = BoundaryTrace::new(
            alloc::vec![0.0, 0.01, 0.02],
            alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![1.0, 1.0], alloc::vec![3.0, 1.0]],
        )
        .unwrap();
        let mut out = [0.0; 2];
        tr.at(0.015, &mut out).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);
        tr.at(0.02, &mut out).unwrap();
        assert_eq!(out[0], 3.0);
        assert!(tr.at(0.05, &mut out).is_err());
        assert!(BoundaryTrace::new(alloc::vec![0.0, 0.0], alloc::vec![alloc::vec![0.0]; 2]).is_err());
    }

    #[test]
    fn power_potential_needs_p_at_least_two() {
        assert!(InhomogeneityOp::power_potential(0, 1.5).is_err());
        assert!(InhomogeneityOp::power_potential(0, 3.0).unwrap().is_nonlinear());
    }
}
