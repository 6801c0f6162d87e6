//! Synthetic boundary measurements: a reference forward solve with the true
//! inclusions on an independent mesh and time grid, multiplicative uniform
//! noise, and time interpolation of the recorded samples.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{check_len, Error, Result};
use crate::fem::{BoundaryTrace, FemSpace, Medium, SegmentGrid, SolveOptions};
use crate::field::CellField;
use crate::mesh::{build_disk_mesh, Mesh};
use crate::scenario::Scenario;

/// Settings of the reference solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig {
    /// Triangle count of the reference mesh.
    pub cells: usize,
    pub dt: f64,
    /// Spacing of the recorded samples; a multiple of `dt`.
    pub sample_spacing: f64,
    /// End of the recorded interval (the scenario horizon when `None`).
    pub horizon: Option<f64>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            cells: 13870,
            dt: 0.01,
            sample_spacing: 0.01,
            horizon: None,
        }
    }
}

/// Scenario truth sampled at fixed points.
pub struct TruthMedium<'a> {
    scenario: &'a Scenario,
    points: Vec<[f64; 2]>,
}

impl<'a> TruthMedium<'a> {
    /// Truth evaluated at the cell centroids of `mesh`.
    pub fn new(scenario: &'a Scenario, mesh: &Mesh) -> Self {
        Self {
            scenario,
            points: mesh.centroids(),
        }
    }
}

impl Medium for TruthMedium<'_> {
    fn sample(&self, t: f64, out: &mut CellField) -> Result<()> {
        self.scenario.fill_truth(&self.points, t, out)
    }

    fn components(&self) -> usize {
        self.scenario.components()
    }
}

/// Boundary trace recorded on the reference mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrace {
    /// Polar angle of every reference boundary vertex.
    pub angles: Vec<f64>,
    pub trace: BoundaryTrace,
}

impl ReferenceTrace {
    /// The trace at the boundary vertices of `mesh`, by linear interpolation
    /// in the polar angle. The initial row is replaced by `h` evaluated at
    /// the target vertices.
    pub fn on_mesh(&self, scenario: &Scenario, mesh: &Mesh) -> Result<BoundaryTrace> {
        let targets = mesh.boundary_angles();
        let mut order: Vec<usize> = (0..self.angles.len()).collect();
        order.sort_by(|&a, &b| self.angles[a].total_cmp(&self.angles[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| self.angles[i]).collect();
        let stencil: Vec<(usize, usize, f64)> = targets.iter().map(|&a| angular_stencil(&sorted, a)).collect();
        let mut values: Vec<Vec<f64>> = self
            .trace
            .values
            .iter()
            .map(|row| {
                stencil
                    .iter()
                    .map(|&(i, j, s)| (1.0 - s) * row[order[i]] + s * row[order[j]])
                    .collect()
            })
            .collect();
        if self.trace.times[0] == 0.0 {
            values[0] = mesh
                .boundary_vertices
                .iter()
                .map(|&v| scenario.sources.h(mesh.vertices[v]))
                .collect();
        }
        BoundaryTrace::new(self.trace.times.clone(), values)
    }
}

/// Bracketing indices and weight for `a` among sorted periodic angles.
fn angular_stencil(sorted: &[f64], a: f64) -> (usize, usize, f64) {
    let n = sorted.len();
    let tau = core::f64::consts::TAU;
    let k = sorted.partition_point(|&s| s <= a);
    let (i, j) = if k == 0 || k == n { (n - 1, 0) } else { (k - 1, k) };
    let (lo, mut hi) = (sorted[i], sorted[j]);
    let mut x = a;
    if j <= i {
        hi += tau;
        if x < lo {
            x += tau;
        }
    }
    let span = hi - lo;
    let s = if span > 0.0 {
        ((x - lo) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (i, j, s)
}

/// Runs the reference forward problem with the true inclusions and records
/// the boundary values at every sample instant.
pub fn reference_trace(scenario: &Scenario, config: &ReferenceConfig) -> Result<ReferenceTrace> {
    let horizon = config.horizon.unwrap_or(scenario.horizon);
    let stride = config.sample_spacing / config.dt;
    if !(stride >= 1.0) || (stride - stride.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "sample spacing {} must be a multiple of the reference step {}",
            config.sample_spacing, config.dt
        )));
    }
    let stride = stride.round() as usize;
    let space = FemSpace::new(build_disk_mesh(config.cells)?)?;
    let mesh = space.mesh();
    let grid = SegmentGrid::new(0.0, horizon, config.dt)?;
    let medium = TruthMedium::new(scenario, mesh);
    let forcing = scenario.sources.forcing(mesh);
    let init = scenario.sources.initial_state(mesh);
    let mut times = Vec::with_capacity(grid.steps / stride + 1);
    let mut values = Vec::with_capacity(grid.steps / stride + 1);
    space.forward_observe(
        &grid,
        &medium,
        &scenario.ops,
        &forcing,
        &init,
        SolveOptions::default(),
        &mut |k, t, y| {
            if k % stride == 0 {
                times.push(t);
                values.push(mesh.boundary_vertices.iter().map(|&v| y[v]).collect());
            }
        },
    )?;
    Ok(ReferenceTrace {
        angles: mesh.boundary_angles(),
        trace: BoundaryTrace::new(times, values)?,
    })
}

/// Reference trace mapped onto the boundary of the inversion mesh.
pub fn generate_reference(scenario: &Scenario, config: &ReferenceConfig, inversion: &Mesh) -> Result<BoundaryTrace> {
    reference_trace(scenario, config)?.on_mesh(scenario, inversion)
}

/// Uniform draw in `(-1, 1)` for boundary vertex `vertex` at sample `index`.
///
/// ChaCha20 keyed by `seed`, with the vertex as stream id and the sample
/// index as 64-bit word position, so every entry is addressable on its own.
pub fn noise_draw(seed: u64, vertex: usize, index: usize) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(vertex as u64);
    rng.set_word_pos(2 * index as u128);
    to_symmetric_unit(rng.next_u64())
}

fn to_symmetric_unit(bits: u64) -> f64 {
    2.0 * ((bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) - 1.0
}

/// `y·(1 + ε δ)` with independent `δ ~ U(−1, 1)` per vertex and sample.
pub fn add_noise(trace: &BoundaryTrace, level: f64, seed: u64) -> Result<BoundaryTrace> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::Config(format!("noise level must be non-negative, got {level}")));
    }
    let mut values = trace.values.clone();
    if level == 0.0 {
        return BoundaryTrace::new(trace.times.clone(), values);
    }
    for vertex in 0..trace.boundary_count() {
        // consecutive draws of one stream are consecutive word positions
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(vertex as u64);
        for row in values.iter_mut() {
            row[vertex] *= 1.0 + level * to_symmetric_unit(rng.next_u64());
        }
    }
    BoundaryTrace::new(trace.times.clone(), values)
}

/// Clean and noisy boundary data at the sample instants.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub clean: BoundaryTrace,
    pub noisy: BoundaryTrace,
    pub noise_level: f64,
    pub seed: u64,
}

impl MeasurementSet {
    pub fn new(clean: BoundaryTrace, noise_level: f64, seed: u64) -> Result<Self> {
        let noisy = add_noise(&clean, noise_level, seed)?;
        Ok(Self {
            clean,
            noisy,
            noise_level,
            seed,
        })
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.clean.times
    }

    pub fn boundary_count(&self) -> usize {
        self.clean.boundary_count()
    }

    /// Noisy data at `t`, linearly interpolated between samples.
    pub fn sample_measurement(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.noisy.at(t, out)
    }

    /// Noisy data on the nodes of `grid`.
    pub fn on_grid(&self, grid: &SegmentGrid) -> Result<BoundaryTrace> {
        self.noisy.resample(&grid.times())
    }
}

/// Rejects an inversion setup that shares the reference discretization.
pub fn guard_inverse_crime(reference: &ReferenceConfig, inversion_cells: usize, inversion_dt: f64) -> Result<()> {
    if reference.cells == inversion_cells {
        return Err(Error::Config(format!(
            "reference and inversion meshes both have {inversion_cells} triangles"
        )));
    }
    if (reference.dt - inversion_dt).abs() <= 1e-12 * reference.dt {
        return Err(Error::Config(format!(
            "reference and inversion share the time step {inversion_dt}"
        )));
    }
    Ok(())
}

/// Checks that `set` covers `[0, horizon]` with rows for `boundary` vertices.
pub fn check_coverage(set: &MeasurementSet, horizon: f64, boundary: usize) -> Result<()> {
    check_len("measurement boundary", boundary, set.boundary_count())?;
    let times = set.sample_times();
    let (first, last) = (times[0], times[times.len() - 1]);
    if first > 1e-12 || last < horizon - 1e-9 {
        return Err(Error::OutOfHorizon {
            t: horizon,
            start: first,
            end: last,
        });
    }
    Ok(())
}
