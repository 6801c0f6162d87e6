use alloc::format;
use alloc::vec::Vec;
use core::ops::ControlFlow;

#[allow(unused_imports)]
use num_traits::Float;

use super::dual::{eta_hat, local_dual, project, EtaHatVariant};
use super::kernel::{KernelConfig, ResolverKernel, SpaceTimeInner, UpdateOutcome};
use super::UpdateScheme;
use crate::error::{check_len, Error, Result};
use crate::fem::{boundary_trace, BoundaryTrace, FemSpace, SegmentGrid, SolveOptions, SolveStats, Trajectory};
use crate::field::{CellField, NodalField, SpaceTimeField};
use crate::mesh::{Mesh, TransferOps};
use crate::scenario::{Scenario, SourceForcing};
use crate::synth::{check_coverage, MeasurementSet};

/// Settings of a segment-wise reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub scheme: UpdateScheme,
    /// Relative boundary residual accepted without a kernel update.
    pub tolerance: f64,
    pub segment_length: f64,
    pub dt: f64,
    /// Maximum number of forward solves with a candidate per segment.
    pub max_inner: usize,
    pub eta_hat: EtaHatVariant,
    pub kernel: KernelConfig,
    /// Reconstruct `[0, horizon]` instead of the scenario horizon.
    pub horizon: Option<f64>,
    pub picard: bool,
    /// Calibrate the diagonal of the kernel after the first candidate.
    pub rescale: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: UpdateScheme::Bfg,
            tolerance: 0.1,
            segment_length: 0.1,
            dt: 0.0125,
            max_inner: 8,
            eta_hat: EtaHatVariant::Dual,
            kernel: KernelConfig::default(),
            horizon: None,
            picard: false,
            rescale: true,
        }
    }
}

impl RunConfig {
    /// Defaults with the scheme and tolerance of `scenario`.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self {
            scheme: scenario.scheme,
            tolerance: scenario.tolerance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_inner == 0 {
            return Err(Error::Config("at least one inner iteration is needed".into()));
        }
        SegmentGrid::new(0.0, self.segment_length, self.dt)?;
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(Error::Config(format!("horizon {h} must be positive")));
            }
        }
        Ok(())
    }
}

/// Solver sweeps spent on one segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentCounters {
    pub background: usize,
    pub adjoint: usize,
    pub forward: usize,
    pub dirichlet: usize,
}

impl SegmentCounters {
    pub fn total(&self) -> usize {
        self.background + self.adjoint + self.forward + self.dirichlet
    }

    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.background, self.adjoint, self.forward, self.dirichlet)
    }
}

/// Outcome of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Time average of the final estimate on the coarse mesh.
    pub estimate: CellField,
    /// Relative residual of the background prediction.
    pub background_residual: f64,
    /// Smallest relative residual among the candidates.
    pub residual: f64,
    /// Number of candidates tried.
    pub iterations: usize,
    pub updates: usize,
    pub skipped_updates: usize,
    /// The inner loop stopped at the iteration cap above tolerance.
    pub capped: bool,
    pub counters: SegmentCounters,
    pub kernel_rank: usize,
    pub kernel_scale: Vec<f64>,
}

/// Everything needed to continue a run after a given segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub next_segment: usize,
    /// State at the start of `next_segment` on the fine mesh.
    pub init: NodalField,
    pub kernel: ResolverKernel,
}

/// Reports of every segment processed by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub segments: Vec<SegmentReport>,
    pub state: RunState,
}

impl Reconstruction {
    /// Mean counters over all segments, in the order
    /// background, adjoint, forward, Dirichlet, total.
    pub fn mean_counters(&self) -> [f64; 5] {
        mean_counters(&self.segments)
    }
}

pub fn mean_counters(segments: &[SegmentReport]) -> [f64; 5] {
    let n = segments.len().max(1) as f64;
    let mut out = [0.0; 5];
    for s in segments {
        let c = &s.counters;
        for (o, v) in out
            .iter_mut()
            .zip([c.background, c.adjoint, c.forward, c.dirichlet, c.total()])
        {
            *o += v as f64;
        }
    }
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Segment-wise reconstruction on a fine state mesh and a coarse
/// inclusion mesh.
pub struct Reconstructor {
    scenario: Scenario,
    space: FemSpace,
    coarse: Mesh,
    transfer: TransferOps,
    forcing: SourceForcing,
    config: RunConfig,
    boundary_weights: Vec<f64>,
    segments: usize,
    time_weights: Vec<f64>,
}

impl Reconstructor {
    pub fn new(scenario: Scenario, fine: Mesh, coarse: Mesh, config: RunConfig) -> Result<Self> {
        config.validate()?;
        scenario.check()?;
        let horizon = config.horizon.unwrap_or(scenario.horizon);
        let ratio = horizon / config.segment_length;
        let segments = ratio.round();
        if segments < 1.0 || (ratio - segments).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "horizon {horizon} is not a multiple of the segment length {}",
                config.segment_length
            )));
        }
        let transfer = TransferOps::new(&fine, &coarse);
        let forcing = scenario.sources.forcing(&fine);
        let boundary_weights = fine.boundary_vertex_weights();
        let time_weights = SegmentGrid::new(0.0, config.segment_length, config.dt)?.trapezoid_weights();
        let space = FemSpace::new(fine)?;
        Ok(Self {
            scenario,
            space,
            coarse,
            transfer,
            forcing,
            config,
            boundary_weights,
            segments: segments as usize,
            time_weights,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn fine(&self) -> &Mesh {
        self.space.mesh()
    }

    pub fn coarse(&self) -> &Mesh {
        &self.coarse
    }

    pub fn transfer(&self) -> &TransferOps {
        &self.transfer
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn segment_count(&self) -> usize {
        self.segments
    }

    pub fn segment_grid(&self, index: usize) -> Result<SegmentGrid> {
        let len = self.config.segment_length;
        let t0 = index as f64 * len;
        let t1 = if index + 1 == self.segments {
            self.config.horizon.unwrap_or(self.scenario.horizon)
        } else {
            (index + 1) as f64 * len
        };
        SegmentGrid::new(t0, t1, self.config.dt)
    }

    /// Inner product shared by all kernels of this run.
    pub fn inner_product(&self) -> SpaceTimeInner {
        SpaceTimeInner::new(
            self.coarse.cell_areas.clone(),
            self.time_weights.clone(),
            self.scenario.components(),
        )
    }

    pub fn new_kernel(&self) -> Result<ResolverKernel> {
        ResolverKernel::new(&self.coarse, self.config.kernel, self.inner_product())
    }

    /// State before the first segment.
    pub fn initial_state(&self) -> Result<RunState> {
        Ok(RunState {
            next_segment: 0,
            init: self.scenario.sources.initial_state(self.fine()),
            kernel: self.new_kernel()?,
        })
    }

    /// Reconstructs the whole horizon.
    pub fn run(&self, data: &MeasurementSet) -> Result<Reconstruction> {
        self.run_from(data, self.initial_state()?, &mut |_, _| ControlFlow::Continue(()))
    }

    /// Continues from `state`, calling `observer` after every segment. The
    /// run stops early when the observer breaks.
    pub fn run_from(
        &self,
        data: &MeasurementSet,
        mut state: RunState,
        observer: &mut dyn FnMut(&SegmentReport, &RunState) -> ControlFlow<()>,
    ) -> Result<Reconstruction> {
        let horizon = self.config.horizon.unwrap_or(self.scenario.horizon);
        check_coverage(data, horizon, self.fine().boundary_count())?;
        check_len("initial state", self.fine().vertex_count(), state.init.len())?;
        let mut segments = Vec::new();
        while state.next_segment < self.segments {
            let report = self.segment(data, &mut state)?;
            let flow = observer(&report, &state);
            segments.push(report);
            if flow.is_break() {
                break;
            }
        }
        Ok(Reconstruction { segments, state })
    }

    fn relative_residual(&self, predicted: &BoundaryTrace, measured: &BoundaryTrace) -> Result<f64> {
        let diff = predicted.difference(measured)?;
        let den = measured.norm(&self.boundary_weights);
        Ok(diff.norm(&self.boundary_weights) / den.max(1e-300))
    }

    fn dual(&self, z: &Trajectory, y: &Trajectory) -> Result<SpaceTimeField> {
        local_dual(
            self.fine(),
            &self.transfer,
            &self.scenario.ops,
            self.scenario.components(),
            z,
            y,
        )
    }

    fn candidate(&self, kernel: &ResolverKernel, zeta: &SpaceTimeField) -> Result<(SpaceTimeField, CellField)> {
        let u = project(&kernel.apply(zeta)?, &self.scenario.bounds)?;
        let avg = u.time_average(&self.time_weights);
        Ok((u, avg))
    }

    /// Runs one segment and advances `state`.
    pub fn segment(&self, data: &MeasurementSet, state: &mut RunState) -> Result<SegmentReport> {
        let index = state.next_segment;
        let grid = self.segment_grid(index)?;
        let cfg = &self.config;
        let options = SolveOptions { picard: cfg.picard };
        let ops = &self.scenario.ops;
        let comps = self.scenario.components();
        let fine_cells = self.fine().cell_count();
        let start = self.space.stats();

        let measured = data.on_grid(&grid)?;
        let empty = CellField::zeros(comps, fine_cells);
        let y_bg = self
            .space
            .forward_solve(&grid, &empty, &[], &self.forcing, &state.init, options)?;
        let trace_bg = boundary_trace(&y_bg, self.fine())?;
        let background_residual = self.relative_residual(&trace_bg, &measured)?;
        let scattered = trace_bg.difference(&measured)?;
        let z = self.space.backward_adjoint_solve(&grid, &scattered)?;

        let kernel = &mut state.kernel;
        let mid = grid.steps / 2;
        let mut y_cur = y_bg;
        let mut best: Option<(f64, Trajectory)> = None;
        let (mut iterations, mut updates, mut skipped, mut capped) = (0, 0, 0, false);
        for k in 1..=cfg.max_inner {
            iterations = k;
            let zeta = self.dual(&z, &y_cur)?;
            let (u, avg) = self.candidate(kernel, &zeta)?;
            let medium = self.transfer.prolong(&avg)?;
            let y = self
                .space
                .forward_solve(&grid, &medium, ops, &self.forcing, &state.init, options)?;
            let trace = boundary_trace(&y, self.fine())?;
            let residual = self.relative_residual(&trace, &measured)?;
            log::trace!("segment {index} iteration {k}: residual {residual:.4}");
            y_cur = y;
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, y_cur.clone()));
            }
            if residual <= cfg.tolerance {
                break;
            }
            if k == cfg.max_inner {
                capped = true;
                log::warn!(
                    "segment {index}: residual {residual:.4} above tolerance {} after {k} iterations",
                    cfg.tolerance
                );
                break;
            }
            let scattered_hat = trace_bg.difference(&trace)?;
            let z_hat = self.space.backward_adjoint_solve(&grid, &scattered_hat)?;
            let zeta_hat = self.dual(&z_hat, &y_cur)?;
            if k == 1 && cfg.rescale {
                kernel.rescale(&u, &zeta_hat, mid)?;
            }
            let r_zeta_hat = kernel.apply(&zeta_hat)?;
            let eta = eta_hat(&u, &zeta_hat, &r_zeta_hat, &self.scenario.bounds, cfg.eta_hat)?;
            match kernel.update(cfg.scheme, &zeta_hat, &eta)? {
                UpdateOutcome::Applied { .. } => updates += 1,
                UpdateOutcome::Skipped { curvature } => {
                    skipped += 1;
                    log::debug!("segment {index}: update skipped, curvature {curvature:e}");
                }
            }
        }
        let (residual, y_best) = best.expect("at least one candidate");

        let zeta = self.dual(&z, &y_best)?;
        let (_, estimate) = self.candidate(kernel, &zeta)?;
        let medium = self.transfer.prolong(&estimate)?;
        let y_dir = self
            .space
            .dirichlet_solve(&grid, &medium, ops, &self.forcing, &measured, &state.init)?;
        state.init = y_dir.terminal().clone();
        kernel.damp();
        state.next_segment += 1;

        let counters = counters_between(start, self.space.stats());
        Ok(SegmentReport {
            index,
            t_start: grid.t_start,
            t_end: grid.t_end,
            estimate,
            background_residual,
            residual,
            iterations,
            updates,
            skipped_updates: skipped,
            capped,
            counters,
            kernel_rank: kernel.rank(),
            kernel_scale: kernel.scale().to_vec(),
        })
    }
}

fn counters_between(before: SolveStats, after: SolveStats) -> SegmentCounters {
    // the first Neumann sweep of a segment is the background solve
    let neumann = after.neumann - before.neumann;
    SegmentCounters {
        background: neumann.min(1),
        adjoint: after.adjoint - before.adjoint,
        forward: neumann.saturating_sub(1),
        dirichlet: after.dirichlet - before.dirichlet,
    }
}
