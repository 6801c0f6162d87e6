//! Generate, reconstruct, metrics and sweep drivers behind the CLI.

use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use idsm_core::fem::BoundaryTrace;
use idsm_core::idsm::{mean_counters, Reconstruction, Reconstructor, RunState, SegmentReport};
use idsm_core::mesh::build_disk_mesh;
use idsm_core::scenario::Scenario;
use idsm_core::synth::{reference_trace, MeasurementSet, ReferenceTrace};
use idsm_core::Mesh;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ScenarioFile};
use crate::error::{Error, Result};
use crate::formats::{self, read_string, write_string};
use crate::heatmap::{self, Raster};
use crate::metrics::{median, metrics_csv, parse_metrics_csv, Evaluator, MetricsRow, TruthMetrics};

/// Scenario and meshes of one configuration.
pub struct Setup {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub fine: Mesh,
    pub coarse: Mesh,
}

impl Setup {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let scenario = config.load_scenario()?;
        let fine = build_disk_mesh(config.fine_cells)?;
        let coarse = build_disk_mesh(config.coarse_cells)?;
        Ok(Self {
            config,
            scenario,
            fine,
            coarse,
        })
    }

    /// Same meshes and scenario with different run knobs.
    pub fn with_config(&self, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let scenario = config.load_scenario()?;
        let fine = if config.fine_cells == self.config.fine_cells {
            self.fine.clone()
        } else {
            build_disk_mesh(config.fine_cells)?
        };
        let coarse = if config.coarse_cells == self.config.coarse_cells {
            self.coarse.clone()
        } else {
            build_disk_mesh(config.coarse_cells)?
        };
        Ok(Self {
            config,
            scenario,
            fine,
            coarse,
        })
    }

    /// Runs the reference forward problem.
    pub fn reference(&self) -> Result<ReferenceTrace> {
        let started = Instant::now();
        let r = reference_trace(&self.scenario, &self.config.reference())?;
        log::info!(
            "reference trace for {} on {} cells in {:.1?}",
            self.scenario.name,
            self.config.reference_cells,
            started.elapsed()
        );
        Ok(r)
    }

    pub fn clean(&self, reference: &ReferenceTrace) -> Result<BoundaryTrace> {
        Ok(reference.on_mesh(&self.scenario, &self.fine)?)
    }

    pub fn measurements(&self, clean: BoundaryTrace) -> Result<MeasurementSet> {
        Ok(MeasurementSet::new(clean, self.config.noise, self.config.seed)?)
    }

    pub fn reconstructor(&self) -> Result<Reconstructor> {
        let solver = self.config.solver(&self.scenario)?;
        Ok(Reconstructor::new(
            self.scenario.clone(),
            self.fine.clone(),
            self.coarse.clone(),
            solver,
        )?)
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(self.coarse.clone())
    }
}

/// Instant at which a segment estimate is compared with the truth.
pub fn segment_time(report: &SegmentReport) -> f64 {
    0.5 * (report.t_start + report.t_end)
}

/// Truth metrics of every segment of a run.
pub fn evaluate_segments(
    evaluator: &Evaluator,
    scenario: &Scenario,
    segments: &[SegmentReport],
) -> Result<Vec<(MetricsRow, TruthMetrics)>> {
    segments
        .iter()
        .map(|r| {
            let truth = evaluator.evaluate(scenario, &r.estimate, segment_time(r))?;
            Ok((MetricsRow::new(r, &truth), truth))
        })
        .collect()
}

/// Provenance of a measurement directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataInfo {
    pub scenario: String,
    pub samples: usize,
    pub boundary: usize,
    pub reference_cells: usize,
    pub reference_dt: f64,
    pub fine_cells: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub data: DataInfo,
    pub config: RunConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&read_string(path)?).map_err(|e| Error::format(path, 0, e.to_string()))
    }
}

/// Writes clean and noisy traces, the scenario and a manifest into `out`.
pub fn generate(config: &RunConfig, out: &Path) -> Result<MeasurementSet> {
    let setup = Setup::new(config.clone())?;
    let reference = setup.reference()?;
    let set = setup.measurements(setup.clean(&reference)?)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    formats::write_measurements(out, &set)?;
    write_string(
        &out.join("scenario.toml"),
        &ScenarioFile::from_scenario(&setup.scenario).to_toml(),
    )?;
    let manifest = Manifest {
        data: DataInfo {
            scenario: setup.scenario.name.clone(),
            samples: set.clean.len(),
            boundary: set.boundary_count(),
            reference_cells: config.reference_cells,
            reference_dt: config.reference_dt,
            fine_cells: config.fine_cells,
            noise: config.noise,
            seed: config.seed,
        },
        config: config.clone(),
    };
    write_string(
        &out.join("manifest.toml"),
        &toml::to_string(&manifest).expect("manifest serializes"),
    )?;
    log::info!(
        "wrote {} samples on {} boundary vertices to {}",
        set.clean.len(),
        set.boundary_count(),
        out.display()
    );
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconstructOptions {
    /// Continue from the checkpoint in the output directory.
    pub resume: bool,
    pub heatmaps: bool,
    /// Stop after this many segments of the current invocation.
    pub max_segments: Option<usize>,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            resume: false,
            heatmaps: true,
            max_segments: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    next_segment: usize,
    fine_vertices: usize,
    coarse_cells: usize,
}

/// Result of a reconstruct invocation.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<MetricsRow>,
    /// Every segment of the run so far was processed.
    pub complete: bool,
    pub segment_count: usize,
}

/// Runs the reconstruction on the measurements in `data`, writing
/// estimates, heatmaps, metrics and a checkpoint into `config.output`.
pub fn reconstruct(config: &RunConfig, data: &Path, options: ReconstructOptions) -> Result<RunSummary> {
    let setup = Setup::new(config.clone())?;
    let set = formats::read_measurements(data)?;
    if set.boundary_count() != setup.fine.boundary_count() {
        return Err(Error::Config(format!(
            "measurements have {} boundary vertices, the {}-cell mesh has {}",
            set.boundary_count(),
            config.fine_cells,
            setup.fine.boundary_count()
        )));
    }
    let out = config.output.clone();
    let recon = setup.reconstructor()?;
    let evaluator = setup.evaluator();
    let raster = options.heatmaps.then(|| Raster::new(&setup.coarse, heatmap::SIZE));
    let comps = setup.scenario.components();

    let config_path = out.join("config.toml");
    let ckpt_dir = out.join("checkpoint");
    let (state, mut rows) = if options.resume && ckpt_dir.join("state.toml").exists() {
        let saved = RunConfig::load(&config_path)?;
        if saved != *config {
            return Err(Error::Config(format!(
                "{} was written with different settings; resume needs the same configuration",
                config_path.display()
            )));
        }
        let state = load_checkpoint(&ckpt_dir, &recon)?;
        let metrics_path = out.join("metrics.csv");
        let mut rows = parse_metrics_csv(&metrics_path, &read_string(&metrics_path)?)?;
        rows.retain(|r| r.segment < state.next_segment);
        log::info!("resuming at segment {}", state.next_segment);
        (state, rows)
    } else {
        (recon.initial_state()?, Vec::new())
    };

    fs::create_dir_all(out.join("u")).map_err(|e| Error::io(&out, e))?;
    if raster.is_some() {
        fs::create_dir_all(out.join("heat")).map_err(|e| Error::io(&out, e))?;
    }
    write_string(&config_path, &config.to_toml())?;
    formats::write_mesh(&out.join("coarse.mesh"), &setup.coarse)?;

    let started = Instant::now();
    let mut failure = None;
    let mut done = 0;
    let result = recon.run_from(&set, state, &mut |report, state| {
        let mut step = || -> Result<()> {
            let name = format!("seg_{:03}", report.index);
            write_string(
                &out.join("u").join(format!("{name}.csv")),
                &formats::cell_field_to_csv(&report.estimate),
            )?;
            let t = segment_time(report);
            if let Some(raster) = &raster {
                for l in 0..comps {
                    let values = report.estimate.component(l);
                    let mask = raster.truth_mask(&setup.scenario, l, t);
                    let stem = out.join("heat").join(format!("{name}_c{l}"));
                    heatmap::write_bytes(
                        &stem.with_extension("pgm"),
                        &heatmap::encode_pgm(raster.size(), &raster.grayscale(values)),
                    )?;
                    heatmap::write_bytes(
                        &stem.with_extension("ppm"),
                        &heatmap::encode_ppm(raster.size(), &raster.color(values, Some(&mask))),
                    )?;
                }
            }
            let truth = evaluator.evaluate(&setup.scenario, &report.estimate, t)?;
            rows.push(MetricsRow::new(report, &truth));
            write_string(&out.join("metrics.csv"), &metrics_csv(comps, &rows))?;
            save_checkpoint(&ckpt_dir, state)?;
            log::info!(
                "segment {:>3} [{:.2}, {:.2}] residual {:.4} iterations {} solves {}",
                report.index,
                report.t_start,
                report.t_end,
                report.residual,
                report.iterations,
                report.counters.total()
            );
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
            return ControlFlow::Break(());
        }
        done += 1;
        if options.max_segments.is_some_and(|m| done >= m) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    log::info!("{} segments in {:.1?}", result.segments.len(), started.elapsed());
    let complete = result.state.next_segment == recon.segment_count();
    write_string(&out.join("summary.txt"), &summary_text(&setup, &rows, &result))?;
    Ok(RunSummary {
        rows,
        complete,
        segment_count: recon.segment_count(),
    })
}

fn save_checkpoint(dir: &Path, state: &RunState) -> Result<()> {
    let ckpt = Checkpoint {
        next_segment: state.next_segment,
        fine_vertices: state.init.len(),
        coarse_cells: state.kernel.inner_product().areas.len(),
    };
    write_string(&dir.join("terminal.txt"), &formats::nodal_to_string(&state.init))?;
    formats::write_kernel(&dir.join("kernel.bin"), &state.kernel)?;
    write_string(
        &dir.join("state.toml"),
        &toml::to_string(&ckpt).expect("checkpoint serializes"),
    )
}

fn load_checkpoint(dir: &Path, recon: &Reconstructor) -> Result<RunState> {
    let path = dir.join("state.toml");
    let ckpt: Checkpoint = toml::from_str(&read_string(&path)?).map_err(|e| Error::format(&path, 0, e.to_string()))?;
    if ckpt.fine_vertices != recon.fine().vertex_count() || ckpt.coarse_cells != recon.coarse().cell_count() {
        return Err(Error::format(&path, 0, "checkpoint meshes do not match the run"));
    }
    let init = formats::read_nodal(&dir.join("terminal.txt"))?;
    if init.len() != ckpt.fine_vertices {
        return Err(Error::format(
            &dir.join("terminal.txt"),
            0,
            "state length does not match the mesh",
        ));
    }
    let kernel = formats::read_kernel(
        &dir.join("kernel.bin"),
        recon.coarse(),
        recon.config().kernel,
        recon.inner_product(),
    )?;
    Ok(RunState {
        next_segment: ckpt.next_segment,
        init,
        kernel,
    })
}

/// Mean solver counts per segment reported for the builtin cases, in the
/// order background, adjoint, forward, Dirichlet, total.
pub fn reference_counters(scenario: &str, noise: f64) -> Option<[f64; 5]> {
    let near = |x: f64| (noise - x).abs() < 1e-9;
    match scenario {
        "ex1" if near(0.05) => Some([1.0, 1.01, 1.01, 1.0, 4.02]),
        "ex1" if near(0.10) => Some([1.0, 1.11, 1.11, 1.0, 4.22]),
        "ex2" if near(0.05) => Some([1.0, 1.01, 1.01, 1.0, 4.02]),
        "ex3" if near(0.05) => Some([1.0, 2.73, 2.73, 1.0, 7.46]),
        "ex4" if near(0.05) => Some([1.0, 1.02, 1.02, 1.0, 4.04]),
        "ex5" if near(0.05) => Some([1.0, 1.01, 1.01, 1.0, 4.02]),
        _ => None,
    }
}

fn counter_means(rows: &[MetricsRow]) -> [f64; 5] {
    let n = rows.len().max(1) as f64;
    let mut out = [0.0; 5];
    for r in rows {
        let c = &r.counters;
        for (o, v) in out
            .iter_mut()
            .zip([c.background, c.adjoint, c.forward, c.dirichlet, c.total()])
        {
            *o += v as f64 / n;
        }
    }
    out
}

fn summary_text(setup: &Setup, rows: &[MetricsRow], result: &Reconstruction) -> String {
    let cfg = &setup.config;
    let s = &setup.scenario;
    let mut out = String::new();
    let _ = writeln!(out, "scenario   {}", s.name);
    let _ = writeln!(out, "scheme     {}", s.scheme.name());
    let _ = writeln!(out, "tolerance  {}", s.tolerance);
    let _ = writeln!(out, "noise      {}", cfg.noise);
    let _ = writeln!(out, "seed       {}", cfg.seed);
    let _ = writeln!(out, "meshes     fine {} / coarse {}", cfg.fine_cells, cfg.coarse_cells);
    let _ = writeln!(out, "segments   {}", rows.len());
    let _ = writeln!(out, "capped     {}", rows.iter().filter(|r| r.capped).count());
    let _ = writeln!(out, "kernel     rank {}", result.state.kernel.rank());
    let _ = writeln!(out);
    let _ = writeln!(out, "mean solves per segment");
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>8} {:>8} {:>9} {:>7}",
        "", "background", "adjoint", "forward", "dirichlet", "total"
    );
    let mut line = |label: &str, v: [f64; 5]| {
        let _ = writeln!(
            out,
            "{label:<10} {:>10.2} {:>8.2} {:>8.2} {:>9.2} {:>7.2}",
            v[0], v[1], v[2], v[3], v[4]
        );
    };
    line("this run", counter_means(rows));
    if let Some(r) = reference_counters(&s.name, cfg.noise) {
        line("reference", r);
    }
    let _ = writeln!(out);
    for l in 0..s.components() {
        let _ = writeln!(
            out,
            "median jaccard u{l}       {:.4}",
            median(rows.iter().map(|r| r.jaccard[l]))
        );
    }
    let _ = writeln!(
        out,
        "median centroid error   {:.4}",
        median(rows.iter().map(|r| r.centroid_error))
    );
    let _ = writeln!(
        out,
        "median residual         {:.4}",
        median(rows.iter().map(|r| r.residual))
    );
    out
}

/// Per-segment truth comparison recomputed from the estimates of a run
/// directory.
pub fn metrics(run: &Path) -> Result<Vec<(usize, f64, TruthMetrics)>> {
    let config = RunConfig::load(&run.join("config.toml"))?;
    let scenario = config.load_scenario()?;
    let coarse = formats::read_mesh(&run.join("coarse.mesh"))?;
    let evaluator = Evaluator::new(coarse);
    let dir = run.join("u");
    let mut files: Vec<(usize, PathBuf)> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let index = name.strip_prefix("seg_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((index, e.path()))
        })
        .collect();
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for (index, path) in files {
        let estimate = formats::read_cell_field_csv(&path)?;
        let t = (index as f64 + 0.5) * config.segment_length;
        out.push((index, t, evaluator.evaluate(&scenario, &estimate, t)?));
    }
    let comps = scenario.components();
    let mut csv = String::from("segment,t");
    for l in 0..comps {
        let _ = write!(csv, ",jaccard_{l}");
    }
    for l in 0..comps {
        let _ = write!(csv, ",area_{l}");
    }
    csv.push_str(",centroid_error,regions\n");
    for (index, t, m) in &out {
        let _ = write!(csv, "{index},{t}");
        for j in &m.jaccard {
            let _ = write!(csv, ",{j}");
        }
        for a in &m.support_area {
            let _ = write!(csv, ",{a}");
        }
        let _ = writeln!(csv, ",{},{}", m.centroid_error(), m.centroid_errors.len());
    }
    write_string(&run.join("truth_metrics.csv"), &csv)?;
    Ok(out)
}

/// Grid of settings explored by [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub noise: Vec<f64>,
    pub damping: Vec<f64>,
    pub schemes: Vec<String>,
    pub seeds: Vec<u64>,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise: f64,
    pub damping: f64,
    pub scheme: String,
    pub seed: u64,
    pub counters: [f64; 5],
    pub median_jaccard: f64,
    pub median_centroid_error: f64,
    pub capped: usize,
}

/// Reconstructs every point of `grid` from one shared reference trace and
/// writes `sweep.csv` into `base.output`.
pub fn sweep(base: &RunConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let setup = Setup::new(base.clone())?;
    let clean = setup.clean(&setup.reference()?)?;
    let mut jobs = Vec::new();
    for &noise in &grid.noise {
        for &damping in &grid.damping {
            for scheme in &grid.schemes {
                for &seed in &grid.seeds {
                    let mut c = base.clone();
                    c.noise = noise;
                    c.damping = damping;
                    c.scheme = Some(scheme.clone());
                    c.seed = seed;
                    c.validate()?;
                    jobs.push(c);
                }
            }
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepRow>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let threads = grid.threads.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let row = sweep_point(&setup, &clean, job);
                results.lock().expect("sweep results lock")[i] = Some(row);
            });
        }
    });
    let rows = results
        .into_inner()
        .expect("sweep results lock")
        .into_iter()
        .map(|r| r.expect("every sweep job ran"))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from(
        "noise,damping,scheme,seed,background,adjoint,forward,dirichlet,total,median_jaccard,median_centroid_error,capped\n",
    );
    for r in &rows {
        let c = &r.counters;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.noise,
            r.damping,
            r.scheme,
            r.seed,
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            r.median_jaccard,
            r.median_centroid_error,
            r.capped
        );
    }
    write_string(&base.output.join("sweep.csv"), &csv)?;
    Ok(rows)
}

fn sweep_point(base: &Setup, clean: &BoundaryTrace, config: &RunConfig) -> Result<SweepRow> {
    let setup = base.with_config(config.clone())?;
    let set = setup.measurements(clean.clone())?;
    let recon = setup.reconstructor()?;
    let result = recon.run(&set)?;
    let evaluated = evaluate_segments(&setup.evaluator(), &setup.scenario, &result.segments)?;
    log::info!(
        "sweep point noise {} damping {} scheme {} seed {} done",
        config.noise,
        config.damping,
        setup.scenario.scheme.name(),
        config.seed
    );
    Ok(SweepRow {
        noise: config.noise,
        damping: config.damping,
        scheme: setup.scenario.scheme.name().to_string(),
        seed: config.seed,
        counters: mean_counters(&result.segments),
        median_jaccard: median(evaluated.iter().map(|(r, _)| r.jaccard[0])),
        median_centroid_error: median(evaluated.iter().map(|(r, _)| r.centroid_error)),
        capped: result.segments.iter().filter(|s| s.capped).count(),
    })
}
