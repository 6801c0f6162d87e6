use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idsm::pipeline::{self, ReconstructOptions, SweepGrid};
use idsm::{Result, RunConfig};

#[derive(Parser)]
#[command(
    name = "idsm",
    version,
    about = "Segment-wise tracking of moving inclusions from boundary data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize clean and noisy boundary measurements.
    Generate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Reconstruct inclusions from a measurement directory.
    Reconstruct {
        #[command(flatten)]
        run: RunArgs,
        /// Directory written by `generate`.
        #[arg(long)]
        data: PathBuf,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        no_heatmaps: bool,
        /// Stop after this many segments.
        #[arg(long)]
        max_segments: Option<usize>,
    },
    /// Recompute truth metrics from the estimates of a run directory.
    Metrics { run: PathBuf },
    /// Reconstruct over a grid of settings from one reference trace.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        noise_levels: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.6")]
        dampings: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "dfp,bfg")]
        schemes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin scenario (ex1..ex5) or scenario file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    segment_length: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    reference_cells: Option<usize>,
    #[arg(long)]
    reference_dt: Option<f64>,
    #[arg(long)]
    fine_cells: Option<usize>,
    #[arg(long)]
    coarse_cells: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// dfp or bfg.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    rank_cap: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    /// dual or resolved.
    #[arg(long)]
    eta_hat: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    picard: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            scenario,
            noise,
            seed,
            segment_length,
            dt,
            reference_cells,
            reference_dt,
            fine_cells,
            coarse_cells
        );
        set!(nu, cutoff, damping, rank_cap, max_inner, eta_hat, output);
        if self.tolerance.is_some() {
            c.tolerance = self.tolerance;
        }
        if self.scheme.is_some() {
            c.scheme = self.scheme;
        }
        if self.horizon.is_some() {
            c.horizon = self.horizon;
        }
        c.picard |= self.picard;
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { run } => {
            let c = run.resolve()?;
            pipeline::generate(&c, &c.output)?;
        }
        Command::Reconstruct {
            run,
            data,
            resume,
            no_heatmaps,
            max_segments,
        } => {
            let c = run.resolve()?;
            let options = ReconstructOptions {
                resume,
                heatmaps: !no_heatmaps,
                max_segments,
            };
            let summary = pipeline::reconstruct(&c, &data, options)?;
            print!("{}", idsm::formats::read_string(&c.output.join("summary.txt"))?);
            if !summary.complete {
                println!(
                    "stopped after {} of {} segments",
                    summary.rows.len(),
                    summary.segment_count
                );
            }
        }
        Command::Metrics { run } => {
            let rows = pipeline::metrics(&run)?;
            let j = idsm::metrics::median(rows.iter().map(|(_, _, m)| m.jaccard[0]));
            let e = idsm::metrics::median(rows.iter().map(|(_, _, m)| m.centroid_error()));
            println!(
                "segments {}  median jaccard {j:.4}  median centroid error {e:.4}",
                rows.len()
            );
        }
        Command::Sweep {
            run,
            noise_levels,
            dampings,
            schemes,
            seeds,
            threads,
        } => {
            let c = run.resolve()?;
            let grid = SweepGrid {
                noise: noise_levels,
                damping: dampings,
                schemes,
                seeds,
                threads,
            };
            let rows = pipeline::sweep(&c, &grid)?;
            println!(
                "{} sweep points written to {}",
                rows.len(),
                c.output.join("sweep.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
