//! Command-line front end for instance generation, solving, and the
//! experiment harness.
//!
//! Exit codes: 0 on completion, 2 for invalid configuration or input,
//! 3 for I/O failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use syncluster_core::{
    clustering_error, emit_heatmap, estimation_error, generate, phase_csv, read_instance,
    run_convergence, run_gpm, run_phase, run_timing, timing_csv, write_instance,
    convergence_csv, Error, ExperimentGrid, GpmConfig, GroupKind, InitKind, Rates, Result,
    SgbmParams, TimingPlan,
};

/// Caps applied unless --full is given, keeping casual runs at desk scale.
const DESK_TRIALS: usize = 20;
const DESK_AXIS: usize = 15;

#[derive(Parser)]
#[command(name = "syncluster", version, about = "Joint community detection and group synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    /// Orthogonal blocks.
    O,
    /// Special orthogonal (rotation) blocks.
    So,
}

impl Group {
    fn kind(self, d: usize) -> GroupKind {
        match self {
            Group::O => GroupKind::Orthogonal(d),
            Group::So => GroupKind::SpecialOrthogonal(d),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Spectral,
    Identity,
}

impl From<Init> for InitKind {
    fn from(init: Init) -> Self {
        match init {
            Init::Spectral => InitKind::Spectral,
            Init::Identity => InitKind::Identity,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a model instance and write it to a file.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum)]
        group: Group,
        /// Same-cluster rate on the logarithmic scale.
        #[arg(long)]
        alpha: f64,
        /// Cross-cluster rate on the logarithmic scale.
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a stored instance and report the recovery quality.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Init::Spectral)]
        init: Init,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Write per-iterate diagnostics to this CSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a success-rate grid, writing a CSV table and an SVG heatmap.
    Phase {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out-csv")]
        out_csv: PathBuf,
        #[arg(long = "out-svg")]
        out_svg: PathBuf,
        /// Run the configured sizes as-is instead of capping at desk scale.
        #[arg(long)]
        full: bool,
    },
    /// Trace per-iterate error for several seeds, one CSV per seed.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure median solve times over a list of sizes.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Deserialize)]
struct ConvergeConfig {
    n: usize,
    k: usize,
    kind: GroupKind,
    alpha: f64,
    beta: f64,
    seeds: Vec<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { n, k, d, group, alpha, beta, seed, out } => {
            let params = SgbmParams::new(n, k, group.kind(d), Rates::Logarithmic { alpha, beta })?;
            let (truth, obs) = generate(&params, seed)?;
            write_instance(&out, &truth, &obs)?;
            println!(
                "wrote {}: n={n} K={k} group={} alpha={alpha} beta={beta} seed={seed} edges={}",
                out.display(),
                params.kind,
                obs.edges().len()
            );
            Ok(())
        }
        Command::Solve { input, init, max_iters, tol, trace } => {
            let (truth, obs) = read_instance(&input)?;
            let params = truth.params;
            let v0 = syncluster_core::build_init(&obs, params.k, InitKind::from(init), truth.seed)?;
            let cfg = GpmConfig { max_iters, tol, track_error: Some(&truth), ..GpmConfig::default() };
            let (state, gpm_trace) = run_gpm(&obs, &v0, params.kind, &cfg)?;
            let final_error = estimation_error(&state, &truth, params.kind)?;
            let label_error = clustering_error(state.labels(), &truth.labels, params.k)?;
            println!(
                "solved {}: n={} K={} group={}",
                input.display(),
                params.n,
                params.k,
                params.kind
            );
            println!(
                "iterates={} converged={} objective={}",
                gpm_trace.iterates_used,
                gpm_trace.converged,
                gpm_trace.per_iter_objective[gpm_trace.iterates_used]
            );
            println!("final_error={final_error}");
            println!("clustering_error={label_error}");
            if let Some(path) = trace {
                fs::write(&path, gpm_trace.to_csv())?;
                println!("trace written to {}", path.display());
            }
            Ok(())
        }
        Command::Phase { config, out_csv, out_svg, full } => {
            let mut grid: ExperimentGrid = load_config(&config)?;
            if !full {
                let mut capped = false;
                if grid.trials > DESK_TRIALS {
                    grid.trials = DESK_TRIALS;
                    capped = true;
                }
                if grid.alpha_values.len() > DESK_AXIS {
                    grid.alpha_values.truncate(DESK_AXIS);
                    capped = true;
                }
                if grid.beta_values.len() > DESK_AXIS {
                    grid.beta_values.truncate(DESK_AXIS);
                    capped = true;
                }
                if capped {
                    eprintln!(
                        "note: capped to {DESK_TRIALS} trials and {DESK_AXIS}x{DESK_AXIS} cells; pass --full to run the configured sizes"
                    );
                }
            }
            grid.validate()?;
            let result = run_phase(&grid)?;
            fs::write(&out_csv, phase_csv(&result))?;
            fs::write(&out_svg, emit_heatmap(&grid, &result)?)?;
            let cells = grid.alpha_values.len() * grid.beta_values.len();
            println!(
                "phase grid done: {cells} cells x {} trials, {} trial errors; wrote {} and {}",
                grid.trials,
                result.failures.len(),
                out_csv.display(),
                out_svg.display()
            );
            for failure in &result.failures {
                eprintln!(
                    "trial error at alpha={} beta={} trial={}: {}",
                    grid.alpha_values[failure.alpha_index],
                    grid.beta_values[failure.beta_index],
                    failure.trial,
                    failure.reason
                );
            }
            Ok(())
        }
        Command::Converge { config, out } => {
            let cfg: ConvergeConfig = load_config(&config)?;
            let params = SgbmParams::new(
                cfg.n,
                cfg.k,
                cfg.kind,
                Rates::Logarithmic { alpha: cfg.alpha, beta: cfg.beta },
            )?;
            let runs = run_convergence(&params, &cfg.seeds)?;
            fs::create_dir_all(&out)?;
            for run in &runs {
                let path = out.join(format!("converge_seed_{}.csv", run.seed));
                fs::write(&path, convergence_csv(run))?;
                println!(
                    "seed {}: iterates={} converged={} final_error={}",
                    run.seed, run.trace.iterates_used, run.trace.converged, run.final_error
                );
            }
            println!("{} traces written to {}", runs.len(), out.display());
            Ok(())
        }
        Command::Bench { config, out } => {
            let plan: TimingPlan = load_config(&config)?;
            let rows = run_timing(&plan)?;
            fs::write(&out, timing_csv(&rows))?;
            for row in &rows {
                println!("n={} alpha={} beta={}: median {}s over {} reps", row.n, row.alpha, row.beta, row.median_seconds, row.reps);
            }
            Ok(())
        }
    }
}
