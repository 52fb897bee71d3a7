use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::Parser;

use wnmf_cluster::cli::{error_code, load_manifest, run, Mode, RunConfig};
use wnmf_cluster::temporal_scan::PipelineConfig;
use wnmf_cluster::wnmf::SolverConfig;

/// Cluster nonnegative time series by weighted NMF + k-means and scan nested
/// time windows for changes in the cluster structure.
#[derive(Parser, Debug)]
#[command(name = "wnmf-cluster", version)]
struct Args {
    /// Replay a previously written manifest; all other flags are ignored.
    #[arg(long)]
    from_manifest: Option<PathBuf>,

    /// single | scan | compare | validate
    #[arg(long, default_value = "single")]
    mode: String,

    /// Counts CSV (wide by default: entity,<ISO date>,...)
    #[arg(long, required_unless_present = "from_manifest")]
    counts: Option<PathBuf>,

    /// Population CSV: entity,population
    #[arg(long, required_unless_present = "from_manifest")]
    population: Option<PathBuf>,

    /// Counts CSV is in long format (entity,date,count)
    #[arg(long)]
    long_format: bool,

    /// Treat unreported (entity, day) pairs as zero new cases
    #[arg(long)]
    fill_gaps_zero: bool,

    /// Analysis start date (default: first date in the data)
    #[arg(long)]
    start: Option<NaiveDate>,

    /// Analysis end date (default: last date in the data)
    #[arg(long)]
    end: Option<NaiveDate>,

    /// Scan mode: end date of the first window
    #[arg(long)]
    first_end: Option<NaiveDate>,

    /// Compare mode: end date of the second window
    #[arg(long)]
    end_b: Option<NaiveDate>,

    /// Rank candidates, inclusive range `lo..hi`
    #[arg(long, default_value = "2..12", value_parser = parse_range)]
    ranks: Vec<usize>,

    /// Cross-validation fold count
    #[arg(long, default_value_t = 10)]
    folds: usize,

    /// Number of seeded fold plans to average the MSPE over
    #[arg(long, default_value_t = 1)]
    cv_repeats: usize,

    /// k-means restarts
    #[arg(long, default_value_t = 500)]
    restarts: usize,

    /// Cluster-count candidates, inclusive range `lo..hi`
    #[arg(long, default_value = "2..10", value_parser = parse_range)]
    g_range: Vec<usize>,

    /// Fix the cluster count instead of using the elbow suggestion
    #[arg(long)]
    clusters: Option<usize>,

    /// Master RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Solver iteration cap
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,

    /// Solver stationarity tolerance, relative to the initial cost
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,

    /// Successive iterations inspected by the stopping rule
    #[arg(long, default_value_t = 40)]
    stationarity_window: usize,

    /// Flag a window when its consecutive ARI is below this value...
    #[arg(long, default_value_t = 0.5)]
    ari_flag_abs: f64,

    /// ...and the drop from the previous consecutive ARI exceeds this value
    #[arg(long, default_value_t = 0.3)]
    ari_flag_drop: f64,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Emit extra per-fold and per-iteration tables
    #[arg(long)]
    diagnostics: bool,

    /// Cap the worker thread count
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let hi: usize = hi.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if lo > hi {
            return Err(format!("empty range {s}"));
        }
        Ok((lo..=hi).collect())
    } else {
        let single: usize = s.trim().parse().map_err(|e| format!("bad value: {e}"))?;
        Ok(vec![single])
    }
}

fn config_from_args(args: &Args) -> Result<RunConfig, String> {
    let mode = match args.mode.as_str() {
        "single" => Mode::Single,
        "scan" => Mode::Scan,
        "compare" => Mode::Compare,
        "validate" => Mode::Validate,
        other => return Err(format!("unknown mode `{other}`")),
    };
    Ok(RunConfig {
        mode,
        counts: args.counts.clone().expect("clap enforces presence"),
        population: args.population.clone().expect("clap enforces presence"),
        long_format: args.long_format,
        fill_gaps_zero: args.fill_gaps_zero,
        start: args.start,
        end: args.end,
        first_end: args.first_end,
        end_b: args.end_b,
        pipeline: PipelineConfig {
            rank_candidates: args.ranks.clone(),
            folds: args.folds,
            cv_repeats: args.cv_repeats,
            restarts: args.restarts,
            g_candidates: args.g_range.clone(),
            manual_g: args.clusters,
            seed: args.seed,
            solver: SolverConfig {
                max_iterations: args.max_iterations,
                tolerance: args.tolerance,
                stationarity_window: args.stationarity_window,
                epsilon_guard: 1e-12,
            },
            ari_flag_abs: args.ari_flag_abs,
            ari_flag_drop: args.ari_flag_drop,
        },
        out: args.out.clone(),
        diagnostics: args.diagnostics,
        threads: args.threads,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = if let Some(path) = &args.from_manifest {
        match load_manifest(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error[{}]: {e}", error_code(&e));
                return ExitCode::FAILURE;
            }
        }
    } else {
        match config_from_args(&args) {
            Ok(cfg) => cfg,
            Err(message) => {
                eprintln!("error[E_ARGS]: {message}");
                return ExitCode::FAILURE;
            }
        }
    };

    match run(&cfg) {
        Ok(Some(report)) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", error_code(&e));
            ExitCode::FAILURE
        }
    }
}
