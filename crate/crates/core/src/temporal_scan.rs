//! Nested-window scan: run the full pipeline per window, track consecutive
//! ARI, and flag candidate structural changes.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::compare::{adjusted_rand_index, AriValue, Partition};
use crate::error::{Error, Result};
use crate::kmeans::{elbow_scan, kmeans_best_of, ClusterResult, ElbowCurve};
use crate::rank_select::{select_rank, RankScore};
use crate::types::SeriesMatrix;
use crate::wnmf::{random_init, solve, SolverConfig};

/// Fixed-start windows with weekly-incremented end dates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSpec {
    pub start_date: NaiveDate,
    pub end_dates: Vec<NaiveDate>,
    pub labels: Vec<String>,
}

/// Everything the pipeline learned about a single window.
#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub rank: usize,
    pub g: usize,
    pub cluster: ClusterResult,
    pub rank_scores: Vec<RankScore>,
    pub elbow: Option<ElbowCurve>,
    pub final_cost: f64,
    pub solver_converged: bool,
    pub w: ndarray::Array2<f64>,
    pub h: ndarray::Array2<f64>,
}

impl WindowOutcome {
    pub fn partition(&self, entity_labels: &[String]) -> Partition {
        Partition::from_assignments(entity_labels, &self.cluster.assignments)
    }
}

/// One scan entry: a finished window or the error that stopped it.
#[derive(Debug)]
pub enum WindowRecord {
    Done(Box<WindowOutcome>),
    Failed { label: String, error: String },
}

impl WindowRecord {
    pub fn outcome(&self) -> Option<&WindowOutcome> {
        match self {
            WindowRecord::Done(o) => Some(o),
            WindowRecord::Failed { .. } => None,
        }
    }
}

/// Scan output: per-window results, the consecutive ARI series, and the
/// windows where the drop rule fired.
#[derive(Debug)]
pub struct ScanResult {
    pub per_window: Vec<WindowRecord>,
    /// ARI between consecutive windows; `None` when either side failed.
    pub ari_series: Vec<Option<f64>>,
    pub flagged_windows: Vec<String>,
}

/// Knobs for one pipeline run on a window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub rank_candidates: Vec<usize>,
    pub folds: usize,
    pub cv_repeats: usize,
    pub restarts: usize,
    pub g_candidates: Vec<usize>,
    pub manual_g: Option<usize>,
    pub seed: u64,
    pub solver: SolverConfig,
    pub ari_flag_abs: f64,
    pub ari_flag_drop: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rank_candidates: (2..=12).collect(),
            folds: 10,
            cv_repeats: 1,
            restarts: 500,
            g_candidates: (2..=10).collect(),
            manual_g: None,
            seed: 0,
            solver: SolverConfig::default(),
            ari_flag_abs: 0.5,
            ari_flag_drop: 0.3,
        }
    }
}

fn check_aligned(start: NaiveDate, end: NaiveDate) -> Result<()> {
    let span = (end - start).num_days() + 1;
    if span < 7 || span % 7 != 0 {
        return Err(Error::MisalignedWindow { start, end });
    }
    Ok(())
}

/// Windows sharing `start`, with end dates stepping by 7 days from
/// `first_end` through `last_end`. Every end must sit at `start + 7k - 1`.
pub fn build_windows(
    series: &SeriesMatrix,
    start: NaiveDate,
    first_end: NaiveDate,
    last_end: NaiveDate,
) -> Result<WindowSpec> {
    if !series.dates.contains(&start) {
        return Err(Error::InvalidInput(format!("start date {start} not in series")));
    }
    if !series.dates.contains(&last_end) {
        return Err(Error::InvalidInput(format!("end date {last_end} not in series")));
    }
    check_aligned(start, first_end)?;
    check_aligned(start, last_end)?;
    if last_end < first_end {
        return Err(Error::InvalidInput(format!(
            "last end {last_end} precedes first end {first_end}"
        )));
    }

    let mut end_dates = Vec::new();
    let mut end = first_end;
    while end <= last_end {
        end_dates.push(end);
        end = end + Days::new(7);
    }
    let labels = (1..=end_dates.len()).map(|i| format!("T{i}")).collect();
    Ok(WindowSpec {
        start_date: start,
        end_dates,
        labels,
    })
}

/// Full single-window pipeline: rank selection, weighted NMF on the whole
/// window, then k-means on the coefficient rows.
pub fn run_window(window: &SeriesMatrix, cfg: &PipelineConfig, label: &str) -> Result<WindowOutcome> {
    let x = &window.values;
    let (n, m) = x.dim();

    // short windows cannot support large ranks
    let cap = n.min(m).saturating_sub(1).max(1);
    let candidates: Vec<usize> = cfg
        .rank_candidates
        .iter()
        .copied()
        .filter(|&r| r >= 1 && r <= cap)
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no rank candidate fits a {n}x{m} window (cap {cap})"
        )));
    }

    let (rank, rank_scores) = select_rank(x, &candidates, cfg.folds, cfg.seed, &cfg.solver, cfg.cv_repeats)?;

    let ones = ndarray::Array2::ones((n, m));
    let init = random_init(x, &ones, rank, cfg.seed)?;
    let fit = solve(x, &ones, &init, &cfg.solver)?;

    let g_candidates: Vec<usize> = cfg.g_candidates.iter().copied().filter(|&g| g >= 1 && g <= n).collect();
    let (g, elbow) = match cfg.manual_g {
        Some(g) => (g, None),
        None => {
            if g_candidates.is_empty() {
                return Err(Error::InvalidInput("no usable cluster-count candidate".into()));
            }
            let (curve, suggestion) = elbow_scan(&fit.w, &g_candidates, cfg.restarts, cfg.seed)?;
            (suggestion.unwrap_or(g_candidates[0]), Some(curve))
        }
    };
    let cluster = kmeans_best_of(&fit.w, g, cfg.restarts, cfg.seed)?;

    Ok(WindowOutcome {
        label: label.to_string(),
        start: window.dates[0],
        end: *window.dates.last().expect("nonempty window"),
        rank,
        g,
        cluster,
        rank_scores,
        elbow,
        final_cost: fit.final_cost(),
        solver_converged: fit.converged,
        w: fit.w,
        h: fit.h,
    })
}

/// Run the pipeline over every window and compare consecutive partitions.
/// A window that fails is recorded and skipped; the scan continues.
pub fn scan(series: &SeriesMatrix, spec: &WindowSpec, cfg: &PipelineConfig) -> Result<ScanResult> {
    let mut per_window = Vec::with_capacity(spec.end_dates.len());
    for (end, label) in spec.end_dates.iter().zip(&spec.labels) {
        let record = match series
            .slice_dates(spec.start_date, *end)
            .and_then(|w| run_window(&w, cfg, label))
        {
            Ok(outcome) => WindowRecord::Done(Box::new(outcome)),
            Err(e) => WindowRecord::Failed {
                label: label.clone(),
                error: e.to_string(),
            },
        };
        per_window.push(record);
    }

    let mut ari_series = Vec::new();
    for pair in per_window.windows(2) {
        let value = match (pair[0].outcome(), pair[1].outcome()) {
            (Some(a), Some(b)) => Some(
                adjusted_rand_index(
                    &a.partition(&series.entity_labels),
                    &b.partition(&series.entity_labels),
                )?
                .0,
            ),
            _ => None,
        };
        ari_series.push(value);
    }

    let mut flagged_windows = Vec::new();
    for i in 1..ari_series.len() {
        if let (Some(prev), Some(cur)) = (ari_series[i - 1], ari_series[i]) {
            if cur < cfg.ari_flag_abs && prev - cur > cfg.ari_flag_drop {
                flagged_windows.push(spec.labels[i + 1].clone());
            }
        }
    }

    Ok(ScanResult {
        per_window,
        ari_series,
        flagged_windows,
    })
}

/// Run the pipeline on two windows independently and report the cross-period
/// agreement.
pub fn compare_periods(
    series: &SeriesMatrix,
    window_a: (NaiveDate, NaiveDate),
    window_b: (NaiveDate, NaiveDate),
    cfg: &PipelineConfig,
) -> Result<(WindowOutcome, WindowOutcome, AriValue)> {
    let slice_a = series.slice_dates(window_a.0, window_a.1)?;
    let slice_b = series.slice_dates(window_b.0, window_b.1)?;
    let outcome_a = run_window(&slice_a, cfg, "A")?;
    let outcome_b = run_window(&slice_b, cfg, "B")?;
    let ari = adjusted_rand_index(
        &outcome_a.partition(&series.entity_labels),
        &outcome_b.partition(&series.entity_labels),
    )?;
    Ok((outcome_a, outcome_b, ari))
}
