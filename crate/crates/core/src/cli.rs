//! Batch front end: configuration, orchestration, and artifact emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::preprocess::preprocess;
use crate::temporal_scan::{build_windows, compare_periods, run_window, scan, PipelineConfig, WindowRecord};
use crate::types::SeriesMatrix;

/// Run mode selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Scan,
    Compare,
    Validate,
}

/// Everything that affects a run; serialized verbatim into the manifest so a
/// replay reproduces the outputs byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub counts: PathBuf,
    pub population: PathBuf,
    pub long_format: bool,
    pub fill_gaps_zero: bool,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    /// Scan mode: end date of the first (shortest) window.
    pub first_end: Option<NaiveDate>,
    /// Compare mode: end date of the second window (the first uses `end`).
    pub end_b: Option<NaiveDate>,
    pub pipeline: PipelineConfig,
    pub out: PathBuf,
    pub diagnostics: bool,
    pub threads: Option<usize>,
}

/// Stable single-line error codes for scripting.
pub fn error_code(err: &Error) -> &'static str {
    match err {
        Error::MissingPopulation { .. } | Error::NonpositivePopulation { .. } => "E_POPULATION",
        Error::ShapeMismatch { .. } => "E_SHAPE",
        Error::RankTooLarge { .. } => "E_RANK",
        Error::NegativeEntry { .. } => "E_NEGATIVE",
        Error::FoldCountTooLarge { .. } => "E_FOLDS",
        Error::TooManyClusters { .. } => "E_CLUSTERS",
        Error::EntitySetMismatch { .. } => "E_ENTITIES",
        Error::MisalignedWindow { .. } => "E_WINDOW",
        Error::InvalidInput(_) => "E_INPUT",
        Error::Csv(_) => "E_CSV",
        Error::Io(_) => "E_IO",
        Error::Json(_) => "E_JSON",
    }
}

fn load_series(cfg: &RunConfig) -> Result<(SeriesMatrix, io::IngestDiagnostics, usize)> {
    let (raw, mut diagnostics) = if cfg.long_format {
        io::read_counts_long(&cfg.counts, cfg.fill_gaps_zero)?
    } else {
        io::read_counts_wide(&cfg.counts)?
    };
    let pop = io::read_population(&cfg.population)?;
    let (series, clamped) = preprocess(&raw, &pop)?;
    diagnostics.negative_cells = diagnostics.negative_cells.max(clamped);
    Ok((series, diagnostics, clamped))
}

fn sliced(series: &SeriesMatrix, cfg: &RunConfig) -> Result<SeriesMatrix> {
    let start = cfg.start.unwrap_or(series.dates[0]);
    let end = cfg.end.unwrap_or(*series.dates.last().expect("nonempty series"));
    series.slice_dates(start, end)
}

fn write_manifest(cfg: &RunConfig) -> Result<()> {
    let manifest = serde_json::to_string_pretty(cfg)?;
    io::write_atomic(&cfg.out.join("manifest.json"), &format!("{manifest}\n"))
}

pub fn load_manifest(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Serialize)]
struct ScanJsonWindow {
    label: String,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
    status: &'static str,
    error: Option<String>,
    r: Option<usize>,
    g: Option<usize>,
    assignments: Option<BTreeMap<String, usize>>,
    wss: Option<f64>,
    elbow: Option<ElbowJson>,
    mspe: Option<Vec<crate::rank_select::RankScore>>,
}

#[derive(Serialize)]
struct ElbowJson {
    g: Vec<usize>,
    wss: Vec<f64>,
}

#[derive(Serialize)]
struct ScanJson {
    entities: Vec<String>,
    windows: Vec<ScanJsonWindow>,
    ari_series: Vec<Option<f64>>,
    flags: Vec<String>,
}

/// Validation report for `--mode validate`.
pub fn validate_inputs(cfg: &RunConfig) -> Result<String> {
    let (raw, diagnostics) = if cfg.long_format {
        io::read_counts_long(&cfg.counts, cfg.fill_gaps_zero)?
    } else {
        io::read_counts_wide(&cfg.counts)?
    };
    let pop = io::read_population(&cfg.population)?;

    let mut lines = Vec::new();
    let mut issues = 0usize;
    for entity in &raw.entity_labels {
        match pop.get(entity) {
            None => {
                return Err(Error::MissingPopulation { entity: entity.clone() });
            }
            Some(p) if p <= 0 => {
                return Err(Error::NonpositivePopulation { entity: entity.clone(), population: p });
            }
            _ => {}
        }
    }
    for (i, entity) in raw.entity_labels.iter().enumerate() {
        let negatives = raw.counts.row(i).iter().filter(|&&v| v < 0.0).count();
        let missing = diagnostics.missing_days.get(entity).copied().unwrap_or(0);
        if negatives > 0 || missing > 0 {
            issues += negatives + missing;
            lines.push(format!(
                "{entity}: {negatives} negative cells, {missing} missing days"
            ));
        }
    }
    let mut report = format!(
        "{} entities, {} days ({} .. {})\n",
        raw.n_entities(),
        raw.n_days(),
        raw.dates[0],
        raw.dates.last().unwrap()
    );
    if issues == 0 {
        report.push_str("0 issues\n");
    } else {
        report.push_str(&format!("{issues} issues\n"));
        for line in lines {
            report.push_str(&line);
            report.push('\n');
        }
    }
    Ok(report)
}

/// Single-window pipeline run; emits assignments, factors, elbow curve,
/// MSPE table, and the manifest under `cfg.out`.
pub fn run_single(cfg: &RunConfig) -> Result<()> {
    let (series, _diagnostics, _) = load_series(cfg)?;
    let window = sliced(&series, cfg)?;
    let outcome = run_window(&window, &cfg.pipeline, "full")?;

    io::write_atomic(
        &cfg.out.join("assignments.csv"),
        &io::assignments_csv(&window.entity_labels, &outcome.cluster.assignments),
    )?;
    io::write_atomic(&cfg.out.join("w.csv"), &io::w_csv(&window.entity_labels, &outcome.w))?;
    io::write_atomic(&cfg.out.join("h.csv"), &io::h_csv(&window.dates, &outcome.h))?;
    if let Some(curve) = &outcome.elbow {
        io::write_atomic(&cfg.out.join("elbow.csv"), &io::elbow_csv(curve))?;
    }
    io::write_atomic(&cfg.out.join("mspe.csv"), &io::mspe_csv(&outcome.rank_scores))?;
    write_manifest(cfg)?;
    Ok(())
}

/// Nested-window scan; emits `scan.json`, `ari.csv`, and the manifest.
pub fn run_scan(cfg: &RunConfig) -> Result<()> {
    let (series, _diagnostics, _) = load_series(cfg)?;
    let start = cfg.start.unwrap_or(series.dates[0]);
    let last_end = cfg.end.unwrap_or(*series.dates.last().expect("nonempty series"));
    let first_end = cfg
        .first_end
        .ok_or_else(|| Error::InvalidInput("scan mode requires --first-end".into()))?;
    let spec = build_windows(&series, start, first_end, last_end)?;
    let result = scan(&series, &spec, &cfg.pipeline)?;

    let windows = result
        .per_window
        .iter()
        .map(|record| match record {
            WindowRecord::Done(o) => ScanJsonWindow {
                label: o.label.clone(),
                start: Some(o.start),
                end: Some(o.end),
                status: "ok",
                error: None,
                r: Some(o.rank),
                g: Some(o.g),
                assignments: Some(
                    series
                        .entity_labels
                        .iter()
                        .cloned()
                        .zip(o.cluster.assignments.iter().copied())
                        .collect(),
                ),
                wss: Some(o.cluster.wss),
                elbow: o.elbow.as_ref().map(|c| ElbowJson {
                    g: c.g_values.clone(),
                    wss: c.wss_values.clone(),
                }),
                mspe: if cfg.diagnostics { Some(o.rank_scores.clone()) } else { None },
            },
            WindowRecord::Failed { label, error } => ScanJsonWindow {
                label: label.clone(),
                start: None,
                end: None,
                status: "failed",
                error: Some(error.clone()),
                r: None,
                g: None,
                assignments: None,
                wss: None,
                elbow: None,
                mspe: None,
            },
        })
        .collect();
    let json = ScanJson {
        entities: series.entity_labels.clone(),
        windows,
        ari_series: result.ari_series.clone(),
        flags: result.flagged_windows.clone(),
    };
    io::write_atomic(
        &cfg.out.join("scan.json"),
        &format!("{}\n", serde_json::to_string_pretty(&json)?),
    )?;
    io::write_atomic(
        &cfg.out.join("ari.csv"),
        &io::ari_csv(&spec.labels, &result.ari_series),
    )?;
    write_manifest(cfg)?;
    Ok(())
}

/// Two-window comparison; emits both assignment CSVs, the cross-period ARI,
/// and the manifest.
pub fn run_compare(cfg: &RunConfig) -> Result<()> {
    let (series, _diagnostics, _) = load_series(cfg)?;
    let start = cfg.start.unwrap_or(series.dates[0]);
    let end_a = cfg
        .end
        .ok_or_else(|| Error::InvalidInput("compare mode requires --end".into()))?;
    let end_b = cfg
        .end_b
        .ok_or_else(|| Error::InvalidInput("compare mode requires --end-b".into()))?;
    let (a, b, ari) = compare_periods(&series, (start, end_a), (start, end_b), &cfg.pipeline)?;

    io::write_atomic(
        &cfg.out.join("assignments_a.csv"),
        &io::assignments_csv(&series.entity_labels, &a.cluster.assignments),
    )?;
    io::write_atomic(
        &cfg.out.join("assignments_b.csv"),
        &io::assignments_csv(&series.entity_labels, &b.cluster.assignments),
    )?;
    io::write_atomic(&cfg.out.join("ari.csv"), &format!("window_pair,ari\nA-B,{}\n", ari.0))?;
    write_manifest(cfg)?;
    Ok(())
}

/// Dispatch on the configured mode. Returns the validate report when in
/// validate mode, `None` otherwise.
pub fn run(cfg: &RunConfig) -> Result<Option<String>> {
    if let Some(threads) = cfg.threads {
        // ignore the error if a global pool already exists (repeat calls in tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cfg.mode {
        Mode::Single => run_single(cfg).map(|_| None),
        Mode::Scan => run_scan(cfg).map(|_| None),
        Mode::Compare => run_compare(cfg).map(|_| None),
        Mode::Validate => validate_inputs(cfg).map(Some),
    }
}
