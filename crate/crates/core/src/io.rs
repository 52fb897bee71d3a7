//! CSV/JSON ingestion and artifact writers. All writes go through a
//! temp-file-and-rename so no output is left half-written.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kmeans::ElbowCurve;
use crate::rank_select::RankScore;
use crate::types::{PopulationTable, RawCounts};

/// Ingestion findings surfaced by `validate` and the CLI report.
#[derive(Debug, Clone, Default)]
pub struct IngestDiagnostics {
    pub negative_cells: usize,
    pub filled_gap_cells: usize,
    /// entity -> number of dates with no report
    pub missing_days: BTreeMap<String, usize>,
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::InvalidInput(format!("bad date `{s}`: {e}")))
}

fn parse_count(s: &str, context: &str) -> Result<f64> {
    let t = s.trim();
    if t.is_empty() {
        return Ok(0.0);
    }
    t.parse::<f64>()
        .map_err(|e| Error::InvalidInput(format!("bad count `{s}` at {context}: {e}")))
}

/// Wide counts CSV: `entity,<date>,<date>,...` with ISO date headers.
pub fn read_counts_wide(path: &Path) -> Result<(RawCounts, IngestDiagnostics)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::InvalidInput("counts CSV needs an entity column and at least one date column".into()));
    }
    let dates: Vec<NaiveDate> = headers.iter().skip(1).map(parse_date).collect::<Result<_>>()?;

    let mut entity_labels = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let entity = record
            .get(0)
            .ok_or_else(|| Error::InvalidInput("missing entity cell".into()))?
            .trim()
            .to_string();
        let mut row = Vec::with_capacity(dates.len());
        for (j, cell) in record.iter().skip(1).enumerate() {
            row.push(parse_count(cell, &format!("{entity}, column {}", j + 1))?);
        }
        if row.len() != dates.len() {
            return Err(Error::InvalidInput(format!(
                "entity {entity} has {} cells, expected {}",
                row.len(),
                dates.len()
            )));
        }
        entity_labels.push(entity);
        rows.push(row);
    }
    let n = entity_labels.len();
    let m = dates.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let counts = Array2::from_shape_vec((n, m), flat)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let diagnostics = IngestDiagnostics {
        negative_cells: counts.iter().filter(|&&v| v < 0.0).count(),
        ..Default::default()
    };
    Ok((RawCounts::new(entity_labels, dates, counts)?, diagnostics))
}

/// Long counts CSV: `entity,date,count`. Missing (entity, date) pairs are
/// filled with zero only when `fill_gaps_zero` is set; otherwise any entity
/// with a calendar gap is an error.
pub fn read_counts_long(path: &Path, fill_gaps_zero: bool) -> Result<(RawCounts, IngestDiagnostics)> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut cells: BTreeMap<(String, NaiveDate), f64> = BTreeMap::new();
    let mut entity_order = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() < 3 {
            return Err(Error::InvalidInput("long counts CSV needs entity,date,count".into()));
        }
        let entity = record[0].trim().to_string();
        let date = parse_date(&record[1])?;
        let count = parse_count(&record[2], &format!("{entity},{date}"))?;
        if !entity_order.contains(&entity) {
            entity_order.push(entity.clone());
        }
        cells.insert((entity, date), count);
    }
    if cells.is_empty() {
        return Err(Error::InvalidInput("empty counts CSV".into()));
    }
    let min_date = cells.keys().map(|(_, d)| *d).min().unwrap();
    let max_date = cells.keys().map(|(_, d)| *d).max().unwrap();
    let n_days = (max_date - min_date).num_days() as usize + 1;
    let dates: Vec<NaiveDate> = (0..n_days)
        .map(|i| min_date + chrono::Days::new(i as u64))
        .collect();

    let mut counts = Array2::zeros((entity_order.len(), n_days));
    let mut diagnostics = IngestDiagnostics::default();
    for (i, entity) in entity_order.iter().enumerate() {
        let mut missing = 0usize;
        for (j, date) in dates.iter().enumerate() {
            match cells.get(&(entity.clone(), *date)) {
                Some(&v) => {
                    if v < 0.0 {
                        diagnostics.negative_cells += 1;
                    }
                    counts[[i, j]] = v;
                }
                None => {
                    missing += 1;
                    counts[[i, j]] = 0.0;
                }
            }
        }
        if missing > 0 {
            if !fill_gaps_zero {
                return Err(Error::InvalidInput(format!(
                    "entity {entity} is missing {missing} of {n_days} days; rerun with --fill-gaps-zero to treat them as 0"
                )));
            }
            diagnostics.filled_gap_cells += missing;
            diagnostics.missing_days.insert(entity.clone(), missing);
        }
    }
    Ok((RawCounts::new(entity_order, dates, counts)?, diagnostics))
}

/// Population CSV: `entity,population`.
pub fn read_population(path: &Path) -> Result<PopulationTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::InvalidInput("population CSV needs entity,population".into()));
        }
        let entity = record[0].trim().to_string();
        let population: i64 = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::InvalidInput(format!("bad population for {entity}: {e}")))?;
        entries.push((entity, population));
    }
    Ok(PopulationTable::new(entries))
}

/// Write `content` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn assignments_csv(entity_labels: &[String], assignments: &[usize]) -> String {
    let mut out = String::from("entity,cluster\n");
    for (entity, cluster) in entity_labels.iter().zip(assignments) {
        out.push_str(&format!("{entity},{cluster}\n"));
    }
    out
}

pub fn w_csv(entity_labels: &[String], w: &Array2<f64>) -> String {
    let mut out = String::from("entity");
    for k in 1..=w.ncols() {
        out.push_str(&format!(",c{k}"));
    }
    out.push('\n');
    for (entity, row) in entity_labels.iter().zip(w.rows()) {
        out.push_str(entity);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn h_csv(dates: &[NaiveDate], h: &Array2<f64>) -> String {
    let mut out = String::from("component");
    for d in dates {
        out.push_str(&format!(",{d}"));
    }
    out.push('\n');
    for (k, row) in h.rows().into_iter().enumerate() {
        out.push_str(&format!("c{}", k + 1));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn elbow_csv(curve: &ElbowCurve) -> String {
    let mut out = String::from("g,wss\n");
    for (g, wss) in curve.g_values.iter().zip(&curve.wss_values) {
        out.push_str(&format!("{g},{wss}\n"));
    }
    out
}

pub fn mspe_csv(scores: &[RankScore]) -> String {
    let mut out = String::from("rank,fold,mspe\n");
    for score in scores {
        for (fold, mspe) in score.per_fold_mspe.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", score.r, fold + 1, mspe));
        }
        out.push_str(&format!("{},pooled,{}\n", score.r, score.mspe));
    }
    out
}

pub fn cost_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,cost\n");
    for (i, cost) in trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, cost));
    }
    out
}

pub fn ari_csv(labels: &[String], ari_series: &[Option<f64>]) -> String {
    let mut out = String::from("window_pair,ari\n");
    for (i, value) in ari_series.iter().enumerate() {
        let pair = format!("{}-{}", labels[i], labels[i + 1]);
        match value {
            Some(v) => out.push_str(&format!("{pair},{v}\n")),
            None => out.push_str(&format!("{pair},\n")),
        }
    }
    out
}
