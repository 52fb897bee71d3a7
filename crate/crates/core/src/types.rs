//! Labeled matrix types shared across the pipeline.

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Raw daily counts: one row per entity, one column per calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCounts {
    pub entity_labels: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub counts: Array2<f64>,
}

impl RawCounts {
    pub fn new(entity_labels: Vec<String>, dates: Vec<NaiveDate>, counts: Array2<f64>) -> Result<Self> {
        if counts.nrows() != entity_labels.len() || counts.ncols() != dates.len() {
            return Err(Error::ShapeMismatch {
                context: "RawCounts".into(),
                expected: format!("{}x{}", entity_labels.len(), dates.len()),
                got: format!("{}x{}", counts.nrows(), counts.ncols()),
            });
        }
        for w in dates.windows(2) {
            if (w[1] - w[0]).num_days() != 1 {
                return Err(Error::InvalidInput(format!(
                    "dates must be consecutive days; gap between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            entity_labels,
            dates,
            counts,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }
}

/// Population lookup for per-million scaling.
#[derive(Debug, Clone)]
pub struct PopulationTable {
    entries: Vec<(String, i64)>,
}

impl PopulationTable {
    pub fn new(entries: Vec<(String, i64)>) -> Self {
        Self { entries }
    }

    pub fn get(&self, entity: &str) -> Option<i64> {
        self.entries
            .iter()
            .find(|(name, _)| name == entity)
            .map(|&(_, pop)| pop)
    }

    pub fn entries(&self) -> &[(String, i64)] {
        &self.entries
    }
}

/// Preprocessed series: per-million, smoothed, nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    pub entity_labels: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub values: Array2<f64>,
}

impl SeriesMatrix {
    /// Columns for the date range `[start, end]`, inclusive.
    pub fn slice_dates(&self, start: NaiveDate, end: NaiveDate) -> Result<SeriesMatrix> {
        let lo = self
            .dates
            .iter()
            .position(|&d| d == start)
            .ok_or_else(|| Error::InvalidInput(format!("start date {start} not in series")))?;
        let hi = self
            .dates
            .iter()
            .position(|&d| d == end)
            .ok_or_else(|| Error::InvalidInput(format!("end date {end} not in series")))?;
        if hi < lo {
            return Err(Error::InvalidInput(format!("end {end} precedes start {start}")));
        }
        Ok(SeriesMatrix {
            entity_labels: self.entity_labels.clone(),
            dates: self.dates[lo..=hi].to_vec(),
            values: self.values.slice(ndarray::s![.., lo..=hi]).to_owned(),
        })
    }
}

/// Binary weight matrix; 0 marks a held-out (missing) entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMatrix(pub Array2<f64>);

impl MaskMatrix {
    pub fn ones(n: usize, m: usize) -> Self {
        Self(Array2::ones((n, m)))
    }

    pub fn zero_count(&self) -> usize {
        self.0.iter().filter(|&&v| v == 0.0).count()
    }
}
