//! Ingestion-side transforms: per-million scaling, 7-day smoothing, negative cleanup.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{PopulationTable, RawCounts, SeriesMatrix};

/// Scale daily counts to cases per million inhabitants.
pub fn scale_per_million(raw: &RawCounts, pop: &PopulationTable) -> Result<RawCounts> {
    let mut scaled = raw.counts.clone();
    for (i, entity) in raw.entity_labels.iter().enumerate() {
        let p = pop.get(entity).ok_or_else(|| Error::MissingPopulation {
            entity: entity.clone(),
        })?;
        if p <= 0 {
            return Err(Error::NonpositivePopulation {
                entity: entity.clone(),
                population: p,
            });
        }
        let factor = 1.0e6 / p as f64;
        scaled.row_mut(i).mapv_inplace(|v| v * factor);
    }
    Ok(RawCounts {
        entity_labels: raw.entity_labels.clone(),
        dates: raw.dates.clone(),
        counts: scaled,
    })
}

/// Centered 7-day moving average; windows truncate to valid indices at the
/// boundaries so constants are preserved without padding.
pub fn moving_average_7(raw: &RawCounts) -> SeriesMatrix {
    let (n, m) = raw.counts.dim();
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let lo = j.saturating_sub(3);
            let hi = (j + 3).min(m - 1);
            let mut sum = 0.0;
            for k in lo..=hi {
                sum += raw.counts[[i, k]];
            }
            out[[i, j]] = sum / (hi - lo + 1) as f64;
        }
    }
    SeriesMatrix {
        entity_labels: raw.entity_labels.clone(),
        dates: raw.dates.clone(),
        values: out,
    }
}

/// Clamp negative entries (reporting corrections) to zero.
/// Returns the cleaned counts and the number of replaced entries.
pub fn negative_cleanup(raw: &RawCounts) -> (RawCounts, usize) {
    let mut cleaned = raw.counts.clone();
    let mut replaced = 0usize;
    cleaned.mapv_inplace(|v| {
        if v < 0.0 {
            replaced += 1;
            0.0
        } else {
            v
        }
    });
    (
        RawCounts {
            entity_labels: raw.entity_labels.clone(),
            dates: raw.dates.clone(),
            counts: cleaned,
        },
        replaced,
    )
}

/// Full preprocessing chain: clamp negatives, scale per million, smooth.
pub fn preprocess(raw: &RawCounts, pop: &PopulationTable) -> Result<(SeriesMatrix, usize)> {
    let (cleaned, replaced) = negative_cleanup(raw);
    let scaled = scale_per_million(&cleaned, pop)?;
    Ok((moving_average_7(&scaled), replaced))
}
