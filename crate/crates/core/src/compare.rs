//! Adjusted Rand index between two partitions of the same entity set.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// A labeling of entities by cluster id.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub entity_labels: Vec<String>,
    pub cluster_of: HashMap<String, usize>,
}

impl Partition {
    pub fn from_assignments(entity_labels: &[String], assignments: &[usize]) -> Self {
        let cluster_of = entity_labels
            .iter()
            .cloned()
            .zip(assignments.iter().copied())
            .collect();
        Self {
            entity_labels: entity_labels.to_vec(),
            cluster_of,
        }
    }
}

/// ARI value in [-1, 1]; 1 iff the partitions agree up to relabeling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AriValue(pub f64);

fn comb2(x: i128) -> i128 {
    x * (x - 1) / 2
}

/// Hubert-Arabie adjusted Rand index from the contingency table, with the
/// index sums kept in exact integer arithmetic. The degenerate 0/0 case
/// (both partitions trivial in the same way) returns 1.0.
pub fn adjusted_rand_index(p1: &Partition, p2: &Partition) -> Result<AriValue> {
    let set1: BTreeSet<&String> = p1.entity_labels.iter().collect();
    let set2: BTreeSet<&String> = p2.entity_labels.iter().collect();
    if set1 != set2 {
        return Err(Error::EntitySetMismatch {
            only_first: set1.difference(&set2).map(|s| (*s).clone()).collect(),
            only_second: set2.difference(&set1).map(|s| (*s).clone()).collect(),
        });
    }

    let mut table: HashMap<(usize, usize), i128> = HashMap::new();
    let mut row_sums: HashMap<usize, i128> = HashMap::new();
    let mut col_sums: HashMap<usize, i128> = HashMap::new();
    let n = set1.len() as i128;
    for entity in &set1 {
        let c1 = p1.cluster_of[*entity];
        let c2 = p2.cluster_of[*entity];
        *table.entry((c1, c2)).or_default() += 1;
        *row_sums.entry(c1).or_default() += 1;
        *col_sums.entry(c2).or_default() += 1;
    }

    let sum_nij: i128 = table.values().map(|&v| comb2(v)).sum();
    let sum_a: i128 = row_sums.values().map(|&v| comb2(v)).sum();
    let sum_b: i128 = col_sums.values().map(|&v| comb2(v)).sum();
    let total = comb2(n);

    // ARI = (sum_nij - a*b/t) / ((a+b)/2 - a*b/t), cleared of the division by t
    let numer = total * sum_nij - sum_a * sum_b;
    let denom = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if denom == 0 {
        return Ok(AriValue(1.0));
    }
    Ok(AriValue(2.0 * numer as f64 / denom as f64))
}
