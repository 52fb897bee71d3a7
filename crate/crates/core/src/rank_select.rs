//! Rank selection by stratified entry-fold cross-validation on held-out MSPE.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::MaskMatrix;
use crate::wnmf::{random_init, solve, SolverConfig};

/// Assignment of every matrix entry to one of `s` folds, stratified at the
/// 75th percentile of the observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    /// Fold ids in 1..=s, one per entry.
    pub fold_of_entry: Array2<usize>,
    pub s: usize,
    pub stratum_threshold: f64,
    pub seed: u64,
}

impl FoldPlan {
    /// Mask with zeros exactly on fold `k` (Eq.-style missing-entry weights).
    pub fn mask_for_fold(&self, k: usize) -> MaskMatrix {
        MaskMatrix(self.fold_of_entry.mapv(|f| if f == k { 0.0 } else { 1.0 }))
    }

    pub fn fold_size(&self, k: usize) -> usize {
        self.fold_of_entry.iter().filter(|&&f| f == k).count()
    }
}

/// Cross-validation score for one candidate rank.
#[derive(Debug, Clone, Serialize)]
pub struct RankScore {
    pub r: usize,
    pub mspe: f64,
    pub per_fold_mspe: Vec<f64>,
    /// Folds whose solver run hit the iteration cap (diagnostic, not an error).
    pub non_converged_folds: usize,
}

/// Nearest-rank 75th percentile.
fn percentile_75(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((0.75 * values.len() as f64).ceil() as usize).max(1) - 1;
    values[idx]
}

/// Partition the entries of `x` into `s` folds by seeded shuffling within
/// each magnitude stratum (split at the 75th percentile, strict `>` for the
/// high stratum). An empty stratum is skipped; a nonempty stratum smaller
/// than `s` is an error.
pub fn stratified_folds(x: &Array2<f64>, s: usize, seed: u64) -> Result<FoldPlan> {
    let (n, m) = x.dim();
    if s < 2 {
        return Err(Error::InvalidInput(format!("fold count must be >= 2, got {s}")));
    }
    if n * m < s {
        return Err(Error::InvalidInput(format!(
            "matrix has {} entries, fewer than {s} folds",
            n * m
        )));
    }
    let mut all: Vec<f64> = x.iter().copied().collect();
    let threshold = percentile_75(&mut all);

    let mut low = Vec::new();
    let mut high = Vec::new();
    for (idx, &v) in x.indexed_iter() {
        if v > threshold {
            high.push(idx);
        } else {
            low.push(idx);
        }
    }
    for (name, stratum) in [("low", &low), ("high", &high)] {
        if !stratum.is_empty() && stratum.len() < s {
            return Err(Error::FoldCountTooLarge {
                folds: s,
                stratum: if name == "low" { "low" } else { "high" },
                size: stratum.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of_entry = Array2::zeros((n, m));
    for stratum in [&mut low, &mut high] {
        stratum.shuffle(&mut rng);
        for (pos, &(i, j)) in stratum.iter().enumerate() {
            fold_of_entry[[i, j]] = pos % s + 1;
        }
    }
    Ok(FoldPlan {
        fold_of_entry,
        s,
        stratum_threshold: threshold,
        seed,
    })
}

/// Pooled held-out MSPE for one candidate rank: each fold is masked out in
/// turn, the weighted factorization is fit on the rest from a seeded
/// strictly positive start, and the held-out entries are predicted by the
/// reconstruction.
pub fn mspe_for_rank(
    x: &Array2<f64>,
    plan: &FoldPlan,
    r: usize,
    cfg: &SolverConfig,
) -> Result<RankScore> {
    let (n, m) = x.dim();
    if r > n.min(m) {
        return Err(Error::RankTooLarge { rank: r, max_rank: n.min(m) });
    }

    // fold runs are independent; per-fold results land in fold order so the
    // final aggregation is reduction-order independent
    let fold_results: Vec<Result<(f64, usize, bool)>> = (1..=plan.s)
        .into_par_iter()
        .map(|k| {
            let mask = plan.mask_for_fold(k);
            // distinct deterministic stream per (plan seed, rank, fold)
            let init_seed = plan
                .seed
                .wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                .wrapping_add(k as u64);
            let init = random_init(x, &mask.0, r, init_seed)?;
            let fit = solve(x, &mask.0, &init, cfg)?;
            let wh = fit.w.dot(&fit.h);
            let mut sse = 0.0;
            let mut count = 0usize;
            ndarray::Zip::from(x).and(&mask.0).and(&wh).for_each(|&xv, &vv, &pv| {
                if vv == 0.0 {
                    sse += (xv - pv) * (xv - pv);
                    count += 1;
                }
            });
            Ok((sse, count, fit.converged))
        })
        .collect();

    let mut per_fold_mspe = Vec::with_capacity(plan.s);
    let mut total_sse = 0.0;
    let mut non_converged = 0usize;
    for res in fold_results {
        let (sse, count, converged) = res?;
        per_fold_mspe.push(if count > 0 { sse / count as f64 } else { 0.0 });
        total_sse += sse;
        if !converged {
            non_converged += 1;
        }
    }
    Ok(RankScore {
        r,
        mspe: total_sse / (n * m) as f64,
        per_fold_mspe,
        non_converged_folds: non_converged,
    })
}

/// Pick the rank with minimal cross-validated MSPE; ties break toward the
/// smaller rank. With `cv_repeats > 1` the MSPE is averaged over repeated
/// seeded fold plans.
pub fn select_rank(
    x: &Array2<f64>,
    candidates: &[usize],
    s: usize,
    seed: u64,
    cfg: &SolverConfig,
    cv_repeats: usize,
) -> Result<(usize, Vec<RankScore>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty rank candidate set".into()));
    }
    let (n, m) = x.dim();
    for &r in candidates {
        if r > n.min(m) {
            return Err(Error::RankTooLarge { rank: r, max_rank: n.min(m) });
        }
    }
    let repeats = cv_repeats.max(1);
    let mut averaged: Vec<RankScore> = Vec::with_capacity(candidates.len());
    for &r in candidates {
        let mut mspe_sum = 0.0;
        let mut per_fold = vec![0.0; s];
        let mut non_converged = 0usize;
        for rep in 0..repeats {
            let plan = stratified_folds(x, s, seed.wrapping_add(rep as u64))?;
            let score = mspe_for_rank(x, &plan, r, cfg)?;
            mspe_sum += score.mspe;
            for (acc, v) in per_fold.iter_mut().zip(&score.per_fold_mspe) {
                *acc += v / repeats as f64;
            }
            non_converged += score.non_converged_folds;
        }
        averaged.push(RankScore {
            r,
            mspe: mspe_sum / repeats as f64,
            per_fold_mspe: per_fold,
            non_converged_folds: non_converged,
        });
    }

    let mut best = &averaged[0];
    for score in &averaged[1..] {
        if score.mspe < best.mspe || (score.mspe == best.mspe && score.r < best.r) {
            best = score;
        }
    }
    Ok((best.r, averaged))
}
