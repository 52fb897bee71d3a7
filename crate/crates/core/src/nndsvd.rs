//! Deterministic nonnegative starting matrices from a truncated SVD.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Error, Result};

/// Nonnegative starting pair for the multiplicative solver.
#[derive(Debug, Clone, PartialEq)]
pub struct InitPair {
    pub w0: Array2<f64>,
    pub h0: Array2<f64>,
}

impl InitPair {
    /// Replace exact zeros with a small positive floor so multiplicative
    /// updates can move every entry. The floor is scaled per component
    /// vector (1e-12 x its max entry, never below 1e-16).
    pub fn floored(&self) -> InitPair {
        let mut w0 = self.w0.clone();
        let mut h0 = self.h0.clone();
        for mut col in w0.columns_mut() {
            let eps = component_floor(col.view());
            col.mapv_inplace(|v| if v == 0.0 { eps } else { v });
        }
        for mut row in h0.rows_mut() {
            let eps = component_floor(row.view());
            row.mapv_inplace(|v| if v == 0.0 { eps } else { v });
        }
        InitPair { w0, h0 }
    }
}

fn component_floor(v: ndarray::ArrayView1<f64>) -> f64 {
    let max = v.iter().cloned().fold(0.0, f64::max);
    (1e-12 * max).max(1e-16)
}

fn split_parts(v: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    let pos = v.mapv(|x| x.max(0.0));
    let neg = v.mapv(|x| (-x).max(0.0));
    (pos, neg)
}

fn norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Nonnegative double SVD initialization (basic form, no dense perturbation).
///
/// For each of the top-r singular triplets the positive and negated-negative
/// parts of the singular vectors compete; the pair with the larger product of
/// norms wins (ties go to the positive part) and is rescaled so the unit-rank
/// term carries the singular value.
pub fn nndsvd_init(x: &Array2<f64>, r: usize) -> Result<InitPair> {
    let (n, m) = x.dim();
    for ((i, j), &v) in x.indexed_iter() {
        if v < 0.0 {
            return Err(Error::NegativeEntry { row: i, col: j, value: v });
        }
    }
    let max_rank = n.min(m);
    if r == 0 || r > max_rank {
        return Err(Error::RankTooLarge { rank: r, max_rank });
    }

    let (u, s, vt) = x
        .svddc(JobSvd::Some)
        .map_err(|e| Error::InvalidInput(format!("svd failed: {e}")))?;
    let u = u.expect("left singular vectors requested");
    let vt = vt.expect("right singular vectors requested");

    let mut w0 = Array2::zeros((n, r));
    let mut h0 = Array2::zeros((r, m));
    for k in 0..r {
        let sigma = s[k];
        if sigma <= 0.0 {
            continue;
        }
        let (up, un) = split_parts(u.column(k));
        let (vp, vn) = split_parts(vt.row(k));
        let (nup, nun, nvp, nvn) = (norm(&up), norm(&un), norm(&vp), norm(&vn));
        let m_pos = nup * nvp;
        let m_neg = nun * nvn;
        let (part_u, part_v, nu, nv, weight) = if m_pos >= m_neg {
            (up, vp, nup, nvp, m_pos)
        } else {
            (un, vn, nun, nvn, m_neg)
        };
        if weight == 0.0 {
            continue;
        }
        let scale = (sigma * weight).sqrt();
        let w_col = part_u.mapv(|x| scale * x / nu);
        let h_row = part_v.mapv(|x| scale * x / nv);
        w0.column_mut(k).assign(&w_col);
        h0.row_mut(k).assign(&h_row);
    }
    Ok(InitPair { w0, h0 })
}
