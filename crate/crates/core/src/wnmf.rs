//! Weighted NMF by alternating multiplicative updates.
//!
//! Minimizes `sum_ij v_ij (x_ij - w_i' h_j)^2` over nonnegative factors,
//! with a zero-weight mask standing in for missing entries.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nndsvd::InitPair;

/// Stopping and guard knobs for the multiplicative solver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative to the initial cost: the solver stops once the spread of the
    /// cost over the trailing `stationarity_window` iterations drops below
    /// `tolerance * initial_cost`.
    pub tolerance: f64,
    pub stationarity_window: usize,
    pub epsilon_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-6,
            stationarity_window: 40,
            epsilon_guard: 1e-12,
        }
    }
}

/// Solver output: nonnegative factors plus fit diagnostics.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Factorization {
    pub fn final_cost(&self) -> f64 {
        self.cost_trace.last().copied().unwrap_or(0.0)
    }
}

/// Deterministic strictly positive start for the multiplicative solver.
///
/// Entries are drawn uniformly from `[0.5, 1.5)` with a seeded generator and
/// scaled so the initial reconstruction matches the mean of the observed
/// (nonzero-weight) entries of `x`. Being bounded away from zero, the start
/// cannot pin any factor entry at zero, which the multiplicative updates
/// could never undo.
pub fn random_init(x: &Array2<f64>, v: &Array2<f64>, r: usize, seed: u64) -> Result<InitPair> {
    use rand::prelude::*;
    let (n, m) = x.dim();
    if r < 1 || r > n.min(m) {
        return Err(Error::RankTooLarge { rank: r, max_rank: n.min(m) });
    }
    if v.dim() != (n, m) {
        return Err(Error::ShapeMismatch {
            context: "random initialization".into(),
            expected: format!("V {n}x{m}"),
            got: format!("V {:?}", v.dim()),
        });
    }
    let observed_sum: f64 = x
        .iter()
        .zip(v.iter())
        .filter(|&(_, &vv)| vv != 0.0)
        .map(|(&xv, _)| xv)
        .sum();
    let observed_count = v.iter().filter(|&&vv| vv != 0.0).count();
    let mean = if observed_count > 0 { observed_sum / observed_count as f64 } else { 1.0 };
    // E[w_ik h_kj] = scale^2 per component, so scale^2 * r ~= mean(X)
    let scale = (mean.max(f64::MIN_POSITIVE) / r as f64).sqrt();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w0 = Array2::from_shape_fn((n, r), |_| scale * (0.5 + rng.random::<f64>()));
    let h0 = Array2::from_shape_fn((r, m), |_| scale * (0.5 + rng.random::<f64>()));
    Ok(InitPair { w0, h0 })
}

fn check_shapes(x: &Array2<f64>, v: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> Result<()> {
    let (n, m) = x.dim();
    if v.dim() != (n, m) || w.nrows() != n || h.ncols() != m || w.ncols() != h.nrows() {
        return Err(Error::ShapeMismatch {
            context: "weighted factorization".into(),
            expected: format!("X {n}x{m}, V {n}x{m}, W {n}xr, H rx{m}"),
            got: format!(
                "V {:?}, W {:?}, H {:?}",
                v.dim(),
                w.dim(),
                h.dim()
            ),
        });
    }
    Ok(())
}

/// Weighted squared-error cost `sum_ij v_ij (x_ij - (WH)_ij)^2`.
pub fn weighted_cost(
    x: &Array2<f64>,
    v: &Array2<f64>,
    w: &Array2<f64>,
    h: &Array2<f64>,
) -> Result<f64> {
    check_shapes(x, v, w, h)?;
    let wh = w.dot(h);
    let mut acc = 0.0;
    ndarray::Zip::from(x).and(v).and(&wh).for_each(|&xv, &vv, &pv| {
        let d = xv - pv;
        acc += vv * d * d;
    });
    Ok(acc)
}

/// One multiplicative step on H: `H <- H . [W'(X.V)] / [W'((WH).V) + eps]`.
pub fn update_h(
    x: &Array2<f64>,
    v: &Array2<f64>,
    w: &Array2<f64>,
    h: &Array2<f64>,
    eps_guard: f64,
) -> Array2<f64> {
    let xv = x * v;
    let wh_v = w.dot(h) * v;
    let numer = w.t().dot(&xv);
    let denom = w.t().dot(&wh_v);
    let mut out = h.clone();
    ndarray::Zip::from(&mut out).and(&numer).and(&denom).for_each(|hv, &n, &d| {
        *hv *= n / (d + eps_guard);
    });
    out
}

/// One multiplicative step on W: `W <- W . [(X.V)H'] / [((WH).V)H' + eps]`.
pub fn update_w(
    x: &Array2<f64>,
    v: &Array2<f64>,
    w: &Array2<f64>,
    h: &Array2<f64>,
    eps_guard: f64,
) -> Array2<f64> {
    let xv = x * v;
    let wh_v = w.dot(h) * v;
    let numer = xv.dot(&h.t());
    let denom = wh_v.dot(&h.t());
    let mut out = w.clone();
    ndarray::Zip::from(&mut out).and(&numer).and(&denom).for_each(|wv, &n, &d| {
        *wv *= n / (d + eps_guard);
    });
    out
}

/// Alternating solve from an epsilon-floored start. Updates H then W each
/// iteration and records the cost once per iteration, after the W step.
pub fn solve(
    x: &Array2<f64>,
    v: &Array2<f64>,
    init: &InitPair,
    cfg: &SolverConfig,
) -> Result<Factorization> {
    let floored = init.floored();
    let mut w = floored.w0;
    let mut h = floored.h0;
    check_shapes(x, v, &w, &h)?;

    let initial_cost = weighted_cost(x, v, &w, &h)?;
    let threshold = cfg.tolerance * initial_cost;
    let mut trace = Vec::with_capacity(cfg.max_iterations.min(4096));
    let mut converged = initial_cost == 0.0;

    if !converged {
        for _ in 0..cfg.max_iterations {
            h = update_h(x, v, &w, &h, cfg.epsilon_guard);
            w = update_w(x, v, &w, &h, cfg.epsilon_guard);
            trace.push(weighted_cost(x, v, &w, &h)?);
            if trace.len() >= cfg.stationarity_window {
                let tail = &trace[trace.len() - cfg.stationarity_window..];
                let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
                if max - min < threshold {
                    converged = true;
                    break;
                }
            }
        }
    }

    Ok(Factorization {
        w,
        h,
        iterations: trace.len(),
        cost_trace: trace,
        converged,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::nndsvd::nndsvd_init;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn planted(n: usize, m: usize, r: usize, seed: u64) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_fn((n, r), |_| 0.5 + rng.random::<f64>());
        let h = Array2::from_shape_fn((r, m), |_| 0.5 + rng.random::<f64>());
        let x = w.dot(&h);
        (x, w, h)
    }

    #[test]
    fn cost_examples() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let w = array![[1.0], [1.0]];
        let h = array![[1.0, 1.0]];
        let ones = Array2::ones((2, 2));
        assert_abs_diff_eq!(weighted_cost(&x, &ones, &w, &h).unwrap(), 14.0);

        let zeros = Array2::zeros((2, 2));
        assert_abs_diff_eq!(weighted_cost(&x, &zeros, &w, &h).unwrap(), 0.0);

        let exact = w.dot(&h);
        assert_abs_diff_eq!(weighted_cost(&exact, &ones, &w, &h).unwrap(), 0.0);
    }

    #[test]
    fn cost_shape_mismatch_is_error() {
        let x = array![[1.0, 2.0]];
        let v = Array2::ones((2, 2));
        let w = array![[1.0]];
        let h = array![[1.0, 1.0]];
        assert!(weighted_cost(&x, &v, &w, &h).is_err());
    }

    #[test]
    fn update_fixed_point_on_exact_fit() {
        let (x, w, h) = planted(4, 6, 2, 3);
        let v = Array2::ones(x.dim());
        let h2 = update_h(&x, &v, &w, &h, 1e-12);
        let w2 = update_w(&x, &v, &w, &h2, 1e-12);
        for (a, b) in h.iter().zip(h2.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        for (a, b) in w.iter().zip(w2.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn update_single_entry_hand_values() {
        let v = array![[1.0]];
        let w = array![[1.0]];
        let h = array![[1.0]];
        let h2 = update_h(&array![[2.0]], &v, &w, &h, 0.0);
        assert_abs_diff_eq!(h2[[0, 0]], 2.0);
        let w2 = update_w(&array![[3.0]], &v, &w, &h, 0.0);
        assert_abs_diff_eq!(w2[[0, 0]], 3.0);
    }

    #[test]
    fn zero_mask_drives_factors_to_zero() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let v = Array2::zeros((2, 2));
        let w = array![[1.0], [1.0]];
        let h = array![[1.0, 1.0]];
        let h2 = update_h(&x, &v, &w, &h, 1e-12);
        assert!(h2.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn update_ratio_homogeneous_in_x() {
        let (x, w, h) = planted(3, 5, 2, 11);
        let v = Array2::ones(x.dim());
        let alpha = 4.0;
        let h_base = update_h(&x, &v, &w, &h, 0.0);
        let h_scaled = update_h(&(&x * alpha), &v, &w, &h, 0.0);
        // with the exact-fit base, ratio scales by alpha
        for (a, b) in h_base.iter().zip(h_scaled.iter()) {
            assert_abs_diff_eq!(alpha * a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn random_init_is_deterministic_and_positive() {
        let (x, _, _) = planted(6, 9, 2, 4);
        let v = Array2::ones(x.dim());
        let a = random_init(&x, &v, 2, 9).unwrap();
        let b = random_init(&x, &v, 2, 9).unwrap();
        assert_eq!(a.w0, b.w0);
        assert_eq!(a.h0, b.h0);
        assert!(a.w0.iter().chain(a.h0.iter()).all(|&e| e > 0.0));
        let c = random_init(&x, &v, 2, 10).unwrap();
        assert_ne!(a.w0, c.w0);
        assert!(random_init(&x, &v, 7, 0).is_err());
    }

    #[test]
    fn random_init_matches_observed_scale() {
        let (x, _, _) = planted(8, 10, 3, 6);
        let v = Array2::ones(x.dim());
        let init = random_init(&x, &v, 3, 1).unwrap();
        let ratio = init.w0.dot(&init.h0).mean().unwrap() / x.mean().unwrap();
        assert!((0.5..2.0).contains(&ratio), "reconstruction/data mean ratio {ratio}");
    }

    #[test]
    fn solve_planted_exact_fit() {
        let (x, _, _) = planted(10, 20, 3, 42);
        let v = Array2::ones(x.dim());
        let init = random_init(&x, &v, 3, 42).unwrap();
        let fit = solve(&x, &v, &init, &SolverConfig::default()).unwrap();
        let rel = fit.final_cost() / x.mapv(|e| e * e).sum();
        assert!(rel < 1e-6, "relative cost {rel}");
    }

    #[test]
    fn solve_rank_one_exact() {
        let x = array![[1.0, 2.0], [2.0, 4.0]];
        let v = Array2::ones((2, 2));
        let init = nndsvd_init(&x, 1).unwrap();
        let fit = solve(&x, &v, &init, &SolverConfig::default()).unwrap();
        assert!(fit.final_cost() < 1e-10, "cost {}", fit.final_cost());
    }

    #[test]
    fn solve_masked_completion() {
        let (x, _, _) = planted(10, 20, 3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let v = Array2::from_shape_fn(x.dim(), |_| if rng.random::<f64>() < 0.2 { 0.0 } else { 1.0 });
        let init = random_init(&x, &v, 3, 7).unwrap();
        let fit = solve(&x, &v, &init, &SolverConfig::default()).unwrap();
        let wh = fit.w.dot(&fit.h);
        let mut err = 0.0;
        let mut denom = 0.0;
        ndarray::Zip::from(&x).and(&v).and(&wh).for_each(|&xv, &vv, &pv| {
            if vv == 0.0 {
                err += (xv - pv) * (xv - pv);
                denom += xv * xv;
            }
        });
        assert!(err / denom < 0.05, "relative held-out error {}", err / denom);
    }

    #[test]
    fn monotone_cost_trace() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4 + (seed as usize % 6);
            let m = 5 + (seed as usize % 8);
            let r = 2 + (seed as usize % 3);
            let x = Array2::from_shape_fn((n, m), |_| rng.random::<f64>() * 5.0);
            let v = Array2::from_shape_fn((n, m), |_| if rng.random::<f64>() < 0.2 { 0.0 } else { 1.0 });
            let init = nndsvd_init(&x, r).unwrap();
            let cfg = SolverConfig {
                max_iterations: 300,
                ..Default::default()
            };
            let fit = solve(&x, &v, &init, &cfg).unwrap();
            for pair in fit.cost_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-10, "cost rose: {} -> {}", pair[0], pair[1]);
            }
            assert!(fit.w.iter().all(|&e| e >= 0.0));
            assert!(fit.h.iter().all(|&e| e >= 0.0));
        }
    }

    /// Unweighted multiplicative updates, written separately as a second
    /// route for the all-ones-mask equivalence check.
    fn update_h_unweighted(x: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>, eps: f64) -> Array2<f64> {
        let numer = w.t().dot(x);
        let denom = w.t().dot(&w.dot(h));
        let mut out = h.clone();
        ndarray::Zip::from(&mut out).and(&numer).and(&denom).for_each(|hv, &n, &d| {
            *hv *= n / (d + eps);
        });
        out
    }

    fn update_w_unweighted(x: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>, eps: f64) -> Array2<f64> {
        let numer = x.dot(&h.t());
        let denom = w.dot(h).dot(&h.t());
        let mut out = w.clone();
        ndarray::Zip::from(&mut out).and(&numer).and(&denom).for_each(|wv, &n, &d| {
            *wv *= n / (d + eps);
        });
        out
    }

    #[test]
    fn all_ones_mask_reduces_to_standard_nmf() {
        let (x, _, _) = planted(6, 9, 2, 5);
        let v = Array2::ones(x.dim());
        let init = nndsvd_init(&x, 2).unwrap().floored();
        let eps = 1e-12;

        let mut w_a = init.w0.clone();
        let mut h_a = init.h0.clone();
        let mut w_b = init.w0.clone();
        let mut h_b = init.h0.clone();
        for _ in 0..50 {
            h_a = update_h(&x, &v, &w_a, &h_a, eps);
            w_a = update_w(&x, &v, &w_a, &h_a, eps);
            h_b = update_h_unweighted(&x, &w_b, &h_b, eps);
            w_b = update_w_unweighted(&x, &w_b, &h_b, eps);
        }
        assert_eq!(w_a, w_b, "weighted route with all-ones mask must match bit-for-bit");
        assert_eq!(h_a, h_b);
    }

    #[test]
    fn cost_trace_scales_quadratically() {
        let (x, _, _) = planted(5, 8, 2, 9);
        let v = Array2::ones(x.dim());
        let init = nndsvd_init(&x, 2).unwrap();
        let cfg = SolverConfig {
            max_iterations: 60,
            tolerance: 1e-300,
            stationarity_window: 60,
            epsilon_guard: 0.0,
        };
        let base = solve(&x, &v, &init, &cfg).unwrap();

        // alpha = 4 keeps every product a power-of-two rescaling
        let alpha: f64 = 4.0;
        let scaled_init = InitPair {
            w0: init.w0.mapv(|e| e * alpha.sqrt()),
            h0: init.h0.mapv(|e| e * alpha.sqrt()),
        };
        let scaled = solve(&(&x * alpha), &v, &scaled_init, &cfg).unwrap();
        assert_eq!(base.cost_trace.len(), scaled.cost_trace.len());
        for (a, b) in base.cost_trace.iter().zip(scaled.cost_trace.iter()) {
            let rel = (alpha * alpha * a - b).abs() / b.max(1e-300);
            assert!(rel < 1e-12, "trace not alpha^2-homogeneous: {a} vs {b}");
        }
    }
}
