//! Wall-clock scaling measurements for the training loops.
//!
//! Per-epoch training cost is dominated by the divergence evaluations,
//! `O(|Q| N K log N)`, so the fitted log-log exponent of per-epoch time on N
//! should sit a little above 1. The nested hidden layer adds `O(K1 K2)` per
//! query, measured separately with fixed divergences so the sort cost does
//! not mask it.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::concave::ConcaveSpec;
use crate::error::Result;
use crate::linear::{train_linear, BatchMode, TrainConfig};
use crate::nested::{update_from_divergences, ActivationSpec, NestedModel, NestedTrainConfig};
use crate::synth::{generate_synthetic, GeneratorParams, ScorerProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingMeasurement {
    pub n: usize,
    pub k: usize,
    pub per_epoch_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDoubling {
    pub n: usize,
    pub k: usize,
    pub per_epoch_ms: f64,
    pub per_epoch_ms_doubled: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct K2Scaling {
    pub k1: usize,
    pub k2_small: usize,
    pub k2_large: usize,
    pub per_query_us_small: f64,
    pub per_query_us_large: f64,
    pub time_ratio: f64,
    pub k2_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_scaling: Vec<ScalingMeasurement>,
    pub fitted_exponent: f64,
    pub k_doubling: KDoubling,
    pub k2_scaling: K2Scaling,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn epochs_for(n: usize) -> usize {
    // Enough epochs that small-N measurements rise above timer noise.
    if n <= 200 {
        40
    } else if n <= 2000 {
        10
    } else {
        3
    }
}

/// Median per-epoch wall time (ms) of linear training on a synthetic dataset
/// of the given shape. Divergences are recomputed every epoch, so this tracks
/// the `N K log N` work directly.
pub fn time_linear_per_epoch(
    n: usize,
    k: usize,
    queries: usize,
    seed: u64,
    repeats: usize,
) -> Result<f64> {
    let params = GeneratorParams::uniform(k, ScorerProfile::default());
    let data = generate_synthetic(n, queries, &params, seed, "bench")?;
    let g = ConcaveSpec::sqrt(n)?;
    let epochs = epochs_for(n);
    let cfg = TrainConfig {
        lambda: 0.0,
        mu: 1e-3,
        epochs,
        batch: BatchMode::PerQuery,
        seed,
        tol: 0.0,
    };
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        train_linear(&data.records, &g, &cfg)?;
        times.push(start.elapsed().as_secs_f64() * 1000.0 / epochs as f64);
    }
    Ok(median(times))
}

/// Mean per-query wall time (microseconds) of one nested two-layer update
/// with a fixed divergence vector: forward, bottom update, re-forward, top
/// update. Isolates the `K1 K2` hidden-layer cost from the sort.
pub fn time_nested_update_per_query(k1: usize, k2: usize, iterations: usize) -> Result<f64> {
    let d: Vec<f64> = (0..k1).map(|j| 0.1 + 0.01 * j as f64).collect();
    let cfg = NestedTrainConfig {
        k2,
        mu: 1e-4,
        ..NestedTrainConfig::default()
    };
    let mut model = NestedModel::uniform(
        k1,
        k2,
        crate::concave::ConcaveKind::Sqrt,
        ActivationSpec::Log1p,
        ActivationSpec::Identity,
    )?;
    for _ in 0..(iterations / 10).max(1) {
        update_from_divergences(&mut model, &d, &cfg)?;
    }
    let start = Instant::now();
    for _ in 0..iterations.max(1) {
        update_from_divergences(&mut model, &d, &cfg)?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e6 / iterations.max(1) as f64)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_exponent(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in points {
        sx += x.ln();
        sy += y.ln();
    }
    let (mx, my) = (sx / n, sy / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in points {
        num += (x.ln() - mx) * (y.ln() - my);
        den += (x.ln() - mx) * (x.ln() - mx);
    }
    num / den
}

/// Full scaling suite: N-grid exponent fit, K-doubling ratio, and the hidden
/// layer's K2 cost comparison.
pub fn run_bench(
    n_grid: &[usize],
    k: usize,
    k2_pair: (usize, usize),
    repeats: usize,
    seed: u64,
) -> Result<BenchReport> {
    let queries = 6;
    let mut n_scaling = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let per_epoch_ms = time_linear_per_epoch(n, k, queries, seed, repeats)?;
        n_scaling.push(ScalingMeasurement { n, k, per_epoch_ms });
    }
    let points: Vec<(f64, f64)> = n_scaling
        .iter()
        .map(|m| (m.n as f64, m.per_epoch_ms.max(1e-6)))
        .collect();
    let fitted_exponent = fit_log_exponent(&points);

    let n_mid = n_grid[n_grid.len() / 2];
    let base = time_linear_per_epoch(n_mid, k, queries, seed, repeats)?;
    let doubled = time_linear_per_epoch(n_mid, 2 * k, queries, seed, repeats)?;
    let k_doubling = KDoubling {
        n: n_mid,
        k,
        per_epoch_ms: base,
        per_epoch_ms_doubled: doubled,
        ratio: doubled / base,
    };

    let (k2_small, k2_large) = k2_pair;
    let iterations = 20_000;
    let small = time_nested_update_per_query(k, k2_small, iterations)?;
    let large = time_nested_update_per_query(k, k2_large, iterations)?;
    let k2_scaling = K2Scaling {
        k1: k,
        k2_small,
        k2_large,
        per_query_us_small: small,
        per_query_us_large: large,
        time_ratio: large / small,
        k2_ratio: k2_large as f64 / k2_small as f64,
    };

    Ok(BenchReport {
        n_scaling,
        fitted_exponent,
        k_doubling,
        k2_scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponent_fit_recovers_power_law() {
        let points: Vec<(f64, f64)> = [100.0, 1000.0, 10000.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powf(1.17)))
            .collect();
        assert_relative_eq!(fit_log_exponent(&points), 1.17, epsilon = 1e-9);
    }

    #[test]
    fn per_epoch_timer_returns_positive() {
        let t = time_linear_per_epoch(50, 2, 3, 1, 1).unwrap();
        assert!(t > 0.0);
    }

    #[test]
    fn nested_update_timer_returns_positive() {
        let t = time_nested_update_per_query(3, 2, 200).unwrap();
        assert!(t > 0.0);
    }
}
