//! Linear aggregation: one simplex-constrained weight per scorer.
//!
//! Training minimizes the mean weighted divergence of the scorers from the
//! ground truth plus a quadratic regularizer,
//!
//! ```text
//! (1/|Q|) sum_q sum_i w_i d(x_i^q | pi^q) + (lambda/2) sum_i w_i^2
//! ```
//!
//! with exponentiated multiplicative updates that keep `w` on the simplex
//! natively. Inference is closed-form: the weighted score sum, sorted
//! descending, globally minimizes the weighted divergence over all rankings.

use serde::{Deserialize, Serialize};

use crate::concave::{ConcaveKind, ConcaveSpec};
use crate::dataset::QueryRecord;
use crate::error::{Error, Result};
use crate::rank::{rank_from_scores, Ranking, ScoreList};

/// Whether an epoch applies one update from the mean gradient or one update
/// per query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    Full,
    PerQuery,
}

/// Training hyperparameters shared by both aggregation models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Quadratic regularization weight (zero disables it).
    pub lambda: f64,
    /// Learning rate of the multiplicative update.
    pub mu: f64,
    /// Maximum number of passes over the data.
    pub epochs: usize,
    pub batch: BatchMode,
    pub seed: u64,
    /// Convergence threshold on `max_i |delta w_i|` per epoch.
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            mu: 0.5,
            epochs: 100,
            batch: BatchMode::PerQuery,
            seed: 0,
            tol: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be nonnegative, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Outcome metadata attached to a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub lambda: f64,
    pub mu: f64,
    pub epochs: usize,
    pub final_objective: f64,
}

/// A trained (or hand-assigned) linear aggregation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub k: usize,
    #[serde(rename = "g_spec")]
    pub g: ConcaveKind,
    #[serde(rename = "w")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_meta: Option<TrainMeta>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, g: ConcaveKind) -> Result<Self> {
        let model = Self {
            k: weights.len(),
            g,
            weights,
            train_meta: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn uniform(k: usize, g: ConcaveKind) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("need at least one scorer".into()));
        }
        Self::new(vec![1.0 / k as f64; k], g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::InvalidConfig("model has no weights".into()));
        }
        if self.k != self.weights.len() {
            return Err(Error::InvalidConfig(format!(
                "model K = {} does not match weight count {}",
                self.k,
                self.weights.len()
            )));
        }
        check_simplex(&self.weights)
    }
}

fn check_simplex(w: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if !wi.is_finite() || wi < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "weight[{i}] = {wi} must be finite and nonnegative"
            )));
        }
        sum += wi;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

fn check_data(data: &[QueryRecord]) -> Result<(usize, usize)> {
    let first = data.first().ok_or(Error::EmptyData)?;
    let (n, k) = (first.n(), first.k());
    for record in data {
        if record.k() != k {
            return Err(Error::InvalidRecord {
                id: record.id.clone(),
                reason: format!("record has K = {}, expected {k}", record.k()),
            });
        }
        if record.n() != n {
            return Err(Error::InvalidRecord {
                id: record.id.clone(),
                reason: format!("record has N = {}, expected {n}", record.n()),
            });
        }
    }
    Ok((n, k))
}

/// Mean per-scorer divergence from the truth over a data set.
pub(crate) fn mean_divergences(data: &[QueryRecord], g: &ConcaveSpec) -> Result<Vec<f64>> {
    let (_, k) = check_data(data)?;
    let mut mean = vec![0.0; k];
    for record in data {
        for (i, d) in record.divergences(g)?.into_iter().enumerate() {
            mean[i] += d;
        }
    }
    let q = data.len() as f64;
    for m in &mut mean {
        *m /= q;
    }
    Ok(mean)
}

/// Evaluates the training objective for an arbitrary weight vector.
///
/// The formula is well-defined off the simplex; this deliberately does not
/// enforce the constraint so that finite-difference checks can probe the
/// unconstrained extension.
pub fn linear_objective(
    w: &[f64],
    data: &[QueryRecord],
    g: &ConcaveSpec,
    lambda: f64,
) -> Result<f64> {
    let (_, k) = check_data(data)?;
    if w.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: w.len(),
        });
    }
    let mean = mean_divergences(data, g)?;
    let data_term: f64 = w.iter().zip(&mean).map(|(wi, di)| wi * di).sum();
    let reg: f64 = w.iter().map(|wi| wi * wi).sum::<f64>() * lambda / 2.0;
    Ok(data_term + reg)
}

/// Gradient of [`linear_objective`]: mean divergence per scorer plus the
/// regularizer term.
pub fn linear_gradient(
    w: &[f64],
    data: &[QueryRecord],
    g: &ConcaveSpec,
    lambda: f64,
) -> Result<Vec<f64>> {
    let (_, k) = check_data(data)?;
    if w.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: w.len(),
        });
    }
    let mut grad = mean_divergences(data, g)?;
    for (gi, wi) in grad.iter_mut().zip(w) {
        *gi += lambda * wi;
    }
    Ok(grad)
}

/// One exponentiated multiplicative step on the simplex:
/// `w_i <- w_i exp(-mu grad_i) / sum_j w_j exp(-mu grad_j)`.
///
/// Gradient components are shifted by their maximum before exponentiation;
/// the update is invariant under constant shifts, so this only prevents
/// overflow. A zero weight stays zero (the update cannot revive it) and is
/// reported as a warning.
pub fn exp_weight_update(w: &[f64], grad: &[f64], mu: f64) -> Result<Vec<f64>> {
    if grad.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            actual: grad.len(),
        });
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning rate mu must be positive, got {mu}"
        )));
    }
    check_simplex(w)?;
    for (i, &gi) in grad.iter().enumerate() {
        if !gi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gradient[{i}] = {gi} is not finite"
            )));
        }
    }
    if w.iter().any(|&wi| wi == 0.0) {
        log::warn!("multiplicative update applied to a zero weight; it stays zero");
    }
    let shift = grad
        .iter()
        .map(|&gi| -mu * gi)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = w
        .iter()
        .zip(grad)
        .map(|(&wi, &gi)| wi * (-mu * gi - shift).exp())
        .collect();
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidConfig(
            "multiplicative update collapsed to zero total mass".into(),
        ));
    }
    for o in &mut out {
        *o /= total;
    }
    debug_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    debug_assert!(out.iter().all(|&o| o >= 0.0));
    Ok(out)
}

/// Trains a linear model from uniform initialization.
///
/// Divergences are recomputed every epoch, so one epoch costs
/// `O(|Q| N K log N)`. Stops when `max_i |delta w_i|` over an epoch falls
/// under `cfg.tol` or the epoch budget is exhausted.
pub fn train_linear(
    data: &[QueryRecord],
    g: &ConcaveSpec,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    let (_, k) = check_data(data)?;
    let mut w = vec![1.0 / k as f64; k];
    let mut last_objective = linear_objective(&w, data, g, cfg.lambda)?;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.epochs {
        let w_start = w.clone();
        match cfg.batch {
            BatchMode::Full => {
                let grad = linear_gradient(&w, data, g, cfg.lambda)?;
                w = exp_weight_update(&w, &grad, cfg.mu)?;
            }
            BatchMode::PerQuery => {
                for record in data {
                    let mut grad = record.divergences(g)?;
                    for (gi, wi) in grad.iter_mut().zip(&w) {
                        *gi += cfg.lambda * wi;
                    }
                    w = exp_weight_update(&w, &grad, cfg.mu)?;
                }
            }
        }
        let objective = linear_objective(&w, data, g, cfg.lambda)?;
        if !objective.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_objective,
            });
        }
        log::info!("linear epoch {epoch}: objective {objective:.9}");
        last_objective = objective;
        epochs_run = epoch;
        let delta = w
            .iter()
            .zip(&w_start)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if delta < cfg.tol {
            break;
        }
    }
    Ok(LinearModel {
        k,
        g: g.kind().clone(),
        weights: w,
        train_meta: Some(TrainMeta {
            lambda: cfg.lambda,
            mu: cfg.mu,
            epochs: epochs_run,
            final_objective: last_objective,
        }),
    })
}

/// Weighted score sum per candidate.
pub(crate) fn fuse_scores(weights: &[f64], lists: &[ScoreList]) -> Result<Vec<f64>> {
    if lists.is_empty() {
        return Err(Error::EmptyData);
    }
    if weights.len() != lists.len() {
        return Err(Error::IncompatibleModel {
            model_k: weights.len(),
            data_k: lists.len(),
        });
    }
    let n = lists[0].len();
    let mut fused = vec![0.0; n];
    for (wi, list) in weights.iter().zip(lists) {
        if list.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: list.len(),
            });
        }
        for (f, &x) in fused.iter_mut().zip(list.scores()) {
            *f += wi * x;
        }
    }
    Ok(fused)
}

/// Closed-form inference: sorts the weighted score sum descending. Returns
/// the ranking together with the fused scores in ranked order.
pub fn infer_linear(model: &LinearModel, lists: &[ScoreList]) -> Result<(Ranking, ScoreList)> {
    model.validate()?;
    let fused = fuse_scores(&model.weights, lists)?;
    let fused = ScoreList::new(fused)?;
    let ranking = rank_from_scores(&fused);
    let sorted = ranking
        .order()
        .iter()
        .map(|&c| fused.scores()[c])
        .collect::<Vec<_>>();
    Ok((ranking, ScoreList::new(sorted)?))
}
