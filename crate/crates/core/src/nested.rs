//! Nested aggregation: a two-layer combination with concave activations.
//!
//! The per-query objective term is
//!
//! ```text
//! Phi2( sum_i W2(i) Phi1( sum_j W1(i,j) d(x_j^q | pi^q) ) )
//! ```
//!
//! with every row of `W1` and the vector `W2` on the simplex, plus Frobenius
//! regularizers. Updates are layered exponentiated steps: per query, `W1` is
//! updated first, the hidden values are recomputed with the new `W1`, and
//! then `W2` is updated.
//!
//! Two gradient modes exist. The printed update formula for the bottom layer
//! multiplies the activation slope by the plain sum of the divergences and
//! carries no chain factor from the output layer; that expression is kept as
//! [`GradientMode::PaperLiteral`]. The default [`GradientMode::Analytic`] is
//! the exact partial derivative of the objective term, verifiable by finite
//! differences. The top-layer formula is already the exact partial and is
//! shared by both modes.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::concave::{ConcaveKind, ConcaveSpec};
use crate::dataset::QueryRecord;
use crate::error::{Error, Result};
use crate::linear::{exp_weight_update, BatchMode};
use crate::rank::{rank_from_scores, Ranking, ScoreList};

/// Increasing concave activation with `value(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationSpec {
    Identity,
    /// `z -> ln(1 + z)`.
    Log1p,
    /// `z -> sqrt(1 + z) - 1`.
    Sqrt1p,
}

impl ActivationSpec {
    pub fn value(&self, z: f64) -> f64 {
        match self {
            ActivationSpec::Identity => z,
            ActivationSpec::Log1p => z.ln_1p(),
            ActivationSpec::Sqrt1p => (1.0 + z).sqrt() - 1.0,
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            ActivationSpec::Identity => 1.0,
            ActivationSpec::Log1p => 1.0 / (1.0 + z),
            ActivationSpec::Sqrt1p => 0.5 / (1.0 + z).sqrt(),
        }
    }

    /// Whether inputs must be pre-shifted into `[0, inf)` (guaranteed inside
    /// the concave increasing regime; identity accepts all reals).
    pub fn requires_nonneg(&self) -> bool {
        !matches!(self, ActivationSpec::Identity)
    }
}

impl fmt::Display for ActivationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationSpec::Identity => write!(f, "identity"),
            ActivationSpec::Log1p => write!(f, "log1p"),
            ActivationSpec::Sqrt1p => write!(f, "sqrt1p"),
        }
    }
}

impl FromStr for ActivationSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ActivationSpec::Identity),
            "log1p" => Ok(ActivationSpec::Log1p),
            "sqrt1p" => Ok(ActivationSpec::Sqrt1p),
            _ => Err(Error::InvalidConfig(format!(
                "unknown activation '{s}' (expected identity|log1p|sqrt1p)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Exact partial derivatives of the objective term (default).
    Analytic,
    /// The bottom-layer update expression exactly as printed.
    PaperLiteral,
}

impl FromStr for GradientMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(GradientMode::Analytic),
            "paper-literal" => Ok(GradientMode::PaperLiteral),
            _ => Err(Error::InvalidConfig(format!(
                "unknown gradient mode '{s}' (expected analytic|paper-literal)"
            ))),
        }
    }
}

/// Direction of the exponentiated step. The objective is stated as a
/// maximization but the printed updates step along `exp(-mu grad)`; the
/// descent reading is the default since smaller divergence means better
/// aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveSense {
    PaperDescent,
    Ascent,
}

impl FromStr for ObjectiveSense {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-descent" => Ok(ObjectiveSense::PaperDescent),
            "ascent" => Ok(ObjectiveSense::Ascent),
            _ => Err(Error::InvalidConfig(format!(
                "unknown objective sense '{s}' (expected paper-descent|ascent)"
            ))),
        }
    }
}

/// Training hyperparameters for the nested model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedTrainConfig {
    /// Hidden-layer width.
    pub k2: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub epochs: usize,
    pub batch: BatchMode,
    pub seed: u64,
    pub tol: f64,
    pub gradient_mode: GradientMode,
    pub objective_sense: ObjectiveSense,
}

impl Default for NestedTrainConfig {
    fn default() -> Self {
        Self {
            k2: 3,
            lambda1: 0.0,
            lambda2: 0.0,
            mu: 0.5,
            epochs: 100,
            batch: BatchMode::PerQuery,
            seed: 0,
            tol: 1e-8,
            gradient_mode: GradientMode::Analytic,
            objective_sense: ObjectiveSense::PaperDescent,
        }
    }
}

impl NestedTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k2 == 0 {
            return Err(Error::InvalidConfig("hidden width k2 must be >= 1".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate mu must be positive, got {}",
                self.mu
            )));
        }
        for (name, l) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be nonnegative, got {l}"
                )));
            }
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedTrainMeta {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub epochs: usize,
    pub final_objective: f64,
    pub gradient_mode: GradientMode,
    pub objective_sense: ObjectiveSense,
}

/// A trained (or hand-assigned) nested aggregation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedModel {
    pub k1: usize,
    pub k2: usize,
    #[serde(rename = "g_spec")]
    pub g: ConcaveKind,
    pub phi1: ActivationSpec,
    pub phi2: ActivationSpec,
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_meta: Option<NestedTrainMeta>,
}

fn check_simplex_group(name: &str, w: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if !wi.is_finite() || wi < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{name}[{i}] = {wi} must be finite and nonnegative"
            )));
        }
        sum += wi;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "{name} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl NestedModel {
    /// Uniform-initialized model (every row of `w1` and `w2` uniform).
    pub fn uniform(
        k1: usize,
        k2: usize,
        g: ConcaveKind,
        phi1: ActivationSpec,
        phi2: ActivationSpec,
    ) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::InvalidConfig(
                "layer widths must both be >= 1".into(),
            ));
        }
        Ok(Self {
            k1,
            k2,
            g,
            phi1,
            phi2,
            w1: vec![vec![1.0 / k1 as f64; k1]; k2],
            w2: vec![1.0 / k2 as f64; k2],
            train_meta: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.len() != self.k2 || self.w2.len() != self.k2 {
            return Err(Error::InvalidConfig(format!(
                "hidden width mismatch: k2 = {}, w1 rows = {}, w2 len = {}",
                self.k2,
                self.w1.len(),
                self.w2.len()
            )));
        }
        for (i, row) in self.w1.iter().enumerate() {
            if row.len() != self.k1 {
                return Err(Error::InvalidConfig(format!(
                    "w1 row {i} has {} entries, expected k1 = {}",
                    row.len(),
                    self.k1
                )));
            }
            check_simplex_group(&format!("w1 row {i}"), row)?;
        }
        check_simplex_group("w2", &self.w2)?;
        Ok(())
    }
}

/// Forward pass over a divergence vector: hidden combinations
/// `delta1[i] = row_i(W1) . d` and output `delta2 = W2 . Phi1(delta1)`.
pub fn nested_forward(model: &NestedModel, d: &[f64]) -> Result<(Vec<f64>, f64)> {
    if d.len() != model.k1 {
        return Err(Error::LengthMismatch {
            expected: model.k1,
            actual: d.len(),
        });
    }
    for (j, &dj) in d.iter().enumerate() {
        if !dj.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "divergence[{j}] = {dj} is not finite"
            )));
        }
    }
    let delta1: Vec<f64> = model
        .w1
        .iter()
        .map(|row| row.iter().zip(d).map(|(w, x)| w * x).sum())
        .collect();
    let mut delta2 = 0.0;
    for (i, (&w2i, &z)) in model.w2.iter().zip(&delta1).enumerate() {
        let phi = model.phi1.value(z);
        if !phi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "activation {} is not finite at hidden unit {i} (input {z})",
                model.phi1
            )));
        }
        delta2 += w2i * phi;
    }
    Ok((delta1, delta2))
}

/// The full objective over a data set for given regularization weights:
/// mean transformed per-query term plus the Frobenius penalties.
pub fn nested_objective(
    model: &NestedModel,
    data: &[QueryRecord],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let g = ConcaveSpec::new(model.g.clone(), data[0].n())?;
    let mut total = 0.0;
    for record in data {
        let d = record.divergences(&g)?;
        let (_, delta2) = nested_forward(model, &d)?;
        total += model.phi2.value(delta2);
    }
    let frob1: f64 = model
        .w1
        .iter()
        .flat_map(|row| row.iter())
        .map(|w| w * w)
        .sum();
    let frob2: f64 = model.w2.iter().map(|w| w * w).sum();
    Ok(total / data.len() as f64 + lambda1 / 2.0 * frob1 + lambda2 / 2.0 * frob2)
}

fn gradients_from_divergences(
    model: &NestedModel,
    d: &[f64],
    lambda1: f64,
    lambda2: f64,
    mode: GradientMode,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (delta1, delta2) = nested_forward(model, d)?;
    let phi2_slope = model.phi2.derivative(delta2);
    let sum_d: f64 = d.iter().sum();
    let mut grad1 = vec![vec![0.0; model.k1]; model.k2];
    for i in 0..model.k2 {
        let phi1_slope = model.phi1.derivative(delta1[i]);
        for j in 0..model.k1 {
            let data_term = match mode {
                GradientMode::Analytic => phi2_slope * model.w2[i] * phi1_slope * d[j],
                GradientMode::PaperLiteral => phi1_slope * sum_d,
            };
            grad1[i][j] = data_term + lambda1 * model.w1[i][j];
        }
    }
    let grad2: Vec<f64> = (0..model.k2)
        .map(|i| phi2_slope * model.phi1.value(delta1[i]) + lambda2 * model.w2[i])
        .collect();
    for row in &grad1 {
        for &v in row {
            if !v.is_finite() {
                return Err(Error::InvalidConfig("non-finite bottom-layer gradient".into()));
            }
        }
    }
    if grad2.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite top-layer gradient".into()));
    }
    Ok((grad1, grad2))
}

/// Per-query gradients of the objective term at the model's current weights.
///
/// Both layers are evaluated from the same forward pass; the staged
/// re-forward between the two layer updates is a training-loop concern, not
/// part of the gradient definition.
pub fn nested_gradients(
    model: &NestedModel,
    record: &QueryRecord,
    lambda1: f64,
    lambda2: f64,
    mode: GradientMode,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let g = ConcaveSpec::new(model.g.clone(), record.n())?;
    let d = record.divergences(&g)?;
    gradients_from_divergences(model, &d, lambda1, lambda2, mode)
}

fn signed(grad: Vec<f64>, sense: ObjectiveSense) -> Vec<f64> {
    match sense {
        ObjectiveSense::PaperDescent => grad,
        ObjectiveSense::Ascent => grad.into_iter().map(|g| -g).collect(),
    }
}

pub(crate) fn update_from_divergences(
    model: &mut NestedModel,
    d: &[f64],
    cfg: &NestedTrainConfig,
) -> Result<()> {
    // Bottom layer first, from the pre-update forward values.
    let (grad1, _) =
        gradients_from_divergences(model, d, cfg.lambda1, cfg.lambda2, cfg.gradient_mode)?;
    for (row, grad_row) in model.w1.iter_mut().zip(grad1) {
        *row = exp_weight_update(row, &signed(grad_row, cfg.objective_sense), cfg.mu)?;
    }
    // Re-forward with the new bottom layer, then update the top layer.
    let (_, grad2) =
        gradients_from_divergences(model, d, cfg.lambda1, cfg.lambda2, cfg.gradient_mode)?;
    model.w2 = exp_weight_update(&model.w2, &signed(grad2, cfg.objective_sense), cfg.mu)?;
    Ok(())
}

fn snapshot(model: &NestedModel) -> Vec<f64> {
    model
        .w1
        .iter()
        .flat_map(|r| r.iter().copied())
        .chain(model.w2.iter().copied())
        .collect()
}

/// Trains a nested model from uniform initialization.
pub fn train_nested(
    data: &[QueryRecord],
    g: &ConcaveSpec,
    phi1: ActivationSpec,
    phi2: ActivationSpec,
    cfg: &NestedTrainConfig,
) -> Result<NestedModel> {
    cfg.validate()?;
    let first = data.first().ok_or(Error::EmptyData)?;
    let k1 = first.k();
    if g.len() != first.n() {
        return Err(Error::LengthMismatch {
            expected: first.n(),
            actual: g.len(),
        });
    }
    let mut model = NestedModel::uniform(k1, cfg.k2, g.kind().clone(), phi1, phi2)?;
    let mut last_objective = nested_objective(&model, data, cfg.lambda1, cfg.lambda2)?;
    let mut epochs_run = 0;
    let mut prev_delta_sign = 0i8;
    let mut oscillations = 0usize;
    for epoch in 1..=cfg.epochs {
        let before = snapshot(&model);
        match cfg.batch {
            BatchMode::PerQuery => {
                for record in data {
                    let d = record.divergences(g)?;
                    update_from_divergences(&mut model, &d, cfg)?;
                }
            }
            BatchMode::Full => {
                // Mean bottom-layer gradient at current weights, one update,
                // then mean top-layer gradient with the new bottom layer.
                let q = data.len() as f64;
                let mut mean1 = vec![vec![0.0; k1]; cfg.k2];
                for record in data {
                    let d = record.divergences(g)?;
                    let (g1, _) = gradients_from_divergences(
                        &model,
                        &d,
                        cfg.lambda1,
                        cfg.lambda2,
                        cfg.gradient_mode,
                    )?;
                    for (acc, row) in mean1.iter_mut().zip(g1) {
                        for (a, v) in acc.iter_mut().zip(row) {
                            *a += v / q;
                        }
                    }
                }
                for (row, grad_row) in model.w1.iter_mut().zip(mean1) {
                    *row = exp_weight_update(row, &signed(grad_row, cfg.objective_sense), cfg.mu)?;
                }
                let mut mean2 = vec![0.0; cfg.k2];
                for record in data {
                    let d = record.divergences(g)?;
                    let (_, g2) = gradients_from_divergences(
                        &model,
                        &d,
                        cfg.lambda1,
                        cfg.lambda2,
                        cfg.gradient_mode,
                    )?;
                    for (a, v) in mean2.iter_mut().zip(g2) {
                        *a += v / q;
                    }
                }
                model.w2 = exp_weight_update(&model.w2, &signed(mean2, cfg.objective_sense), cfg.mu)?;
            }
        }
        let objective = nested_objective(&model, data, cfg.lambda1, cfg.lambda2)?;
        if !objective.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_objective,
            });
        }
        log::info!("nested epoch {epoch}: objective {objective:.9}");
        let delta_obj = objective - last_objective;
        if delta_obj.abs() > 1e-9 {
            let sign = if delta_obj > 0.0 { 1 } else { -1 };
            if prev_delta_sign != 0 && sign != prev_delta_sign {
                oscillations += 1;
            }
            prev_delta_sign = sign;
        }
        last_objective = objective;
        epochs_run = epoch;
        let after = snapshot(&model);
        let delta = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if delta < cfg.tol {
            break;
        }
    }
    if oscillations > epochs_run / 2 && epochs_run >= 4 {
        log::warn!(
            "nested objective oscillated in {oscillations} of {epochs_run} epochs; \
             consider lowering mu (final objective {last_objective})"
        );
    }
    model.train_meta = Some(NestedTrainMeta {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        mu: cfg.mu,
        epochs: epochs_run,
        final_objective: last_objective,
        gradient_mode: cfg.gradient_mode,
        objective_sense: cfg.objective_sense,
    });
    Ok(model)
}

/// Inference: pushes the raw candidate scores through the two-layer map and
/// sorts the result descending.
///
/// When an activation requires nonnegative inputs and negatives occur, the
/// whole layer input batch is shifted up by its minimum. The shift is uniform
/// across candidates, so within-layer candidate order is preserved; only the
/// reported scores change.
pub fn infer_nested(model: &NestedModel, lists: &[ScoreList]) -> Result<(Ranking, ScoreList)> {
    model.validate()?;
    if lists.len() != model.k1 {
        return Err(Error::IncompatibleModel {
            model_k: model.k1,
            data_k: lists.len(),
        });
    }
    let n = lists[0].len();
    // Layer 1: per hidden row, the weighted score sum over scorers.
    let mut hidden: Vec<Vec<f64>> = model
        .w1
        .iter()
        .map(|row| crate::linear::fuse_scores(row, lists))
        .collect::<Result<_>>()?;
    if model.phi1.requires_nonneg() {
        let min = hidden
            .iter()
            .flat_map(|r| r.iter().copied())
            .fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            for row in &mut hidden {
                for v in row.iter_mut() {
                    *v -= min;
                }
            }
        }
    }
    let mut combined = vec![0.0; n];
    for (i, row) in hidden.iter().enumerate() {
        for (c, &z) in row.iter().enumerate() {
            let u = model.phi1.value(z);
            if !u.is_finite() {
                return Err(Error::ActivationDomain {
                    candidate: c,
                    input: z,
                    activation: model.phi1.to_string(),
                });
            }
            combined[c] += model.w2[i] * u;
        }
    }
    // Layer 2.
    if model.phi2.requires_nonneg() {
        let min = combined.iter().copied().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            for v in &mut combined {
                *v -= min;
            }
        }
    }
    let mut fused = vec![0.0; n];
    for (c, &z) in combined.iter().enumerate() {
        let v = model.phi2.value(z);
        if !v.is_finite() {
            return Err(Error::ActivationDomain {
                candidate: c,
                input: z,
                activation: model.phi2.to_string(),
            });
        }
        fused[c] = v;
    }
    let fused = ScoreList::new(fused)?;
    let ranking = rank_from_scores(&fused);
    let sorted = ranking
        .order()
        .iter()
        .map(|&c| fused.scores()[c])
        .collect::<Vec<_>>();
    Ok((ranking, ScoreList::new(sorted)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{infer_linear, train_linear, LinearModel, TrainConfig};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn record(id: &str, lists: Vec<Vec<f64>>, truth: Vec<usize>) -> QueryRecord {
        QueryRecord::new(
            id.into(),
            lists
                .into_iter()
                .map(|l| ScoreList::new(l).unwrap())
                .collect(),
            Ranking::new(truth).unwrap(),
            None,
        )
        .unwrap()
    }

    fn model_with(
        w1: Vec<Vec<f64>>,
        w2: Vec<f64>,
        phi1: ActivationSpec,
        phi2: ActivationSpec,
    ) -> NestedModel {
        let k1 = w1[0].len();
        let k2 = w1.len();
        let m = NestedModel {
            k1,
            k2,
            g: ConcaveKind::Sqrt,
            phi1,
            phi2,
            w1,
            w2,
            train_meta: None,
        };
        m.validate().unwrap();
        m
    }

    #[test]
    fn activations_are_increasing_concave_from_zero() {
        for phi in [
            ActivationSpec::Identity,
            ActivationSpec::Log1p,
            ActivationSpec::Sqrt1p,
        ] {
            assert_eq!(phi.value(0.0), 0.0);
            let mut prev_slope = f64::INFINITY;
            for step in 0..=100 {
                let z = step as f64;
                let slope = phi.derivative(z);
                assert!(slope > 0.0);
                assert!(slope <= prev_slope + 1e-12);
                prev_slope = slope;
                // Derivative against finite differences (one-sided at 0).
                let h = 1e-6;
                let lo = if z == 0.0 { 0.0 } else { z - h };
                let fd = (phi.value(z + h) - phi.value(lo)) / (z + h - lo);
                assert_relative_eq!(slope, fd, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn forward_zero_divergences() {
        let m = NestedModel::uniform(
            3,
            2,
            ConcaveKind::Sqrt,
            ActivationSpec::Log1p,
            ActivationSpec::Log1p,
        )
        .unwrap();
        let (d1, d2) = nested_forward(&m, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(d1, vec![0.0, 0.0]);
        assert_eq!(d2, 0.0);
    }

    #[test]
    fn forward_frozen_example() {
        // K1=2, K2=1, W1=((0.5,0.5)), W2=(1), Phi1=identity, d=(0.2,0.8).
        let m = model_with(
            vec![vec![0.5, 0.5]],
            vec![1.0],
            ActivationSpec::Identity,
            ActivationSpec::Identity,
        );
        let (d1, d2) = nested_forward(&m, &[0.2, 0.8]).unwrap();
        assert_relative_eq!(d1[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(d2, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn forward_one_hot_rows_select_scorer() {
        let m = model_with(
            vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![0.2, 0.3, 0.5],
            ActivationSpec::Identity,
            ActivationSpec::Identity,
        );
        let (d1, _) = nested_forward(&m, &[0.9, 0.4]).unwrap();
        assert!(d1.iter().all(|&v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn objective_examples() {
        let g = ConcaveSpec::sqrt(2).unwrap();
        // All divergences zero (lists sort like truth), lambdas zero.
        let consistent = vec![record("a", vec![vec![2.0, 1.0], vec![3.0, 0.0]], vec![0, 1])];
        let m = NestedModel::uniform(
            2,
            2,
            ConcaveKind::Sqrt,
            ActivationSpec::Log1p,
            ActivationSpec::Log1p,
        )
        .unwrap();
        assert_relative_eq!(
            nested_objective(&m, &consistent, 0.0, 0.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // Frobenius norms of uniform weights, K1=K2=2: (1/2)(4*0.25)+(1/2)(2*0.25).
        assert_relative_eq!(
            nested_objective(&m, &consistent, 1.0, 1.0).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        let _ = g;
    }

    #[test]
    fn objective_identity_single_row_equals_forward() {
        // d = (0.2, 0.8) built as in the linear tests via custom deltas.
        let g = ConcaveKind::Custom {
            deltas: vec![1.0, 0.8],
        };
        let data = vec![record("q", vec![vec![1.0, 0.0], vec![4.0, 0.0]], vec![1, 0])];
        let mut m = model_with(
            vec![vec![0.5, 0.5]],
            vec![1.0],
            ActivationSpec::Identity,
            ActivationSpec::Identity,
        );
        m.g = g;
        let obj = nested_objective(&m, &data, 0.0, 0.0).unwrap();
        assert_relative_eq!(obj, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gradients_frozen_example() {
        // Phi1=Phi2=identity, K2=1, W2=(1), lambdas 0, d=(0.2,0.8):
        // analytic grad1 = d, grad2 = delta1.
        let m = model_with(
            vec![vec![0.25, 0.75]],
            vec![1.0],
            ActivationSpec::Identity,
            ActivationSpec::Identity,
        );
        let (g1, g2) =
            gradients_from_divergences(&m, &[0.2, 0.8], 0.0, 0.0, GradientMode::Analytic).unwrap();
        assert_relative_eq!(g1[0][0], 0.2, epsilon = 1e-15);
        assert_relative_eq!(g1[0][1], 0.8, epsilon = 1e-15);
        let delta1 = 0.25 * 0.2 + 0.75 * 0.8;
        assert_relative_eq!(g2[0], delta1, epsilon = 1e-15);
    }

    #[test]
    fn gradients_zero_divergences_vanish() {
        let m = NestedModel::uniform(
            3,
            2,
            ConcaveKind::Sqrt,
            ActivationSpec::Log1p,
            ActivationSpec::Sqrt1p,
        )
        .unwrap();
        let (g1, g2) =
            gradients_from_divergences(&m, &[0.0; 3], 0.0, 0.0, GradientMode::Analytic).unwrap();
        assert!(g1.iter().flatten().all(|&v| v == 0.0));
        assert!(g2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn literal_and_analytic_induce_same_update_on_equal_divergences() {
        // With equal divergence components both modes produce gradients that
        // are constant within each normalization group, hence identical
        // (trivial) multiplicative updates, even though the raw vectors
        // differ by a factor of K1.
        let m = model_with(
            vec![vec![0.5, 0.5]],
            vec![1.0],
            ActivationSpec::Identity,
            ActivationSpec::Identity,
        );
        let d = [0.3, 0.3];
        let (lit1, lit2) =
            gradients_from_divergences(&m, &d, 0.0, 0.0, GradientMode::PaperLiteral).unwrap();
        let (ana1, ana2) =
            gradients_from_divergences(&m, &d, 0.0, 0.0, GradientMode::Analytic).unwrap();
        let up_lit = exp_weight_update(&m.w1[0], &lit1[0], 0.7).unwrap();
        let up_ana = exp_weight_update(&m.w1[0], &ana1[0], 0.7).unwrap();
        for (a, b) in up_lit.iter().zip(&up_ana) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        // Top-layer formula is shared verbatim.
        assert_eq!(lit2, ana2);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let k1 = rng.random_range(1..=5);
            let k2 = rng.random_range(1..=4);
            let d: Vec<f64> = (0..k1).map(|_| rng.random_range(0.0..3.0)).collect();
            let lambda1 = rng.random_range(0.0..1.0);
            let lambda2 = rng.random_range(0.0..1.0);
            let phis = [
                ActivationSpec::Identity,
                ActivationSpec::Log1p,
                ActivationSpec::Sqrt1p,
            ];
            let phi1 = phis[rng.random_range(0..3)];
            let phi2 = phis[rng.random_range(0..3)];
            let mut m = NestedModel::uniform(k1, k2, ConcaveKind::Sqrt, phi1, phi2).unwrap();
            // Random interior weights.
            for row in &mut m.w1 {
                let raw: Vec<f64> = (0..k1).map(|_| rng.random_range(0.1..1.0)).collect();
                let s: f64 = raw.iter().sum();
                *row = raw.into_iter().map(|v| v / s).collect();
            }
            let raw: Vec<f64> = (0..k2).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            m.w2 = raw.into_iter().map(|v| v / s).collect();

            let term = |m: &NestedModel| -> f64 {
                let (_, delta2) = nested_forward(m, &d).unwrap();
                let frob1: f64 = m.w1.iter().flatten().map(|w| w * w).sum();
                let frob2: f64 = m.w2.iter().map(|w| w * w).sum();
                m.phi2.value(delta2) + lambda1 / 2.0 * frob1 + lambda2 / 2.0 * frob2
            };
            let (g1, g2) =
                gradients_from_divergences(&m, &d, lambda1, lambda2, GradientMode::Analytic)
                    .unwrap();
            let step = 1e-6;
            for i in 0..k2 {
                for j in 0..k1 {
                    let mut plus = m.clone();
                    plus.w1[i][j] += step;
                    let mut minus = m.clone();
                    minus.w1[i][j] -= step;
                    let fd = (term(&plus) - term(&minus)) / (2.0 * step);
                    let denom = g1[i][j].abs().max(1e-6);
                    assert!(
                        (g1[i][j] - fd).abs() / denom <= 1e-5,
                        "w1[{i}][{j}]: analytic {} vs fd {fd}",
                        g1[i][j]
                    );
                }
                let mut plus = m.clone();
                plus.w2[i] += step;
                let mut minus = m.clone();
                minus.w2[i] -= step;
                let fd = (term(&plus) - term(&minus)) / (2.0 * step);
                let denom = g2[i].abs().max(1e-6);
                assert!(
                    (g2[i] - fd).abs() / denom <= 1e-5,
                    "w2[{i}]: analytic {} vs fd {fd}",
                    g2[i]
                );
            }
        }
    }

    #[test]
    fn zero_divergence_data_leaves_weights_at_initialization() {
        let g = ConcaveSpec::sqrt(2).unwrap();
        let data = vec![record("a", vec![vec![2.0, 1.0], vec![3.0, 0.0]], vec![0, 1])];
        let cfg = NestedTrainConfig {
            k2: 2,
            lambda1: 0.7,
            lambda2: 0.4,
            epochs: 20,
            ..NestedTrainConfig::default()
        };
        let m = train_nested(
            &data,
            &g,
            ActivationSpec::Log1p,
            ActivationSpec::Log1p,
            &cfg,
        )
        .unwrap();
        for row in &m.w1 {
            for &w in row {
                assert_relative_eq!(w, 0.5, epsilon = 1e-12);
            }
        }
        for &w in &m.w2 {
            assert_relative_eq!(w, 0.5, epsilon = 1e-12);
        }
    }

    fn noisy_data(n: usize, k: usize, q: usize, seed: u64) -> Vec<QueryRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..q)
            .map(|qi| {
                let latent: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let truth = crate::rank::rank_indices_desc(&latent);
                let lists: Vec<Vec<f64>> = (0..k)
                    .map(|i| {
                        latent
                            .iter()
                            .map(|&v| v + rng.random_range(-0.1..0.1) * (i + 1) as f64)
                            .collect()
                    })
                    .collect();
                record(&format!("q{qi}"), lists, truth)
            })
            .collect()
    }

    #[test]
    fn k2_one_identity_reduces_to_linear_training() {
        let data = noisy_data(5, 3, 12, 77);
        let g = ConcaveSpec::sqrt(5).unwrap();
        let lin_cfg = TrainConfig {
            lambda: 0.3,
            mu: 0.4,
            epochs: 25,
            ..TrainConfig::default()
        };
        let nest_cfg = NestedTrainConfig {
            k2: 1,
            lambda1: 0.3,
            lambda2: 0.0,
            mu: 0.4,
            epochs: 25,
            ..NestedTrainConfig::default()
        };
        let lin = train_linear(&data, &g, &lin_cfg).unwrap();
        let nest = train_nested(
            &data,
            &g,
            ActivationSpec::Identity,
            ActivationSpec::Identity,
            &nest_cfg,
        )
        .unwrap();
        for (a, b) in nest.w1[0].iter().zip(&lin.weights) {
            assert!((a - b).abs() < 1e-3, "nested {a} vs linear {b}");
        }
        assert_eq!(nest.w2, vec![1.0]);

        // Inference parity on fresh lists.
        let fresh = noisy_data(5, 3, 4, 78);
        for rec in &fresh {
            let (r_lin, s_lin) = infer_linear(&lin, &rec.lists).unwrap();
            let lin_as_row = LinearModel::new(nest.w1[0].clone(), ConcaveKind::Sqrt).unwrap();
            let (r_row, _) = infer_linear(&lin_as_row, &rec.lists).unwrap();
            let (r_nest, s_nest) = infer_nested(&nest, &rec.lists).unwrap();
            assert_eq!(r_nest.order(), r_row.order());
            assert_eq!(r_lin.order(), r_nest.order());
            for (a, b) in s_lin.scores().iter().zip(s_nest.scores()) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn k1_one_keeps_all_weights_trivial() {
        let data = noisy_data(4, 1, 8, 5);
        let g = ConcaveSpec::sqrt(4).unwrap();
        let cfg = NestedTrainConfig {
            k2: 3,
            epochs: 15,
            ..NestedTrainConfig::default()
        };
        let m = train_nested(
            &data,
            &g,
            ActivationSpec::Log1p,
            ActivationSpec::Identity,
            &cfg,
        )
        .unwrap();
        for row in &m.w1 {
            assert_eq!(row, &vec![1.0]);
        }
        // Identical hidden values leave w2 uniform.
        for &w in &m.w2 {
            assert_relative_eq!(w, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn simplex_preserved_through_training() {
        let data = noisy_data(6, 4, 10, 9);
        let g = ConcaveSpec::sqrt(6).unwrap();
        let cfg = NestedTrainConfig {
            k2: 3,
            lambda1: 0.1,
            lambda2: 0.1,
            mu: 0.8,
            epochs: 30,
            ..NestedTrainConfig::default()
        };
        let m = train_nested(
            &data,
            &g,
            ActivationSpec::Sqrt1p,
            ActivationSpec::Log1p,
            &cfg,
        )
        .unwrap();
        for row in &m.w1 {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|&w| w >= 0.0));
        }
        assert!((m.w2.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ascent_sense_flips_drift_direction() {
        // One scorer good, one bad: descent shifts mass to the good scorer,
        // ascent to the bad one.
        let data = {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            (0..10)
                .map(|qi| {
                    let latent: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
                    let truth = crate::rank::rank_indices_desc(&latent);
                    let bad: Vec<f64> = latent.iter().map(|v| -v).collect();
                    record(&format!("q{qi}"), vec![latent.clone(), bad], truth)
                })
                .collect::<Vec<_>>()
        };
        let g = ConcaveSpec::sqrt(5).unwrap();
        let mut cfg = NestedTrainConfig {
            k2: 1,
            epochs: 10,
            mu: 0.3,
            ..NestedTrainConfig::default()
        };
        let descent = train_nested(
            &data,
            &g,
            ActivationSpec::Identity,
            ActivationSpec::Identity,
            &cfg,
        )
        .unwrap();
        cfg.objective_sense = ObjectiveSense::Ascent;
        let ascent = train_nested(
            &data,
            &g,
            ActivationSpec::Identity,
            ActivationSpec::Identity,
            &cfg,
        )
        .unwrap();
        assert!(descent.w1[0][0] > 0.9);
        assert!(ascent.w1[0][0] < 0.1);
    }

    #[test]
    fn infer_structural_reduction_matches_linear() {
        let weights = vec![0.3, 0.7];
        let m = model_with(
            vec![weights.clone()],
            vec![1.0],
            ActivationSpec::Identity,
            ActivationSpec::Identity,
        );
        let lin = LinearModel::new(weights, ConcaveKind::Sqrt).unwrap();
        let lists = vec![
            ScoreList::new(vec![0.5, -0.25, 1.5]).unwrap(),
            ScoreList::new(vec![-1.0, 2.0, 0.0]).unwrap(),
        ];
        let (r1, s1) = infer_nested(&m, &lists).unwrap();
        let (r2, s2) = infer_linear(&lin, &lists).unwrap();
        assert_eq!(r1.order(), r2.order());
        assert_eq!(s1.scores(), s2.scores());
    }

    #[test]
    fn infer_identical_lists_reduce_to_plain_ranking() {
        let x = vec![0.4, -0.2, 0.9, 0.4];
        let lists = vec![
            ScoreList::new(x.clone()).unwrap(),
            ScoreList::new(x.clone()).unwrap(),
        ];
        let m = model_with(
            vec![vec![0.6, 0.4], vec![0.2, 0.8]],
            vec![0.5, 0.5],
            ActivationSpec::Log1p,
            ActivationSpec::Sqrt1p,
        );
        let (ranking, _) = infer_nested(&m, &lists).unwrap();
        let expected = rank_from_scores(&ScoreList::new(x).unwrap());
        assert_eq!(ranking.order(), expected.order());
    }

    #[test]
    fn infer_symmetric_tie() {
        let m = model_with(
            vec![vec![0.5, 0.5]],
            vec![1.0],
            ActivationSpec::Identity,
            ActivationSpec::Identity,
        );
        let lists = vec![
            ScoreList::new(vec![1.0, 0.0]).unwrap(),
            ScoreList::new(vec![0.0, 1.0]).unwrap(),
        ];
        let (ranking, sorted) = infer_nested(&m, &lists).unwrap();
        assert_eq!(ranking.order(), &[0, 1]);
        assert_eq!(sorted.scores(), &[0.5, 0.5]);
    }

    #[test]
    fn infer_shifts_negatives_into_domain() {
        // log1p over raw scores below -1 would be undefined without the shift.
        let m = model_with(
            vec![vec![1.0]],
            vec![1.0],
            ActivationSpec::Log1p,
            ActivationSpec::Log1p,
        );
        let lists = vec![ScoreList::new(vec![-5.0, -3.0, -4.0]).unwrap()];
        let (ranking, sorted) = infer_nested(&m, &lists).unwrap();
        assert_eq!(ranking.order(), &[1, 2, 0]);
        assert!(sorted.scores().iter().all(|v| v.is_finite()));
        // Monotone map: order must match the raw score order.
        assert!(sorted.scores().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn model_json_round_trip() {
        let data = noisy_data(4, 2, 6, 3);
        let g = ConcaveSpec::sqrt(4).unwrap();
        let cfg = NestedTrainConfig {
            k2: 2,
            epochs: 5,
            ..NestedTrainConfig::default()
        };
        let m = train_nested(
            &data,
            &g,
            ActivationSpec::Log1p,
            ActivationSpec::Identity,
            &cfg,
        )
        .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: NestedModel = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
        assert!(json.contains("\"phi1\":\"log1p\""));
    }
}
