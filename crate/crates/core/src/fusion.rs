//! The distributed-scorers fusion harness: trains and compares aggregation
//! methods on one dataset with a train/test split.
//!
//! Two untrained baselines (uniform averaging and accuracy weighting) run
//! next to the two divergence-trained models. Per-method failures are
//! reported structurally instead of aborting the experiment.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::concave::{ConcaveKind, ConcaveSpec};
use crate::dataset::{Dataset, DatasetMeta, QueryRecord};
use crate::error::{Error, Result};
use crate::linear::{infer_linear, train_linear, LinearModel, TrainConfig};
use crate::metrics::{ndcg, DiscountSpec};
use crate::nested::{infer_nested, train_nested, ActivationSpec, NestedTrainConfig};
use crate::rank::{rank_from_scores, Ranking};

/// Aggregation methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Averaging,
    AccuracyWeighted,
    LinearLbd,
    NestedLbd,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Averaging,
        Method::AccuracyWeighted,
        Method::LinearLbd,
        Method::NestedLbd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Averaging => "averaging",
            Method::AccuracyWeighted => "accuracy_weighted",
            Method::LinearLbd => "linear_lbd",
            Method::NestedLbd => "nested_lbd",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averaging" => Ok(Method::Averaging),
            "accuracy_weighted" => Ok(Method::AccuracyWeighted),
            "linear_lbd" => Ok(Method::LinearLbd),
            "nested_lbd" => Ok(Method::NestedLbd),
            _ => Err(Error::InvalidConfig(format!("unknown method '{s}'"))),
        }
    }
}

/// Harness configuration: which methods, how to split, and the trainer
/// settings for the two learned models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub methods: Vec<Method>,
    /// Fraction of records (prefix) used for training; the rest is the test
    /// split. Records are generated i.i.d., so the prefix split is unbiased.
    pub train_fraction: f64,
    pub g: ConcaveKind,
    pub linear: TrainConfig,
    pub nested: NestedTrainConfig,
    pub phi1: ActivationSpec,
    pub phi2: ActivationSpec,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            train_fraction: 0.8,
            g: ConcaveKind::Sqrt,
            linear: TrainConfig::default(),
            nested: NestedTrainConfig::default(),
            phi1: ActivationSpec::Log1p,
            phi2: ActivationSpec::Identity,
        }
    }
}

/// Ranking-quality summary over a record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_ndcg: f64,
    pub mean_ndcg_loss: f64,
    /// Fraction of queries whose fused top candidate differs from the truth's
    /// top candidate.
    pub top1_error: f64,
    pub queries: usize,
}

/// Per-method outcome: metrics or a structured failure reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_metrics: Option<EvalMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metrics: Option<EvalMetrics>,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_fraction: f64,
    pub train_queries: usize,
    pub test_queries: usize,
}

/// Machine-readable experiment outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub dataset_meta: DatasetMeta,
    pub split: SplitInfo,
    pub per_method: BTreeMap<String, MethodReport>,
}

/// Mean NDCG / NDCG loss / top-1 error of per-record rankings.
pub fn evaluate_rankings(
    records: &[QueryRecord],
    rankings: &[Ranking],
    discount: &DiscountSpec,
) -> Result<EvalMetrics> {
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    if records.len() != rankings.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            actual: rankings.len(),
        });
    }
    let mut sum_ndcg = 0.0;
    let mut top1_misses = 0usize;
    for (record, ranking) in records.iter().zip(rankings) {
        let grades = record.effective_grades();
        sum_ndcg += ndcg(ranking, &record.truth, &grades, discount)?;
        if ranking.top() != record.truth.top() {
            top1_misses += 1;
        }
    }
    let q = records.len() as f64;
    Ok(EvalMetrics {
        mean_ndcg: sum_ndcg / q,
        mean_ndcg_loss: 1.0 - sum_ndcg / q,
        top1_error: top1_misses as f64 / q,
        queries: records.len(),
    })
}

fn evaluate_with<F>(records: &[QueryRecord], discount: &DiscountSpec, infer: F) -> Result<EvalMetrics>
where
    F: Fn(&QueryRecord) -> Result<Ranking>,
{
    let rankings = records.iter().map(&infer).collect::<Result<Vec<_>>>()?;
    evaluate_rankings(records, &rankings, discount)
}

/// Per-scorer top-1 accuracy on a record set.
fn scorer_accuracies(records: &[QueryRecord]) -> Vec<f64> {
    let k = records[0].k();
    let mut hits = vec![0usize; k];
    for record in records {
        for (i, list) in record.lists.iter().enumerate() {
            if rank_from_scores(list).top() == record.truth.top() {
                hits[i] += 1;
            }
        }
    }
    hits.into_iter()
        .map(|h| h as f64 / records.len() as f64)
        .collect()
}

/// Accuracy-weighted baseline: weights proportional to each scorer's top-1
/// training accuracy (uniform fallback when all scorers miss everything).
pub fn accuracy_weighted_model(train: &[QueryRecord], g: ConcaveKind) -> Result<LinearModel> {
    if train.is_empty() {
        return Err(Error::EmptyData);
    }
    let acc = scorer_accuracies(train);
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        LinearModel::new(acc.into_iter().map(|a| a / total).collect(), g)
    } else {
        LinearModel::uniform(train[0].k(), g)
    }
}

fn run_method(
    method: Method,
    train: &[QueryRecord],
    test: &[QueryRecord],
    cfg: &FusionConfig,
    g: &ConcaveSpec,
    discount: &DiscountSpec,
) -> MethodReport {
    let started = Instant::now();
    let outcome: Result<(serde_json::Value, EvalMetrics, EvalMetrics)> = (|| {
        let (config, infer): (serde_json::Value, Box<dyn Fn(&QueryRecord) -> Result<Ranking>>) =
            match method {
                Method::Averaging => {
                    let model = LinearModel::uniform(train[0].k(), cfg.g.clone())?;
                    (
                        serde_json::json!({ "weights": model.weights }),
                        Box::new(move |r: &QueryRecord| Ok(infer_linear(&model, &r.lists)?.0)),
                    )
                }
                Method::AccuracyWeighted => {
                    let model = accuracy_weighted_model(train, cfg.g.clone())?;
                    (
                        serde_json::json!({ "weights": model.weights }),
                        Box::new(move |r: &QueryRecord| Ok(infer_linear(&model, &r.lists)?.0)),
                    )
                }
                Method::LinearLbd => {
                    let model = train_linear(train, g, &cfg.linear)?;
                    (
                        serde_json::json!({
                            "train": cfg.linear,
                            "g": cfg.g,
                            "weights": model.weights,
                        }),
                        Box::new(move |r: &QueryRecord| Ok(infer_linear(&model, &r.lists)?.0)),
                    )
                }
                Method::NestedLbd => {
                    let model = train_nested(train, g, cfg.phi1, cfg.phi2, &cfg.nested)?;
                    (
                        serde_json::json!({
                            "train": cfg.nested,
                            "g": cfg.g,
                            "phi1": cfg.phi1,
                            "phi2": cfg.phi2,
                        }),
                        Box::new(move |r: &QueryRecord| Ok(infer_nested(&model, &r.lists)?.0)),
                    )
                }
            };
        let train_metrics = evaluate_with(train, discount, &infer)?;
        let test_metrics = evaluate_with(test, discount, &infer)?;
        Ok((config, train_metrics, test_metrics))
    })();
    let wall_time_ms = started.elapsed().as_secs_f64() * 1000.0;
    match outcome {
        Ok((config, train_metrics, test_metrics)) => MethodReport {
            config,
            train_metrics: Some(train_metrics),
            test_metrics: Some(test_metrics),
            wall_time_ms,
            error: None,
        },
        Err(e) => MethodReport {
            config: serde_json::json!({}),
            train_metrics: None,
            test_metrics: None,
            wall_time_ms,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every requested method on a train/test split of `data` and collects
/// per-method metrics. Method failures land in the report, not in `Err`.
pub fn fusion_experiment(data: &Dataset, cfg: &FusionConfig) -> Result<FusionReport> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must lie in (0, 1), got {}",
            cfg.train_fraction
        )));
    }
    let cut = (data.records.len() as f64 * cfg.train_fraction).round() as usize;
    if cut == 0 || cut >= data.records.len() {
        return Err(Error::InvalidConfig(format!(
            "dataset with {} records cannot be split at fraction {}",
            data.records.len(),
            cfg.train_fraction
        )));
    }
    let (train, test) = data.records.split_at(cut);
    let g = ConcaveSpec::new(cfg.g.clone(), data.meta.n)?;
    let discount = DiscountSpec::log2(data.meta.n)?;

    let mut per_method = BTreeMap::new();
    for &method in &cfg.methods {
        let report = run_method(method, train, test, cfg, &g, &discount);
        per_method.insert(method.name().to_string(), report);
    }
    Ok(FusionReport {
        dataset_meta: data.meta.clone(),
        split: SplitInfo {
            train_fraction: cfg.train_fraction,
            train_queries: train.len(),
            test_queries: test.len(),
        },
        per_method,
    })
}
