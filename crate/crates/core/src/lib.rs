//! Rank aggregation over score-based permutations via Lovász–Bregman
//! divergences.
//!
//! The toolkit combines K score lists over N candidates into one consensus
//! ranking. The divergence of a score list from a ranking is parametrized by
//! a concave gain function (a cardinality-based submodular function), and two
//! aggregation models are trained with exponentiated multiplicative updates
//! on the probability simplex:
//!
//! - a linear model: one weight per scorer, closed-form inference by sorting
//!   the weighted score sum;
//! - a nested model: a two-layer combination with increasing concave
//!   activations between the layers.
//!
//! Evaluation is NDCG-based, with a divergence-derived upper bound on the
//! NDCG loss.

pub mod concave;
pub mod dataset;
pub mod divergence;
pub mod error;
pub mod fusion;
pub mod linear;
pub mod metrics;
pub mod model;
pub mod nested;
pub mod oracle;
pub mod rank;
pub mod synth;
pub mod timing;

pub use concave::{ConcaveKind, ConcaveSpec};
pub use dataset::{Dataset, DatasetMeta, QueryRecord};
pub use divergence::{h_vector, lb_divergence_cardinality, lb_divergence_general};
pub use error::{Error, Result};
pub use fusion::{
    fusion_experiment, EvalMetrics, FusionConfig, FusionReport, Method, MethodReport,
};
pub use linear::{
    exp_weight_update, infer_linear, linear_gradient, linear_objective, train_linear, BatchMode,
    LinearModel, TrainConfig, TrainMeta,
};
pub use metrics::{ndcg, ndcg_loss, prop1_bound, BoundReport, DiscountSpec, RelevanceGrades};
pub use model::{Model, MODEL_FORMAT_VERSION};
pub use nested::{
    infer_nested, nested_forward, nested_gradients, nested_objective, train_nested,
    ActivationSpec, GradientMode, NestedModel, NestedTrainConfig, NestedTrainMeta, ObjectiveSense,
};
pub use oracle::SetFunctionOracle;
pub use rank::{rank_from_scores, Ranking, ScoreList};
pub use synth::{generate_synthetic, GeneratorParams, ScorerProfile};
pub use timing::{run_bench, BenchReport};
