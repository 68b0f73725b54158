use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lbrank::{
    fusion::evaluate_rankings, generate_synthetic, lb_divergence_cardinality, prop1_bound,
    timing::run_bench, train_linear, train_nested, ActivationSpec, BatchMode, ConcaveKind,
    ConcaveSpec, Dataset, Error, GeneratorParams, GradientMode, Model, NestedTrainConfig,
    ObjectiveSense, Ranking, Result, ScorerProfile, TrainConfig,
};

use crate::config::{pick, FileConfig};
use crate::{AggregateArgs, BenchArgs, EvaluateArgs, GenerateArgs, TrainArgs};

/// One output line of `aggregate`: the fused ranking (best first) and the
/// fused scores in ranked order.
#[derive(Debug, Serialize, Deserialize)]
struct Prediction {
    id: String,
    ranking: Vec<usize>,
    sorted_scores: Vec<f64>,
}

fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, content.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_profile(spec: &str) -> Result<ScorerProfile> {
    let mut profile = ScorerProfile {
        noise_sigma: 0.0,
        bias: 0.0,
        corruption_rate: 0.0,
    };
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("--profile entry '{part}' is not key=value"))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("--profile {key}: cannot parse number '{value}'"))
        })?;
        match key.trim() {
            "noise" => profile.noise_sigma = value,
            "bias" => profile.bias = value,
            "corrupt" => profile.corruption_rate = value,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "--profile: unknown key '{other}' (expected noise|bias|corrupt)"
                )))
            }
        }
    }
    profile.validate()?;
    Ok(profile)
}

pub fn generate(args: GenerateArgs, file: &FileConfig) -> Result<()> {
    let cfg = &file.generate;
    let n = pick(args.n, cfg.n, 100);
    let k = pick(args.k, cfg.k, 8);
    let queries = pick(args.queries, cfg.queries, 1000);
    let seed = pick(args.seed, cfg.seed, 0);
    let latent_spread = pick(args.latent_spread, cfg.latent_spread, 1.0);
    let softmax = args.softmax || cfg.softmax.unwrap_or(false);
    let name = pick(args.name, cfg.name.clone(), "synthetic".to_string());
    if k == 0 {
        return Err(Error::InvalidConfig("--k must be at least 1".into()));
    }
    if queries == 0 {
        return Err(Error::InvalidConfig("--queries must be at least 1".into()));
    }
    let profile_specs = if !args.profiles.is_empty() {
        args.profiles.clone()
    } else {
        cfg.profiles.clone().unwrap_or_default()
    };
    let profiles = match profile_specs.len() {
        0 => vec![ScorerProfile::default(); k],
        1 => vec![parse_profile(&profile_specs[0])?; k],
        len if len == k => profile_specs
            .iter()
            .map(|s| parse_profile(s))
            .collect::<Result<Vec<_>>>()?,
        len => {
            return Err(Error::InvalidConfig(format!(
                "--profile given {len} times; expected 1 or K = {k}"
            )))
        }
    };
    let params = GeneratorParams {
        latent_spread,
        softmax_normalize: softmax,
        profiles,
    };
    let dataset = generate_synthetic(n, queries, &params, seed, &name)?;
    dataset.save(&args.out)?;
    println!(
        "{}",
        serde_json::json!({
            "n": n,
            "k": k,
            "queries": queries,
            "seed": seed,
            "path": args.out,
        })
    );
    Ok(())
}

pub fn train(args: TrainArgs, file: &FileConfig) -> Result<()> {
    let cfg = &file.train;
    let dataset = Dataset::load(&args.data)?;
    let g_kind: ConcaveKind = pick(args.g, cfg.g.clone(), "sqrt".to_string()).parse()?;
    let g = ConcaveSpec::new(g_kind, dataset.meta.n)?;
    let kind = pick(args.model, cfg.model.clone(), "linear".to_string());
    let batch: BatchMode = match pick(args.batch, cfg.batch.clone(), "per-query".to_string()).as_str()
    {
        "full" => BatchMode::Full,
        "per-query" => BatchMode::PerQuery,
        other => {
            return Err(Error::InvalidConfig(format!(
                "--batch must be full|per-query, got '{other}'"
            )))
        }
    };
    let mu = pick(args.mu, cfg.mu, 0.5);
    let epochs = pick(args.epochs, cfg.epochs, 100);
    let tol = pick(args.tol, cfg.tol, 1e-8);
    let seed = pick(args.seed, cfg.seed, 0);

    let model = match kind.as_str() {
        "linear" => {
            let train_cfg = TrainConfig {
                lambda: pick(args.lambda, cfg.lambda, 0.0),
                mu,
                epochs,
                batch,
                seed,
                tol,
            };
            Model::Linear(train_linear(&dataset.records, &g, &train_cfg)?)
        }
        "nested" => {
            let phi1: ActivationSpec =
                pick(args.phi1, cfg.phi1.clone(), "log1p".to_string()).parse()?;
            let phi2: ActivationSpec =
                pick(args.phi2, cfg.phi2.clone(), "identity".to_string()).parse()?;
            let gradient_mode: GradientMode =
                pick(args.gradient_mode, cfg.gradient_mode.clone(), "analytic".to_string())
                    .parse()?;
            let objective_sense: ObjectiveSense =
                pick(args.sense, cfg.sense.clone(), "paper-descent".to_string()).parse()?;
            let nested_cfg = NestedTrainConfig {
                k2: pick(args.k2, cfg.k2, 3),
                lambda1: pick(args.lambda1, cfg.lambda1, 0.0),
                lambda2: pick(args.lambda2, cfg.lambda2, 0.0),
                mu,
                epochs,
                batch,
                seed,
                tol,
                gradient_mode,
                objective_sense,
            };
            Model::Nested(train_nested(&dataset.records, &g, phi1, phi2, &nested_cfg)?)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "--model must be linear|nested, got '{other}'"
            )))
        }
    };
    model.save(&args.out)?;
    let final_objective = match &model {
        Model::Linear(m) => m.train_meta.as_ref().map(|t| t.final_objective),
        Model::Nested(m) => m.train_meta.as_ref().map(|t| t.final_objective),
    };
    println!(
        "{}",
        serde_json::json!({
            "kind": model.kind_name(),
            "k": model.k(),
            "final_objective": final_objective,
            "path": args.out,
        })
    );
    Ok(())
}

pub fn aggregate(args: AggregateArgs, _file: &FileConfig) -> Result<()> {
    let model = Model::load(&args.model)?;
    let dataset = Dataset::load(&args.data)?;
    if model.k() != dataset.meta.k {
        return Err(Error::IncompatibleModel {
            model_k: model.k(),
            data_k: dataset.meta.k,
        });
    }
    let mut out = String::new();
    for record in &dataset.records {
        let (ranking, sorted) = model.infer(&record.lists)?;
        let line = Prediction {
            id: record.id.clone(),
            ranking: ranking.into_order(),
            sorted_scores: sorted.into_scores(),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    emit(args.out.as_ref(), &out)
}

enum DiscountArg {
    Log2,
    Custom(Vec<f64>),
}

fn parse_discount(spec: &str) -> Result<DiscountArg> {
    if spec == "log2" {
        return Ok(DiscountArg::Log2);
    }
    if let Some(values) = spec.strip_prefix("custom:") {
        let parsed = values
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidDiscount(format!("cannot parse discount value '{v}'"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(DiscountArg::Custom(parsed));
    }
    Err(Error::InvalidDiscount(format!(
        "--discount must be log2 or custom:<v1,v2,...>, got '{spec}'"
    )))
}

pub fn evaluate(args: EvaluateArgs, file: &FileConfig) -> Result<()> {
    let dataset = Dataset::load(&args.data)?;
    let discount_spec = pick(
        args.discount,
        file.evaluate.discount.clone(),
        "log2".to_string(),
    );
    let discount = match parse_discount(&discount_spec)? {
        DiscountArg::Log2 => lbrank::DiscountSpec::log2(dataset.meta.n)?,
        DiscountArg::Custom(values) => {
            if values.len() != dataset.meta.n {
                return Err(Error::LengthMismatch {
                    expected: dataset.meta.n,
                    actual: values.len(),
                });
            }
            lbrank::DiscountSpec::new(values)?
        }
    };

    let text = std::fs::read_to_string(&args.pred)?;
    let mut by_id = std::collections::HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pred: Prediction = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let ranking = Ranking::new(pred.ranking).map_err(|e| Error::InvalidRecord {
            id: pred.id.clone(),
            reason: e.to_string(),
        })?;
        by_id.insert(pred.id, ranking);
    }

    let mut rankings = Vec::with_capacity(dataset.records.len());
    for record in &dataset.records {
        let ranking = by_id
            .get(&record.id)
            .ok_or_else(|| Error::MissingPrediction {
                id: record.id.clone(),
            })?;
        if ranking.len() != dataset.meta.n {
            return Err(Error::InvalidRecord {
                id: record.id.clone(),
                reason: format!(
                    "prediction has {} entries, dataset has N = {}",
                    ranking.len(),
                    dataset.meta.n
                ),
            });
        }
        rankings.push(ranking.clone());
    }
    let metrics = evaluate_rankings(&dataset.records, &rankings, &discount)?;

    // Divergence-bound satisfaction: for every scorer list with a positive
    // normalizer, the predicted ranking's normalized divergence must sit
    // under the candidate-count bound (sqrt gain).
    let g = ConcaveSpec::sqrt(dataset.meta.n)?;
    let mut checked = 0usize;
    let mut satisfied = 0usize;
    for (record, ranking) in dataset.records.iter().zip(&rankings) {
        for list in &record.lists {
            match prop1_bound(list, &g) {
                Ok(report) => {
                    checked += 1;
                    let d = lb_divergence_cardinality(list, ranking, &g)?;
                    if d / report.z <= report.bound_candidates + 1e-9 {
                        satisfied += 1;
                    }
                }
                Err(Error::BoundUndefined { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    let report = serde_json::json!({
        "queries": metrics.queries,
        "mean_ndcg": metrics.mean_ndcg,
        "mean_ndcg_loss": metrics.mean_ndcg_loss,
        "top1_error": metrics.top1_error,
        "bound_checked": checked,
        "bound_satisfied": satisfied,
        "discount": discount_spec,
    });
    emit(args.out.as_ref(), &format!("{report}\n"))
}

pub fn bench(args: BenchArgs, file: &FileConfig) -> Result<()> {
    let cfg = &file.bench;
    let grid_spec = pick(args.n_grid, cfg.n_grid.clone(), "100,1000,10000".to_string());
    let n_grid = grid_spec
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("--n-grid: cannot parse '{v}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if n_grid.is_empty() || n_grid.iter().any(|&n| n < 2) {
        return Err(Error::InvalidConfig(
            "--n-grid needs entries of at least 2".into(),
        ));
    }
    let k = pick(args.k, cfg.k, 8);
    if k == 0 {
        return Err(Error::InvalidConfig("--k must be at least 1".into()));
    }
    let k2 = pick(args.k2, cfg.k2, 120);
    if k2 == 0 {
        return Err(Error::InvalidConfig("--k2 must be at least 1".into()));
    }
    let repeats = pick(args.repeats, cfg.repeats, 3);
    if repeats == 0 {
        return Err(Error::InvalidConfig("--repeats must be at least 1".into()));
    }
    let seed = pick(args.seed, cfg.seed, 0);
    let report = run_bench(&n_grid, k, (3, k2), repeats, seed)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
