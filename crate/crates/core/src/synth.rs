//! Synthetic dataset generation: K noisy scorers over a latent ground truth.
//!
//! Each query draws a latent score vector; the ground-truth ranking sorts it
//! descending. Every scorer then reports the latent scores through its own
//! noise profile, optionally softmax-normalized into posterior-like lists.
//! Generation is bit-deterministic given (params, seed).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMeta, QueryRecord};
use crate::error::{Error, Result};
use crate::rank::{rank_indices_desc, Ranking, ScoreList};

/// Noise model of a single scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerProfile {
    /// Gaussian noise scale added to the latent score.
    pub noise_sigma: f64,
    /// Constant additive offset.
    pub bias: f64,
    /// Probability of replacing a candidate's score with an independent draw.
    pub corruption_rate: f64,
}

impl Default for ScorerProfile {
    fn default() -> Self {
        Self {
            noise_sigma: 0.25,
            bias: 0.0,
            corruption_rate: 0.0,
        }
    }
}

impl ScorerProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        if !self.bias.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bias must be finite, got {}",
                self.bias
            )));
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return Err(Error::InvalidConfig(format!(
                "corruption_rate must lie in [0, 1], got {}",
                self.corruption_rate
            )));
        }
        Ok(())
    }
}

/// Full generator configuration, embedded into the dataset header so a file
/// documents its own provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Standard deviation of the latent score distribution.
    pub latent_spread: f64,
    /// Softmax-normalize each scorer's list (posterior-like outputs).
    pub softmax_normalize: bool,
    /// One profile per scorer.
    pub profiles: Vec<ScorerProfile>,
}

impl GeneratorParams {
    pub fn uniform(k: usize, profile: ScorerProfile) -> Self {
        Self {
            latent_spread: 1.0,
            softmax_normalize: false,
            profiles: vec![profile; k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.latent_spread > 0.0 && self.latent_spread.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "latent_spread must be positive, got {}",
                self.latent_spread
            )));
        }
        if self.profiles.is_empty() {
            return Err(Error::InvalidConfig("no scorer profiles given".into()));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        Ok(())
    }
}

fn softmax(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

pub(crate) fn generate_with_latents(
    n: usize,
    queries: usize,
    params: &GeneratorParams,
    seed: u64,
    name: &str,
) -> Result<(Dataset, Vec<Vec<f64>>)> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 candidates, got {n}"
        )));
    }
    if queries == 0 {
        return Err(Error::InvalidConfig("need at least 1 query".into()));
    }
    params.validate()?;
    let k = params.profiles.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent_dist = Normal::new(0.0, params.latent_spread)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal is valid");

    let mut records = Vec::with_capacity(queries);
    let mut latents = Vec::with_capacity(queries);
    let width = (queries.max(2) - 1).ilog10() as usize + 1;
    for qi in 0..queries {
        let latent: Vec<f64> = (0..n).map(|_| latent_dist.sample(&mut rng)).collect();
        let truth = Ranking::new(rank_indices_desc(&latent))?;
        let mut lists = Vec::with_capacity(k);
        for profile in &params.profiles {
            let mut scores = Vec::with_capacity(n);
            for &l in &latent {
                let corrupted =
                    profile.corruption_rate > 0.0 && rng.random::<f64>() < profile.corruption_rate;
                let s = if corrupted {
                    latent_dist.sample(&mut rng)
                } else if profile.noise_sigma > 0.0 {
                    l + profile.bias + profile.noise_sigma * unit.sample(&mut rng)
                } else {
                    l + profile.bias
                };
                scores.push(s);
            }
            if params.softmax_normalize {
                softmax(&mut scores);
            }
            lists.push(ScoreList::new(scores)?);
        }
        records.push(QueryRecord::new(
            format!("q{qi:0width$}"),
            lists,
            truth,
            None,
        )?);
        latents.push(latent);
    }
    let meta = DatasetMeta {
        n,
        k,
        name: name.to_string(),
        seed,
        generator_params: Some(params.clone()),
    };
    Ok((Dataset::new(meta, records)?, latents))
}

/// Generates a synthetic dataset with one latent truth per query and K noisy
/// scorer views of it. Deterministic given `(params, seed)`.
pub fn generate_synthetic(
    n: usize,
    queries: usize,
    params: &GeneratorParams,
    seed: u64,
    name: &str,
) -> Result<Dataset> {
    generate_with_latents(n, queries, params, seed, name).map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::rank_from_scores;

    #[test]
    fn noiseless_scorers_reproduce_truth() {
        let params = GeneratorParams::uniform(
            3,
            ScorerProfile {
                noise_sigma: 0.0,
                bias: 0.0,
                corruption_rate: 0.0,
            },
        );
        let data = generate_synthetic(10, 20, &params, 42, "noiseless").unwrap();
        for record in &data.records {
            for list in &record.lists {
                assert_eq!(rank_from_scores(list).order(), record.truth.order());
            }
        }
    }

    #[test]
    fn bias_does_not_change_scorer_ranking() {
        let params = GeneratorParams::uniform(
            2,
            ScorerProfile {
                noise_sigma: 0.0,
                bias: 3.5,
                corruption_rate: 0.0,
            },
        );
        let data = generate_synthetic(6, 5, &params, 1, "biased").unwrap();
        for record in &data.records {
            for list in &record.lists {
                assert_eq!(rank_from_scores(list).order(), record.truth.order());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let params = GeneratorParams::uniform(4, ScorerProfile::default());
        let a = generate_synthetic(8, 12, &params, 7, "det").unwrap();
        let b = generate_synthetic(8, 12, &params, 7, "det").unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(8, 12, &params, 8, "det").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn truth_sorts_latents_descending() {
        let params = GeneratorParams::uniform(2, ScorerProfile::default());
        let (data, latents) = generate_with_latents(12, 30, &params, 3, "latent").unwrap();
        for (record, latent) in data.records.iter().zip(&latents) {
            for w in record.truth.order().windows(2) {
                assert!(latent[w[0]] >= latent[w[1]]);
            }
        }
    }

    #[test]
    fn softmax_lists_are_distributions() {
        let mut params = GeneratorParams::uniform(3, ScorerProfile::default());
        params.softmax_normalize = true;
        let data = generate_synthetic(9, 10, &params, 5, "softmax").unwrap();
        for record in &data.records {
            for list in &record.lists {
                let sum: f64 = list.scores().iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(list.scores().iter().all(|&s| s > 0.0));
            }
        }
    }

    #[test]
    fn softmax_preserves_scorer_ranking() {
        let base = GeneratorParams::uniform(3, ScorerProfile::default());
        let mut soft = base.clone();
        soft.softmax_normalize = true;
        let raw = generate_synthetic(7, 10, &base, 11, "raw").unwrap();
        let cooked = generate_synthetic(7, 10, &soft, 11, "soft").unwrap();
        for (a, b) in raw.records.iter().zip(&cooked.records) {
            assert_eq!(a.truth, b.truth);
            for (la, lb) in a.lists.iter().zip(&b.lists) {
                assert_eq!(
                    rank_from_scores(la).order(),
                    rank_from_scores(lb).order()
                );
            }
        }
    }

    #[test]
    fn invalid_dimensions_rejected() {
        let params = GeneratorParams::uniform(1, ScorerProfile::default());
        assert!(generate_synthetic(1, 5, &params, 0, "bad").is_err());
        assert!(generate_synthetic(5, 0, &params, 0, "bad").is_err());
        let bad_profile = GeneratorParams::uniform(
            1,
            ScorerProfile {
                corruption_rate: 1.5,
                ..ScorerProfile::default()
            },
        );
        assert!(generate_synthetic(5, 5, &bad_profile, 0, "bad").is_err());
    }
}
