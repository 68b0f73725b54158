//! Lovász–Bregman divergence between score-based and order-based permutations.
//!
//! For a submodular `f`, a ranking `sigma` induces the chain of prefix sets
//! `S_i = {sigma(0..i)}` and the marginal-gain vector
//! `h[sigma(i)] = f(S_{i+1}) - f(S_i)`. The divergence of scores `x` from a
//! ranking `sigma` is
//!
//! ```text
//! d(x | sigma) = <x, h_{sigma_x} - h_sigma>
//! ```
//!
//! where `sigma_x` sorts `x` descending. It is nonnegative, zero exactly when
//! `sigma` orders `x` (weakly) descending, and for cardinality-based
//! `f(S) = g(|S|)` it collapses to a pair of delta-weighted sums computable in
//! `O(N log N)`:
//!
//! ```text
//! d(x | sigma) = sum_i x(sigma_x(i)) delta_g(i) - sum_i x(sigma(i)) delta_g(i)
//! ```

use crate::concave::ConcaveSpec;
use crate::error::{Error, Result};
use crate::oracle::SetFunctionOracle;
use crate::rank::{rank_from_scores, rank_indices_desc, Ranking, ScoreList};

/// Marginal gains of `f` along the prefix chain of `sigma`.
///
/// `h[sigma(i)] = f({sigma(0..=i)}) - f({sigma(0..i)})`. For cardinality-based
/// `f` the entries sum to `g(N)`.
pub fn h_vector(sigma: &Ranking, f: &SetFunctionOracle) -> Result<ScoreList> {
    if f.ground_size() != sigma.len() {
        return Err(Error::LengthMismatch {
            expected: f.ground_size(),
            actual: sigma.len(),
        });
    }
    let order = sigma.order();
    let mut h = vec![0.0; order.len()];
    let mut prev = f.value(&[]);
    for i in 0..order.len() {
        let cur = f.value(&order[..=i]);
        h[order[i]] = cur - prev;
        prev = cur;
    }
    ScoreList::new(h)
}

/// General-path divergence `<x, h_{sigma_x} - h_sigma>` through a set-function
/// oracle. Quadratic-ish in `N` for black-box `f`; intended for small ground
/// sets and cross-checking the cardinality fast path.
pub fn lb_divergence_general(
    x: &ScoreList,
    sigma: &Ranking,
    f: &SetFunctionOracle,
) -> Result<f64> {
    if x.len() != sigma.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: sigma.len(),
        });
    }
    let sigma_x = rank_from_scores(x);
    let h_x = h_vector(&sigma_x, f)?;
    let h_s = h_vector(sigma, f)?;
    Ok(x.scores()
        .iter()
        .zip(h_x.scores().iter().zip(h_s.scores()))
        .map(|(&xi, (&hx, &hs))| xi * (hx - hs))
        .sum())
}

/// Fast-path divergence for `f(S) = g(|S|)`: two delta-weighted sums, one over
/// the descending order of `x` and one over `sigma`. `O(N log N)`, dominated
/// by the sort.
pub fn lb_divergence_cardinality(x: &ScoreList, sigma: &Ranking, g: &ConcaveSpec) -> Result<f64> {
    if x.len() != sigma.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: sigma.len(),
        });
    }
    if g.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: g.len(),
        });
    }
    let scores = x.scores();
    let by_score = rank_indices_desc(scores);
    let deltas = g.deltas();
    let mut sorted_sum = 0.0;
    let mut sigma_sum = 0.0;
    for i in 0..scores.len() {
        sorted_sum += scores[by_score[i]] * deltas[i];
        sigma_sum += scores[sigma.order()[i]] * deltas[i];
    }
    Ok(sorted_sum - sigma_sum)
}

/// The delta-weighted mass of `x` under its own descending order:
/// `Z = sum_i x(sigma_x(i)) delta_g(i)`, the normalizer shared by the loss
/// bound and the divergence fast path.
pub fn sorted_weighted_mass(x: &ScoreList, g: &ConcaveSpec) -> Result<f64> {
    if g.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: g.len(),
        });
    }
    let scores = x.scores();
    let by_score = rank_indices_desc(scores);
    Ok((0..scores.len())
        .map(|i| scores[by_score[i]] * g.deltas()[i])
        .sum())
}
