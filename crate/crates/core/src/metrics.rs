//! NDCG score and loss, and the divergence-derived upper bound on the loss.
//!
//! `ndcg(sigma) = sum_i r(sigma(i)) D(i) / sum_i r(pi(i)) D(i)` for relevance
//! grades `r`, positional discounts `D`, and ideal ranking `pi`. The loss is
//! its complement. For any concave gain `g`, the normalized divergence
//! `d(x | sigma) / Z` admits a sigma-independent upper bound
//!
//! ```text
//! d / Z <= (n / Z) * eps * (g(1) - g(N) + g(N-1))
//!       <= eps * (g(1) - g(N) + g(N-1)) / min_i x(sigma_x(i)) delta_g(i)
//! ```
//!
//! with `eps` the score spread and `Z` the sorted weighted mass.

use crate::concave::ConcaveSpec;
use crate::divergence::{lb_divergence_cardinality, sorted_weighted_mass};
use crate::error::{Error, Result};
use crate::rank::{rank_from_scores, Ranking, ScoreList};

/// Per-candidate relevance grades: nonnegative, finite, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceGrades {
    grades: Vec<f64>,
}

impl RelevanceGrades {
    pub fn new(grades: Vec<f64>) -> Result<Self> {
        if grades.is_empty() {
            return Err(Error::InvalidGrades("empty grade vector".into()));
        }
        for (i, &r) in grades.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidGrades(format!(
                    "grade[{i}] = {r} must be finite and nonnegative"
                )));
            }
        }
        if grades.iter().all(|&r| r == 0.0) {
            return Err(Error::InvalidGrades("all grades are zero".into()));
        }
        Ok(Self { grades })
    }

    /// Linear gain by ground-truth position: the candidate ranked at position
    /// `i` of `truth` gets grade `N - i` (so grades run from `N` down to `1`).
    /// Used when a dataset supplies only the ground-truth ranking.
    pub fn linear_from_truth(truth: &Ranking) -> Self {
        let n = truth.len();
        let mut grades = vec![0.0; n];
        for (i, &c) in truth.order().iter().enumerate() {
            grades[c] = (n - i) as f64;
        }
        Self { grades }
    }

    pub fn grades(&self) -> &[f64] {
        &self.grades
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// Positional discounts: positive and non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSpec {
    discounts: Vec<f64>,
}

impl DiscountSpec {
    pub fn new(discounts: Vec<f64>) -> Result<Self> {
        if discounts.is_empty() {
            return Err(Error::InvalidDiscount("empty discount vector".into()));
        }
        for (i, &d) in discounts.iter().enumerate() {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::InvalidDiscount(format!(
                    "discount[{i}] = {d} must be finite and positive"
                )));
            }
        }
        for i in 0..discounts.len() - 1 {
            if discounts[i] < discounts[i + 1] {
                return Err(Error::InvalidDiscount(format!(
                    "discount[{i}] = {} < discount[{}] = {}: discounts must not increase",
                    discounts[i],
                    i + 1,
                    discounts[i + 1]
                )));
            }
        }
        Ok(Self { discounts })
    }

    /// The standard logarithmic discount `D(i) = 1 / log2(i + 2)` (position
    /// `i` counted from zero, so the top position gets weight 1).
    pub fn log2(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| 1.0 / ((i + 2) as f64).log2()).collect())
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    pub fn len(&self) -> usize {
        self.discounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discounts.is_empty()
    }
}

fn check_ideal(pi: &Ranking, r: &RelevanceGrades) -> Result<()> {
    for w in pi.order().windows(2) {
        if r.grades()[w[0]] < r.grades()[w[1]] {
            return Err(Error::InvalidRanking(format!(
                "ideal ranking places candidate {} (grade {}) ahead of candidate {} (grade {})",
                w[0],
                r.grades()[w[0]],
                w[1],
                r.grades()[w[1]]
            )));
        }
    }
    Ok(())
}

/// Normalized discounted cumulative gain of `sigma` against the ideal ranking
/// `pi`. Requires `pi` to sort the grades in descending order; the value lies
/// in `(0, 1]` and is 1 exactly when `sigma` orders the grades like `pi`.
pub fn ndcg(sigma: &Ranking, pi: &Ranking, r: &RelevanceGrades, d: &DiscountSpec) -> Result<f64> {
    let n = sigma.len();
    for len in [pi.len(), r.len(), d.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    check_ideal(pi, r)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        num += r.grades()[sigma.order()[i]] * d.discounts()[i];
        den += r.grades()[pi.order()[i]] * d.discounts()[i];
    }
    Ok(num / den)
}

/// NDCG loss `1 - ndcg(sigma)`, in `[0, 1)`.
pub fn ndcg_loss(
    sigma: &Ranking,
    pi: &Ranking,
    r: &RelevanceGrades,
    d: &DiscountSpec,
) -> Result<f64> {
    Ok(1.0 - ndcg(sigma, pi, r, d)?)
}

/// Upper bound on the normalized divergence loss, evaluated for one score
/// list and gain function.
///
/// `loss` is the worst case `max_sigma d(x | sigma) / Z`, computed in closed
/// form: the maximizing ranking orders `x` ascending (rearrangement), so no
/// sampling is needed and the recorded bounds dominate the loss of every
/// ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Worst-case normalized loss `max_sigma d(x | sigma) / Z`.
    pub loss: f64,
    /// First bound form with the count factor read as the number of
    /// candidates: `(N / Z) * epsilon * (g(1) - g(N) + g(N-1))`.
    pub bound_candidates: f64,
    /// Second, sigma-independent form:
    /// `epsilon * (g(1) - g(N) + g(N-1)) / min_i x(sigma_x(i)) delta_g(i)`.
    /// `+inf` when the minimum term is not positive (the form is vacuous).
    pub bound_min_mass: f64,
    /// Score spread `max_{i,j} |x(i) - x(j)|`.
    pub epsilon: f64,
    /// Normalizer `Z = sum_i x(sigma_x(i)) delta_g(i)`.
    pub z: f64,
    /// `g(1) - g(N) + g(N-1)`, the gain-curvature factor shared by both forms.
    pub g_term: f64,
}

impl BoundReport {
    /// First bound form with an explicit count factor, for callers that read
    /// the count as something other than the number of candidates (e.g. the
    /// number of score lists being aggregated).
    pub fn bound_for_count(&self, count: f64) -> f64 {
        count / self.z * self.epsilon * self.g_term
    }
}

/// Evaluates both forms of the divergence bound for `x` under `g`, together
/// with the exact worst-case normalized loss.
///
/// Fails when the normalizer `Z` is not positive, in which case the
/// normalized loss is undefined.
pub fn prop1_bound(x: &ScoreList, g: &ConcaveSpec) -> Result<BoundReport> {
    let n = x.len();
    if g.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    let z = sorted_weighted_mass(x, g)?;
    if z <= 0.0 {
        return Err(Error::BoundUndefined { z });
    }
    let max = x.scores().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = x.scores().iter().cloned().fold(f64::INFINITY, f64::min);
    let epsilon = max - min;
    let g_term = g.g_value(1) - g.g_value(n) + g.g_value(n.saturating_sub(1));

    // Worst ranking: x ascending (reverse of sigma_x) minimizes the
    // sigma-weighted sum, hence maximizes d.
    let sigma_x = rank_from_scores(x);
    let mut worst_order = sigma_x.order().to_vec();
    worst_order.reverse();
    let worst = Ranking::new(worst_order).expect("reversed permutation stays valid");
    let loss = lb_divergence_cardinality(x, &worst, g)? / z;

    let bound_candidates = n as f64 / z * epsilon * g_term;
    let min_mass = (0..n)
        .map(|i| x.scores()[sigma_x.order()[i]] * g.deltas()[i])
        .fold(f64::INFINITY, f64::min);
    let bound_min_mass = if min_mass > 0.0 {
        epsilon * g_term / min_mass
    } else {
        f64::INFINITY
    };

    debug_assert!(loss <= bound_candidates + 1e-9);
    debug_assert!(loss <= bound_min_mass + 1e-9);

    Ok(BoundReport {
        loss,
        bound_candidates,
        bound_min_mass,
        epsilon,
        z,
        g_term,
    })
}
