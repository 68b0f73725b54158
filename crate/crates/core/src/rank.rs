//! Order-based and score-based permutations over a candidate set.
//!
//! A [`Ranking`] lists candidate indices best-first; a [`ScoreList`] holds one
//! real-valued score per candidate and induces a ranking by descending sort
//! (ties broken by ascending candidate index, so the induced ranking is
//! deterministic).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An order-based permutation: `order()[i]` is the candidate placed at
/// position `i`, best first. Always a bijection on `{0..N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(Error::InvalidRanking("empty ranking".into()));
        }
        let mut seen = vec![false; n];
        for &c in &order {
            if c >= n {
                return Err(Error::InvalidRanking(format!(
                    "candidate index {c} out of range for N = {n}"
                )));
            }
            if seen[c] {
                return Err(Error::InvalidRanking(format!(
                    "candidate index {c} appears more than once"
                )));
            }
            seen[c] = true;
        }
        Ok(Self { order })
    }

    /// The identity ranking `(0, 1, ..., n-1)`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).collect())
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Candidate occupying the top position.
    pub fn top(&self) -> usize {
        self.order[0]
    }

    /// Inverse permutation: `positions()[c]` is the position of candidate `c`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (i, &c) in self.order.iter().enumerate() {
            pos[c] = i;
        }
        pos
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }
}

impl TryFrom<Vec<usize>> for Ranking {
    type Error = Error;
    fn try_from(order: Vec<usize>) -> Result<Self> {
        Ranking::new(order)
    }
}

impl From<Ranking> for Vec<usize> {
    fn from(r: Ranking) -> Self {
        r.order
    }
}

/// A score-based permutation: one finite real score per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScoreList {
    scores: Vec<f64>,
}

impl ScoreList {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::LengthMismatch {
                expected: 1,
                actual: 0,
            });
        }
        for (index, &value) in scores.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteScore { index, value });
            }
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn into_scores(self) -> Vec<f64> {
        self.scores
    }
}

impl TryFrom<Vec<f64>> for ScoreList {
    type Error = Error;
    fn try_from(scores: Vec<f64>) -> Result<Self> {
        ScoreList::new(scores)
    }
}

impl From<ScoreList> for Vec<f64> {
    fn from(x: ScoreList) -> Self {
        x.scores
    }
}

/// Indices of `scores` sorted by descending value, ties by ascending index.
///
/// This is the one sorting rule used everywhere; every ranking induced from
/// scores in this crate goes through it.
pub(crate) fn rank_indices_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// The ranking induced by a score list: descending score, ties broken by
/// ascending candidate index.
pub fn rank_from_scores(x: &ScoreList) -> Ranking {
    Ranking {
        order: rank_indices_desc(x.scores()),
    }
}
