//! Black-box set-function oracle for the general divergence path.
//!
//! The production path is cardinality-based ([`crate::ConcaveSpec`]); this
//! oracle exists so the general chain construction can be evaluated against
//! arbitrary set functions on small ground sets, where exhaustive
//! submodularity and monotonicity checks are feasible.

use crate::concave::ConcaveSpec;
use crate::error::{Error, Result};

/// Largest ground-set size for which the exhaustive checks are allowed to run.
const MAX_CHECK_N: usize = 16;

/// A set function `f` over the ground set `{0..n-1}` with `f(empty) = 0`.
pub struct SetFunctionOracle {
    n: usize,
    f: Box<dyn Fn(&[usize]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for SetFunctionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SetFunctionOracle")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl SetFunctionOracle {
    /// Wraps an evaluator. The subset slice passed to the evaluator always
    /// holds distinct indices in `{0..n-1}`. Fails if `f(empty) != 0`.
    pub fn new<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> f64 + Send + Sync + 'static,
    {
        if n == 0 {
            return Err(Error::InvalidSetFunction("ground set is empty".into()));
        }
        let at_empty = f(&[]);
        if at_empty.abs() > 1e-12 {
            return Err(Error::InvalidSetFunction(format!(
                "f(empty) = {at_empty}, expected 0"
            )));
        }
        Ok(Self { n, f: Box::new(f) })
    }

    /// The cardinality-based function `f(S) = g(|S|)` of a concave spec.
    pub fn from_concave(spec: &ConcaveSpec) -> Self {
        let g: Vec<f64> = (0..=spec.len()).map(|k| spec.g_value(k)).collect();
        Self {
            n: spec.len(),
            f: Box::new(move |s| g[s.len()]),
        }
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    /// Evaluates `f` on a subset given as distinct indices.
    pub fn value(&self, subset: &[usize]) -> f64 {
        debug_assert!(subset.iter().all(|&c| c < self.n));
        (self.f)(subset)
    }

    fn members(&self, mask: u32) -> Vec<usize> {
        (0..self.n).filter(|&c| mask & (1 << c) != 0).collect()
    }

    /// Exhaustive submodularity check via the local pairwise characterization:
    /// `f(S + i) + f(S + j) >= f(S + i + j) + f(S)` for all `S` and `i != j`
    /// outside `S`. Only permitted on small ground sets.
    pub fn check_submodular(&self) -> Result<()> {
        if self.n > MAX_CHECK_N {
            return Err(Error::InvalidSetFunction(format!(
                "submodularity check limited to N <= {MAX_CHECK_N}, got {}",
                self.n
            )));
        }
        for mask in 0u32..(1 << self.n) {
            let base = self.members(mask);
            let f_s = self.value(&base);
            for i in 0..self.n {
                if mask & (1 << i) != 0 {
                    continue;
                }
                let f_si = self.value(&self.members(mask | (1 << i)));
                for j in (i + 1)..self.n {
                    if mask & (1 << j) != 0 {
                        continue;
                    }
                    let f_sj = self.value(&self.members(mask | (1 << j)));
                    let f_sij = self.value(&self.members(mask | (1 << i) | (1 << j)));
                    if f_si + f_sj < f_sij + f_s - 1e-12 {
                        return Err(Error::InvalidSetFunction(format!(
                            "submodularity violated at S = {base:?}, i = {i}, j = {j}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Exhaustive monotonicity check (`f(S + i) >= f(S)`) on small ground sets.
    pub fn check_monotone(&self) -> Result<()> {
        if self.n > MAX_CHECK_N {
            return Err(Error::InvalidSetFunction(format!(
                "monotonicity check limited to N <= {MAX_CHECK_N}, got {}",
                self.n
            )));
        }
        for mask in 0u32..(1 << self.n) {
            let f_s = self.value(&self.members(mask));
            for i in 0..self.n {
                if mask & (1 << i) != 0 {
                    continue;
                }
                let f_si = self.value(&self.members(mask | (1 << i)));
                if f_si < f_s - 1e-12 {
                    return Err(Error::InvalidSetFunction(format!(
                        "monotonicity violated when adding {i} to mask {mask:#b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concave::ConcaveKind;

    #[test]
    fn rejects_nonzero_at_empty() {
        assert!(SetFunctionOracle::new(3, |_s| 1.0).is_err());
        assert!(SetFunctionOracle::new(3, |s| s.len() as f64).is_ok());
    }

    #[test]
    fn cardinality_functions_are_monotone_submodular() {
        for kind in [ConcaveKind::Sqrt, ConcaveKind::Log1p, ConcaveKind::Linear] {
            let spec = ConcaveSpec::new(kind, 6).unwrap();
            let oracle = SetFunctionOracle::from_concave(&spec);
            oracle.check_submodular().unwrap();
            oracle.check_monotone().unwrap();
        }
    }

    #[test]
    fn detects_supermodular_function() {
        // f(S) = |S|^2 has increasing marginal gains.
        let f = SetFunctionOracle::new(4, |s| (s.len() * s.len()) as f64).unwrap();
        assert!(f.check_submodular().is_err());
    }

    #[test]
    fn detects_non_monotone_function() {
        let f = SetFunctionOracle::new(3, |s| -(s.len() as f64)).unwrap();
        assert!(f.check_monotone().is_err());
    }

    #[test]
    fn weighted_coverage_is_submodular() {
        // min(|S|, 2) scaled: a budget-saturating coverage function.
        let f = SetFunctionOracle::new(5, |s| 1.5 * (s.len().min(2) as f64)).unwrap();
        f.check_submodular().unwrap();
        f.check_monotone().unwrap();
    }
}
