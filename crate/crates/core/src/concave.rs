//! Concave gain functions for cardinality-based submodular set functions.
//!
//! A set function of the form `f(X) = g(|X|)` with `g` increasing and concave
//! is submodular, and the divergence it induces only ever consumes the first
//! differences of `g`. [`ConcaveSpec`] therefore stores the precomputed table
//! `deltas[i] = g(i+1) - g(i)` for a fixed ground-set size instead of `g`
//! itself.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The family of concave gain functions, with `g(0) = 0` throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConcaveKind {
    /// `g(i) = sqrt(i)`; the default: strictly concave with bounded delta ratios.
    Sqrt,
    /// `g(i) = ln(1 + i)`.
    Log1p,
    /// `g(i) = i^alpha` for `alpha` in (0, 1).
    Power { alpha: f64 },
    /// `g(i) = i`; modular, giving an identically-zero divergence. Kept for
    /// degenerate-case tests.
    Linear,
    /// An explicit first-difference table (positive, non-increasing).
    Custom { deltas: Vec<f64> },
}

impl ConcaveKind {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConcaveSpec(format!(
                "power exponent must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(ConcaveKind::Power { alpha })
    }

    fn g(&self, i: usize) -> f64 {
        let i = i as f64;
        match self {
            ConcaveKind::Sqrt => i.sqrt(),
            ConcaveKind::Log1p => i.ln_1p(),
            ConcaveKind::Power { alpha } => i.powf(*alpha),
            ConcaveKind::Linear => i,
            ConcaveKind::Custom { .. } => unreachable!("custom kinds carry their table"),
        }
    }
}

impl fmt::Display for ConcaveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcaveKind::Sqrt => write!(f, "sqrt"),
            ConcaveKind::Log1p => write!(f, "log1p"),
            ConcaveKind::Power { alpha } => write!(f, "power:{alpha}"),
            ConcaveKind::Linear => write!(f, "linear"),
            ConcaveKind::Custom { deltas } => write!(f, "custom[{}]", deltas.len()),
        }
    }
}

impl FromStr for ConcaveKind {
    type Err = Error;

    /// Parses `sqrt`, `log1p`, `linear`, or `power:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(ConcaveKind::Sqrt),
            "log1p" => Ok(ConcaveKind::Log1p),
            "linear" => Ok(ConcaveKind::Linear),
            _ => {
                if let Some(alpha) = s.strip_prefix("power:") {
                    let alpha: f64 = alpha.parse().map_err(|_| {
                        Error::InvalidConcaveSpec(format!("cannot parse power exponent '{alpha}'"))
                    })?;
                    ConcaveKind::power(alpha)
                } else {
                    Err(Error::InvalidConcaveSpec(format!(
                        "unknown concave kind '{s}' (expected sqrt|log1p|power:<alpha>|linear)"
                    )))
                }
            }
        }
    }
}

/// First-difference table of a concave increasing `g` over a ground set of
/// fixed size: `deltas()[i] = g(i+1) - g(i)`, positive and non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveSpec {
    kind: ConcaveKind,
    deltas: Vec<f64>,
}

impl ConcaveSpec {
    /// Builds the delta table for a ground set of `n` candidates.
    pub fn new(kind: ConcaveKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConcaveSpec("ground set is empty".into()));
        }
        let deltas = match &kind {
            ConcaveKind::Custom { deltas } => {
                if deltas.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        actual: deltas.len(),
                    });
                }
                deltas.clone()
            }
            ConcaveKind::Power { alpha } => {
                ConcaveKind::power(*alpha)?;
                (0..n).map(|i| kind.g(i + 1) - kind.g(i)).collect()
            }
            _ => (0..n).map(|i| kind.g(i + 1) - kind.g(i)).collect(),
        };
        let spec = Self { kind, deltas };
        spec.validate()?;
        Ok(spec)
    }

    /// Default gain function: `sqrt`.
    pub fn sqrt(n: usize) -> Result<Self> {
        Self::new(ConcaveKind::Sqrt, n)
    }

    fn validate(&self) -> Result<()> {
        for (i, &d) in self.deltas.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidConcaveSpec(format!(
                    "delta[{i}] = {d} must be finite and positive (g must increase)"
                )));
            }
        }
        for i in 0..self.deltas.len().saturating_sub(1) {
            if self.deltas[i] < self.deltas[i + 1] {
                return Err(Error::InvalidConcaveSpec(format!(
                    "delta[{i}] = {} < delta[{}] = {} (g must be concave)",
                    self.deltas[i],
                    i + 1,
                    self.deltas[i + 1]
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &ConcaveKind {
        &self.kind
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Ground-set size the table was built for.
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// `g(k)` recovered as the prefix sum of the deltas, for `k <= len()`.
    pub fn g_value(&self, k: usize) -> f64 {
        debug_assert!(k <= self.deltas.len());
        self.deltas[..k].iter().sum()
    }
}
