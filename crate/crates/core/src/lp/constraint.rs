//! Constraint-shaping functions G applied element-wise to the state residual.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintVariant {
    Lin,
    LinEps,
    Abs,
    AbsEps,
    Squared,
}

impl ConstraintVariant {
    pub const ALL: [ConstraintVariant; 5] = [
        ConstraintVariant::Lin,
        ConstraintVariant::LinEps,
        ConstraintVariant::Abs,
        ConstraintVariant::AbsEps,
        ConstraintVariant::Squared,
    ];

    /// Non-negative range.
    pub fn is_unilateral(self) -> bool {
        matches!(self, Self::Abs | Self::AbsEps | Self::Squared)
    }

    /// Identically zero on [-eps, eps].
    pub fn is_epsilon_insensitive(self) -> bool {
        matches!(self, Self::LinEps | Self::AbsEps)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lin => "lin",
            Self::LinEps => "lin-eps",
            Self::Abs => "abs",
            Self::AbsEps => "abs-eps",
            Self::Squared => "squared",
        }
    }
}

impl fmt::Display for ConstraintVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstraintVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown constraint function '{s}' (expected lin, lin-eps, abs, abs-eps or squared)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFunction {
    pub variant: ConstraintVariant,
    /// Tolerance band half-width; only read by the eps variants.
    pub epsilon: f64,
}

impl ConstraintFunction {
    pub fn new(variant: ConstraintVariant, epsilon: f64) -> Self {
        assert!(epsilon >= 0.0, "epsilon must be non-negative");
        Self { variant, epsilon }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let eps = self.epsilon;
        match self.variant {
            ConstraintVariant::Lin => r,
            ConstraintVariant::LinEps => r.max(eps) - (-r).max(eps),
            ConstraintVariant::Abs => r.abs(),
            ConstraintVariant::AbsEps => (r.abs() - eps).max(0.0),
            ConstraintVariant::Squared => r * r,
        }
    }

    /// Derivative, with subgradient 0 at the kinks.
    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        let eps = self.epsilon;
        match self.variant {
            ConstraintVariant::Lin => 1.0,
            ConstraintVariant::LinEps => {
                if r.abs() > eps {
                    1.0
                } else {
                    0.0
                }
            }
            ConstraintVariant::Abs => {
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            ConstraintVariant::AbsEps => {
                if r > eps {
                    1.0
                } else if r < -eps {
                    -1.0
                } else {
                    0.0
                }
            }
            ConstraintVariant::Squared => 2.0 * r,
        }
    }

    /// Points where the derivative is discontinuous.
    pub fn kinks(&self) -> Vec<f64> {
        match self.variant {
            ConstraintVariant::Lin | ConstraintVariant::Squared => vec![],
            ConstraintVariant::Abs => vec![0.0],
            ConstraintVariant::LinEps | ConstraintVariant::AbsEps => vec![-self.epsilon, self.epsilon],
        }
    }

    pub fn g_value(&self, r: &[f64]) -> Vec<f64> {
        r.iter().map(|&x| self.value(x)).collect()
    }

    pub fn g_derivative(&self, r: &[f64]) -> Vec<f64> {
        r.iter().map(|&x| self.derivative(x)).collect()
    }
}
