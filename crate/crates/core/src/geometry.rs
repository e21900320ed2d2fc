//! Finite-dimensional primal/dual geometry.
//!
//! Three kinds are supported, each with a closed-form proximal step:
//! unconstrained Euclidean space, a Euclidean box, and the probability
//! simplex with the negative-entropy mirror map (l1 primal, l-infinity dual).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simplex coordinates must sum to one within this tolerance.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;
/// Floor applied to simplex coordinates before renormalising.
pub const SIMPLEX_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("invalid geometry: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryKind {
    EuclideanFree,
    EuclideanBox { lower: Vec<f64>, upper: Vec<f64> },
    Simplex,
}

/// How the estimator-space norm is measured (the dual norm of the geometry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputNorm {
    #[default]
    Euclidean,
    Max,
}

impl OutputNorm {
    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            OutputNorm::Euclidean => l2(x),
            OutputNorm::Max => linf(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub dimension: usize,
    pub kappa: f64,
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GeometrySpec {
    pub fn euclidean(dimension: usize) -> Result<Self, GeometryError> {
        if dimension == 0 {
            return Err(GeometryError::Invalid("dimension must be positive".into()));
        }
        Ok(Self { kind: GeometryKind::EuclideanFree, dimension, kappa: 1.0 })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(GeometryError::Invalid("box bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(GeometryError::Invalid("box bounds need finite lower < upper".into()));
        }
        let dimension = lower.len();
        Ok(Self { kind: GeometryKind::EuclideanBox { lower, upper }, dimension, kappa: 1.0 })
    }

    /// The cube [lo, hi]^d.
    pub fn cube(dimension: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::boxed(vec![lo; dimension], vec![hi; dimension])
    }

    pub fn simplex(dimension: usize) -> Result<Self, GeometryError> {
        if dimension == 0 {
            return Err(GeometryError::Invalid("dimension must be positive".into()));
        }
        let kappa = (dimension as f64).max(std::f64::consts::E).ln();
        Ok(Self { kind: GeometryKind::Simplex, dimension, kappa })
    }

    /// Checks the invariants of a deserialised spec.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let rebuilt = match &self.kind {
            GeometryKind::EuclideanFree => Self::euclidean(self.dimension)?,
            GeometryKind::EuclideanBox { lower, upper } => Self::boxed(lower.clone(), upper.clone())?,
            GeometryKind::Simplex => Self::simplex(self.dimension)?,
        };
        if rebuilt.dimension != self.dimension {
            return Err(GeometryError::Invalid("dimension disagrees with box bounds".into()));
        }
        if (rebuilt.kappa - self.kappa).abs() > 1e-12 {
            return Err(GeometryError::Invalid(format!("kappa must be {}", rebuilt.kappa)));
        }
        Ok(())
    }

    pub fn output_norm(&self) -> OutputNorm {
        match self.kind {
            GeometryKind::Simplex => OutputNorm::Max,
            _ => OutputNorm::Euclidean,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dimension {
            return Err(GeometryError::DimensionMismatch { expected: self.dimension, got: x.len() });
        }
        Ok(())
    }

    pub fn primal_norm(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        Ok(match self.kind {
            GeometryKind::Simplex => l1(x),
            _ => l2(x),
        })
    }

    pub fn dual_norm(&self, u: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(u)?;
        Ok(self.output_norm().norm(u))
    }

    pub fn check_feasible(&self, w: &[f64]) -> Result<(), GeometryError> {
        self.check_dim(w)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Infeasible("non-finite coordinate".into()));
        }
        match &self.kind {
            GeometryKind::EuclideanFree => Ok(()),
            GeometryKind::EuclideanBox { lower, upper } => {
                for (i, v) in w.iter().enumerate() {
                    if *v < lower[i] || *v > upper[i] {
                        return Err(GeometryError::Infeasible(format!("coordinate {i} = {v} outside [{}, {}]", lower[i], upper[i])));
                    }
                }
                Ok(())
            }
            GeometryKind::Simplex => {
                if w.iter().any(|v| *v <= 0.0) {
                    return Err(GeometryError::Infeasible("simplex coordinates must be positive".into()));
                }
                let s: f64 = w.iter().sum();
                if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
                    return Err(GeometryError::Infeasible(format!("simplex coordinates sum to {s}")));
                }
                Ok(())
            }
        }
    }

    /// Bregman divergence of the mirror map: half squared distance or KL.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64, GeometryError> {
        self.check_feasible(x)?;
        self.check_feasible(y)?;
        Ok(match self.kind {
            GeometryKind::Simplex => x.iter().zip(y).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0),
            _ => 0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        })
    }

    /// argmin over the feasible set of <eta u, w'> + D(w', w).
    pub fn prox_step(&self, w: &[f64], u: &[f64], eta: f64) -> Result<Vec<f64>, GeometryError> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(GeometryError::BadStep(eta));
        }
        self.check_feasible(w)?;
        self.check_dim(u)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Invalid("non-finite dual vector".into()));
        }
        Ok(match &self.kind {
            GeometryKind::EuclideanFree => w.iter().zip(u).map(|(a, b)| a - eta * b).collect(),
            GeometryKind::EuclideanBox { lower, upper } => w
                .iter()
                .zip(u)
                .enumerate()
                .map(|(i, (a, b))| (a - eta * b).clamp(lower[i], upper[i]))
                .collect(),
            GeometryKind::Simplex => {
                // Multiplicative weights in the log domain.
                let logits: Vec<f64> = w.iter().zip(u).map(|(a, b)| a.ln() - eta * b).collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut x: Vec<f64> = logits.iter().map(|l| (l - m).exp().max(SIMPLEX_FLOOR)).collect();
                let s: f64 = x.iter().sum();
                x.iter_mut().for_each(|v| *v /= s);
                x
            }
        })
    }

    /// Proximal gradient mapping P(w, u, eta) = (w - w+) / eta.
    pub fn prox_map(&self, w: &[f64], u: &[f64], eta: f64) -> Result<Vec<f64>, GeometryError> {
        let next = self.prox_step(w, u, eta)?;
        Ok(w.iter().zip(&next).map(|(a, b)| (a - b) / eta).collect())
    }

    /// A canonical interior starting point.
    pub fn center(&self) -> Vec<f64> {
        match &self.kind {
            GeometryKind::EuclideanFree => vec![0.0; self.dimension],
            GeometryKind::EuclideanBox { lower, upper } => lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
            GeometryKind::Simplex => vec![1.0 / self.dimension as f64; self.dimension],
        }
    }

    /// Primal-norm diameter of the feasible set, if bounded.
    pub fn diameter(&self) -> Option<f64> {
        match &self.kind {
            GeometryKind::EuclideanFree => None,
            GeometryKind::EuclideanBox { lower, upper } => {
                Some(lower.iter().zip(upper).map(|(l, u)| (u - l) * (u - l)).sum::<f64>().sqrt())
            }
            GeometryKind::Simplex => Some(if self.dimension > 1 { 2.0 } else { 0.0 }),
        }
    }

    /// R with sup D(w, center) <= R^2 / 2 over the feasible set.
    ///
    /// Box: R equals the diameter (so R^2 / 2 covers any pair of points).
    /// Simplex from the uniform point: the largest KL is ln d, so R^2 = 2 ln d.
    pub fn bregman_radius(&self) -> Option<f64> {
        match &self.kind {
            GeometryKind::EuclideanFree => None,
            GeometryKind::EuclideanBox { .. } => self.diameter(),
            GeometryKind::Simplex => Some((2.0 * (self.dimension as f64).ln()).sqrt()),
        }
    }

    /// Largest Euclidean norm over the feasible set, if bounded.
    pub fn max_l2_radius(&self) -> Option<f64> {
        match &self.kind {
            GeometryKind::EuclideanFree => None,
            GeometryKind::EuclideanBox { lower, upper } => Some(
                lower.iter().zip(upper).map(|(l, u)| l.abs().max(u.abs()).powi(2)).sum::<f64>().sqrt(),
            ),
            GeometryKind::Simplex => Some(1.0),
        }
    }
}
