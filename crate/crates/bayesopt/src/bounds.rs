use serde::{Deserialize, Serialize};

use crate::{BoError, Real};

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> Bounds<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self, BoError> {
        if lower.len() != upper.len() {
            return Err(BoError::InvalidBounds(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(BoError::InvalidBounds("zero-dimensional box".into()));
        }
        for (d, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(BoError::InvalidBounds(format!(
                    "dimension {d}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_pairs(pairs: &[(T, T)]) -> Result<Self, BoError> {
        Self::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    /// The unit box `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self, BoError> {
        Self::new(vec![T::zero(); dim], vec![T::one(); dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn width(&self, d: usize) -> T {
        self.upper[d] - self.lower[d]
    }

    pub fn diagonal(&self) -> T {
        (0..self.dim())
            .map(|d| self.width(d) * self.width(d))
            .sum::<T>()
            .sqrt()
    }

    pub fn to_unit(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .enumerate()
            .map(|(d, &v)| (v - self.lower[d]) / self.width(d))
            .collect()
    }

    pub fn from_unit(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .enumerate()
            .map(|(d, &v)| self.lower[d] + v * self.width(d))
            .collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(d, &v)| v >= self.lower[d] && v <= self.upper[d])
    }

    pub fn check_dim(&self, x: &[T]) -> Result<(), BoError> {
        if x.len() != self.dim() {
            return Err(BoError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}
