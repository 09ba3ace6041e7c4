//! State vectors expressed in the eigenbasis of the linear operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the truncated phase space: the coefficients of `u` in the
/// eigenbasis of `A`. Coordinate `i` belongs to eigenvalue `λ_{i+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    coords: Vec<f64>,
}

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    /// Basis vector `e_k` (1-based mode index).
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k >= 1 && k <= dim, "mode index out of range");
        let mut coords = vec![0.0; dim];
        coords[k - 1] = 1.0;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(StateVector::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(StateVector::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> StateVector {
        StateVector::new(self.coords.iter().map(|a| a * factor).collect())
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        dot(&self.coords, &other.coords)
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

pub fn norm(xs: &[f64]) -> f64 {
    dot(xs, xs).sqrt()
}

pub fn dot(xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(a, b)| a * b).sum()
}

pub fn sub(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    xs.iter().zip(ys).map(|(a, b)| a - b).collect()
}

pub fn distance(xs: &[f64], ys: &[f64]) -> f64 {
    distance_sq(xs, ys).sqrt()
}

pub fn distance_sq(xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}
