use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A joint state `z = (x, y)` with `x` the minimizing block and `y` the
/// maximizing block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: DVector<f64>,
    d1: usize,
}

impl Point {
    pub fn new(coords: Vec<f64>, d1: usize) -> Result<Self> {
        Self::from_vector(DVector::from_vec(coords), d1)
    }

    pub fn from_vector(coords: DVector<f64>, d1: usize) -> Result<Self> {
        if d1 == 0 || d1 >= coords.len() {
            return Err(Error::invalid(
                "d1",
                format!("need 1 <= d1 < d, got d1={} with d={}", d1, coords.len()),
            ));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid("coords", format!("non-finite coordinate {bad}")));
        }
        Ok(Self { coords, d1 })
    }

    /// Planar point with one coordinate per block.
    pub fn xy(x: f64, y: f64) -> Self {
        Self {
            coords: DVector::from_vec(vec![x, y]),
            d1: 1,
        }
    }

    /// Skips the finiteness check; used on the hot path where the caller
    /// checks divergence separately.
    pub(crate) fn from_vector_unchecked(coords: DVector<f64>, d1: usize) -> Self {
        debug_assert!(d1 >= 1 && d1 < coords.len());
        Self { coords, d1 }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.coords.len() - self.d1
    }

    pub fn min_block(&self) -> &[f64] {
        &self.coords.as_slice()[..self.d1]
    }

    pub fn max_block(&self) -> &[f64] {
        &self.coords.as_slice()[self.d1..]
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (&self.coords - &other.coords).norm()
    }

    pub fn with_coords(&self, coords: DVector<f64>) -> Point {
        Point::from_vector_unchecked(coords, self.d1)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.as_slice().to_vec()
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_blocks() {
        assert!(Point::new(vec![1.0, 2.0], 0).is_err());
        assert!(Point::new(vec![1.0, 2.0], 2).is_err());
        assert!(Point::new(vec![1.0, 2.0, 3.0], 2).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Point::new(vec![f64::NAN, 0.0], 1).is_err());
        assert!(Point::new(vec![0.0, f64::INFINITY], 1).is_err());
    }

    #[test]
    fn blocks_split_at_d1() {
        let p = Point::new(vec![1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(p.min_block(), &[1.0]);
        assert_eq!(p.max_block(), &[2.0, 3.0]);
        assert_eq!(p.d2(), 2);
    }
}
