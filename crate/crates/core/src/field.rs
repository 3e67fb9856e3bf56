//! Scalar fields sampled at surface nodes.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

/// One value per node. A field does not borrow its surface; operations take
/// the surface explicitly, and lengths are checked where it matters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field(values)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Field(vec![value; n])
    }

    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        Field((0..n).map(f).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the largest value, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn add_scalar(&self, c: f64) -> Field {
        self.map(|v| v + c)
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Field) -> Field {
        assert_eq!(self.len(), other.len());
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a + t * b).collect())
    }

    pub fn scale(&self, t: f64) -> Field {
        self.map(|v| t * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

impl FromIterator<f64> for Field {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Field(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        let f = Field::new(vec![1.0, 3.0, 3.0, 2.0]);
        assert_eq!(f.argmax(), 1);
    }

    #[test]
    fn axpy_combines() {
        let a = Field::new(vec![1.0, 2.0]);
        let b = Field::new(vec![10.0, 20.0]);
        assert_eq!(&*a.axpy(0.5, &b), &[6.0, 12.0]);
    }
}
