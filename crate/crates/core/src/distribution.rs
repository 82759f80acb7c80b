use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability mass over degrees `1..=max_degree()`.
///
/// `mass()[k - 1]` is the probability of degree `k`. The same type holds the
/// empirical distribution of a graph, the stationary distribution of the
/// expected-degree recursion, tracker estimates and noisy observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution<T> {
    mass: Vec<T>,
}

impl<T: Scalar> DegreeDistribution<T> {
    /// Validates nonnegativity and unit total (within `1e-9`, or a looser
    /// bound at single precision).
    pub fn new(mass: Vec<T>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidParameter("empty degree distribution".into()));
        }
        if let Some((k, v)) = mass.iter().enumerate().find(|(_, v)| !(**v >= T::zero())) {
            return Err(Error::InvalidParameter(format!(
                "mass at degree {} is {}",
                k + 1,
                v
            )));
        }
        let total: T = mass.iter().copied().sum();
        let tol = T::of(1e-9).max(T::epsilon() * T::of(64.0));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "degree distribution sums to {total}"
            )));
        }
        Ok(Self { mass })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub(crate) fn from_raw(mass: Vec<T>) -> Self {
        Self { mass }
    }

    pub fn uniform(max_degree: usize) -> Self {
        let w = T::one() / T::of_usize(max_degree);
        Self {
            mass: vec![w; max_degree],
        }
    }

    pub fn point_mass(degree: usize, max_degree: usize) -> Self {
        assert!(degree >= 1 && degree <= max_degree);
        let mut mass = vec![T::zero(); max_degree];
        mass[degree - 1] = T::one();
        Self { mass }
    }

    pub fn max_degree(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub(crate) fn mass_mut(&mut self) -> &mut Vec<T> {
        &mut self.mass
    }

    pub fn into_mass(self) -> Vec<T> {
        self.mass
    }

    /// Probability of `degree`; zero outside the stored range.
    pub fn at(&self, degree: usize) -> T {
        if degree == 0 {
            return T::zero();
        }
        self.mass.get(degree - 1).copied().unwrap_or_else(T::zero)
    }

    pub fn total(&self) -> T {
        self.mass.iter().copied().sum()
    }

    /// Copy zero-padded (or truncated) to `max_degree` bins.
    pub fn padded(&self, max_degree: usize) -> Vec<T> {
        let mut v = self.mass.clone();
        v.resize(max_degree, T::zero());
        v
    }

    pub fn total_variation(&self, other: &Self) -> T {
        let d = self.max_degree().max(other.max_degree());
        let half = T::of(0.5);
        (1..=d)
            .map(|k| (self.at(k) - other.at(k)).abs())
            .sum::<T>()
            * half
    }

    pub fn cast<U: Scalar>(&self) -> DegreeDistribution<U> {
        DegreeDistribution {
            mass: self.mass.iter().map(|&v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Elementwise `a - b` over the union of supports.
pub fn difference<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            a.get(i).copied().unwrap_or_else(T::zero) - b.get(i).copied().unwrap_or_else(T::zero)
        })
        .collect()
}

pub fn squared_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum()
}
