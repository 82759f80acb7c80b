//! Slow modulating Markov chain with transition matrix `A = I + rho Q`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Chain description as it appears in run configs. Either `Q` with `rho`,
/// or `A` directly (then `Q = (A - I) / rho`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0: Option<Vec<f64>>,
}

impl ChainSpec {
    /// Single-state chain.
    pub fn trivial() -> Self {
        Self {
            m: 1,
            q: Some(vec![vec![0.0]]),
            a: None,
            rho: 0.0,
            pi0: Some(vec![1.0]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Violation {
    Shape,
    RowSum,
    OffDiagonalNegative,
    ARowSum,
    AEntryRange,
    NotIrreducible,
    Rho,
    InitialDistribution,
}

impl Violation {
    pub fn name(self) -> &'static str {
        match self {
            Violation::Shape => "shape",
            Violation::RowSum => "row-sum",
            Violation::OffDiagonalNegative => "off-diagonal-negative",
            Violation::ARowSum => "A-row-sum",
            Violation::AEntryRange => "A-entry-range",
            Violation::NotIrreducible => "not-irreducible",
            Violation::Rho => "rho",
            Violation::InitialDistribution => "pi0",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct ThetaChain<T> {
    q: Matrix<T>,
    rho: T,
    a: Matrix<T>,
    pi0: Vec<T>,
    state: usize,
}

const ROW_TOL: f64 = 1e-12;

impl<T: Scalar> ThetaChain<T> {
    /// Builds a chain without validating it; see [`ThetaChain::validate`].
    pub fn from_generator(q: Matrix<T>, rho: T, pi0: Vec<T>) -> Self {
        let a = Matrix::identity(q.rows()).add(&q.scale(rho));
        Self {
            q,
            rho,
            a,
            pi0,
            state: 0,
        }
    }

    pub fn from_transition(a: Matrix<T>, rho: T, pi0: Vec<T>) -> Self {
        let q = if rho > T::zero() {
            a.sub(&Matrix::identity(a.rows())).scale(T::one() / rho)
        } else {
            Matrix::zeros(a.rows(), a.cols())
        };
        Self {
            q,
            rho,
            a,
            pi0,
            state: 0,
        }
    }

    /// Builds and validates a chain from its config form, drawing the
    /// initial state from `pi0` (uniform when absent).
    pub fn from_spec<R: Rng + ?Sized>(spec: &ChainSpec, rng: &mut R) -> Result<Self> {
        let mut chain = Self::from_spec_unchecked(spec)?;
        let violations = chain.validate();
        if !violations.is_empty() {
            let names: Vec<_> = violations.iter().map(|v| v.name()).collect();
            return Err(Error::Config(format!("invalid chain: {}", names.join(", "))));
        }
        chain.reset(rng);
        Ok(chain)
    }

    pub fn from_spec_unchecked(spec: &ChainSpec) -> Result<Self> {
        let to_matrix = |rows: &Vec<Vec<f64>>| -> Result<Matrix<T>> {
            if rows.len() != spec.m || rows.iter().any(|r| r.len() != spec.m) {
                return Err(Error::Config(format!("chain matrix must be {0}x{0}", spec.m)));
            }
            Ok(Matrix::from_fn(spec.m, spec.m, |i, j| T::of(rows[i][j])))
        };
        let pi0 = match &spec.pi0 {
            Some(v) => v.iter().map(|&x| T::of(x)).collect(),
            None => vec![T::one() / T::of_usize(spec.m.max(1)); spec.m],
        };
        let rho = T::of(spec.rho);
        match (&spec.q, &spec.a) {
            (Some(q), None) => Ok(Self::from_generator(to_matrix(q)?, rho, pi0)),
            (None, Some(a)) => Ok(Self::from_transition(to_matrix(a)?, rho, pi0)),
            _ => Err(Error::Config("chain needs exactly one of Q or A".into())),
        }
    }

    pub fn states(&self) -> usize {
        self.q.rows()
    }

    pub fn generator(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn transition(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn initial_distribution(&self) -> &[T] {
        &self.pi0
    }

    pub fn current_state(&self) -> usize {
        self.state
    }

    pub fn set_state(&mut self, state: usize) {
        assert!(state < self.states());
        self.state = state;
    }

    /// Redraws the current state from `pi0`.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.state = sample_row(&self.pi0, rng);
    }

    /// Moves to the next state drawn from row `A[current]`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        self.state = sample_row(self.a.row(self.state), rng);
        self.state
    }

    /// Reports every failed invariant; empty when the chain is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.q.rows();
        if m == 0 || !self.q.is_square() || !self.a.is_square() || self.pi0.len() != m {
            out.push(Violation::Shape);
            return out;
        }
        let tol = T::of(ROW_TOL);
        let mut push = |v: Violation| {
            if !out.contains(&v) {
                out.push(v);
            }
        };
        if !(self.rho >= T::zero()) {
            push(Violation::Rho);
        }
        for i in 0..m {
            let row: T = self.q.row(i).iter().copied().sum();
            if row.abs() > tol {
                push(Violation::RowSum);
            }
            for j in 0..m {
                if i != j && self.q[(i, j)] < T::zero() {
                    push(Violation::OffDiagonalNegative);
                }
            }
            let arow: T = self.a.row(i).iter().copied().sum();
            if (arow - T::one()).abs() > tol {
                push(Violation::ARowSum);
            }
            if self.a.row(i).iter().any(|&x| x < T::zero() || x > T::one()) {
                push(Violation::AEntryRange);
            }
        }
        if !is_irreducible(&self.q) {
            push(Violation::NotIrreducible);
        }
        let total: T = self.pi0.iter().copied().sum();
        if self.pi0.iter().any(|&x| x < T::zero()) || (total - T::one()).abs() > T::of(1e-9) {
            push(Violation::InitialDistribution);
        }
        out
    }

    /// `pi` with `pi' A = pi'`, via `pi' Q = 0` and `sum pi = 1`.
    pub fn stationary_pi(&self) -> Result<Vec<T>> {
        let m = self.states();
        if m == 1 {
            return Ok(vec![T::one()]);
        }
        if !is_irreducible(&self.q) {
            return Err(Error::NotIrreducible);
        }
        let mut sys = self.q.transpose();
        sys.row_mut(m - 1).iter_mut().for_each(|x| *x = T::one());
        let mut rhs = vec![T::zero(); m];
        rhs[m - 1] = T::one();
        let pi = linalg::solve(&sys, &rhs)?;
        let next = self.a.tr_mul_vec(&pi);
        let residual = next
            .iter()
            .zip(&pi)
            .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()));
        let tol = T::solve_tolerance();
        if residual > tol {
            return Err(Error::Residual {
                residual: residual.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
        Ok(pi)
    }

    /// `pi0 A^n` advanced one step: `pi' A`.
    pub fn propagate(&self, pi: &[T]) -> Vec<T> {
        self.a.tr_mul_vec(pi)
    }
}

fn sample_row<T: Scalar, R: Rng + ?Sized>(row: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &w) in row.iter().enumerate() {
        acc += w.as_f64();
        if u < acc {
            return k;
        }
    }
    // rounding left a sliver past the last cumulative weight
    row.iter().rposition(|&w| w > T::zero()).unwrap_or(0)
}

/// Strong connectivity of the off-diagonal sparsity pattern.
pub fn is_irreducible<T: Scalar>(q: &Matrix<T>) -> bool {
    let m = q.rows();
    if m <= 1 {
        return true;
    }
    let reach_all = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let w = if forward { q[(i, j)] } else { q[(j, i)] };
                if i != j && w > T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach_all(true) && reach_all(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state(q: [[f64; 2]; 2], rho: f64) -> ThetaChain<f64> {
        let rows: Vec<Vec<f64>> = q.iter().map(|r| r.to_vec()).collect();
        ThetaChain::from_generator(Matrix::from_rows(&rows), rho, vec![0.5, 0.5])
    }

    #[test]
    fn transition_is_identity_plus_scaled_generator() {
        let c = two_state([[-1.0, 1.0], [1.0, -1.0]], 0.1);
        assert_eq!(c.transition().to_rows(), vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        assert!(c.validate().is_empty());
    }

    #[test]
    fn single_state_never_moves() {
        let mut c = ThetaChain::<f64>::from_spec(&ChainSpec::trivial(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| c.step(&mut r) == 0));
        assert_eq!(c.stationary_pi().unwrap(), vec![1.0]);
    }

    #[test]
    fn stationary_of_asymmetric_chain() {
        let c = two_state([[-2.0, 2.0], [1.0, -1.0]], 0.1);
        let pi = c.stationary_pi().unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-12);
        let sym = two_state([[-1.0, 1.0], [1.0, -1.0]], 0.1).stationary_pi().unwrap();
        assert!((sym[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reports_row_sum() {
        let c = two_state([[-1.0, 1.1], [1.0, -1.0]], 0.1);
        let v = c.validate();
        assert!(v.contains(&Violation::RowSum), "{v:?}");
        assert_eq!(v[0].name(), "row-sum");
    }

    #[test]
    fn reports_entry_range() {
        let c = two_state([[-2.0, 2.0], [1.0, -1.0]], 0.6);
        assert_eq!(c.validate(), vec![Violation::AEntryRange]);
    }

    #[test]
    fn reducible_generator_is_rejected() {
        let c = two_state([[0.0, 0.0], [1.0, -1.0]], 0.1);
        assert!(c.validate().contains(&Violation::NotIrreducible));
        assert!(matches!(c.stationary_pi(), Err(Error::NotIrreducible)));
    }

    #[test]
    fn spec_with_transition_recovers_generator() {
        let spec = ChainSpec {
            m: 2,
            q: None,
            a: Some(vec![vec![0.9, 0.1], vec![0.2, 0.8]]),
            rho: 0.1,
            pi0: None,
        };
        let c = ThetaChain::<f64>::from_spec_unchecked(&spec).unwrap();
        assert!((c.generator()[(1, 0)] - 2.0).abs() < 1e-12);
        assert!(c.validate().is_empty());
    }

    #[test]
    fn spec_needs_one_matrix() {
        let spec = ChainSpec {
            m: 1,
            q: None,
            a: None,
            rho: 0.1,
            pi0: None,
        };
        assert!(ThetaChain::<f64>::from_spec_unchecked(&spec).is_err());
    }
}
