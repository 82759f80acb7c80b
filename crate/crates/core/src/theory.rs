//! Expected degree-distribution dynamics of the fixed-size graph.
//!
//! Degree `k` is stored at index `k - 1`. Row `j` of the generator `L`
//! holds the rates at which expected mass at degree `j` moves to each other
//! degree, so rows sum to zero and the one-step operator is
//! `B = I + L / N0` acting as `g <- B' g`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::distribution::DegreeDistribution;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Default cap on the tracked degree range.
pub const DEFAULT_DEGREE_CAP: usize = 200;

/// `min(N0 - 1, cap)`.
pub fn truncation_degree(n0: usize, cap: usize) -> usize {
    n0.saturating_sub(1).min(cap)
}

/// Deletion rates above this make some diagonal generator entry
/// non-negative in the untruncated recursion.
pub fn diagonal_bound(p: f64) -> f64 {
    p * (1.0 - p) / (2.0 + p)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `C(n, k) p^k (1-p)^(n-k)` evaluated in log space; results under `1e-300`
/// flush to zero.
fn binomial_term(lnf: &[f64], n: usize, k: usize, ln_p: f64, ln_1mp: f64) -> f64 {
    debug_assert!(k <= n);
    let mut ln = lnf[n] - lnf[k] - lnf[n - k];
    if k > 0 {
        ln += k as f64 * ln_p;
    }
    if n > k {
        ln += (n - k) as f64 * ln_1mp;
    }
    let v = ln.exp();
    if v < 1e-300 {
        0.0
    } else {
        v
    }
}

/// Rate from source degree `j` to target degree `i` (both `>= 1`) of the
/// untruncated recursion, before any boundary correction.
pub fn generator_entry(p: f64, q: f64, j: usize, i: usize) -> f64 {
    let lnf = ln_factorials(j + 1);
    raw_entry(&lnf, p, q, j, i)
}

fn raw_entry(lnf: &[f64], p: f64, q: f64, j: usize, i: usize) -> f64 {
    let (ln_p, ln_1mp) = (p.ln(), (1.0 - p).ln());
    let jf = j as f64;
    let inherited = |j: usize, i: usize| binomial_term(lnf, j, i - 1, ln_p, ln_1mp);
    if j + 1 < i {
        0.0
    } else if j + 1 == i {
        // gained an edge: copy of degree j itself or duplication touching it
        q * inherited(j, i) + q * (1.0 + p * jf)
    } else if j == i {
        q * inherited(j, i) - q * (jf + 2.0 + p * jf)
    } else if j == i + 1 {
        q * inherited(j, i) + q * jf
    } else {
        q * inherited(j, i)
    }
}

/// Truncated `D x D` generator. Boundary rows (degree 1, which would leak
/// mass to degree 0, and degree `D`, whose degree `D + 1` entry is dropped)
/// get their diagonal adjusted so every row sums to zero.
pub fn build_generator<T: Scalar>(p: f64, q: f64, dim: usize) -> Result<Matrix<T>> {
    if dim < 3 {
        return Err(Error::InvalidParameter(format!("generator dimension {dim} < 3")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (0, 1)")));
    }
    if !(q >= 0.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be nonnegative")));
    }
    if q > 0.0 && q >= diagonal_bound(p) {
        warn!(
            "q = {q} >= p(1-p)/(2+p) = {:.4}; diagonal negativity is not guaranteed",
            diagonal_bound(p)
        );
    }
    let lnf = ln_factorials(dim + 1);
    let mut l = Matrix::<f64>::zeros(dim, dim);
    for j in 1..=dim {
        for i in 1..=dim {
            l[(j - 1, i - 1)] = raw_entry(&lnf, p, q, j, i);
        }
        if j == 1 || j == dim {
            let off: f64 = (1..=dim)
                .filter(|&i| i != j)
                .map(|i| l[(j - 1, i - 1)])
                .sum();
            l[(j - 1, j - 1)] = -off;
        }
    }
    Ok(Matrix::from_fn(dim, dim, |r, c| T::of(l[(r, c)])))
}

/// `B = I + L / N0`; errors name the first negative entry.
pub fn transition_operator<T: Scalar>(l: &Matrix<T>, n0: usize) -> Result<Matrix<T>> {
    if n0 == 0 {
        return Err(Error::InvalidParameter("N0 must be positive".into()));
    }
    let b = Matrix::identity(l.rows()).add(&l.scale(T::one() / T::of_usize(n0)));
    for r in 0..b.rows() {
        for c in 0..b.cols() {
            if b[(r, c)] < T::zero() {
                return Err(Error::NotStochastic {
                    row: r,
                    col: c,
                    value: b[(r, c)].as_f64(),
                });
            }
        }
    }
    Ok(b)
}

/// `max |(B' g)_k - g_k|`.
pub fn fixed_point_residual<T: Scalar>(b: &Matrix<T>, g: &[T]) -> T {
    b.tr_mul_vec(g)
        .iter()
        .zip(g)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Stationary `g` with `B' g = g`: direct solve of `(B' - I) g = 0` with
/// the last equation replaced by `sum g = 1`.
pub fn stationary_degree_distribution<T: Scalar>(
    l: &Matrix<T>,
    n0: usize,
) -> Result<DegreeDistribution<T>> {
    if l.max_abs() == T::zero() {
        return Err(Error::Degenerate("q=0, every distribution is stationary".into()));
    }
    let b = transition_operator(l, n0)?;
    let d = b.rows();
    let mut a = b.transpose().sub(&Matrix::identity(d));
    a.row_mut(d - 1).iter_mut().for_each(|x| *x = T::one());
    let mut rhs = vec![T::zero(); d];
    rhs[d - 1] = T::one();
    let x = linalg::solve(&a, &rhs)?;
    let g = clamp_and_normalize(x);
    let residual = fixed_point_residual(&b, &g);
    let tol = T::solve_tolerance();
    if residual > tol {
        return Err(Error::Residual {
            residual: residual.as_f64(),
            tolerance: tol.as_f64(),
        });
    }
    Ok(DegreeDistribution::from_raw(g))
}

fn clamp_and_normalize<T: Scalar>(mut x: Vec<T>) -> Vec<T> {
    for v in &mut x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let s: T = x.iter().copied().sum();
    x.iter_mut().for_each(|v| *v = *v / s);
    x
}

/// Outcome of [`stationary_by_power_iteration`].
#[derive(Clone, Debug)]
pub struct PowerIteration<T> {
    pub distribution: DegreeDistribution<T>,
    pub iterations: usize,
    pub squarings: usize,
    pub converged: bool,
}

/// Power iteration `g <- P' g` with `P` starting at `B`. Each time 64
/// iterations pass without convergence `P` is squared, which keeps the
/// slowly mixing `B` (second eigenvalue `1 - O(q / N0)`) tractable.
pub fn stationary_by_power_iteration<T: Scalar>(
    b: &Matrix<T>,
    tol: T,
    max_iter: usize,
) -> PowerIteration<T> {
    let d = b.rows();
    let mut p = b.clone();
    let mut g = vec![T::one() / T::of_usize(d); d];
    let mut squarings = 0;
    let mut since_square = 0;
    for it in 1..=max_iter {
        let next = clamp_and_normalize(p.tr_mul_vec(&g));
        let delta = next
            .iter()
            .zip(&g)
            .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()));
        g = next;
        if delta < tol && fixed_point_residual(b, &g) < tol {
            return PowerIteration {
                distribution: DegreeDistribution::from_raw(g),
                iterations: it,
                squarings,
                converged: true,
            };
        }
        since_square += 1;
        if since_square == 64 && squarings < 40 {
            p = p.matmul(&p);
            squarings += 1;
            since_square = 0;
        }
    }
    PowerIteration {
        distribution: DegreeDistribution::from_raw(g),
        iterations: max_iter,
        squarings,
        converged: false,
    }
}

/// First and second moments `(sum k g_k, sum k^2 g_k)`.
pub fn degree_moments<T: Scalar>(dist: &DegreeDistribution<T>) -> (T, T) {
    dist.mass()
        .iter()
        .enumerate()
        .fold((T::zero(), T::zero()), |(d1, d2), (i, &m)| {
            let k = T::of_usize(i + 1);
            (d1 + k * m, d2 + k * k * m)
        })
}

/// Order of the expected search delay, `N0 d1 / (d2 - d1)`.
pub fn searchability<T: Scalar>(dist: &DegreeDistribution<T>, n0: usize) -> Result<T> {
    let (d1, d2) = degree_moments(dist);
    if !(d2 > d1) {
        return Err(Error::Degenerate("d2 ≤ d1".into()));
    }
    Ok(T::of_usize(n0) * d1 / (d2 - d1))
}

/// Pieces of the asymptotic tracking-error covariance.
#[derive(Clone, Debug)]
pub struct Covariance<T> {
    /// `Z' D + D Z - D - g g'`
    pub sigma: Matrix<T>,
    /// Fundamental matrix `(I - B + 1 g')^{-1}`.
    pub z: Matrix<T>,
    pub d_diag: Vec<T>,
    pub condition: T,
}

impl<T: Scalar> Covariance<T> {
    pub fn trace(&self) -> T {
        self.sigma.trace()
    }

    /// Smallest eigenvalue of `sigma`; reported, not enforced.
    pub fn min_eigenvalue(&self) -> T {
        linalg::symmetric_eigenvalues(&self.sigma)
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }
}

/// Condition numbers beyond this are treated as numerically singular.
const MAX_CONDITION: f64 = 1e14;

pub fn covariance<T: Scalar>(
    l: &Matrix<T>,
    n0: usize,
    g_bar: &DegreeDistribution<T>,
) -> Result<Covariance<T>> {
    let b = transition_operator(l, n0)?;
    let d = b.rows();
    let g = g_bar.padded(d);
    let fund = Matrix::identity(d)
        .sub(&b)
        .add(&Matrix::from_fn(d, d, |_, c| g[c]));
    let (z, condition) = linalg::inverse_with_condition(&fund)?;
    if !(condition.as_f64() < MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition: condition.as_f64(),
        });
    }
    let sigma = Matrix::from_fn(d, d, |r, c| {
        // (Z'D)_{rc} = Z_{cr} g_c, (DZ)_{rc} = g_r Z_{rc}
        let mut v = z[(c, r)] * g[c] + g[r] * z[(r, c)] - g[r] * g[c];
        if r == c {
            v = v - g[r];
        }
        v
    });
    Ok(Covariance {
        sigma,
        z,
        d_diag: g,
        condition,
    })
}

/// `(1+q)(p^(b-1) + p b - p) - 1 - b q`, evaluated as
/// `(1+q)(p^(b-1) - 1 + p (b-1)) - q (b-1)` so that `b = 1` is an exact zero.
pub fn powerlaw_equation(p: f64, q: f64, beta: f64) -> f64 {
    let s = beta - 1.0;
    (1.0 + q) * (p.powf(s) - 1.0 + p * s) - q * s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootKind {
    /// Nontrivial root above one; `beta = beta_star`.
    AboveOne,
    /// Nontrivial root at or below one; `beta = 1`.
    AtOrBelowOne,
    /// The equation stays negative on `(1, inf)` with no root, so the
    /// degree tail is lighter than any power law; `beta = +inf`.
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawExponent {
    pub beta_star: Option<f64>,
    pub beta: f64,
    pub kind: RootKind,
}

impl PowerLawExponent {
    pub fn has_nontrivial_root(&self) -> bool {
        self.kind == RootKind::AboveOne
    }
}

const BETA_LOW: f64 = 1.0 + 1e-6;
const BETA_HIGH: f64 = 50.0;
const BETA_EXPAND_LIMIT: f64 = 1e9;

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < 1e-13 || mid <= lo || mid >= hi {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `n` subintervals of `[lo, hi]` for the first sign change.
fn scan_bracket(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Option<(f64, f64)> {
    let h = (hi - lo) / n as f64;
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=n {
        let b = if k == n { hi } else { lo + h * k as f64 };
        let fb = f(b);
        if fa == 0.0 {
            return Some((a, a));
        }
        if (fa < 0.0) != (fb < 0.0) {
            return Some((a, b));
        }
        a = b;
        fa = fb;
    }
    None
}

/// Power-law exponent from the root of [`powerlaw_equation`], excluding the
/// universal root at one, floored at one.
pub fn powerlaw_exponent(p: f64, q: f64) -> Result<PowerLawExponent> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (0, 1)")));
    }
    if !(q >= 0.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be nonnegative")));
    }
    let f = |b: f64| powerlaw_equation(p, q, b);
    let root_in = |lo: f64, hi: f64| {
        scan_bracket(&f, lo, hi, 200).map(|(a, b)| if a == b { a } else { bisect(f, a, b) })
    };
    // the equation is convex in beta, so above one it either rises through
    // a single root or stays negative
    if let Some(root) = root_in(BETA_LOW, BETA_HIGH) {
        return Ok(PowerLawExponent {
            beta_star: Some(root),
            beta: root,
            kind: RootKind::AboveOne,
        });
    }
    if f(BETA_LOW) < 0.0 {
        let slope = (1.0 + q) * p - q;
        if slope > 0.0 {
            let mut hi = BETA_HIGH;
            while hi < BETA_EXPAND_LIMIT {
                let next = hi * 2.0;
                if f(next) >= 0.0 {
                    let root = bisect(f, hi, next);
                    return Ok(PowerLawExponent {
                        beta_star: Some(root),
                        beta: root,
                        kind: RootKind::AboveOne,
                    });
                }
                hi = next;
            }
        }
        return Ok(PowerLawExponent {
            beta_star: None,
            beta: f64::INFINITY,
            kind: RootKind::Unbounded,
        });
    }
    // the equation is negative just below one and grows without bound as
    // beta decreases, so walk left until it turns positive
    let top = 1.0 - 1e-6;
    let mut width = 1.0;
    let mut beta_star = None;
    while width < 1e6 {
        let lo = top - width;
        if f(lo) >= 0.0 && f(top) < 0.0 {
            beta_star = Some(bisect(f, lo, top));
            break;
        }
        width *= 2.0;
    }
    Ok(PowerLawExponent {
        beta_star,
        beta: 1.0,
        kind: RootKind::AtOrBelowOne,
    })
}

/// Least-squares line through `(log k, log mass_k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta_hat: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn powerlaw_fit<T: Scalar>(
    dist: &DegreeDistribution<T>,
    lo: usize,
    hi: usize,
) -> Result<PowerLawFit> {
    if lo >= hi || lo == 0 {
        return Err(Error::InvalidParameter(format!("fit window [{lo}, {hi}] is empty")));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter_map(|k| {
            let m = dist.at(k).as_f64();
            (m > 0.0).then(|| ((k as f64).ln(), m.ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "{} nonzero bins in [{lo}, {hi}], need 3",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let alpha = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - alpha - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(PowerLawFit {
        alpha,
        beta_hat: -slope,
        r_squared,
        points: pts.len(),
    })
}

/// Everything the theory computes for one chain state.
#[derive(Clone, Debug)]
pub struct TheorySolution<T> {
    pub p: f64,
    pub q: f64,
    pub n0: usize,
    pub generator: Matrix<T>,
    pub transition: Matrix<T>,
    pub g_bar: DegreeDistribution<T>,
    pub covariance: Covariance<T>,
    pub d1: T,
    pub d2: T,
    /// `None` when `d2 <= d1`.
    pub lambda: Option<T>,
    pub power_law: PowerLawExponent,
    pub residual: T,
}

impl<T: Scalar> TheorySolution<T> {
    pub fn solve(p: f64, q: f64, n0: usize, degree_cap: usize) -> Result<Self> {
        let dim = truncation_degree(n0, degree_cap);
        let generator = build_generator::<T>(p, q, dim)?;
        let transition = transition_operator(&generator, n0)?;
        let g_bar = stationary_degree_distribution(&generator, n0)?;
        let covariance = covariance(&generator, n0, &g_bar)?;
        let (d1, d2) = degree_moments(&g_bar);
        let lambda = searchability(&g_bar, n0).ok();
        let power_law = powerlaw_exponent(p, q)?;
        let residual = fixed_point_residual(&transition, g_bar.mass());
        Ok(Self {
            p,
            q,
            n0,
            generator,
            transition,
            g_bar,
            covariance,
            d1,
            d2,
            lambda,
            power_law,
            residual,
        })
    }

    pub fn dim(&self) -> usize {
        self.generator.rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_diagonal_case_hand_value() {
        // degree 2 -> 3 at p = 0.4, q = 0.1: 0.1 * 0.4^2 + 0.1 * (1 + 0.4 * 2)
        let l = build_generator::<f64>(0.4, 0.1, 6).unwrap();
        assert!((l[(1, 2)] - 0.196).abs() < 1e-15);
        assert!((generator_entry(0.4, 0.1, 2, 3) - 0.196).abs() < 1e-15);
    }

    #[test]
    fn zero_deletion_gives_zero_generator() {
        let l = build_generator::<f64>(0.3, 0.0, 10).unwrap();
        assert_eq!(l.max_abs(), 0.0);
        let err = stationary_degree_distribution(&l, 50).unwrap_err();
        assert!(err.to_string().contains("degenerate: q=0"));
    }

    #[test]
    fn small_dimension_rejected() {
        assert!(build_generator::<f64>(0.4, 0.1, 2).is_err());
        assert!(build_generator::<f64>(1.0, 0.1, 5).is_err());
    }

    #[test]
    fn small_n0_is_not_stochastic() {
        let l = build_generator::<f64>(0.4, 0.9, 30).unwrap();
        let err = stationary_degree_distribution(&l, 5).unwrap_err();
        assert!(err.to_string().starts_with("N0 too small for generator"));
    }

    #[test]
    fn interior_rows_balance_without_correction() {
        let (p, q, dim) = (0.35, 0.05, 40);
        let lnf = ln_factorials(dim + 2);
        for j in 2..dim {
            let s: f64 = (1..=j + 1).map(|i| raw_entry(&lnf, p, q, j, i)).sum();
            assert!(s.abs() < 1e-15, "row {j} sums to {s}");
        }
    }

    #[test]
    fn moments_examples() {
        let pm = DegreeDistribution::<f64>::point_mass(4, 6);
        assert_eq!(degree_moments(&pm), (4.0, 16.0));
        let two = DegreeDistribution::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(degree_moments(&two), (2.0, 5.0));
        let uni = DegreeDistribution::<f64>::uniform(5);
        let (d1, d2) = degree_moments(&uni);
        assert!((d1 - 3.0).abs() < 1e-12 && (d2 - 11.0).abs() < 1e-12);
    }

    #[test]
    fn searchability_closed_forms() {
        let l = searchability(&DegreeDistribution::<f64>::point_mass(4, 5), 100).unwrap();
        assert!((l - 100.0 / 3.0).abs() < 1e-12);
        let l = searchability(&DegreeDistribution::<f64>::point_mass(2, 5), 50).unwrap();
        assert_eq!(l, 50.0);
        let err = searchability(&DegreeDistribution::<f64>::point_mass(1, 5), 50).unwrap_err();
        assert_eq!(err.to_string(), "degenerate: d2 ≤ d1");
    }

    #[test]
    fn half_half_root_is_two() {
        let r = powerlaw_exponent(0.5, 0.0).unwrap();
        assert_eq!(r.kind, RootKind::AboveOne);
        assert!((r.beta - 2.0).abs() < 1e-10);
        assert_eq!(powerlaw_equation(0.5, 0.0, 2.0), 0.0);
    }

    #[test]
    fn large_p_floors_at_one() {
        let r = powerlaw_exponent(0.9, 0.0).unwrap();
        assert_eq!(r.beta, 1.0);
        // the other root is negative here
        let star = r.beta_star.unwrap();
        assert!(star < 0.0 && powerlaw_equation(0.9, 0.0, star).abs() < 1e-12);
    }

    #[test]
    fn heavy_deletion_is_unbounded() {
        let r = powerlaw_exponent(0.1, 0.2).unwrap();
        assert_eq!(r.kind, RootKind::Unbounded);
        assert!(r.beta.is_infinite());
    }

    #[test]
    fn root_beyond_default_bracket_is_found() {
        let r = powerlaw_exponent(0.1, 0.1).unwrap();
        assert_eq!(r.kind, RootKind::AboveOne);
        assert!(r.beta > 50.0);
        assert!(powerlaw_equation(0.1, 0.1, r.beta).abs() < 1e-10);
    }

    #[test]
    fn powerlaw_rejects_bad_p() {
        assert!(powerlaw_exponent(0.0, 0.1).is_err());
        assert!(powerlaw_exponent(1.0, 0.1).is_err());
    }

    #[test]
    fn fit_recovers_exact_exponent() {
        let w: Vec<f64> = (1..=20).map(|k| (k as f64).powi(-2)).collect();
        let d = DegreeDistribution::from_weights(w).unwrap();
        let fit = powerlaw_fit(&d, 1, 20).unwrap();
        assert!((fit.beta_hat - 2.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let flat = DegreeDistribution::<f64>::uniform(10);
        assert!(powerlaw_fit(&flat, 1, 10).unwrap().beta_hat.abs() < 1e-9);
    }

    #[test]
    fn fit_needs_three_points() {
        let d = DegreeDistribution::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(powerlaw_fit(&d, 1, 4).is_err());
        assert!(powerlaw_fit(&d, 3, 3).is_err());
    }

    #[test]
    fn single_precision_solution_tracks_double() {
        let l64 = build_generator::<f64>(0.4, 0.1, 20).unwrap();
        let l32 = build_generator::<f32>(0.4, 0.1, 20).unwrap();
        let g64 = stationary_degree_distribution(&l64, 100).unwrap();
        let g32 = stationary_degree_distribution(&l32, 100).unwrap();
        assert!(g32.cast::<f64>().total_variation(&g64) < 1e-4);
    }
}
