//! Noisy degree observations and the constant step-size tracker
//! `g_hat <- g_hat + eps (y - g_hat)`, plus the diagnostic limit objects
//! used to judge it: tracking error series, the switched-ODE reference and
//! the empirical covariance of the scaled error.

use rand::Rng;
use rand_distr::{Distribution as _, Poisson};
use serde::{Deserialize, Serialize};

use crate::chain::ThetaChain;
use crate::distribution::{difference, squared_norm, DegreeDistribution};
use crate::error::{Error, Result};
use crate::graph::{evolve_step, DynamicGraph, GraphParams};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    #[default]
    PairwiseSwap,
}

/// Integer, zero-sum perturbation of the degree counts: a Poisson number of
/// unit moves between two distinct occupied degree bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    #[serde(default = "NoiseModel::default_intensity")]
    pub intensity: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            kind: NoiseKind::PairwiseSwap,
            intensity: Self::default_intensity(),
        }
    }
}

impl NoiseModel {
    fn default_intensity() -> f64 {
        2.0
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            intensity: 0.0,
        }
    }

    pub fn swaps(intensity: f64) -> Self {
        Self {
            kind: NoiseKind::PairwiseSwap,
            intensity,
        }
    }

    /// Draws `omega` for histogram `counts` (index = degree). Moves that
    /// would drive a bin negative are rejected.
    pub fn sample_omega<R: Rng + ?Sized>(&self, counts: &[usize], rng: &mut R) -> Vec<i64> {
        let mut omega = vec![0i64; counts.len()];
        if self.kind == NoiseKind::None || self.intensity <= 0.0 {
            return omega;
        }
        let occupied: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
        let swaps = Poisson::new(self.intensity)
            .map(|d| d.sample(rng) as u64)
            .unwrap_or(0);
        if occupied.len() < 2 {
            return omega;
        }
        for _ in 0..swaps {
            let a = rng.gen_range(0..occupied.len());
            let mut b = rng.gen_range(0..occupied.len() - 1);
            if b >= a {
                b += 1;
            }
            let (from, to) = (occupied[a], occupied[b]);
            if counts[from] as i64 + omega[from] <= 0 {
                continue;
            }
            omega[from] -= 1;
            omega[to] += 1;
        }
        omega
    }
}

/// `y = (f + omega) / N`.
pub fn observe<T: Scalar, R: Rng + ?Sized>(
    graph: &DynamicGraph,
    noise: &NoiseModel,
    rng: &mut R,
) -> DegreeDistribution<T> {
    let n = graph.node_count();
    assert!(n >= 1, "cannot observe an empty graph");
    let top = graph.max_degree().max(1);
    let counts = &graph.degree_histogram()[..=top];
    let omega = noise.sample_omega(counts, rng);
    let inv = T::one() / T::of_usize(n);
    let mass = (1..=top)
        .map(|i| T::of(counts[i] as f64 + omega[i] as f64) * inv)
        .collect();
    DegreeDistribution::from_raw(mass)
}

#[derive(Clone, Debug)]
pub struct TrackerState<T> {
    g_hat: DegreeDistribution<T>,
    epsilon: T,
    step_count: u64,
}

impl<T: Scalar> TrackerState<T> {
    pub fn new(g0: DegreeDistribution<T>, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "step size {epsilon} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            g_hat: g0,
            epsilon,
            step_count: 0,
        })
    }

    pub fn estimate(&self) -> &DegreeDistribution<T> {
        &self.g_hat
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One tracker step. The shorter of estimate and observation is padded
    /// with zeros.
    pub fn update(&mut self, y: &DegreeDistribution<T>) {
        let eps = self.epsilon;
        let g = self.g_hat.mass_mut();
        if y.max_degree() > g.len() {
            g.resize(y.max_degree(), T::zero());
        }
        for (k, gk) in g.iter_mut().enumerate() {
            let yk = y.mass().get(k).copied().unwrap_or_else(T::zero);
            *gk = *gk + eps * (yk - *gk);
        }
        self.step_count += 1;
    }
}

/// Functional form of [`TrackerState::update`].
pub fn sa_update<T: Scalar>(
    state: &TrackerState<T>,
    y: &DegreeDistribution<T>,
) -> Result<TrackerState<T>> {
    let mut next = TrackerState::new(state.g_hat.clone(), state.epsilon)?;
    next.step_count = state.step_count;
    next.update(y);
    Ok(next)
}

/// State sequence driving a tracking run.
#[derive(Clone, Debug)]
pub enum ThetaDriver<T> {
    /// Random path from the chain, starting at its current state.
    Chain(ThetaChain<T>),
    /// Deterministic path: `initial` until the first jump, then the state
    /// of the most recent `(step, state)` jump.
    Forced {
        initial: usize,
        jumps: Vec<(u64, usize)>,
    },
}

impl<T: Scalar> ThetaDriver<T> {
    fn state_at(&self, step: u64, current: usize) -> usize {
        match self {
            ThetaDriver::Chain(_) => current,
            ThetaDriver::Forced { initial, jumps } => jumps
                .iter()
                .filter(|(s, _)| *s <= step)
                .last()
                .map_or(*initial, |&(_, st)| st),
        }
    }

    /// State used at step 0.
    pub fn initial_state(&self) -> usize {
        match self {
            ThetaDriver::Chain(c) => c.current_state(),
            d => d.state_at(0, 0),
        }
    }

    /// State used at graph step `step`, given the one used before it.
    pub fn next_state<R: Rng + ?Sized>(&mut self, step: u64, current: usize, rng: &mut R) -> usize {
        match self {
            ThetaDriver::Chain(c) => c.step(rng),
            d => d.state_at(step, current),
        }
    }

    fn states(&self) -> Option<usize> {
        match self {
            ThetaDriver::Chain(c) => Some(c.states()),
            ThetaDriver::Forced { .. } => None,
        }
    }
}

/// Per-step tracking error, with the error vector kept on a subsampled grid.
#[derive(Clone, Debug, Default)]
pub struct ErrorSeries<T> {
    pub epsilon: T,
    /// Step index of each scalar record (`1..=horizon`).
    pub steps: Vec<u64>,
    pub theta: Vec<usize>,
    /// `|g_hat_n - g_bar(theta_n)|^2`, target conditional on the realized path.
    pub mse: Vec<T>,
    /// Same against the unconditional target `sum_s P(theta_n = s) g_bar(s)`.
    pub mse_unconditional: Vec<T>,
    /// `|nu_n| = |g_tilde_n| / sqrt(eps)`.
    pub nu_norm: Vec<T>,
    pub sample_steps: Vec<u64>,
    /// Path-conditional error vectors `g_tilde_n` at `sample_steps`.
    pub samples: Vec<Vec<T>>,
}

impl<T: Scalar> ErrorSeries<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Scaled error `nu = g_tilde / sqrt(eps)` for sample `k`.
    pub fn nu(&self, k: usize) -> Vec<T> {
        let s = self.epsilon.sqrt();
        self.samples[k].iter().map(|&x| x / s).collect()
    }

    /// Mean of `mse` over steps after `burn_in`.
    pub fn steady_state_mse(&self, burn_in: u64) -> Option<T> {
        mean_after(&self.steps, &self.mse, burn_in)
    }

    pub fn steady_state_mse_unconditional(&self, burn_in: u64) -> Option<T> {
        mean_after(&self.steps, &self.mse_unconditional, burn_in)
    }
}

fn mean_after<T: Scalar>(steps: &[u64], values: &[T], burn_in: u64) -> Option<T> {
    let tail: Vec<T> = steps
        .iter()
        .zip(values)
        .filter(|(s, _)| **s > burn_in)
        .map(|(_, &v)| v)
        .collect();
    if tail.is_empty() {
        None
    } else {
        Some(tail.iter().copied().sum::<T>() / T::of_usize(tail.len()))
    }
}

/// `5 / eps` steps.
pub fn default_burn_in<T: Scalar>(epsilon: T) -> u64 {
    (5.0 / epsilon.as_f64()).ceil() as u64
}

#[derive(Clone, Debug)]
pub struct TrackingSetup<T> {
    pub params: GraphParams,
    pub initial_graph: DynamicGraph,
    pub driver: ThetaDriver<T>,
    /// Stationary distribution of each chain state.
    pub targets: Vec<DegreeDistribution<T>>,
    pub epsilon: T,
    pub noise: NoiseModel,
    pub horizon: u64,
    /// Record error vectors and estimates every `stride` steps.
    pub stride: u64,
    /// Initial estimate; uniform over the target support when `None`.
    pub g0: Option<DegreeDistribution<T>>,
}

#[derive(Clone, Debug)]
pub struct TrackingRun<T> {
    pub series: ErrorSeries<T>,
    /// `(step, theta, g_hat)` every `stride` steps, including step 0.
    pub trajectory: Vec<(u64, usize, Vec<T>)>,
    /// `theta_0 .. theta_{horizon-1}`, the state used at each graph step.
    pub theta_path: Vec<usize>,
    pub final_graph: DynamicGraph,
    pub deletions: u64,
    pub skipped_deletions: u64,
}

/// Co-simulates the graph, the modulating chain and the tracker.
pub fn run_tracking<T: Scalar, R: Rng + ?Sized>(
    setup: TrackingSetup<T>,
    rng: &mut R,
) -> Result<TrackingRun<T>> {
    let TrackingSetup {
        params,
        initial_graph: mut graph,
        mut driver,
        targets,
        epsilon,
        noise,
        horizon,
        stride,
        g0,
    } = setup;
    if params.r != 0.0 {
        return Err(Error::InvalidParameter("tracking runs need r = 0 (fixed size)".into()));
    }
    params.validate()?;
    if targets.len() != params.states() {
        return Err(Error::Dimension(format!(
            "{} targets for {} states",
            targets.len(),
            params.states()
        )));
    }
    if let Some(m) = driver.states() {
        if m != params.states() {
            return Err(Error::Dimension(format!(
                "chain has {m} states, parameters have {}",
                params.states()
            )));
        }
    }
    let stride = stride.max(1);
    let dim = targets.iter().map(|t| t.max_degree()).max().unwrap_or(1);
    let g0 = g0.unwrap_or_else(|| DegreeDistribution::uniform(dim));
    let mut tracker = TrackerState::new(g0, epsilon)?;

    let m = params.states();
    let mut theta = driver.initial_state();
    if theta >= m {
        return Err(Error::InvalidParameter(format!("initial state {theta} >= {m}")));
    }
    let mut belief: Vec<T> = match &driver {
        ThetaDriver::Chain(c) => c.initial_distribution().to_vec(),
        ThetaDriver::Forced { .. } => point(theta, m),
    };

    let mut series = ErrorSeries {
        epsilon,
        ..ErrorSeries::default()
    };
    let cap = horizon as usize;
    series.steps.reserve(cap);
    series.theta.reserve(cap);
    series.mse.reserve(cap);
    series.mse_unconditional.reserve(cap);
    series.nu_norm.reserve(cap);
    let mut trajectory = vec![(0, theta, tracker.estimate().mass().to_vec())];
    let mut theta_path = Vec::with_capacity(cap);
    let (mut deletions, mut skipped) = (0u64, 0u64);
    let sqrt_eps = epsilon.sqrt();

    for n in 0..horizon {
        theta_path.push(theta);
        let out = evolve_step(&mut graph, &params, theta, rng)?;
        deletions += out.deleted as u64;
        skipped += out.deletion_skipped as u64;
        let y = observe::<T, R>(&graph, &noise, rng);
        tracker.update(&y);

        let step = n + 1;
        theta = match &mut driver {
            ThetaDriver::Chain(c) => {
                belief = c.propagate(&belief);
                c.step(rng)
            }
            d => {
                let s = d.state_at(step, theta);
                belief = point(s, m);
                s
            }
        };

        let g_hat = tracker.estimate().mass();
        let err = difference(g_hat, targets[theta].mass());
        let mse = squared_norm(&err);
        let uncond_target = mixture(&targets, &belief);
        let mse_u = squared_norm(&difference(g_hat, &uncond_target));
        series.steps.push(step);
        series.theta.push(theta);
        series.mse.push(mse);
        series.mse_unconditional.push(mse_u);
        series.nu_norm.push(mse.sqrt() / sqrt_eps);
        if step % stride == 0 {
            series.sample_steps.push(step);
            series.samples.push(err);
            trajectory.push((step, theta, g_hat.to_vec()));
        }
    }
    Ok(TrackingRun {
        series,
        trajectory,
        theta_path,
        final_graph: graph,
        deletions,
        skipped_deletions: skipped,
    })
}

fn point<T: Scalar>(k: usize, m: usize) -> Vec<T> {
    let mut v = vec![T::zero(); m];
    v[k] = T::one();
    v
}

fn mixture<T: Scalar>(targets: &[DegreeDistribution<T>], weights: &[T]) -> Vec<T> {
    let dim = targets.iter().map(|t| t.max_degree()).max().unwrap_or(0);
    let mut out = vec![T::zero(); dim];
    for (t, &w) in targets.iter().zip(weights) {
        if w == T::zero() {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(t.mass()) {
            *o = *o + w * x;
        }
    }
    out
}

/// Exact solution of `dg/dt = -g + g_bar(theta(t))` on the grid `t = n eps`,
/// with `theta` held constant on each interval. Returns `len + 1` points.
pub fn ode_reference<T: Scalar>(
    theta_path: &[usize],
    g_bar: &[DegreeDistribution<T>],
    epsilon: T,
    g0: &[T],
) -> Vec<Vec<T>> {
    let dim = g_bar
        .iter()
        .map(|g| g.max_degree())
        .max()
        .unwrap_or(0)
        .max(g0.len());
    let decay = (-epsilon).exp();
    let mut g = g0.to_vec();
    g.resize(dim, T::zero());
    let mut out = Vec::with_capacity(theta_path.len() + 1);
    out.push(g.clone());
    for &s in theta_path {
        let target = &g_bar[s];
        for (k, gk) in g.iter_mut().enumerate() {
            let t = target.at(k + 1);
            *gk = t + decay * (*gk - t);
        }
        out.push(g.clone());
    }
    out
}

/// Sample covariance of `nu_n` over recorded samples after `burn_in`.
pub fn scaled_error_covariance<T: Scalar>(
    series: &ErrorSeries<T>,
    burn_in: u64,
) -> Result<Matrix<T>> {
    if (series.len() as u64) <= burn_in + 1000 {
        return Err(Error::InsufficientSamples(format!(
            "series has {} steps, need more than burn-in {burn_in} + 1000",
            series.len()
        )));
    }
    let picked: Vec<usize> = (0..series.samples.len())
        .filter(|&k| series.sample_steps[k] > burn_in)
        .collect();
    if picked.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "{} recorded samples after burn-in",
            picked.len()
        )));
    }
    let dim = picked.iter().map(|&k| series.samples[k].len()).max().unwrap_or(0);
    let scale = T::one() / series.epsilon.sqrt();
    let rows: Vec<Vec<T>> = picked
        .iter()
        .map(|&k| {
            let mut v: Vec<T> = series.samples[k].iter().map(|&x| x * scale).collect();
            v.resize(dim, T::zero());
            v
        })
        .collect();
    let n = T::of_usize(rows.len());
    let mut mean = vec![T::zero(); dim];
    for r in &rows {
        for (m, &x) in mean.iter_mut().zip(r) {
            *m = *m + x;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / n);
    // only the leading block carrying nonzero variance needs the O(d^2) pass
    let active = (0..dim)
        .rev()
        .find(|&k| rows.iter().any(|r| r[k] != mean[k]))
        .map_or(0, |k| k + 1);
    let mut cov = Matrix::zeros(dim, dim);
    let mut centered = vec![T::zero(); active];
    for r in &rows {
        for k in 0..active {
            centered[k] = r[k] - mean[k];
        }
        for i in 0..active {
            let ci = centered[i];
            if ci == T::zero() {
                continue;
            }
            for j in i..active {
                cov[(i, j)] = cov[(i, j)] + ci * centered[j];
            }
        }
    }
    let denom = n - T::one();
    for i in 0..active {
        for j in i..active {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}
