//! Checks against independent reference computations.

use degreeflow::theory::{
    build_generator, covariance, powerlaw_equation, powerlaw_exponent, stationary_by_power_iteration,
    stationary_degree_distribution, transition_operator, RootKind,
};
use degreeflow::tracker::{observe, NoiseModel};
use degreeflow::{evolve_step, DynamicGraph, GraphParams};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn chi_square(observed: &[usize], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

// upper 1% points of the chi-square distribution
const CHI2_01_DF3: f64 = 11.345;
const CHI2_01_DF4: f64 = 13.277;
const CHI2_01_DF5: f64 = 15.086;

#[test]
fn duplication_outcomes_match_enumeration() {
    // path 0-1-2, duplicate node 1 at p = 1/2: the new node keeps each of
    // {0, 2} independently, giving four equally likely edge sets
    let base = DynamicGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let mut r = rng(1);
    let trials = 20_000;
    let mut counts = [0usize; 4];
    for _ in 0..trials {
        let mut g = base.clone();
        let v = g.duplicate_from(1, 0.5, &mut r).unwrap();
        let code = g.has_edge(v, 0) as usize + 2 * g.has_edge(v, 2) as usize;
        counts[code] += 1;
        assert!(g.has_edge(v, 1));
    }
    let stat = chi_square(&counts, &[trials as f64 / 4.0; 4]);
    assert!(stat < CHI2_01_DF3, "chi2 = {stat}, counts {counts:?}");
}

#[test]
fn duplication_histograms_match_enumeration() {
    // same setup, but compare the degree histogram distribution: outcomes
    // (none kept, one kept, two kept) have degree multisets with
    // probabilities 1/4, 1/2, 1/4
    let base = DynamicGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let mut r = rng(2);
    let trials = 20_000;
    let mut counts = [0usize; 3];
    for _ in 0..trials {
        let mut g = base.clone();
        g.duplicate_from(1, 0.5, &mut r).unwrap();
        // node 1 always reaches degree 3; f[1] is 3, 1 or 0 as the new
        // node keeps none, one or both of {0, 2}
        let idx = match g.degree_histogram()[1] {
            3 => 0,
            1 => 1,
            0 => 2,
            other => panic!("impossible f[1] = {other}"),
        };
        counts[idx] += 1;
    }
    let n = trials as f64;
    let stat = chi_square(&counts, &[n / 4.0, n / 2.0, n / 4.0]);
    assert!(stat < 9.21, "chi2 = {stat}, counts {counts:?}");
}

#[test]
fn cycle_deletion_is_uniform() {
    let base = DynamicGraph::cycle(5).unwrap();
    let mut r = rng(3);
    let trials = 20_000;
    let mut counts = [0usize; 5];
    for _ in 0..trials {
        let mut g = base.clone();
        let w = g.delete_step(&mut r).unwrap().unwrap();
        counts[w] += 1;
    }
    let stat = chi_square(&counts, &[trials as f64 / 5.0; 5]);
    assert!(stat < CHI2_01_DF4, "chi2 = {stat}, counts {counts:?}");
}

#[test]
fn node_sampling_is_uniform() {
    let g = DynamicGraph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3)]).unwrap();
    let mut r = rng(4);
    let trials = 30_000;
    let mut counts = [0usize; 6];
    for _ in 0..trials {
        counts[g.sample_node(&mut r).unwrap()] += 1;
    }
    let stat = chi_square(&counts, &[trials as f64 / 6.0; 6]);
    assert!(stat < CHI2_01_DF5, "chi2 = {stat}");
}

#[test]
fn star_hub_is_never_deleted() {
    let base = DynamicGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let mut r = rng(5);
    for _ in 0..2000 {
        let mut g = base.clone();
        if let Some(w) = g.delete_step(&mut r).unwrap() {
            assert_ne!(w, 0);
        }
    }
}

#[test]
fn deletion_frequency_concentrates() {
    let params = GraphParams::single(0.0, 0.4, 0.1);
    let mut g = DynamicGraph::cycle(50).unwrap();
    let mut r = rng(6);
    let steps = 100_000;
    let mut fired = 0usize;
    for _ in 0..steps {
        let o = evolve_step(&mut g, &params, 0, &mut r).unwrap();
        fired += (o.deleted || o.deletion_skipped) as usize;
        assert_eq!(g.node_count(), 50);
    }
    let rate = fired as f64 / steps as f64;
    assert!((rate - 0.1).abs() < 0.01, "rate {rate}");
}

fn union_find_largest(g: &DynamicGraph) -> f64 {
    let ids = g.node_ids().to_vec();
    let top = ids.iter().copied().max().unwrap_or(0) + 1;
    let mut parent: Vec<usize> = (0..top).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (u, v) in g.edges() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
        }
    }
    let mut size = vec![0usize; top];
    for &u in &ids {
        let root = find(&mut parent, u);
        size[root] += 1;
    }
    *size.iter().max().unwrap() as f64 / ids.len() as f64
}

#[test]
fn largest_component_matches_union_find() {
    let params = GraphParams::single(0.0, 0.4, 0.1);
    for seed in 0..5 {
        let mut g = DynamicGraph::cycle(200).unwrap();
        let mut r = rng(100 + seed);
        for _ in 0..10_000 {
            evolve_step(&mut g, &params, 0, &mut r).unwrap();
        }
        let got = g.largest_component_fraction();
        assert!(got > 0.0 && got <= 1.0);
        assert_eq!(got, union_find_largest(&g));
    }
    let two = DynamicGraph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
    assert_eq!(two.largest_component_fraction(), 0.5);
    assert_eq!(union_find_largest(&two), 0.5);
}

fn to_nalgebra(m: &degreeflow::Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

#[test]
fn stationary_distribution_matches_svd_null_vector() {
    for &(p, q, n0) in &[(0.4, 0.1, 200), (0.2, 0.05, 60), (0.7, 0.02, 30), (0.3, 0.3, 100)] {
        let l = build_generator::<f64>(p, q, n0 - 1).unwrap();
        let g = stationary_degree_distribution(&l, n0).unwrap();
        // right null vector of B' - I = left null vector of L
        let lt = to_nalgebra(&l).transpose();
        let svd = lt.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let k = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let v = v_t.row(k).transpose();
        let v = &v / v.sum();
        let gap = g
            .mass()
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-9, "p={p} q={q} N0={n0}: gap {gap}");
    }
}

#[test]
fn power_iteration_agrees_with_direct_solve() {
    let l = build_generator::<f64>(0.4, 0.1, 199).unwrap();
    let b = transition_operator(&l, 200).unwrap();
    let direct = stationary_degree_distribution(&l, 200).unwrap();
    let pi = stationary_by_power_iteration(&b, 1e-13, 1_000_000);
    assert!(pi.converged);
    let gap = direct
        .mass()
        .iter()
        .zip(pi.distribution.mass())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-8, "gap {gap}");
}

#[test]
fn covariance_matches_explicit_inverse() {
    let (p, q, n0) = (0.4, 0.1, 60);
    let l = build_generator::<f64>(p, q, n0 - 1).unwrap();
    let g = stationary_degree_distribution(&l, n0).unwrap();
    let cov = covariance(&l, n0, &g).unwrap();

    let b = to_nalgebra(&transition_operator(&l, n0).unwrap());
    let d = b.nrows();
    let gv = nalgebra::DVector::from_column_slice(g.mass());
    let ones = nalgebra::DVector::from_element(d, 1.0);
    let z = (DMatrix::identity(d, d) - &b + &ones * gv.transpose())
        .try_inverse()
        .unwrap();
    let dg = DMatrix::from_diagonal(&gv);
    let sigma = z.transpose() * &dg + &dg * &z - &dg - &gv * gv.transpose();

    let scale = sigma.abs().max();
    for i in 0..d {
        for j in 0..d {
            let diff = (cov.sigma[(i, j)] - sigma[(i, j)]).abs();
            assert!(diff < 1e-9 * scale, "({i},{j}) differs by {diff}");
        }
    }
    // Z 1 = 1 and 1'g = 1 force 1' Sigma 1 = 1 + 1 - 1 - 1 = 0
    let total = (ones.transpose() * &sigma * &ones)[(0, 0)];
    assert!(total.abs() < 1e-8 * scale, "1'S1 = {total}");
    let ours: f64 = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|ij| cov.sigma[ij]).sum();
    assert!(ours.abs() < 1e-8 * scale, "1'S1 = {ours}");
}

fn newton_root(p: f64, q: f64) -> Option<f64> {
    let f = |b: f64| powerlaw_equation(p, q, b);
    let df = |b: f64| (1.0 + q) * (p.powf(b - 1.0) * p.ln() + p) - q;
    // start right of the root, where the convex equation is positive
    let mut b = 2.0;
    while f(b) <= 0.0 {
        b *= 2.0;
        if b > 1e6 {
            return None;
        }
    }
    for _ in 0..200 {
        let step = f(b) / df(b);
        b -= step;
        if step.abs() < 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    Some(b)
}

#[test]
fn powerlaw_root_matches_newton() {
    let mut r = rng(7);
    let mut checked = 0;
    for _ in 0..200 {
        use rand::Rng;
        let p = r.gen_range(0.05..0.95);
        let q = r.gen_range(0.0..0.3);
        let got = powerlaw_exponent(p, q).unwrap();
        if got.kind != RootKind::AboveOne {
            continue;
        }
        let want = newton_root(p, q).unwrap();
        assert!(
            (got.beta - want).abs() < 1e-9 * want,
            "p={p} q={q}: {} vs {want}",
            got.beta
        );
        checked += 1;
    }
    assert!(checked > 50);
}

#[test]
fn swap_noise_is_mean_zero() {
    // f[1] = 10 (five disjoint edges), f[2] = 10 (a 10-cycle),
    // f[3] = 12 (three disjoint K4)
    let mut edges = Vec::new();
    for k in 0..5 {
        edges.push((2 * k, 2 * k + 1));
    }
    for k in 0..10 {
        edges.push((10 + k, 10 + (k + 1) % 10));
    }
    for block in 0..3 {
        let o = 20 + 4 * block;
        for a in 0..4 {
            for b in a + 1..4 {
                edges.push((o + a, o + b));
            }
        }
    }
    let g = DynamicGraph::from_edges(32, &edges).unwrap();
    assert_eq!(&g.degree_histogram()[..4], &[0, 10, 10, 12]);
    let truth = g.empirical_distribution::<f64>();
    let noise = NoiseModel::swaps(3.0);
    let mut r = rng(8);
    let n = 100_000;
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for _ in 0..n {
        let y = observe::<f64, _>(&g, &noise, &mut r);
        assert!((y.total() - 1.0).abs() < 1e-12);
        for k in 0..3 {
            let v = y.at(k + 1);
            sum[k] += v;
            sq[k] += v * v;
        }
    }
    for k in 0..3 {
        let mean = sum[k] / n as f64;
        let var = sq[k] / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        let diff = (mean - truth.at(k + 1)).abs();
        assert!(diff < 3.0 * se, "degree {}: mean {mean} vs {} (se {se})", k + 1, truth.at(k + 1));
    }
}
