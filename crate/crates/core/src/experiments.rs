//! Run configuration, scenario pipelines and result files.
//!
//! Every pipeline is a pure function of `(config, seed)`: replication `k`
//! draws from ChaCha8 stream `k` of the configured seed, replications may run
//! on any number of workers, and results are merged in replication order.
//! CSV and summary files carry no timing; wall time goes to `report.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::{ChainSpec, ThetaChain};
use crate::distribution::DegreeDistribution;
use crate::error::{Error, Result};
use crate::graph::{evolve_step, DynamicGraph, GraphParams};
use crate::linalg::Matrix;
use crate::theory::{self, RootKind, TheorySolution};
use crate::tracker::{
    default_burn_in, ode_reference, run_tracking, scaled_error_covariance, NoiseModel, ThetaDriver,
    TrackingSetup,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FixedSize,
    Growing,
}

/// Deterministic state path: `initial` until the first `(step, state)` jump.
/// States are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedPath {
    pub initial: usize,
    pub jumps: Vec<(u64, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario run by [`replay`].
    pub scenario: String,
    pub mode: Mode,
    #[serde(rename = "N0")]
    pub n0: usize,
    /// Edge-list file for the initial graph; cycle on `N0` nodes (fixed
    /// size) or a single edge (growing) otherwise.
    pub initial_graph: Option<PathBuf>,
    pub chain: ChainSpec,
    /// Overrides the sampled chain path when present.
    pub forced_path: Option<ForcedPath>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Duplication probability; 0 in fixed-size mode and 1 in growing mode
    /// when absent.
    pub r: Option<f64>,
    pub epsilon: f64,
    pub noise: NoiseModel,
    pub horizon: u64,
    /// Steps discarded before steady-state statistics.
    pub burn_in: Option<u64>,
    pub replications: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Trajectories are written every `stride` steps.
    pub stride: u64,
    pub d_max_cap: usize,
    pub workers: Option<usize>,
    /// Degrees written to tracking CSVs.
    pub track_degrees: Vec<usize>,
    /// Degree whose recovery after each forced jump is measured.
    pub jump_degree: usize,
    /// Inclusive degree window for power-law fits.
    pub fit_window: [usize; 2],
    pub p_grid: Option<Vec<f64>>,
    pub q_grid: Option<Vec<f64>>,
    /// Also write `L`, `B` and `Sigma` as CSV from the theory pipeline.
    pub write_matrices: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "custom".into(),
            mode: Mode::FixedSize,
            n0: 200,
            initial_graph: None,
            chain: ChainSpec::trivial(),
            forced_path: None,
            p: vec![0.4],
            q: vec![0.1],
            r: None,
            epsilon: 0.01,
            noise: NoiseModel::default(),
            horizon: 100_000,
            burn_in: None,
            replications: 1,
            seed: 0,
            out_dir: PathBuf::from("results"),
            stride: 100,
            d_max_cap: theory::DEFAULT_DEGREE_CAP,
            workers: None,
            track_degrees: vec![1, 2, 3],
            jump_degree: 3,
            fit_window: [3, 30],
            p_grid: None,
            q_grid: None,
            write_matrices: false,
        }
    }
}

impl RunConfig {
    /// Defaults for a named scenario.
    pub fn for_scenario(name: &str) -> Result<Self> {
        let scenario: Scenario = name.parse()?;
        let base = Self {
            scenario: name.to_string(),
            ..Self::default()
        };
        Ok(match scenario {
            Scenario::Example1 => Self {
                mode: Mode::Growing,
                p: vec![0.5],
                q: vec![0.1],
                horizon: 20_000,
                replications: 5,
                ..base
            },
            Scenario::Example2 => Self {
                replications: 5,
                ..base
            },
            Scenario::Example3 => Self {
                chain: ChainSpec {
                    m: 3,
                    q: Some(vec![
                        vec![-1.0, 1.0, 0.0],
                        vec![0.0, -1.0, 1.0],
                        vec![1.0, 0.0, -1.0],
                    ]),
                    a: None,
                    rho: 1e-4,
                    pi0: Some(vec![1.0, 0.0, 0.0]),
                },
                forced_path: Some(ForcedPath {
                    initial: 0,
                    jumps: vec![(3000, 1), (6000, 2)],
                }),
                p: vec![0.05, 0.2, 0.4],
                q: vec![0.05, 0.1, 0.15],
                horizon: 9000,
                stride: 10,
                replications: 3,
                track_degrees: vec![3],
                ..base
            },
            Scenario::Example4 => Self {
                p_grid: Some((1..=19).map(|k| k as f64 / 20.0).collect()),
                q_grid: Some(vec![0.05, 0.1, 0.15, 0.2]),
                ..base
            },
            Scenario::Custom => base,
        })
    }

    /// Parses a JSON config, applying its fields over `base`.
    pub fn from_json_over(text: &str, base: &RunConfig) -> Result<Self> {
        let file: Value = serde_json::from_str(text).map_err(parse_error)?;
        let Value::Object(fields) = file else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(base)?;
        if let Value::Object(target) = &mut merged {
            target.extend(fields);
        }
        serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn effective_r(&self) -> f64 {
        self.r.unwrap_or(match self.mode {
            Mode::FixedSize => 0.0,
            Mode::Growing => 1.0,
        })
    }

    pub fn states(&self) -> usize {
        self.p.len()
    }

    pub fn graph_params(&self) -> GraphParams {
        GraphParams {
            r: self.effective_r(),
            p: self.p.clone(),
            q: self.q.clone(),
        }
    }

    fn initial_graph(&self) -> Result<DynamicGraph> {
        match (&self.initial_graph, self.mode) {
            (Some(path), _) => DynamicGraph::read_edge_list_file(path),
            (None, Mode::FixedSize) => DynamicGraph::cycle(self.n0),
            (None, Mode::Growing) => Ok(DynamicGraph::single_edge()),
        }
    }

    fn driver<R: rand::Rng>(&self, rng: &mut R) -> Result<ThetaDriver<f64>> {
        if let Some(f) = &self.forced_path {
            return Ok(ThetaDriver::Forced {
                initial: f.initial,
                jumps: f.jumps.clone(),
            });
        }
        if self.states() == 1 {
            return Ok(ThetaDriver::Forced {
                initial: 0,
                jumps: Vec::new(),
            });
        }
        Ok(ThetaDriver::Chain(ThetaChain::from_spec(&self.chain, rng)?))
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads a config file. The scenario defaults come from `scenario`, else
/// from the file's own `scenario` field, else `custom`.
pub fn load_config(path: Option<&Path>, scenario: Option<&str>) -> Result<RunConfig> {
    let Some(path) = path else {
        return RunConfig::for_scenario(scenario.unwrap_or("custom"));
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(parse_error)?;
    let name = match scenario {
        Some(s) => s.to_string(),
        None => raw
            .get("scenario")
            .and_then(Value::as_str)
            .unwrap_or("custom")
            .to_string(),
    };
    let mut cfg = RunConfig::from_json_over(&text, &RunConfig::for_scenario(&name)?)?;
    cfg.scenario = name;
    Ok(cfg)
}

/// Problems with a config. Entries starting with `warning:` do not block a
/// run; anything else does.
pub fn validate_config(cfg: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    let unit = |x: &f64| (0.0..=1.0).contains(x);
    if !cfg.p.iter().all(unit) {
        out.push("p out of range".to_string());
    }
    if !cfg.q.iter().all(unit) {
        out.push("q out of range".to_string());
    }
    if let Some(r) = cfg.r {
        if !unit(&r) {
            out.push("r out of range".to_string());
        }
    }
    if cfg.p.is_empty() || cfg.p.len() != cfg.q.len() {
        out.push("p and q must have one entry per state".to_string());
    }
    if cfg.chain.m != cfg.p.len() {
        out.push(format!(
            "chain has M = {} states but p has {}",
            cfg.chain.m,
            cfg.p.len()
        ));
    } else {
        match ThetaChain::<f64>::from_spec_unchecked(&cfg.chain) {
            Err(e) => out.push(format!("chain: {e}")),
            Ok(chain) => out.extend(chain.validate().iter().map(|v| format!("chain: {}", v.name()))),
        }
    }
    if cfg.chain.m > 1 && cfg.forced_path.is_none() && cfg.chain.rho * cfg.n0 as f64 > 0.1 {
        out.push("warning: rho not << 1/N0".to_string());
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        out.push("epsilon out of range".to_string());
    }
    if !(cfg.noise.intensity >= 0.0 && cfg.noise.intensity.is_finite()) {
        out.push("noise intensity out of range".to_string());
    }
    if cfg.replications == 0 {
        out.push("replications must be at least 1".to_string());
    }
    if cfg.horizon == 0 {
        out.push("horizon must be positive".to_string());
    }
    if cfg.stride == 0 {
        out.push("stride must be positive".to_string());
    }
    if cfg.mode == Mode::FixedSize && cfg.initial_graph.is_none() && cfg.n0 < 4 {
        out.push("N0 must be at least 4".to_string());
    }
    if cfg.d_max_cap < 3 {
        out.push("d_max_cap must be at least 3".to_string());
    }
    if cfg.track_degrees.is_empty() || cfg.track_degrees.contains(&0) || cfg.jump_degree == 0 {
        out.push("tracked degrees start at 1".to_string());
    }
    if cfg.fit_window[0] == 0 || cfg.fit_window[0] >= cfg.fit_window[1] {
        out.push("fit window is empty".to_string());
    }
    if let Some(f) = &cfg.forced_path {
        let m = cfg.p.len();
        if f.initial >= m || f.jumps.iter().any(|&(_, s)| s >= m) {
            out.push("forced path state out of range".to_string());
        }
        if f.jumps.windows(2).any(|w| w[0].0 >= w[1].0) {
            out.push("forced path jumps must be increasing".to_string());
        }
    }
    for (name, grid) in [("p_grid", &cfg.p_grid), ("q_grid", &cfg.q_grid)] {
        if let Some(g) = grid {
            if g.is_empty() || !g.iter().all(unit) {
                out.push(format!("{name} out of range"));
            }
        }
    }
    if let Some(path) = &cfg.initial_graph {
        if !path.exists() {
            out.push(format!("initial graph file not found: {}", path.display()));
        }
    }
    out
}

pub fn is_blocking(violation: &str) -> bool {
    !violation.starts_with("warning:")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Example1,
    Example2,
    Example3,
    Example4,
    Custom,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Scenario::Example1),
            "example2" => Ok(Scenario::Example2),
            "example3" => Ok(Scenario::Example3),
            "example4" => Ok(Scenario::Example4),
            "custom" => Ok(Scenario::Custom),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// What a run computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    /// Graph simulation; degree distributions and connectivity.
    Simulate,
    /// Graph, chain and tracker co-simulation.
    Track,
    /// Stationary distribution, covariance and exponents per state.
    Theory,
    /// Theory over a `(p, q)` grid.
    Grid,
}

impl Scenario {
    pub fn pipeline(self) -> Pipeline {
        match self {
            Scenario::Example1 | Scenario::Example2 | Scenario::Custom => Pipeline::Simulate,
            Scenario::Example3 => Pipeline::Track,
            Scenario::Example4 => Pipeline::Grid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub rows: Vec<ReplicationRow>,
    pub aggregates: BTreeMap<String, Aggregate>,
    /// Pipeline-specific results, also written to `summary.json`.
    pub details: Value,
    pub files: Vec<PathBuf>,
    pub wall_time_secs: f64,
}

impl ScenarioReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.aggregates.get(name).map(|a| a.mean)
    }
}

/// Mean and standard error per metric, summed in replication order so the
/// result does not depend on the order rows arrive in.
pub fn aggregate(rows: &[ReplicationRow]) -> BTreeMap<String, Aggregate> {
    let mut sorted: Vec<&ReplicationRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.replication);
    let mut columns: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in sorted {
        for (k, &v) in &row.metrics {
            columns.entry(k.as_str()).or_default().push(v);
        }
    }
    columns
        .into_iter()
        .map(|(k, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let stderr = if xs.len() < 2 {
                0.0
            } else {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            };
            (k.to_string(), Aggregate { mean, stderr })
        })
        .collect()
}

/// Random stream for replication `k`.
pub fn replication_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn fan_out<T, F>(items: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let run = || (0..items).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        Some(w) if w > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(run),
        _ => run(),
    }
}

/// Serialized writer for one output directory.
struct Emitter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn rows(&mut self, name: &str, rows: &[ReplicationRow], index: &str) -> Result<()> {
        let keys: Vec<&String> = rows.first().map(|r| r.metrics.keys().collect()).unwrap_or_default();
        let mut s = String::from(index);
        for k in &keys {
            s.push(',');
            s.push_str(k);
        }
        s.push('\n');
        for r in rows {
            let _ = write!(s, "{}", r.replication);
            for k in &keys {
                let _ = write!(s, ",{}", r.metrics.get(*k).copied().unwrap_or(f64::NAN));
            }
            s.push('\n');
        }
        self.write(name, &s)
    }

    fn plot(&mut self, stem: &str, xlabel: &str, ylabel: &str, loglog: bool, series: &[&str]) -> Result<()> {
        let mut s = format!("set xlabel \"{xlabel}\"\nset ylabel \"{ylabel}\"\n");
        if loglog {
            s.push_str("set logscale xy\n");
        }
        let parts: Vec<String> = series
            .iter()
            .map(|f| format!("\"{f}\" using 1:2 with linespoints title \"{}\"", f.trim_end_matches(".dat")))
            .collect();
        let _ = writeln!(s, "plot {}", parts.join(", "));
        self.write(&format!("{stem}.plt"), &s)
    }
}

fn dat(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in points {
        let _ = writeln!(s, "{x} {y}");
    }
    s
}

fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Runs a named scenario, writing its files under `cfg.out_dir`.
pub fn run_scenario(name: &str, cfg: &RunConfig) -> Result<ScenarioReport> {
    let scenario: Scenario = name.parse()?;
    run_pipeline(scenario.pipeline(), name, cfg)
}

/// Runs a pipeline after validating the config.
pub fn run_pipeline(pipeline: Pipeline, name: &str, cfg: &RunConfig) -> Result<ScenarioReport> {
    let violations = validate_config(cfg);
    for v in violations.iter().filter(|v| !is_blocking(v)) {
        warn!("{v}");
    }
    let blocking: Vec<&String> = violations.iter().filter(|v| is_blocking(v)).collect();
    if !blocking.is_empty() {
        let list: Vec<&str> = blocking.iter().map(|s| s.as_str()).collect();
        return Err(Error::Config(list.join("; ")));
    }
    let start = Instant::now();
    let mut out = Emitter::new(&cfg.out_dir)?;
    let (rows, details) = match pipeline {
        Pipeline::Simulate => simulate(cfg, &mut out)?,
        Pipeline::Track => track(cfg, &mut out)?,
        Pipeline::Theory => theory_states(cfg, &mut out)?,
        Pipeline::Grid => grid(cfg, &mut out)?,
    };
    let aggregates = if pipeline == Pipeline::Grid {
        BTreeMap::new()
    } else {
        aggregate(&rows)
    };
    out.json(
        "summary.json",
        &json!({
            "scenario": name,
            "seed": cfg.seed,
            "replications": cfg.replications,
            "aggregates": aggregates,
            "details": details,
        }),
    )?;
    let wall_time_secs = start.elapsed().as_secs_f64();
    out.json("report.json", &json!({ "scenario": name, "wall_time_secs": wall_time_secs }))?;
    info!("{name}: {} rows in {wall_time_secs:.2}s", rows.len());
    Ok(ScenarioReport {
        scenario: name.to_string(),
        rows,
        aggregates,
        details,
        files: out.files,
        wall_time_secs,
    })
}

/// Re-runs the scenario stored in a config file, optionally under another
/// seed.
pub fn replay(config_path: &Path, seed: Option<u64>) -> Result<ScenarioReport> {
    let mut cfg = load_config(Some(config_path), None)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let name = cfg.scenario.clone();
    run_scenario(&name, &cfg)
}

struct SimRun {
    metrics: BTreeMap<String, f64>,
    /// Time-averaged (fixed size) or final (growing) degree distribution.
    distribution: Vec<f64>,
    /// Final degree counts, index = degree.
    counts: Vec<f64>,
    trajectory: String,
}

fn simulate_one(cfg: &RunConfig, k: usize, g_bar: Option<&DegreeDistribution<f64>>) -> Result<SimRun> {
    let mut rng = replication_rng(cfg.seed, k);
    let params = cfg.graph_params();
    let mut graph = cfg.initial_graph()?;
    let mut driver = cfg.driver(&mut rng)?;
    let mut theta = driver.initial_state();
    let burn_in = cfg.burn_in.unwrap_or(cfg.horizon / 5);
    let mut acc: Vec<f64> = Vec::new();
    let mut samples = 0u64;
    let (mut deletions, mut skipped) = (0u64, 0u64);
    let mut trajectory =
        String::from("step,theta,nodes,edges,mean_degree,max_degree,largest_component\n");
    let record = |step: u64, theta: usize, g: &DynamicGraph, s: &mut String| {
        let n = g.node_count();
        let _ = writeln!(
            s,
            "{step},{theta},{n},{},{},{},{}",
            g.edge_count(),
            2.0 * g.edge_count() as f64 / n as f64,
            g.max_degree(),
            g.largest_component_fraction()
        );
    };
    record(0, theta, &graph, &mut trajectory);
    for n in 0..cfg.horizon {
        let o = evolve_step(&mut graph, &params, theta, &mut rng)?;
        deletions += o.deleted as u64;
        skipped += o.deletion_skipped as u64;
        let step = n + 1;
        if cfg.mode == Mode::FixedSize && step > burn_in && step % cfg.stride == 0 {
            let d = graph.empirical_distribution::<f64>();
            if acc.len() < d.max_degree() {
                acc.resize(d.max_degree(), 0.0);
            }
            for (a, &m) in acc.iter_mut().zip(d.mass()) {
                *a += m;
            }
            samples += 1;
        }
        if step % cfg.stride == 0 || step == cfg.horizon {
            record(step, theta, &graph, &mut trajectory);
        }
        theta = driver.next_state(step, theta, &mut rng);
    }
    let final_dist = graph.empirical_distribution::<f64>();
    let distribution = if cfg.mode == Mode::FixedSize && samples > 0 {
        acc.iter().map(|a| a / samples as f64).collect()
    } else {
        final_dist.mass().to_vec()
    };
    let n = graph.node_count();
    let mut m = BTreeMap::new();
    m.insert("nodes".to_string(), n as f64);
    m.insert("edges".to_string(), graph.edge_count() as f64);
    m.insert("mean_degree".to_string(), 2.0 * graph.edge_count() as f64 / n as f64);
    m.insert("max_degree".to_string(), graph.max_degree() as f64);
    m.insert("largest_component".to_string(), graph.largest_component_fraction());
    m.insert("deletions".to_string(), deletions as f64);
    m.insert("skipped_deletions".to_string(), skipped as f64);
    m.insert("deletion_rate".to_string(), deletions as f64 / cfg.horizon as f64);
    match cfg.mode {
        Mode::FixedSize => {
            if let Some(g) = g_bar {
                let emp = DegreeDistribution::from_weights(distribution.clone())?;
                m.insert("tv_to_theory".to_string(), emp.total_variation(g));
            }
        }
        Mode::Growing => {
            let fit = theory::powerlaw_fit(&final_dist, cfg.fit_window[0], cfg.fit_window[1]);
            let (r2, beta) = fit.map_or((f64::NAN, f64::NAN), |f| (f.r_squared, f.beta_hat));
            m.insert("fit_r2".to_string(), r2);
            m.insert("fit_beta".to_string(), beta);
        }
    }
    let counts = graph.degree_histogram().iter().map(|&c| c as f64).collect();
    Ok(SimRun {
        metrics: m,
        distribution,
        counts,
        trajectory,
    })
}

fn mean_columns(vs: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let len = vs.iter().map(|v| v.len()).max().unwrap_or(0);
    let n = vs.len() as f64;
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for i in 0..len {
        let xs: Vec<f64> = vs.iter().map(|v| v.get(i).copied().unwrap_or(0.0)).collect();
        mean[i] = xs.iter().sum::<f64>() / n;
        if vs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean[i]).powi(2)).sum::<f64>() / (n - 1.0);
            stderr[i] = (var / n).sqrt();
        }
    }
    (mean, stderr)
}

fn simulate(cfg: &RunConfig, out: &mut Emitter) -> Result<(Vec<ReplicationRow>, Value)> {
    let theory = match (cfg.mode, cfg.states()) {
        (Mode::FixedSize, 1) => {
            let n0 = cfg.initial_graph()?.node_count();
            match TheorySolution::<f64>::solve(cfg.p[0], cfg.q[0], n0, cfg.d_max_cap) {
                Ok(s) => Some(s),
                Err(e) => {
                    warn!("no theory comparison: {e}");
                    None
                }
            }
        }
        _ => None,
    };
    let g_bar = theory.as_ref().map(|s| &s.g_bar);
    let runs = fan_out(cfg.replications, cfg.workers, |k| simulate_one(cfg, k, g_bar))?;

    let rows: Vec<ReplicationRow> = runs
        .iter()
        .enumerate()
        .map(|(k, r)| ReplicationRow {
            replication: k,
            metrics: r.metrics.clone(),
        })
        .collect();
    out.rows("replications.csv", &rows, "replication")?;
    for (k, r) in runs.iter().enumerate() {
        out.write(&format!("trajectory_{k}.csv"), &r.trajectory)?;
    }

    let dists: Vec<&[f64]> = runs.iter().map(|r| r.distribution.as_slice()).collect();
    let (mean, stderr) = mean_columns(&dists);
    let mut csv = String::from("degree,mean,stderr");
    csv.push_str(if g_bar.is_some() { ",theory\n" } else { "\n" });
    for (i, (m, s)) in mean.iter().zip(&stderr).enumerate() {
        let _ = write!(csv, "{},{m},{s}", i + 1);
        if let Some(g) = g_bar {
            let _ = write!(csv, ",{}", g.at(i + 1));
        }
        csv.push('\n');
    }
    out.write("degree_distribution.csv", &csv)?;

    let mut details = json!({});
    let averaged = DegreeDistribution::from_weights(mean.clone()).ok();
    match cfg.mode {
        Mode::FixedSize => {
            out.write("degree.dat", &dat(mean.iter().enumerate().map(|(i, &m)| ((i + 1) as f64, m))))?;
            let mut series = vec!["degree.dat"];
            if let Some(s) = &theory {
                out.write(
                    "theory.dat",
                    &dat(s.g_bar.mass().iter().enumerate().map(|(i, &m)| ((i + 1) as f64, m))),
                )?;
                series.push("theory.dat");
                if let Some(avg) = &averaged {
                    details["tv_of_mean"] = json_f64(avg.total_variation(&s.g_bar));
                }
                details["theory_d1"] = json!(s.d1);
            }
            out.plot("degree", "degree", "fraction of nodes", false, &series)?;
        }
        Mode::Growing => {
            let cs: Vec<&[f64]> = runs.iter().map(|r| r.counts.as_slice()).collect();
            let (counts, _) = mean_columns(&cs);
            out.write(
                "degree_counts.dat",
                &dat(counts.iter().enumerate().skip(1).filter(|(_, &c)| c > 0.0).map(|(i, &c)| (i as f64, c))),
            )?;
            out.plot("degree_counts", "degree", "number of nodes", true, &["degree_counts.dat"])?;
            if let Some(avg) = &averaged {
                if let Ok(fit) = theory::powerlaw_fit(avg, cfg.fit_window[0], cfg.fit_window[1]) {
                    details["fit_of_mean"] = serde_json::to_value(fit)?;
                }
            }
            if let Ok(pl) = theory::powerlaw_exponent(cfg.p[0], cfg.q[0]) {
                details["beta_theory"] = json_f64(pl.beta);
                details["beta_kind"] = serde_json::to_value(pl.kind)?;
            }
        }
    }
    Ok((rows, details))
}

/// First step at or after `from` (and before `until`) where the tracked
/// value is within `tol` relative of `level`, minus `from`.
fn recovery_time(points: &[(u64, f64)], from: u64, until: u64, level: f64, tol: f64) -> Option<u64> {
    points
        .iter()
        .filter(|(s, _)| *s >= from && *s < until)
        .find(|(_, v)| (v - level).abs() <= tol * level.abs())
        .map(|(s, _)| s - from)
}

fn track(cfg: &RunConfig, out: &mut Emitter) -> Result<(Vec<ReplicationRow>, Value)> {
    if cfg.mode != Mode::FixedSize || cfg.effective_r() != 0.0 {
        return Err(Error::Config("tracking needs fixed-size mode with r = 0".into()));
    }
    let n0 = cfg.initial_graph()?.node_count();
    let solutions: Vec<TheorySolution<f64>> = cfg
        .p
        .iter()
        .zip(&cfg.q)
        .map(|(&p, &q)| TheorySolution::solve(p, q, n0, cfg.d_max_cap))
        .collect::<Result<_>>()?;
    let targets: Vec<DegreeDistribution<f64>> = solutions.iter().map(|s| s.g_bar.clone()).collect();
    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(cfg.epsilon));
    let degrees = cfg.track_degrees.clone();

    let runs = fan_out(cfg.replications, cfg.workers, |k| {
        let mut rng = replication_rng(cfg.seed, k);
        let driver = cfg.driver(&mut rng)?;
        let setup = TrackingSetup {
            params: cfg.graph_params(),
            initial_graph: cfg.initial_graph()?,
            driver,
            targets: targets.clone(),
            epsilon: cfg.epsilon,
            noise: cfg.noise,
            horizon: cfg.horizon,
            stride: cfg.stride,
            g0: None,
        };
        let run = run_tracking(setup, &mut rng)?;
        let g0 = run.trajectory[0].2.clone();
        let ode = ode_reference(&run.theta_path, &targets, cfg.epsilon, &g0);

        let sqrt_eps = cfg.epsilon.sqrt();
        let mut csv = String::from("step,theta");
        for d in &degrees {
            let _ = write!(csv, ",g_hat[{d}]");
        }
        for d in &degrees {
            let _ = write!(csv, ",target[{d}]");
        }
        csv.push_str(",mse,nu_norm\n");
        let mut ode_csv = String::from("step");
        for d in &degrees {
            let _ = write!(ode_csv, ",ode[{d}]");
        }
        ode_csv.push('\n');
        let mut ode_gap = 0.0f64;
        for (step, theta, g_hat) in &run.trajectory {
            let target = targets[*theta].mass();
            let err = crate::distribution::difference(g_hat, target);
            let mse = crate::distribution::squared_norm(&err);
            let _ = write!(csv, "{step},{theta}");
            for &d in &degrees {
                let _ = write!(csv, ",{}", g_hat.get(d - 1).copied().unwrap_or(0.0));
            }
            for &d in &degrees {
                let _ = write!(csv, ",{}", targets[*theta].at(d));
            }
            let _ = writeln!(csv, ",{mse},{}", mse.sqrt() / sqrt_eps);
            let o = &ode[*step as usize];
            let _ = write!(ode_csv, "{step}");
            for &d in &degrees {
                let (a, b) = (o.get(d - 1).copied().unwrap_or(0.0), g_hat.get(d - 1).copied().unwrap_or(0.0));
                ode_gap = ode_gap.max((a - b).abs());
                let _ = write!(ode_csv, ",{a}");
            }
            ode_csv.push('\n');
        }

        let mut m = BTreeMap::new();
        let ss = run.series.steady_state_mse(burn_in).unwrap_or(f64::NAN);
        let ssu = run.series.steady_state_mse_unconditional(burn_in).unwrap_or(f64::NAN);
        m.insert("steady_state_mse".to_string(), ss);
        m.insert("steady_state_mse_unconditional".to_string(), ssu);
        let emp_trace = scaled_error_covariance(&run.series, burn_in).map_or(f64::NAN, |c| c.trace());
        m.insert("empirical_trace".to_string(), emp_trace);
        m.insert("ode_gap".to_string(), ode_gap);
        m.insert("deletions".to_string(), run.deletions as f64);
        m.insert("skipped_deletions".to_string(), run.skipped_deletions as f64);
        if let Some(f) = &cfg.forced_path {
            let d = cfg.jump_degree;
            let points: Vec<(u64, f64)> = run
                .trajectory
                .iter()
                .map(|(s, _, g)| (*s, g.get(d - 1).copied().unwrap_or(0.0)))
                .collect();
            let window = (3.0 / cfg.epsilon).ceil() as u64;
            for (i, &(at, state)) in f.jumps.iter().enumerate() {
                let until = f.jumps.get(i + 1).map_or(u64::MAX, |j| j.0);
                let level = targets[state].at(d);
                let t = recovery_time(&points, at, until, level, 0.2);
                m.insert(format!("jump{}_steps", i + 1), t.map_or(f64::NAN, |t| t as f64));
                m.insert(
                    format!("jump{}_within", i + 1),
                    t.map_or(0.0, |t| (t <= window) as u8 as f64),
                );
            }
        }
        let plot: Vec<(f64, f64, f64)> = run
            .trajectory
            .iter()
            .map(|(s, th, g)| {
                let d = cfg.jump_degree;
                (*s as f64, g.get(d - 1).copied().unwrap_or(0.0), targets[*th].at(d))
            })
            .collect();
        Ok((m, csv, ode_csv, plot))
    })?;

    let mut rows = Vec::with_capacity(runs.len());
    for (k, (m, csv, ode_csv, _)) in runs.iter().enumerate() {
        out.write(&format!("track_{k}.csv"), csv)?;
        out.write(&format!("ode_{k}.csv"), ode_csv)?;
        rows.push(ReplicationRow {
            replication: k,
            metrics: m.clone(),
        });
    }
    out.rows("replications.csv", &rows, "replication")?;
    let plot = &runs[0].3;
    out.write("track.dat", &dat(plot.iter().map(|p| (p.0, p.1))))?;
    out.write("target.dat", &dat(plot.iter().map(|p| (p.0, p.2))))?;
    out.plot(
        "track",
        "step",
        &format!("fraction of nodes with degree {}", cfg.jump_degree),
        false,
        &["track.dat", "target.dat"],
    )?;

    let states: Vec<Value> = solutions
        .iter()
        .enumerate()
        .map(|(s, sol)| {
            json!({
                "state": s,
                "p": sol.p,
                "q": sol.q,
                "g_bar_at_degree": json_f64(sol.g_bar.at(cfg.jump_degree)),
                "trace_sigma": json_f64(sol.covariance.trace()),
            })
        })
        .collect();
    let mut details = json!({ "burn_in": burn_in, "states": states });
    if solutions.len() == 1 {
        details["theory_trace"] = json_f64(solutions[0].covariance.trace());
    }
    Ok((rows, details))
}

/// Field list of the theory JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryRecord {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "N0")]
    pub n0: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub g_bar: Vec<f64>,
    pub d1: f64,
    pub d2: f64,
    /// `null` when `d2 <= d1`.
    pub lambda: Option<f64>,
    pub beta_star: Option<f64>,
    /// `null` when the exponent is unbounded.
    pub beta: Option<f64>,
    pub beta_kind: RootKind,
    pub trace_sigma: f64,
    pub min_eigenvalue_sigma: f64,
    pub condition: f64,
    pub residual: f64,
}

impl TheoryRecord {
    pub fn from_solution(s: &TheorySolution<f64>) -> Self {
        Self {
            p: s.p,
            q: s.q,
            n0: s.n0,
            d: s.dim(),
            g_bar: s.g_bar.mass().to_vec(),
            d1: s.d1,
            d2: s.d2,
            lambda: s.lambda,
            beta_star: s.power_law.beta_star,
            beta: s.power_law.beta.is_finite().then_some(s.power_law.beta),
            beta_kind: s.power_law.kind,
            trace_sigma: s.covariance.trace(),
            min_eigenvalue_sigma: s.covariance.min_eigenvalue(),
            condition: s.covariance.condition,
            residual: s.residual,
        }
    }

    fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("p".to_string(), self.p);
        m.insert("q".to_string(), self.q);
        m.insert("d1".to_string(), self.d1);
        m.insert("d2".to_string(), self.d2);
        m.insert("lambda".to_string(), self.lambda.unwrap_or(f64::NAN));
        m.insert("beta".to_string(), self.beta.unwrap_or(f64::INFINITY));
        m.insert("trace_sigma".to_string(), self.trace_sigma);
        m.insert("min_eigenvalue_sigma".to_string(), self.min_eigenvalue_sigma);
        m.insert("residual".to_string(), self.residual);
        m
    }
}

/// Row-major CSV with a `# name DxD` header.
pub fn matrix_csv(name: &str, m: &Matrix<f64>) -> String {
    let mut s = format!("# {name} {}x{}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|x| x.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn theory_states(cfg: &RunConfig, out: &mut Emitter) -> Result<(Vec<ReplicationRow>, Value)> {
    let n0 = match (&cfg.initial_graph, cfg.mode) {
        (Some(_), _) => cfg.initial_graph()?.node_count(),
        _ => cfg.n0,
    };
    let m = cfg.states();
    let mut rows = Vec::with_capacity(m);
    let mut records = Vec::with_capacity(m);
    let mut series = Vec::with_capacity(m);
    for s in 0..m {
        let sol = TheorySolution::<f64>::solve(cfg.p[s], cfg.q[s], n0, cfg.d_max_cap)?;
        let rec = TheoryRecord::from_solution(&sol);
        let suffix = if m == 1 { String::new() } else { format!("_{s}") };
        out.json(&format!("theory{suffix}.json"), &rec)?;
        let dat_name = format!("g_bar{suffix}.dat");
        out.write(
            &dat_name,
            &dat(rec.g_bar.iter().enumerate().map(|(i, &g)| ((i + 1) as f64, g))),
        )?;
        series.push(dat_name);
        if cfg.write_matrices {
            out.write(&format!("L{suffix}.csv"), &matrix_csv("L", &sol.generator))?;
            out.write(&format!("B{suffix}.csv"), &matrix_csv("B", &sol.transition))?;
            out.write(&format!("Sigma{suffix}.csv"), &matrix_csv("Sigma", &sol.covariance.sigma))?;
        }
        rows.push(ReplicationRow {
            replication: s,
            metrics: rec.metrics(),
        });
        records.push(rec);
    }
    out.rows("theory.csv", &rows, "state")?;
    let names: Vec<&str> = series.iter().map(String::as_str).collect();
    out.plot("g_bar", "degree", "expected fraction of nodes", false, &names)?;
    Ok((rows, serde_json::to_value(records)?))
}

/// Adjacent decreases in `ys` ordered by `xs`.
pub fn inversions(xs: &[f64], ys: &[f64]) -> usize {
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).filter(|w| w[1].1 < w[0].1).count()
}

fn grid(cfg: &RunConfig, out: &mut Emitter) -> Result<(Vec<ReplicationRow>, Value)> {
    let ps = cfg.p_grid.clone().unwrap_or_else(|| cfg.p.clone());
    let qs = cfg.q_grid.clone().unwrap_or_else(|| cfg.q.clone());
    let points: Vec<(f64, f64)> = qs.iter().flat_map(|&q| ps.iter().map(move |&p| (p, q))).collect();
    let records = fan_out(points.len(), cfg.workers, |i| {
        let (p, q) = points[i];
        TheorySolution::<f64>::solve(p, q, cfg.n0, cfg.d_max_cap).map(|s| TheoryRecord::from_solution(&s))
    })?;
    let rows: Vec<ReplicationRow> = records
        .iter()
        .enumerate()
        .map(|(i, r)| ReplicationRow {
            replication: i,
            metrics: r.metrics(),
        })
        .collect();
    out.rows("grid.csv", &rows, "index")?;

    let mut details = json!({ "N0": cfg.n0, "per_q": [] });
    let mut series = Vec::new();
    for &q in &qs {
        let recs: Vec<&TheoryRecord> = records.iter().filter(|r| r.q == q).collect();
        let p: Vec<f64> = recs.iter().map(|r| r.p).collect();
        let d1: Vec<f64> = recs.iter().map(|r| r.d1).collect();
        let tr: Vec<f64> = recs.iter().map(|r| r.trace_sigma).collect();
        let name = format!("trace_vs_d1_q{q}.dat");
        out.write(&name, &dat(d1.iter().copied().zip(tr.iter().copied())))?;
        series.push(name);
        details["per_q"].as_array_mut().expect("array").push(json!({
            "q": q,
            "d1_inversions_in_p": inversions(&p, &d1),
            "trace_inversions_in_d1": inversions(&d1, &tr),
        }));
    }
    if let Some(&q) = qs.first() {
        let pts = records.iter().filter(|r| r.q == q).map(|r| (r.p, r.d1));
        out.write("d1_vs_p.dat", &dat(pts))?;
        out.plot("d1_vs_p", "p", "average degree", false, &["d1_vs_p.dat"])?;
    }
    let names: Vec<&str> = series.iter().map(String::as_str).collect();
    out.plot("trace_vs_d1", "average degree", "trace of Sigma", false, &names)?;
    Ok((rows, details))
}

/// Runs the theory pipeline directly.
pub fn run_theory(cfg: &RunConfig) -> Result<ScenarioReport> {
    run_pipeline(Pipeline::Theory, "theory", cfg)
}
