//! Run configurations, suites, CSV and JSON artifacts, and the work behind
//! each `viprox` subcommand.
//!
//! Floats in CSV files use `{:.16e}` (17 significant digits). JSON files use
//! the shortest representation that round-trips.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BregmanGeometry, GeometryKind};
use crate::merit::{GapEstimator, MeritError, DEFAULT_GAP_SAMPLES};
use crate::problems::{
    generate_matrix_game, generate_piecewise_quad, InstanceType, Operator, ProblemError,
    ProblemInstance,
};
use crate::schedules::{AveragingScheme, StepSchedule};
use crate::solvers::{
    run_many, AlgorithmKind, Checkpoints, Initialization, RunSpec, SolverError, Trajectory,
};
use crate::verify::{exact_gap, run_all, VerifyReport};

pub const CSV_HEADER: &str = "iter,gamma,gap_avg_iterate,residual_sq,oracle_calls,run_id";
pub const BENCH_CSV_HEADER: &str =
    "config_id,iter,gamma,gap_avg_iterate,residual_sq,oracle_calls,run_id";

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Merit(#[from] MeritError),
    #[error("config `{id}` failed: {source}")]
    InConfig {
        id: String,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("{0} lemma violation(s)")]
    Verification(usize),
}

impl HarnessError {
    fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Io { .. } | Self::Problem(_) => EXIT_CONFIG,
            Self::Solver(SolverError::Config(_) | SolverError::Schedule(_)) => EXIT_CONFIG,
            Self::Solver(_) | Self::Merit(_) => EXIT_NUMERIC,
            Self::InConfig { source, .. } => source.exit_code(),
            Self::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

fn read_file(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryChoice {
    Euclidean,
    Entropic,
}

impl GeometryChoice {
    pub fn geometry(self) -> BregmanGeometry {
        match self {
            Self::Euclidean => BregmanGeometry::new(GeometryKind::Euclidean),
            Self::Entropic => BregmanGeometry::new(GeometryKind::Entropic),
        }
    }
}

fn default_runs() -> usize {
    1
}

fn default_gap_samples() -> usize {
    DEFAULT_GAP_SAMPLES
}

/// One solver configuration. `problem_path` is resolved against the
/// directory of the file it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub problem_path: PathBuf,
    pub algorithm: AlgorithmKind,
    pub geometry: GeometryChoice,
    pub step: StepSchedule,
    #[serde(default)]
    pub averaging: AveragingScheme,
    #[serde(rename = "T")]
    pub iterations: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_gap_samples")]
    pub gap_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub init: Initialization,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.iterations < 1 {
            return Err(HarnessError::config("T", "must be >= 1"));
        }
        if self.runs < 1 {
            return Err(HarnessError::config("runs", "must be >= 1"));
        }
        if self.gap_samples < 1 {
            return Err(HarnessError::config("gap_samples", "must be >= 1"));
        }
        self.step
            .validate()
            .map_err(|e| HarnessError::config("step", e.to_string()))?;
        if let Some(id) = &self.id {
            if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
                return Err(HarnessError::config(
                    "id",
                    "must be non-empty without commas, quotes or newlines",
                ));
            }
        }
        Ok(())
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec::new(
            self.algorithm,
            self.geometry.geometry(),
            self.step,
            self.averaging,
            self.iterations,
        )
        .with_seed(self.seed)
        .with_checkpoints(self.checkpoints)
        .with_init(self.init)
    }

    fn resolve(mut self, base: &Path) -> Self {
        if self.problem_path.is_relative() {
            self.problem_path = base.join(&self.problem_path);
        }
        self
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        HarnessError::config(path, e.into_inner().to_string())
    })
}

pub fn parse_run_config(text: &str) -> Result<RunConfig, HarnessError> {
    let cfg: RunConfig = parse_json(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// `{"configs": [RunConfig, ...]}`; every config needs a unique `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub configs: Vec<RunConfig>,
}

pub fn parse_suite(text: &str) -> Result<Suite, HarnessError> {
    let suite: Suite = parse_json(text)?;
    if suite.configs.is_empty() {
        return Err(HarnessError::config("configs", "suite has no configs"));
    }
    let mut seen = BTreeSet::new();
    for (i, cfg) in suite.configs.iter().enumerate() {
        cfg.validate().map_err(|e| match e {
            HarnessError::Config { path, message } => {
                HarnessError::config(format!("configs[{i}].{path}"), message)
            }
            other => other,
        })?;
        let id = cfg
            .id
            .as_deref()
            .ok_or_else(|| HarnessError::config(format!("configs[{i}].id"), "missing"))?;
        if !seen.insert(id.to_string()) {
            return Err(HarnessError::config(
                format!("configs[{i}].id"),
                format!("duplicate id `{id}`"),
            ));
        }
    }
    Ok(suite)
}

/// A point given either as a JSON array or as comma-separated numbers.
pub fn parse_point(text: &str) -> Result<Vec<f64>, HarnessError> {
    let t = text.trim();
    let v: Vec<f64> = if t.starts_with('[') {
        parse_json(t)?
    } else {
        t.split(',')
            .enumerate()
            .map(|(i, s)| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| HarnessError::config(format!("point[{i}]"), e.to_string()))
            })
            .collect::<Result<_, _>>()?
    };
    if v.is_empty() {
        return Err(HarnessError::config("point", "empty"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(HarnessError::config(format!("point[{i}]"), "not finite"));
    }
    Ok(v)
}

pub fn load_problem(path: &Path) -> Result<ProblemInstance, HarnessError> {
    Ok(ProblemInstance::from_json_str(&read_file(path)?)?)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let cfg = parse_run_config(&read_file(path)?)?;
    Ok(cfg.resolve(path.parent().unwrap_or(Path::new("."))))
}

pub fn load_suite(path: &Path) -> Result<Suite, HarnessError> {
    let mut suite = parse_suite(&read_file(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    suite.configs = suite.configs.into_iter().map(|c| c.resolve(base)).collect();
    Ok(suite)
}

/// `{:.16e}`, with `NaN` for missing or non-finite values.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".to_string()
    }
}

fn push_rows(out: &mut String, prefix: Option<&str>, trajectories: &[Trajectory]) {
    for traj in trajectories {
        for row in &traj.rows {
            if let Some(p) = prefix {
                out.push_str(p);
                out.push(',');
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                row.iter,
                fmt_float(row.gamma),
                fmt_float(row.gap_avg_iterate.unwrap_or(f64::NAN)),
                fmt_float(row.residual_sq),
                row.oracle_calls,
                traj.run_id
            );
        }
    }
}

pub fn trajectories_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    push_rows(&mut out, None, trajectories);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_id: Option<String>,
    pub algorithm: AlgorithmKind,
    pub geometry: GeometryChoice,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub runs: usize,
    pub gap_samples: usize,
    pub final_gap_mean: f64,
    pub final_gap_per_run: Vec<f64>,
    /// Exact dual gap of each run's final averaged iterate.
    pub final_exact_gap_mean: f64,
    pub final_residual_sq_mean: f64,
    pub min_residual_sq_mean: f64,
    pub oracle_calls: u64,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub config: RunConfig,
    pub trajectories: Vec<Trajectory>,
    pub summary: RunSummary,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs `config` on `problem` and fills the sampled dual gap of every row.
pub fn solve(config: &RunConfig, problem: &ProblemInstance) -> Result<SolveOutput, HarnessError> {
    config.validate()?;
    let spec = config.run_spec();
    let estimator = GapEstimator::new(problem, config.gap_samples, config.seed)?;
    let mut trajectories = run_many(problem, &spec, config.runs)?;
    trajectories
        .par_iter_mut()
        .for_each(|t| estimator.fill_gaps(t));

    let last = |t: &Trajectory| {
        t.rows
            .last()
            .expect("T >= 1 gives at least one row")
            .clone()
    };
    let final_gap_per_run: Vec<f64> = trajectories
        .iter()
        .map(|t| last(t).gap_avg_iterate.unwrap_or(f64::NAN))
        .collect();
    let summary = RunSummary {
        config_id: config.id.clone(),
        algorithm: config.algorithm,
        geometry: config.geometry,
        iterations: config.iterations,
        runs: config.runs,
        gap_samples: config.gap_samples,
        final_gap_mean: mean(final_gap_per_run.iter().copied()),
        final_gap_per_run,
        final_exact_gap_mean: mean(
            trajectories
                .iter()
                .map(|t| exact_gap(problem, t.final_avg())),
        ),
        final_residual_sq_mean: mean(trajectories.iter().map(|t| last(t).residual_sq)),
        min_residual_sq_mean: mean(trajectories.iter().map(|t| last(t).min_residual_sq)),
        oracle_calls: trajectories[0].oracle_calls,
    };
    Ok(SolveOutput {
        config: config.clone(),
        trajectories,
        summary,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Instance JSON for `viprox generate`.
pub fn cmd_generate(
    kind: InstanceType,
    lipschitz: f64,
    sigma: f64,
    seed: u64,
) -> Result<String, HarnessError> {
    let problem = match kind {
        InstanceType::MatrixGame => {
            ProblemInstance::MatrixGame(generate_matrix_game(lipschitz, sigma, seed)?)
        }
        InstanceType::PiecewiseQuad => {
            ProblemInstance::PiecewiseQuad(generate_piecewise_quad(sigma, seed)?)
        }
    };
    Ok(problem.to_json_string())
}

/// `(trajectory CSV, summary JSON)` for `viprox solve`.
pub fn cmd_solve(config_path: &Path, seed: Option<u64>) -> Result<(String, String), HarnessError> {
    let mut config = load_run_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let problem = load_problem(&config.problem_path)?;
    let out = solve(&config, &problem)?;
    Ok((trajectories_csv(&out.trajectories), to_json(&out.summary)))
}

/// `(merged CSV, summaries JSON)` for `viprox bench`. Configs run in
/// parallel; output is ordered by `(config_id, run_id, iter)`.
pub fn cmd_bench(suite_path: &Path, seed: Option<u64>) -> Result<(String, String), HarnessError> {
    let mut suite = load_suite(suite_path)?;
    if let Some(s) = seed {
        suite.configs.iter_mut().for_each(|c| c.seed = s);
    }
    suite.configs.sort_by(|a, b| a.id.cmp(&b.id));
    let outputs: Vec<SolveOutput> = suite
        .configs
        .par_iter()
        .map(|cfg| {
            let id = cfg.id.clone().expect("suite ids are checked");
            load_problem(&cfg.problem_path)
                .and_then(|p| solve(cfg, &p))
                .map_err(|e| HarnessError::InConfig {
                    id,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;

    let mut csv = String::from(BENCH_CSV_HEADER);
    csv.push('\n');
    for out in &outputs {
        push_rows(&mut csv, out.config.id.as_deref(), &out.trajectories);
    }
    let summaries: Vec<&RunSummary> = outputs.iter().map(|o| &o.summary).collect();
    Ok((csv, to_json(&summaries)))
}

/// Runs every lemma suite; the error carries the report when any lemma fails.
pub fn cmd_verify(draws: usize, seed: u64) -> (VerifyReport, String) {
    let report = run_all(draws, seed);
    let json = to_json(&report);
    (report, json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub point: Vec<f64>,
    pub samples: usize,
    pub sampled_gap: f64,
    pub exact_gap: f64,
}

/// Sampled and exact dual gap of `point` on the instance at `problem_path`.
pub fn cmd_gap(
    problem_path: &Path,
    point: &[f64],
    samples: usize,
    seed: u64,
) -> Result<String, HarnessError> {
    let problem = load_problem(problem_path)?;
    let domain = problem.domain();
    if point.len() != domain.dim() {
        return Err(HarnessError::config(
            "point",
            format!(
                "expected {} coordinates, found {}",
                domain.dim(),
                point.len()
            ),
        ));
    }
    if !domain.is_feasible(point, 1e-9) {
        return Err(HarnessError::config("point", "not in the domain"));
    }
    if samples < 1 {
        return Err(HarnessError::config("samples", "must be >= 1"));
    }
    let est = GapEstimator::new(&problem, samples, seed)?;
    Ok(to_json(&GapReport {
        point: point.to_vec(),
        samples,
        sampled_gap: est.dual_gap(point),
        exact_gap: exact_gap(&problem, point),
    }))
}
