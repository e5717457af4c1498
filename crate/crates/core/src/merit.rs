//! Merit functions: the sampled dual gap `G(x) = max_z <F(z), x - z>` and the
//! prox residual `R_gamma(x) = (x - P_x(gamma F(x))) / gamma`.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{dot, BregmanGeometry, GeometryError};
use crate::problems::Operator;
use crate::rng::NoiseRng;
use crate::solvers::{run_many, RunSpec, SolverError, Trajectory};

/// Stream reserved for gap samples so they never overlap solver noise.
pub const GAP_STREAM: u64 = u64::MAX;

pub const DEFAULT_GAP_SAMPLES: usize = 20_000;

/// Pair budget of [`GapEstimator::estimate_d`].
pub const DEFAULT_D_POINTS: usize = 2_000;

#[derive(Debug, Error)]
pub enum MeritError {
    #[error("gap estimator needs at least one sample point")]
    Empty,
    #[error("sample point {0} is infeasible")]
    Infeasible(usize),
    #[error("gamma must be > 0, got {0}")]
    InvalidGamma(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Dual gap over a fixed sample set, with `F(z)` and `<F(z), z>` cached.
#[derive(Debug, Clone)]
pub struct GapEstimator {
    dim: usize,
    points: Vec<f64>,
    maps: Vec<f64>,
    offsets: Vec<f64>,
    include_candidate: bool,
}

impl GapEstimator {
    /// `n` points drawn uniformly from the domain on the gap stream of `seed`.
    pub fn new<P: Operator + ?Sized>(problem: &P, n: usize, seed: u64) -> Result<Self, MeritError> {
        let mut rng = NoiseRng::new(seed, GAP_STREAM);
        let pts = (0..n)
            .map(|_| problem.domain().sample_uniform(&mut rng))
            .collect();
        Self::from_points(problem, pts)
    }

    pub fn from_points<P: Operator + ?Sized>(
        problem: &P,
        points: Vec<Vec<f64>>,
    ) -> Result<Self, MeritError> {
        if points.is_empty() {
            return Err(MeritError::Empty);
        }
        let mut est = Self {
            dim: problem.domain().dim(),
            points: Vec::new(),
            maps: Vec::new(),
            offsets: Vec::new(),
            include_candidate: true,
        };
        est.add_points(problem, points)?;
        Ok(est)
    }

    pub fn add_points<P: Operator + ?Sized>(
        &mut self,
        problem: &P,
        points: Vec<Vec<f64>>,
    ) -> Result<(), MeritError> {
        let base = self.len();
        for (i, z) in points.into_iter().enumerate() {
            problem.domain().check_dim(&z)?;
            if !problem.domain().is_feasible(&z, 1e-9) {
                return Err(MeritError::Infeasible(base + i));
            }
            let f = problem.eval(&z);
            self.offsets.push(dot(&f, &z));
            self.maps.extend_from_slice(&f);
            self.points.extend_from_slice(&z);
        }
        Ok(())
    }

    /// With the candidate included (the default) the estimate is clipped at
    /// zero, the value of the `z = x` term.
    pub fn with_candidate(mut self, include: bool) -> Self {
        self.include_candidate = include;
        self
    }

    pub fn includes_candidate(&self) -> bool {
        self.include_candidate
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dual_gap(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.dim,
            "point dimension must match the estimator"
        );
        let raw = self
            .maps
            .chunks_exact(self.dim)
            .zip(&self.offsets)
            .map(|(f, c)| dot(f, x) - c)
            .fold(f64::NEG_INFINITY, f64::max);
        if self.include_candidate {
            raw.max(0.0)
        } else {
            raw
        }
    }

    /// Largest `B_psi(z, x)` over ordered pairs of the first `max_points`
    /// samples.
    pub fn estimate_d(
        &self,
        geometry: &BregmanGeometry,
        max_points: usize,
    ) -> Result<f64, MeritError> {
        let m = self.len().min(max_points.max(1));
        (0..m)
            .into_par_iter()
            .map(|i| {
                let mut best = 0.0f64;
                for j in 0..m {
                    if i != j {
                        best = best.max(geometry.divergence(self.point(i), self.point(j))?);
                    }
                }
                Ok(best)
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
    }

    /// Sets `gap_avg_iterate` on every row.
    pub fn fill_gaps(&self, trajectory: &mut Trajectory) {
        trajectory
            .rows
            .par_iter_mut()
            .for_each(|row| row.gap_avg_iterate = Some(self.dual_gap(&row.avg)));
    }
}

/// `R_gamma(x) = (x - P_x(gamma F(x))) / gamma` with the deterministic map.
pub fn residual<P: Operator + ?Sized>(
    problem: &P,
    geometry: &BregmanGeometry,
    x: &[f64],
    gamma: f64,
) -> Result<Vec<f64>, GeometryError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(GeometryError::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    let zeta: Vec<f64> = problem.eval(x).iter().map(|v| gamma * v).collect();
    let p = geometry.prox_map(problem.domain(), x, &zeta)?;
    Ok(x.iter().zip(&p).map(|(a, b)| (a - b) / gamma).collect())
}

pub fn residual_norm_sq<P: Operator + ?Sized>(
    problem: &P,
    geometry: &BregmanGeometry,
    x: &[f64],
    gamma: f64,
) -> Result<f64, GeometryError> {
    let r = residual(problem, geometry, x, gamma)?;
    Ok(dot(&r, &r))
}

/// Running minimum of a residual series.
pub fn running_min(series: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    series
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// `min_t ||R_{gamma_t}(x_t)||^2` over all steps of the run.
pub fn min_residual_sq(trajectory: &Trajectory) -> f64 {
    trajectory
        .rows
        .last()
        .map_or(f64::NAN, |r| r.min_residual_sq)
}

/// `(iter, mean gap)` per checkpoint.
pub type GapSeries = Vec<(usize, f64)>;

/// Mean dual gap over `runs` independent runs, one value per checkpoint.
pub fn expected_dual_gap<P: Operator + ?Sized>(
    problem: &P,
    spec: &RunSpec,
    runs: usize,
    estimator: &GapEstimator,
) -> Result<(Vec<Trajectory>, GapSeries), MeritError> {
    let mut trajectories = run_many(problem, spec, runs)?;
    trajectories
        .par_iter_mut()
        .for_each(|t| estimator.fill_gaps(t));
    let means = mean_gap_series(&trajectories);
    Ok((trajectories, means))
}

/// Per-checkpoint mean of `gap_avg_iterate` across runs with identical grids;
/// rows without a gap count as NaN.
pub fn mean_gap_series(trajectories: &[Trajectory]) -> GapSeries {
    let Some(first) = trajectories.first() else {
        return Vec::new();
    };
    let n = trajectories.len() as f64;
    first
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let sum: f64 = trajectories
                .iter()
                .map(|t| t.rows[i].gap_avg_iterate.unwrap_or(f64::NAN))
                .sum();
            (row.iter, sum / n)
        })
        .collect()
}
