//! Popov mirror-prox (one mapping sample per iteration) and the Korpelevich
//! extragradient baseline (two per iteration).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BregmanGeometry, GeometryError};
use crate::merit::residual_norm_sq;
use crate::problems::Operator;
use crate::rng::NoiseRng;
use crate::schedules::{AveragingScheme, ScheduleError, StepSchedule, Window};

/// Feasibility slack checked after every prox step.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Runs longer than this are checkpointed on a log grid under
/// [`Checkpoints::Auto`].
pub const EVERY_CHECKPOINT_LIMIT: usize = 1000;

pub const LOG_CHECKPOINTS: usize = 200;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("step size must be finite and >= 0, got {0}")]
    InvalidStep(f64),
    #[error("iterate {which} left the domain at t = {t}")]
    Infeasible { t: usize, which: &'static str },
    #[error("invalid run configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    PopovStochastic,
    PopovDeterministic,
    Korpelevich,
}

impl AlgorithmKind {
    pub fn is_popov(self) -> bool {
        !matches!(self, Self::Korpelevich)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::PopovStochastic | Self::PopovDeterministic => "PMP",
            Self::Korpelevich => "KMP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initialization {
    /// Center of every simplex block.
    #[default]
    Barycenter,
    /// Uniform (Dirichlet(1, ..., 1)) draw per block; each run uses its own stream.
    Dirichlet { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    /// Every iteration up to [`EVERY_CHECKPOINT_LIMIT`] iterations, log-spaced beyond.
    #[default]
    Auto,
    Every,
    Log,
}

/// Iteration counts (1-based, ascending, ending at `iterations`) at which a
/// run records a trajectory row.
pub fn checkpoint_iters(policy: Checkpoints, iterations: usize) -> Vec<usize> {
    let every = match policy {
        Checkpoints::Every => true,
        Checkpoints::Log => false,
        Checkpoints::Auto => iterations <= EVERY_CHECKPOINT_LIMIT,
    };
    if every || iterations <= LOG_CHECKPOINTS {
        return (1..=iterations).collect();
    }
    let top = (iterations as f64).ln();
    let mut out: Vec<usize> = (0..LOG_CHECKPOINTS)
        .map(|i| {
            (top * i as f64 / (LOG_CHECKPOINTS - 1) as f64)
                .exp()
                .round() as usize
        })
        .map(|k| k.clamp(1, iterations))
        .collect();
    out.dedup();
    if *out.last().expect("non-empty grid") != iterations {
        out.push(iterations);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Last mapping value at the leading iterate; Popov only.
    pub cached_map: Option<Vec<f64>>,
    pub oracle_calls: u64,
    pub rng: NoiseRng,
}

/// A problem paired with a geometry and an update rule.
pub struct Solver<'a, P: Operator + ?Sized> {
    problem: &'a P,
    geometry: BregmanGeometry,
    algorithm: AlgorithmKind,
}

impl<'a, P: Operator + ?Sized> Solver<'a, P> {
    pub fn new(
        problem: &'a P,
        geometry: BregmanGeometry,
        algorithm: AlgorithmKind,
    ) -> Result<Self, SolverError> {
        geometry.supports(problem.domain())?;
        Ok(Self {
            problem,
            geometry,
            algorithm,
        })
    }

    pub fn geometry(&self) -> &BregmanGeometry {
        &self.geometry
    }

    pub fn algorithm(&self) -> AlgorithmKind {
        self.algorithm
    }

    fn map(&self, y: &[f64], rng: &mut NoiseRng) -> Vec<f64> {
        match self.algorithm {
            AlgorithmKind::PopovDeterministic => self.problem.eval(y),
            _ => self.problem.sample(y, rng).value,
        }
    }

    /// `x_0 = y_0` per `init`; Popov also draws and caches the first sample.
    pub fn init(
        &self,
        init: Initialization,
        seed: u64,
        stream: u64,
    ) -> Result<SolverState, SolverError> {
        let domain = self.problem.domain();
        let x0 = match init {
            Initialization::Barycenter => domain.center(),
            Initialization::Dirichlet { seed: s } => {
                domain.sample_uniform(&mut NoiseRng::new(s, stream))
            }
        };
        domain.check_dim(&x0)?;
        self.start_from(x0, NoiseRng::new(seed, stream))
    }

    pub fn start_from(&self, x0: Vec<f64>, mut rng: NoiseRng) -> Result<SolverState, SolverError> {
        let domain = self.problem.domain();
        domain.check_dim(&x0)?;
        if !domain.is_feasible(&x0, FEASIBILITY_TOL) {
            return Err(SolverError::Infeasible { t: 0, which: "x" });
        }
        let (cached_map, oracle_calls) = if self.algorithm.is_popov() {
            (Some(self.map(&x0, &mut rng)), 1)
        } else {
            (None, 0)
        };
        Ok(SolverState {
            t: 0,
            y: x0.clone(),
            x: x0,
            cached_map,
            oracle_calls,
            rng,
        })
    }

    fn prox(
        &self,
        x: &[f64],
        gamma: f64,
        g: &[f64],
        t: usize,
        which: &'static str,
    ) -> Result<Vec<f64>, SolverError> {
        let zeta: Vec<f64> = g.iter().map(|v| gamma * v).collect();
        let out = self.geometry.prox_map(self.problem.domain(), x, &zeta)?;
        if !self.problem.domain().is_feasible(&out, FEASIBILITY_TOL) {
            return Err(SolverError::Infeasible { t, which });
        }
        Ok(out)
    }

    /// One Popov iteration: `y+ = P_x(gamma g_cached)`, one fresh sample
    /// `g = F(y+)`, `x+ = P_x(gamma g)`, cache `g`.
    pub fn popov_step(&self, state: &mut SolverState, gamma: f64) -> Result<(), SolverError> {
        check_gamma(gamma)?;
        let cached = state.cached_map.as_ref().ok_or_else(|| {
            SolverError::Config("Popov step on a state without a cached sample".into())
        })?;
        let y_next = self.prox(&state.x, gamma, cached, state.t + 1, "y")?;
        let g = self.map(&y_next, &mut state.rng);
        let x_next = self.prox(&state.x, gamma, &g, state.t + 1, "x")?;
        state.x = x_next;
        state.y = y_next;
        state.cached_map = Some(g);
        state.oracle_calls += 1;
        state.t += 1;
        Ok(())
    }

    /// One Korpelevich iteration: `y+ = P_x(gamma F(x))`, `x+ = P_x(gamma F(y+))`.
    pub fn korpelevich_step(&self, state: &mut SolverState, gamma: f64) -> Result<(), SolverError> {
        check_gamma(gamma)?;
        let g_x = self.map(&state.x, &mut state.rng);
        let y_next = self.prox(&state.x, gamma, &g_x, state.t + 1, "y")?;
        let g_y = self.map(&y_next, &mut state.rng);
        let x_next = self.prox(&state.x, gamma, &g_y, state.t + 1, "x")?;
        state.x = x_next;
        state.y = y_next;
        state.oracle_calls += 2;
        state.t += 1;
        Ok(())
    }

    pub fn step(&self, state: &mut SolverState, gamma: f64) -> Result<(), SolverError> {
        if self.algorithm.is_popov() {
            self.popov_step(state, gamma)
        } else {
            self.korpelevich_step(state, gamma)
        }
    }
}

fn check_gamma(gamma: f64) -> Result<(), SolverError> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(SolverError::InvalidStep(gamma))
    }
}

/// Everything a single run needs besides the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub algorithm: AlgorithmKind,
    pub geometry: BregmanGeometry,
    pub step: StepSchedule,
    pub averaging: AveragingScheme,
    /// Number of steps; the theorem horizon is `iterations - 1`.
    pub iterations: usize,
    pub seed: u64,
    pub init: Initialization,
    pub checkpoints: Checkpoints,
    /// Evaluate `||R_gamma(x_t)||^2` at every step.
    pub track_residual: bool,
}

impl RunSpec {
    pub fn new(
        algorithm: AlgorithmKind,
        geometry: BregmanGeometry,
        step: StepSchedule,
        averaging: AveragingScheme,
        iterations: usize,
    ) -> Self {
        Self {
            algorithm,
            geometry,
            step,
            averaging,
            iterations,
            seed: 0,
            init: Initialization::Barycenter,
            checkpoints: Checkpoints::Auto,
            track_residual: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Checkpoints) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_init(mut self, init: Initialization) -> Self {
        self.init = init;
        self
    }

    pub fn horizon(&self) -> usize {
        self.iterations.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.iterations == 0 {
            return Err(SolverError::Config("T must be >= 1".into()));
        }
        self.step.validate()?;
        Ok(())
    }
}

/// State after `iter` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub iter: usize,
    /// Step size used by step `iter - 1`.
    pub gamma: f64,
    /// Averaged leading iterate over the configured window.
    pub avg: Vec<f64>,
    /// Filled in by the gap evaluation.
    pub gap_avg_iterate: Option<f64>,
    /// `||R_gamma(x_{iter-1})||^2` with that step's `gamma`; NaN when not tracked.
    pub residual_sq: f64,
    /// Running minimum of `residual_sq` over all steps so far.
    pub min_residual_sq: f64,
    pub oracle_calls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run_id: u64,
    pub rows: Vec<TrajectoryRow>,
    pub x_final: Vec<f64>,
    pub y_final: Vec<f64>,
    pub oracle_calls: u64,
}

impl Trajectory {
    pub fn final_avg(&self) -> &[f64] {
        &self.rows.last().expect("runs have at least one row").avg
    }

    pub fn row_at(&self, iter: usize) -> Option<&TrajectoryRow> {
        self.rows.iter().find(|r| r.iter == iter)
    }
}

fn blend(avg: &mut [f64], weight_sum: f64, w: f64, y: &[f64]) {
    let total = weight_sum + w;
    for (a, v) in avg.iter_mut().zip(y) {
        *a = (weight_sum * *a + w * v) / total;
    }
}

/// Runs `spec.iterations` steps on stream 0.
pub fn run<P: Operator + ?Sized>(problem: &P, spec: &RunSpec) -> Result<Trajectory, SolverError> {
    run_stream(problem, spec, 0)
}

/// Runs `spec.iterations` steps with noise drawn from stream `run_id`.
pub fn run_stream<P: Operator + ?Sized>(
    problem: &P,
    spec: &RunSpec,
    run_id: u64,
) -> Result<Trajectory, SolverError> {
    spec.validate()?;
    let solver = Solver::new(problem, spec.geometry, spec.algorithm)?;
    let mut state = solver.init(spec.init, spec.seed, run_id)?;
    let horizon = Some(spec.horizon());
    let gamma_0 = spec.step.gamma(0, horizon)?;
    let checkpoints = checkpoint_iters(spec.checkpoints, spec.iterations);
    let keep_history = spec.averaging.window == Window::HalfHorizon;

    let dim = problem.domain().dim();
    let mut avg = vec![0.0; dim];
    let mut weight_sum = 0.0;
    let mut history: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;
    let mut min_res = f64::INFINITY;

    for t in 0..spec.iterations {
        let gamma = spec.step.gamma(t, horizon)?;
        let residual_sq = if spec.track_residual && gamma > 0.0 {
            residual_norm_sq(problem, &spec.geometry, &state.x, gamma)?
        } else {
            f64::NAN
        };
        if residual_sq < min_res {
            min_res = residual_sq;
        }
        solver.step(&mut state, gamma)?;
        let w = spec.averaging.weight(gamma, gamma_0);
        if keep_history {
            history.push((w, state.y.clone()));
        } else {
            blend(&mut avg, weight_sum, w, &state.y);
            weight_sum += w;
        }

        let iter = t + 1;
        if checkpoints.get(next_cp) == Some(&iter) {
            next_cp += 1;
            let row_avg = if keep_history {
                let start = spec.averaging.window_start(iter - 1);
                let mut a = vec![0.0; dim];
                let mut ws = 0.0;
                for (w, y) in &history[start..] {
                    blend(&mut a, ws, *w, y);
                    ws += w;
                }
                a
            } else {
                avg.clone()
            };
            rows.push(TrajectoryRow {
                iter,
                gamma,
                avg: row_avg,
                gap_avg_iterate: None,
                residual_sq,
                min_residual_sq: if min_res.is_finite() {
                    min_res
                } else {
                    f64::NAN
                },
                oracle_calls: state.oracle_calls,
            });
        }
    }

    Ok(Trajectory {
        run_id,
        rows,
        x_final: state.x,
        y_final: state.y,
        oracle_calls: state.oracle_calls,
    })
}

/// `runs` independent runs on streams `0..runs`, in run order.
pub fn run_many<P: Operator + ?Sized>(
    problem: &P,
    spec: &RunSpec,
    runs: usize,
) -> Result<Vec<Trajectory>, SolverError> {
    if runs == 0 {
        return Err(SolverError::Config("runs must be >= 1".into()));
    }
    (0..runs as u64)
        .into_par_iter()
        .map(|r| run_stream(problem, spec, r))
        .collect()
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::problems::{generate_matrix_game, GrowthParams, MatrixGameInstance};
    use crate::schedules::WeightRule;

    fn game(sigma: f64, seed: u64) -> MatrixGameInstance {
        generate_matrix_game(10.0, sigma, seed).unwrap()
    }

    /// `F(x) = 0` on a one-block simplex.
    struct Zero(Domain);

    impl Operator for Zero {
        fn domain(&self) -> &Domain {
            &self.0
        }
        fn eval(&self, x: &[f64]) -> Vec<f64> {
            vec![0.0; x.len()]
        }
        fn noise_variance(&self) -> f64 {
            0.0
        }
        fn growth(&self) -> GrowthParams {
            GrowthParams::new(1.0, 1.0, 0.0).unwrap()
        }
    }

    #[test]
    fn init_examples() {
        let g = game(0.0, 1);
        let s = Solver::new(
            &g,
            BregmanGeometry::entropic(),
            AlgorithmKind::PopovStochastic,
        )
        .unwrap();
        let st = s.init(Initialization::Barycenter, 5, 0).unwrap();
        assert_eq!(st.x, vec![0.5; 4]);
        assert_eq!(st.y, st.x);
        assert_eq!(st.oracle_calls, 1);
        assert_eq!(st.cached_map.as_deref(), Some(g.eval(&[0.5; 4]).as_slice()));
        assert_eq!(st, s.init(Initialization::Barycenter, 5, 0).unwrap());

        let k = Solver::new(&g, BregmanGeometry::euclidean(), AlgorithmKind::Korpelevich).unwrap();
        let kt = k.init(Initialization::Barycenter, 5, 0).unwrap();
        assert_eq!(kt.oracle_calls, 0);
        assert!(kt.cached_map.is_none());

        let d = s.init(Initialization::Dirichlet { seed: 3 }, 5, 1).unwrap();
        assert!(g.domain().is_feasible(&d.x, 1e-12));
        assert_ne!(d.x, vec![0.5; 4]);
    }

    #[test]
    fn zero_step_is_identity() {
        let g = game(0.4, 2);
        let x0 = vec![0.3, 0.7, 0.6, 0.4];
        for alg in [AlgorithmKind::PopovStochastic, AlgorithmKind::Korpelevich] {
            for geom in [BregmanGeometry::euclidean(), BregmanGeometry::entropic()] {
                let s = Solver::new(&g, geom, alg).unwrap();
                let mut st = s.start_from(x0.clone(), NoiseRng::new(1, 0)).unwrap();
                s.step(&mut st, 0.0).unwrap();
                assert_eq!(st.x, x0);
                assert_eq!(st.y, x0);
            }
        }
    }

    #[test]
    fn interior_euclidean_step_is_plain_gradient_step() {
        let g = game(0.0, 4);
        let s = Solver::new(
            &g,
            BregmanGeometry::euclidean(),
            AlgorithmKind::PopovDeterministic,
        )
        .unwrap();
        let mut st = s.init(Initialization::Barycenter, 0, 0).unwrap();
        let gamma = 1e-3;
        let f0 = g.eval(&st.x);
        let x0 = st.x.clone();
        s.popov_step(&mut st, gamma).unwrap();
        let expect_y: Vec<f64> = g
            .domain()
            .project(
                &x0.iter()
                    .zip(&f0)
                    .map(|(x, f)| x - gamma * f)
                    .collect::<Vec<_>>(),
            )
            .unwrap();
        assert_eq!(st.y, expect_y);
        for (k, (y, x)) in st.y.iter().zip(&x0).enumerate() {
            let block_mean = if k < 2 {
                (f0[0] + f0[1]) / 2.0
            } else {
                (f0[2] + f0[3]) / 2.0
            };
            assert!((y - (x - gamma * (f0[k] - block_mean))).abs() <= 1e-12);
        }
    }

    #[test]
    fn first_leading_iterates_agree() {
        let g = game(0.0, 6);
        for geom in [BregmanGeometry::euclidean(), BregmanGeometry::entropic()] {
            let p = Solver::new(&g, geom, AlgorithmKind::PopovDeterministic).unwrap();
            let k = Solver::new(&g, geom, AlgorithmKind::Korpelevich).unwrap();
            let mut ps = p.init(Initialization::Barycenter, 0, 0).unwrap();
            let mut ks = k.init(Initialization::Barycenter, 0, 0).unwrap();
            p.step(&mut ps, 0.05).unwrap();
            k.step(&mut ks, 0.05).unwrap();
            assert_eq!(ps.y, ks.y);
            assert_eq!(ps.x, ks.x);
        }
    }

    #[test]
    fn oracle_counters() {
        let g = game(0.4, 3);
        for (alg, expect) in [
            (AlgorithmKind::PopovStochastic, 101),
            (AlgorithmKind::Korpelevich, 200),
        ] {
            let spec = RunSpec::new(
                alg,
                BregmanGeometry::euclidean(),
                StepSchedule::Power { c: 1.0, a: 0.5 },
                AveragingScheme::default(),
                100,
            );
            let tr = run(&g, &spec).unwrap();
            assert_eq!(tr.oracle_calls, expect);
            assert!(tr
                .rows
                .windows(2)
                .all(|w| w[0].oracle_calls < w[1].oracle_calls));
        }
    }

    #[test]
    fn stochastic_popov_without_noise_matches_deterministic() {
        let g = game(0.0, 9);
        let mk = |alg| {
            let spec = RunSpec::new(
                alg,
                BregmanGeometry::entropic(),
                StepSchedule::Power { c: 1.0, a: 0.5 },
                AveragingScheme::default(),
                200,
            );
            run(&g, &spec).unwrap()
        };
        assert_eq!(
            mk(AlgorithmKind::PopovStochastic),
            mk(AlgorithmKind::PopovDeterministic)
        );
    }

    #[test]
    fn uniform_and_constant_step_weights_agree() {
        let g = game(0.4, 9);
        let mk = |weights| {
            let avg = AveragingScheme::new(weights, Window::Zero);
            let spec = RunSpec::new(
                AlgorithmKind::PopovStochastic,
                BregmanGeometry::euclidean(),
                StepSchedule::Fixed { gamma: 0.05 },
                avg,
                60,
            );
            run(&g, &spec).unwrap()
        };
        let u = mk(WeightRule::Uniform);
        assert_eq!(u, mk(WeightRule::Step));
        assert_eq!(u, mk(WeightRule::InverseStep));
    }

    #[test]
    fn uniform_average_is_mean_of_leading_iterates() {
        let g = game(0.4, 10);
        let s = Solver::new(
            &g,
            BregmanGeometry::euclidean(),
            AlgorithmKind::PopovStochastic,
        )
        .unwrap();
        let mut st = s.init(Initialization::Barycenter, 3, 0).unwrap();
        let mut ys = Vec::new();
        for _ in 0..7 {
            s.step(&mut st, 0.1).unwrap();
            ys.push(st.y.clone());
        }
        let spec = RunSpec::new(
            AlgorithmKind::PopovStochastic,
            BregmanGeometry::euclidean(),
            StepSchedule::Fixed { gamma: 0.1 },
            AveragingScheme::new(WeightRule::Uniform, Window::Zero),
            7,
        )
        .with_seed(3);
        let tr = run(&g, &spec).unwrap();
        for k in 0..4 {
            let mean = ys.iter().map(|y| y[k]).sum::<f64>() / 7.0;
            assert!((tr.final_avg()[k] - mean).abs() <= 1e-15);
        }
    }

    #[test]
    fn inverse_weights_hand_example() {
        let g = game(0.4, 11);
        let spec = RunSpec::new(
            AlgorithmKind::PopovStochastic,
            BregmanGeometry::euclidean(),
            StepSchedule::Power { c: 1.0, a: 0.5 },
            AveragingScheme::new(WeightRule::InverseStep, Window::Zero),
            3,
        )
        .with_seed(8);
        let tr = run(&g, &spec).unwrap();
        let s = Solver::new(
            &g,
            BregmanGeometry::euclidean(),
            AlgorithmKind::PopovStochastic,
        )
        .unwrap();
        let mut st = s.init(Initialization::Barycenter, 8, 0).unwrap();
        let mut ys = Vec::new();
        for t in 0..3 {
            s.step(&mut st, 1.0 / ((t + 1) as f64).sqrt()).unwrap();
            ys.push(st.y.clone());
        }
        let (r2, r3) = (2f64.sqrt(), 3f64.sqrt());
        for k in 0..4 {
            let expect = (ys[0][k] + r2 * ys[1][k] + r3 * ys[2][k]) / (1.0 + r2 + r3);
            assert!((tr.final_avg()[k] - expect).abs() <= 1e-15);
        }
    }

    #[test]
    fn half_window_averages_tail() {
        let g = game(0.4, 12);
        let spec = RunSpec::new(
            AlgorithmKind::PopovStochastic,
            BregmanGeometry::euclidean(),
            StepSchedule::Power { c: 1.0, a: 0.5 },
            AveragingScheme::new(WeightRule::Step, Window::HalfHorizon),
            11,
        );
        let tr = run(&g, &spec).unwrap();
        let s = Solver::new(
            &g,
            BregmanGeometry::euclidean(),
            AlgorithmKind::PopovStochastic,
        )
        .unwrap();
        let mut st = s.init(Initialization::Barycenter, 0, 0).unwrap();
        let mut ys = Vec::new();
        for t in 0..11 {
            s.step(&mut st, 1.0 / ((t + 1) as f64).sqrt()).unwrap();
            ys.push(st.y.clone());
        }
        // horizon T = 10, window t = 5..=10
        let w: Vec<f64> = (5..=10).map(|t| 1.0 / ((t + 1) as f64).sqrt()).collect();
        let wsum: f64 = w.iter().sum();
        for k in 0..4 {
            let expect = (5..=10).zip(&w).map(|(t, wt)| wt * ys[t][k]).sum::<f64>() / wsum;
            assert!((tr.final_avg()[k] - expect).abs() <= 1e-14);
        }
    }

    #[test]
    fn zero_map_stays_put() {
        let z = Zero(Domain::simplex_product(1, 3).unwrap());
        let spec = RunSpec::new(
            AlgorithmKind::PopovStochastic,
            BregmanGeometry::entropic(),
            StepSchedule::Power { c: 1.0, a: 0.5 },
            AveragingScheme::default(),
            20,
        );
        let tr = run(&z, &spec).unwrap();
        assert!(tr.rows.iter().all(|r| r.residual_sq == 0.0));
        assert_eq!(tr.x_final, z.domain().center());
    }

    #[test]
    fn checkpoint_grids() {
        assert_eq!(
            checkpoint_iters(Checkpoints::Auto, 10),
            (1..=10).collect::<Vec<_>>()
        );
        assert_eq!(checkpoint_iters(Checkpoints::Auto, 1000).len(), 1000);
        let log = checkpoint_iters(Checkpoints::Auto, 2001);
        assert!(log.len() <= LOG_CHECKPOINTS + 1);
        assert_eq!(log[0], 1);
        assert_eq!(*log.last().unwrap(), 2001);
        assert!(log.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(checkpoint_iters(Checkpoints::Every, 2001).len(), 2001);
    }

    #[test]
    fn run_errors() {
        let g = game(0.0, 1);
        let spec = RunSpec::new(
            AlgorithmKind::Korpelevich,
            BregmanGeometry::euclidean(),
            StepSchedule::Power { c: 1.0, a: 0.5 },
            AveragingScheme::default(),
            0,
        );
        assert!(matches!(run(&g, &spec), Err(SolverError::Config(_))));
        let s = Solver::new(&g, BregmanGeometry::euclidean(), AlgorithmKind::Korpelevich).unwrap();
        let mut st = s.init(Initialization::Barycenter, 0, 0).unwrap();
        assert!(matches!(
            s.step(&mut st, f64::NAN),
            Err(SolverError::InvalidStep(_))
        ));
        assert!(matches!(
            s.step(&mut st, -1.0),
            Err(SolverError::InvalidStep(_))
        ));
    }

    #[test]
    fn runs_use_independent_streams() {
        let g = game(0.4, 1);
        let spec = RunSpec::new(
            AlgorithmKind::PopovStochastic,
            BregmanGeometry::euclidean(),
            StepSchedule::Power { c: 1.0, a: 0.5 },
            AveragingScheme::default(),
            30,
        );
        let runs = run_many(&g, &spec, 3).unwrap();
        assert_ne!(runs[0].x_final, runs[1].x_final);
        assert_eq!(runs[2], run_stream(&g, &spec, 2).unwrap());
        let det = game(0.0, 1);
        let runs = run_many(&det, &spec, 3).unwrap();
        assert_eq!(runs[0].rows, runs[2].rows);
    }
}
