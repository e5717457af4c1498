//! Popov and Korpelevich mirror-prox methods for monotone variational
//! inequalities over products of simplices.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: domains, Bregman geometries, prox maps, simplex projection.
//! - [`problems`]: the noisy matrix game and the piecewise-quadratic max problem.
//! - [`schedules`]: step-size schedules and averaging weights.
//! - [`solvers`]: the Popov and Korpelevich iterations and full runs.
//! - [`merit`]: sampled dual gap and prox residual.
//! - [`verify`]: numeric checks for the step-sum lemmas and rate bounds.
//! - [`harness`]: config files, CSV output and the subcommands behind `viprox`.
//!
//! ```
//! use viprox_core::geometry::BregmanGeometry;
//! use viprox_core::problems::{generate_matrix_game, ProblemInstance};
//! use viprox_core::schedules::{AveragingScheme, StepSchedule};
//! use viprox_core::solvers::{run, AlgorithmKind, RunSpec};
//!
//! let game = ProblemInstance::MatrixGame(generate_matrix_game(10.0, 0.0, 7).unwrap());
//! let spec = RunSpec::new(
//!     AlgorithmKind::PopovDeterministic,
//!     BregmanGeometry::euclidean(),
//!     StepSchedule::Power { c: 1.0, a: 0.5 },
//!     AveragingScheme::default(),
//!     50,
//! );
//! let traj = run(&game, &spec).unwrap();
//! assert_eq!(traj.oracle_calls, 51);
//! ```

// Negated comparisons are used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod harness;
pub mod merit;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod solvers;
pub mod verify;

pub use geometry::{BregmanGeometry, Domain, GeometryKind};
pub use problems::{Operator, ProblemInstance};
pub use rng::NoiseRng;
