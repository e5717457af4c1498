//! Constraint domains and Bregman geometries.
//!
//! Two distance-generating functions are supported: the Euclidean one,
//! `psi(x) = ||x||^2 / 2`, whose prox step is a projection, and the negative
//! entropy `psi(x) = sum x_i (ln x_i - 1)` on products of probability
//! simplices, whose prox step is a blockwise multiplicative-weights update.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that a block of a simplex product sums to one.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Stopping tolerance of the bisection on the simplex-projection threshold.
pub const BISECTION_TOL: f64 = 1e-10;

/// Iteration cap of the bisection on the simplex-projection threshold.
pub const BISECTION_MAX_ITER: usize = 200;

/// Coordinates of entropic iterates are never allowed below this value.
pub const DEFAULT_BOUNDARY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("coordinate {index} = {value:e} is below the entropic boundary floor")]
    Boundary { index: usize, value: f64 },
    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("the entropic geometry is only defined on simplex products")]
    Unsupported,
    #[error("invalid geometry parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    /// `blocks` copies of the probability simplex in `R^block_dim`.
    SimplexProduct { blocks: usize, block_dim: usize },
    /// Axis-aligned box `lower <= x <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// A closed convex constraint set that is cheap to project on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    kind: DomainKind,
    total_dim: usize,
}

impl Domain {
    pub fn simplex_product(blocks: usize, block_dim: usize) -> Result<Self, GeometryError> {
        if blocks == 0 || block_dim == 0 {
            return Err(GeometryError::InvalidDomain(
                "simplex product needs at least one block of positive dimension".into(),
            ));
        }
        Ok(Self {
            kind: DomainKind::SimplexProduct { blocks, block_dim },
            total_dim: blocks * block_dim,
        })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(GeometryError::InvalidDomain(
                "box bounds must be non-empty and of equal length".into(),
            ));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(GeometryError::NonFinite { index: i });
            }
            if lo > hi {
                return Err(GeometryError::InvalidDomain(format!(
                    "lower bound exceeds upper bound at coordinate {i}"
                )));
            }
        }
        let total_dim = lower.len();
        Ok(Self {
            kind: DomainKind::Box { lower, upper },
            total_dim,
        })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.total_dim
    }

    pub fn is_simplex_product(&self) -> bool {
        matches!(self.kind, DomainKind::SimplexProduct { .. })
    }

    /// Coordinate ranges of the simplex blocks (a single range for a box).
    pub fn blocks(&self) -> Vec<Range<usize>> {
        match self.kind {
            DomainKind::SimplexProduct { blocks, block_dim } => (0..blocks)
                .map(|b| b * block_dim..(b + 1) * block_dim)
                .collect(),
            DomainKind::Box { .. } => std::iter::once(0..self.total_dim).collect(),
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.total_dim {
            return Err(GeometryError::Dimension {
                expected: self.total_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Feasibility up to `tol`, applied both to the sign/bound constraints and
    /// to the block sums.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.total_dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            DomainKind::SimplexProduct { .. } => self.blocks().into_iter().all(|r| {
                let block = &x[r];
                block.iter().all(|&v| v >= -tol) && (block.iter().sum::<f64>() - 1.0).abs() <= tol
            }),
            DomainKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol),
        }
    }

    /// Barycenter of each simplex block, or the midpoint of the box.
    pub fn center(&self) -> Vec<f64> {
        match &self.kind {
            DomainKind::SimplexProduct { block_dim, .. } => {
                vec![1.0 / *block_dim as f64; self.total_dim]
            }
            DomainKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| 0.5 * (lo + hi))
                .collect(),
        }
    }

    /// Uniform sample. Simplex blocks use sorted uniform spacings, which is
    /// the Dirichlet(1, ..., 1) law.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            DomainKind::SimplexProduct { blocks, block_dim } => {
                let mut out = Vec::with_capacity(self.total_dim);
                let mut cuts = Vec::with_capacity(block_dim + 1);
                for _ in 0..*blocks {
                    cuts.clear();
                    cuts.push(0.0);
                    cuts.extend((1..*block_dim).map(|_| rng.gen::<f64>()));
                    cuts.push(1.0);
                    cuts.sort_by(f64::total_cmp);
                    out.extend(cuts.windows(2).map(|w| w[1] - w[0]));
                }
                out
            }
            DomainKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect(),
        }
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_dim(v)?;
        check_finite(v)?;
        Ok(match &self.kind {
            DomainKind::SimplexProduct { .. } => {
                let mut out = vec![0.0; self.total_dim];
                for r in self.blocks() {
                    project_simplex_into(&v[r.clone()], &mut out[r]);
                }
                out
            }
            DomainKind::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&x, (&lo, &hi))| x.clamp(lo, hi))
                .collect(),
        })
    }
}

fn check_finite(v: &[f64]) -> Result<(), GeometryError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(GeometryError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// The threshold `tau` with `sum max(v_i - tau, 0) = 1` is located by
/// bisection on `[min(v) - 1/n, max(v)]`. Once the bracket has isolated the
/// support, `tau` is recomputed in closed form from it so that the output
/// sums to one to machine precision.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    project_simplex_into(v, &mut out);
    out
}

pub fn project_simplex_into(v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), out.len());
    let n = v.len();
    if n == 0 {
        return;
    }
    let excess = |tau: f64| v.iter().map(|&x| (x - tau).max(0.0)).sum::<f64>() - 1.0;

    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    // excess(lo) >= 0 and excess(hi) = -1
    let mut lo = vmin - 1.0 / n as f64;
    let mut hi = vmax;
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..BISECTION_MAX_ITER {
        tau = 0.5 * (lo + hi);
        let e = excess(tau);
        if e.abs() <= BISECTION_TOL {
            break;
        }
        if e > 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
    }

    let (support_sum, support_len) = v
        .iter()
        .filter(|&&x| x > tau)
        .fold((0.0, 0usize), |(s, k), &x| (s + x, k + 1));
    if support_len > 0 {
        tau = (support_sum - 1.0) / support_len as f64;
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - tau).max(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Euclidean,
    Entropic,
}

/// A strongly convex distance-generating function together with its
/// Bregman divergence and prox mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BregmanGeometry {
    kind: GeometryKind,
    alpha: f64,
    boundary_floor: f64,
}

impl BregmanGeometry {
    pub fn euclidean() -> Self {
        Self {
            kind: GeometryKind::Euclidean,
            alpha: 1.0,
            boundary_floor: 0.0,
        }
    }

    pub fn entropic() -> Self {
        Self {
            kind: GeometryKind::Entropic,
            alpha: 1.0,
            boundary_floor: DEFAULT_BOUNDARY_FLOOR,
        }
    }

    pub fn new(kind: GeometryKind) -> Self {
        match kind {
            GeometryKind::Euclidean => Self::euclidean(),
            GeometryKind::Entropic => Self::entropic(),
        }
    }

    pub fn with_boundary_floor(mut self, floor: f64) -> Result<Self, GeometryError> {
        if !(floor > 0.0 && floor < 1.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "boundary floor must lie in (0, 1), got {floor}"
            )));
        }
        self.boundary_floor = floor;
        Ok(self)
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    /// Strong-convexity modulus with respect to the l2 norm.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn boundary_floor(&self) -> f64 {
        self.boundary_floor
    }

    /// Checks that the geometry can be used on `domain`.
    pub fn supports(&self, domain: &Domain) -> Result<(), GeometryError> {
        match (self.kind, domain.is_simplex_product()) {
            (GeometryKind::Entropic, false) => Err(GeometryError::Unsupported),
            _ => Ok(()),
        }
    }

    fn check_interior(&self, x: &[f64]) -> Result<(), GeometryError> {
        if self.kind == GeometryKind::Entropic {
            for (index, &value) in x.iter().enumerate() {
                if !value.is_finite() {
                    return Err(GeometryError::NonFinite { index });
                }
                if value < self.boundary_floor || value <= 0.0 {
                    return Err(GeometryError::Boundary { index, value });
                }
            }
        }
        Ok(())
    }

    pub fn psi(&self, x: &[f64]) -> Result<f64, GeometryError> {
        check_finite(x)?;
        Ok(match self.kind {
            GeometryKind::Euclidean => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            GeometryKind::Entropic => {
                if let Some(index) = x.iter().position(|&v| v < 0.0) {
                    return Err(GeometryError::Boundary {
                        index,
                        value: x[index],
                    });
                }
                x.iter().map(|&v| xlogx(v) - v).sum()
            }
        })
    }

    pub fn grad_psi(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        check_finite(x)?;
        match self.kind {
            GeometryKind::Euclidean => Ok(x.to_vec()),
            GeometryKind::Entropic => {
                self.check_interior(x)?;
                Ok(x.iter().map(|v| v.ln()).collect())
            }
        }
    }

    /// `B(z, x) = psi(z) - psi(x) - <grad psi(x), z - x>`.
    ///
    /// For the entropic geometry this is the generalized KL divergence
    /// `sum z ln(z/x) - z + x`, which reduces to `sum z ln(z/x)` when both
    /// points lie on the simplex product.
    pub fn divergence(&self, z: &[f64], x: &[f64]) -> Result<f64, GeometryError> {
        if z.len() != x.len() {
            return Err(GeometryError::Dimension {
                expected: x.len(),
                found: z.len(),
            });
        }
        check_finite(z)?;
        check_finite(x)?;
        match self.kind {
            GeometryKind::Euclidean => Ok(0.5 * sq_dist(z, x)),
            GeometryKind::Entropic => {
                self.check_interior(x)?;
                if let Some(index) = z.iter().position(|&v| v < 0.0) {
                    return Err(GeometryError::Boundary {
                        index,
                        value: z[index],
                    });
                }
                Ok(z.iter()
                    .zip(x)
                    .map(|(&zi, &xi)| {
                        let log_term = if zi == 0.0 { 0.0 } else { zi * (zi / xi).ln() };
                        log_term - zi + xi
                    })
                    .sum())
            }
        }
    }

    /// `P_x(zeta) = argmin_{z in X} psi(z) + <z, zeta - grad psi(x)>`.
    pub fn prox_map(
        &self,
        domain: &Domain,
        x: &[f64],
        zeta: &[f64],
    ) -> Result<Vec<f64>, GeometryError> {
        domain.check_dim(x)?;
        domain.check_dim(zeta)?;
        check_finite(zeta)?;
        match self.kind {
            GeometryKind::Euclidean => {
                let shifted: Vec<f64> = x.iter().zip(zeta).map(|(a, b)| a - b).collect();
                domain.project(&shifted)
            }
            GeometryKind::Entropic => {
                self.supports(domain)?;
                self.check_interior(x)?;
                let mut out = vec![0.0; x.len()];
                for r in domain.blocks() {
                    self.entropic_block(&x[r.clone()], &zeta[r.clone()], &mut out[r]);
                }
                Ok(out)
            }
        }
    }

    fn entropic_block(&self, x: &[f64], zeta: &[f64], out: &mut [f64]) {
        // Shift by the smallest exponent so the largest factor is exp(0) = 1;
        // the normalization removes the shift.
        let shift = zeta.iter().copied().fold(f64::INFINITY, f64::min);
        for ((o, &xi), &zi) in out.iter_mut().zip(x).zip(zeta) {
            *o = xi * (-(zi - shift)).exp();
        }
        normalize(out);
        let floor = self.boundary_floor;
        if out.iter().any(|&v| v < floor) {
            out.iter_mut().for_each(|v| *v = v.max(floor));
            normalize(out);
        }
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
