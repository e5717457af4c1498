//! Problem instances: the noisy two-player matrix game on `Δ² × Δ²` and the
//! maximum of four convex quadratics on `Δ²`.

use std::collections::BTreeMap;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dot, Domain};
use crate::rng::NoiseRng;

pub type Mat2 = [[f64; 2]; 2];
pub type Mat4 = [[f64; 4]; 4];

/// Ties between quadratic pieces closer than this are broken toward the
/// smaller piece index.
pub const DEFAULT_TIE_TOL: f64 = 1e-12;

/// Covariance scale of the mapping noise used throughout the experiments.
pub const EXPERIMENT_NOISE_VARIANCE: f64 = 0.4;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("instance file: {path}: {message}")]
    Parse { path: String, message: String },
    #[error("instance file: {0}")]
    Schema(String),
}

/// Growth of the mapping variation:
/// `||F(x) - F(y)|| <= l_nu ||x - y||^nu + m_nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub nu: f64,
    pub l_nu: f64,
    pub m_nu: f64,
}

impl GrowthParams {
    pub fn new(nu: f64, l_nu: f64, m_nu: f64) -> Result<Self, ProblemError> {
        if !(nu >= 0.0 && nu.is_finite()) || !(l_nu > 0.0 && l_nu.is_finite()) || !(m_nu >= 0.0) {
            return Err(ProblemError::InvalidParameter(format!(
                "growth parameters out of range: nu={nu}, L={l_nu}, M={m_nu}"
            )));
        }
        Ok(Self { nu, l_nu, m_nu })
    }
}

/// One stochastic evaluation of the mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingSample {
    pub value: Vec<f64>,
    /// Index of the noise vector in the generator's sequence; `None` when no
    /// noise was drawn.
    pub noise_draw_id: Option<u64>,
}

/// A VI mapping on a constraint domain, with deterministic and sampled
/// evaluations.
pub trait Operator: Send + Sync {
    fn domain(&self) -> &Domain;

    /// Expected mapping `F(x)`.
    fn eval(&self, x: &[f64]) -> Vec<f64>;

    /// Per-coordinate variance of the additive Gaussian noise.
    fn noise_variance(&self) -> f64;

    fn growth(&self) -> GrowthParams;

    /// `F(x) + xi` with `xi ~ N(0, noise_variance * I)`. No randomness is
    /// consumed when the variance is zero.
    fn sample(&self, x: &[f64], rng: &mut NoiseRng) -> MappingSample {
        let mut value = self.eval(x);
        let var = self.noise_variance();
        if var == 0.0 {
            return MappingSample {
                value,
                noise_draw_id: None,
            };
        }
        let id = rng.next_draw_id();
        let sd = var.sqrt();
        value.iter_mut().for_each(|v| *v += sd * rng.gaussian());
        MappingSample {
            value,
            noise_draw_id: Some(id),
        }
    }
}

fn check_len(x: &[f64], n: usize) {
    assert_eq!(x.len(), n, "point dimension must match the problem domain");
}

fn mat2_mul_vec(m: &Mat2, x: &[f64]) -> [f64; 2] {
    [
        m[0][0] * x[0] + m[0][1] * x[1],
        m[1][0] * x[0] + m[1][1] * x[1],
    ]
}

fn mat2_transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn sym_part(m: &Mat2) -> Mat2 {
    let t = mat2_transpose(m);
    [
        [0.5 * (m[0][0] + t[0][0]), 0.5 * (m[0][1] + t[0][1])],
        [0.5 * (m[1][0] + t[1][0]), 0.5 * (m[1][1] + t[1][1])],
    ]
}

/// `Q diag(lambda) Q^T` with `Q` from the QR factorization of a matrix with
/// entries uniform on `[0, 4]`; returned exactly symmetric.
fn random_psd<const N: usize>(rng: &mut NoiseRng, max_eig: f64) -> [[f64; N]; N] {
    let lambdas: Vec<f64> = (0..N).map(|_| max_eig * rng.uniform()).collect();
    let raw: Vec<f64> = (0..N * N).map(|_| 4.0 * rng.uniform()).collect();
    let m = nalgebra::DMatrix::from_row_slice(N, N, &raw);
    let q = m.qr().q();
    let j = &q
        * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambdas))
        * q.transpose();
    let mut out = [[0.0; N]; N];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (j[(r, c)] + j[(c, r)]);
        }
    }
    out
}

/// Two-player quadratic game on `Δ² × Δ²`:
/// `F(x) = [[A + A^T, B], [D^T, C + C^T]] x + [p; q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameInstance {
    pub a: Mat2,
    pub b: Mat2,
    pub c: Mat2,
    pub d: Mat2,
    pub p: [f64; 2],
    pub q: [f64; 2],
    /// Per-coordinate noise variance.
    pub sigma: f64,
    /// Lipschitz constant the Jacobian was built against.
    pub lipschitz: f64,
    pub seed: u64,
    jacobian: Mat4,
    domain: Domain,
}

impl MatrixGameInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn from_blocks(
        a: Mat2,
        b: Mat2,
        c: Mat2,
        d: Mat2,
        p: [f64; 2],
        q: [f64; 2],
        sigma: f64,
        lipschitz: f64,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!(
                "L must be > 0, got {lipschitz}"
            )));
        }
        let all = a
            .iter()
            .chain(&b)
            .chain(&c)
            .chain(&d)
            .flatten()
            .chain(&p)
            .chain(&q);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::InvalidParameter(
                "non-finite matrix or vector entry".into(),
            ));
        }
        let mut jacobian = [[0.0; 4]; 4];
        for r in 0..2 {
            for s in 0..2 {
                jacobian[r][s] = a[r][s] + a[s][r];
                jacobian[r][s + 2] = b[r][s];
                jacobian[r + 2][s] = d[s][r];
                jacobian[r + 2][s + 2] = c[r][s] + c[s][r];
            }
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            p,
            q,
            sigma,
            lipschitz,
            seed,
            jacobian,
            domain: Domain::simplex_product(2, 2).expect("fixed domain"),
        })
    }

    pub fn jacobian(&self) -> &Mat4 {
        &self.jacobian
    }

    pub fn offset(&self) -> [f64; 4] {
        [self.p[0], self.p[1], self.q[0], self.q[1]]
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self, ProblemError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Eigenvalues of the symmetric part of the Jacobian, ascending.
    pub fn jacobian_sym_eigenvalues(&self) -> [f64; 4] {
        let j = Matrix4::from_fn(|r, c| self.jacobian[r][c]);
        let sym = (j + j.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3]]
    }

    pub fn jacobian_spectral_norm(&self) -> f64 {
        let j = Matrix4::from_fn(|r, c| self.jacobian[r][c]);
        j.singular_values().max()
    }
}

/// Builds a matrix game whose Jacobian is symmetric PSD with eigenvalues
/// drawn uniformly in `[0, lipschitz]`; `p` and `q` are standard normal.
pub fn generate_matrix_game(
    lipschitz: f64,
    sigma: f64,
    seed: u64,
) -> Result<MatrixGameInstance, ProblemError> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(ProblemError::InvalidParameter(format!(
            "L must be > 0, got {lipschitz}"
        )));
    }
    let mut rng = NoiseRng::new(seed, 0);
    let j: Mat4 = random_psd::<4>(&mut rng, lipschitz);
    let block = |r0: usize, c0: usize| -> Mat2 {
        [
            [j[r0][c0], j[r0][c0 + 1]],
            [j[r0 + 1][c0], j[r0 + 1][c0 + 1]],
        ]
    };
    let half = |m: Mat2| -> Mat2 {
        [
            [0.5 * m[0][0], 0.5 * m[0][1]],
            [0.5 * m[1][0], 0.5 * m[1][1]],
        ]
    };
    let a = half(block(0, 0));
    let b = block(0, 2);
    let c = half(block(2, 2));
    let d = mat2_transpose(&block(2, 0));
    let p = [rng.gaussian(), rng.gaussian()];
    let q = [rng.gaussian(), rng.gaussian()];
    MatrixGameInstance::from_blocks(a, b, c, d, p, q, sigma, lipschitz, seed)
}

impl Operator for MatrixGameInstance {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        check_len(x, 4);
        let h = self.offset();
        self.jacobian
            .iter()
            .zip(h)
            .map(|(row, hi)| dot(row, x) + hi)
            .collect()
    }

    fn noise_variance(&self) -> f64 {
        self.sigma
    }

    fn growth(&self) -> GrowthParams {
        GrowthParams {
            nu: 1.0,
            l_nu: self.lipschitz,
            m_nu: 0.0,
        }
    }
}

/// `l(x) = max_i 0.5 <x, A_i x> + <b_i, x>` on `Δ²`; the mapping is a
/// selection from its subdifferential.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadInstance {
    pub a: [Mat2; 4],
    pub b: [[f64; 2]; 4],
    pub x_trans: [[f64; 2]; 3],
    pub sigma: f64,
    pub seed: u64,
    pub tie_tol: f64,
    domain: Domain,
}

impl PiecewiseQuadInstance {
    pub fn new(
        a: [Mat2; 4],
        b: [[f64; 2]; 4],
        x_trans: [[f64; 2]; 3],
        sigma: f64,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        let all = a
            .iter()
            .flatten()
            .flatten()
            .chain(b.iter().flatten())
            .chain(x_trans.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::InvalidParameter(
                "non-finite matrix or vector entry".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            x_trans,
            sigma,
            seed,
            tie_tol: DEFAULT_TIE_TOL,
            domain: Domain::simplex_product(1, 2).expect("fixed domain"),
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self, ProblemError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Value of piece `i` (zero-based).
    pub fn piece(&self, i: usize, x: &[f64]) -> f64 {
        let ax = mat2_mul_vec(&self.a[i], x);
        0.5 * dot(x, &ax) + dot(&self.b[i], x)
    }

    pub fn piece_gradient(&self, i: usize, x: &[f64]) -> [f64; 2] {
        let s = mat2_mul_vec(&sym_part(&self.a[i]), x);
        [s[0] + self.b[i][0], s[1] + self.b[i][1]]
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        check_len(x, 2);
        (0..4)
            .map(|i| self.piece(i, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Gradient of the smallest-index piece within `tie_tol` of the max.
    pub fn subgradient(&self, x: &[f64], tie_tol: f64) -> [f64; 2] {
        check_len(x, 2);
        let values: Vec<f64> = (0..4).map(|i| self.piece(i, x)).collect();
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let active = values
            .iter()
            .position(|&v| v >= top - tie_tol)
            .expect("at least one piece attains the max");
        self.piece_gradient(active, x)
    }

    /// Indices of the pieces within `tie_tol` of the max.
    pub fn active_set(&self, x: &[f64], tie_tol: f64) -> Vec<usize> {
        let values: Vec<f64> = (0..4).map(|i| self.piece(i, x)).collect();
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..4).filter(|&i| values[i] >= top - tie_tol).collect()
    }

    /// Bounded-variation constant: twice the largest piece-gradient norm on
    /// the simplex. Gradient norms are convex in `x`, so the vertices suffice.
    pub fn bounded_variation_constant(&self) -> f64 {
        let vertices = [[1.0, 0.0], [0.0, 1.0]];
        let max_norm = (0..4)
            .flat_map(|i| vertices.iter().map(move |v| (i, v)))
            .map(|(i, v)| {
                let g = self.piece_gradient(i, v);
                (g[0] * g[0] + g[1] * g[1]).sqrt()
            })
            .fold(0.0, f64::max);
        2.0 * max_norm
    }
}

/// Four PSD pieces with eigenvalues in `[0, i]`, `b_1 ~ N(0, I)`, three
/// uniform transition points, and `b_i = b_{i-1} + (A_{i-1} - A_i) x_{i-1} / 2`
/// so that consecutive pieces agree at their transition point.
pub fn generate_piecewise_quad(
    sigma: f64,
    seed: u64,
) -> Result<PiecewiseQuadInstance, ProblemError> {
    let mut rng = NoiseRng::new(seed, 0);
    let mut a = [[[0.0; 2]; 2]; 4];
    for (i, ai) in a.iter_mut().enumerate() {
        *ai = random_psd::<2>(&mut rng, (i + 1) as f64);
    }
    let mut b = [[0.0; 2]; 4];
    b[0] = [rng.gaussian(), rng.gaussian()];
    let mut x_trans = [[0.0; 2]; 3];
    for xt in x_trans.iter_mut() {
        let u = rng.uniform();
        *xt = [u, 1.0 - u];
    }
    for i in 1..4 {
        let diff: Mat2 =
            std::array::from_fn(|r| std::array::from_fn(|c| a[i - 1][r][c] - a[i][r][c]));
        let shift = mat2_mul_vec(&diff, &x_trans[i - 1]);
        b[i] = [b[i - 1][0] + 0.5 * shift[0], b[i - 1][1] + 0.5 * shift[1]];
    }
    PiecewiseQuadInstance::new(a, b, x_trans, sigma, seed)
}

impl Operator for PiecewiseQuadInstance {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.subgradient(x, self.tie_tol).to_vec()
    }

    fn noise_variance(&self) -> f64 {
        self.sigma
    }

    fn growth(&self) -> GrowthParams {
        GrowthParams {
            nu: 0.0,
            l_nu: self.bounded_variation_constant(),
            m_nu: 0.0,
        }
    }
}

/// Either experiment family, as stored in an instance file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemInstance {
    MatrixGame(MatrixGameInstance),
    PiecewiseQuad(PiecewiseQuadInstance),
}

impl Operator for ProblemInstance {
    fn domain(&self) -> &Domain {
        match self {
            Self::MatrixGame(m) => m.domain(),
            Self::PiecewiseQuad(p) => p.domain(),
        }
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::MatrixGame(m) => m.eval(x),
            Self::PiecewiseQuad(p) => p.eval(x),
        }
    }

    fn noise_variance(&self) -> f64 {
        match self {
            Self::MatrixGame(m) => m.noise_variance(),
            Self::PiecewiseQuad(p) => p.noise_variance(),
        }
    }

    fn growth(&self) -> GrowthParams {
        match self {
            Self::MatrixGame(m) => m.growth(),
            Self::PiecewiseQuad(p) => p.growth(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceType {
    MatrixGame,
    PiecewiseQuad,
}

/// On-disk layout of an instance. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "type")]
    pub kind: InstanceType,
    pub seed: u64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub sigma: f64,
    pub matrices: BTreeMap<String, Vec<f64>>,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

fn take<const N: usize>(
    map: &BTreeMap<String, Vec<f64>>,
    section: &str,
    key: &str,
) -> Result<[f64; N], ProblemError> {
    let v = map
        .get(key)
        .ok_or_else(|| ProblemError::Schema(format!("missing {section}.{key}")))?;
    if v.len() != N {
        return Err(ProblemError::Schema(format!(
            "{section}.{key} must have {N} entries, found {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ProblemError::Schema(format!(
            "{section}.{key} has a non-finite entry"
        )));
    }
    Ok(std::array::from_fn(|i| v[i]))
}

fn mat(map: &BTreeMap<String, Vec<f64>>, key: &str) -> Result<Mat2, ProblemError> {
    let v: [f64; 4] = take(map, "matrices", key)?;
    Ok([[v[0], v[1]], [v[2], v[3]]])
}

fn flat(m: &Mat2) -> Vec<f64> {
    vec![m[0][0], m[0][1], m[1][0], m[1][1]]
}

fn check_keys(
    map: &BTreeMap<String, Vec<f64>>,
    section: &str,
    allowed: &[&str],
) -> Result<(), ProblemError> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ProblemError::Schema(format!("unknown key {section}.{k}"))),
        None => Ok(()),
    }
}

impl ProblemInstance {
    pub fn to_file(&self) -> InstanceFile {
        match self {
            Self::MatrixGame(m) => InstanceFile {
                kind: InstanceType::MatrixGame,
                seed: m.seed,
                lipschitz: m.lipschitz,
                sigma: m.sigma,
                matrices: [("A", &m.a), ("B", &m.b), ("C", &m.c), ("D", &m.d)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), flat(v)))
                    .collect(),
                vectors: [("p", m.p), ("q", m.q)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.to_vec()))
                    .collect(),
            },
            Self::PiecewiseQuad(p) => {
                let mut vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for (i, b) in p.b.iter().enumerate() {
                    vectors.insert(format!("b{}", i + 1), b.to_vec());
                }
                for (i, x) in p.x_trans.iter().enumerate() {
                    vectors.insert(format!("x_trans{}", i + 1), x.to_vec());
                }
                InstanceFile {
                    kind: InstanceType::PiecewiseQuad,
                    seed: p.seed,
                    lipschitz: 4.0,
                    sigma: p.sigma,
                    matrices: p
                        .a
                        .iter()
                        .enumerate()
                        .map(|(i, a)| (format!("A{}", i + 1), flat(a)))
                        .collect(),
                    vectors,
                }
            }
        }
    }

    pub fn from_file(file: &InstanceFile) -> Result<Self, ProblemError> {
        if !(file.lipschitz > 0.0 && file.lipschitz.is_finite()) {
            return Err(ProblemError::Schema(format!(
                "L must be > 0, got {}",
                file.lipschitz
            )));
        }
        if !(file.sigma >= 0.0 && file.sigma.is_finite()) {
            return Err(ProblemError::Schema(format!(
                "sigma must be >= 0, got {}",
                file.sigma
            )));
        }
        match file.kind {
            InstanceType::MatrixGame => {
                check_keys(&file.matrices, "matrices", &["A", "B", "C", "D"])?;
                check_keys(&file.vectors, "vectors", &["p", "q"])?;
                let m = MatrixGameInstance::from_blocks(
                    mat(&file.matrices, "A")?,
                    mat(&file.matrices, "B")?,
                    mat(&file.matrices, "C")?,
                    mat(&file.matrices, "D")?,
                    take(&file.vectors, "vectors", "p")?,
                    take(&file.vectors, "vectors", "q")?,
                    file.sigma,
                    file.lipschitz,
                    file.seed,
                )?;
                Ok(Self::MatrixGame(m))
            }
            InstanceType::PiecewiseQuad => {
                check_keys(&file.matrices, "matrices", &["A1", "A2", "A3", "A4"])?;
                check_keys(
                    &file.vectors,
                    "vectors",
                    &["b1", "b2", "b3", "b4", "x_trans1", "x_trans2", "x_trans3"],
                )?;
                let mut a = [[[0.0; 2]; 2]; 4];
                let mut b = [[0.0; 2]; 4];
                for i in 0..4 {
                    a[i] = mat(&file.matrices, &format!("A{}", i + 1))?;
                    b[i] = take(&file.vectors, "vectors", &format!("b{}", i + 1))?;
                }
                let mut x_trans = [[0.0; 2]; 3];
                for (i, xt) in x_trans.iter_mut().enumerate() {
                    *xt = take(&file.vectors, "vectors", &format!("x_trans{}", i + 1))?;
                }
                Ok(Self::PiecewiseQuad(PiecewiseQuadInstance::new(
                    a, b, x_trans, file.sigma, file.seed,
                )?))
            }
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, ProblemError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: InstanceFile =
            serde_path_to_error::deserialize(de).map_err(|e| ProblemError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Self::from_file(&file)
    }

    pub fn sigma(&self) -> f64 {
        self.noise_variance()
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::MatrixGame(m) => m.seed,
            Self::PiecewiseQuad(p) => p.seed,
        }
    }
}
