//! Stochastic oracles with known population targets.
//!
//! A sample handle stores the realised randomness, so `eval_G`, `eval_jvp`
//! can be called at several points with the same xi. Problem constants are
//! certified for the sub-Gaussian moment condition E exp(|X|^2 / s^2) <= 2
//! over a ball of known radius.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dot, l2, GeometryKind, GeometrySpec};
use crate::rng::{Domain, StreamKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point has norm {norm} outside the certified radius {radius}")]
    OutsideDomain { norm: f64, radius: f64 },
    #[error("this oracle has no Jacobian-vector product")]
    JvpUnsupported,
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// Problem constants. `g_update` bounds the dual norm of the update vectors (G);
/// it is unrelated to the oracle map `eval_G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub sigma: f64,
    pub lipschitz: f64,
    pub ell: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub g_update: f64,
    pub delta_f: f64,
}

impl Default for ProblemConstants {
    fn default() -> Self {
        Self { sigma: 0.0, lipschitz: 0.0, ell: 0.0, gamma: 0.0, alpha: 0.0, g_update: 1.0, delta_f: 0.0 }
    }
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<(), OracleError> {
        let all = [self.sigma, self.lipschitz, self.ell, self.gamma, self.alpha, self.g_update, self.delta_f];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OracleError::Invalid("problem constants must be finite and nonnegative".into()));
        }
        Ok(())
    }
    pub fn sigma_l(&self) -> f64 {
        (self.delta_f * self.lipschitz).sqrt()
    }
    pub fn sigma_ell(&self) -> f64 {
        (self.delta_f * self.ell).sqrt()
    }
    pub fn sigma_gamma(&self) -> f64 {
        (self.delta_f * self.gamma).sqrt()
    }
    pub fn sigma_alpha(&self) -> f64 {
        (self.delta_f * self.delta_f * self.alpha).cbrt()
    }
}

/// Realised randomness of one oracle call.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub key: u64,
    pub draws: Vec<f64>,
}

/// A stochastic oracle G(w, xi) with optional population map g(w).
#[allow(non_snake_case)]
pub trait StochasticOracle: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Draws the randomness of one sample.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn eval_G(&self, w: &[f64], sample: &OracleSample) -> Result<Vec<f64>, OracleError>;
    /// The population target, when it is known in closed form.
    fn eval_g(&self, w: &[f64]) -> Option<Vec<f64>>;
    fn eval_jvp(&self, w: &[f64], sample: &OracleSample, d: &[f64]) -> Result<Vec<f64>, OracleError>;
    fn constants(&self) -> &ProblemConstants;
}

/// Deterministic sample handle for address `(key, domain, t, index)`.
pub fn draw_sample<O: StochasticOracle + ?Sized>(oracle: &O, key: &StreamKey, domain: Domain, t: u64, index: u64) -> OracleSample {
    let counter = key.counter(domain, t, index);
    let mut rng = key.rng(domain, t, index);
    OracleSample { key: counter, draws: oracle.draw(&mut rng) }
}

/// `b` independent handles for a reset batch at step `t`.
pub fn draw_batch<O: StochasticOracle + ?Sized>(oracle: &O, key: &StreamKey, domain: Domain, t: u64, b: usize) -> Vec<OracleSample> {
    (0..b as u64).map(|i| draw_sample(oracle, key, domain, t, i)).collect()
}

/// Largest Gaussian std s such that isotropic N(0, s^2 I_d) has
/// E exp(|Z|^2 / sigma^2) <= 2, i.e. s^2 = sigma^2 (1 - 2^{-2/d}) / 2.
pub fn subgaussian_std_for_proxy(sigma_proxy: f64, d: usize) -> f64 {
    let d = d.max(1) as f64;
    sigma_proxy * ((1.0 - 2f64.powf(-2.0 / d)) / 2.0).sqrt()
}

/// Smallest proxy sigma with E exp(|Y|^2 / sigma^2) <= 2 for a centred
/// Gaussian vector whose covariance has eigenvalues `eigs`.
pub fn gaussian_proxy(eigs: &[f64]) -> f64 {
    let eigs: Vec<f64> = eigs.iter().cloned().filter(|v| *v > 0.0).collect();
    if eigs.is_empty() {
        return 0.0;
    }
    // log E exp(|Y|^2/s2) = -1/2 sum ln(1 - 2 lam / s2), decreasing in s2.
    let log_mgf = |s2: f64| -0.5 * eigs.iter().map(|l| (1.0 - 2.0 * l / s2).ln()).sum::<f64>();
    let lmax = eigs.iter().cloned().fold(0.0, f64::max);
    let mut lo = 2.0 * lmax;
    let mut hi = 4.0 * lmax.max(eigs.iter().sum::<f64>());
    while log_mgf(hi) > std::f64::consts::LN_2 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_mgf(mid) > std::f64::consts::LN_2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.sqrt()
}

fn op_norm_sym(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn op_norm(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().cloned().fold(0.0, f64::max)
}

fn matvec(a: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(w)).as_slice().to_vec()
}

pub(crate) fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn check_point(w: &[f64], dim: usize, radius: f64) -> Result<(), OracleError> {
    if w.len() != dim {
        return Err(OracleError::DimensionMismatch { expected: dim, got: w.len() });
    }
    let norm = l2(w);
    if norm > radius * (1.0 + 1e-9) + 1e-12 {
        return Err(OracleError::OutsideDomain { norm, radius });
    }
    Ok(())
}

/// Scalar observations G(w, xi) = <xi, w> with xi ~ N(0, Sigma); g = 0.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    chol: DMatrix<f64>,
    cov_op: f64,
    radius: f64,
    constants: ProblemConstants,
}

impl LinearGaussian {
    pub fn new(cov: DMatrix<f64>, radius: f64, g_update: f64) -> Result<Self, OracleError> {
        if !cov.is_square() || cov.nrows() == 0 {
            return Err(OracleError::Invalid("covariance must be square".into()));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 {
            return Err(OracleError::Invalid("covariance must be symmetric".into()));
        }
        let chol = nalgebra::Cholesky::new(cov.clone())
            .ok_or_else(|| OracleError::Invalid("covariance must be positive definite".into()))?
            .l();
        let cov_op = op_norm_sym(&cov);
        let ell = (8.0 * cov_op / 3.0).sqrt();
        let constants = ProblemConstants { sigma: radius * ell, lipschitz: 0.0, ell, gamma: ell, alpha: 0.0, g_update, delta_f: 0.0 };
        Ok(Self { chol, cov_op, radius, constants })
    }

    pub fn cov_op_norm(&self) -> f64 {
        self.cov_op
    }

    fn xi(&self, s: &OracleSample) -> Vec<f64> {
        matvec(&self.chol, &s.draws)
    }
}

#[allow(non_snake_case)]
impl StochasticOracle for LinearGaussian {
    fn input_dim(&self) -> usize {
        self.chol.nrows()
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normals(rng, self.input_dim())
    }
    fn eval_G(&self, w: &[f64], s: &OracleSample) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        Ok(vec![dot(&self.xi(s), w)])
    }
    fn eval_g(&self, _w: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
    fn eval_jvp(&self, w: &[f64], s: &OracleSample, d: &[f64]) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        Ok(vec![dot(&self.xi(s), d)])
    }
    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }
}

/// G(w, xi) = (A + xi I) w + z with xi ~ N(0, s^2) and z ~ N(0, s_add^2 I).
///
/// The additive part keeps the noise alive near the minimiser; it cancels in
/// every shared-sample difference, so ell and gamma are those of the purely
/// multiplicative model.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    a: DMatrix<f64>,
    noise_std: f64,
    additive_std: f64,
    radius: f64,
    constants: ProblemConstants,
}

impl NoisyQuadratic {
    pub fn new(a: DMatrix<f64>, noise_std: f64, additive_std: f64, radius: f64, g_update: f64) -> Result<Self, OracleError> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(OracleError::Invalid("A must be square".into()));
        }
        if (&a - a.transpose()).amax() > 1e-12 {
            return Err(OracleError::Invalid("A must be symmetric".into()));
        }
        if !(noise_std >= 0.0 && additive_std >= 0.0 && radius > 0.0) {
            return Err(OracleError::Invalid("noise levels must be nonnegative and the radius positive".into()));
        }
        let d = a.nrows();
        let eig = SymmetricEigen::new(a.clone());
        if eig.eigenvalues.iter().any(|v| *v < -1e-12) {
            return Err(OracleError::Invalid("A must be positive semidefinite".into()));
        }
        let lipschitz = op_norm_sym(&a);
        let mut eigs = vec![additive_std * additive_std; d];
        eigs[0] += noise_std * noise_std * radius * radius;
        let sigma = gaussian_proxy(&eigs);
        let ell = noise_std * (8.0f64 / 3.0).sqrt();
        let constants = ProblemConstants { sigma, lipschitz, ell, gamma: ell, alpha: 0.0, g_update, delta_f: 0.0 };
        Ok(Self { a, noise_std, additive_std, radius, constants })
    }

    /// Diagonal A with the given spectrum.
    pub fn diagonal(spectrum: &[f64], noise_std: f64, additive_std: f64, radius: f64, g_update: f64) -> Result<Self, OracleError> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(spectrum)), noise_std, additive_std, radius, g_update)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
    pub fn additive_std(&self) -> f64 {
        self.additive_std
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Sets the initial gap used by the optimiser constants.
    pub fn with_delta_f(mut self, delta_f: f64) -> Self {
        self.constants.delta_f = delta_f;
        self
    }

    /// f(w) = w'Aw / 2.
    pub fn value(&self, w: &[f64]) -> f64 {
        0.5 * dot(w, &matvec(&self.a, w))
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        matvec(&self.a, w)
    }
}

#[allow(non_snake_case)]
impl StochasticOracle for NoisyQuadratic {
    fn input_dim(&self) -> usize {
        self.a.nrows()
    }
    fn output_dim(&self) -> usize {
        self.a.nrows()
    }
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = normals(rng, 1 + self.input_dim());
        v[0] *= self.noise_std;
        v[1..].iter_mut().for_each(|z| *z *= self.additive_std);
        v
    }
    fn eval_G(&self, w: &[f64], s: &OracleSample) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        let xi = s.draws[0];
        let mut out = matvec(&self.a, w);
        for (i, o) in out.iter_mut().enumerate() {
            *o += xi * w[i] + s.draws[1 + i];
        }
        Ok(out)
    }
    fn eval_g(&self, w: &[f64]) -> Option<Vec<f64>> {
        Some(matvec(&self.a, w))
    }
    fn eval_jvp(&self, w: &[f64], s: &OracleSample, d: &[f64]) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        let xi = s.draws[0];
        let mut out = matvec(&self.a, d);
        out.iter_mut().zip(d).for_each(|(o, di)| *o += xi * di);
        Ok(out)
    }
    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }
}

/// g(w) = mean_i (A_i w - b_i), sampled by a uniform component index.
#[derive(Debug, Clone)]
pub struct FiniteSum {
    mats: Vec<DMatrix<f64>>,
    vecs: Vec<Vec<f64>>,
    mean_a: DMatrix<f64>,
    mean_b: Vec<f64>,
    radius: f64,
    constants: ProblemConstants,
}

impl FiniteSum {
    /// Bounded noise is sub-Gaussian: |X| <= M gives E exp(|X|^2/s^2) <= 2
    /// once s = M / sqrt(ln 2).
    pub fn new(mats: Vec<DMatrix<f64>>, vecs: Vec<Vec<f64>>, radius: f64, g_update: f64) -> Result<Self, OracleError> {
        if mats.is_empty() || mats.len() != vecs.len() {
            return Err(OracleError::Invalid("need one vector per component matrix".into()));
        }
        let d = mats[0].ncols();
        if mats.iter().any(|m| m.nrows() != d || m.ncols() != d) || vecs.iter().any(|v| v.len() != d) {
            return Err(OracleError::Invalid("component shapes disagree".into()));
        }
        let n = mats.len() as f64;
        let mean_a = mats.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m) / n;
        let mut mean_b = vec![0.0; d];
        for v in &vecs {
            mean_b.iter_mut().zip(v).for_each(|(m, x)| *m += x / n);
        }
        let lmax = mats.iter().map(op_norm).fold(0.0, f64::max);
        let sqrt_ln2 = std::f64::consts::LN_2.sqrt();
        let ell = 2.0 * lmax / sqrt_ln2;
        let dev_a = mats.iter().map(|m| op_norm(&(m - &mean_a))).fold(0.0, f64::max);
        let dev = mats
            .iter()
            .zip(&vecs)
            .map(|(m, v)| {
                let db: Vec<f64> = v.iter().zip(&mean_b).map(|(x, y)| x - y).collect();
                op_norm(&(m - &mean_a)) * radius + l2(&db)
            })
            .fold(0.0, f64::max);
        let constants = ProblemConstants {
            sigma: dev / sqrt_ln2,
            lipschitz: op_norm(&mean_a),
            ell,
            gamma: dev_a / sqrt_ln2,
            alpha: 0.0,
            g_update,
            delta_f: 0.0,
        };
        Ok(Self { mats, vecs, mean_a, mean_b, radius, constants })
    }

    pub fn components(&self) -> usize {
        self.mats.len()
    }

    /// Largest component operator norm.
    pub fn max_component_lipschitz(&self) -> f64 {
        self.mats.iter().map(op_norm).fold(0.0, f64::max)
    }

    fn index(&self, s: &OracleSample) -> usize {
        (s.draws[0] as usize).min(self.mats.len() - 1)
    }
}

#[allow(non_snake_case)]
impl StochasticOracle for FiniteSum {
    fn input_dim(&self) -> usize {
        self.mean_a.ncols()
    }
    fn output_dim(&self) -> usize {
        self.mean_a.nrows()
    }
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(0..self.mats.len()) as f64]
    }
    fn eval_G(&self, w: &[f64], s: &OracleSample) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        let i = self.index(s);
        let mut out = matvec(&self.mats[i], w);
        out.iter_mut().zip(&self.vecs[i]).for_each(|(o, b)| *o -= b);
        Ok(out)
    }
    fn eval_g(&self, w: &[f64]) -> Option<Vec<f64>> {
        let mut out = matvec(&self.mean_a, w);
        out.iter_mut().zip(&self.mean_b).for_each(|(o, b)| *o -= b);
        Some(out)
    }
    fn eval_jvp(&self, w: &[f64], s: &OracleSample, d: &[f64]) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        Ok(matvec(&self.mats[self.index(s)], d))
    }
    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }
}

/// f(w) = <c, w>, h(w) = <a, w> + b over a box or simplex.
///
/// The estimator tracks H(w, xi) = <a + xi, w> + b with xi ~ N(0, s^2 I).
/// Subgradients carry bounded uniform noise so their dual norm is at most
/// the declared G.
#[derive(Debug, Clone)]
pub struct ConstrainedLinear {
    c: Vec<f64>,
    a: Vec<f64>,
    b: f64,
    noise_std: f64,
    subgrad_noise: f64,
    geometry: GeometrySpec,
    radius: f64,
    w_star: Vec<f64>,
    constants: ProblemConstants,
}

impl ConstrainedLinear {
    pub fn new(c: Vec<f64>, a: Vec<f64>, b: f64, noise_std: f64, subgrad_noise: f64, geometry: GeometrySpec) -> Result<Self, OracleError> {
        let d = geometry.dimension;
        if c.len() != d || a.len() != d {
            return Err(OracleError::Invalid("c and a must match the geometry dimension".into()));
        }
        if d > 16 {
            return Err(OracleError::Invalid("vertex enumeration is limited to d <= 16".into()));
        }
        if !(noise_std >= 0.0 && subgrad_noise >= 0.0) {
            return Err(OracleError::Invalid("noise levels must be nonnegative".into()));
        }
        let radius = geometry
            .max_l2_radius()
            .ok_or_else(|| OracleError::Invalid("constrained problems need a bounded feasible set".into()))?;
        let w_star = linear_program(&c, &a, b, &geometry).ok_or_else(|| OracleError::Invalid("constraint set is empty".into()))?;
        let norm = geometry.output_norm();
        let noise_dual = match geometry.kind {
            GeometryKind::Simplex => subgrad_noise,
            _ => subgrad_noise * (d as f64).sqrt(),
        };
        let ell = noise_std * (8.0f64 / 3.0).sqrt();
        let constants = ProblemConstants {
            sigma: radius * ell,
            lipschitz: norm.norm(&a),
            ell,
            gamma: ell,
            alpha: 0.0,
            g_update: norm.norm(&c).max(norm.norm(&a)) + noise_dual,
            delta_f: 0.0,
        };
        Ok(Self { c, a, b, noise_std, subgrad_noise, geometry, radius, w_star, constants })
    }

    pub fn geometry(&self) -> &GeometrySpec {
        &self.geometry
    }
    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }
    pub fn f(&self, w: &[f64]) -> f64 {
        dot(&self.c, w)
    }
    pub fn h(&self, w: &[f64]) -> f64 {
        dot(&self.a, w) + self.b
    }
    pub fn f_star(&self) -> f64 {
        self.f(&self.w_star)
    }
    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn noisy(&self, base: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        base.iter()
            .map(|v| if self.subgrad_noise > 0.0 { v + rng.random_range(-self.subgrad_noise..=self.subgrad_noise) } else { *v })
            .collect()
    }

    /// Stochastic subgradient of f.
    pub fn subgrad_f(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.noisy(&self.c, rng)
    }

    /// Stochastic subgradient of h.
    pub fn subgrad_h(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.noisy(&self.a, rng)
    }
}

#[allow(non_snake_case)]
impl StochasticOracle for ConstrainedLinear {
    fn input_dim(&self) -> usize {
        self.geometry.dimension
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = normals(rng, self.input_dim());
        v.iter_mut().for_each(|x| *x *= self.noise_std);
        v
    }
    fn eval_G(&self, w: &[f64], s: &OracleSample) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        Ok(vec![self.h(w) + dot(&s.draws, w)])
    }
    fn eval_g(&self, w: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self.h(w)])
    }
    fn eval_jvp(&self, w: &[f64], s: &OracleSample, d: &[f64]) -> Result<Vec<f64>, OracleError> {
        check_point(w, self.input_dim(), self.radius)?;
        Ok(vec![dot(&self.a, d) + dot(&s.draws, d)])
    }
    fn constants(&self) -> &ProblemConstants {
        &self.constants
    }
}

/// min <c, w> s.t. <a, w> + b <= 0 over the feasible set, by enumerating the
/// vertices of the polytope (set vertices plus edge/hyperplane crossings).
fn linear_program(c: &[f64], a: &[f64], b: f64, g: &GeometrySpec) -> Option<Vec<f64>> {
    let d = g.dimension;
    let feasible = |w: &[f64]| dot(a, w) + b <= 1e-12;
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    match &g.kind {
        GeometryKind::EuclideanBox { lower, upper } => {
            let vertex = |mask: u32| -> Vec<f64> { (0..d).map(|i| if mask >> i & 1 == 1 { upper[i] } else { lower[i] }).collect() };
            for mask in 0..(1u32 << d) {
                candidates.push(vertex(mask));
                for free in 0..d {
                    if mask >> free & 1 == 1 || a[free] == 0.0 {
                        continue;
                    }
                    let mut w = vertex(mask);
                    let rest = dot(a, &w) - a[free] * w[free] + b;
                    let x = -rest / a[free];
                    if x > lower[free] && x < upper[free] {
                        w[free] = x;
                        candidates.push(w);
                    }
                }
            }
        }
        GeometryKind::Simplex => {
            let e = |i: usize| -> Vec<f64> { (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
            for i in 0..d {
                candidates.push(e(i));
                for j in i + 1..d {
                    // lambda e_i + (1 - lambda) e_j on the hyperplane
                    let denom = a[i] - a[j];
                    if denom == 0.0 {
                        continue;
                    }
                    let lam = -(a[j] + b) / denom;
                    if lam > 0.0 && lam < 1.0 {
                        let mut w = vec![0.0; d];
                        w[i] = lam;
                        w[j] = 1.0 - lam;
                        candidates.push(w);
                    }
                }
            }
        }
        GeometryKind::EuclideanFree => return None,
    }
    candidates
        .into_iter()
        .filter(|w| feasible(w))
        .min_by(|x, y| dot(c, x).partial_cmp(&dot(c, y)).unwrap())
}

/// The built-in problems behind one type, for config-driven construction.
#[derive(Debug, Clone)]
pub enum SyntheticProblem {
    LinearGaussian(LinearGaussian),
    NoisyQuadratic(NoisyQuadratic),
    FiniteSum(FiniteSum),
    ConstrainedLinear(ConstrainedLinear),
}

impl SyntheticProblem {
    fn inner(&self) -> &dyn StochasticOracle {
        match self {
            SyntheticProblem::LinearGaussian(p) => p,
            SyntheticProblem::NoisyQuadratic(p) => p,
            SyntheticProblem::FiniteSum(p) => p,
            SyntheticProblem::ConstrainedLinear(p) => p,
        }
    }
    pub fn kind_name(&self) -> &'static str {
        match self {
            SyntheticProblem::LinearGaussian(_) => "linear_gaussian",
            SyntheticProblem::NoisyQuadratic(_) => "noisy_quadratic",
            SyntheticProblem::FiniteSum(_) => "finite_sum",
            SyntheticProblem::ConstrainedLinear(_) => "constrained_linear",
        }
    }
}

#[allow(non_snake_case)]
impl StochasticOracle for SyntheticProblem {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner().output_dim()
    }
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.inner().draw(rng)
    }
    fn eval_G(&self, w: &[f64], s: &OracleSample) -> Result<Vec<f64>, OracleError> {
        self.inner().eval_G(w, s)
    }
    fn eval_g(&self, w: &[f64]) -> Option<Vec<f64>> {
        self.inner().eval_g(w)
    }
    fn eval_jvp(&self, w: &[f64], s: &OracleSample, d: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.inner().eval_jvp(w, s, d)
    }
    fn constants(&self) -> &ProblemConstants {
        self.inner().constants()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad() -> NoisyQuadratic {
        NoisyQuadratic::diagonal(&[1.0, 0.5, 0.25], 0.3, 0.1, 2.0, 1.0).unwrap()
    }

    #[test]
    fn proxy_std_formula() {
        // d = 1 gives s^2 = 3/8 sigma^2
        assert_abs_diff_eq!(subgaussian_std_for_proxy(2.0, 1).powi(2), 0.375 * 4.0, epsilon = 1e-12);
        let mut prev = f64::INFINITY;
        for d in 1..50 {
            let s = subgaussian_std_for_proxy(1.0, d);
            assert!(s < prev);
            prev = s;
        }
        // the defining equation holds with equality
        for d in [1usize, 3, 10] {
            let s = subgaussian_std_for_proxy(1.5, d);
            let mgf = (1.0 - 2.0 * s * s / 2.25).powf(-(d as f64) / 2.0);
            assert_abs_diff_eq!(mgf, 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_proxy_matches_isotropic_closed_form() {
        for d in [1usize, 4, 10] {
            let s = 0.7;
            let sigma = gaussian_proxy(&vec![s * s; d]);
            assert_abs_diff_eq!(subgaussian_std_for_proxy(sigma, d), s, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_noise_sample_is_exact() {
        let q = quad();
        let s = OracleSample { key: 0, draws: vec![0.0; 4] };
        let w = [0.5, -1.0, 1.0];
        assert_eq!(q.eval_G(&w, &s).unwrap(), q.eval_g(&w).unwrap());
    }

    #[test]
    fn linear_gaussian_population_is_zero() {
        let lg = LinearGaussian::new(DMatrix::identity(3, 3) * 2.0, 1.0, 1.0).unwrap();
        assert_eq!(lg.eval_g(&[0.3, 0.1, 0.2]).unwrap(), vec![0.0]);
        assert_abs_diff_eq!(lg.constants().ell, (16.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn handles_are_repeatable() {
        let q = quad();
        let k = StreamKey::new(3, 1);
        let s1 = draw_sample(&q, &k, Domain::Sample, 9, 0);
        let s2 = draw_sample(&q, &k, Domain::Sample, 9, 0);
        assert_eq!(s1, s2);
        let w = [0.1, 0.2, 0.3];
        assert_eq!(q.eval_G(&w, &s1).unwrap(), q.eval_G(&w, &s2).unwrap());
        assert_ne!(s1, draw_sample(&q, &k, Domain::Sample, 10, 0));
        let batch = draw_batch(&q, &k, Domain::Batch, 9, 5);
        assert_eq!(batch.len(), 5);
        assert_ne!(batch[0], batch[1]);
    }

    #[test]
    fn unbiased_within_five_standard_errors() {
        let q = quad();
        let k = StreamKey::new(11, 0);
        let w = [0.4, -0.8, 1.2];
        let n = 100_000;
        let g = q.eval_g(&w).unwrap();
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for t in 0..n {
            let s = draw_sample(&q, &k, Domain::Aux, t, 0);
            for (i, v) in q.eval_G(&w, &s).unwrap().iter().enumerate() {
                sum[i] += v;
                sq[i] += v * v;
            }
        }
        for i in 0..3 {
            let mean = sum[i] / n as f64;
            let se = ((sq[i] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - g[i]).abs() <= 5.0 * se, "coord {i}: {mean} vs {}", g[i]);
        }
    }

    #[test]
    fn jvp_matches_finite_difference() {
        let q = quad();
        let k = StreamKey::new(5, 0);
        let s = draw_sample(&q, &k, Domain::Aux, 0, 0);
        let w = [0.3, 0.2, -0.1];
        let d = [1.0, -2.0, 0.5];
        let eps = 1e-6;
        let wp: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let g0 = q.eval_G(&w, &s).unwrap();
        let g1 = q.eval_G(&wp, &s).unwrap();
        let jvp = q.eval_jvp(&w, &s, &d).unwrap();
        for i in 0..3 {
            let fd = (g1[i] - g0[i]) / eps;
            assert!((fd - jvp[i]).abs() <= 1e-4 * jvp[i].abs().max(1e-3), "{fd} vs {}", jvp[i]);
        }
        assert!(q.eval_jvp(&w, &s, &[0.0; 3]).unwrap().iter().all(|v| v.abs() < 1e-15) || s.draws[0] == 0.0);
    }

    #[test]
    fn outside_radius_rejected() {
        let q = quad();
        let s = OracleSample { key: 0, draws: vec![0.0; 4] };
        assert!(matches!(q.eval_G(&[3.0, 0.0, 0.0], &s), Err(OracleError::OutsideDomain { .. })));
        assert!(matches!(q.eval_G(&[0.0, 0.0], &s), Err(OracleError::DimensionMismatch { .. })));
    }

    #[test]
    fn quadratic_constants() {
        let q = quad();
        let c = q.constants();
        assert_abs_diff_eq!(c.lipschitz, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.ell, 0.3 * (8.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_eq!(c.alpha, 0.0);
        // sigma dominates the one-dimensional bound for the worst direction
        assert!(c.sigma >= (0.09 * 4.0 + 0.01f64).sqrt() / 0.375f64.sqrt() - 1e-12);
    }

    #[test]
    fn finite_sum_is_unbiased_exactly() {
        let mats = vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]), DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 0.0])];
        let vecs = vec![vec![1.0, 0.0], vec![-1.0, 2.0]];
        let fs = FiniteSum::new(mats, vecs, 1.0, 1.0).unwrap();
        let w = [0.3, -0.4];
        let mut mean = [0.0; 2];
        for i in 0..2 {
            let s = OracleSample { key: 0, draws: vec![i as f64] };
            let v = fs.eval_G(&w, &s).unwrap();
            mean[0] += v[0] / 2.0;
            mean[1] += v[1] / 2.0;
        }
        let g = fs.eval_g(&w).unwrap();
        assert_abs_diff_eq!(mean[0], g[0], epsilon = 1e-14);
        assert_abs_diff_eq!(mean[1], g[1], epsilon = 1e-14);
        assert!(fs.constants().ell >= 2.0 * fs.max_component_lipschitz());
    }

    #[test]
    fn constrained_linear_optimum_by_brute_force() {
        let g = GeometrySpec::cube(3, -1.0, 1.0).unwrap();
        let p = ConstrainedLinear::new(vec![1.0, 0.5, -0.2], vec![1.0, 1.0, 1.0], -0.5, 0.1, 0.1, g.clone()).unwrap();
        let ws = p.w_star().to_vec();
        assert!(p.h(&ws) <= 1e-12);
        // grid search oracle
        let n = 40;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let w = [-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64, -1.0 + 2.0 * k as f64 / n as f64];
                    if p.h(&w) <= 0.0 {
                        best = best.min(p.f(&w));
                    }
                }
            }
        }
        assert!(p.f_star() <= best + 1e-12);
        assert!(p.f_star() >= best - 0.1);
    }

    #[test]
    fn constrained_linear_on_simplex() {
        let g = GeometrySpec::simplex(3).unwrap();
        let p = ConstrainedLinear::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.0], -0.4, 0.0, 0.0, g).unwrap();
        // the constraint caps w_0 at 0.4, the rest goes to w_1
        let ws = p.w_star();
        assert_abs_diff_eq!(ws[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(ws[1], 0.6, epsilon = 1e-12);
    }
}
