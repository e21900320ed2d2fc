//! Mirror descent driven by normalized estimator outputs.

use serde::Serialize;
use thiserror::Error;

use crate::bounds::{select_params_case1, select_params_case23, BoundsError, Case, ParamSelection};
use crate::estimator::{estimator_init, estimator_step, EstimatorConfig, EstimatorError, Family, Schedule};
use crate::geometry::{GeometryError, GeometrySpec};
use crate::oracle::{ProblemConstants, StochasticOracle};
use crate::rng::StreamKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("the oracle exposes no exact gradient")]
    NoGradient,
}

/// Dual norms at or below this are treated as zero.
pub const ZERO_DIRECTION: f64 = 1e-14;

/// v / |v|_*, or the zero vector when |v|_* is negligible.
pub fn normalized_update(v: &[f64], geometry: &GeometrySpec) -> Result<Vec<f64>, GeometryError> {
    let n = geometry.dual_norm(v)?;
    if n > ZERO_DIRECTION {
        Ok(v.iter().map(|x| x / n).collect())
    } else {
        Ok(vec![0.0; v.len()])
    }
}

/// |grad|_* |P(w, grad / |grad|_*, eta / 2)|^2, zero at a stationary point.
pub fn stationarity_witness(grad: &[f64], w: &[f64], eta: f64, geometry: &GeometrySpec) -> Result<f64, GeometryError> {
    let n = geometry.dual_norm(grad)?;
    if n <= ZERO_DIRECTION {
        return Ok(0.0);
    }
    let u: Vec<f64> = grad.iter().map(|x| x / n).collect();
    let p = geometry.prox_map(w, &u, eta / 2.0)?;
    Ok(n * geometry.primal_norm(&p)?.powi(2))
}

/// Witness for an oracle with a known population gradient.
pub fn oracle_witness<O: StochasticOracle + ?Sized>(oracle: &O, w: &[f64], eta: f64, geometry: &GeometrySpec) -> Result<f64, OptimizerError> {
    let grad = oracle.eval_g(w).ok_or(OptimizerError::NoGradient)?;
    Ok(stationarity_witness(&grad, w, eta, geometry)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirrorDescentStep {
    pub t: usize,
    pub w: Vec<f64>,
    pub v_norm: f64,
    pub grad_norm: f64,
    pub witness: f64,
    pub error_norm: f64,
    /// |P(w_t, U_t, eta)| in the primal norm.
    pub p_norm: f64,
    /// |w_{t+1} - w_t| in the primal norm.
    pub step_norm: f64,
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirrorDescentRun {
    pub config: EstimatorConfig,
    pub key: StreamKey,
    pub steps: Vec<MirrorDescentStep>,
    pub final_w: Vec<f64>,
    pub average_witness: f64,
    pub oracle_calls: u64,
}

/// T iterations of estimate, normalize, prox step from w_0. Step t uses v_t
/// at w_t; the witness is logged for t = 0..T-1.
pub fn mirror_descent_run<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geometry: &GeometrySpec,
    config: &EstimatorConfig,
    w0: &[f64],
    key: &StreamKey,
) -> Result<MirrorDescentRun, OptimizerError> {
    geometry.check_feasible(w0)?;
    let mut config = config.clone();
    config.norm = geometry.output_norm();
    let eta = config.step_size;
    let (mut state, mut rec) = estimator_init(&config, oracle, w0, key)?;
    let mut w = w0.to_vec();
    let mut steps = Vec::with_capacity(config.horizon);
    let mut witness_sum = 0.0;
    for t in 0..config.horizon {
        if t > 0 {
            rec = estimator_step(&mut state, &w, &config, oracle, key)?;
        }
        let grad = oracle.eval_g(&w).ok_or(OptimizerError::NoGradient)?;
        let u = normalized_update(&rec.v, geometry)?;
        let p = geometry.prox_map(&w, &u, eta)?;
        let next = geometry.prox_step(&w, &u, eta)?;
        let witness = stationarity_witness(&grad, &w, eta, geometry)?;
        witness_sum += witness;
        let diff: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
        steps.push(MirrorDescentStep {
            t,
            w: w.clone(),
            v_norm: geometry.dual_norm(&rec.v)?,
            grad_norm: geometry.dual_norm(&grad)?,
            witness,
            error_norm: rec.error_norm.unwrap_or(f64::NAN),
            p_norm: geometry.primal_norm(&p)?,
            step_norm: geometry.primal_norm(&diff)?,
            reset: rec.reset,
        });
        w = next;
    }
    Ok(MirrorDescentRun {
        average_witness: witness_sum / config.horizon as f64,
        oracle_calls: state.oracle_calls,
        config,
        key: *key,
        steps,
        final_w: w,
    })
}

/// f(w_{t+1}) - f(w_t) + eta <grad f(w_t), P_t> - (L eta^2 / 2) |P_t|^2 per
/// logged step; nonpositive for an L-smooth objective.
pub fn descent_residuals<O, F>(run: &MirrorDescentRun, oracle: &O, value: F, lipschitz: f64) -> Result<Vec<f64>, OptimizerError>
where
    O: StochasticOracle + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let eta = run.config.step_size;
    let mut out = Vec::with_capacity(run.steps.len());
    for (i, s) in run.steps.iter().enumerate() {
        let next = run.steps.get(i + 1).map_or(&run.final_w, |n| &n.w);
        let grad = oracle.eval_g(&s.w).ok_or(OptimizerError::NoGradient)?;
        let p: Vec<f64> = s.w.iter().zip(next).map(|(a, b)| (a - b) / eta).collect();
        let inner: f64 = grad.iter().zip(&p).map(|(a, b)| a * b).sum();
        out.push(value(next) - value(&s.w) + eta * inner - 0.5 * lipschitz * eta * eta * s.p_norm.powi(2));
    }
    Ok(out)
}

/// The coefficients C1..C6 of the stationarity bound for a (family, case).
/// Logarithms enter through kappa v log(2T/delta) and kappa v log(4T/delta).
pub fn stationarity_coefficients(family: Family, case: Case, c: &ProblemConstants, horizon: usize, delta: f64, kappa: f64) -> [f64; 6] {
    let t = horizon as f64;
    let log2 = (2.0 * t / delta).ln();
    let log4 = (4.0 * t / delta).ln();
    let k2 = kappa.max(log2);
    let k4 = kappa.max(log4);
    let (c1, c2) = (4.0 * c.delta_f, 2.0 * c.lipschitz);
    let s = c.sigma;
    let curvature = if family == Family::SecondOrder { c.gamma } else { c.ell };
    match (family, case) {
        (Family::ZerothOrder, Case::Recursive) => {
            [c1, c2, 16.0 * s * (2.0 * k2).sqrt(), 16.0 * s * (2.0 * k2).sqrt(), 8.0 * c.lipschitz, 0.0]
        }
        (Family::ZerothOrder, Case::Probabilistic) => [c1, c2, 0.0, 16.0 * s * (2.0 * k4).sqrt(), 8.0 * c.lipschitz * log4, 0.0],
        (Family::ZerothOrder, Case::Periodic) => [c1, c2, 0.0, 16.0 * s * (2.0 * k2).sqrt(), 8.0 * c.lipschitz, 0.0],
        (_, Case::Recursive) => {
            let c6 = if family == Family::SecondOrder { 4.0 * c.alpha } else { 0.0 };
            [c1, c2, 16.0 * s * (2.0 * k2).sqrt(), 32.0 * s * k2.sqrt(), 32.0 * curvature * k2.sqrt(), c6]
        }
        (_, Case::Probabilistic) => {
            let c6 = if family == Family::SecondOrder { 4.0 * c.alpha * log4 } else { 0.0 };
            [c1, c2, 0.0, 16.0 * s * (2.0 * k4).sqrt(), 32.0 * curvature * (log4 * k4).sqrt(), c6]
        }
        (_, Case::Periodic) => {
            let c6 = if family == Family::SecondOrder { 4.0 * c.alpha } else { 0.0 };
            [c1, c2, 0.0, 16.0 * s * (2.0 * k2).sqrt(), 32.0 * curvature * k2.sqrt(), c6]
        }
    }
}

/// A resolved configuration with the selection that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableConfig {
    pub config: EstimatorConfig,
    pub selection: ParamSelection,
    pub coefficients: [f64; 6],
}

/// Step size, momentum or reset rate, and batch size for a (family, case)
/// from the stationarity coefficients and the selection lemmas.
pub fn configure_from_table(
    family: Family,
    case: Case,
    constants: &ProblemConstants,
    horizon: usize,
    delta: f64,
    kappa: f64,
) -> Result<TableConfig, OptimizerError> {
    let coefficients = stationarity_coefficients(family, case, constants, horizon, delta, kappa);
    let selection = match case {
        Case::Recursive => select_params_case1(&coefficients, family, horizon)?,
        _ => select_params_case23(&coefficients, family, case, horizon)?,
    };
    let schedule = match case {
        Case::Recursive => Schedule::Never,
        Case::Probabilistic => Schedule::Probabilistic { p: selection.rate },
        Case::Periodic => Schedule::Periodic { period: selection.period },
    };
    let config = EstimatorConfig {
        family,
        beta: selection.beta().clamp(0.0, 1.0),
        schedule,
        batch_size: selection.batch_size,
        step_size: selection.eta,
        horizon,
        norm: Default::default(),
    };
    Ok(TableConfig { config, selection, coefficients })
}
