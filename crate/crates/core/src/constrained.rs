//! Switching gradient method for expectation-constrained problems, with the
//! unified estimator tracking the scalar constraint value h(w_t).

use serde::Serialize;
use thiserror::Error;

use crate::bounds::{select_params_case1, select_params_case23, BoundEnvelope, BoundsError, Case, ParamSelection};
use crate::estimator::{estimator_init, estimator_step, EstimatorConfig, EstimatorError, Family, Schedule};
use crate::geometry::{GeometryError, GeometrySpec, OutputNorm};
use crate::oracle::{ConstrainedLinear, OracleError, ProblemConstants, StochasticOracle};
use crate::rng::{Domain, StreamKey};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum ConstrainedError {
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// A convex objective and constraint with stochastic subgradients and a
/// scalar constraint oracle H(w, xi) for the estimator.
pub trait ConstrainedProblem: StochasticOracle {
    fn geometry(&self) -> &GeometrySpec;
    fn f(&self, w: &[f64]) -> f64;
    fn h(&self, w: &[f64]) -> f64;
    fn subgrad_f(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn subgrad_h(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn w_star(&self) -> &[f64];
}

impl ConstrainedProblem for ConstrainedLinear {
    fn geometry(&self) -> &GeometrySpec {
        ConstrainedLinear::geometry(self)
    }
    fn f(&self, w: &[f64]) -> f64 {
        ConstrainedLinear::f(self, w)
    }
    fn h(&self, w: &[f64]) -> f64 {
        ConstrainedLinear::h(self, w)
    }
    fn subgrad_f(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        ConstrainedLinear::subgrad_f(self, rng)
    }
    fn subgrad_h(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        ConstrainedLinear::subgrad_h(self, rng)
    }
    fn w_star(&self) -> &[f64] {
        ConstrainedLinear::w_star(self)
    }
}

/// Constants entering the threshold and the parameter choices.
///
/// `lipschitz`, `ell`, `gamma`, `alpha` describe H as a function of w; `g`
/// bounds the dual norm of both subgradients and hence ||w_t - w_{t-1}|| / eta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgmConstants {
    pub r: f64,
    pub d: f64,
    pub g: f64,
    pub sigma: f64,
    pub lipschitz: f64,
    pub ell: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl SgmConstants {
    /// Every constant set to one.
    pub fn unit() -> Self {
        Self { r: 1.0, d: 1.0, g: 1.0, sigma: 1.0, lipschitz: 1.0, ell: 1.0, gamma: 1.0, alpha: 1.0 }
    }

    /// The estimator's view: the iterate moves by at most eta G per step.
    pub fn estimator_constants(&self) -> ProblemConstants {
        ProblemConstants {
            sigma: self.sigma,
            lipschitz: self.lipschitz,
            ell: self.ell,
            gamma: self.gamma,
            alpha: self.alpha,
            g_update: self.g,
            delta_f: 0.0,
        }
    }
}

/// Problem plus the geometric bounds D, R and subgradient bound G.
#[derive(Debug, Clone)]
pub struct ConstrainedSetup<P> {
    pub problem: P,
    pub diameter: f64,
    pub radius: f64,
    pub g_bound: f64,
}

impl<P: ConstrainedProblem> ConstrainedSetup<P> {
    /// D and R come from the feasible set in closed form; G from the oracle.
    pub fn new(problem: P) -> Result<Self, ConstrainedError> {
        let geometry = problem.geometry();
        let diameter = geometry.diameter().ok_or_else(|| ConstrainedError::Setup("feasible set must be bounded".into()))?;
        let radius = geometry.bregman_radius().ok_or_else(|| ConstrainedError::Setup("feasible set must be bounded".into()))?;
        let g_bound = problem.constants().g_update;
        if problem.h(problem.w_star()) > 1e-9 {
            return Err(ConstrainedError::Setup("the reference optimum violates the constraint".into()));
        }
        Ok(Self { problem, diameter, radius, g_bound })
    }

    pub fn constants(&self) -> SgmConstants {
        let k = self.problem.constants();
        SgmConstants {
            r: self.radius,
            d: self.diameter,
            g: self.g_bound,
            sigma: k.sigma,
            lipschitz: k.lipschitz,
            ell: k.ell,
            gamma: k.gamma,
            alpha: k.alpha,
        }
    }
}

/// R^2/(2 eta T) + eta G^2/2 + 2 D G sqrt(2 ln(4/delta) / T).
pub fn opt_error(r: f64, eta: f64, horizon: usize, g: f64, d: f64, delta: f64) -> f64 {
    let t = horizon as f64;
    r * r / (2.0 * eta * t) + eta * g * g / 2.0 + 2.0 * d * g / t.sqrt() * (2.0 * (4.0 / delta).ln()).sqrt()
}

/// Switching threshold: the optimization error plus the estimator envelope.
pub fn sgm_threshold(r: f64, eta: f64, horizon: usize, g: f64, d: f64, delta: f64, envelope: f64) -> f64 {
    opt_error(r, eta, horizon, g, d, delta) + envelope
}

/// Steps before the selection window opens: floor(T/2) without resets, else 0.
pub fn analysis_window(case: Case, horizon: usize) -> usize {
    match case {
        Case::Recursive => horizon / 2,
        _ => 0,
    }
}

/// Uniform envelope over the window (t0, T] at confidence delta/2.
///
/// The scalar constraint value is sub-Gaussian with kappa = 1. The envelope
/// is nonincreasing in t, so the supremum sits at t0 + 1.
pub fn sgm_envelope(config: &EstimatorConfig, k: &SgmConstants, delta: f64, window_start: usize) -> Result<f64, ConstrainedError> {
    let env = BoundEnvelope::for_config(config, &k.estimator_constants(), delta / 2.0, 1.0)?;
    Ok(env.eval(window_start + 1))
}

/// Coefficients C1..C6 of the step-size lemma for the constrained method.
pub fn sgm_coefficients(family: Family, case: Case, k: &SgmConstants, horizon: usize, delta: f64) -> [f64; 6] {
    let t = horizon as f64;
    let (r, g, s) = (k.r, k.g, k.sigma);
    let curvature = if family == Family::SecondOrder { k.gamma } else { k.ell };
    let second = family == Family::SecondOrder;
    match case {
        Case::Recursive => {
            let gam = 2.0 * (4.0 * t / delta).ln();
            let c3 = 4.0 * gam.sqrt() * s;
            match family {
                Family::ZerothOrder => [r * r, g * g / 2.0, c3, c3, 2.0 * k.lipschitz * g, 0.0],
                _ => {
                    let c6 = if second { k.alpha * g * g } else { 0.0 };
                    let root = (2.0 * gam).sqrt();
                    [r * r, g * g / 2.0, c3, 4.0 * root * s, 4.0 * curvature * g * root, c6]
                }
            }
        }
        Case::Probabilistic | Case::Periodic => {
            let lam = (8.0 * t / delta).ln();
            let c4 = 4.0 * s * (2.0 * lam).sqrt();
            // Random resets pay a log factor on the bias side that the
            // deterministic period only pays through the batch size.
            let stretch = if case == Case::Probabilistic { lam } else { 1.0 };
            let c5 = match family {
                Family::ZerothOrder => 2.0 * g * k.lipschitz * stretch,
                _ => 8.0 * curvature * g * if case == Case::Probabilistic { lam } else { lam.sqrt() },
            };
            let c6 = if second { k.alpha * g * g * stretch } else { 0.0 };
            [r * r / 2.0, g * g / 2.0, 0.0, c4, c5, c6]
        }
    }
}

/// Resolved parameters for one (case, family) of the constrained method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgmPlan {
    pub case: Case,
    pub family: Family,
    pub config: EstimatorConfig,
    pub selection: ParamSelection,
    pub coefficients: [f64; 6],
    pub eta: f64,
    /// Uniform estimator envelope E at delta/2.
    pub envelope: f64,
    pub threshold: f64,
    /// Predicted bound Q_T on both f(w_bar) - f* and h(w_bar).
    pub predicted_bound: f64,
    pub window_start: usize,
    pub admissible: bool,
}

/// Step size, momentum or reset parameters, envelope and predicted bound.
pub fn sgm_configure(case: Case, family: Family, k: &SgmConstants, horizon: usize, delta: f64) -> Result<SgmPlan, ConstrainedError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::Delta(delta).into());
    }
    if horizon < 2 {
        return Err(ConstrainedError::Setup("the horizon must be at least 2".into()));
    }
    let coefficients = sgm_coefficients(family, case, k, horizon, delta);
    let t = horizon as f64;
    let (selection, schedule, dg_term) = match case {
        Case::Recursive => {
            let sel = select_params_case1(&coefficients, family, horizon)?;
            // the window halves the effective horizon
            (sel, Schedule::Never, 4.0 * k.d * k.g * ((4.0 / delta).ln() / t).sqrt())
        }
        _ => {
            let sel = select_params_case23(&coefficients, family, case, horizon)?;
            let schedule = match case {
                Case::Probabilistic => Schedule::Probabilistic { p: sel.rate },
                _ => Schedule::Periodic { period: sel.period },
            };
            (sel, schedule, 2.0 * k.d * k.g * (2.0 * (4.0 / delta).ln() / t).sqrt())
        }
    };
    let config = EstimatorConfig {
        family,
        beta: selection.beta().clamp(0.0, 1.0),
        schedule,
        batch_size: selection.batch_size,
        step_size: selection.eta,
        horizon,
        norm: OutputNorm::Euclidean,
    };
    let window_start = analysis_window(case, horizon);
    let envelope = sgm_envelope(&config, k, delta, window_start)?;
    let threshold = sgm_threshold(k.r, selection.eta, horizon - window_start, k.g, k.d, delta, envelope);
    Ok(SgmPlan {
        case,
        family,
        eta: selection.eta,
        predicted_bound: selection.predicted_bound + dg_term,
        admissible: selection.admissible,
        config,
        selection,
        coefficients,
        envelope,
        threshold,
        window_start,
    })
}

/// Per-iteration trace of the switching decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgmStep {
    pub t: usize,
    pub v: f64,
    pub h_true: f64,
    /// True when the step used the objective subgradient.
    pub objective_step: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgmResult {
    pub threshold: f64,
    pub envelope: f64,
    /// Selected iterations, 1-based.
    pub selected: Vec<usize>,
    pub w_bar: Option<Vec<f64>>,
    pub f_gap: Option<f64>,
    pub h_value: Option<f64>,
    /// Estimator samples after initialisation.
    pub oracle_calls: u64,
    pub steps: Vec<SgmStep>,
}

impl SgmResult {
    /// A nonempty selected set.
    pub fn success(&self) -> bool {
        !self.selected.is_empty()
    }

    /// Both guarantees hold: f-gap <= eps and h <= eps + E.
    pub fn within_guarantee(&self) -> bool {
        match (self.f_gap, self.h_value) {
            (Some(f), Some(h)) => f <= self.threshold && h <= self.threshold + self.envelope,
            _ => false,
        }
    }
}

/// Runs the method with the threshold implied by `config` and delta.
pub fn sgm_run<P: ConstrainedProblem>(
    setup: &ConstrainedSetup<P>,
    config: &EstimatorConfig,
    eta: f64,
    delta: f64,
    key: &StreamKey,
) -> Result<SgmResult, ConstrainedError> {
    let k = setup.constants();
    let case = Case::of(&config.schedule);
    let window_start = analysis_window(case, config.horizon);
    let envelope = sgm_envelope(config, &k, delta, window_start)?;
    let threshold = sgm_threshold(k.r, eta, config.horizon - window_start, k.g, k.d, delta, envelope);
    sgm_run_with_threshold(setup, config, eta, threshold, envelope, window_start, key)
}

/// The method with an explicit threshold and selection window.
pub fn sgm_run_with_threshold<P: ConstrainedProblem>(
    setup: &ConstrainedSetup<P>,
    config: &EstimatorConfig,
    eta: f64,
    threshold: f64,
    envelope: f64,
    window_start: usize,
    key: &StreamKey,
) -> Result<SgmResult, ConstrainedError> {
    let problem = &setup.problem;
    let geometry = problem.geometry();
    if problem.output_dim() != 1 {
        return Err(ConstrainedError::Setup("the constraint oracle must be scalar".into()));
    }
    let horizon = config.horizon;
    let mut w = geometry.center();
    let (mut state, _) = estimator_init(config, problem, &w, key)?;
    let init_calls = state.oracle_calls;
    let mut steps = Vec::with_capacity(horizon);
    let mut selected = Vec::new();
    let mut sum = vec![0.0; w.len()];
    for t in 1..=horizon {
        let record = estimator_step(&mut state, &w, config, problem, key)?;
        let v = record.v[0];
        let objective_step = v <= threshold;
        if objective_step && t > window_start {
            selected.push(t);
            sum.iter_mut().zip(&w).for_each(|(s, x)| *s += x);
        }
        steps.push(SgmStep { t, v, h_true: problem.h(&w), objective_step });
        let mut rng = key.rng(Domain::Zeta, t as u64, 0);
        let u = if objective_step { problem.subgrad_f(&mut rng) } else { problem.subgrad_h(&mut rng) };
        w = geometry.prox_step(&w, &u, eta)?;
    }
    let w_bar = (!selected.is_empty()).then(|| {
        let n = selected.len() as f64;
        sum.iter().map(|s| s / n).collect::<Vec<f64>>()
    });
    let f_star = problem.f(problem.w_star());
    Ok(SgmResult {
        threshold,
        envelope,
        f_gap: w_bar.as_ref().map(|x| problem.f(x) - f_star),
        h_value: w_bar.as_ref().map(|x| problem.h(x)),
        w_bar,
        selected,
        oracle_calls: state.oracle_calls - init_calls,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy(noise: f64, b: f64) -> ConstrainedSetup<ConstrainedLinear> {
        let g = GeometrySpec::cube(4, -1.0, 1.0).unwrap();
        let p = ConstrainedLinear::new(vec![1.0, -0.5, 0.3, 0.2], vec![1.0, 1.0, 0.0, -0.5], b, noise, 0.05, g).unwrap();
        ConstrainedSetup::new(p).unwrap()
    }

    #[test]
    fn threshold_example() {
        let eps = sgm_threshold(1.0, 0.1, 100, 1.0, 1.0, 0.2, 0.0);
        let expect = 0.05 + 0.05 + 0.2 * (2.0 * 20f64.ln()).sqrt();
        assert_relative_eq!(eps, expect, epsilon = 1e-14);
        assert!((eps - 0.5896).abs() < 1e-3);
        let e = 0.37;
        assert_relative_eq!(sgm_threshold(1.0, 0.1, 100, 1.0, 1.0, 0.2, e) - eps, e, epsilon = 1e-14);
        let big = 1usize << 40;
        let eta = (big as f64).powf(-0.5);
        assert!(sgm_threshold(1.0, eta, big, 1.0, 1.0, 0.2, e) - e < 1e-5);
    }

    #[test]
    fn case2_family2_closed_form() {
        let k = SgmConstants::unit();
        let (t, delta) = (10_000usize, 0.1);
        let plan = sgm_configure(Case::Probabilistic, Family::FirstOrder, &k, t, delta).unwrap();
        let tf = t as f64;
        let lam = (8.0 * tf / delta).ln();
        let eta = (1.0 / tf.sqrt()).min((1.0 / (256.0 * lam.powf(1.5) * tf * tf)).cbrt());
        let b = (32.0 * tf * tf).cbrt().ceil() as usize;
        let q = (1.0 + 2.0 * 2f64.sqrt() * (4.0 / delta).ln().sqrt()) / tf.sqrt() + 3.0 * (32.0 * lam.powf(1.5) / tf).cbrt();
        assert_relative_eq!(plan.eta, eta, max_relative = 1e-12);
        assert_eq!(plan.config.batch_size, b);
        assert_eq!(b, 1474);
        assert_eq!(plan.config.schedule, Schedule::Probabilistic { p: 1.0 / b as f64 });
        assert_relative_eq!(plan.predicted_bound, q, max_relative = 1e-12);
    }

    #[test]
    fn case2_family1_and_case3_closed_forms() {
        let k = SgmConstants { r: 1.3, d: 1.8, g: 2.0, sigma: 0.7, lipschitz: 1.1, ell: 0.9, gamma: 0.9, alpha: 0.5 };
        let (t, delta) = (4096usize, 0.05);
        let tf = t as f64;
        let lam = (8.0 * tf / delta).ln();
        let (r, g, s, l, ell, d) = (k.r, k.g, k.sigma, k.lipschitz, k.ell, k.d);
        let dg = (r * g + 2.0 * 2f64.sqrt() * d * g * (4.0 / delta).ln().sqrt()) / tf.sqrt();

        let p = sgm_configure(Case::Probabilistic, Family::ZerothOrder, &k, t, delta).unwrap();
        let eta = (r / (g * tf.sqrt())).min((r.powi(6) / (256.0 * g * l * s * s * lam * lam * tf.powi(3))).powf(0.25));
        assert_relative_eq!(p.eta, eta, max_relative = 1e-12);
        assert_eq!(p.config.batch_size, (4.0 * s * s * tf / (r * r * g * l)).sqrt().ceil() as usize);
        let q = dg + 4.0 * (16.0 * r * r * g * l * s * s * lam * lam / tf).powf(0.25);
        assert_relative_eq!(p.predicted_bound, q, max_relative = 1e-12);

        let p = sgm_configure(Case::Periodic, Family::ZerothOrder, &k, t, delta).unwrap();
        assert_eq!(p.selection.period, (4.0 * s * s * lam * tf / (r * r * g * l)).sqrt().ceil() as usize);
        let q = dg + 4.0 * (16.0 * r * r * g * l * s * s * lam / tf).powf(0.25);
        assert_relative_eq!(p.predicted_bound, q, max_relative = 1e-12);

        let p = sgm_configure(Case::Periodic, Family::FirstOrder, &k, t, delta).unwrap();
        let eta = (r / (g * tf.sqrt())).min((r.powi(4) / (256.0 * s * ell * g * lam * tf * tf)).cbrt());
        assert_relative_eq!(p.eta, eta, max_relative = 1e-12);
        let e = (32.0 * s.powi(4) * lam * tf * tf / (r.powi(4) * ell * ell * g * g)).cbrt().ceil() as usize;
        assert_eq!(p.selection.period, e);
        let q = dg + 3.0 * (32.0 * r * r * s * ell * g * lam / tf).cbrt();
        assert_relative_eq!(p.predicted_bound, q, max_relative = 1e-12);

        let p = sgm_configure(Case::Periodic, Family::SecondOrder, &k, t, delta).unwrap();
        let eta3 = eta.min((r.powi(6) / (1024.0 * k.alpha * g * g * s * s * lam * tf.powi(3))).powf(0.2));
        assert_relative_eq!(p.eta, eta3, max_relative = 1e-12);
        let e3 = (32.0 * s.powi(4) * lam * tf * tf / (r.powi(4) * ell * ell * g * g))
            .cbrt()
            .min((32768.0 * s.powi(6) * lam.powi(3) * tf.powi(4) / (k.alpha * k.alpha * r.powi(8) * g.powi(4))).powf(0.2));
        assert_eq!(p.selection.period, e3.ceil() as usize);
    }

    #[test]
    fn case1_closed_forms() {
        let k = SgmConstants { r: 1.3, d: 1.8, g: 2.0, sigma: 0.7, lipschitz: 1.1, ell: 0.9, gamma: 0.9, alpha: 0.5 };
        let (t, delta) = (4096usize, 0.05);
        let tf = t as f64;
        let gam = 2.0 * (4.0 * tf / delta).ln();
        let (r, g, s, l, ell, d) = (k.r, k.g, k.sigma, k.lipschitz, k.ell, k.d);
        let dg = 4.0 * d * g * ((4.0 / delta).ln() / tf).sqrt();

        let p = sgm_configure(Case::Recursive, Family::ZerothOrder, &k, t, delta).unwrap();
        let eta = (2f64.sqrt() * r / g / tf.sqrt()).min((r.powi(6) / (32.0 * s * s * l * g * gam)).powf(0.25) * tf.powf(-0.75));
        let y = tf.powf(-2.0 / 3.0).max((r * r * l * g / (8.0 * s * s * gam)).sqrt() / tf.sqrt());
        assert_relative_eq!(p.eta, eta, max_relative = 1e-12);
        assert_relative_eq!(1.0 - p.config.beta, y, max_relative = 1e-9);
        let q = 2f64.sqrt() * r * g / tf.sqrt()
            + 8.0 * s * (gam.powf(1.5) / tf).cbrt()
            + 3.0 * (32.0 * r * r * l * g * s * s).powf(0.25) * (gam / tf).powf(0.25)
            + dg;
        assert_relative_eq!(p.predicted_bound, q, max_relative = 1e-12);
        assert_eq!(p.window_start, t / 2);
        assert_eq!(p.config.batch_size, 1);

        let p = sgm_configure(Case::Recursive, Family::FirstOrder, &k, t, delta).unwrap();
        let eta = (2f64.sqrt() * r / g / tf.sqrt()).min((r.powi(4) / (32.0 * ell * g * s * gam)).cbrt() * tf.powf(-2.0 / 3.0));
        let y = (2f64.powf(-1.0 / 3.0) * tf.powf(-2.0 / 3.0))
            .max((r.powi(4) * ell * ell * g * g / s.powi(4) / (32.0 * gam)).cbrt() * tf.powf(-2.0 / 3.0));
        assert_relative_eq!(p.eta, eta, max_relative = 1e-12);
        assert_relative_eq!(1.0 - p.config.beta, y, max_relative = 1e-9);
        let q = 2f64.sqrt() * r * g / tf.sqrt()
            + 8.0 * s * (2.0 * gam.powf(1.5) / tf).cbrt()
            + 3.0 * (32.0 * r * r * ell * g * s).cbrt() * (gam / tf).cbrt()
            + dg;
        assert_relative_eq!(p.predicted_bound, q, max_relative = 1e-12);
    }

    #[test]
    fn predicted_bound_decreases_in_horizon() {
        let k = SgmConstants::unit();
        for case in [Case::Recursive, Case::Probabilistic, Case::Periodic] {
            for family in [Family::ZerothOrder, Family::FirstOrder, Family::SecondOrder] {
                let qs: Vec<f64> = (10..=16)
                    .map(|e| sgm_configure(case, family, &k, 1 << e, 0.1).unwrap().predicted_bound)
                    .collect();
                assert!(qs.windows(2).all(|w| w[1] <= w[0]), "{case:?} {family:?} {qs:?}");
            }
        }
    }

    #[test]
    fn loose_constraint_selects_every_step() {
        // h <= -10 on the box and no noise: the switch never fires
        let s = toy(0.0, -10.0);
        let cfg = EstimatorConfig {
            family: Family::FirstOrder,
            beta: 1.0,
            schedule: Schedule::Periodic { period: 8 },
            batch_size: 8,
            step_size: 0.05,
            horizon: 64,
            norm: OutputNorm::Euclidean,
        };
        let r = sgm_run(&s, &cfg, 0.05, 0.1, &StreamKey::new(3, 0)).unwrap();
        assert_eq!(r.selected, (1..=64).collect::<Vec<_>>());
        assert!(r.steps.iter().all(|st| st.objective_step));
        let mean: Vec<f64> = {
            let mut acc = vec![0.0; 4];
            let mut w = s.problem.geometry().center();
            for t in 1..=64u64 {
                acc.iter_mut().zip(&w).for_each(|(a, x)| *a += x / 64.0);
                let mut rng = StreamKey::new(3, 0).rng(Domain::Zeta, t, 0);
                w = s.problem.geometry().prox_step(&w, &s.problem.subgrad_f(&mut rng), 0.05).unwrap();
            }
            acc
        };
        for (a, b) in r.w_bar.as_ref().unwrap().iter().zip(&mean) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn impossible_threshold_flags_failure() {
        let s = toy(0.1, -0.2);
        let cfg = EstimatorConfig {
            family: Family::ZerothOrder,
            beta: 1.0,
            schedule: Schedule::Periodic { period: 4 },
            batch_size: 4,
            step_size: 0.05,
            horizon: 32,
            norm: OutputNorm::Euclidean,
        };
        let r = sgm_run_with_threshold(&s, &cfg, 0.05, -1e9, 0.0, 0, &StreamKey::new(1, 0)).unwrap();
        assert!(!r.success());
        assert!(r.w_bar.is_none() && r.f_gap.is_none());
        assert!(!r.within_guarantee());
    }

    #[test]
    fn switching_replays_and_counts_oracles() {
        let s = toy(0.2, -0.3);
        let plan = sgm_configure(Case::Periodic, Family::FirstOrder, &s.constants(), 300, 0.1).unwrap();
        let key = StreamKey::new(11, 2);
        let a = sgm_run(&s, &plan.config, plan.eta, 0.1, &key).unwrap();
        let b = sgm_run(&s, &plan.config, plan.eta, 0.1, &key).unwrap();
        assert_eq!(a, b);
        for st in &a.steps {
            assert_eq!(st.objective_step, st.v <= a.threshold);
        }
        let e = plan.selection.period as u64;
        assert_eq!(a.oracle_calls, 300 + (e - 1) * (300 / e));
    }
}
