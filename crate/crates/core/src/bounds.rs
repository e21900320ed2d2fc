//! Closed-form high-probability error envelopes, parameter selection and
//! horizon computation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{EstimatorConfig, Family, Schedule};
use crate::oracle::ProblemConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("confidence level delta = {0} must lie in (0, 1]")]
    Delta(f64),
    #[error("kappa = {0} must be at least 1")]
    Kappa(f64),
    #[error("no envelope row for this configuration: {0}")]
    NoEnvelope(String),
    #[error("invalid coefficients: {0}")]
    Coefficients(String),
}

/// C(delta, kappa) = sqrt(kappa) + sqrt(3 ln(1/delta)).
pub fn confidence_factor(delta: f64, kappa: f64) -> Result<f64, BoundsError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(BoundsError::Delta(delta));
    }
    if !(kappa >= 1.0) {
        return Err(BoundsError::Kappa(kappa));
    }
    Ok(kappa.sqrt() + (3.0 * (1.0 / delta).ln()).sqrt())
}

/// Reset regime: none, random with probability p, or every E steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Recursive,
    Probabilistic,
    Periodic,
}

impl Case {
    pub fn index(&self) -> u8 {
        match self {
            Case::Recursive => 1,
            Case::Probabilistic => 2,
            Case::Periodic => 3,
        }
    }
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Case::Recursive),
            2 => Some(Case::Probabilistic),
            3 => Some(Case::Periodic),
            _ => None,
        }
    }
    pub fn of(schedule: &Schedule) -> Self {
        match schedule {
            Schedule::Never => Case::Recursive,
            Schedule::Probabilistic { .. } => Case::Probabilistic,
            Schedule::Periodic { .. } => Case::Periodic,
        }
    }
}

/// Conventional name of the estimator a (family, case) pair describes.
pub fn row_name(family: Family, case: Case) -> &'static str {
    match (family, case) {
        (Family::ZerothOrder, Case::Recursive) => "Momentum",
        (Family::ZerothOrder, Case::Probabilistic) => "Probabilistic Momentum",
        (Family::ZerothOrder, Case::Periodic) => "Periodic Momentum",
        (Family::FirstOrder, Case::Recursive) => "STORM",
        (Family::FirstOrder, Case::Probabilistic) => "PAGE",
        (Family::FirstOrder, Case::Periodic) => "SPIDER",
        (Family::SecondOrder, Case::Recursive) => "Second-Order Momentum",
        (Family::SecondOrder, Case::Probabilistic) => "Second-Order PAGE",
        (Family::SecondOrder, Case::Periodic) => "Second-Order SPIDER",
    }
}

/// Everything an envelope row depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub family: Family,
    pub case: Case,
    /// Momentum for the recursive case; ignored (and 1) otherwise.
    pub beta: f64,
    pub p: f64,
    pub period: usize,
    pub eta: f64,
    pub batch_size: usize,
    pub horizon: usize,
    pub delta: f64,
    pub kappa: f64,
}

impl EnvelopeParams {
    pub fn from_config(config: &EstimatorConfig, delta: f64, kappa: f64) -> Self {
        let (p, period) = match config.schedule {
            Schedule::Never => (0.0, 0),
            Schedule::Probabilistic { p } => (p, 0),
            Schedule::Periodic { period } => (0.0, period),
        };
        Self {
            family: config.family,
            case: Case::of(&config.schedule),
            beta: config.beta,
            p,
            period,
            eta: config.step_size,
            batch_size: config.batch_size,
            horizon: config.horizon,
            delta,
            kappa,
        }
    }
}

/// A per-iteration bound t -> envelope(t) on the estimation error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEnvelope {
    pub params: EnvelopeParams,
    pub constants: ProblemConstants,
    pub name: &'static str,
    /// Coefficient of the initialisation term (times beta^t in the recursive case).
    init: f64,
    /// The t-independent remainder.
    steady: f64,
}

/// The confidence argument of the periodic initialisation term,
/// delta / (2T/E). When E exceeds T there is still one epoch to cover, so the
/// argument is capped at delta / 2.
pub fn periodic_init_delta(delta: f64, horizon: usize, period: usize) -> f64 {
    (delta * period as f64 / (2.0 * horizon as f64)).min(delta / 2.0)
}

impl BoundEnvelope {
    pub fn new(params: EnvelopeParams, constants: &ProblemConstants) -> Result<Self, BoundsError> {
        let EnvelopeParams { family, case, beta, p, period, eta, batch_size, horizon, delta, kappa } = params;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(BoundsError::Delta(delta));
        }
        if horizon == 0 || batch_size == 0 || !(eta >= 0.0) {
            return Err(BoundsError::NoEnvelope("horizon, batch size and step size must be positive".into()));
        }
        let k = constants;
        let t = horizon as f64;
        let sqrt_b = (batch_size as f64).sqrt();
        let step = eta * k.g_update;
        let c2 = confidence_factor(delta / (2.0 * t), kappa)?;
        let c4 = confidence_factor(delta / (4.0 * t), kappa)?;
        let log4 = (4.0 * t / delta).ln();
        let (init, steady) = match case {
            Case::Recursive => {
                if !(0.0..1.0).contains(&beta) {
                    return Err(BoundsError::NoEnvelope(format!("the recursive rows need beta in [0, 1), got {beta}")));
                }
                let y = 1.0 - beta;
                let steady = match family {
                    Family::ZerothOrder => k.g_update * k.lipschitz * eta / y + c2 * k.sigma * y.sqrt(),
                    Family::FirstOrder => {
                        let s2 = 2.0 * y * y * k.sigma.powi(2) + 2.0 * beta * beta * (k.ell * step).powi(2);
                        c2 * (s2 / (1.0 - beta * beta)).sqrt()
                    }
                    Family::SecondOrder => {
                        let s2 = 2.0 * y * y * k.sigma.powi(2) + 2.0 * beta * beta * (k.gamma * step).powi(2);
                        k.alpha * beta * step * step / (2.0 * y) + c2 * (s2 / (1.0 - beta * beta)).sqrt()
                    }
                };
                (c2 * k.sigma / sqrt_b, steady)
            }
            Case::Probabilistic => {
                if beta != 1.0 {
                    return Err(BoundsError::NoEnvelope(format!("the probabilistic rows need beta = 1, got {beta}")));
                }
                if !(p > 0.0 && p <= 1.0) {
                    return Err(BoundsError::NoEnvelope(format!("reset probability p = {p} must lie in (0, 1]")));
                }
                let span = log4 / p;
                let steady = match family {
                    Family::ZerothOrder => k.g_update * k.lipschitz * eta * span,
                    Family::FirstOrder => c4 * k.ell * step * (2.0 * span).sqrt(),
                    Family::SecondOrder => k.alpha * step * step * span / 2.0 + c4 * k.gamma * step * (2.0 * span).sqrt(),
                };
                (c4 * k.sigma / sqrt_b, steady)
            }
            Case::Periodic => {
                if beta != 1.0 {
                    return Err(BoundsError::NoEnvelope(format!("the periodic rows need beta = 1, got {beta}")));
                }
                if period == 0 {
                    return Err(BoundsError::NoEnvelope("reset period must be positive".into()));
                }
                let e = period as f64;
                let ce = confidence_factor(periodic_init_delta(delta, horizon, period), kappa)?;
                let steady = match family {
                    Family::ZerothOrder => k.g_update * k.lipschitz * eta * e,
                    Family::FirstOrder => c2 * k.ell * step * (2.0 * e).sqrt(),
                    Family::SecondOrder => k.alpha * step * step * e / 2.0 + c2 * k.gamma * step * (2.0 * e).sqrt(),
                };
                (ce * k.sigma / sqrt_b, steady)
            }
        };
        Ok(Self { name: row_name(family, case), params, constants: *constants, init, steady })
    }

    pub fn for_config(config: &EstimatorConfig, constants: &ProblemConstants, delta: f64, kappa: f64) -> Result<Self, BoundsError> {
        Self::new(EnvelopeParams::from_config(config, delta, kappa), constants)
    }

    /// The envelope at iteration t.
    pub fn eval(&self, t: usize) -> f64 {
        let decay = match self.params.case {
            Case::Recursive => self.params.beta.powi(t.min(i32::MAX as usize) as i32),
            _ => 1.0,
        };
        decay * self.init + self.steady
    }

    /// The initialisation term at iteration t.
    pub fn init_term(&self, t: usize) -> f64 {
        self.eval(t) - self.steady
    }

    /// sup over t in [1, T]; the envelope is nonincreasing in t so this is t = 1.
    pub fn sup(&self) -> f64 {
        self.eval(1)
    }

    pub fn evaluate_range(&self, t_max: usize) -> Vec<f64> {
        (0..=t_max).map(|t| self.eval(t)).collect()
    }
}

/// The lemma objectives f_1, f_2, f_3 in (eta, y) where y is 1 - beta or p.
/// A zero coefficient kills its term even when the factor is infinite.
pub fn lemma_objective(family: Family, c: &[f64; 6], eta: f64, y: f64, horizon: f64) -> f64 {
    let term = |coef: f64, value: f64| if coef == 0.0 { 0.0 } else { coef * value };
    let base = term(c[0], 1.0 / (eta * horizon)) + term(c[1], eta) + term(c[2], 1.0 / (y * horizon)) + term(c[3], y.sqrt());
    match family {
        Family::ZerothOrder => base + term(c[4], eta / y),
        Family::FirstOrder => base + term(c[4], eta / y.sqrt()),
        Family::SecondOrder => base + term(c[4], eta / y.sqrt()) + term(c[5], eta * eta / y),
    }
}

/// Output of the parameter-selection lemmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSelection {
    pub family: Family,
    pub case: Case,
    pub eta: f64,
    /// 1 - beta for the recursive case, p = 1/E otherwise.
    pub rate: f64,
    /// B = E for the reset cases; 1 for the recursive case.
    pub batch_size: usize,
    pub period: usize,
    pub predicted_bound: f64,
    pub horizon_threshold: f64,
    pub admissible: bool,
}

impl ParamSelection {
    pub fn one_minus_beta(&self) -> Option<f64> {
        (self.case == Case::Recursive).then_some(self.rate)
    }
    pub fn beta(&self) -> f64 {
        match self.case {
            Case::Recursive => 1.0 - self.rate,
            _ => 1.0,
        }
    }
    pub fn p(&self) -> Option<f64> {
        (self.case != Case::Recursive).then_some(self.rate)
    }
    pub fn objective(&self, c: &[f64; 6], horizon: f64) -> f64 {
        lemma_objective(self.family, c, self.eta, self.rate, horizon)
    }
}

fn check_coefficients(c: &[f64; 6], family: Family, horizon: usize) -> Result<(), BoundsError> {
    if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(BoundsError::Coefficients(format!("coefficients must be finite and nonnegative, got {c:?}")));
    }
    // C6 = 0 (no curvature bias) is allowed for the second-order family: its
    // candidates become infinite or zero and drop out of the min and max.
    let _ = family;
    if let Some(i) = [0usize, 1, 3, 4].iter().find(|&&i| c[i] == 0.0) {
        return Err(BoundsError::Coefficients(format!("C{} must be positive for this family", i + 1)));
    }
    if horizon == 0 {
        return Err(BoundsError::Coefficients("horizon must be positive".into()));
    }
    Ok(())
}

/// Step size and momentum for the recursive case, with the lemma's bound.
pub fn select_params_case1(c: &[f64; 6], family: Family, horizon: usize) -> Result<ParamSelection, BoundsError> {
    check_coefficients(c, family, horizon)?;
    let [c1, c2, c3, c4, c5, c6] = *c;
    let t = horizon as f64;
    let eta_a = (c1 / c2).sqrt() * t.powf(-0.5);
    let y_a = (c3 / c4).powf(2.0 / 3.0) * t.powf(-2.0 / 3.0);
    let l1 = (c1 * c2 / t).sqrt();
    let l2 = (c3 * c4 * c4 / t).cbrt();
    let ratio = c1 * c5 / (c4 * c4);
    let (eta, y, bound, threshold) = match family {
        Family::ZerothOrder => {
            let eta_b = (c1.powi(3) / (c4 * c4 * c5)).powf(0.25) * t.powf(-0.75);
            let y_b = ratio.sqrt() * t.powf(-0.5);
            let l3 = (c1 * c4 * c4 * c5 / t).powf(0.25);
            (eta_a.min(eta_b), y_a.max(y_b), 2.0 * l1 + 2.0 * l2 + 3.0 * l3, (c3 / c4).max(ratio))
        }
        Family::FirstOrder | Family::SecondOrder => {
            let eta_c = (c1 * c1 / (c4 * c5)).cbrt() * t.powf(-2.0 / 3.0);
            let y_c = ratio.powf(2.0 / 3.0) * t.powf(-2.0 / 3.0);
            let l4 = (c1 * c4 * c5 / t).cbrt();
            let (mut eta, mut y) = (eta_a.min(eta_c), y_a.max(y_c));
            let mut bound = 2.0 * l1 + 2.0 * l2 + 3.0 * l4;
            let mut threshold = (c3 / c4).max(ratio);
            if family == Family::SecondOrder {
                let eta_d = (c1.powi(3) / (c4 * c4 * c6)).powf(0.2) * t.powf(-0.6);
                let y_d = (c1 * c1 * c6 / c4.powi(3)).powf(0.4) * t.powf(-0.8);
                let l5 = (c1 * c1 * c4 * c4 * c6 / (t * t)).powf(0.2);
                eta = eta.min(eta_d);
                y = y.max(y_d);
                bound += 3.0 * l5;
                threshold = threshold.max((c1 * c1 * c6 / c4.powi(3)).sqrt());
            }
            (eta, y, bound, threshold)
        }
    };
    Ok(ParamSelection {
        family,
        case: Case::Recursive,
        eta,
        rate: y,
        batch_size: 1,
        period: 0,
        predicted_bound: bound,
        horizon_threshold: threshold,
        admissible: t >= threshold && y <= 1.0,
    })
}

/// Step size, reset rate p = 1/E and batch B = E for the reset cases.
/// The lemma covers C3 = 0 only; a positive C3 is rejected.
pub fn select_params_case23(c: &[f64; 6], family: Family, case: Case, horizon: usize) -> Result<ParamSelection, BoundsError> {
    if case == Case::Recursive {
        return Err(BoundsError::Coefficients("use select_params_case1 for the recursive case".into()));
    }
    check_coefficients(c, family, horizon)?;
    let [c1, c2, c3, c4, c5, c6] = *c;
    if c3 != 0.0 {
        return Err(BoundsError::Coefficients("the reset-case selection requires C3 = 0".into()));
    }
    let t = horizon as f64;
    let eta_a = (c1 / (c2 * t)).sqrt();
    let m1 = (c1 * c2 / t).sqrt();
    let (eta, e_cont, bound, threshold) = match family {
        Family::ZerothOrder => {
            let eta_b = (2.0 * c1.powi(3) / (c4 * c4 * c5 * t.powi(3))).powf(0.25);
            let e_b = (c4 * c4 * t / (8.0 * c1 * c5)).sqrt();
            let m2 = (c1 * c4 * c4 * c5 / (2.0 * t)).powf(0.25);
            (eta_a.min(eta_b), e_b, 2.0 * m1 + 4.0 * m2, 8.0 * c1 * c5 / (c4 * c4))
        }
        Family::FirstOrder | Family::SecondOrder => {
            let s2 = std::f64::consts::SQRT_2;
            let eta_c = (c1 * c1 / (s2 * c4 * c5 * t * t)).cbrt();
            let e_c = (c4.powi(4) * t * t / (2.0 * c1 * c1 * c5 * c5)).cbrt();
            let m3 = (s2 * c1 * c4 * c5 / t).cbrt();
            let threshold = s2 * c1 * c5 / (c4 * c4);
            if family == Family::FirstOrder {
                (eta_a.min(eta_c), e_c, 2.0 * m1 + 3.0 * m3, threshold)
            } else {
                let eta_d = (c1.powi(3) / (4.0 * c4 * c4 * c6 * t.powi(3))).powf(0.2);
                let e_d = (c4.powi(6) * t.powi(4) / (16.0 * c1.powi(4) * c6 * c6)).powf(0.2);
                let m4 = (c1 * c1 * c4 * c4 * c6 / (8.0 * t * t)).powf(0.2);
                (
                    eta_a.min(eta_c).min(eta_d),
                    e_c.min(e_d),
                    2.0 * m1 + 3.0 * m3 + 5.0 * m4,
                    threshold.max(2.0 * (c1 * c1 * c6 / c4.powi(3)).sqrt()),
                )
            }
        }
    };
    let e = e_cont.ceil().max(1.0);
    let period = if e >= usize::MAX as f64 { usize::MAX } else { e as usize };
    Ok(ParamSelection {
        family,
        case,
        eta,
        rate: 1.0 / period as f64,
        batch_size: period,
        period,
        predicted_bound: bound,
        horizon_threshold: threshold,
        admissible: t >= threshold,
    })
}

/// Smallest integer T with T >= (e^{q^2}/eps) * ln^q(max(e, 1/(eps delta))).
pub fn min_horizon(epsilon: f64, delta: f64, q: f64) -> u64 {
    let arg = (1.0 / (epsilon * delta)).max(std::f64::consts::E);
    let t = (q * q).exp() / epsilon * arg.ln().powf(q);
    if t >= u64::MAX as f64 {
        u64::MAX
    } else {
        t.ceil() as u64
    }
}
