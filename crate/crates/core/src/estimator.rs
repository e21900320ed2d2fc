//! The unified recursive estimator.
//!
//! On a reset step v_t is a fresh batch average at w_t. Otherwise
//! v_t = G(w_t, xi_t) + beta (v_{t-1} - G(w_{t-1}, xi_t)) + T_t, with all
//! oracle calls sharing xi_t and T_t chosen by the correction family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::OutputNorm;
use crate::oracle::{draw_batch, draw_sample, normals, OracleError, OracleSample, ProblemConstants, StochasticOracle};
use crate::rng::{Domain, StreamKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid estimator config: {0}")]
    Config(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ZerothOrder,
    FirstOrder,
    SecondOrder,
}

impl Family {
    pub fn index(&self) -> u8 {
        match self {
            Family::ZerothOrder => 1,
            Family::FirstOrder => 2,
            Family::SecondOrder => 3,
        }
    }
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Family::ZerothOrder),
            2 => Some(Family::FirstOrder),
            3 => Some(Family::SecondOrder),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Never,
    Probabilistic { p: f64 },
    Periodic { period: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub family: Family,
    pub beta: f64,
    pub schedule: Schedule,
    pub batch_size: usize,
    pub step_size: f64,
    pub horizon: usize,
    #[serde(default)]
    pub norm: OutputNorm,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(EstimatorError::Config(format!("beta = {} must lie in [0, 1]", self.beta)));
        }
        if self.batch_size == 0 {
            return Err(EstimatorError::Config("batch size must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(EstimatorError::Config(format!("step size = {} must be positive", self.step_size)));
        }
        if self.horizon == 0 {
            return Err(EstimatorError::Config("horizon must be positive".into()));
        }
        match self.schedule {
            Schedule::Probabilistic { p } if !(p > 0.0 && p <= 1.0) => {
                Err(EstimatorError::Config(format!("reset probability p = {p} must lie in (0, 1]")))
            }
            Schedule::Periodic { period: 0 } => Err(EstimatorError::Config("reset period must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Live state of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub v: Vec<f64>,
    pub prev_w: Vec<f64>,
    pub t: usize,
    /// Realised reset times; tau[0] = 0.
    pub tau: Vec<usize>,
    pub prev_error: Option<Vec<f64>>,
    /// ln A_t with A_t the product of 1/beta_i over i <= t.
    pub log_a: f64,
    /// A_t^{-2} times the running budget over the current epoch.
    pub scaled_budget: f64,
    pub oracle_calls: u64,
}

impl EstimatorState {
    /// Epoch index m(t): the number of resets strictly before t, so that
    /// t lies in (tau_{m-1}, tau_m].
    pub fn epoch(&self) -> usize {
        self.tau.iter().filter(|&&s| s < self.t).count()
    }
    pub fn last_reset(&self) -> usize {
        *self.tau.last().expect("tau is never empty")
    }
}

/// Diagnostics of one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub reset: bool,
    pub v: Vec<f64>,
    pub error: Option<Vec<f64>>,
    pub error_norm: Option<f64>,
    /// I_t from its definition; `None` on reset steps where it is undefined.
    pub innovation: Option<Vec<f64>>,
    /// Per-step bias bound B_t and variance proxy Sigma_t^2 (zero on resets).
    pub bias_bound: f64,
    pub variance_proxy: f64,
    pub beta: f64,
    pub log_a: f64,
    pub scaled_budget: f64,
    pub epoch: usize,
    pub oracle_calls: u64,
}

impl StepRecord {
    /// A_t.
    pub fn a(&self) -> f64 {
        self.log_a.exp()
    }
    /// The running budget V_t^2 = A_t^2 * scaled budget (may overflow to inf).
    pub fn budget(&self) -> f64 {
        (2.0 * self.log_a).exp() * self.scaled_budget
    }
}

/// Lambda_{t,j} = A_t^{-1} A_j computed in the log domain.
pub fn lambda_multiplier(records: &[StepRecord], t: usize, j: usize) -> f64 {
    (records[j].log_a - records[t].log_a).exp()
}

/// Per-step (B_t, Sigma_t^2) for a recursive step with displacement
/// bounded by eta G.
pub fn bias_variance(family: Family, beta: f64, eta: f64, c: &ProblemConstants) -> (f64, f64) {
    let step = eta * c.g_update;
    let direct = (1.0 - beta).powi(2) * c.sigma.powi(2);
    match family {
        Family::ZerothOrder => (beta * step * c.lipschitz, direct),
        Family::FirstOrder => (0.0, 2.0 * direct + 2.0 * beta * beta * c.ell.powi(2) * step * step),
        Family::SecondOrder => (0.5 * c.alpha * beta * step * step, 2.0 * direct + 2.0 * beta * beta * c.gamma.powi(2) * step * step),
    }
}

/// T_t for the family. `g_t`, `g_prev` are G(w_t, xi), G(w_prev, xi).
pub fn correction_term<O: StochasticOracle + ?Sized>(
    family: Family,
    oracle: &O,
    sample: &OracleSample,
    w_t: &[f64],
    w_prev: &[f64],
    beta: f64,
) -> Result<Vec<f64>, EstimatorError> {
    let n = oracle.output_dim();
    match family {
        Family::FirstOrder => Ok(vec![0.0; n]),
        Family::ZerothOrder => {
            let g_t = oracle.eval_G(w_t, sample)?;
            let g_prev = oracle.eval_G(w_prev, sample)?;
            Ok(g_prev.iter().zip(&g_t).map(|(p, c)| beta * (p - c)).collect())
        }
        Family::SecondOrder => {
            let g_t = oracle.eval_G(w_t, sample)?;
            let g_prev = oracle.eval_G(w_prev, sample)?;
            let d: Vec<f64> = w_prev.iter().zip(w_t).map(|(a, b)| a - b).collect();
            let jvp = oracle.eval_jvp(w_t, sample, &d)?;
            Ok((0..n).map(|i| beta * (g_prev[i] - (g_t[i] + jvp[i]))).collect())
        }
    }
}

fn batch_mean<O: StochasticOracle + ?Sized>(oracle: &O, w: &[f64], samples: &[OracleSample]) -> Result<Vec<f64>, EstimatorError> {
    let mut acc = vec![0.0; oracle.output_dim()];
    for s in samples {
        for (a, v) in acc.iter_mut().zip(oracle.eval_G(w, s)?) {
            *a += v;
        }
    }
    let b = samples.len() as f64;
    acc.iter_mut().for_each(|a| *a /= b);
    Ok(acc)
}

fn is_reset(config: &EstimatorConfig, key: &StreamKey, t: usize) -> bool {
    match config.schedule {
        Schedule::Never => false,
        Schedule::Probabilistic { p } => key.uniform(Domain::Reset, t as u64, 0) < p,
        Schedule::Periodic { period } => t.is_multiple_of(period),
    }
}

/// v_0 = batch average of B samples at w_0.
pub fn estimator_init<O: StochasticOracle + ?Sized>(
    config: &EstimatorConfig,
    oracle: &O,
    w0: &[f64],
    key: &StreamKey,
) -> Result<(EstimatorState, StepRecord), EstimatorError> {
    config.validate()?;
    let samples = draw_batch(oracle, key, Domain::Init, 0, config.batch_size);
    let v = batch_mean(oracle, w0, &samples)?;
    let error = oracle.eval_g(w0).map(|g| v.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<f64>>());
    let state = EstimatorState {
        v: v.clone(),
        prev_w: w0.to_vec(),
        t: 0,
        tau: vec![0],
        prev_error: error.clone(),
        log_a: 0.0,
        scaled_budget: 0.0,
        oracle_calls: config.batch_size as u64,
    };
    let record = StepRecord {
        t: 0,
        reset: true,
        error_norm: error.as_ref().map(|e| config.norm.norm(e)),
        v,
        error,
        innovation: None,
        bias_bound: 0.0,
        variance_proxy: 0.0,
        beta: config.beta,
        log_a: 0.0,
        scaled_budget: 0.0,
        epoch: 0,
        oracle_calls: state.oracle_calls,
    };
    Ok((state, record))
}

/// One step of the recursion at the new iterate `w_t`.
pub fn estimator_step<O: StochasticOracle + ?Sized>(
    state: &mut EstimatorState,
    w_t: &[f64],
    config: &EstimatorConfig,
    oracle: &O,
    key: &StreamKey,
) -> Result<StepRecord, EstimatorError> {
    let t = state.t + 1;
    let beta = config.beta;
    let reset = is_reset(config, key, t);
    // A_t runs over the whole horizon; the budget restarts after each reset.
    let log_a = state.log_a - beta.ln();
    let epoch_start = state.last_reset() == state.t;
    let g_t = oracle.eval_g(w_t);

    let (v, innovation, bias_bound, variance_proxy, scaled_budget);
    if reset {
        let samples = draw_batch(oracle, key, Domain::Batch, t as u64, config.batch_size);
        v = batch_mean(oracle, w_t, &samples)?;
        state.oracle_calls += config.batch_size as u64;
        innovation = None;
        bias_bound = 0.0;
        variance_proxy = 0.0;
        scaled_budget = 0.0;
    } else {
        let sample = draw_sample(oracle, key, Domain::Sample, t as u64, 0);
        let big_t = oracle.eval_G(w_t, &sample)?;
        let big_prev = oracle.eval_G(&state.prev_w, &sample)?;
        let corr = correction_term(config.family, oracle, &sample, w_t, &state.prev_w, beta)?;
        v = (0..big_t.len()).map(|i| big_t[i] + beta * (state.v[i] - big_prev[i]) + corr[i]).collect::<Vec<f64>>();
        state.oracle_calls += 1;
        // I_t = (1 - beta)(G(w_t) - g(w_t)) + beta Delta_t + T_t
        innovation = match (&g_t, oracle.eval_g(&state.prev_w)) {
            (Some(g_now), Some(g_before)) => Some(
                (0..big_t.len())
                    .map(|i| {
                        let delta = (big_t[i] - big_prev[i]) - (g_now[i] - g_before[i]);
                        (1.0 - beta) * (big_t[i] - g_now[i]) + beta * delta + corr[i]
                    })
                    .collect::<Vec<f64>>(),
            ),
            _ => None,
        };
        let (b, s2) = bias_variance(config.family, beta, config.step_size, oracle.constants());
        bias_bound = b;
        variance_proxy = s2;
        let carried = if epoch_start { 0.0 } else { beta * beta * state.scaled_budget };
        scaled_budget = carried + s2;
    }

    let error = g_t.map(|g| v.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<f64>>());
    state.t = t;
    state.v = v.clone();
    state.prev_w = w_t.to_vec();
    state.prev_error = error.clone();
    state.log_a = log_a;
    state.scaled_budget = scaled_budget;
    // epoch index is read before recording this reset, so t sits in (tau_{m-1}, tau_m]
    let epoch = state.epoch();
    if reset {
        state.tau.push(t);
    }
    Ok(StepRecord {
        t,
        reset,
        error_norm: error.as_ref().map(|e| config.norm.norm(e)),
        v,
        error,
        innovation,
        bias_bound,
        variance_proxy,
        beta,
        log_a,
        scaled_budget,
        epoch,
        oracle_calls: state.oracle_calls,
    })
}

/// Runs the estimator along a prescribed path w_0, ..., w_{T-1}.
pub fn run_estimation_trajectory<O: StochasticOracle + ?Sized>(
    oracle: &O,
    path: &[Vec<f64>],
    config: &EstimatorConfig,
    key: &StreamKey,
) -> Result<Vec<StepRecord>, EstimatorError> {
    let Some(first) = path.first() else {
        return Err(EstimatorError::Config("path must contain at least one point".into()));
    };
    let (mut state, rec) = estimator_init(config, oracle, first, key)?;
    let mut out = Vec::with_capacity(path.len());
    out.push(rec);
    for w in &path[1..] {
        out.push(estimator_step(&mut state, w, config, oracle, key)?);
    }
    Ok(out)
}

/// w_0 = start, then T moves of Euclidean length `step` in random directions.
/// A move that would leave the ball of radius `radius` heads to the origin
/// instead, so every point stays inside when |start| <= radius.
pub fn bounded_random_walk(start: &[f64], step: f64, radius: f64, horizon: usize, key: &StreamKey) -> Vec<Vec<f64>> {
    let mut w = start.to_vec();
    let mut path = Vec::with_capacity(horizon + 1);
    path.push(w.clone());
    for t in 1..=horizon {
        let mut rng = key.rng(Domain::Setup, t as u64, 0);
        let mut u = normals(&mut rng, w.len());
        let un = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        u.iter_mut().for_each(|x| *x /= un);
        let next: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a + step * b).collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        w = if norm <= radius {
            next
        } else {
            let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let shrink = if wn > 0.0 { step.min(wn) / wn } else { 0.0 };
            w.iter().map(|x| x - shrink * x).collect()
        };
        path.push(w.clone());
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::NoisyQuadratic;
    use approx::assert_abs_diff_eq;
    use rand_chacha::ChaCha8Rng;

    fn cfg(family: Family, beta: f64, schedule: Schedule) -> EstimatorConfig {
        EstimatorConfig { family, beta, schedule, batch_size: 4, step_size: 0.05, horizon: 50, norm: OutputNorm::Euclidean }
    }

    fn path(n: usize, eta: f64) -> Vec<Vec<f64>> {
        (0..n).map(|t| vec![0.5 * (t as f64 * eta).cos(), 0.5 * (t as f64 * eta).sin()]).collect()
    }

    /// A deterministic scalar oracle that replays a fixed list of values.
    struct Replay(Vec<f64>, ProblemConstants);
    #[allow(non_snake_case)]
    impl StochasticOracle for Replay {
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn draw(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
            vec![]
        }
        fn eval_G(&self, _w: &[f64], s: &OracleSample) -> Result<Vec<f64>, OracleError> {
            // index lives in the low bits of the key; tests below pin it
            Ok(vec![self.0[(s.key % self.0.len() as u64) as usize]])
        }
        fn eval_g(&self, _w: &[f64]) -> Option<Vec<f64>> {
            None
        }
        fn eval_jvp(&self, _w: &[f64], _s: &OracleSample, _d: &[f64]) -> Result<Vec<f64>, OracleError> {
            Err(OracleError::JvpUnsupported)
        }
        fn constants(&self) -> &ProblemConstants {
            &self.1
        }
    }

    #[test]
    fn batch_mean_of_two_draws() {
        let oracle = Replay(vec![1.0, 3.0], ProblemConstants::default());
        let s = [OracleSample { key: 0, draws: vec![] }, OracleSample { key: 1, draws: vec![] }];
        assert_eq!(batch_mean(&oracle, &[0.0], &s).unwrap(), vec![2.0]);
    }

    #[test]
    fn zero_noise_first_order_is_exact() {
        let q = NoisyQuadratic::diagonal(&[1.0, 2.0], 0.0, 0.0, 1.0, 1.0).unwrap();
        let c = cfg(Family::FirstOrder, 1.0, Schedule::Never);
        let recs = run_estimation_trajectory(&q, &path(40, 0.05), &c, &StreamKey::new(1, 0)).unwrap();
        for r in recs {
            assert!(r.error_norm.unwrap() < 1e-14, "t = {}: {:?}", r.t, r.error_norm);
        }
    }

    #[test]
    fn beta_zero_is_plain_sample() {
        let q = NoisyQuadratic::diagonal(&[1.0, 2.0], 0.3, 0.1, 1.0, 1.0).unwrap();
        let c = cfg(Family::ZerothOrder, 0.0, Schedule::Never);
        let key = StreamKey::new(2, 0);
        let p = path(10, 0.05);
        let recs = run_estimation_trajectory(&q, &p, &c, &key).unwrap();
        for r in &recs[1..] {
            let s = draw_sample(&q, &key, Domain::Sample, r.t as u64, 0);
            assert_eq!(r.v, q.eval_G(&p[r.t], &s).unwrap());
        }
    }

    #[test]
    fn error_recursion_identity() {
        let q = NoisyQuadratic::diagonal(&[1.0, 0.3], 0.4, 0.2, 1.0, 1.0).unwrap();
        for family in [Family::ZerothOrder, Family::FirstOrder, Family::SecondOrder] {
            let c = cfg(family, 0.8, Schedule::Probabilistic { p: 0.2 });
            let recs = run_estimation_trajectory(&q, &path(60, 0.05), &c, &StreamKey::new(3, 0)).unwrap();
            for w in recs.windows(2) {
                if let Some(inn) = &w[1].innovation {
                    let prev = w[0].error.as_ref().unwrap();
                    let now = w[1].error.as_ref().unwrap();
                    for i in 0..2 {
                        assert!((0.8 * prev[i] + inn[i] - now[i]).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn correction_terms() {
        let q = NoisyQuadratic::diagonal(&[1.0, 0.3], 0.4, 0.2, 1.0, 1.0).unwrap();
        let key = StreamKey::new(4, 0);
        let s = draw_sample(&q, &key, Domain::Aux, 0, 0);
        let (w, wp) = ([0.1, 0.2], [0.3, -0.1]);
        assert_eq!(correction_term(Family::FirstOrder, &q, &s, &w, &wp, 0.9).unwrap(), vec![0.0, 0.0]);
        for f in [Family::ZerothOrder, Family::FirstOrder, Family::SecondOrder] {
            assert!(correction_term(f, &q, &s, &w, &w, 0.9).unwrap().iter().all(|v| *v == 0.0));
        }
        // G is affine in w, so the second-order Taylor remainder vanishes
        for t in 0..100 {
            let s = draw_sample(&q, &key, Domain::Aux, t, 1);
            let c = correction_term(Family::SecondOrder, &q, &s, &w, &wp, 0.9).unwrap();
            assert!(c.iter().all(|v| v.abs() < 1e-15), "{c:?}");
        }
        let z = correction_term(Family::ZerothOrder, &q, &s, &w, &wp, 0.5).unwrap();
        let (gw, gp) = (q.eval_G(&w, &s).unwrap(), q.eval_G(&wp, &s).unwrap());
        assert_abs_diff_eq!(z[0], 0.5 * (gp[0] - gw[0]), epsilon = 1e-15);
    }

    #[test]
    fn second_order_without_jvp_fails() {
        let oracle = Replay(vec![1.0], ProblemConstants::default());
        let s = OracleSample { key: 0, draws: vec![] };
        assert!(correction_term(Family::SecondOrder, &oracle, &s, &[0.0], &[1.0], 0.5).is_err());
    }

    #[test]
    fn periodic_resets_and_epochs() {
        let q = NoisyQuadratic::diagonal(&[1.0, 0.3], 0.4, 0.2, 1.0, 1.0).unwrap();
        let c = cfg(Family::FirstOrder, 1.0, Schedule::Periodic { period: 5 });
        let key = StreamKey::new(5, 0);
        let p = path(23, 0.05);
        let (mut st, _) = estimator_init(&c, &q, &p[0], &key).unwrap();
        let mut recs = vec![];
        for w in &p[1..] {
            recs.push(estimator_step(&mut st, w, &c, &q, &key).unwrap());
        }
        assert_eq!(st.tau, vec![0, 5, 10, 15, 20]);
        for r in &recs {
            // t in (tau_{m-1}, tau_m]
            assert!(r.epoch >= 1 && st.tau[r.epoch - 1] < r.t, "t={} m={}", r.t, r.epoch);
            if r.epoch < st.tau.len() {
                assert!(r.t <= st.tau[r.epoch]);
            }
            assert_eq!(r.reset, r.t % 5 == 0);
            assert_eq!(r.innovation.is_none(), r.reset);
        }
        // 22 steps: 4 resets of 4 samples plus 18 single calls plus the init batch
        assert_eq!(st.oracle_calls, 4 + 4 * 4 + 18);
    }

    #[test]
    fn recorded_family_two_proxy() {
        let q = NoisyQuadratic::diagonal(&[1.0, 0.3], 0.4, 0.2, 1.0, 1.0).unwrap();
        let c = cfg(Family::FirstOrder, 0.9, Schedule::Never);
        let recs = run_estimation_trajectory(&q, &path(5, 0.05), &c, &StreamKey::new(6, 0)).unwrap();
        let k = q.constants();
        let want = 2.0 * 0.01 * k.sigma.powi(2) + 2.0 * 0.81 * k.ell.powi(2) * 0.05f64.powi(2);
        assert_abs_diff_eq!(recs[3].variance_proxy, want, epsilon = 1e-15);
        assert_eq!(recs[3].bias_bound, 0.0);
    }

    #[test]
    fn multipliers_are_consistent() {
        let q = NoisyQuadratic::diagonal(&[1.0, 0.3], 0.4, 0.2, 1.0, 1.0).unwrap();
        let c = cfg(Family::ZerothOrder, 0.7, Schedule::Never);
        let recs = run_estimation_trajectory(&q, &path(30, 0.05), &c, &StreamKey::new(7, 0)).unwrap();
        for t in 0..30 {
            assert_eq!(lambda_multiplier(&recs, t, t), 1.0);
            for j in 0..=t {
                let direct = 0.7f64.powi((t - j) as i32);
                assert!((lambda_multiplier(&recs, t, j) - direct).abs() <= 1e-12 * direct.max(1.0));
            }
        }
        // budget closed form: sum_j beta^{-2j} Sigma^2
        let s2 = recs[1].variance_proxy;
        let t = 20;
        let direct: f64 = (1..=t).map(|j| 0.7f64.powi(-2 * j as i32) * s2).sum();
        assert!((recs[t].budget() - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Family::FirstOrder, 0.5, Schedule::Never);
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let c = cfg(Family::FirstOrder, 1.5, Schedule::Never);
        assert!(c.validate().is_err());
        let c = cfg(Family::FirstOrder, 0.5, Schedule::Probabilistic { p: 0.0 });
        assert!(c.validate().is_err());
        let c = cfg(Family::FirstOrder, 0.5, Schedule::Periodic { period: 0 });
        assert!(c.validate().is_err());
    }
}
