//! Problem construction, parameter resolution and the experiment runners.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use unirec::bounds::{BoundEnvelope, BoundsError, Case, ParamSelection};
use unirec::concentration::{gamma_for_delta, sample_path, wilson_interval, MartingaleSpec};
use unirec::constrained::{sgm_configure, sgm_envelope, sgm_run, sgm_run_with_threshold, sgm_threshold, analysis_window, ConstrainedSetup, SgmPlan};
use unirec::optimizer::{configure_from_table, mirror_descent_run};
use unirec::oracle::{ConstrainedLinear, LinearGaussian, NoisyQuadratic, ProblemConstants};
use unirec::{bounded_random_walk, run_estimation_trajectory, EstimatorConfig, Family, GeometrySpec, OutputNorm, Schedule, StochasticOracle, StreamKey};

use crate::config::{case_name, EstimatorSpec, ExperimentConfig, ExperimentKind, ProblemConfig, SweepTarget};
use crate::error::CliError;

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

/// A built problem instance.
pub enum Problem {
    Quadratic { oracle: NoisyQuadratic, geometry: GeometrySpec, start: Vec<f64>, radius: f64 },
    Linear { oracle: LinearGaussian, start: Vec<f64>, radius: f64 },
    Constrained(ConstrainedSetup<ConstrainedLinear>),
}

impl Problem {
    pub fn build(cfg: &ProblemConfig) -> Result<Self, CliError> {
        let schema = |e: unirec::oracle::OracleError| CliError::Schema(format!("problem: {e}"));
        match cfg {
            ProblemConfig::NoisyQuadratic { spectrum, noise_std, additive_std, radius, start, geometry } => {
                if spectrum.iter().any(|v| *v < 0.0) {
                    return Err(CliError::Schema("problem.spectrum: entries must be nonnegative".into()));
                }
                let geometry = geometry.build()?;
                if geometry.dimension != spectrum.len() || start.len() != spectrum.len() {
                    return Err(CliError::Schema("problem: spectrum, start and geometry dimensions differ".into()));
                }
                geometry.check_feasible(start).map_err(|e| CliError::Schema(format!("problem.start: {e}")))?;
                let q = NoisyQuadratic::diagonal(spectrum, *noise_std, *additive_std, *radius, 1.0).map_err(schema)?;
                // f >= 0, so f(start) bounds the initial suboptimality
                let delta_f = q.value(start);
                Ok(Problem::Quadratic { oracle: q.with_delta_f(delta_f), geometry, start: start.clone(), radius: *radius })
            }
            ProblemConfig::LinearGaussian { variances, radius, start } => {
                if start.len() != variances.len() {
                    return Err(CliError::Schema("problem.start: length differs from variances".into()));
                }
                let oracle = LinearGaussian::new(diag(variances), *radius, 1.0).map_err(schema)?;
                Ok(Problem::Linear { oracle, start: start.clone(), radius: *radius })
            }
            ProblemConfig::ConstrainedLinear { c, a, b, noise_std, subgrad_noise, geometry } => {
                let g = geometry.build()?;
                let p = ConstrainedLinear::new(c.clone(), a.clone(), *b, *noise_std, *subgrad_noise, g).map_err(schema)?;
                Ok(Problem::Constrained(ConstrainedSetup::new(p).map_err(|e| CliError::Schema(format!("problem: {e}")))?))
            }
        }
    }

    pub fn oracle(&self) -> &dyn StochasticOracle {
        match self {
            Problem::Quadratic { oracle, .. } => oracle,
            Problem::Linear { oracle, .. } => oracle,
            Problem::Constrained(s) => &s.problem,
        }
    }

    pub fn constants(&self) -> ProblemConstants {
        *self.oracle().constants()
    }
}

/// Estimator parameters after table lookup or manual entry.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub horizon: usize,
    pub family: u8,
    pub case: &'static str,
    pub eta: f64,
    pub beta: f64,
    pub p: Option<f64>,
    pub period: Option<usize>,
    pub batch_size: usize,
    pub kappa: f64,
    /// Envelope at t = T, or the uniform E for the constrained method.
    pub envelope: f64,
    pub predicted_bound: Option<f64>,
    pub horizon_threshold: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(skip)]
    pub config: EstimatorConfig,
    #[serde(skip)]
    pub plan: Option<SgmPlan>,
}

/// The side condition the selection violated, spelled out.
pub fn lemma_condition(sel: &ParamSelection) -> String {
    let rule = match (sel.case, sel.family) {
        (Case::Recursive, Family::SecondOrder) => "T >= max{C3/C4, C1*C5/C4^2, sqrt(C1^2*C6/C4^3)}",
        (Case::Recursive, _) => "T >= max{C3/C4, C1*C5/C4^2}",
        (_, Family::ZerothOrder) => "T >= 8*C1*C5/C4^2",
        (_, Family::FirstOrder) => "T >= sqrt(2)*C1*C5/C4^2",
        (_, Family::SecondOrder) => "T >= max{sqrt(2)*C1*C5/C4^2, 2*sqrt(C1^2*C6/C4^3)}",
    };
    let mut msg = format!(
        "family {} with {} resets: horizon condition {rule} needs T >= {:.6e}",
        sel.family.index(),
        case_name(sel.case),
        sel.horizon_threshold
    );
    if sel.case == Case::Recursive && sel.rate > 1.0 {
        msg.push_str(&format!("; selected 1 - beta = {:.6e} exceeds 1", sel.rate));
    }
    msg
}

fn inadmissible(e: BoundsError) -> CliError {
    CliError::Inadmissible(e.to_string())
}

fn manual_config(spec: &EstimatorSpec, horizon: usize, norm: OutputNorm) -> Result<EstimatorConfig, CliError> {
    let EstimatorSpec::Manual { case, beta, p, period, batch_size, step_size, .. } = spec else {
        unreachable!("manual_config called on a table spec")
    };
    let (beta, schedule) = match case {
        Case::Recursive => (beta.unwrap_or(f64::NAN), Schedule::Never),
        Case::Probabilistic => (1.0, Schedule::Probabilistic { p: p.unwrap_or(f64::NAN) }),
        Case::Periodic => (1.0, Schedule::Periodic { period: period.unwrap_or(0) }),
    };
    let config = EstimatorConfig { family: spec.family()?, beta, schedule, batch_size: *batch_size, step_size: *step_size, horizon, norm };
    config.validate().map_err(|e| CliError::Schema(format!("estimator: {e}")))?;
    Ok(config)
}

fn summarize(config: EstimatorConfig, kappa: f64, envelope: f64, selection: Option<&ParamSelection>) -> Resolved {
    let (p, period) = match config.schedule {
        Schedule::Never => (None, None),
        Schedule::Probabilistic { p } => (Some(p), None),
        Schedule::Periodic { period } => (None, Some(period)),
    };
    Resolved {
        horizon: config.horizon,
        family: config.family.index(),
        case: case_name(Case::of(&config.schedule)),
        eta: config.step_size,
        beta: config.beta,
        p,
        period,
        batch_size: config.batch_size,
        kappa,
        envelope,
        predicted_bound: selection.map(|s| s.predicted_bound),
        horizon_threshold: selection.map(|s| s.horizon_threshold),
        threshold: None,
        config,
        plan: None,
    }
}

/// Resolves the estimator for one horizon and checks admissibility.
pub fn resolve(cfg: &ExperimentConfig, problem: &Problem, horizon: usize, spec: &EstimatorSpec) -> Result<Resolved, CliError> {
    let family = spec.family()?;
    let case = spec.case();
    let kappa = spec.kappa();
    if let Problem::Constrained(setup) = problem {
        let k = setup.constants();
        return match spec {
            EstimatorSpec::FromTable { .. } => {
                let plan = sgm_configure(case, family, &k, horizon, cfg.delta).map_err(|e| CliError::Inadmissible(e.to_string()))?;
                if !plan.admissible {
                    return Err(CliError::Inadmissible(lemma_condition(&plan.selection)));
                }
                let mut r = summarize(plan.config.clone(), 1.0, plan.envelope, Some(&plan.selection));
                r.predicted_bound = Some(plan.predicted_bound);
                r.threshold = Some(plan.threshold);
                r.plan = Some(plan);
                Ok(r)
            }
            EstimatorSpec::Manual { .. } => {
                let config = manual_config(spec, horizon, OutputNorm::Euclidean)?;
                let window = analysis_window(case, horizon);
                let e = sgm_envelope(&config, &k, cfg.delta, window).map_err(|e| CliError::Inadmissible(e.to_string()))?;
                let mut r = summarize(config, 1.0, e, None);
                r.threshold = Some(sgm_threshold(k.r, r.eta, horizon - window, k.g, k.d, cfg.delta, e));
                Ok(r)
            }
        };
    }
    let constants = problem.constants();
    let norm = match problem {
        Problem::Quadratic { geometry, .. } => geometry.output_norm(),
        _ => OutputNorm::Euclidean,
    };
    let (config, selection) = match spec {
        EstimatorSpec::FromTable { .. } => {
            let table = configure_from_table(family, case, &constants, horizon, cfg.delta, kappa).map_err(|e| CliError::Inadmissible(e.to_string()))?;
            if !table.selection.admissible {
                return Err(CliError::Inadmissible(lemma_condition(&table.selection)));
            }
            let mut config = table.config;
            config.norm = norm;
            (config, Some(table.selection))
        }
        EstimatorSpec::Manual { .. } => (manual_config(spec, horizon, norm)?, None),
    };
    let env = BoundEnvelope::for_config(&config, &constants, cfg.delta, kappa).map_err(inadmissible)?;
    Ok(summarize(config, kappa, env.eval(horizon), selection.as_ref()))
}

/// Everything a run produces before it is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub resolved: Value,
    pub aggregates: Value,
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Least-squares slope of log y on log x.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn parallel<T: Send, F>(trials: u64, f: F) -> Result<Vec<T>, CliError>
where
    F: Fn(u64) -> Result<T, CliError> + Sync + Send,
{
    // collect keeps trial order, so reductions below are worker-count independent
    (0..trials).into_par_iter().map(f).collect()
}

/// Runs the configured experiment on the current rayon pool.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.kind {
        ExperimentKind::Estimate => estimate(cfg),
        ExperimentKind::MirrorDescent => mirror(cfg),
        ExperimentKind::Sgm => sgm(cfg),
        ExperimentKind::Freedman => freedman(cfg),
        ExperimentKind::Sweep => sweep(cfg),
    }
}

/// Resolution only: the parameter echo behind `validate`.
pub fn resolve_all(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    match cfg.kind {
        ExperimentKind::Freedman => Ok(freedman_setup(cfg)?.0),
        ExperimentKind::Sweep => {
            let problem = Problem::build(cfg.problem.as_ref().expect("checked"))?;
            let spec = cfg.estimator.as_ref().expect("checked");
            let horizons = &cfg.sweep.as_ref().expect("checked").horizons;
            let all = horizons.iter().map(|&t| resolve(cfg, &problem, t, spec)).collect::<Result<Vec<_>, _>>()?;
            Ok(serde_json::to_value(all)?)
        }
        _ => {
            let problem = Problem::build(cfg.problem.as_ref().expect("checked"))?;
            let r = resolve(cfg, &problem, cfg.horizon.expect("checked"), cfg.estimator.as_ref().expect("checked"))?;
            Ok(serde_json::to_value(r)?)
        }
    }
}

fn estimate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let problem = Problem::build(cfg.problem.as_ref().expect("checked"))?;
    let horizon = cfg.horizon.expect("checked");
    let r = resolve(cfg, &problem, horizon, cfg.estimator.as_ref().expect("checked"))?;
    let constants = problem.constants();
    let env = BoundEnvelope::for_config(&r.config, &constants, cfg.delta, r.kappa).map_err(inadmissible)?;
    let (start, radius) = match &problem {
        Problem::Quadratic { start, radius, .. } | Problem::Linear { start, radius, .. } => (start.clone(), *radius),
        Problem::Constrained(_) => unreachable!("schema forbids it"),
    };
    let step = r.config.step_size * constants.g_update;
    let per_trial = parallel(cfg.trials, |i| {
        let key = StreamKey::new(cfg.seed, i);
        let path = bounded_random_walk(&start, step, radius, horizon, &key);
        let recs = run_estimation_trajectory(problem.oracle(), &path, &r.config, &key)?;
        let mut rows = Vec::with_capacity(horizon);
        let (mut covered, mut ratio) = (true, 0.0f64);
        for rec in &recs[1..] {
            let e = rec.error_norm.unwrap_or(f64::NAN);
            let bound = env.eval(rec.t);
            covered &= e <= bound;
            ratio = ratio.max(e / bound);
            rows.push(vec![i.to_string(), rec.t.to_string(), u8::from(rec.reset).to_string(), num(e), num(bound)]);
        }
        let last = recs.last().expect("nonempty");
        Ok((rows, covered, ratio, last.error_norm.unwrap_or(f64::NAN), last.oracle_calls as f64))
    })?;
    let n = per_trial.len() as f64;
    let covered = per_trial.iter().filter(|t| t.1).count() as f64;
    let aggregates = json!({
        "trials": cfg.trials,
        "coverage_rate": covered / n,
        "violation_rate": 1.0 - covered / n,
        "max_error_to_envelope": per_trial.iter().map(|t| t.2).fold(0.0, f64::max),
        "mean_final_error": mean(per_trial.iter().map(|t| t.3)),
        "mean_oracle_calls": mean(per_trial.iter().map(|t| t.4)),
        "envelope_at_horizon": env.eval(horizon),
        "envelope_row": env.name,
    });
    Ok(Outcome {
        columns: vec!["trial", "t", "reset", "error_norm", "envelope"],
        rows: per_trial.into_iter().flat_map(|t| t.0).collect(),
        resolved: serde_json::to_value(&r)?,
        aggregates,
    })
}

/// CSV rows, average witness and oracle calls of one trial.
type MdTrial = (Vec<Vec<String>>, f64, f64);

fn md_trials(cfg: &ExperimentConfig, problem: &Problem, r: &Resolved, horizon_tag: Option<u64>) -> Result<Vec<MdTrial>, CliError> {
    let Problem::Quadratic { oracle, geometry, start, .. } = problem else { unreachable!("schema forbids it") };
    parallel(cfg.trials, |i| {
        let mut key = StreamKey::new(cfg.seed, i);
        if let Some(tag) = horizon_tag {
            key = key.fork(tag);
        }
        let run = mirror_descent_run(oracle, geometry, &r.config, start, &key)?;
        let rows = run
            .steps
            .iter()
            .map(|s| {
                vec![
                    i.to_string(),
                    s.t.to_string(),
                    num(s.witness),
                    num(s.grad_norm),
                    num(s.error_norm),
                    num(s.step_norm),
                    u8::from(s.reset).to_string(),
                ]
            })
            .collect();
        Ok((rows, run.average_witness, run.oracle_calls as f64))
    })
}

fn mirror(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let problem = Problem::build(cfg.problem.as_ref().expect("checked"))?;
    let horizon = cfg.horizon.expect("checked");
    let r = resolve(cfg, &problem, horizon, cfg.estimator.as_ref().expect("checked"))?;
    let per_trial = md_trials(cfg, &problem, &r, None)?;
    let aggregates = json!({
        "trials": cfg.trials,
        "mean_average_witness": mean(per_trial.iter().map(|t| t.1)),
        "max_average_witness": per_trial.iter().map(|t| t.1).fold(0.0, f64::max),
        "mean_oracle_calls": mean(per_trial.iter().map(|t| t.2)),
        "predicted_bound": r.predicted_bound,
    });
    Ok(Outcome {
        columns: vec!["trial", "t", "witness", "grad_norm", "error_norm", "step_norm", "reset"],
        rows: per_trial.into_iter().flat_map(|t| t.0).collect(),
        resolved: serde_json::to_value(&r)?,
        aggregates,
    })
}

struct SgmTrial {
    row: Vec<String>,
    success: bool,
    within: bool,
    gap: f64,
    h: f64,
    calls: f64,
}

fn sgm_trials(cfg: &ExperimentConfig, problem: &Problem, r: &Resolved, horizon_tag: Option<u64>) -> Result<Vec<SgmTrial>, CliError> {
    let Problem::Constrained(setup) = problem else { unreachable!("schema forbids it") };
    let horizon = r.horizon;
    let case = Case::of(&r.config.schedule);
    parallel(cfg.trials, |i| {
        let mut key = StreamKey::new(cfg.seed, i);
        if let Some(tag) = horizon_tag {
            key = key.fork(tag);
        }
        let res = match &r.plan {
            Some(plan) => sgm_run_with_threshold(setup, &plan.config, plan.eta, plan.threshold, plan.envelope, plan.window_start, &key)?,
            None => sgm_run(setup, &r.config, r.eta, cfg.delta, &key)?,
        };
        let gap = res.f_gap.unwrap_or(f64::NAN);
        let h = res.h_value.unwrap_or(f64::NAN);
        let row = vec![
            i.to_string(),
            case_name(case).to_string(),
            r.family.to_string(),
            horizon.to_string(),
            num(res.threshold),
            num(res.envelope),
            num(gap),
            num(h),
            res.selected.len().to_string(),
            res.oracle_calls.to_string(),
            u8::from(res.success()).to_string(),
        ];
        Ok(SgmTrial { row, success: res.success(), within: res.within_guarantee(), gap, h, calls: res.oracle_calls as f64 })
    })
}

const SGM_COLUMNS: [&str; 11] =
    ["trial", "case", "family", "horizon", "epsilon", "envelope", "f_gap", "h_value", "selected", "oracle_calls", "success"];

fn sgm(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let problem = Problem::build(cfg.problem.as_ref().expect("checked"))?;
    let horizon = cfg.horizon.expect("checked");
    let r = resolve(cfg, &problem, horizon, cfg.estimator.as_ref().expect("checked"))?;
    let trials = sgm_trials(cfg, &problem, &r, None)?;
    let n = trials.len() as f64;
    let ok: Vec<&SgmTrial> = trials.iter().filter(|t| t.success).collect();
    let expected_calls = match r.config.schedule {
        Schedule::Probabilistic { .. } => Some((2.0 - 1.0 / r.batch_size as f64) * horizon as f64),
        Schedule::Periodic { period } => Some((horizon + (period - 1) * (horizon / period)) as f64),
        Schedule::Never => Some(horizon as f64),
    };
    let aggregates = json!({
        "trials": cfg.trials,
        "success_rate": ok.len() as f64 / n,
        "guarantee_rate": trials.iter().filter(|t| t.within).count() as f64 / n,
        "mean_f_gap": mean(ok.iter().map(|t| t.gap)),
        "mean_h_value": mean(ok.iter().map(|t| t.h)),
        "mean_oracle_calls": mean(trials.iter().map(|t| t.calls)),
        "expected_oracle_calls": expected_calls,
        "predicted_bound": r.predicted_bound,
    });
    Ok(Outcome {
        columns: SGM_COLUMNS.to_vec(),
        rows: trials.into_iter().map(|t| t.row).collect(),
        resolved: serde_json::to_value(&r)?,
        aggregates,
    })
}

fn freedman_setup(cfg: &ExperimentConfig) -> Result<(Value, MartingaleSpec, f64, f64), CliError> {
    let f = cfg.freedman.as_ref().expect("checked");
    let horizon = cfg.horizon.expect("checked");
    if f.dimension == 0 {
        return Err(CliError::Schema("freedman.dimension: must be positive".into()));
    }
    let spec = MartingaleSpec::gaussian(f.dimension, horizon, f.schedule);
    let budget = match (f.budget, f.schedule.deterministic_budget(horizon)) {
        (Some(b), _) => b,
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::Schema("missing field `freedman.budget` (required for a state-dependent schedule)".into())),
    };
    if !(budget > 0.0) {
        return Err(CliError::Inadmissible(format!("budget V = {budget} must be positive")));
    }
    let gamma = gamma_for_delta(cfg.delta);
    let resolved = json!({ "budget": budget, "gamma": gamma, "radius": (spec.kappa.sqrt() + gamma) * budget.sqrt(), "bound": cfg.delta });
    Ok((resolved, spec, budget, gamma))
}

fn freedman(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (resolved, spec, budget, gamma) = freedman_setup(cfg)?;
    let radius = (spec.kappa.sqrt() + gamma) * budget.sqrt();
    let base = StreamKey::new(cfg.seed, 0);
    let per_trial = parallel(cfg.trials, |i| {
        let path = sample_path(&spec, &base.with_trial(i));
        let norm = spec.norm.norm(&path.terminal());
        let b = path.budget();
        let hit = b <= budget && norm >= radius;
        Ok((vec![i.to_string(), num(norm), num(b), num(radius), u8::from(hit).to_string()], hit))
    })?;
    let violations = per_trial.iter().filter(|t| t.1).count() as u64;
    let (lo, hi) = wilson_interval(violations, cfg.trials, 0.99);
    let bound = (-gamma * gamma / 3.0).exp();
    let aggregates = json!({
        "trials": cfg.trials,
        "violations": violations,
        "violation_rate": violations as f64 / cfg.trials as f64,
        "ci99_low": lo,
        "ci99_high": hi,
        "bound": bound,
        "conforms": lo <= bound,
    });
    Ok(Outcome {
        columns: vec!["trial", "terminal_norm", "budget", "radius", "violation"],
        rows: per_trial.into_iter().map(|t| t.0).collect(),
        resolved,
        aggregates,
    })
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let problem = Problem::build(cfg.problem.as_ref().expect("checked"))?;
    let spec = cfg.estimator.as_ref().expect("checked");
    let sw = cfg.sweep.as_ref().expect("checked");
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut predicted = Vec::new();
    let mut resolved = Vec::new();
    for &t in &sw.horizons {
        let r = resolve(cfg, &problem, t, spec)?;
        let bound = r.predicted_bound.unwrap_or(f64::NAN);
        let metrics: Vec<f64> = match sw.target {
            SweepTarget::MirrorDescent => md_trials(cfg, &problem, &r, Some(t as u64))?.into_iter().map(|x| x.1).collect(),
            SweepTarget::Sgm => sgm_trials(cfg, &problem, &r, Some(t as u64))?
                .into_iter()
                .map(|x| if x.success { x.gap.max(x.h) } else { f64::NAN })
                .collect(),
        };
        for (i, m) in metrics.iter().enumerate() {
            rows.push(vec![t.to_string(), i.to_string(), num(*m), num(r.eta), num(bound)]);
        }
        let finite: Vec<f64> = metrics.iter().cloned().filter(|m| m.is_finite()).collect();
        points.push(json!({ "horizon": t, "mean_metric": mean(finite.iter().cloned()), "failures": metrics.len() - finite.len(), "predicted_bound": bound }));
        predicted.push((t as f64, bound));
        resolved.push((t as f64, mean(finite.iter().cloned())));
    }
    let metric = match sw.target {
        SweepTarget::MirrorDescent => "average_witness",
        SweepTarget::Sgm => "max_f_gap_h",
    };
    let aggregates = json!({
        "trials": cfg.trials,
        "metric": metric,
        "points": points,
        "fitted_slope": log_log_slope(&resolved),
        "predicted_slope": log_log_slope(&predicted),
    });
    let echo = sw.horizons.iter().map(|&t| resolve(cfg, &problem, t, spec)).collect::<Result<Vec<_>, _>>()?;
    Ok(Outcome {
        columns: vec!["horizon", "trial", "metric", "eta", "predicted_bound"],
        rows,
        resolved: serde_json::to_value(echo)?,
        aggregates,
    })
}
