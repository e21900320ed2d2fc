//! Experiment configuration. Unknown keys are rejected everywhere and the
//! only field with a default is `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unirec::bounds::Case;
use unirec::concentration::ProxySchedule;
use unirec::{Family, GeometrySpec};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Estimate,
    MirrorDescent,
    Sgm,
    Freedman,
    Sweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Estimate => "estimate",
            ExperimentKind::MirrorDescent => "mirror-descent",
            ExperimentKind::Sgm => "sgm",
            ExperimentKind::Freedman => "freedman",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Required for every kind except sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub trials: u64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freedman: Option<FreedmanConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    Euclidean { dimension: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { dimension: usize },
}

impl GeometryConfig {
    pub fn build(&self) -> Result<GeometrySpec, CliError> {
        let g = match self {
            GeometryConfig::Euclidean { dimension } => GeometrySpec::euclidean(*dimension),
            GeometryConfig::Box { lower, upper } => GeometrySpec::boxed(lower.clone(), upper.clone()),
            GeometryConfig::Simplex { dimension } => GeometrySpec::simplex(*dimension),
        };
        g.map_err(|e| CliError::Schema(format!("problem.geometry: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// f(w) = w'Aw/2 with A = diag(spectrum), multiplicative and additive noise.
    NoisyQuadratic {
        spectrum: Vec<f64>,
        noise_std: f64,
        additive_std: f64,
        radius: f64,
        start: Vec<f64>,
        geometry: GeometryConfig,
    },
    /// Scalar <xi, w> with xi ~ N(0, diag(variances)).
    LinearGaussian { variances: Vec<f64>, radius: f64, start: Vec<f64> },
    /// min <c, w> s.t. <a, w> + b <= 0 over a box or simplex.
    ConstrainedLinear {
        c: Vec<f64>,
        a: Vec<f64>,
        b: f64,
        noise_std: f64,
        subgrad_noise: f64,
        geometry: GeometryConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Manual {
        family: u8,
        case: Case,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<usize>,
        batch_size: usize,
        step_size: f64,
        kappa: f64,
    },
    FromTable { family: u8, case: Case, kappa: f64 },
}

impl EstimatorSpec {
    pub fn family(&self) -> Result<Family, CliError> {
        let i = match self {
            EstimatorSpec::Manual { family, .. } | EstimatorSpec::FromTable { family, .. } => *family,
        };
        Family::from_index(i).ok_or_else(|| CliError::Schema(format!("estimator.family: expected 1, 2 or 3, got {i}")))
    }
    pub fn case(&self) -> Case {
        match self {
            EstimatorSpec::Manual { case, .. } | EstimatorSpec::FromTable { case, .. } => *case,
        }
    }
    pub fn kappa(&self) -> f64 {
        match self {
            EstimatorSpec::Manual { kappa, .. } | EstimatorSpec::FromTable { kappa, .. } => *kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTarget {
    MirrorDescent,
    Sgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub target: SweepTarget,
    pub horizons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreedmanConfig {
    pub dimension: usize,
    pub schedule: ProxySchedule,
    /// Needed only when the schedule is state dependent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

/// Parses TOML, or JSON when the file name ends in `.json` (the echo in a
/// report can be fed back this way).
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.extension().and_then(|e| e.to_str()) == Some("json"))
}

pub fn parse(text: &str, json: bool) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = if json {
        serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| CliError::Schema(e.to_string().trim().to_string()))?
    };
    check_schema(&cfg)?;
    Ok(cfg)
}

fn need<'a, T>(v: &'a Option<T>, field: &str, kind: ExperimentKind) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Schema(format!("missing field `{field}` (required for kind = \"{}\")", kind.name())))
}

/// Cross-field requirements that serde cannot express.
pub fn check_schema(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let kind = cfg.kind;
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(CliError::Schema(format!("delta: must lie in (0, 1), got {}", cfg.delta)));
    }
    if cfg.trials == 0 {
        return Err(CliError::Schema("trials: must be positive".into()));
    }
    match kind {
        ExperimentKind::Sweep => {
            let sweep = need(&cfg.sweep, "sweep", kind)?;
            if sweep.horizons.len() < 2 || sweep.horizons.iter().any(|&t| t < 2) {
                return Err(CliError::Schema("sweep.horizons: need at least two horizons, each >= 2".into()));
            }
            need(&cfg.problem, "problem", kind)?;
            match need(&cfg.estimator, "estimator", kind)? {
                EstimatorSpec::FromTable { .. } => {}
                EstimatorSpec::Manual { .. } => {
                    return Err(CliError::Schema("estimator.mode: a sweep needs mode = \"from-table\"".into()));
                }
            }
        }
        _ => {
            let t = *need(&cfg.horizon, "horizon", kind)?;
            if t == 0 {
                return Err(CliError::Schema("horizon: must be positive".into()));
            }
        }
    }
    match kind {
        ExperimentKind::Freedman => {
            need(&cfg.freedman, "freedman", kind)?;
        }
        ExperimentKind::Estimate | ExperimentKind::MirrorDescent | ExperimentKind::Sgm => {
            need(&cfg.problem, "problem", kind)?;
            need(&cfg.estimator, "estimator", kind)?;
        }
        ExperimentKind::Sweep => {}
    }
    if let Some(est) = &cfg.estimator {
        est.family()?;
        if let EstimatorSpec::Manual { case, beta, p, period, .. } = est {
            let missing = match case {
                Case::Recursive if beta.is_none() => Some("estimator.beta"),
                Case::Probabilistic if p.is_none() => Some("estimator.p"),
                Case::Periodic if period.is_none() => Some("estimator.period"),
                _ => None,
            };
            if let Some(f) = missing {
                return Err(CliError::Schema(format!("missing field `{f}` (required for case = \"{}\")", case_name(*case))));
            }
        }
    }
    let needs_constrained = kind == ExperimentKind::Sgm || cfg.sweep.as_ref().is_some_and(|s| s.target == SweepTarget::Sgm);
    if let Some(p) = &cfg.problem {
        let constrained = matches!(p, ProblemConfig::ConstrainedLinear { .. });
        if needs_constrained != constrained {
            let want = if needs_constrained { "constrained-linear" } else { "noisy-quadratic or linear-gaussian" };
            return Err(CliError::Schema(format!("problem.kind: this experiment needs {want}")));
        }
        let needs_gradient = kind == ExperimentKind::MirrorDescent || cfg.sweep.as_ref().is_some_and(|s| s.target == SweepTarget::MirrorDescent);
        if needs_gradient && !matches!(p, ProblemConfig::NoisyQuadratic { .. }) {
            return Err(CliError::Schema("problem.kind: mirror descent needs noisy-quadratic".into()));
        }
    }
    Ok(())
}

pub fn case_name(case: Case) -> &'static str {
    match case {
        Case::Recursive => "recursive",
        Case::Probabilistic => "probabilistic",
        Case::Periodic => "periodic",
    }
}
