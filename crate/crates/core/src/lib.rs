//! Unified recursive gradient estimators with high-probability error envelopes.

pub mod bounds;
pub mod concentration;
pub mod constrained;
pub mod estimator;
pub mod geometry;
pub mod optimizer;
pub mod oracle;
pub mod rng;

pub use estimator::{
    bounded_random_walk, correction_term, estimator_init, estimator_step, run_estimation_trajectory, EstimatorConfig, EstimatorError,
    EstimatorState, Family, Schedule, StepRecord,
};
pub use geometry::{GeometryError, GeometryKind, GeometrySpec, OutputNorm};
pub use oracle::{ProblemConstants, StochasticOracle, SyntheticProblem};
pub use rng::{Domain, StreamKey};
pub use bounds::{BoundEnvelope, BoundsError, Case, EnvelopeParams, ParamSelection};
pub use concentration::{FreedmanReport, MartingaleSpec, ProxySchedule};
pub use constrained::{ConstrainedError, ConstrainedProblem, ConstrainedSetup, SgmConstants, SgmPlan, SgmResult};
pub use optimizer::{MirrorDescentRun, OptimizerError, TableConfig};
