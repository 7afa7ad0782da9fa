//! Makespan scheduling on identical machines with bag constraints: at most
//! one job of each bag per machine. The crate implements an approximation
//! scheme built on a pattern mixed-integer program solved exactly over the
//! rationals, plus reference algorithms and a small harness.

pub mod baselines;
pub mod harness;
pub mod milp;
pub mod model;
pub mod placement;
pub mod preprocess;
pub mod transform;

pub use baselines::{brute_force, global_bag_lpt, BaselineError, OptResult};
pub use harness::{eptas_solve, PipelineTrace, SolveConfig, SolveError};
pub use model::{
    makespan, parse_rational, rat, validate_schedule, BagId, Instance, Job, JobId, ModelError, Rational,
    Schedule, ValidationReport,
};
pub use preprocess::{EpsParams, PreprocessError};
