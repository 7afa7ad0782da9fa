//! Pipeline orchestration, file formats, instance generation and reports.

pub mod bench;
pub mod generate;
pub mod io;
pub mod pipeline;

pub use bench::{bench, render_table, to_json_lines, Algorithm, BenchRow};
pub use generate::{generate, generate_packed, GeneratorSpec, SizeDistribution, SpecError};
pub use io::{parse_instance, parse_schedule, write_instance, write_schedule, IoError};
pub use pipeline::{
    eptas_solve, run_guess, solve_into, GuessArtifacts, GuessTrace, PipelineTrace, SolveConfig, SolveError,
    StageRecord,
};
