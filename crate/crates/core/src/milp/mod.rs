//! Pattern program: enumeration, model, exact solver and slot assignment.

pub mod bnb;
pub mod lp;
pub mod model;
pub mod pattern;
pub mod slots;
pub mod solve;

use thiserror::Error;

pub use bnb::{branch_and_bound, Budget, MixedIntegerSystem, SearchOutcome};
pub use lp::{Constraint, LinearSystem, Sense};
pub use model::{
    build_milp, count_integer_variables, export_lp, integer_variable_bound, priority_slot_sizes,
    x_slot_sizes, MilpModel, MilpRow, MilpVar, RowFamily, VarKind, VariableBound,
};
pub use pattern::{enumerate_patterns, is_valid_pattern, Pattern, SlotBag};
pub use slots::{assign_slots, MachineSlots, SlotAssignment, SlotKind};
pub use solve::{solve_milp, MilpSolution, MilpStatus};

pub const DEFAULT_PATTERN_CAP: usize = 1_000_000;
pub const DEFAULT_NODE_BUDGET: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MilpError {
    #[error("pattern count exceeds the cap of {cap} (reached {count})")]
    PatternBudgetExceeded { count: usize, cap: usize },
    #[error("solution does not match the instance: {0}")]
    AssignmentMismatch(String),
    #[error("no solution to assign (status {0:?})")]
    NotFeasible(MilpStatus),
}
