//! The full pipeline over the guess grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{
    assign_slots, build_milp, count_integer_variables, enumerate_patterns, priority_slot_sizes,
    solve_milp, x_slot_sizes, MilpError, MilpStatus, DEFAULT_NODE_BUDGET, DEFAULT_PATTERN_CAP,
};
use crate::model::{format_rational, makespan, validate_schedule, BagId, Instance, ModelError, Rational, Schedule};
use crate::placement::{
    group_bag_lpt, group_machines, nonpriority_small_bags, place_large_medium, place_nonpriority_small,
    place_priority_small, resolve_conflicts, PlacementError,
};
use crate::preprocess::{
    bounds, classify, guess_grid, scale_and_round, select_k, unit_fraction_denominator, EpsParams,
    PreprocessError,
};
use crate::transform::{add_medium_jobs, expanded_instance, strip_fillers, transform, TransformError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveConfig {
    pub node_budget: u64,
    pub pattern_budget: usize,
    /// Overrides the priority cut-off, which at small scale otherwise makes
    /// every bag priority.
    pub force_b_prime: Option<usize>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            node_budget: DEFAULT_NODE_BUDGET,
            pattern_budget: DEFAULT_PATTERN_CAP,
            force_b_prime: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("bag {bag} has {jobs} jobs but only {machines} machines exist")]
    InfeasibleBag { bag: BagId, jobs: usize, machines: usize },
    #[error("at guess {guess}, stage {stage}: pattern count exceeds {cap}")]
    PatternBudgetExceeded { guess: String, stage: String, cap: usize },
    #[error("at guess {guess}, stage {stage}: node budget of {budget} exhausted")]
    BudgetExceeded { guess: String, stage: String, budget: u64 },
    #[error("at guess {guess}, stage {stage}: {message}")]
    Stage { guess: String, stage: String, message: String },
    #[error("no guess on the grid produced a schedule")]
    GridExhausted,
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub makespan: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessTrace {
    pub guess: String,
    pub k: Option<u32>,
    pub t: Option<String>,
    pub b_prime: Option<String>,
    pub priority_bags: Option<usize>,
    pub patterns: Option<usize>,
    pub integer_variables: Option<usize>,
    pub milp_status: Option<MilpStatus>,
    pub milp_nodes: Option<u64>,
    pub stages: Vec<StageRecord>,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub eps: String,
    pub lower: Option<String>,
    pub upper: Option<String>,
    pub guesses: Vec<GuessTrace>,
    pub accepted: Option<String>,
    pub makespan: Option<String>,
}

impl PipelineTrace {
    pub fn new(eps: &Rational) -> Self {
        PipelineTrace {
            eps: format_rational(eps),
            lower: None,
            upper: None,
            guesses: Vec::new(),
            accepted: None,
            makespan: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human-readable rendering, one block per guess.
    pub fn explain(&self) -> String {
        let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".into());
        let mut out = format!(
            "eps {}  bounds [{}, {}]  accepted {}  makespan {}\n",
            self.eps,
            opt(&self.lower),
            opt(&self.upper),
            opt(&self.accepted),
            opt(&self.makespan)
        );
        for g in &self.guesses {
            out += &format!("\nguess {}: {}\n", g.guess, g.outcome);
            let mut facts = Vec::new();
            if let Some(k) = g.k {
                facts.push(format!("k={k}"));
            }
            if let Some(t) = &g.t {
                facts.push(format!("T={t}"));
            }
            if let Some(b) = &g.b_prime {
                facts.push(format!("b'={b}"));
            }
            if let Some(p) = g.priority_bags {
                facts.push(format!("priority bags={p}"));
            }
            if let Some(p) = g.patterns {
                facts.push(format!("patterns={p}"));
            }
            if let Some(v) = g.integer_variables {
                facts.push(format!("integer vars={v}"));
            }
            if let (Some(s), Some(n)) = (g.milp_status, g.milp_nodes) {
                facts.push(format!("program {s:?} in {n} nodes"));
            }
            if !facts.is_empty() {
                out += &format!("  {}\n", facts.join(", "));
            }
            let width = g.stages.iter().map(|s| s.stage.len()).max().unwrap_or(0);
            for st in &g.stages {
                let mut line = format!("  {:<width$}", st.stage);
                if let Some(m) = &st.makespan {
                    line += &format!("  makespan {m}");
                }
                if let Some(n) = &st.note {
                    line += &format!("  {n}");
                }
                out += line.trim_end();
                out.push('\n');
            }
        }
        out
    }
}

impl GuessTrace {
    pub fn new(guess: &Rational) -> Self {
        GuessTrace {
            guess: format_rational(guess),
            k: None,
            t: None,
            b_prime: None,
            priority_bags: None,
            patterns: None,
            integer_variables: None,
            milp_status: None,
            milp_nodes: None,
            stages: Vec::new(),
            outcome: String::new(),
        }
    }

    fn stage(&mut self, stage: &str, makespan: Option<&Rational>, note: Option<String>) {
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            makespan: makespan.map(format_rational),
            note,
        });
    }
}

enum GuessResult {
    Done(Schedule),
    Infeasible,
}

/// Intermediate results of one guess, exposed so tests can check each stage.
#[derive(Debug, Clone)]
pub struct GuessArtifacts {
    pub params: EpsParams,
    pub rounded: crate::preprocess::RoundedInstance,
    pub modified: crate::preprocess::RoundedInstance,
    pub cls: crate::preprocess::BagClassification,
    pub record: crate::transform::TransformRecord,
    pub model: crate::milp::MilpModel,
    pub solution: crate::milp::MilpSolution,
    pub slots: Option<crate::milp::SlotAssignment>,
    pub placed: Option<crate::placement::PartialSchedule>,
    pub origin: Option<crate::placement::OriginMap>,
    pub merged: Vec<crate::placement::MergedJobs>,
    pub modified_schedule: Option<Schedule>,
    pub expanded: Option<(Instance, Schedule)>,
    pub rounded_schedule: Option<Schedule>,
}

fn stage_err(guess: &Rational, stage: &str, e: impl std::fmt::Display) -> SolveError {
    SolveError::Stage {
        guess: format_rational(guess),
        stage: stage.to_string(),
        message: e.to_string(),
    }
}

/// Runs every stage at one guess. When the program is infeasible the
/// artifacts stop after the solve and carry no schedules.
pub fn run_guess(
    instance: &Instance,
    eps: &Rational,
    guess: &Rational,
    config: &SolveConfig,
    trace: &mut GuessTrace,
) -> Result<GuessArtifacts, SolveError> {
    let rounded = scale_and_round(instance, guess, eps)?;
    trace.stage("scale_and_round", Some(&rounded.instance.max_size()), None);
    let k = select_k(&rounded, eps)?;
    trace.k = Some(k);
    let params = EpsParams::for_instance(&rounded, eps, k, config.force_b_prime);
    trace.t = Some(format_rational(&params.t));
    trace.b_prime = Some(params.b_prime.to_string());
    trace.stage("select_k", None, Some(format!("k = {k}")));
    let cls = classify(&rounded, &params);
    trace.priority_bags = Some(cls.priority.len());
    trace.stage("classify", None, Some(format!("{} priority bags", cls.priority.len())));
    let (modified, record) = transform(&rounded, &cls, &params).map_err(|e| stage_err(guess, "transform", e))?;
    trace.stage(
        "transform",
        None,
        Some(format!(
            "{} split bags, {} fillers, {} medium jobs removed",
            record.split_bags.len(),
            record.filler_map.len(),
            record.removed_medium_count()
        )),
    );
    let patterns = enumerate_patterns(
        &params,
        &x_slot_sizes(&modified.instance, &cls, &params),
        &priority_slot_sizes(&modified.instance, &cls, &params),
        config.pattern_budget,
    )
    .map_err(|_| SolveError::PatternBudgetExceeded {
        guess: format_rational(guess),
        stage: "enumerate_patterns".into(),
        cap: config.pattern_budget,
    })?;
    trace.patterns = Some(patterns.len());
    trace.stage("enumerate_patterns", None, Some(format!("{} patterns", patterns.len())));
    let model = build_milp(&modified.instance, &patterns, &params, &cls);
    trace.integer_variables = Some(count_integer_variables(&model));
    trace.stage(
        "build_milp",
        None,
        Some(format!("{} variables, {} rows", model.num_vars(), model.rows.len())),
    );
    let solution = solve_milp(&model, config.node_budget);
    trace.milp_status = Some(solution.status);
    trace.milp_nodes = Some(solution.nodes);
    trace.stage("solve_milp", None, Some(format!("{:?} after {} nodes", solution.status, solution.nodes)));
    let mut art = GuessArtifacts {
        params,
        rounded,
        modified,
        cls,
        record,
        model,
        solution,
        slots: None,
        placed: None,
        origin: None,
        merged: Vec::new(),
        modified_schedule: None,
        expanded: None,
        rounded_schedule: None,
    };
    match art.solution.status {
        MilpStatus::Feasible => {}
        MilpStatus::Infeasible => return Ok(art),
        MilpStatus::BudgetExceeded => {
            return Err(SolveError::BudgetExceeded {
                guess: format_rational(guess),
                stage: "solve_milp".into(),
                budget: config.node_budget,
            })
        }
    }
    let modified = &art.modified.instance;
    let slots = assign_slots(&art.model, &art.solution, modified, &art.cls, &art.params)
        .map_err(|e: MilpError| stage_err(guess, "assign_slots", e))?;
    trace.stage("assign_slots", None, Some(format!("{} X slots", slots.x_slot_count())));
    let place = |stage: &str, e: PlacementError| stage_err(guess, stage, e);
    let (partial, origin) =
        place_large_medium(&slots, modified, &art.cls, &art.params).map_err(|e| place("place_large_medium", e))?;
    trace.stage("place_large_medium", partial.loads.iter().max(), None);
    let groups = group_machines(&partial, eps);
    let chunks = group_bag_lpt(&groups, &nonpriority_small_bags(modified, &art.cls, &art.params))
        .map_err(|e| place("group_bag_lpt", e))?;
    trace.stage("group_machines", None, Some(format!("{} groups", groups.len())));
    let partial = place_nonpriority_small(&partial, &groups, &chunks).map_err(|e| place("place_nonpriority_small", e))?;
    trace.stage("place_nonpriority_small", partial.heights().iter().max(), None);
    let (partial, merged) = place_priority_small(&partial, &slots, modified, &art.cls, &art.params)
        .map_err(|e| place("place_priority_small", e))?;
    trace.stage("place_priority_small", partial.loads.iter().max(), None);
    let resolved =
        resolve_conflicts(&partial, modified, &origin, &art.params).map_err(|e| place("resolve_conflicts", e))?;
    let sched = resolved.to_schedule();
    let report = validate_schedule(modified, &sched)?;
    if !report.feasible {
        return Err(stage_err(
            guess,
            "resolve_conflicts",
            format!("{} conflicts remain", report.conflicts.len()),
        ));
    }
    trace.stage("resolve_conflicts", Some(&report.makespan), None);
    let expanded = add_medium_jobs(modified, &sched, &art.record).map_err(|e| stage_err(guess, "add_medium_jobs", e))?;
    let expanded_inst = expanded_instance(&art.rounded.instance, modified, &art.record)
        .map_err(|e: TransformError| stage_err(guess, "add_medium_jobs", e))?;
    trace.stage("add_medium_jobs", Some(&makespan(&expanded_inst, &expanded)?), None);
    let stripped = strip_fillers(&art.rounded.instance, &expanded, &art.record, &art.params)
        .map_err(|e| stage_err(guess, "strip_fillers", e))?;
    trace.stage("strip_fillers", Some(&makespan(&art.rounded.instance, &stripped)?), None);
    art.slots = Some(slots);
    art.placed = Some(resolved);
    art.origin = Some(origin);
    art.merged = merged;
    art.modified_schedule = Some(sched);
    art.expanded = Some((expanded_inst, expanded));
    art.rounded_schedule = Some(stripped);
    Ok(art)
}

fn attempt(
    instance: &Instance,
    eps: &Rational,
    guess: &Rational,
    config: &SolveConfig,
    trace: &mut GuessTrace,
) -> Result<GuessResult, SolveError> {
    let art = run_guess(instance, eps, guess, config, trace)?;
    let Some(schedule) = art.rounded_schedule else {
        return Ok(GuessResult::Infeasible);
    };
    // Job ids are shared with the original instance, so the schedule carries
    // over unchanged; only the sizes differ.
    let report = validate_schedule(instance, &schedule)?;
    if !report.feasible {
        return Err(stage_err(guess, "unround", "schedule infeasible on the original instance"));
    }
    trace.stage("unround", Some(&report.makespan), None);
    Ok(GuessResult::Done(schedule))
}

/// Approximation scheme entry point: tries the guess grid in ascending order
/// and returns the first schedule the pipeline completes.
pub fn eptas_solve(
    instance: &Instance,
    eps: &Rational,
    config: &SolveConfig,
) -> Result<(Schedule, PipelineTrace), SolveError> {
    let mut trace = PipelineTrace::new(eps);
    let schedule = solve_into(instance, eps, config, &mut trace)?;
    Ok((schedule, trace))
}

/// [`eptas_solve`] writing into a caller-owned trace, which keeps the stages
/// that ran when an error ends the solve.
pub fn solve_into(
    instance: &Instance,
    eps: &Rational,
    config: &SolveConfig,
    trace: &mut PipelineTrace,
) -> Result<Schedule, SolveError> {
    unit_fraction_denominator(eps)?;
    if let Some((bag, members)) = instance
        .bags()
        .into_iter()
        .find(|(_, v)| v.len() > instance.machines())
    {
        return Err(SolveError::InfeasibleBag {
            bag,
            jobs: members.len(),
            machines: instance.machines(),
        });
    }
    if instance.jobs().is_empty() {
        trace.makespan = Some("0".into());
        return Ok(Schedule::default());
    }
    let (lower, upper) = bounds(instance)?;
    trace.lower = Some(format_rational(&lower));
    trace.upper = Some(format_rational(&upper));
    for guess in guess_grid(&lower, &upper, eps) {
        let mut g = GuessTrace::new(&guess);
        let result = attempt(instance, eps, &guess, config, &mut g);
        match result {
            Ok(GuessResult::Done(schedule)) => {
                g.outcome = "accepted".into();
                trace.guesses.push(g);
                trace.accepted = Some(format_rational(&guess));
                trace.makespan = Some(format_rational(&makespan(instance, &schedule)?));
                return Ok(schedule);
            }
            Ok(GuessResult::Infeasible) => {
                g.outcome = "milp infeasible".into();
                trace.guesses.push(g);
            }
            Err(e) => {
                g.outcome = format!("error: {e}");
                trace.guesses.push(g);
                return Err(e);
            }
        }
    }
    Err(SolveError::GridExhausted)
}
