use std::path::PathBuf;

use bagsched::harness::{
    eptas_solve, generate, parse_instance, write_instance, GeneratorSpec, PipelineTrace, SizeDistribution,
    SolveConfig, SolveError,
};
use bagsched::model::{int, makespan, rat, validate_schedule, Instance, Job, Rational};
use bagsched::brute_force;

const PIPELINE_STAGES: [&str; 16] = [
    "scale_and_round",
    "select_k",
    "classify",
    "transform",
    "enumerate_patterns",
    "build_milp",
    "solve_milp",
    "assign_slots",
    "place_large_medium",
    "group_machines",
    "place_nonpriority_small",
    "place_priority_small",
    "resolve_conflicts",
    "add_medium_jobs",
    "strip_fillers",
    "unround",
];

fn corpus() -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    assert!(!files.is_empty());
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect()
}

#[test]
fn corpus_files_round_trip_exactly() {
    for (path, text) in corpus() {
        let inst = parse_instance(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(write_instance(&inst), text, "{}", path.display());
    }
}

fn check_trace(trace: &PipelineTrace) {
    let (last, earlier) = trace.guesses.split_last().expect("at least one guess");
    assert_eq!(last.outcome, "accepted");
    assert_eq!(trace.accepted.as_ref(), Some(&last.guess));
    for g in earlier {
        assert_eq!(g.outcome, "milp infeasible");
    }
    for g in &trace.guesses {
        let names: Vec<&str> = g.stages.iter().map(|s| s.stage.as_str()).collect();
        let expected = &PIPELINE_STAGES[..names.len()];
        assert_eq!(names, expected, "stages out of order at guess {}", g.guess);
    }
    assert_eq!(last.stages.len(), PIPELINE_STAGES.len());
}

fn solve_checked(inst: &Instance, eps: &Rational, config: &SolveConfig) -> Rational {
    let (sched, trace) = eptas_solve(inst, eps, config).unwrap();
    assert!(validate_schedule(inst, &sched).unwrap().feasible);
    check_trace(&trace);
    assert_eq!(PipelineTrace::from_json(&trace.to_json()).unwrap(), trace);
    makespan(inst, &sched).unwrap()
}

#[test]
fn corpus_solves_within_the_tracked_constant() {
    for (path, text) in corpus() {
        let inst = parse_instance(&text).unwrap();
        let opt = brute_force(&inst, 10_000_000).unwrap().makespan;
        for t in [2, 3] {
            let eps = rat(1, t);
            for force in [None, Some(0), Some(1)] {
                let config = SolveConfig {
                    force_b_prime: force,
                    ..SolveConfig::default()
                };
                let ms = solve_checked(&inst, &eps, &config);
                assert!(ms <= (int(1) + int(10) * &eps) * &opt, "{} eps 1/{t}", path.display());
            }
        }
    }
}

#[test]
fn same_bag_pair_on_two_machines() {
    let inst = Instance::new(2, vec![Job::new("a", rat(1, 2), "B"), Job::new("b", rat(1, 2), "B")]).unwrap();
    let ms = solve_checked(&inst, &rat(1, 2), &SolveConfig::default());
    assert!(ms <= (int(1) + int(10) * rat(1, 2)) * rat(1, 2));
}

#[test]
fn single_job_is_exact() {
    let inst = Instance::new(3, vec![Job::new("a", rat(7, 10), "B")]).unwrap();
    for t in [2, 3, 5] {
        assert_eq!(solve_checked(&inst, &rat(1, t), &SolveConfig::default()), rat(7, 10));
    }
}

#[test]
fn eight_random_jobs_against_the_oracle() {
    for seed in 0..10 {
        let inst = generate(&GeneratorSpec {
            jobs: 8,
            machines: 3,
            bags: 3,
            sizes: SizeDistribution::UniformGrid { den: 10, max_num: 10 },
            seed,
            feasible: true,
        })
        .unwrap();
        let opt = brute_force(&inst, 10_000_000).unwrap().makespan;
        let eps = rat(1, 2);
        let ms = solve_checked(&inst, &eps, &SolveConfig::default());
        assert!(ms <= (int(1) + int(10) * &eps) * &opt);
    }
}

#[test]
fn errors_surface_instead_of_schedules() {
    let crowded = Instance::new(1, vec![Job::new("a", int(1), "B"), Job::new("b", int(1), "B")]).unwrap();
    assert!(matches!(
        eptas_solve(&crowded, &rat(1, 2), &SolveConfig::default()),
        Err(SolveError::InfeasibleBag { .. })
    ));
    let inst = Instance::new(2, vec![Job::new("a", int(1), "B"), Job::new("b", int(1), "C")]).unwrap();
    assert!(matches!(eptas_solve(&inst, &rat(2, 3), &SolveConfig::default()), Err(SolveError::Preprocess(_))));
    let tight = SolveConfig {
        node_budget: 1,
        ..SolveConfig::default()
    };
    assert!(matches!(eptas_solve(&inst, &rat(1, 2), &tight), Err(SolveError::BudgetExceeded { .. })));
    let few_patterns = SolveConfig {
        pattern_budget: 1,
        ..SolveConfig::default()
    };
    assert!(matches!(
        eptas_solve(&inst, &rat(1, 2), &few_patterns),
        Err(SolveError::PatternBudgetExceeded { .. })
    ));
}

#[test]
fn empty_instance_has_makespan_zero() {
    let inst = Instance::new(2, vec![]).unwrap();
    let (sched, _) = eptas_solve(&inst, &rat(1, 2), &SolveConfig::default()).unwrap();
    assert!(sched.assignment.is_empty());
}

#[test]
fn explain_mentions_every_stage() {
    let inst = Instance::new(2, vec![Job::new("a", rat(1, 2), "B"), Job::new("b", rat(1, 3), "C")]).unwrap();
    let (_, trace) = eptas_solve(&inst, &rat(1, 2), &SolveConfig::default()).unwrap();
    let text = trace.explain();
    for stage in PIPELINE_STAGES {
        assert!(text.contains(stage), "{stage} missing");
    }
}
