use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bagsched::baselines::{brute_force, global_bag_lpt, BaselineError};
use bagsched::harness::{
    bench, generate, parse_instance, parse_schedule, render_table, run_guess, solve_into, to_json_lines,
    write_instance, write_schedule, Algorithm, GeneratorSpec, GuessTrace, PipelineTrace, SizeDistribution,
    SolveConfig, SolveError,
};
use bagsched::milp::{export_lp, DEFAULT_NODE_BUDGET, DEFAULT_PATTERN_CAP};
use bagsched::model::{format_rational, makespan, parse_rational, validate_schedule, Instance, Rational};
use bagsched::preprocess::unit_fraction_denominator;
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_PARSE: u8 = 4;

#[derive(Parser)]
#[command(name = "bagsched", version, about = "Makespan scheduling with bag constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Eptas,
    Lpt,
    Brute,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Eptas => Algorithm::Eptas,
            AlgorithmArg::Lpt => Algorithm::Lpt,
            AlgorithmArg::Brute => Algorithm::Brute,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the schedule as JSON.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "eptas")]
        algorithm: AlgorithmArg,
        /// Accuracy, as a unit fraction `1/t`.
        #[arg(long, default_value = "1/2")]
        eps: String,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u64,
        #[arg(long, default_value_t = DEFAULT_PATTERN_CAP)]
        pattern_budget: usize,
        /// Override the priority cut-off so the non-priority paths run on
        /// small instances.
        #[arg(long)]
        force_bprime: Option<usize>,
        /// Write the pipeline trace here (eptas only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the pattern program at the accepted guess in LP format.
        #[arg(long)]
        lp_export: Option<PathBuf>,
        /// Write the schedule here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a schedule against an instance.
    Validate { instance: PathBuf, schedule: PathBuf },
    /// Generate a seeded random instance.
    Gen {
        #[arg(long)]
        jobs: usize,
        #[arg(long)]
        machines: usize,
        #[arg(long)]
        bags: usize,
        /// `uniform:DEN:MAXNUM`, `bimodal:DEN:PERCENT` or `powers:T:MAXEXP`.
        #[arg(long, default_value = "uniform:10:10")]
        sizes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep every bag at most `machines` jobs.
        #[arg(long)]
        feasible: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run algorithms over instance files or directories of them.
    Bench {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "eptas,lpt")]
        algorithms: Vec<AlgorithmArg>,
        #[arg(long, value_delimiter = ',', default_value = "1/2")]
        eps: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u64,
        #[arg(long)]
        force_bprime: Option<usize>,
        /// Write JSON-lines rows here.
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
    /// Pretty-print a pipeline trace.
    Explain { trace: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl std::fmt::Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::InfeasibleBag { .. } => EXIT_INFEASIBLE,
            SolveError::BudgetExceeded { .. } | SolveError::PatternBudgetExceeded { .. } => EXIT_BUDGET,
            SolveError::Preprocess(_) => EXIT_PARSE,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

impl From<BaselineError> for Failure {
    fn from(e: BaselineError) -> Self {
        let code = match e {
            BaselineError::InfeasibleBag { .. } => EXIT_INFEASIBLE,
            BaselineError::BudgetExceeded(_) => EXIT_BUDGET,
        };
        Failure::new(code, e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    parse_instance(&read(path)?).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn parse_eps(s: &str) -> Result<Rational, Failure> {
    let eps = parse_rational(s).map_err(|e| Failure::new(EXIT_PARSE, e))?;
    unit_fraction_denominator(&eps).map_err(|e| Failure::new(EXIT_PARSE, e))?;
    Ok(eps)
}

fn parse_sizes(s: &str) -> Result<SizeDistribution, Failure> {
    let bad = || Failure::new(EXIT_PARSE, format!("bad size distribution {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [kind, a, b] = parts.as_slice() else {
        return Err(bad());
    };
    let a: u32 = a.parse().map_err(|_| bad())?;
    let b: u32 = b.parse().map_err(|_| bad())?;
    match *kind {
        "uniform" => Ok(SizeDistribution::UniformGrid { den: a, max_num: b }),
        "bimodal" => Ok(SizeDistribution::Bimodal { den: a, large_percent: b }),
        "powers" => Ok(SizeDistribution::Powers { t: a, max_exp: b }),
        _ => Err(bad()),
    }
}

fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<(String, Instance)>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    files
        .iter()
        .map(|f| Ok((f.display().to_string(), load_instance(f)?)))
        .collect()
}

fn solve(
    path: &Path,
    algorithm: AlgorithmArg,
    eps: &str,
    config: SolveConfig,
    trace_path: Option<&Path>,
    lp_path: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let instance = load_instance(path)?;
    let eps = parse_eps(eps)?;
    let schedule = match algorithm {
        AlgorithmArg::Eptas => {
            let mut trace = PipelineTrace::new(&eps);
            let result = solve_into(&instance, &eps, &config, &mut trace);
            if let Some(p) = trace_path {
                write_out(Some(p), &trace.to_json())?;
            }
            let schedule = result?;
            if let (Some(p), Some(guess)) = (lp_path, &trace.accepted) {
                let guess = parse_rational(guess).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
                let art = run_guess(&instance, &eps, &guess, &config, &mut GuessTrace::new(&guess))?;
                write_out(Some(p), &export_lp(&art.model))?;
            }
            schedule
        }
        AlgorithmArg::Lpt => global_bag_lpt(&instance)?,
        AlgorithmArg::Brute => brute_force(&instance, config.node_budget)?.schedule,
    };
    let ms = makespan(&instance, &schedule).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    eprintln!("makespan {}", format_rational(&ms));
    write_out(output, &write_schedule(&schedule))
}

fn validate(instance: &Path, schedule: &Path) -> Result<(), Failure> {
    let inst = load_instance(instance)?;
    let sched = parse_schedule(&read(schedule)?)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", schedule.display())))?;
    let report = validate_schedule(&inst, &sched).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    for c in &report.conflicts {
        let jobs: Vec<&str> = c.jobs.iter().map(|j| j.0.as_str()).collect();
        println!("conflict: machine {} bag {} jobs {}", c.machine, c.bag, jobs.join(", "));
    }
    for (i, load) in report.per_machine_load.iter().enumerate() {
        println!("machine {i}: load {}", format_rational(load));
    }
    println!("makespan {}", format_rational(&report.makespan));
    if report.feasible {
        println!("feasible");
        Ok(())
    } else {
        Err(Failure::new(EXIT_FAILURE, "schedule violates bag constraints"))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            instance,
            algorithm,
            eps,
            node_budget,
            pattern_budget,
            force_bprime,
            trace,
            lp_export,
            output,
        } => solve(
            &instance,
            algorithm,
            &eps,
            SolveConfig {
                node_budget,
                pattern_budget,
                force_b_prime: force_bprime,
            },
            trace.as_deref(),
            lp_export.as_deref(),
            output.as_deref(),
        ),
        Command::Validate { instance, schedule } => validate(&instance, &schedule),
        Command::Gen {
            jobs,
            machines,
            bags,
            sizes,
            seed,
            feasible,
            output,
        } => {
            let spec = GeneratorSpec {
                jobs,
                machines,
                bags,
                sizes: parse_sizes(&sizes)?,
                seed,
                feasible,
            };
            let inst = generate(&spec).map_err(|e| Failure::new(EXIT_PARSE, e))?;
            write_out(output.as_deref(), &write_instance(&inst))
        }
        Command::Bench {
            inputs,
            algorithms,
            eps,
            node_budget,
            force_bprime,
            jsonl,
        } => {
            let corpus = collect_inputs(&inputs)?;
            let eps: Vec<Rational> = eps.iter().map(|e| parse_eps(e)).collect::<Result<_, _>>()?;
            let algorithms: Vec<Algorithm> = algorithms.into_iter().map(Algorithm::from).collect();
            let config = SolveConfig {
                node_budget,
                force_b_prime: force_bprime,
                ..SolveConfig::default()
            };
            let rows = bench(&corpus, &algorithms, &eps, &config);
            if let Some(p) = jsonl {
                write_out(Some(&p), &to_json_lines(&rows))?;
            }
            print!("{}", render_table(&rows));
            Ok(())
        }
        Command::Explain { trace } => {
            let t = PipelineTrace::from_json(&read(&trace)?)
                .map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", trace.display())))?;
            print!("{}", t.explain());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
