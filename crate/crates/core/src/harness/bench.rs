//! Corpus benchmark report: one row per (instance, algorithm, eps).

use std::time::Instant;

use serde::Serialize;

use super::pipeline::{eptas_solve, SolveConfig};
use crate::baselines::{brute_force, global_bag_lpt};
use crate::model::{format_rational, makespan, to_f64, validate_schedule, Instance, Rational};
use crate::preprocess::bounds;

/// Largest job count for which rows get an exact reference.
pub const BRUTE_FORCE_MAX_JOBS: usize = 12;
pub const BRUTE_FORCE_NODES: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Eptas,
    Lpt,
    Brute,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Eptas => "eptas",
            Algorithm::Lpt => "lpt",
            Algorithm::Brute => "brute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub algorithm: Algorithm,
    pub eps: Option<String>,
    pub makespan: Option<String>,
    pub reference: Option<String>,
    /// `opt` for a brute-force optimum, `lower_bound` otherwise.
    pub reference_kind: String,
    pub ratio: Option<f64>,
    pub wall_ms: f64,
    pub summary: Option<String>,
    pub error: Option<String>,
}

fn reference(instance: &Instance) -> (Option<Rational>, String) {
    if instance.jobs().len() <= BRUTE_FORCE_MAX_JOBS {
        if let Ok(opt) = brute_force(instance, BRUTE_FORCE_NODES) {
            return (Some(opt.makespan), "opt".into());
        }
    }
    (bounds(instance).ok().map(|(l, _)| l), "lower_bound".into())
}

fn run_one(
    instance: &Instance,
    algorithm: Algorithm,
    eps: &Rational,
    config: &SolveConfig,
) -> Result<(Rational, Option<String>), String> {
    let (schedule, summary) = match algorithm {
        Algorithm::Eptas => {
            let (s, t) = eptas_solve(instance, eps, config).map_err(|e| e.to_string())?;
            let summary = format!(
                "accepted guess {} after {} guesses",
                t.accepted.unwrap_or_else(|| "-".into()),
                t.guesses.len()
            );
            (s, Some(summary))
        }
        Algorithm::Lpt => (global_bag_lpt(instance).map_err(|e| e.to_string())?, None),
        Algorithm::Brute => {
            let r = brute_force(instance, BRUTE_FORCE_NODES).map_err(|e| e.to_string())?;
            (r.schedule, Some(format!("{} nodes", r.nodes_explored)))
        }
    };
    let report = validate_schedule(instance, &schedule).map_err(|e| e.to_string())?;
    if !report.feasible {
        return Err("infeasible schedule".into());
    }
    Ok((makespan(instance, &schedule).map_err(|e| e.to_string())?, summary))
}

/// Runs every algorithm on every instance; eps only matters for the
/// approximation scheme, the other algorithms get one row per instance.
/// Failures are recorded in the row and the run continues.
pub fn bench(
    corpus: &[(String, Instance)],
    algorithms: &[Algorithm],
    eps_list: &[Rational],
    config: &SolveConfig,
) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for (name, instance) in corpus {
        let (reference, reference_kind) = reference(instance);
        for &algorithm in algorithms {
            let eps_values: Vec<Option<&Rational>> = if algorithm == Algorithm::Eptas {
                eps_list.iter().map(Some).collect()
            } else {
                vec![None]
            };
            for eps in eps_values {
                let start = Instant::now();
                let half = Rational::new(1.into(), 2.into());
                let result = run_one(instance, algorithm, eps.unwrap_or(&half), config);
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                let (makespan, summary, error) = match result {
                    Ok((m, s)) => (Some(m), s, None),
                    Err(e) => (None, None, Some(e)),
                };
                let ratio = match (&makespan, &reference) {
                    (Some(m), Some(r)) if r > &Rational::from_integer(0.into()) => Some(to_f64(&(m / r))),
                    (Some(_), Some(_)) => Some(1.0),
                    _ => None,
                };
                rows.push(BenchRow {
                    instance: name.clone(),
                    algorithm,
                    eps: eps.map(format_rational),
                    makespan: makespan.as_ref().map(format_rational),
                    reference: reference.as_ref().map(format_rational),
                    reference_kind: reference_kind.clone(),
                    ratio,
                    wall_ms,
                    summary,
                    error,
                });
            }
        }
    }
    rows
}

pub fn to_json_lines(rows: &[BenchRow]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
        .collect()
}

pub fn render_table(rows: &[BenchRow]) -> String {
    let header = ["instance", "algorithm", "eps", "makespan", "reference", "ratio", "ms", "note"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.instance.clone(),
                r.algorithm.name().to_string(),
                r.eps.clone().unwrap_or_else(|| "-".into()),
                r.makespan.clone().unwrap_or_else(|| "-".into()),
                r.reference
                    .as_ref()
                    .map(|v| format!("{v} ({})", r.reference_kind))
                    .unwrap_or_else(|| "-".into()),
                r.ratio.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into()),
                format!("{:.1}", r.wall_ms),
                r.error.clone().or_else(|| r.summary.clone()).unwrap_or_default(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in &body {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}
