//! Feasibility solving of the pattern program.
//!
//! The search runs in two levels. The outer level branches over the pattern
//! counts `x` against rows (1), (2) and three aggregates implied by rows
//! (3)-(5): total small area, per-bag small area and per-bag small count. Each
//! integral outer point fixes `x`; the remaining system over the small
//! variables of the used patterns is then solved on its own. A failed inner
//! solve rejects the outer point and the outer search moves on, so the pair is
//! exactly as complete as one search over the whole program.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use super::bnb::{branch_and_bound, search, Budget, LeafVerdict, MixedIntegerSystem, SearchOutcome};
use super::lp::{Constraint, LinearSystem, Sense};
use super::model::{MilpModel, RowFamily, VarKind};
use crate::model::{BagId, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MilpStatus {
    Feasible,
    Infeasible,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// One value per model variable; empty unless feasible.
    pub values: Vec<Rational>,
    pub nodes: u64,
}

impl MilpSolution {
    pub fn x(&self, model: &MilpModel, pattern: usize) -> Rational {
        self.values[model.pattern_var[pattern]].clone()
    }

    pub fn y(&self, model: &MilpModel, pattern: usize, bag: &BagId, size: &Rational) -> Rational {
        model
            .small_var
            .get(&(pattern, bag.clone(), size.clone()))
            .map_or_else(Rational::zero, |&v| self.values[v].clone())
    }
}

fn small_demand(model: &MilpModel) -> BTreeMap<(BagId, Rational), Rational> {
    model
        .rows
        .iter()
        .filter_map(|r| match &r.family {
            RowFamily::SmallCoverage { bag, size } => Some(((bag.clone(), size.clone()), r.rhs.clone())),
            _ => None,
        })
        .collect()
}

fn outer_system(model: &MilpModel) -> MixedIntegerSystem {
    let np = model.patterns.len();
    // Row (1) already caps every count at `m`, so no explicit bounds.
    let mut sys = LinearSystem::new(np);
    let to_outer = |v: usize| match model.vars[v].kind {
        VarKind::PatternCount { pattern } => pattern,
        VarKind::SmallOnPattern { .. } => unreachable!("small variable in outer row"),
    };
    for row in &model.rows {
        if matches!(row.family, RowFamily::MachineCount | RowFamily::SlotCoverage { .. }) {
            sys.push(Constraint::new(
                row.terms.iter().map(|(v, a)| (to_outer(*v), a.clone())).collect(),
                row.sense,
                row.rhs.clone(),
            ));
        }
    }
    let demand = small_demand(model);
    if !demand.is_empty() {
        let room: Vec<Rational> = model.patterns.iter().map(|p| &model.t - p.height()).collect();
        let area: Rational = demand.iter().map(|((_, s), n)| s * n).sum();
        sys.push(Constraint::new(
            room.iter().cloned().enumerate().collect(),
            Sense::Ge,
            area,
        ));
        let bags: BTreeSet<&BagId> = demand.keys().map(|(b, _)| b).collect();
        for bag in bags {
            let open: Vec<usize> = (0..np).filter(|&p| model.patterns[p].chi_bag(bag) == 0).collect();
            let count: Rational = demand.iter().filter(|((b, _), _)| b == bag).map(|(_, n)| n).sum();
            let bag_area: Rational = demand
                .iter()
                .filter(|((b, _), _)| b == bag)
                .map(|((_, s), n)| s * n)
                .sum();
            sys.push(Constraint::new(
                open.iter().map(|&p| (p, Rational::one())).collect(),
                Sense::Ge,
                count,
            ));
            sys.push(Constraint::new(
                open.iter().map(|&p| (p, room[p].clone())).collect(),
                Sense::Ge,
                bag_area,
            ));
        }
    }
    MixedIntegerSystem {
        system: sys,
        integer: vec![true; np],
    }
}

/// The program over small variables once every `x_p` is fixed. Returns the
/// variable index map back into the model.
fn inner_system(model: &MilpModel, x: &[Rational]) -> (MixedIntegerSystem, Vec<usize>) {
    let mut index: Vec<usize> = Vec::new();
    let mut local: BTreeMap<usize, usize> = BTreeMap::new();
    for (v, var) in model.vars.iter().enumerate() {
        if let VarKind::SmallOnPattern { pattern, .. } = var.kind {
            if !x[pattern].is_zero() {
                local.insert(v, index.len());
                index.push(v);
            }
        }
    }
    let mut sys = LinearSystem::new(index.len());
    for row in &model.rows {
        if matches!(row.family, RowFamily::MachineCount | RowFamily::SlotCoverage { .. }) {
            continue;
        }
        let mut rhs = row.rhs.clone();
        let mut terms = Vec::new();
        for (v, a) in &row.terms {
            match model.vars[*v].kind {
                VarKind::PatternCount { pattern } => rhs -= a * &x[pattern],
                VarKind::SmallOnPattern { .. } => {
                    if let Some(&l) = local.get(v) {
                        terms.push((l, a.clone()));
                    }
                }
            }
        }
        if terms.is_empty() {
            // Rows over unused patterns reduce to 0 <= 0.
            let holds = match row.sense {
                Sense::Le => rhs >= Rational::zero(),
                Sense::Ge => rhs <= Rational::zero(),
                Sense::Eq => rhs.is_zero(),
            };
            if !holds {
                // Keep an unsatisfiable row so the solve reports infeasible.
                sys.push(Constraint::new(Vec::new(), row.sense, rhs));
            }
            continue;
        }
        sys.push(Constraint::new(terms, row.sense, rhs));
    }
    let integer = index.iter().map(|&v| model.vars[v].integer).collect();
    (MixedIntegerSystem { system: sys, integer }, index)
}

/// Exact feasibility decision for the model within `node_budget` search
/// nodes, counted across both levels.
pub fn solve_milp(model: &MilpModel, node_budget: u64) -> MilpSolution {
    let mut budget = Budget::new(node_budget);
    let outer = outer_system(model);
    let outcome = search(&outer, &mut budget, |x, budget| {
        let (inner, index) = inner_system(model, x);
        match branch_and_bound(&inner, budget) {
            SearchOutcome::Feasible(ys) => {
                let mut values = vec![Rational::zero(); model.vars.len()];
                for (p, v) in x.iter().enumerate() {
                    values[model.pattern_var[p]] = v.clone();
                }
                for (l, v) in ys.into_iter().enumerate() {
                    values[index[l]] = v;
                }
                LeafVerdict::Accept(values)
            }
            SearchOutcome::Infeasible => LeafVerdict::Reject,
            SearchOutcome::BudgetExceeded => LeafVerdict::Abort,
        }
    });
    let (status, values) = match outcome {
        SearchOutcome::Feasible(values) => (MilpStatus::Feasible, values),
        SearchOutcome::Infeasible => (MilpStatus::Infeasible, Vec::new()),
        SearchOutcome::BudgetExceeded => (MilpStatus::BudgetExceeded, Vec::new()),
    };
    MilpSolution {
        status,
        values,
        nodes: budget.used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::build_milp;
    use crate::milp::pattern::{enumerate_patterns, Pattern, SlotBag};
    use crate::model::{int, rat, Instance, Job};
    use crate::preprocess::{classify, scale_and_round, EpsParams};

    fn model(m: usize, jobs: Vec<Job>) -> MilpModel {
        let inst = Instance::new(m, jobs).unwrap();
        let r = scale_and_round(&inst, &int(1), &rat(1, 2)).unwrap();
        let p = EpsParams::for_instance(&r, &rat(1, 2), 1, None);
        let c = classify(&r, &p);
        let pats = enumerate_patterns(
            &p,
            &super::super::model::x_slot_sizes(&r.instance, &c, &p),
            &super::super::model::priority_slot_sizes(&r.instance, &c, &p),
            100_000,
        )
        .unwrap();
        build_milp(&r.instance, &pats, &p, &c)
    }

    #[test]
    fn two_same_bag_large_jobs_two_machines() {
        let md = model(2, vec![Job::new("a", int(1), "B1"), Job::new("b", int(1), "B1")]);
        let sol = solve_milp(&md, 10_000);
        assert_eq!(sol.status, MilpStatus::Feasible);
        assert!(md.violations(&sol.values).is_empty());
        let single = md
            .patterns
            .iter()
            .position(|p| *p == Pattern::new(vec![(SlotBag::Priority(BagId::from("B1")), int(1))]))
            .unwrap();
        assert_eq!(sol.x(&md, single), int(2));
    }

    #[test]
    fn two_same_bag_large_jobs_one_machine() {
        let md = model(1, vec![Job::new("a", int(1), "B1"), Job::new("b", int(1), "B1")]);
        assert_eq!(solve_milp(&md, 10_000).status, MilpStatus::Infeasible);
    }

    #[test]
    fn empty_instance_is_feasible_at_zero() {
        let md = model(3, vec![]);
        let sol = solve_milp(&md, 100);
        assert_eq!(sol.status, MilpStatus::Feasible);
        assert!(sol.values.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn small_jobs_get_covered() {
        let md = model(
            2,
            vec![
                Job::new("a", int(1), "B1"),
                Job::new("s1", rat(1, 10), "B1"),
                Job::new("s2", rat(1, 10), "B2"),
                Job::new("s3", rat(1, 10), "B2"),
            ],
        );
        let sol = solve_milp(&md, 10_000);
        assert_eq!(sol.status, MilpStatus::Feasible);
        assert!(md.violations(&sol.values).is_empty(), "{:?}", md.violations(&sol.values));
    }

    #[test]
    fn tiny_budget_is_reported() {
        let md = model(2, vec![Job::new("a", int(1), "B1"), Job::new("b", int(1), "B1")]);
        assert_eq!(solve_milp(&md, 1).status, MilpStatus::BudgetExceeded);
    }
}
