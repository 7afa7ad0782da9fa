//! Depth-first branch-and-bound for mixed-integer feasibility over the exact
//! LP relaxation.

use num_traits::Signed;

use super::lp::LinearSystem;
use crate::model::{rat, Rational};

/// Node allowance shared by every search that draws from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Budget {
    pub limit: u64,
    pub used: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { limit, used: 0 }
    }

    /// Counts one node; `false` once the allowance is exhausted.
    pub fn tick(&mut self) -> bool {
        if self.used >= self.limit {
            return false;
        }
        self.used += 1;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Feasible(Vec<Rational>),
    Infeasible,
    BudgetExceeded,
}

/// What a caller says about an integral relaxation point.
pub enum LeafVerdict {
    Accept(Vec<Rational>),
    Reject,
    /// The leaf check itself ran out of budget.
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedIntegerSystem {
    pub system: LinearSystem,
    pub integer: Vec<bool>,
}

fn is_integral(v: &Rational) -> bool {
    v.is_integer()
}

/// Plain feasibility search: the first integral relaxation point wins.
pub fn branch_and_bound(problem: &MixedIntegerSystem, budget: &mut Budget) -> SearchOutcome {
    search(problem, budget, |x, _| LeafVerdict::Accept(x.to_vec()))
}

/// Branch-and-bound where integral relaxation points are handed to `leaf`,
/// which may draw on the same budget.
/// A rejected point is cut out by a disjunction over the free integer
/// variables, so the search stays complete and never revisits it.
pub fn search(
    problem: &MixedIntegerSystem,
    budget: &mut Budget,
    mut leaf: impl FnMut(&[Rational], &mut Budget) -> LeafVerdict,
) -> SearchOutcome {
    let half = rat(1, 2);
    let mut stack: Vec<(Vec<Rational>, Vec<Option<Rational>>)> =
        vec![(problem.system.lower.clone(), problem.system.upper.clone())];
    while let Some((lower, upper)) = stack.pop() {
        if !budget.tick() {
            return SearchOutcome::BudgetExceeded;
        }
        let mut node = problem.system.clone();
        node.lower = lower;
        node.upper = upper;
        let Some(x) = node.feasible_point() else {
            continue;
        };
        // Most fractional integer variable; ties go to the lowest index.
        let mut branch: Option<(usize, Rational)> = None;
        for (j, v) in x.iter().enumerate() {
            if !problem.integer[j] || is_integral(v) {
                continue;
            }
            let frac = v - v.floor();
            let dist = (&frac - &half).abs();
            if branch.as_ref().is_none_or(|(_, best)| dist < *best) {
                branch = Some((j, dist));
            }
        }
        match branch {
            Some((j, _)) => {
                let down = x[j].floor();
                let up = x[j].ceil();
                let frac = &x[j] - &down;
                let mut lo_child = (node.lower.clone(), node.upper.clone());
                lo_child.1[j] = Some(down);
                let mut hi_child = (node.lower, node.upper);
                hi_child.0[j] = up;
                // Nearest rounding is explored first.
                if frac >= half {
                    stack.push(lo_child);
                    stack.push(hi_child);
                } else {
                    stack.push(hi_child);
                    stack.push(lo_child);
                }
            }
            None => match leaf(&x, budget) {
                LeafVerdict::Accept(sol) => return SearchOutcome::Feasible(sol),
                LeafVerdict::Abort => return SearchOutcome::BudgetExceeded,
                LeafVerdict::Reject => {
                    // Exclude exactly this point: child i fixes the earlier
                    // free variables at their values and moves variable i off
                    // its value. Variables away from their lower bound come
                    // first, where the alternatives are likeliest.
                    let mut free: Vec<usize> = (0..x.len())
                        .filter(|&j| {
                            problem.integer[j] && node.upper[j].as_ref().is_none_or(|u| u > &node.lower[j])
                        })
                        .collect();
                    free.sort_by_key(|&j| x[j] == node.lower[j]);
                    let one = Rational::from_integer(1.into());
                    let (mut lower, mut upper) = (node.lower, node.upper);
                    let mut children = Vec::new();
                    for j in free {
                        let v = x[j].clone();
                        if v > lower[j] {
                            let mut below = (lower.clone(), upper.clone());
                            below.1[j] = Some(&v - &one);
                            children.push(below);
                        }
                        if upper[j].as_ref().is_none_or(|u| u > &v) {
                            let mut above = (lower.clone(), upper.clone());
                            above.0[j] = &v + &one;
                            children.push(above);
                        }
                        lower[j] = v.clone();
                        upper[j] = Some(v);
                    }
                    stack.extend(children.into_iter().rev());
                }
            },
        }
    }
    SearchOutcome::Infeasible
}

pub fn values_are_integral(values: &[Rational], integer: &[bool]) -> bool {
    values
        .iter()
        .zip(integer)
        .all(|(v, &int)| !int || v.is_integer())
}
