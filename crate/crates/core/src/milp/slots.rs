//! Turning a solution of the pattern program into concrete machine slots and
//! a per-pattern plan for small jobs.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::model::MilpModel;
use super::pattern::SlotBag;
use super::solve::{MilpSolution, MilpStatus};
use super::MilpError;
use crate::model::{format_rational, BagId, Instance, JobId, Rational};
use crate::preprocess::{BagClassification, EpsParams, JobClass};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotKind {
    PriorityJob(JobId),
    /// Slot reserved for some non-priority job of the given size.
    X,
    /// Over-covered priority slot that no job fills.
    Unused,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineSlots {
    pub pattern: Option<usize>,
    pub slots: Vec<(SlotKind, Rational)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    pub machines: Vec<MachineSlots>,
    /// Machines realizing each pattern, ascending.
    pub pattern_machines: Vec<Vec<usize>>,
    /// Per (pattern, bag): jobs with the fraction of each placed on the
    /// pattern. Fractions of one job sum to 1 over all patterns.
    pub small_plan: BTreeMap<(usize, BagId), Vec<(JobId, Rational)>>,
    /// Planned priority-bag small area per pattern.
    pub priority_small_area: Vec<Rational>,
}

impl SlotAssignment {
    pub fn x_slot_count(&self) -> usize {
        self.machines
            .iter()
            .flat_map(|m| &m.slots)
            .filter(|(k, _)| *k == SlotKind::X)
            .count()
    }
}

/// Removes the surplus of `values` over `need`, taking continuous entries
/// first and then whole units of integral ones, both from the back. Integral
/// entries stay integral.
fn trim_surplus(values: &mut [Rational], integer: &[bool], need: &Rational) {
    let mut surplus: Rational = values.iter().sum::<Rational>() - need;
    for pass_integer in [false, true] {
        for i in (0..values.len()).rev() {
            if !surplus.is_positive() {
                return;
            }
            if integer[i] != pass_integer {
                continue;
            }
            let cut = values[i].clone().min(surplus.clone());
            let cut = if pass_integer { cut.floor() } else { cut };
            values[i] -= &cut;
            surplus -= cut;
        }
    }
}

pub fn assign_slots(
    model: &MilpModel,
    solution: &MilpSolution,
    modified: &Instance,
    cls: &BagClassification,
    params: &EpsParams,
) -> Result<SlotAssignment, MilpError> {
    if solution.status != MilpStatus::Feasible {
        return Err(MilpError::NotFeasible(solution.status));
    }
    let m = modified.machines();
    let mut machines = Vec::with_capacity(m);
    let mut pattern_machines = vec![Vec::new(); model.patterns.len()];
    for (p, pat) in model.patterns.iter().enumerate() {
        let copies = solution.x(model, p).to_integer();
        let copies = usize::try_from(copies).map_err(|_| MilpError::AssignmentMismatch("x out of range".into()))?;
        for _ in 0..copies {
            pattern_machines[p].push(machines.len());
            machines.push(MachineSlots {
                pattern: Some(p),
                slots: pat
                    .entries
                    .iter()
                    .map(|(b, s)| {
                        let kind = match b {
                            SlotBag::X => SlotKind::X,
                            SlotBag::Priority(_) => SlotKind::Unused,
                        };
                        (kind, s.clone())
                    })
                    .collect(),
            });
        }
    }
    if machines.len() > m {
        return Err(MilpError::AssignmentMismatch(format!(
            "{} machines realize patterns, only {m} exist",
            machines.len()
        )));
    }
    while machines.len() < m {
        machines.push(MachineSlots {
            pattern: None,
            slots: Vec::new(),
        });
    }

    // Priority medium/large jobs, by id, into their slots in machine order.
    let mut ml_jobs: BTreeMap<(BagId, Rational), Vec<&JobId>> = BTreeMap::new();
    let mut small_jobs: BTreeMap<(BagId, Rational), Vec<&JobId>> = BTreeMap::new();
    for j in modified.jobs() {
        match params.class_of(&j.size) {
            JobClass::Small => small_jobs.entry((j.bag.clone(), j.size.clone())).or_default().push(&j.id),
            _ if cls.is_priority(&j.bag) => {
                ml_jobs.entry((j.bag.clone(), j.size.clone())).or_default().push(&j.id)
            }
            _ => {}
        }
    }
    for ((bag, size), jobs) in &mut ml_jobs {
        jobs.sort();
        let mut queue = jobs.iter();
        for ms in &mut machines {
            let Some(p) = ms.pattern else { continue };
            for (i, (b, s)) in model.patterns[p].entries.iter().enumerate() {
                if s == size && matches!(b, SlotBag::Priority(pb) if pb == bag) {
                    if let Some(id) = queue.next() {
                        ms.slots[i].0 = SlotKind::PriorityJob((*id).clone());
                    }
                }
            }
        }
        if queue.next().is_some() {
            return Err(MilpError::AssignmentMismatch(format!(
                "too few slots for bag {bag} size {}",
                format_rational(size)
            )));
        }
    }

    // Small jobs: trim over-coverage, commit whole jobs, then pour the
    // fractional remainders greedily.
    let mut small_plan: BTreeMap<(usize, BagId), Vec<(JobId, Rational)>> = BTreeMap::new();
    let mut priority_small_area = vec![Rational::zero(); model.patterns.len()];
    for ((bag, size), jobs) in &mut small_jobs {
        jobs.sort();
        let vars: Vec<usize> = (0..model.patterns.len())
            .map(|p| model.small_var[&(p, bag.clone(), size.clone())])
            .collect();
        let mut y: Vec<Rational> = vars.iter().map(|&v| solution.values[v].clone()).collect();
        let integer: Vec<bool> = vars.iter().map(|&v| model.vars[v].integer).collect();
        let need = Rational::from_integer(jobs.len().into());
        if y.iter().sum::<Rational>() < need {
            return Err(MilpError::AssignmentMismatch(format!(
                "small jobs of bag {bag} size {} not covered",
                format_rational(size)
            )));
        }
        trim_surplus(&mut y, &integer, &need);
        if cls.is_priority(bag) {
            for (p, v) in y.iter().enumerate() {
                priority_small_area[p] += v * size;
            }
        }
        let mut next = 0usize;
        for (p, v) in y.iter().enumerate() {
            let whole = v.floor().to_integer();
            let whole = usize::try_from(whole).unwrap_or(0);
            for _ in 0..whole {
                small_plan
                    .entry((p, bag.clone()))
                    .or_default()
                    .push((jobs[next].clone(), Rational::from_integer(1.into())));
                next += 1;
            }
        }
        let mut remaining = Rational::from_integer(1.into());
        for (p, v) in y.iter().enumerate() {
            let mut cap = v - v.floor();
            while cap.is_positive() {
                let take = cap.clone().min(remaining.clone());
                small_plan
                    .entry((p, bag.clone()))
                    .or_default()
                    .push((jobs[next].clone(), take.clone()));
                cap -= &take;
                remaining -= &take;
                if remaining.is_zero() {
                    next += 1;
                    remaining = Rational::from_integer(1.into());
                }
            }
        }
        if next != jobs.len() {
            return Err(MilpError::AssignmentMismatch(format!(
                "bag {bag} size {}: {next} of {} small jobs planned",
                format_rational(size),
                jobs.len()
            )));
        }
    }
    for list in small_plan.values_mut() {
        list.sort();
    }
    Ok(SlotAssignment {
        machines,
        pattern_machines,
        small_plan,
        priority_small_area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{int, rat};

    #[test]
    fn trim_keeps_integral_entries_integral() {
        let mut y = vec![int(2), rat(3, 2), int(1)];
        trim_surplus(&mut y, &[true, false, true], &int(3));
        assert_eq!(y.iter().sum::<Rational>(), int(3));
        assert_eq!(y, vec![int(2), int(0), int(1)]);

        let mut y = vec![int(2), rat(1, 2), int(2)];
        trim_surplus(&mut y, &[true, false, true], &int(2));
        assert_eq!(y, vec![int(2), int(0), int(0)]);
    }

    #[test]
    fn trim_without_surplus_is_identity() {
        let mut y = vec![rat(3, 2), rat(3, 2)];
        trim_surplus(&mut y, &[false, false], &int(3));
        assert_eq!(y, vec![rat(3, 2), rat(3, 2)]);
    }
}
