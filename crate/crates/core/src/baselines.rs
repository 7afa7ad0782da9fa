//! Reference algorithms: exact optimum by search and global bag-LPT.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::model::{int, BagId, Instance, JobId, Rational, Schedule};
use crate::placement::bag_lpt;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("bag {bag} has {jobs} jobs but only {machines} machines exist")]
    InfeasibleBag { bag: BagId, jobs: usize, machines: usize },
    #[error("search stopped after {0} nodes")]
    BudgetExceeded(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptResult {
    pub makespan: Rational,
    pub schedule: Schedule,
    pub nodes_explored: u64,
}

fn check_bags(instance: &Instance) -> Result<BTreeMap<BagId, Vec<usize>>, BaselineError> {
    let bags = instance.bags();
    if let Some((bag, members)) = bags.iter().find(|(_, v)| v.len() > instance.machines()) {
        return Err(BaselineError::InfeasibleBag {
            bag: bag.clone(),
            jobs: members.len(),
            machines: instance.machines(),
        });
    }
    Ok(bags)
}

/// Bag-LPT over all machines at once, bags in id order.
pub fn global_bag_lpt(instance: &Instance) -> Result<Schedule, BaselineError> {
    let bags: Vec<(BagId, Vec<(JobId, Rational)>)> = check_bags(instance)?
        .into_iter()
        .map(|(b, members)| {
            let jobs = members
                .iter()
                .map(|&i| {
                    let j = &instance.jobs()[i];
                    (j.id.clone(), j.size.clone())
                })
                .collect();
            (b, jobs)
        })
        .collect();
    let res = bag_lpt(&vec![Rational::zero(); instance.machines()], &bags)
        .expect("bag sizes were checked");
    Ok(Schedule {
        assignment: res.assignment,
    })
}

struct Search<'a> {
    sizes: Vec<Rational>,
    bag: Vec<usize>,
    order: Vec<usize>,
    suffix_area: Vec<Rational>,
    machines: usize,
    loads: Vec<Rational>,
    bags_on: Vec<Vec<bool>>,
    current: Vec<usize>,
    best: Rational,
    best_assign: Option<Vec<usize>>,
    nodes: u64,
    cap: u64,
    instance: &'a Instance,
}

impl Search<'_> {
    fn run(&mut self, pos: usize, current_max: &Rational) -> Result<(), BaselineError> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(BaselineError::BudgetExceeded(self.cap));
        }
        if pos == self.order.len() {
            if *current_max < self.best || self.best_assign.is_none() {
                self.best = current_max.clone();
                self.best_assign = Some(self.current.clone());
            }
            return Ok(());
        }
        let total: Rational = self.loads.iter().sum::<Rational>() + &self.suffix_area[pos];
        let avg = total / int(self.machines as i64);
        if self.best_assign.is_some() && (avg >= self.best || *current_max >= self.best) {
            return Ok(());
        }
        let j = self.order[pos];
        // Machines are interchangeable while empty: only the first empty one
        // is tried.
        let mut tried_empty = false;
        for i in 0..self.machines {
            let empty = self.loads[i].is_zero() && !self.bags_on[i].iter().any(|&b| b);
            if empty {
                if tried_empty {
                    continue;
                }
                tried_empty = true;
            }
            if self.bags_on[i][self.bag[j]] {
                continue;
            }
            let new_load = &self.loads[i] + &self.sizes[j];
            if self.best_assign.is_some() && new_load >= self.best {
                continue;
            }
            let next_max = if &new_load > current_max { new_load.clone() } else { current_max.clone() };
            self.loads[i] = new_load;
            self.bags_on[i][self.bag[j]] = true;
            self.current[j] = i;
            self.run(pos + 1, &next_max)?;
            self.bags_on[i][self.bag[j]] = false;
            self.loads[i] -= &self.sizes[j];
        }
        Ok(())
    }
}

/// Exact optimum by depth-first search with bag pruning, symmetry breaking
/// on empty machines and best-so-far pruning. Seeded with global bag-LPT.
pub fn brute_force(instance: &Instance, cap: u64) -> Result<OptResult, BaselineError> {
    let bags = check_bags(instance)?;
    let bag_index: BTreeMap<&BagId, usize> = bags.keys().enumerate().map(|(i, b)| (b, i)).collect();
    let jobs = instance.jobs();
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| jobs[b].size.cmp(&jobs[a].size).then_with(|| jobs[a].id.cmp(&jobs[b].id)));
    let mut suffix_area = vec![Rational::zero(); order.len() + 1];
    for p in (0..order.len()).rev() {
        suffix_area[p] = &suffix_area[p + 1] + &jobs[order[p]].size;
    }
    let seed = global_bag_lpt(instance)?;
    let seed_assign: Vec<usize> = jobs.iter().map(|j| seed.assignment[&j.id]).collect();
    let seed_makespan = crate::model::makespan(instance, &seed)
        .expect("seed covers the instance");
    let mut s = Search {
        sizes: jobs.iter().map(|j| j.size.clone()).collect(),
        bag: jobs.iter().map(|j| bag_index[&j.bag]).collect(),
        order,
        suffix_area,
        machines: instance.machines(),
        loads: vec![Rational::zero(); instance.machines()],
        bags_on: vec![vec![false; bags.len()]; instance.machines()],
        current: vec![0; jobs.len()],
        best: seed_makespan,
        best_assign: Some(seed_assign),
        nodes: 0,
        cap,
        instance,
    };
    s.run(0, &Rational::zero())?;
    let assign = s.best_assign.take().expect("seed is a solution");
    let schedule = Schedule::from_machines(s.instance, &assign);
    Ok(OptResult {
        makespan: s.best,
        schedule,
        nodes_explored: s.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{makespan, rat, validate_schedule, Job};

    fn inst(m: usize, jobs: &[(&str, Rational, &str)]) -> Instance {
        Instance::new(m, jobs.iter().map(|(i, s, b)| Job::new(*i, s.clone(), *b)).collect()).unwrap()
    }

    #[test]
    fn forced_separation() {
        let i = inst(2, &[("a", rat(1, 2), "B"), ("b", rat(1, 2), "B")]);
        assert_eq!(brute_force(&i, 1000).unwrap().makespan, rat(1, 2));
    }

    #[test]
    fn distinct_bags_partition() {
        let i = inst(2, &[("a", rat(3, 5), "A"), ("b", rat(1, 2), "B"), ("c", rat(2, 5), "C")]);
        let r = brute_force(&i, 1000).unwrap();
        // All 4 splits up to symmetry: {a,b,c}|{} = 3/2, {a}|{b,c} = 9/10,
        // {a,b}|{c} = 11/10, {a,c}|{b} = 1.
        assert_eq!(r.makespan, rat(9, 10));
        assert!(validate_schedule(&i, &r.schedule).unwrap().feasible);
    }

    #[test]
    fn bag_too_large() {
        let i = inst(1, &[("a", rat(1, 2), "B"), ("b", rat(1, 2), "B")]);
        assert!(matches!(brute_force(&i, 1000), Err(BaselineError::InfeasibleBag { .. })));
        assert!(matches!(global_bag_lpt(&i), Err(BaselineError::InfeasibleBag { .. })));
    }

    #[test]
    fn lpt_examples() {
        let i = inst(2, &[("a", int(1), "B"), ("b", int(1), "B")]);
        assert_eq!(makespan(&i, &global_bag_lpt(&i).unwrap()).unwrap(), int(1));
        let i = inst(2, &[("a1", int(4), "A"), ("a2", int(1), "A"), ("b1", int(3), "B"), ("b2", int(3), "B")]);
        let s = global_bag_lpt(&i).unwrap();
        let ms = makespan(&i, &s).unwrap();
        assert_eq!(ms, int(7));
        assert!(ms <= rat(11, 2) + int(4));
        let empty = inst(3, &[]);
        assert_eq!(makespan(&empty, &global_bag_lpt(&empty).unwrap()).unwrap(), int(0));
    }

    #[test]
    fn budget_is_reported() {
        let i = inst(
            3,
            &[
                ("a", int(3), "A"),
                ("b", int(3), "B"),
                ("c", int(2), "C"),
                ("d", int(2), "D"),
                ("e", int(2), "E"),
            ],
        );
        assert!(matches!(brute_force(&i, 2), Err(BaselineError::BudgetExceeded(2))));
    }
}
