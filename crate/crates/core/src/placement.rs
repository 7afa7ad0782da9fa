//! From slots to a feasible schedule of the modified instance.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use thiserror::Error;

use crate::milp::{SlotAssignment, SlotKind};
use crate::model::{ceil_to_multiple, format_rational, int, BagId, Instance, JobId, ModelError, Rational, Schedule};
use crate::preprocess::{BagClassification, EpsParams, JobClass};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlacementError {
    #[error("no swap partner for job {job} of size {size} on machine {machine}")]
    SwapExhausted { job: JobId, size: String, machine: usize },
    #[error("bag {bag} has {jobs} jobs for {machines} machines")]
    BagTooLarge { bag: BagId, jobs: usize, machines: usize },
    #[error("bag {bag} has {jobs} jobs but the groups hold {machines} machines")]
    JobsExceedMachines { bag: BagId, jobs: usize, machines: usize },
    #[error("bag {bag}: {jobs} fractional jobs but only {slots} slots")]
    SlotShortfall { bag: BagId, slots: usize, jobs: usize },
    #[error("origin walk for bag {bag} revisited machine {machine}")]
    WalkCycle { bag: BagId, machine: usize },
    #[error("origin walk for bag {bag} stopped at machine {machine}")]
    WalkBlocked { bag: BagId, machine: usize },
    #[error("slots and jobs disagree: {0}")]
    SlotMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum PlacementStage {
    LargeMedium,
    NonPrioritySmall,
    PrioritySmall,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSchedule {
    pub placed: BTreeMap<JobId, usize>,
    pub loads: Vec<Rational>,
    /// Priority small area held back on each machine until those jobs are
    /// placed.
    pub reserved: Vec<Rational>,
    pub pattern_of: Vec<Option<usize>>,
    pub stage: PlacementStage,
    bags_on: Vec<BTreeMap<BagId, usize>>,
}

impl PartialSchedule {
    pub fn new(pattern_of: Vec<Option<usize>>) -> Self {
        let m = pattern_of.len();
        PartialSchedule {
            placed: BTreeMap::new(),
            loads: vec![Rational::zero(); m],
            reserved: vec![Rational::zero(); m],
            pattern_of,
            stage: PlacementStage::LargeMedium,
            bags_on: vec![BTreeMap::new(); m],
        }
    }

    pub fn machines(&self) -> usize {
        self.loads.len()
    }

    pub fn place(&mut self, id: &JobId, bag: &BagId, size: &Rational, machine: usize) {
        self.placed.insert(id.clone(), machine);
        self.loads[machine] += size;
        *self.bags_on[machine].entry(bag.clone()).or_default() += 1;
    }

    pub fn unplace(&mut self, id: &JobId, bag: &BagId, size: &Rational) -> usize {
        let machine = self.placed.remove(id).expect("job is placed");
        self.loads[machine] -= size;
        let c = self.bags_on[machine].get_mut(bag).expect("bag is on machine");
        *c -= 1;
        if *c == 0 {
            self.bags_on[machine].remove(bag);
        }
        machine
    }

    pub fn holds_bag(&self, machine: usize, bag: &BagId) -> bool {
        self.bags_on[machine].contains_key(bag)
    }

    /// Load plus reservation.
    pub fn heights(&self) -> Vec<Rational> {
        self.loads.iter().zip(&self.reserved).map(|(l, r)| l + r).collect()
    }

    pub fn to_schedule(&self) -> Schedule {
        Schedule {
            assignment: self.placed.clone(),
        }
    }
}

/// Per priority bag: medium/large job → machine its slot was on.
pub type OriginMap = BTreeMap<BagId, BTreeMap<JobId, usize>>;

pub fn place_large_medium(
    slots: &SlotAssignment,
    modified: &Instance,
    cls: &BagClassification,
    params: &EpsParams,
) -> Result<(PartialSchedule, OriginMap), PlacementError> {
    let mut partial = PartialSchedule::new(slots.machines.iter().map(|m| m.pattern).collect());
    let mut origin = OriginMap::new();
    let mut x_slots: BTreeMap<Rational, Vec<usize>> = BTreeMap::new();
    for (i, ms) in slots.machines.iter().enumerate() {
        for (kind, size) in &ms.slots {
            match kind {
                SlotKind::PriorityJob(id) => {
                    let job = modified
                        .job(id)
                        .ok_or_else(|| ModelError::MissingJob(id.clone()))?;
                    if &job.size != size {
                        return Err(PlacementError::SlotMismatch(format!("{id} has the wrong size")));
                    }
                    partial.place(id, &job.bag, size, i);
                    origin.entry(job.bag.clone()).or_default().insert(id.clone(), i);
                }
                SlotKind::X => x_slots.entry(size.clone()).or_default().push(i),
                SlotKind::Unused => {}
            }
        }
    }

    let mut pools: BTreeMap<Rational, BTreeMap<BagId, Vec<JobId>>> = BTreeMap::new();
    for j in modified.jobs() {
        if !cls.is_priority(&j.bag) && params.class_of(&j.size).is_medium_or_large() {
            pools
                .entry(j.size.clone())
                .or_default()
                .entry(j.bag.clone())
                .or_default()
                .push(j.id.clone());
        }
    }
    for pool in pools.values_mut() {
        for ids in pool.values_mut() {
            ids.sort();
            ids.reverse();
        }
    }
    let pos = params.b_prime_cap();
    let mut sizes: Vec<Rational> = pools.keys().cloned().collect();
    sizes.sort_by(|a, b| {
        cls.count_at_position(a, pos)
            .cmp(&cls.count_at_position(b, pos))
            .then_with(|| a.cmp(b))
    });
    let bag_of: BTreeMap<&JobId, &BagId> = modified.jobs().iter().map(|j| (&j.id, &j.bag)).collect();
    let size_of: BTreeMap<&JobId, &Rational> = modified.jobs().iter().map(|j| (&j.id, &j.size)).collect();

    for size in &sizes {
        let machines = x_slots.get(size).cloned().unwrap_or_default();
        let pool = pools.get_mut(size).expect("size has a pool");
        for c in machines {
            let best = |pool: &BTreeMap<BagId, Vec<JobId>>, filter: &dyn Fn(&BagId) -> bool| {
                pool.iter()
                    .filter(|(b, ids)| !ids.is_empty() && filter(b))
                    .max_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| b.0.cmp(a.0)))
                    .map(|(b, _)| b.clone())
            };
            if let Some(bag) = best(pool, &|b| !partial.holds_bag(c, b)) {
                let id = pool.get_mut(&bag).unwrap().pop().unwrap();
                partial.place(&id, &bag, size, c);
                continue;
            }
            let Some(bag) = best(pool, &|_| true) else {
                break;
            };
            let id = pool.get_mut(&bag).unwrap().pop().unwrap();
            // Forced conflict: trade places with a same-size job elsewhere.
            // Non-priority partners first, so priority jobs move only when
            // they must.
            let mut candidates: Vec<(bool, usize, JobId)> = partial
                .placed
                .iter()
                .filter(|(j, &d)| d != c && size_of[j] == size)
                .map(|(j, &d)| (cls.is_priority(bag_of[j]), d, j.clone()))
                .collect();
            candidates.sort();
            let partner = candidates.into_iter().find(|(_, d, j)| {
                !partial.holds_bag(*d, &bag) && !partial.holds_bag(c, bag_of[j])
            });
            let Some((_, d, j)) = partner else {
                return Err(PlacementError::SwapExhausted {
                    job: id,
                    size: format_rational(size),
                    machine: c,
                });
            };
            let jb = bag_of[&j];
            partial.unplace(&j, jb, size);
            partial.place(&j, jb, size, c);
            partial.place(&id, &bag, size, d);
        }
        if let Some((bag, _)) = pool.iter().find(|(_, ids)| !ids.is_empty()) {
            return Err(PlacementError::SlotMismatch(format!(
                "bag {bag} size {} has jobs left without X slots",
                format_rational(size)
            )));
        }
    }

    for (i, ms) in slots.machines.iter().enumerate() {
        if let Some(p) = ms.pattern {
            let copies = slots.pattern_machines[p].len();
            partial.reserved[i] = &slots.priority_small_area[p] / int(copies as i64);
        }
    }
    Ok((partial, origin))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LptOutcome {
    pub assignment: BTreeMap<JobId, usize>,
    pub loads: Vec<Rational>,
}

/// Bag-LPT: per bag, jobs by non-increasing size go one each to machines by
/// non-decreasing load. Bags are taken in the given order.
pub fn bag_lpt(
    machine_heights: &[Rational],
    bags: &[(BagId, Vec<(JobId, Rational)>)],
) -> Result<LptOutcome, PlacementError> {
    let m = machine_heights.len();
    let mut loads = machine_heights.to_vec();
    let mut assignment = BTreeMap::new();
    for (bag, jobs) in bags {
        if jobs.len() > m {
            return Err(PlacementError::BagTooLarge {
                bag: bag.clone(),
                jobs: jobs.len(),
                machines: m,
            });
        }
        let mut sorted: Vec<&(JobId, Rational)> = jobs.iter().collect();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| loads[a].cmp(&loads[b]).then_with(|| a.cmp(&b)));
        // Dummy jobs of size 0 would pad the tail; they change nothing.
        for ((id, size), &i) in sorted.into_iter().map(|p| (&p.0, &p.1)).zip(&order) {
            loads[i] += size;
            assignment.insert(id.clone(), i);
        }
    }
    Ok(LptOutcome { assignment, loads })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineGroup {
    pub machines: Vec<usize>,
    pub rounded_height: Rational,
    pub average_load: Rational,
}

/// Groups machines by height (load plus reservation) rounded up to a
/// multiple of `eps`, in ascending order of that rounded height.
pub fn group_machines(partial: &PartialSchedule, eps: &Rational) -> Vec<MachineGroup> {
    let heights = partial.heights();
    let mut by_key: BTreeMap<Rational, Vec<usize>> = BTreeMap::new();
    for (i, h) in heights.iter().enumerate() {
        by_key.entry(ceil_to_multiple(h, eps)).or_default().push(i);
    }
    by_key
        .into_iter()
        .map(|(rounded_height, machines)| {
            let total: Rational = machines.iter().map(|&i| &heights[i]).sum();
            MachineGroup {
                average_load: total / int(machines.len() as i64),
                machines,
                rounded_height,
            }
        })
        .collect()
}

/// Group-bag-LPT: each bag, sorted by non-increasing size, is dealt to the
/// groups in ascending order of current average load, `|M_i|` jobs per group.
/// The averages are updated after every bag. Returns the bag chunks per
/// group, indexed like `groups`.
pub fn group_bag_lpt(
    groups: &[MachineGroup],
    bags: &[(BagId, Vec<(JobId, Rational)>)],
) -> Result<Vec<Vec<(BagId, Vec<(JobId, Rational)>)>>, PlacementError> {
    let total_machines: usize = groups.iter().map(|g| g.machines.len()).sum();
    let mut area: Vec<Rational> = groups
        .iter()
        .map(|g| &g.average_load * int(g.machines.len() as i64))
        .collect();
    let mut out = vec![Vec::new(); groups.len()];
    for (bag, jobs) in bags {
        if jobs.len() > total_machines {
            return Err(PlacementError::JobsExceedMachines {
                bag: bag.clone(),
                jobs: jobs.len(),
                machines: total_machines,
            });
        }
        let mut sorted: Vec<(JobId, Rational)> = jobs.clone();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut order: Vec<usize> = (0..groups.len()).collect();
        let avg = |g: usize, area: &[Rational]| &area[g] / int(groups[g].machines.len() as i64);
        order.sort_by(|&a, &b| avg(a, &area).cmp(&avg(b, &area)).then_with(|| a.cmp(&b)));
        let mut rest = sorted.into_iter();
        for g in order {
            let chunk: Vec<(JobId, Rational)> = rest.by_ref().take(groups[g].machines.len()).collect();
            if chunk.is_empty() {
                break;
            }
            for (_, s) in &chunk {
                area[g] += s;
            }
            out[g].push((bag.clone(), chunk));
        }
    }
    Ok(out)
}

/// Small jobs of non-priority bags, grouped by bag.
pub fn nonpriority_small_bags(
    modified: &Instance,
    cls: &BagClassification,
    params: &EpsParams,
) -> Vec<(BagId, Vec<(JobId, Rational)>)> {
    let mut bags: BTreeMap<BagId, Vec<(JobId, Rational)>> = BTreeMap::new();
    for j in modified.jobs() {
        if !cls.is_priority(&j.bag) && params.class_of(&j.size) == JobClass::Small {
            bags.entry(j.bag.clone()).or_default().push((j.id.clone(), j.size.clone()));
        }
    }
    bags.into_iter().collect()
}

/// Runs bag-LPT inside each group at the machines' true heights.
pub fn place_nonpriority_small(
    partial: &PartialSchedule,
    groups: &[MachineGroup],
    chunks: &[Vec<(BagId, Vec<(JobId, Rational)>)>],
) -> Result<PartialSchedule, PlacementError> {
    let mut out = partial.clone();
    let heights = partial.heights();
    for (g, group) in groups.iter().enumerate() {
        if chunks[g].is_empty() {
            continue;
        }
        let start: Vec<Rational> = group.machines.iter().map(|&i| heights[i].clone()).collect();
        let res = bag_lpt(&start, &chunks[g])?;
        for (bag, jobs) in &chunks[g] {
            for (id, size) in jobs {
                out.place(id, bag, size, group.machines[res.assignment[id]]);
            }
        }
    }
    out.stage = PlacementStage::NonPrioritySmall;
    Ok(out)
}

/// Per pattern and priority bag: the merged placeholder jobs standing in for
/// the fractionally planned jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedJobs {
    pub pattern: usize,
    pub bag: BagId,
    /// Number of machines left after whole jobs, `m_f`.
    pub count: usize,
    /// Height `h_f` before rounding.
    pub height: Rational,
    pub max_fractional_size: Rational,
    pub fraction_sum: Rational,
}

pub fn place_priority_small(
    partial: &PartialSchedule,
    slots: &SlotAssignment,
    modified: &Instance,
    cls: &BagClassification,
    params: &EpsParams,
) -> Result<(PartialSchedule, Vec<MergedJobs>), PlacementError> {
    let mut out = partial.clone();
    for r in out.reserved.iter_mut() {
        *r = Rational::zero();
    }
    let size_of: BTreeMap<&JobId, &Rational> = modified.jobs().iter().map(|j| (&j.id, &j.size)).collect();
    let mut merged_info = Vec::new();
    // Slot machines per bag, in pattern order, for fractional jobs.
    let mut slot_machines: BTreeMap<BagId, Vec<usize>> = BTreeMap::new();
    let mut fractional: BTreeMap<BagId, BTreeSet<JobId>> = BTreeMap::new();

    for (p, machines) in slots.pattern_machines.iter().enumerate() {
        if machines.is_empty() {
            continue;
        }
        let mut lpt_bags: Vec<(BagId, Vec<(JobId, Rational)>)> = Vec::new();
        let mut merged_ids: BTreeMap<JobId, BagId> = BTreeMap::new();
        for ((pp, bag), plan) in slots.small_plan.range((p, BagId(String::new()))..) {
            if *pp != p {
                break;
            }
            if !cls.is_priority(bag) {
                continue;
            }
            let mut jobs: Vec<(JobId, Rational)> = Vec::new();
            let mut frac: Vec<(&JobId, &Rational)> = Vec::new();
            for (id, alpha) in plan {
                if alpha == &int(1) {
                    jobs.push((id.clone(), size_of[id].clone()));
                } else {
                    frac.push((id, alpha));
                    fractional.entry(bag.clone()).or_default().insert(id.clone());
                }
            }
            if !frac.is_empty() {
                let count = machines.len().checked_sub(jobs.len()).unwrap_or(0);
                let fraction_sum: Rational = frac.iter().map(|(_, a)| (*a).clone()).sum();
                let area: Rational = frac.iter().map(|(id, a)| size_of[*id] * *a).sum();
                if count == 0 {
                    return Err(PlacementError::SlotShortfall {
                        bag: bag.clone(),
                        slots: 0,
                        jobs: frac.len(),
                    });
                }
                let height = area / int(count as i64);
                let slot_height = ceil_to_multiple(&height, &params.tiny_threshold);
                merged_info.push(MergedJobs {
                    pattern: p,
                    bag: bag.clone(),
                    count,
                    height,
                    max_fractional_size: frac.iter().map(|(id, _)| size_of[*id].clone()).max().unwrap(),
                    fraction_sum,
                });
                for i in 0..count {
                    let id = JobId(format!("{}~merged~{p}~{i}", bag.0));
                    merged_ids.insert(id.clone(), bag.clone());
                    jobs.push((id, slot_height.clone()));
                }
            }
            lpt_bags.push((bag.clone(), jobs));
        }
        if lpt_bags.is_empty() {
            continue;
        }
        // Machines of one pattern are treated as equally high.
        let res = bag_lpt(&vec![Rational::zero(); machines.len()], &lpt_bags)?;
        for (bag, jobs) in &lpt_bags {
            for (id, _) in jobs {
                let machine = machines[res.assignment[id]];
                if merged_ids.contains_key(id) {
                    slot_machines.entry(bag.clone()).or_default().push(machine);
                } else {
                    out.place(id, bag, size_of[id], machine);
                }
            }
        }
    }

    for (bag, jobs) in &fractional {
        let machines = slot_machines.get(bag).map(Vec::as_slice).unwrap_or(&[]);
        if machines.len() < jobs.len() {
            return Err(PlacementError::SlotShortfall {
                bag: bag.clone(),
                slots: machines.len(),
                jobs: jobs.len(),
            });
        }
        for (id, &machine) in jobs.iter().zip(machines) {
            out.place(id, bag, size_of[id], machine);
        }
    }
    out.stage = PlacementStage::PrioritySmall;
    Ok((out, merged_info))
}

/// Moves each small priority job that shares a machine with a medium/large
/// job of its bag along the origin chain of that bag to the first machine
/// free of the bag.
pub fn resolve_conflicts(
    partial: &PartialSchedule,
    modified: &Instance,
    origin: &OriginMap,
    params: &EpsParams,
) -> Result<PartialSchedule, PlacementError> {
    let mut out = partial.clone();
    let bag_jobs = modified.bags();
    for (bag, origins) in origin {
        let members: Vec<(&JobId, &Rational, bool)> = bag_jobs[bag]
            .iter()
            .map(|&i| {
                let j = &modified.jobs()[i];
                (&j.id, &j.size, params.class_of(&j.size).is_medium_or_large())
            })
            .collect();
        for c in 0..out.machines() {
            let here: Vec<&(&JobId, &Rational, bool)> =
                members.iter().filter(|(id, _, _)| out.placed.get(*id) == Some(&c)).collect();
            if here.len() < 2 {
                continue;
            }
            let large = here.iter().find(|(_, _, ml)| *ml);
            let small = here.iter().find(|(_, _, ml)| !*ml);
            let (Some(&&(large_id, _, _)), Some(&&(small_id, small_size, _))) = (large, small) else {
                return Err(PlacementError::WalkBlocked { bag: bag.clone(), machine: c });
            };
            let mut visited = BTreeSet::from([c]);
            let mut i = *origins
                .get(large_id)
                .ok_or(PlacementError::WalkBlocked { bag: bag.clone(), machine: c })?;
            loop {
                if !visited.insert(i) {
                    return Err(PlacementError::WalkCycle { bag: bag.clone(), machine: i });
                }
                let occupant = members
                    .iter()
                    .find(|(id, _, _)| out.placed.get(*id) == Some(&i));
                match occupant {
                    None => break,
                    Some((id, _, true)) => {
                        i = *origins
                            .get(*id)
                            .ok_or(PlacementError::WalkBlocked { bag: bag.clone(), machine: i })?;
                    }
                    Some((_, _, false)) => {
                        return Err(PlacementError::WalkBlocked { bag: bag.clone(), machine: i });
                    }
                }
            }
            out.unplace(small_id, bag, small_size);
            out.place(small_id, bag, small_size, i);
        }
    }
    out.stage = PlacementStage::Resolved;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;

    fn bag(name: &str, jobs: &[(&str, Rational)]) -> (BagId, Vec<(JobId, Rational)>) {
        (
            BagId::from(name),
            jobs.iter().map(|(id, s)| (JobId::from(*id), s.clone())).collect(),
        )
    }

    #[test]
    fn bag_lpt_single_bag() {
        let res = bag_lpt(&[int(0), int(0)], &[bag("a", &[("x", rat(1, 2)), ("y", rat(3, 10))])]).unwrap();
        assert_eq!(res.loads, vec![rat(1, 2), rat(3, 10)]);
    }

    #[test]
    fn bag_lpt_two_bags_trace() {
        let res = bag_lpt(
            &[int(0), int(0)],
            &[
                bag("a", &[("a1", int(4)), ("a2", int(1))]),
                bag("b", &[("b1", int(3)), ("b2", int(3))]),
            ],
        )
        .unwrap();
        assert_eq!(res.assignment[&JobId::from("a1")], 0);
        assert_eq!(res.assignment[&JobId::from("a2")], 1);
        assert_eq!(res.assignment[&JobId::from("b1")], 1);
        assert_eq!(res.assignment[&JobId::from("b2")], 0);
        assert_eq!(res.loads, vec![int(7), int(4)]);
    }

    #[test]
    fn bag_lpt_empty_and_oversize() {
        let res = bag_lpt(&[int(1), int(2)], &[bag("a", &[])]).unwrap();
        assert_eq!(res.loads, vec![int(1), int(2)]);
        assert!(matches!(
            bag_lpt(&[int(0)], &[bag("a", &[("x", int(1)), ("y", int(1))])]),
            Err(PlacementError::BagTooLarge { .. })
        ));
    }

    fn partial_with_heights(h: &[Rational]) -> PartialSchedule {
        let mut p = PartialSchedule::new(vec![None; h.len()]);
        for (i, x) in h.iter().enumerate() {
            p.loads[i] = x.clone();
        }
        p
    }

    #[test]
    fn grouping_examples() {
        let g = group_machines(&partial_with_heights(&[rat(3, 10), rat(7, 20), rat(3, 5)]), &rat(1, 2));
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].rounded_height, rat(1, 2));
        assert_eq!(g[0].machines, vec![0, 1]);
        assert_eq!(g[1].rounded_height, int(1));
        let g = group_machines(&partial_with_heights(&[int(0), int(0)]), &rat(1, 2));
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].rounded_height, int(0));
    }

    fn group(machines: Vec<usize>, avg: Rational) -> MachineGroup {
        MachineGroup {
            machines,
            rounded_height: avg.clone(),
            average_load: avg,
        }
    }

    #[test]
    fn group_bag_lpt_chunks() {
        let groups = vec![group(vec![0, 1], rat(1, 2)), group(vec![2], int(1))];
        let out = group_bag_lpt(
            &groups,
            &[bag("a", &[("x", rat(1, 10)), ("y", rat(1, 5)), ("z", rat(3, 20))])],
        )
        .unwrap();
        let ids = |g: usize| -> Vec<&str> { out[g][0].1.iter().map(|(j, _)| j.0.as_str()).collect() };
        assert_eq!(ids(0), vec!["y", "z"]);
        assert_eq!(ids(1), vec!["x"]);

        let out = group_bag_lpt(&groups, &[bag("a", &[("x", rat(1, 10))])]).unwrap();
        assert_eq!(out[0][0].1.len(), 1);
        assert!(out[1].is_empty());

        assert!(matches!(
            group_bag_lpt(&groups[1..], &[bag("a", &[("x", int(1)), ("y", int(1))])]),
            Err(PlacementError::JobsExceedMachines { .. })
        ));
    }
}
