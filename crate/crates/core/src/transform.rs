//! Splitting of non-priority bags into a small part (with filler jobs) and a
//! large part, and the way back: medium jobs re-enter through an integral
//! max flow, then filler swaps remove the remaining small-vs-large conflicts.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::model::{
    validate_schedule, BagId, Instance, Job, JobId, ModelError, Rational, Schedule,
};
use crate::preprocess::{BagClassification, EpsParams, JobClass, RoundedInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("generated id {0} collides with an existing job or bag id")]
    IdCollision(String),
    #[error("input schedule is infeasible for the original instance")]
    InfeasibleInput,
    #[error("max flow placed {placed} of {required} medium jobs")]
    FlowShortfall { placed: usize, required: usize },
    #[error("no filler of bag {bag} available to swap with job {job}")]
    NoSwapCandidate { bag: BagId, job: JobId },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitBags {
    /// Keeps the original id: original small jobs plus the fillers.
    pub small_bag: BagId,
    /// Fresh bag holding the original large jobs (and, on the way back, the
    /// re-inserted medium jobs).
    pub large_bag: BagId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransformRecord {
    pub split_bags: BTreeMap<BagId, SplitBags>,
    /// Filler job → the medium or large job it stands in for.
    pub filler_map: BTreeMap<JobId, JobId>,
    pub removed_medium: BTreeMap<BagId, Vec<JobId>>,
    pub p_max_per_bag: BTreeMap<BagId, Rational>,
}

impl TransformRecord {
    pub fn is_empty(&self) -> bool {
        self.split_bags.is_empty()
    }

    pub fn is_filler(&self, id: &JobId) -> bool {
        self.filler_map.contains_key(id)
    }

    pub fn removed_medium_count(&self) -> usize {
        self.removed_medium.values().map(Vec::len).sum()
    }
}

pub fn filler_id(original: &JobId) -> JobId {
    JobId(format!("{}~filler", original.0))
}

pub fn large_bag_id(bag: &BagId) -> BagId {
    BagId(format!("{}~large", bag.0))
}

pub fn transform(
    rounded: &RoundedInstance,
    cls: &BagClassification,
    params: &EpsParams,
) -> Result<(RoundedInstance, TransformRecord), TransformError> {
    let inst = &rounded.instance;
    let mut record = TransformRecord::default();
    let bags = inst.bags();
    for (bag, members) in &bags {
        if cls.is_priority(bag) {
            continue;
        }
        let small_max = members
            .iter()
            .map(|&i| &inst.jobs()[i])
            .filter(|j| params.class_of(&j.size) == JobClass::Small)
            .map(|j| j.size.clone())
            .max();
        let has_ml = members
            .iter()
            .any(|&i| params.class_of(&inst.jobs()[i].size).is_medium_or_large());
        if let (Some(p_max), true) = (small_max, has_ml) {
            let large_bag = large_bag_id(bag);
            if bags.contains_key(&large_bag) {
                return Err(TransformError::IdCollision(large_bag.0));
            }
            record.split_bags.insert(
                bag.clone(),
                SplitBags {
                    small_bag: bag.clone(),
                    large_bag,
                },
            );
            record.p_max_per_bag.insert(bag.clone(), p_max);
        }
    }

    let mut jobs = Vec::with_capacity(inst.jobs().len());
    let mut fillers = Vec::new();
    let mut size_map = BTreeMap::new();
    for job in inst.jobs() {
        let Some(split) = record.split_bags.get(&job.bag) else {
            size_map.insert(job.id.clone(), rounded.size_map[&job.id].clone());
            jobs.push(job.clone());
            continue;
        };
        let class = params.class_of(&job.size);
        if class.is_medium_or_large() {
            let fid = filler_id(&job.id);
            if inst.job(&fid).is_some() {
                return Err(TransformError::IdCollision(fid.0));
            }
            record.filler_map.insert(fid.clone(), job.id.clone());
            fillers.push(Job {
                id: fid,
                size: record.p_max_per_bag[&job.bag].clone(),
                bag: split.small_bag.clone(),
            });
        }
        match class {
            JobClass::Medium => record
                .removed_medium
                .entry(job.bag.clone())
                .or_default()
                .push(job.id.clone()),
            JobClass::Large => {
                size_map.insert(job.id.clone(), rounded.size_map[&job.id].clone());
                jobs.push(Job {
                    id: job.id.clone(),
                    size: job.size.clone(),
                    bag: split.large_bag.clone(),
                });
            }
            JobClass::Small => {
                size_map.insert(job.id.clone(), rounded.size_map[&job.id].clone());
                jobs.push(job.clone());
            }
        }
    }
    jobs.extend(fillers);
    let modified = RoundedInstance {
        instance: Instance::new(inst.machines(), jobs)?,
        size_map,
        guess: rounded.guess.clone(),
    };
    Ok((modified, record))
}

/// Carries a feasible schedule of the rounded instance over to the modified
/// instance: every surviving job keeps its machine and each filler sits where
/// the job it replaces sat.
pub fn witness_transform(
    original: &Instance,
    schedule: &Schedule,
    modified: &Instance,
    record: &TransformRecord,
) -> Result<Schedule, TransformError> {
    if !validate_schedule(original, schedule)?.feasible {
        return Err(TransformError::InfeasibleInput);
    }
    let assignment = modified
        .jobs()
        .iter()
        .map(|j| {
            let source = record.filler_map.get(&j.id).unwrap_or(&j.id);
            (j.id.clone(), schedule.assignment[source])
        })
        .collect();
    Ok(Schedule { assignment })
}

/// Modified-instance jobs plus the removed medium jobs, the latter filed under
/// the large part of their bag.
pub fn expanded_instance(
    original: &Instance,
    modified: &Instance,
    record: &TransformRecord,
) -> Result<Instance, TransformError> {
    let mut jobs = modified.jobs().to_vec();
    for (bag, ids) in &record.removed_medium {
        let large_bag = &record.split_bags[bag].large_bag;
        for id in ids {
            let job = original.job(id).ok_or_else(|| ModelError::MissingJob(id.clone()))?;
            jobs.push(Job {
                id: id.clone(),
                size: job.size.clone(),
                bag: large_bag.clone(),
            });
        }
    }
    Ok(Instance::new(modified.machines(), jobs)?)
}

/// Flow network that routes removed medium jobs to machines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    /// One node per bag with removed medium jobs, in bag order.
    pub bags: Vec<BagId>,
    pub machines: usize,
    /// Capacity of source → bag arcs.
    pub source_caps: Vec<usize>,
    /// `free[b][i]`: bag `b` may send one job to machine `i`.
    pub free: Vec<Vec<bool>>,
    /// Capacity of machine → sink arcs.
    pub sink_caps: Vec<usize>,
}

impl FlowNetwork {
    pub fn build(
        modified: &Instance,
        schedule: &Schedule,
        record: &TransformRecord,
    ) -> Result<Self, TransformError> {
        let machines = modified.machines();
        let machine_of = schedule.machines_for(modified)?;
        let mut bags = Vec::new();
        let mut source_caps = Vec::new();
        let mut free = Vec::new();
        for (bag, ids) in &record.removed_medium {
            let large_bag = &record.split_bags[bag].large_bag;
            let mut row = vec![true; machines];
            for (j, job) in modified.jobs().iter().enumerate() {
                if &job.bag == large_bag {
                    row[machine_of[j]] = false;
                }
            }
            bags.push(bag.clone());
            source_caps.push(ids.len());
            free.push(row);
        }
        // Sink capacity: ceiling of the even fractional spread of each bag
        // over its free machines.
        let sink_caps = (0..machines)
            .map(|i| {
                let share: Rational = bags
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| free[*b][i])
                    .map(|(b, _)| {
                        let n_free = free[b].iter().filter(|&&f| f).count();
                        Rational::new(source_caps[b].into(), n_free.into())
                    })
                    .sum();
                share.ceil().to_integer().to_usize().unwrap_or(usize::MAX)
            })
            .collect();
        Ok(FlowNetwork {
            bags,
            machines,
            source_caps,
            free,
            sink_caps,
        })
    }

    /// Integral maximum flow by shortest augmenting paths. Returns the total
    /// flow and, per bag, the machines receiving one job each.
    pub fn max_flow(&self) -> (usize, Vec<Vec<usize>>) {
        let nb = self.bags.len();
        let n = 2 + nb + self.machines;
        let (s, t) = (0, n - 1);
        let bag_node = |b: usize| 1 + b;
        let machine_node = |i: usize| 1 + nb + i;
        let mut cap = vec![vec![0usize; n]; n];
        for b in 0..nb {
            cap[s][bag_node(b)] = self.source_caps[b];
            for i in 0..self.machines {
                if self.free[b][i] {
                    cap[bag_node(b)][machine_node(i)] = 1;
                }
            }
        }
        for i in 0..self.machines {
            cap[machine_node(i)][t] = self.sink_caps[i];
        }
        let original = cap.clone();
        let mut total = 0;
        loop {
            let mut prev = vec![usize::MAX; n];
            prev[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for v in 0..n {
                    if prev[v] == usize::MAX && cap[u][v] > 0 {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                break;
            }
            let mut bottleneck = usize::MAX;
            let mut v = t;
            while v != s {
                bottleneck = bottleneck.min(cap[prev[v]][v]);
                v = prev[v];
            }
            let mut v = t;
            while v != s {
                cap[prev[v]][v] -= bottleneck;
                cap[v][prev[v]] += bottleneck;
                v = prev[v];
            }
            total += bottleneck;
        }
        let routes = (0..nb)
            .map(|b| {
                (0..self.machines)
                    .filter(|&i| {
                        original[bag_node(b)][machine_node(i)] == 1
                            && cap[bag_node(b)][machine_node(i)] == 0
                    })
                    .collect()
            })
            .collect();
        (total, routes)
    }
}

/// Adds the removed medium jobs to a schedule of the modified instance. The
/// result covers the expanded instance.
pub fn add_medium_jobs(
    modified: &Instance,
    schedule: &Schedule,
    record: &TransformRecord,
) -> Result<Schedule, TransformError> {
    let mut expanded = schedule.clone();
    if record.removed_medium.is_empty() {
        return Ok(expanded);
    }
    let network = FlowNetwork::build(modified, schedule, record)?;
    let (flow, routes) = network.max_flow();
    let required = record.removed_medium_count();
    if flow < required {
        return Err(TransformError::FlowShortfall {
            placed: flow,
            required,
        });
    }
    for (b, bag) in network.bags.iter().enumerate() {
        for (id, &machine) in record.removed_medium[bag].iter().zip(&routes[b]) {
            expanded.assignment.insert(id.clone(), machine);
        }
    }
    Ok(expanded)
}

/// Resolves every small-vs-medium/large conflict inside the re-merged bags by
/// swapping the offending small job with a filler of the same bag, then drops
/// all fillers. Returns a schedule of the original (rounded) instance.
pub fn strip_fillers(
    original: &Instance,
    expanded: &Schedule,
    record: &TransformRecord,
    params: &EpsParams,
) -> Result<Schedule, TransformError> {
    let mut machine_of: BTreeMap<JobId, usize> = expanded.assignment.clone();
    let machines = original.machines();
    let filler_bag: BTreeMap<&JobId, &BagId> = record
        .filler_map
        .iter()
        .map(|(f, orig)| (f, &original.job(orig).expect("filler of unknown job").bag))
        .collect();

    for bag in record.split_bags.keys() {
        let members: Vec<&Job> = original.jobs().iter().filter(|j| &j.bag == bag).collect();
        let fillers: Vec<&JobId> = filler_bag
            .iter()
            .filter(|(_, b)| **b == bag)
            .map(|(f, _)| *f)
            .collect();
        let ml_machines: BTreeSet<usize> = members
            .iter()
            .filter(|j| params.class_of(&j.size).is_medium_or_large())
            .map(|j| machine_of[&j.id])
            .collect();
        for c in 0..machines {
            if !ml_machines.contains(&c) {
                continue;
            }
            let offender = members
                .iter()
                .find(|j| params.class_of(&j.size) == JobClass::Small && machine_of[&j.id] == c);
            let Some(offender) = offender else { continue };
            let donor = fillers
                .iter()
                .filter(|f| !ml_machines.contains(&machine_of[**f]))
                .min_by_key(|f| machine_of[**f]);
            let Some(&donor) = donor else {
                return Err(TransformError::NoSwapCandidate {
                    bag: bag.clone(),
                    job: offender.id.clone(),
                });
            };
            let d = machine_of[donor];
            machine_of.insert(offender.id.clone(), d);
            machine_of.insert(donor.clone(), c);
        }
    }
    let assignment = original
        .jobs()
        .iter()
        .map(|j| {
            machine_of
                .get(&j.id)
                .map(|&m| (j.id.clone(), m))
                .ok_or_else(|| ModelError::MissingJob(j.id.clone()))
        })
        .collect::<Result<_, _>>()?;
    Ok(Schedule { assignment })
}

/// Sum over machines of the filler load a witness schedule adds; exposed for
/// the per-machine accounting check.
pub fn filler_load_per_machine(
    modified: &Instance,
    schedule: &Schedule,
    record: &TransformRecord,
) -> Vec<Rational> {
    let mut loads = vec![Rational::zero(); modified.machines()];
    for job in modified.jobs() {
        if record.is_filler(&job.id) {
            loads[schedule.assignment[&job.id]] += &job.size;
        }
    }
    loads
}
