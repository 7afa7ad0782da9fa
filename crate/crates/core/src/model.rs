//! Instances, schedules, exact rationals and the feasibility validator.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational number. Always kept in lowest terms with a positive
/// denominator by `num_rational`.
pub type Rational = BigRational;

/// Builds `num / den`. Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `base^exp` for any signed exponent. `base` must be non-zero when `exp < 0`.
pub fn pow(base: &Rational, exp: i64) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp.unsigned_abs() {
        acc *= base;
    }
    if exp < 0 {
        acc.recip()
    } else {
        acc
    }
}

/// Smallest integer `>= r`.
pub fn ceil_int(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

/// Smallest multiple of `step` that is `>= r` (step > 0).
pub fn ceil_to_multiple(r: &Rational, step: &Rational) -> Rational {
    (r / step).ceil() * step
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"a"`, `"a/b"` or `"-a/b"` into a rational in lowest terms.
pub fn parse_rational(s: &str) -> Result<Rational, ModelError> {
    let bad = || ModelError::BadRational(s.to_string());
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = n.parse().map_err(|_| bad())?;
    let den: BigInt = d.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(num, den))
}

/// Lossy conversion, for reporting only.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// JSON form `{"num": …, "den": …}` of a rational.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalRepr {
    pub num: i64,
    pub den: i64,
}

impl RationalRepr {
    pub fn to_rational(&self) -> Result<Rational, ModelError> {
        if self.den == 0 {
            return Err(ModelError::BadRational(format!("{}/{}", self.num, self.den)));
        }
        Ok(rat(self.num, self.den))
    }

    pub fn from_rational(r: &Rational) -> Result<Self, ModelError> {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(num), Some(den)) => Ok(Self { num, den }),
            _ => Err(ModelError::BadRational(format_rational(r))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BagId(pub String);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for BagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for JobId {
    fn from(s: &str) -> Self {
        JobId(s.to_string())
    }
}

impl From<&str> for BagId {
    fn from(s: &str) -> Self {
        BagId(s.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("job {0} has non-positive size")]
    NonPositiveSize(JobId),
    #[error("job id {0} appears twice")]
    DuplicateJob(JobId),
    #[error("job {0} is listed in more than one bag")]
    Partition(JobId),
    #[error("instance needs at least one machine")]
    NoMachines,
    #[error("schedule is missing job {0}")]
    MissingJob(JobId),
    #[error("schedule names unknown job {0}")]
    UnknownJob(JobId),
    #[error("job {job} assigned to machine {machine}, but only {machines} machines exist")]
    MachineOutOfRange {
        job: JobId,
        machine: usize,
        machines: usize,
    },
    #[error("malformed rational {0:?}")]
    BadRational(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub id: JobId,
    pub size: Rational,
    pub bag: BagId,
}

impl Job {
    pub fn new(id: impl Into<String>, size: Rational, bag: impl Into<String>) -> Self {
        Job {
            id: JobId(id.into()),
            size,
            bag: BagId(bag.into()),
        }
    }
}

/// Jobs partitioned into bags, plus a machine count. Bags are implied by the
/// `bag` field of each job, so the partition property holds by construction
/// once ids are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    machines: usize,
    jobs: Vec<Job>,
    index: BTreeMap<JobId, usize>,
}

impl Instance {
    pub fn new(machines: usize, jobs: Vec<Job>) -> Result<Self, ModelError> {
        if machines == 0 {
            return Err(ModelError::NoMachines);
        }
        let mut index = BTreeMap::new();
        for (i, job) in jobs.iter().enumerate() {
            if !job.size.is_positive() {
                return Err(ModelError::NonPositiveSize(job.id.clone()));
            }
            if let Some(&prev) = index.get(&job.id) {
                let prev: &Job = &jobs[prev];
                return Err(if prev.bag != job.bag {
                    ModelError::Partition(job.id.clone())
                } else {
                    ModelError::DuplicateJob(job.id.clone())
                });
            }
            index.insert(job.id.clone(), i);
        }
        Ok(Instance {
            machines,
            jobs,
            index,
        })
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, id: &JobId) -> Option<&Job> {
        self.index.get(id).map(|&i| &self.jobs[i])
    }

    pub fn job_index(&self, id: &JobId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Member job indices of every bag, keyed by bag id.
    pub fn bags(&self) -> BTreeMap<BagId, Vec<usize>> {
        let mut bags: BTreeMap<BagId, Vec<usize>> = BTreeMap::new();
        for (i, job) in self.jobs.iter().enumerate() {
            bags.entry(job.bag.clone()).or_default().push(i);
        }
        bags
    }

    pub fn total_area(&self) -> Rational {
        self.jobs.iter().map(|j| &j.size).sum()
    }

    pub fn max_size(&self) -> Rational {
        self.jobs
            .iter()
            .map(|j| j.size.clone())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Same jobs and machines with every size replaced through `f`.
    pub fn map_sizes(&self, mut f: impl FnMut(&Job) -> Rational) -> Result<Self, ModelError> {
        let jobs = self
            .jobs
            .iter()
            .map(|j| Job {
                id: j.id.clone(),
                size: f(j),
                bag: j.bag.clone(),
            })
            .collect();
        Instance::new(self.machines, jobs)
    }
}

/// Machine assignment of every job. Bag feasibility is not enforced here.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub assignment: BTreeMap<JobId, usize>,
}

impl Schedule {
    /// Builds a schedule from machine indices aligned with `instance.jobs()`.
    pub fn from_machines(instance: &Instance, machines: &[usize]) -> Self {
        let assignment = instance
            .jobs()
            .iter()
            .zip(machines)
            .map(|(j, &m)| (j.id.clone(), m))
            .collect();
        Schedule { assignment }
    }

    /// Machine of every instance job, aligned with `instance.jobs()`.
    pub fn machines_for(&self, instance: &Instance) -> Result<Vec<usize>, ModelError> {
        check_coverage(instance, self)?;
        Ok(instance
            .jobs()
            .iter()
            .map(|j| self.assignment[&j.id])
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub machine: usize,
    pub bag: BagId,
    pub jobs: Vec<JobId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub feasible: bool,
    pub conflicts: Vec<Conflict>,
    pub makespan: Rational,
    pub per_machine_load: Vec<Rational>,
}

fn check_coverage(instance: &Instance, schedule: &Schedule) -> Result<(), ModelError> {
    for job in instance.jobs() {
        match schedule.assignment.get(&job.id) {
            None => return Err(ModelError::MissingJob(job.id.clone())),
            Some(&m) if m >= instance.machines() => {
                return Err(ModelError::MachineOutOfRange {
                    job: job.id.clone(),
                    machine: m,
                    machines: instance.machines(),
                })
            }
            Some(_) => {}
        }
    }
    if let Some(id) = schedule
        .assignment
        .keys()
        .find(|id| instance.job(id).is_none())
    {
        return Err(ModelError::UnknownJob(id.clone()));
    }
    Ok(())
}

pub fn machine_loads(instance: &Instance, schedule: &Schedule) -> Result<Vec<Rational>, ModelError> {
    check_coverage(instance, schedule)?;
    let mut loads = vec![Rational::zero(); instance.machines()];
    for job in instance.jobs() {
        loads[schedule.assignment[&job.id]] += &job.size;
    }
    Ok(loads)
}

pub fn validate_schedule(
    instance: &Instance,
    schedule: &Schedule,
) -> Result<ValidationReport, ModelError> {
    let per_machine_load = machine_loads(instance, schedule)?;
    let mut hosted: BTreeMap<(usize, &BagId), Vec<JobId>> = BTreeMap::new();
    for job in instance.jobs() {
        hosted
            .entry((schedule.assignment[&job.id], &job.bag))
            .or_default()
            .push(job.id.clone());
    }
    let conflicts: Vec<Conflict> = hosted
        .into_iter()
        .filter(|(_, jobs)| jobs.len() > 1)
        .map(|((machine, bag), mut jobs)| {
            jobs.sort();
            Conflict {
                machine,
                bag: bag.clone(),
                jobs,
            }
        })
        .collect();
    let makespan = per_machine_load
        .iter()
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);
    Ok(ValidationReport {
        feasible: conflicts.is_empty(),
        conflicts,
        makespan,
        per_machine_load,
    })
}

pub fn makespan(instance: &Instance, schedule: &Schedule) -> Result<Rational, ModelError> {
    Ok(machine_loads(instance, schedule)?
        .into_iter()
        .max()
        .unwrap_or_else(Rational::zero))
}

/// Greatest common divisor style helper used by the LP exporter: least common
/// multiple of the denominators of `values`.
pub fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}
