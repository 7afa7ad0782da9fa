//! Seeded instance generators.
//!
//! Distributions:
//! - `UniformGrid { den, max_num }`: size `u/den` with `u` uniform in
//!   `1..=max_num`.
//! - `Bimodal { den, large_percent }`: with probability `large_percent`% a
//!   size uniform on the grid points of `[1/2, 1]`, otherwise one on
//!   `[1/den, 1/5]`.
//! - `Powers { t, max_exp }`: size `(t/(t+1))^e` with `e` uniform in
//!   `0..=max_exp`, i.e. already rounded for `eps = 1/t`.
//!
//! Bags are drawn uniformly; with `feasible` set, only among bags that still
//! have fewer than `m` jobs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{pow, rat, Instance, Job, Rational, Schedule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDistribution {
    UniformGrid { den: u32, max_num: u32 },
    Bimodal { den: u32, large_percent: u32 },
    Powers { t: u32, max_exp: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub jobs: usize,
    pub machines: usize,
    pub bags: usize,
    pub sizes: SizeDistribution,
    pub seed: u64,
    pub feasible: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("need at least one machine")]
    NoMachines,
    #[error("need at least one bag for {0} jobs")]
    NoBags(usize),
    #[error("{jobs} jobs cannot fit {bags} bags of at most {machines} jobs")]
    Pigeonhole { jobs: usize, bags: usize, machines: usize },
    #[error("bad size distribution: {0}")]
    Distribution(String),
}

fn check(spec: &GeneratorSpec) -> Result<(), SpecError> {
    if spec.machines == 0 {
        return Err(SpecError::NoMachines);
    }
    if spec.jobs > 0 && spec.bags == 0 {
        return Err(SpecError::NoBags(spec.jobs));
    }
    if spec.feasible && spec.jobs > spec.machines * spec.bags {
        return Err(SpecError::Pigeonhole {
            jobs: spec.jobs,
            bags: spec.bags,
            machines: spec.machines,
        });
    }
    match spec.sizes {
        SizeDistribution::UniformGrid { den, max_num } if den == 0 || max_num == 0 => {
            Err(SpecError::Distribution("den and max_num must be positive".into()))
        }
        SizeDistribution::Bimodal { den, large_percent } if den < 5 || large_percent > 100 => {
            Err(SpecError::Distribution("den >= 5 and large_percent <= 100 required".into()))
        }
        SizeDistribution::Powers { t, .. } if t == 0 => Err(SpecError::Distribution("t must be positive".into())),
        _ => Ok(()),
    }
}

fn draw_size(rng: &mut ChaCha8Rng, dist: &SizeDistribution) -> Rational {
    match *dist {
        SizeDistribution::UniformGrid { den, max_num } => rat(rng.gen_range(1..=max_num) as i64, den as i64),
        SizeDistribution::Bimodal { den, large_percent } => {
            if rng.gen_range(0..100) < large_percent {
                let lo = den.div_ceil(2);
                rat(rng.gen_range(lo..=den) as i64, den as i64)
            } else {
                let hi = (den / 5).max(1);
                rat(rng.gen_range(1..=hi) as i64, den as i64)
            }
        }
        SizeDistribution::Powers { t, max_exp } => {
            let base = rat(t as i64, t as i64 + 1);
            pow(&base, rng.gen_range(0..=max_exp) as i64)
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Instance, SpecError> {
    check(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut per_bag = vec![0usize; spec.bags];
    let mut jobs = Vec::with_capacity(spec.jobs);
    for i in 0..spec.jobs {
        let size = draw_size(&mut rng, &spec.sizes);
        let open: Vec<usize> = (0..spec.bags)
            .filter(|&b| !spec.feasible || per_bag[b] < spec.machines)
            .collect();
        let b = open[rng.gen_range(0..open.len())];
        per_bag[b] += 1;
        jobs.push(Job::new(format!("j{i}"), size, format!("b{b}")));
    }
    Ok(Instance::new(spec.machines, jobs).expect("generated jobs are valid"))
}

/// Builds an instance together with a conflict-free schedule whose every
/// machine load stays at most `capacity`: each drawn job goes to a random
/// machine that still fits it and holds no job of its bag. Draws that fit
/// nowhere are skipped, so the instance may have fewer than `spec.jobs` jobs.
pub fn generate_packed(spec: &GeneratorSpec, capacity: &Rational) -> Result<(Instance, Schedule), SpecError> {
    // Jobs that fit nowhere are dropped, so the pigeonhole bound is moot.
    check(&GeneratorSpec { feasible: false, ..spec.clone() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.machines;
    let mut loads = vec![Rational::from_integer(0.into()); m];
    let mut bags_on = vec![vec![false; spec.bags]; m];
    let mut jobs = Vec::new();
    let mut machine_of = Vec::new();
    for _ in 0..spec.jobs {
        let size = draw_size(&mut rng, &spec.sizes);
        let b = rng.gen_range(0..spec.bags);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let Some(i) = order
            .into_iter()
            .find(|&i| !bags_on[i][b] && &(&loads[i] + &size) <= capacity)
        else {
            continue;
        };
        loads[i] += &size;
        bags_on[i][b] = true;
        jobs.push(Job::new(format!("j{}", jobs.len()), size, format!("b{b}")));
        machine_of.push(i);
    }
    let inst = Instance::new(m, jobs).expect("generated jobs are valid");
    let sched = Schedule::from_machines(&inst, &machine_of);
    Ok((inst, sched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{int, validate_schedule};

    fn spec(seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            jobs: 8,
            machines: 3,
            bags: 3,
            sizes: SizeDistribution::UniformGrid { den: 10, max_num: 10 },
            seed,
            feasible: true,
        }
    }

    #[test]
    fn same_seed_same_instance() {
        assert_eq!(generate(&spec(7)).unwrap(), generate(&spec(7)).unwrap());
        assert_ne!(generate(&spec(7)).unwrap(), generate(&spec(8)).unwrap());
    }

    #[test]
    fn one_bag_n_equals_m_is_feasible() {
        let s = GeneratorSpec {
            jobs: 4,
            machines: 4,
            bags: 1,
            ..spec(1)
        };
        let inst = generate(&s).unwrap();
        assert!(inst.bags().values().all(|v| v.len() <= 4));
    }

    #[test]
    fn pigeonhole_is_rejected() {
        let s = GeneratorSpec {
            jobs: 10,
            machines: 3,
            bags: 3,
            ..spec(1)
        };
        assert!(matches!(generate(&s), Err(SpecError::Pigeonhole { .. })));
    }

    #[test]
    fn packed_schedule_respects_capacity() {
        let s = GeneratorSpec {
            jobs: 12,
            sizes: SizeDistribution::Powers { t: 2, max_exp: 6 },
            ..spec(3)
        };
        let (inst, sched) = generate_packed(&s, &int(1)).unwrap();
        let report = validate_schedule(&inst, &sched).unwrap();
        assert!(report.feasible);
        assert!(report.makespan <= int(1));
    }
}
