use bagsched::harness::{eptas_solve, SolveConfig};
use bagsched::model::{int, makespan, rat, validate_schedule, Instance, Job, Rational};
use bagsched::placement::bag_lpt;
use bagsched::{brute_force, global_bag_lpt, BagId, JobId};
use proptest::prelude::*;

/// Bags as lists of numerators over 12; each bag is clipped to `m` jobs.
fn instance_strategy(max_jobs: usize) -> impl Strategy<Value = Instance> {
    (1usize..=4, prop::collection::vec((0usize..4, 1i64..=12), 1..=max_jobs)).prop_map(|(m, raw)| {
        let mut per_bag = [0usize; 4];
        let jobs = raw
            .into_iter()
            .enumerate()
            .filter(|(_, (b, _))| {
                per_bag[*b] += 1;
                per_bag[*b] <= m
            })
            .map(|(i, (b, n))| Job::new(format!("j{i}"), rat(n, 12), format!("B{b}").as_str()))
            .collect();
        Instance::new(m, jobs).unwrap()
    })
}

fn area_bound(inst: &Instance) -> Rational {
    let area: Rational = inst.jobs().iter().map(|j| j.size.clone()).sum();
    let p_max = inst.jobs().iter().map(|j| j.size.clone()).max().unwrap_or_else(|| int(0));
    area / int(inst.machines() as i64) + p_max
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bag_lpt_stays_within_one_job_of_balance(
        m in 1usize..=5,
        h in 0i64..=8,
        bags in prop::collection::vec(prop::collection::vec(1i64..=20, 0..=5), 1..=4),
    ) {
        let bags: Vec<(BagId, Vec<(JobId, Rational)>)> = bags
            .iter()
            .enumerate()
            .map(|(b, sizes)| {
                let jobs = sizes.iter().take(m).enumerate()
                    .map(|(i, &s)| (JobId(format!("b{b}j{i}")), rat(s, 4)))
                    .collect();
                (BagId(format!("b{b}")), jobs)
            })
            .collect();
        let p_max = bags.iter().flat_map(|(_, j)| j.iter().map(|(_, s)| s.clone())).max().unwrap_or_else(|| int(0));
        let res = bag_lpt(&vec![rat(h, 4); m], &bags).unwrap();
        let hi = res.loads.iter().max().unwrap();
        let lo = res.loads.iter().min().unwrap();
        prop_assert!(hi - lo <= p_max);
        for (b, jobs) in &bags {
            let mut machines: Vec<usize> = jobs.iter().map(|(id, _)| res.assignment[id]).collect();
            machines.sort();
            machines.dedup();
            prop_assert_eq!(machines.len(), jobs.len(), "bag {} shares a machine", b);
        }
    }

    #[test]
    fn global_lpt_is_feasible_and_area_bounded(inst in instance_strategy(12)) {
        let s = global_bag_lpt(&inst).unwrap();
        let rep = validate_schedule(&inst, &s).unwrap();
        prop_assert!(rep.feasible);
        prop_assert!(rep.makespan <= area_bound(&inst));
    }

    #[test]
    fn optimum_ignores_job_order(inst in instance_strategy(8)) {
        let opt = brute_force(&inst, 10_000_000).unwrap().makespan;
        let mut jobs = inst.jobs().to_vec();
        jobs.reverse();
        let reversed = Instance::new(inst.machines(), jobs).unwrap();
        prop_assert_eq!(brute_force(&reversed, 10_000_000).unwrap().makespan, opt.clone());
        let lpt = makespan(&inst, &global_bag_lpt(&inst).unwrap()).unwrap();
        prop_assert!(opt <= lpt);
    }

    #[test]
    fn eptas_schedule_is_feasible(inst in instance_strategy(7), third in any::<bool>()) {
        let eps = if third { rat(1, 3) } else { rat(1, 2) };
        let (s, _) = eptas_solve(&inst, &eps, &SolveConfig::default()).unwrap();
        prop_assert!(validate_schedule(&inst, &s).unwrap().feasible);
    }
}
