//! Guess bounds, geometric rounding, selection of the medium band and the
//! job/bag classification (large bags, size orderings, priority bags).

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::model::{ceil_int, int, pow, BagId, Instance, JobId, ModelError, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("bag {bag} holds {size} jobs but only {machines} machines exist")]
    InfeasibleBag {
        bag: BagId,
        size: usize,
        machines: usize,
    },
    #[error("no k in 1..={max} satisfies the medium-band area bound")]
    NoValidK { max: u64 },
    #[error("eps must be a unit fraction 1/t with t >= 2, got {0}")]
    BadEps(String),
    #[error("guess must be positive")]
    NonPositiveGuess,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Checks that `eps = 1/t` for an integer `t >= 2` and returns `t`.
pub fn unit_fraction_denominator(eps: &Rational) -> Result<u64, PreprocessError> {
    let bad = || PreprocessError::BadEps(crate::model::format_rational(eps));
    if !eps.numer().is_one() || !eps.is_positive() {
        return Err(bad());
    }
    match eps.denom().to_u64() {
        Some(t) if t >= 2 => Ok(t),
        _ => Err(bad()),
    }
}

fn saturating_usize(v: &BigInt) -> usize {
    v.to_usize().unwrap_or(usize::MAX)
}

/// ε and every constant derived from it for one guess.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsParams {
    pub eps: Rational,
    pub k: u32,
    /// Target height `1 + 2ε + ε²`.
    pub t: Rational,
    /// Number of medium-or-larger jobs a machine of height `t` can hold.
    pub q: BigInt,
    /// Distinct large sizes present after rounding.
    pub d: usize,
    pub z: BigInt,
    pub b_prime: BigInt,
    /// `Some` when `b_prime` was overridden for path coverage.
    pub forced_b_prime: Option<usize>,
    pub small_threshold: Rational,
    pub large_threshold: Rational,
    pub tiny_threshold: Rational,
}

impl EpsParams {
    pub fn new(eps: &Rational, k: u32, d: usize, force_b_prime: Option<usize>) -> Self {
        let one = Rational::one();
        let t = &one + int(2) * eps + eps * eps;
        let large_threshold = pow(eps, k as i64);
        let small_threshold = pow(eps, k as i64 + 1);
        let tiny_threshold = pow(eps, 2 * k as i64 + 11);
        let q = ceil_int(&(&t / &small_threshold));
        let z = BigInt::from(d) * &q + BigInt::one();
        let natural_b_prime = &z * &q;
        let b_prime = match force_b_prime {
            Some(b) => BigInt::from(b),
            None => natural_b_prime,
        };
        EpsParams {
            eps: eps.clone(),
            k,
            t,
            q,
            d,
            z,
            b_prime,
            forced_b_prime: force_b_prime,
            small_threshold,
            large_threshold,
            tiny_threshold,
        }
    }

    /// Parameters for a rounded instance: `d` is read off the instance.
    pub fn for_instance(
        rounded: &RoundedInstance,
        eps: &Rational,
        k: u32,
        force_b_prime: Option<usize>,
    ) -> Self {
        let large = pow(eps, k as i64);
        let d = rounded
            .instance
            .jobs()
            .iter()
            .filter(|j| j.size >= large)
            .map(|j| j.size.clone())
            .collect::<BTreeSet<_>>()
            .len();
        EpsParams::new(eps, k, d, force_b_prime)
    }

    pub fn class_of(&self, size: &Rational) -> JobClass {
        if size >= &self.large_threshold {
            JobClass::Large
        } else if size >= &self.small_threshold {
            JobClass::Medium
        } else {
            JobClass::Small
        }
    }

    pub fn q_cap(&self) -> usize {
        saturating_usize(&self.q)
    }

    pub fn b_prime_cap(&self) -> usize {
        saturating_usize(&self.b_prime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JobClass {
    Large,
    Medium,
    Small,
}

impl JobClass {
    pub fn is_medium_or_large(self) -> bool {
        !matches!(self, JobClass::Small)
    }
}

/// An instance whose sizes are integer powers of `1 + ε`, scaled so the
/// current guess becomes 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundedInstance {
    pub instance: Instance,
    /// Original job id → (original size, rounded scaled size).
    pub size_map: BTreeMap<JobId, (Rational, Rational)>,
    pub guess: Rational,
}

/// `lower = max(max size, area/m)`, `upper = 2·lower`.
pub fn bounds(instance: &Instance) -> Result<(Rational, Rational), PreprocessError> {
    for (bag, members) in instance.bags() {
        if members.len() > instance.machines() {
            return Err(PreprocessError::InfeasibleBag {
                bag,
                size: members.len(),
                machines: instance.machines(),
            });
        }
    }
    let area_bound = instance.total_area() / int(instance.machines() as i64);
    let lower = instance.max_size().max(area_bound);
    let upper = &lower * int(2);
    Ok((lower, upper))
}

/// Least integer power of `base` (> 1) that is `>= x` (x > 0).
pub fn round_up_to_power(x: &Rational, base: &Rational) -> (i64, Rational) {
    let mut e = 0i64;
    let mut p = Rational::one();
    if x <= &p {
        loop {
            let lower = &p / base;
            if &lower >= x {
                p = lower;
                e -= 1;
            } else {
                return (e, p);
            }
        }
    }
    while &p < x {
        p *= base;
        e += 1;
    }
    (e, p)
}

pub fn scale_and_round(
    instance: &Instance,
    guess: &Rational,
    eps: &Rational,
) -> Result<RoundedInstance, PreprocessError> {
    if !guess.is_positive() {
        return Err(PreprocessError::NonPositiveGuess);
    }
    let base = Rational::one() + eps;
    let mut size_map = BTreeMap::new();
    let scaled = instance.map_sizes(|j| {
        let (_, rounded) = round_up_to_power(&(&j.size / guess), &base);
        size_map.insert(j.id.clone(), (j.size.clone(), rounded.clone()));
        rounded
    })?;
    Ok(RoundedInstance {
        instance: scaled,
        size_map,
        guess: guess.clone(),
    })
}

/// Total size of jobs in `[eps^(k+1), eps^k)`.
pub fn band_area(instance: &Instance, eps: &Rational, k: u32) -> Rational {
    let hi = pow(eps, k as i64);
    let lo = pow(eps, k as i64 + 1);
    instance
        .jobs()
        .iter()
        .filter(|j| j.size >= lo && j.size < hi)
        .map(|j| &j.size)
        .sum()
}

/// Least `k` in `1..=1/ε²` whose band area is at most `ε²·m`.
pub fn select_k(rounded: &RoundedInstance, eps: &Rational) -> Result<u32, PreprocessError> {
    let t = unit_fraction_denominator(eps)?;
    let max = t * t;
    let budget = eps * eps * int(rounded.instance.machines() as i64);
    (1..=max)
        .find(|&k| band_area(&rounded.instance, eps, k as u32) <= budget)
        .map(|k| k as u32)
        .ok_or(PreprocessError::NoValidK { max })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagClassification {
    pub large_bags: BTreeSet<BagId>,
    pub priority: BTreeSet<BagId>,
    /// Per large size `s`: bags holding an `s`-job, by non-increasing count
    /// (ties by bag id).
    pub orderings: BTreeMap<Rational, Vec<BagId>>,
    /// `|B_l^s|` for every bag and every size present in it.
    pub size_counts: BTreeMap<(BagId, Rational), usize>,
}

impl BagClassification {
    pub fn is_priority(&self, bag: &BagId) -> bool {
        self.priority.contains(bag)
    }

    /// `|B^s_{o_s(pos)}|` with 1-based `pos`; 0 past the end of the list.
    pub fn count_at_position(&self, size: &Rational, pos: usize) -> usize {
        if pos == 0 {
            return 0;
        }
        self.orderings
            .get(size)
            .and_then(|o| o.get(pos - 1))
            .map(|bag| self.size_counts[&(bag.clone(), size.clone())])
            .unwrap_or(0)
    }
}

/// Orders bags holding jobs of `size` by non-increasing count, then bag id.
pub fn size_ordering(counts: &BTreeMap<(BagId, Rational), usize>, size: &Rational) -> Vec<BagId> {
    let mut bags: Vec<(usize, BagId)> = counts
        .iter()
        .filter(|((_, s), _)| s == size)
        .map(|((b, _), &c)| (c, b.clone()))
        .collect();
    bags.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    bags.into_iter().map(|(_, b)| b).collect()
}

pub fn classify(rounded: &RoundedInstance, params: &EpsParams) -> BagClassification {
    let inst = &rounded.instance;
    let mut size_counts: BTreeMap<(BagId, Rational), usize> = BTreeMap::new();
    let mut ml_counts: BTreeMap<BagId, usize> = BTreeMap::new();
    for job in inst.jobs() {
        *size_counts
            .entry((job.bag.clone(), job.size.clone()))
            .or_default() += 1;
        let entry = ml_counts.entry(job.bag.clone()).or_default();
        if params.class_of(&job.size).is_medium_or_large() {
            *entry += 1;
        }
    }
    let large_bag_threshold = &params.eps * int(inst.machines() as i64);
    let large_bags: BTreeSet<BagId> = ml_counts
        .iter()
        .filter(|(_, &c)| c > 0 && int(c as i64) >= large_bag_threshold)
        .map(|(b, _)| b.clone())
        .collect();

    let large_sizes: BTreeSet<Rational> = inst
        .jobs()
        .iter()
        .filter(|j| params.class_of(&j.size) == JobClass::Large)
        .map(|j| j.size.clone())
        .collect();
    let orderings: BTreeMap<Rational, Vec<BagId>> = large_sizes
        .into_iter()
        .map(|s| {
            let o = size_ordering(&size_counts, &s);
            (s, o)
        })
        .collect();

    let cap = params.b_prime_cap();
    let mut priority = large_bags.clone();
    for o in orderings.values() {
        priority.extend(o.iter().take(cap).cloned());
    }
    BagClassification {
        large_bags,
        priority,
        orderings,
        size_counts,
    }
}

/// Geometric guess grid `lower·(1+ε)^i` inside `[lower, upper]`, closed
/// with `upper` itself when the grid skips it.
pub fn guess_grid(lower: &Rational, upper: &Rational, eps: &Rational) -> Vec<Rational> {
    let mut grid = Vec::new();
    if lower.is_zero() {
        return grid;
    }
    let base = Rational::one() + eps;
    let mut g = lower.clone();
    while &g <= upper {
        grid.push(g.clone());
        g *= &base;
    }
    if grid.last() != Some(upper) {
        grid.push(upper.clone());
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rat, Job};

    fn instance(m: usize, jobs: &[(i64, i64, &str)]) -> Instance {
        Instance::new(
            m,
            jobs.iter()
                .enumerate()
                .map(|(i, (n, d, b))| Job::new(format!("j{i}"), rat(*n, *d), *b))
                .collect(),
        )
        .unwrap()
    }

    fn rounded_of(m: usize, sizes: &[(i64, i64, &str)]) -> RoundedInstance {
        scale_and_round(&instance(m, sizes), &int(1), &rat(1, 2)).unwrap()
    }

    #[test]
    fn bounds_examples() {
        let i = instance(2, &[(1, 1, "a"), (1, 1, "b")]);
        assert_eq!(bounds(&i).unwrap(), (int(1), int(2)));
        let i = instance(2, &[(3, 4, "a"), (1, 4, "b"), (1, 4, "c"), (1, 4, "d")]);
        assert_eq!(bounds(&i).unwrap(), (rat(3, 4), rat(3, 2)));
        let i = instance(2, &[(1, 1, "a"), (1, 1, "a"), (1, 1, "a")]);
        assert!(matches!(
            bounds(&i),
            Err(PreprocessError::InfeasibleBag { size: 3, .. })
        ));
    }

    #[test]
    fn rounding_examples() {
        let half = rat(1, 2);
        let r = scale_and_round(&instance(1, &[(3, 10, "a")]), &int(1), &half).unwrap();
        assert_eq!(r.instance.jobs()[0].size, rat(4, 9));
        let r = scale_and_round(&instance(1, &[(1, 1, "a")]), &int(1), &half).unwrap();
        assert_eq!(r.instance.jobs()[0].size, int(1));
        let r = scale_and_round(&instance(1, &[(3, 2, "a")]), &rat(3, 2), &half).unwrap();
        assert_eq!(r.instance.jobs()[0].size, int(1));
        assert_eq!(r.size_map[&JobId::from("j0")], (rat(3, 2), int(1)));
    }

    #[test]
    fn select_k_examples() {
        let half = rat(1, 2);
        assert_eq!(select_k(&rounded_of(4, &[(1, 1, "a"), (1, 1, "b")]), &half).unwrap(), 1);
        let four = rounded_of(4, &[(4, 9, "a"), (4, 9, "b"), (4, 9, "c"), (4, 9, "d")]);
        assert_eq!(band_area(&four.instance, &half, 1), rat(16, 9));
        assert_eq!(select_k(&four, &half).unwrap(), 2);
        assert_eq!(select_k(&rounded_of(100, &[(4, 9, "a")]), &half).unwrap(), 1);
    }

    #[test]
    fn classify_thresholds() {
        let p = EpsParams::new(&rat(1, 2), 1, 1, None);
        assert_eq!(p.class_of(&rat(1, 2)), JobClass::Large);
        assert_eq!(p.class_of(&rat(3, 8)), JobClass::Medium);
        assert_eq!(p.class_of(&rat(1, 4)), JobClass::Medium);
        assert_eq!(p.class_of(&rat(1, 8)), JobClass::Small);
    }

    #[test]
    fn derived_constants() {
        let p = EpsParams::new(&rat(1, 2), 1, 2, None);
        assert_eq!(p.t, rat(9, 4));
        assert_eq!(p.q, BigInt::from(9));
        assert_eq!(p.z, BigInt::from(19));
        assert_eq!(p.b_prime, BigInt::from(171));
        assert_eq!(p.tiny_threshold, rat(1, 1 << 13));
        assert!(p.small_threshold < p.large_threshold);
    }

    #[test]
    fn single_bag_is_priority() {
        let r = rounded_of(3, &[(1, 1, "only"), (1, 16, "only")]);
        let p = EpsParams::for_instance(&r, &rat(1, 2), 1, None);
        let cls = classify(&r, &p);
        assert!(cls.is_priority(&BagId::from("only")));
    }

    #[test]
    fn one_large_job_bag_is_large_when_eps_m_is_one() {
        let r = rounded_of(2, &[(1, 1, "a"), (1, 16, "b")]);
        let p = EpsParams::for_instance(&r, &rat(1, 2), 1, Some(0));
        let cls = classify(&r, &p);
        assert!(cls.large_bags.contains(&BagId::from("a")));
        assert!(cls.is_priority(&BagId::from("a")));
        assert!(!cls.is_priority(&BagId::from("b")));
    }

    #[test]
    fn forced_b_prime_limits_priority() {
        // m = 8, eps = 1/2: a bag needs 4 medium/large jobs to be large.
        let r = rounded_of(
            8,
            &[(1, 1, "a"), (1, 1, "a"), (1, 1, "b"), (1, 1, "c"), (1, 1, "c"), (1, 1, "c")],
        );
        let p = EpsParams::for_instance(&r, &rat(1, 2), 1, Some(1));
        let cls = classify(&r, &p);
        assert_eq!(cls.orderings[&int(1)], vec![BagId::from("c"), BagId::from("a"), BagId::from("b")]);
        assert_eq!(cls.priority, [BagId::from("c")].into_iter().collect());
        assert_eq!(cls.count_at_position(&int(1), 1), 3);
        assert_eq!(cls.count_at_position(&int(1), 5), 0);
    }

    #[test]
    fn grid_closes_with_upper() {
        assert_eq!(
            guess_grid(&int(1), &int(2), &rat(1, 2)),
            vec![int(1), rat(3, 2), int(2)]
        );
        assert_eq!(
            guess_grid(&int(1), &int(2), &rat(1, 3)),
            vec![int(1), rat(4, 3), rat(16, 9), int(2)]
        );
    }

    #[test]
    fn eps_validation() {
        assert_eq!(unit_fraction_denominator(&rat(1, 3)).unwrap(), 3);
        assert!(unit_fraction_denominator(&rat(2, 3)).is_err());
        assert!(unit_fraction_denominator(&int(1)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rounding_bounds(n in 1i64..500, d in 1i64..500, t in 2i64..5) {
                let eps = rat(1, t);
                let x = rat(n, d);
                let (e, r) = round_up_to_power(&x, &(Rational::one() + &eps));
                prop_assert!(r >= x);
                prop_assert!(r < (Rational::one() + &eps) * &x);
                prop_assert_eq!(pow(&(Rational::one() + &eps), e), r);
            }

            #[test]
            fn select_k_is_least_valid(sizes in proptest::collection::vec((1i64..40, 1i64..40), 1..12), m in 1usize..5) {
                let eps = rat(1, 2);
                let jobs: Vec<(i64, i64, &str)> = sizes.iter().map(|&(a, b)| (a.min(b), a.max(b), "x")).collect();
                let r = scale_and_round(&instance(m.max(jobs.len()), &jobs), &int(1), &eps).unwrap();
                let k = select_k(&r, &eps).unwrap();
                let budget = &eps * &eps * int(r.instance.machines() as i64);
                prop_assert!(band_area(&r.instance, &eps, k) <= budget);
                for smaller in 1..k {
                    prop_assert!(band_area(&r.instance, &eps, smaller) > budget);
                }
            }

            #[test]
            fn orderings_and_priority_are_consistent(
                jobs in proptest::collection::vec((0usize..6, 0u32..3), 1..16),
                force in proptest::option::of(0usize..3),
            ) {
                let sizes = [(1, 1), (2, 3), (4, 9)];
                let list: Vec<(i64, i64, String)> = jobs.iter()
                    .map(|&(b, s)| (sizes[s as usize].0, sizes[s as usize].1, format!("b{b}")))
                    .collect();
                let inst = Instance::new(16, list.iter().enumerate()
                    .map(|(i, (n, d, b))| Job::new(format!("j{i}"), rat(*n, *d), b.clone())).collect()).unwrap();
                let r = scale_and_round(&inst, &int(1), &rat(1, 2)).unwrap();
                let p = EpsParams::for_instance(&r, &rat(1, 2), 1, force);
                let cls = classify(&r, &p);
                for (s, o) in &cls.orderings {
                    let holders: BTreeSet<BagId> = r.instance.jobs().iter()
                        .filter(|j| &j.size == s).map(|j| j.bag.clone()).collect();
                    prop_assert_eq!(o.iter().cloned().collect::<BTreeSet<_>>(), holders);
                    for w in o.windows(2) {
                        prop_assert!(cls.size_counts[&(w[0].clone(), s.clone())] >= cls.size_counts[&(w[1].clone(), s.clone())]);
                    }
                    for b in o.iter().take(p.b_prime_cap()) {
                        prop_assert!(cls.priority.contains(b));
                    }
                }
                prop_assert!(cls.large_bags.is_subset(&cls.priority));
                let bound = BigInt::from(p.d) * &p.b_prime + BigInt::from(cls.large_bags.len());
                prop_assert!(BigInt::from(cls.priority.len()) <= bound);
            }
        }
    }
}
