//! Fixed instances shared by the criterion benchmarks.

use bagsched::harness::{generate, GeneratorSpec, SizeDistribution};
use bagsched::Instance;

/// A seeded feasible instance with `jobs` jobs on 4 machines and 4 bags.
pub fn fixture(jobs: usize, seed: u64) -> Instance {
    generate(&GeneratorSpec {
        jobs,
        machines: 4,
        bags: 4,
        sizes: SizeDistribution::Bimodal { den: 20, large_percent: 40 },
        seed,
        feasible: true,
    })
    .expect("fixture spec is valid")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(super::fixture(8, 3), super::fixture(8, 3));
        assert_eq!(super::fixture(8, 3).jobs().len(), 8);
    }
}
