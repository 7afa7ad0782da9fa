//! The pattern mixed-integer program: variables, constraint rows, integer
//! variable accounting and a plain-text LP export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::lp::Sense;
use super::pattern::{Pattern, SlotBag};
use crate::model::{denominator_lcm, format_rational, int, BagId, Instance, Rational};
use crate::preprocess::{BagClassification, EpsParams, JobClass};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    /// `x_p`: number of machines running pattern `p`.
    PatternCount { pattern: usize },
    /// `y_p^{B_l^s}`: jobs of bag `l` with small size `s` placed on top of `p`.
    SmallOnPattern {
        pattern: usize,
        bag: BagId,
        size: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilpVar {
    pub name: String,
    pub kind: VarKind,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowFamily {
    /// (1) at most `m` machines.
    MachineCount,
    /// (2) every medium/large job has a slot.
    SlotCoverage { slot: SlotBag, size: Rational },
    /// (3) every small job is placed.
    SmallCoverage { bag: BagId, size: Rational },
    /// (4) small area on top of a pattern fits under `T`.
    SmallArea { pattern: usize },
    /// (5) no small job of a bag on a pattern holding that bag, and at most
    /// `x_p` of them otherwise.
    BagExclusion { pattern: usize, bag: BagId },
}

impl RowFamily {
    pub fn number(&self) -> u8 {
        match self {
            RowFamily::MachineCount => 1,
            RowFamily::SlotCoverage { .. } => 2,
            RowFamily::SmallCoverage { .. } => 3,
            RowFamily::SmallArea { .. } => 4,
            RowFamily::BagExclusion { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilpRow {
    pub family: RowFamily,
    pub terms: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

impl MilpRow {
    pub fn lhs(&self, values: &[Rational]) -> Rational {
        self.terms.iter().map(|(j, a)| a * &values[*j]).sum()
    }

    pub fn holds(&self, values: &[Rational]) -> bool {
        let lhs = self.lhs(values);
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Ge => lhs >= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilpModel {
    pub patterns: Vec<Pattern>,
    pub vars: Vec<MilpVar>,
    pub rows: Vec<MilpRow>,
    pub machines: usize,
    pub t: Rational,
    pub priority: BTreeSet<BagId>,
    /// Index of `x_p` for every pattern.
    pub pattern_var: Vec<usize>,
    /// Index of `y_p^{B_l^s}` keyed by (pattern, bag, size).
    pub small_var: BTreeMap<(usize, BagId, Rational), usize>,
}

impl MilpModel {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn integer_flags(&self) -> Vec<bool> {
        self.vars.iter().map(|v| v.integer).collect()
    }

    /// Rows violated by `values`, with variable non-negativity and integrality
    /// checked as well. Empty means the point is a valid solution.
    pub fn violations(&self, values: &[Rational]) -> Vec<String> {
        let mut out = Vec::new();
        if values.len() != self.vars.len() {
            out.push(format!("expected {} values, got {}", self.vars.len(), values.len()));
            return out;
        }
        for (v, var) in values.iter().zip(&self.vars) {
            if v.is_negative() {
                out.push(format!("{} is negative", var.name));
            }
            if var.integer && !v.is_integer() {
                out.push(format!("{} = {} is not integral", var.name, format_rational(v)));
            }
        }
        for row in &self.rows {
            if !row.holds(values) {
                out.push(format!("({}) {:?} violated", row.family.number(), row.family));
            }
        }
        out
    }
}

fn short_hash(s: &str) -> String {
    // FNV-1a, 32 bits: stable across runs and platforms.
    let mut h: u32 = 0x811c_9dc5;
    for b in s.bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    format!("{h:08x}")
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Sizes of non-priority medium/large jobs: the alphabet of `X` slots.
pub fn x_slot_sizes(modified: &Instance, cls: &BagClassification, params: &EpsParams) -> BTreeSet<Rational> {
    modified
        .jobs()
        .iter()
        .filter(|j| !cls.is_priority(&j.bag) && params.class_of(&j.size).is_medium_or_large())
        .map(|j| j.size.clone())
        .collect()
}

/// Medium/large sizes held by each priority bag.
pub fn priority_slot_sizes(
    modified: &Instance,
    cls: &BagClassification,
    params: &EpsParams,
) -> BTreeMap<BagId, BTreeSet<Rational>> {
    let mut out: BTreeMap<BagId, BTreeSet<Rational>> = BTreeMap::new();
    for j in modified.jobs() {
        if cls.is_priority(&j.bag) && params.class_of(&j.size).is_medium_or_large() {
            out.entry(j.bag.clone()).or_default().insert(j.size.clone());
        }
    }
    out
}

pub fn build_milp(
    modified: &Instance,
    patterns: &[Pattern],
    params: &EpsParams,
    cls: &BagClassification,
) -> MilpModel {
    let mut ml_counts: BTreeMap<(SlotBag, Rational), usize> = BTreeMap::new();
    let mut small_counts: BTreeMap<(BagId, Rational), usize> = BTreeMap::new();
    let mut ml_sizes: BTreeSet<Rational> = BTreeSet::new();
    for j in modified.jobs() {
        match params.class_of(&j.size) {
            JobClass::Small => {
                *small_counts.entry((j.bag.clone(), j.size.clone())).or_default() += 1;
            }
            _ => {
                ml_sizes.insert(j.size.clone());
                let slot = if cls.is_priority(&j.bag) {
                    SlotBag::Priority(j.bag.clone())
                } else {
                    SlotBag::X
                };
                *ml_counts.entry((slot, j.size.clone())).or_default() += 1;
            }
        }
    }
    for s in &ml_sizes {
        ml_counts.entry((SlotBag::X, s.clone())).or_default();
    }

    let mut vars = Vec::new();
    let mut pattern_var = Vec::with_capacity(patterns.len());
    let mut small_var = BTreeMap::new();
    let hashes: Vec<String> = patterns.iter().map(|p| short_hash(&p.key())).collect();
    for (p, h) in hashes.iter().enumerate() {
        pattern_var.push(vars.len());
        vars.push(MilpVar {
            name: format!("x_{h}"),
            kind: VarKind::PatternCount { pattern: p },
            integer: true,
        });
    }
    for (p, h) in hashes.iter().enumerate() {
        for (bag, size) in small_counts.keys() {
            let integer = cls.is_priority(bag) && size > &params.tiny_threshold;
            small_var.insert((p, bag.clone(), size.clone()), vars.len());
            vars.push(MilpVar {
                name: format!(
                    "y_{h}_{}_{}",
                    sanitize(&bag.0),
                    short_hash(&format_rational(size))
                ),
                kind: VarKind::SmallOnPattern {
                    pattern: p,
                    bag: bag.clone(),
                    size: size.clone(),
                },
                integer,
            });
        }
    }

    let one = Rational::one();
    let mut rows = Vec::new();
    rows.push(MilpRow {
        family: RowFamily::MachineCount,
        terms: pattern_var.iter().map(|&v| (v, one.clone())).collect(),
        sense: Sense::Le,
        rhs: int(modified.machines() as i64),
    });
    for ((slot, size), &count) in &ml_counts {
        let terms = patterns
            .iter()
            .enumerate()
            .filter_map(|(p, pat)| {
                let chi = pat.chi(slot, size);
                (chi > 0).then(|| (pattern_var[p], int(chi as i64)))
            })
            .collect();
        rows.push(MilpRow {
            family: RowFamily::SlotCoverage {
                slot: slot.clone(),
                size: size.clone(),
            },
            terms,
            sense: Sense::Ge,
            rhs: int(count as i64),
        });
    }
    for ((bag, size), &count) in &small_counts {
        let terms = (0..patterns.len())
            .map(|p| (small_var[&(p, bag.clone(), size.clone())], one.clone()))
            .collect();
        rows.push(MilpRow {
            family: RowFamily::SmallCoverage {
                bag: bag.clone(),
                size: size.clone(),
            },
            terms,
            sense: Sense::Ge,
            rhs: int(count as i64),
        });
    }
    for (p, pat) in patterns.iter().enumerate() {
        let mut terms: Vec<(usize, Rational)> = small_counts
            .keys()
            .map(|(bag, size)| (small_var[&(p, bag.clone(), size.clone())], size.clone()))
            .collect();
        let room = &params.t - pat.height();
        if !room.is_zero() {
            terms.push((pattern_var[p], -room));
        }
        rows.push(MilpRow {
            family: RowFamily::SmallArea { pattern: p },
            terms,
            sense: Sense::Le,
            rhs: Rational::zero(),
        });
    }
    let small_bags: BTreeSet<&BagId> = small_counts.keys().map(|(b, _)| b).collect();
    for (p, pat) in patterns.iter().enumerate() {
        for bag in &small_bags {
            let mut terms: Vec<(usize, Rational)> = small_counts
                .keys()
                .filter(|(b, _)| b == *bag)
                .map(|(b, s)| (small_var[&(p, b.clone(), s.clone())], one.clone()))
                .collect();
            if pat.chi_bag(bag) == 0 {
                terms.push((pattern_var[p], -one.clone()));
            }
            rows.push(MilpRow {
                family: RowFamily::BagExclusion {
                    pattern: p,
                    bag: (*bag).clone(),
                },
                terms,
                sense: Sense::Le,
                rhs: Rational::zero(),
            });
        }
    }

    MilpModel {
        patterns: patterns.to_vec(),
        vars,
        rows,
        machines: modified.machines(),
        t: params.t.clone(),
        priority: cls.priority.clone(),
        pattern_var,
        small_var,
    }
}

pub fn count_integer_variables(model: &MilpModel) -> usize {
    model.vars.iter().filter(|v| v.integer).count()
}

/// Closed-form upper bound on the integer variable count, assembled from the
/// counting argument: at most `(E + 1)^q` patterns over `E` entry kinds, and
/// per pattern one integral small variable per (priority bag, small size above
/// the tiny threshold).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableBound {
    pub entry_kinds: usize,
    pub pattern_bound: BigInt,
    pub integral_small_pairs: usize,
    /// Bound using the actual pattern count.
    pub with_actual_patterns: BigInt,
    /// Bound using `pattern_bound` in place of the pattern count.
    pub closed_form: BigInt,
}

pub fn integer_variable_bound(
    model: &MilpModel,
    params: &EpsParams,
    ml_sizes: usize,
    small_sizes_above_tiny: usize,
) -> VariableBound {
    let priority = model.priority.len();
    let entry_kinds = ml_sizes * (priority + 1);
    let q = u32::try_from(params.q_cap().min(64)).unwrap_or(64);
    let pattern_bound = BigInt::from(entry_kinds + 1).pow(q);
    let integral_small_pairs = priority * small_sizes_above_tiny;
    let per_pattern = BigInt::from(1 + integral_small_pairs);
    VariableBound {
        entry_kinds,
        with_actual_patterns: BigInt::from(model.patterns.len()) * &per_pattern,
        closed_form: &pattern_bound * &per_pattern,
        pattern_bound,
        integral_small_pairs,
    }
}

fn format_coef(c: &BigInt) -> String {
    if c.is_negative() {
        format!("- {}", -c)
    } else {
        format!("+ {c}")
    }
}

/// Writes the model in CPLEX LP syntax. Rows with fractional coefficients are
/// multiplied by the lcm of their denominators so all numbers are exact
/// integers; the factor is noted in a comment.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ pattern feasibility program\n");
    out.push_str("Minimize\n obj: 0\nSubject To\n");
    for (i, row) in model.rows.iter().enumerate() {
        let coefs: Vec<&Rational> = row.terms.iter().map(|(_, a)| a).chain([&row.rhs]).collect();
        let scale = denominator_lcm(coefs);
        let scale_r = Rational::from_integer(scale.clone());
        if !scale.is_one() {
            let _ = writeln!(out, "\\ row {i} scaled by {scale}");
        }
        let _ = write!(out, " r{i}_c{}:", row.family.number());
        if row.terms.is_empty() {
            let _ = write!(out, " 0 {}", model.vars.first().map_or("x".into(), |v| v.name.clone()));
        }
        for (j, a) in &row.terms {
            let c = (a * &scale_r).to_integer();
            let _ = write!(out, " {} {}", format_coef(&c), model.vars[*j].name);
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", (&row.rhs * &scale_r).to_integer());
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        let _ = writeln!(out, " {} >= 0", v.name);
    }
    out.push_str("General\n");
    for v in model.vars.iter().filter(|v| v.integer) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}
