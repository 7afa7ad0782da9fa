//! Machine patterns: multisets of (slot, size) entries for medium and large
//! jobs whose sizes sum to at most `T`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;

use crate::model::{format_rational, BagId, Rational};
use crate::preprocess::EpsParams;

/// Owner of a slot: a specific priority bag or any non-priority bag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotBag {
    Priority(BagId),
    X,
}

impl fmt::Display for SlotBag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotBag::Priority(b) => write!(f, "{b}"),
            SlotBag::X => f.write_str("X"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    /// Sorted entries.
    pub entries: Vec<(SlotBag, Rational)>,
}

impl Pattern {
    pub fn new(mut entries: Vec<(SlotBag, Rational)>) -> Self {
        entries.sort();
        Pattern { entries }
    }

    pub fn height(&self) -> Rational {
        self.entries.iter().map(|(_, s)| s).sum()
    }

    /// Multiplicity of the entry `(slot, size)`.
    pub fn chi(&self, slot: &SlotBag, size: &Rational) -> usize {
        self.entries
            .iter()
            .filter(|(b, s)| b == slot && s == size)
            .count()
    }

    /// 1 if a priority bag owns any entry; always 0 for other bags.
    pub fn chi_bag(&self, bag: &BagId) -> usize {
        usize::from(
            self.entries
                .iter()
                .any(|(b, _)| matches!(b, SlotBag::Priority(p) if p == bag)),
        )
    }

    pub fn key(&self) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(b, s)| format!("{b}:{}", format_rational(s)))
            .collect();
        format!("[{}]", parts.join(","))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Validity: height at most `T`, at most `q` entries, at most one entry per
/// priority bag. `X` entries are unrestricted otherwise.
pub fn is_valid_pattern(p: &Pattern, params: &EpsParams) -> bool {
    let mut seen = BTreeSet::new();
    for (b, _) in &p.entries {
        if let SlotBag::Priority(bag) = b {
            if !seen.insert(bag) {
                return false;
            }
        }
    }
    p.entries.len() <= params.q_cap() && p.height() <= params.t
}

/// Every valid pattern over the given entry alphabet, deduplicated, in
/// lexicographic order of the sorted entry lists.
///
/// `priority_sizes` lists, per priority bag, the medium/large sizes it holds;
/// `x_sizes` the sizes available to anonymous slots.
pub fn enumerate_patterns(
    params: &EpsParams,
    x_sizes: &BTreeSet<Rational>,
    priority_sizes: &BTreeMap<BagId, BTreeSet<Rational>>,
    cap: usize,
) -> Result<Vec<Pattern>, usize> {
    let mut out = BTreeSet::new();
    let bags: Vec<(&BagId, Vec<&Rational>)> = priority_sizes
        .iter()
        .map(|(b, s)| (b, s.iter().collect()))
        .collect();
    let xs: Vec<&Rational> = x_sizes.iter().rev().collect();
    let mut entries = Vec::new();
    let mut state = Enum {
        params,
        bags: &bags,
        xs: &xs,
        cap,
        out: &mut out,
    };
    state.priority(0, &mut entries, Rational::zero())?;
    Ok(out.into_iter().collect())
}

struct Enum<'a> {
    params: &'a EpsParams,
    bags: &'a [(&'a BagId, Vec<&'a Rational>)],
    xs: &'a [&'a Rational],
    cap: usize,
    out: &'a mut BTreeSet<Pattern>,
}

impl Enum<'_> {
    fn priority(
        &mut self,
        i: usize,
        entries: &mut Vec<(SlotBag, Rational)>,
        height: Rational,
    ) -> Result<(), usize> {
        if i == self.bags.len() {
            return self.anonymous(0, entries, height);
        }
        self.priority(i + 1, entries, height.clone())?;
        if entries.len() >= self.params.q_cap() {
            return Ok(());
        }
        let (bag, sizes) = &self.bags[i];
        for s in sizes {
            let h = &height + *s;
            if h <= self.params.t {
                entries.push((SlotBag::Priority((*bag).clone()), (*s).clone()));
                self.priority(i + 1, entries, h)?;
                entries.pop();
            }
        }
        Ok(())
    }

    /// Multisets of `X` entries, sizes taken in non-increasing order.
    fn anonymous(
        &mut self,
        from: usize,
        entries: &mut Vec<(SlotBag, Rational)>,
        height: Rational,
    ) -> Result<(), usize> {
        self.out.insert(Pattern::new(entries.clone()));
        if self.out.len() > self.cap {
            return Err(self.out.len());
        }
        if entries.len() >= self.params.q_cap() {
            return Ok(());
        }
        for k in from..self.xs.len() {
            let h = &height + self.xs[k];
            if h <= self.params.t {
                entries.push((SlotBag::X, self.xs[k].clone()));
                self.anonymous(k, entries, h)?;
                entries.pop();
            }
        }
        Ok(())
    }
}
