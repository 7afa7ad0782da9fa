//! Exact rational simplex for linear feasibility systems.
//!
//! Phase I only: the pattern program has no objective, so the question is
//! whether `{x >= lower, x <= upper, A x (<=,>=,=) b}` is non-empty. Pivoting
//! follows Bland's rule, so the method terminates without tolerances.

use num_traits::{Signed, Zero};

use crate::model::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub terms: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, Rational)>, sense: Sense, rhs: Rational) -> Self {
        Constraint { terms, sense, rhs }
    }

    pub fn lhs(&self, values: &[Rational]) -> Rational {
        self.terms.iter().map(|(j, a)| a * &values[*j]).sum()
    }

    pub fn is_satisfied(&self, values: &[Rational]) -> bool {
        let lhs = self.lhs(values);
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Ge => lhs >= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

/// Linear system over non-negative variables with optional bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSystem {
    pub num_vars: usize,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<Rational>,
    pub upper: Vec<Option<Rational>>,
}

impl LinearSystem {
    pub fn new(num_vars: usize) -> Self {
        LinearSystem {
            num_vars,
            constraints: Vec::new(),
            lower: vec![Rational::zero(); num_vars],
            upper: vec![None; num_vars],
        }
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn is_satisfied(&self, values: &[Rational]) -> bool {
        values.len() == self.num_vars
            && values.iter().zip(&self.lower).all(|(v, l)| v >= l)
            && values
                .iter()
                .zip(&self.upper)
                .all(|(v, u)| u.as_ref().is_none_or(|u| v <= u))
            && self.constraints.iter().all(|c| c.is_satisfied(values))
    }

    /// A point of the system, or `None` when it is empty.
    pub fn feasible_point(&self) -> Option<Vec<Rational>> {
        let n = self.num_vars;
        for j in 0..n {
            if let Some(u) = &self.upper[j] {
                if u < &self.lower[j] {
                    return None;
                }
            }
        }
        // Shift x = lower + x' so every variable is plain non-negative.
        // Variables fixed by their bounds drop out of the tableau.
        let fixed: Vec<bool> = (0..n)
            .map(|j| self.upper[j].as_ref() == Some(&self.lower[j]))
            .collect();
        let mut rows: Vec<(Vec<(usize, Rational)>, Sense, Rational)> = Vec::new();
        for c in &self.constraints {
            let shift: Rational = c.terms.iter().map(|(j, a)| a * &self.lower[*j]).sum();
            let terms: Vec<(usize, Rational)> =
                c.terms.iter().filter(|(j, a)| !a.is_zero() && !fixed[*j]).cloned().collect();
            let rhs = &c.rhs - shift;
            if terms.is_empty() {
                let ok = match c.sense {
                    Sense::Le => !rhs.is_negative(),
                    Sense::Ge => !rhs.is_positive(),
                    Sense::Eq => rhs.is_zero(),
                };
                if !ok {
                    return None;
                }
                continue;
            }
            rows.push((terms, c.sense, rhs));
        }
        for j in 0..n {
            if fixed[j] {
                continue;
            }
            if let Some(u) = &self.upper[j] {
                rows.push((
                    vec![(j, Rational::from_integer(1.into()))],
                    Sense::Le,
                    u - &self.lower[j],
                ));
            }
        }
        let shifted = phase_one(n, rows)?;
        Some(
            shifted
                .into_iter()
                .zip(&self.lower)
                .map(|(v, l)| v + l)
                .collect(),
        )
    }
}

/// Dense-tableau phase I. Columns: structural, then one slack per inequality,
/// then one artificial per row lacking a unit slack.
fn phase_one(n: usize, rows: Vec<(Vec<(usize, Rational)>, Sense, Rational)>) -> Option<Vec<Rational>> {
    let m = rows.len();
    if m == 0 {
        return Some(vec![Rational::zero(); n]);
    }
    let slack_count = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    // Normalise to rhs >= 0, remembering the slack sign.
    struct Row {
        coeffs: Vec<(usize, Rational)>,
        slack: Option<bool>, // Some(true): +1 slack, Some(false): -1 surplus
        rhs: Rational,
    }
    let mut norm = Vec::with_capacity(m);
    for (terms, sense, rhs) in rows {
        let flip = rhs.is_negative();
        let coeffs = if flip {
            terms.into_iter().map(|(j, a)| (j, -a)).collect()
        } else {
            terms
        };
        let rhs = if flip { -rhs } else { rhs };
        let slack = match (sense, flip) {
            (Sense::Eq, _) => None,
            (Sense::Le, false) | (Sense::Ge, true) => Some(true),
            (Sense::Ge, false) | (Sense::Le, true) => Some(false),
        };
        norm.push(Row { coeffs, slack, rhs });
    }
    let art_count = norm.iter().filter(|r| r.slack != Some(true)).count();
    let width = n + slack_count + art_count;
    let rhs_col = width;
    let mut tab: Vec<Vec<Rational>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut is_art = vec![false; width + 1];
    let (mut s_idx, mut a_idx) = (n, n + slack_count);
    let one = Rational::from_integer(1.into());
    for row in &norm {
        let mut t = vec![Rational::zero(); width + 1];
        for (j, a) in &row.coeffs {
            t[*j] += a;
        }
        t[rhs_col] = row.rhs.clone();
        match row.slack {
            Some(true) => {
                t[s_idx] = one.clone();
                basis.push(s_idx);
                s_idx += 1;
            }
            Some(false) => {
                t[s_idx] = -one.clone();
                s_idx += 1;
                t[a_idx] = one.clone();
                is_art[a_idx] = true;
                basis.push(a_idx);
                a_idx += 1;
            }
            None => {
                t[a_idx] = one.clone();
                is_art[a_idx] = true;
                basis.push(a_idx);
                a_idx += 1;
            }
        }
        tab.push(t);
    }
    // Reduced costs of "minimise the sum of artificials".
    let mut cost = vec![Rational::zero(); width + 1];
    for (r, &b) in basis.iter().enumerate() {
        if is_art[b] {
            for (c, v) in tab[r].iter().enumerate() {
                if !is_art[c] && !v.is_zero() {
                    cost[c] -= v;
                }
            }
        }
    }
    for (c, a) in is_art.iter().enumerate() {
        if *a {
            cost[c] = Rational::zero();
        }
    }

    loop {
        let Some(enter) = (0..width).find(|&c| cost[c].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Rational)> = None;
        for r in 0..m {
            let a = &tab[r][enter];
            if a.is_positive() {
                let ratio = &tab[r][rhs_col] / a;
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        // Phase I is bounded below by zero, so an entering column always has
        // a positive entry.
        let (pr, _) = leave.expect("phase I objective is bounded");
        pivot(&mut tab, &mut cost, pr, enter);
        basis[pr] = enter;
    }

    let infeasibility: Rational = basis
        .iter()
        .enumerate()
        .filter(|(_, b)| is_art[**b])
        .map(|(r, _)| tab[r][rhs_col].clone())
        .sum();
    if infeasibility.is_positive() {
        return None;
    }
    let mut x = vec![Rational::zero(); n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tab[r][rhs_col].clone();
        }
    }
    Some(x)
}

fn pivot(tab: &mut [Vec<Rational>], cost: &mut [Rational], pr: usize, pc: usize) {
    let inv = tab[pr][pc].recip();
    for v in tab[pr].iter_mut() {
        if !v.is_zero() {
            *v *= &inv;
        }
    }
    let nz: Vec<(usize, Rational)> = tab[pr]
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(c, v)| (c, v.clone()))
        .collect();
    for (r, row) in tab.iter_mut().enumerate() {
        if r == pr || row[pc].is_zero() {
            continue;
        }
        let f = row[pc].clone();
        for (c, v) in &nz {
            row[*c] -= &f * v;
        }
    }
    if !cost[pc].is_zero() {
        let f = cost[pc].clone();
        for (c, v) in &nz {
            cost[*c] -= &f * v;
        }
    }
}
