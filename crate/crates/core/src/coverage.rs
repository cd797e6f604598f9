//! Coverage criteria over a symbolic automaton and the bookkeeping that
//! turns induced runs into coverage ratios.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Run, SymbolicAutomaton};

#[derive(Debug, Error, PartialEq)]
pub enum CoverageError {
    #[error("criterion has no requirements")]
    DegenerateCriterion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Location,
    Transition,
}

/// A testing criterion: the set of requirement ids to be visited.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub kind: CriterionKind,
    pub requirements: BTreeSet<usize>,
}

impl Criterion {
    pub fn locations(a: &SymbolicAutomaton) -> Criterion {
        Criterion {
            kind: CriterionKind::Location,
            requirements: a.locations.iter().map(|l| l.id).collect(),
        }
    }

    pub fn transitions(a: &SymbolicAutomaton) -> Criterion {
        Criterion {
            kind: CriterionKind::Transition,
            requirements: a.transitions.iter().map(|t| t.id).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }
}

/// Requirements of a criterion satisfied by one induced run.
pub fn requirements_of(run: &Run, criterion: &Criterion) -> BTreeSet<usize> {
    let visited: BTreeSet<usize> = match criterion.kind {
        CriterionKind::Location => run.locations.iter().copied().collect(),
        CriterionKind::Transition => run.transitions.iter().copied().collect(),
    };
    visited
        .intersection(&criterion.requirements)
        .copied()
        .collect()
}

/// An exact nonnegative rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den != 0, "ratio denominator must be nonzero");
        let g = gcd(num.max(1), den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    /// Integer percentage, rounded half up (5/14 renders as 36%).
    pub fn percent(&self) -> u64 {
        (200 * self.num + self.den) / (2 * self.den)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        ((self.num as u128) * (other.den as u128)).cmp(&((other.num as u128) * (self.den as u128)))
    }
}

/// Visit counts and per-test satisfied sets for one criterion.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CoverageLedger {
    pub counts: BTreeMap<usize, u64>,
    /// Satisfied requirement ids per recorded test, in recording order.
    pub per_test: Vec<BTreeSet<usize>>,
}

impl CoverageLedger {
    /// Record one induced run; returns the requirements newly satisfied.
    pub fn record(&mut self, run: &Run, criterion: &Criterion) -> BTreeSet<usize> {
        let satisfied = requirements_of(run, criterion);
        let mut fresh = BTreeSet::new();
        match criterion.kind {
            CriterionKind::Location => {
                for &q in &run.locations {
                    *self.counts.entry(q).or_insert(0) += 1;
                }
            }
            CriterionKind::Transition => {
                for &t in &run.transitions {
                    *self.counts.entry(t).or_insert(0) += 1;
                }
            }
        }
        for &r in &satisfied {
            if !self.satisfied_before(r) {
                fresh.insert(r);
            }
        }
        self.per_test.push(satisfied.clone());
        fresh
    }

    fn satisfied_before(&self, r: usize) -> bool {
        self.per_test.iter().any(|s| s.contains(&r))
    }

    /// Union of per-test satisfied sets.
    pub fn satisfied(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for s in &self.per_test {
            out.extend(s.iter().copied());
        }
        out
    }

    pub fn ratio(&self, criterion: &Criterion) -> Result<Ratio, CoverageError> {
        if criterion.is_empty() {
            return Err(CoverageError::DegenerateCriterion);
        }
        Ok(Ratio::new(
            self.satisfied().len() as u64,
            criterion.len() as u64,
        ))
    }
}
