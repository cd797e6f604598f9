//! Formula abstract syntax.
//!
//! Atomic constraints are affine inequalities normalized to `g(Y) < 0` or
//! `g(Y) <= 0`; the comparison threshold is folded into the affine offset.
//! The quantitative value of an atom is `-g(v)`, so surface syntax like
//! `a >= 4` (stored as `4 - a <= 0`) evaluates to `a - 4`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::signal::{Valuation, VarSet};

/// `sum(coeff * var) + offset` over a nonempty variable subset.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub terms: BTreeMap<String, f64>,
    pub offset: f64,
}

impl AffineExpr {
    pub fn new(terms: BTreeMap<String, f64>, offset: f64) -> Self {
        let terms = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        AffineExpr { terms, offset }
    }

    pub fn eval(&self, v: &Valuation) -> Option<f64> {
        let mut acc = self.offset;
        for (name, coeff) in &self.terms {
            acc += coeff * v.get(name)?;
        }
        Some(acc)
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn negated(&self) -> AffineExpr {
        AffineExpr {
            terms: self.terms.iter().map(|(k, c)| (k.clone(), -c)).collect(),
            offset: -self.offset,
        }
    }

    pub fn scaled(&self, s: f64) -> AffineExpr {
        AffineExpr {
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c * s)).collect(),
            offset: self.offset * s,
        }
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, c) in &self.terms {
            if first {
                if *c == 1.0 {
                    write!(f, "{name}")?;
                } else if *c == -1.0 {
                    write!(f, "-{name}")?;
                } else {
                    write!(f, "{c}*{name}")?;
                }
                first = false;
            } else if *c >= 0.0 {
                if *c == 1.0 {
                    write!(f, " + {name}")?;
                } else {
                    write!(f, " + {c}*{name}")?;
                }
            } else if *c == -1.0 {
                write!(f, " - {name}")?;
            } else {
                write!(f, " - {}*{name}", -c)?;
            }
        }
        if first {
            write!(f, "{}", self.offset)?;
        } else if self.offset > 0.0 {
            write!(f, " + {}", self.offset)?;
        } else if self.offset < 0.0 {
            write!(f, " - {}", -self.offset)?;
        }
        Ok(())
    }
}

/// Comparison against zero in atom normal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
}

/// Atomic constraint `expr op 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub expr: AffineExpr,
    pub op: CmpOp,
}

impl Atom {
    /// Quantitative value: positive when satisfied with margin.
    pub fn robustness(&self, v: &Valuation) -> Option<f64> {
        self.expr.eval(v).map(|g| -g)
    }

    /// Crisp truth, strict where the comparison is strict.
    pub fn holds(&self, v: &Valuation) -> Option<bool> {
        let g = self.expr.eval(v)?;
        Some(match self.op {
            CmpOp::Lt => g < 0.0,
            CmpOp::Le => g <= 0.0,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // render `g + c0 op 0` as `g op -c0`
        let lhs = AffineExpr {
            terms: self.expr.terms.clone(),
            offset: 0.0,
        };
        let op = match self.op {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        };
        write!(f, "{lhs} {op} {}", -self.expr.offset)
    }
}

/// Time interval `[lo, hi]` or `[lo, inf)` with natural-number bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl Interval {
    pub fn bounded(lo: u32, hi: u32) -> Self {
        Interval { lo, hi: Some(hi) }
    }

    pub fn unbounded_from(lo: u32) -> Self {
        Interval { lo, hi: None }
    }

    pub fn full() -> Self {
        Interval { lo: 0, hi: None }
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi.is_none()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},inf)", self.lo),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Atom(Atom),
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
    Since(Interval, Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
    Once(Interval, Box<Formula>),
    Historically(Interval, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn until(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    pub fn since(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Since(i, Box::new(a), Box::new(b))
    }

    pub fn eventually(i: Interval, f: Formula) -> Formula {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn always(i: Interval, f: Formula) -> Formula {
        Formula::Always(i, Box::new(f))
    }

    pub fn once(i: Interval, f: Formula) -> Formula {
        Formula::Once(i, Box::new(f))
    }

    pub fn historically(i: Interval, f: Formula) -> Formula {
        Formula::Historically(i, Box::new(f))
    }

    /// Rewrite to the core constructors True, Atom, Not, Or, Until, Since.
    pub fn to_core(&self) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::Atom(a) => Formula::Atom(a.clone()),
            Formula::Not(f) => Formula::not(f.to_core()),
            Formula::Or(a, b) => Formula::or(a.to_core(), b.to_core()),
            Formula::And(a, b) => Formula::not(Formula::or(
                Formula::not(a.to_core()),
                Formula::not(b.to_core()),
            )),
            Formula::Implies(a, b) => Formula::or(Formula::not(a.to_core()), b.to_core()),
            Formula::Until(i, a, b) => Formula::until(*i, a.to_core(), b.to_core()),
            Formula::Since(i, a, b) => Formula::since(*i, a.to_core(), b.to_core()),
            Formula::Eventually(i, f) => Formula::until(*i, Formula::True, f.to_core()),
            Formula::Always(i, f) => Formula::not(Formula::until(
                *i,
                Formula::True,
                Formula::not(f.to_core()),
            )),
            Formula::Once(i, f) => Formula::since(*i, Formula::True, f.to_core()),
            Formula::Historically(i, f) => Formula::not(Formula::since(
                *i,
                Formula::True,
                Formula::not(f.to_core()),
            )),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => out.extend(a.expr.vars().map(str::to_string)),
            Formula::Not(f)
            | Formula::Eventually(_, f)
            | Formula::Always(_, f)
            | Formula::Once(_, f)
            | Formula::Historically(_, f) => f.collect_vars(out),
            Formula::Or(a, b)
            | Formula::And(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(_, a, b)
            | Formula::Since(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// All atoms of the formula, in syntactic order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => out.push(a),
            Formula::Not(f)
            | Formula::Eventually(_, f)
            | Formula::Always(_, f)
            | Formula::Once(_, f)
            | Formula::Historically(_, f) => f.collect_atoms(out),
            Formula::Or(a, b)
            | Formula::And(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(_, a, b)
            | Formula::Since(_, a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(x) => write!(f, "not ({x})"),
            Formula::Or(a, b) => write!(f, "({a}) or ({b})"),
            Formula::And(a, b) => write!(f, "({a}) and ({b})"),
            Formula::Implies(a, b) => write!(f, "({a}) -> ({b})"),
            Formula::Until(i, a, b) => write!(f, "({a}) U{i} ({b})"),
            Formula::Since(i, a, b) => write!(f, "({a}) S{i} ({b})"),
            Formula::Eventually(i, x) => write!(f, "F{i} ({x})"),
            Formula::Always(i, x) => write!(f, "G{i} ({x})"),
            Formula::Once(i, x) => write!(f, "P{i} ({x})"),
            Formula::Historically(i, x) => write!(f, "H{i} ({x})"),
        }
    }
}

/// A specification: declared input/output variables plus a formula over them.
#[derive(Debug, Clone, PartialEq)]
pub struct IaStlSpec {
    pub variables: Arc<VarSet>,
    pub formula: Formula,
}

impl IaStlSpec {
    pub fn input_vars(&self) -> VarSet {
        self.variables.restrict_kind(crate::signal::VarKind::Input)
    }

    pub fn output_vars(&self) -> VarSet {
        self.variables.restrict_kind(crate::signal::VarKind::Output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom_ge(name: &str, c: f64) -> Formula {
        // name >= c  ~>  c - name <= 0
        let mut terms = BTreeMap::new();
        terms.insert(name.to_string(), -1.0);
        Formula::Atom(Atom {
            expr: AffineExpr::new(terms, c),
            op: CmpOp::Le,
        })
    }

    #[test]
    fn to_core_definitional() {
        let i = Interval::bounded(0, 1);
        let f = Formula::eventually(i, atom_ge("c", 4.0));
        assert_eq!(
            f.to_core(),
            Formula::until(i, Formula::True, atom_ge("c", 4.0))
        );

        let h = Formula::historically(i, atom_ge("a", 4.0));
        assert_eq!(
            h.to_core(),
            Formula::not(Formula::since(
                i,
                Formula::True,
                Formula::not(atom_ge("a", 4.0))
            ))
        );

        let core = Formula::until(i, atom_ge("a", 0.0), atom_ge("b", 0.0));
        assert_eq!(core.to_core(), core);
    }
}
