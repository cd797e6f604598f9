//! Transition-guard predicates: disjunctive normal form over affine atoms
//! evaluated inside bounded variable boxes.
//!
//! Atoms are kept in a sign-canonical form (`g(Y) < 0` or `g(Y) <= 0` with
//! the leading coefficient scaled to +1) so that an inequality and its
//! complement share one atom with opposite polarity. Satisfiability, model
//! synthesis and valuation-to-predicate distance are computed exactly with
//! a small linear program per clause; no external solver is involved.
//!
//! Distance is measured against the topological closure of the satisfying
//! set: the minimum over an open set may not be attained, so strict atoms
//! are widened to non-strict for distance only. Satisfaction stays strict.

mod lp;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{Valuation, VarKind, VarSet};
use crate::stl::ast::{AffineExpr, Atom as StlAtom, CmpOp};
use lp::LpResult;

/// Default limit on atom-universe size for minterm enumeration.
pub const DEFAULT_ATOM_CAP: usize = 16;

/// Positive optimum threshold when deciding strict feasibility.
const STRICT_TOL: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum PredicateError {
    #[error("unbound variable `{0}` in predicate evaluation")]
    UnboundVariable(String),
    #[error("atom `{0}` mixes input and output variables")]
    MixedAtom(String),
    #[error("variable `{0}` is not declared in the domain box")]
    UnknownVariable(String),
    #[error("atom universe of size {0} exceeds the cap of {1}")]
    CapExceeded(usize, usize),
    #[error("atom mentions no variables")]
    EmptyAtom,
}

/// Relation of an affine expression to zero, before normal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
}

/// Sign-canonical affine atom: `expr op 0` with leading coefficient +1.
#[derive(Debug, Clone)]
pub struct PredAtom {
    pub expr: AffineExpr,
    pub op: CmpOp,
}

impl PredAtom {
    /// Crisp truth of the atom itself (ignores literal polarity).
    pub fn holds(&self, v: &Valuation) -> Result<bool, PredicateError> {
        let g = self
            .expr
            .eval(v)
            .ok_or_else(|| self.missing_var(v))?;
        Ok(match self.op {
            CmpOp::Lt => g < 0.0,
            CmpOp::Le => g <= 0.0,
        })
    }

    fn missing_var(&self, v: &Valuation) -> PredicateError {
        let name = self
            .expr
            .vars()
            .find(|n| v.get(n).is_none())
            .unwrap_or("<unknown>");
        PredicateError::UnboundVariable(name.to_string())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.expr.vars()
    }

    /// Input-pure / output-pure classification; `None` when mixed.
    pub fn kind(&self, vars: &VarSet) -> Result<Option<VarKind>, PredicateError> {
        let mut kind = None;
        for name in self.expr.vars() {
            let p = vars
                .get(name)
                .ok_or_else(|| PredicateError::UnknownVariable(name.to_string()))?;
            match kind {
                None => kind = Some(p.kind),
                Some(k) if k == p.kind => {}
                Some(_) => return Ok(None),
            }
        }
        Ok(kind)
    }

    fn key(&self) -> (Vec<(String, u64)>, u64, CmpOp) {
        (
            self.expr
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v.to_bits()))
                .collect(),
            self.expr.offset.to_bits(),
            self.op,
        )
    }
}

impl PartialEq for PredAtom {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for PredAtom {}
impl PartialOrd for PredAtom {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PredAtom {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}
impl std::hash::Hash for PredAtom {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

/// A canonical atom with polarity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: PredAtom,
    pub negated: bool,
}

impl Literal {
    /// Canonicalize `expr rel 0`: scale by the magnitude of the leading
    /// coefficient and fold sign flips into the polarity.
    pub fn normalize(expr: &AffineExpr, rel: Rel) -> Result<Literal, PredicateError> {
        let (_, &lead) = expr
            .terms
            .iter()
            .next()
            .ok_or(PredicateError::EmptyAtom)?;
        let scaled = expr.scaled(1.0 / lead.abs());
        let (canon, op, negated) = if lead > 0.0 {
            match rel {
                Rel::Lt => (scaled, CmpOp::Lt, false),
                Rel::Le => (scaled, CmpOp::Le, false),
                Rel::Gt => (scaled, CmpOp::Le, true),
                Rel::Ge => (scaled, CmpOp::Lt, true),
            }
        } else {
            let flipped = scaled.negated();
            match rel {
                Rel::Lt => (flipped, CmpOp::Le, true),
                Rel::Le => (flipped, CmpOp::Lt, true),
                Rel::Gt => (flipped, CmpOp::Lt, false),
                Rel::Ge => (flipped, CmpOp::Le, false),
            }
        };
        Ok(Literal {
            atom: PredAtom { expr: canon, op },
            negated,
        })
    }

    /// Canonical form of a surface-syntax atom (preserving its truth set;
    /// the quantitative value of the surface atom is not preserved).
    pub fn from_stl(atom: &StlAtom) -> Result<Literal, PredicateError> {
        let rel = match atom.op {
            CmpOp::Lt => Rel::Lt,
            CmpOp::Le => Rel::Le,
        };
        Literal::normalize(&atom.expr, rel)
    }

    pub fn complement(&self) -> Literal {
        Literal {
            atom: self.atom.clone(),
            negated: !self.negated,
        }
    }

    /// The literal with a strict comparison widened to non-strict.
    pub fn closed(&self) -> Literal {
        let op = match (self.atom.op, self.negated) {
            (CmpOp::Lt, false) => CmpOp::Le,
            (CmpOp::Le, true) => CmpOp::Lt,
            (op, _) => op,
        };
        Literal {
            atom: PredAtom {
                expr: self.atom.expr.clone(),
                op,
            },
            negated: self.negated,
        }
    }

    pub fn holds(&self, v: &Valuation) -> Result<bool, PredicateError> {
        Ok(self.atom.holds(v)? != self.negated)
    }

    /// As a linear constraint `coeffs . x <= rhs` (strict where noted).
    fn constraint(&self) -> LinCon {
        let g = &self.atom.expr;
        match (self.atom.op, self.negated) {
            // g < 0
            (CmpOp::Lt, false) => LinCon {
                coeffs: g.terms.clone(),
                rhs: -g.offset,
                strict: true,
            },
            // g <= 0
            (CmpOp::Le, false) => LinCon {
                coeffs: g.terms.clone(),
                rhs: -g.offset,
                strict: false,
            },
            // not (g < 0)  ==  -g <= 0
            (CmpOp::Lt, true) => LinCon {
                coeffs: g.terms.iter().map(|(k, c)| (k.clone(), -c)).collect(),
                rhs: g.offset,
                strict: false,
            },
            // not (g <= 0)  ==  -g < 0
            (CmpOp::Le, true) => LinCon {
                coeffs: g.terms.iter().map(|(k, c)| (k.clone(), -c)).collect(),
                rhs: g.offset,
                strict: true,
            },
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs = AffineExpr {
            terms: self.atom.expr.terms.clone(),
            offset: 0.0,
        };
        let op = match (self.atom.op, self.negated) {
            (CmpOp::Lt, false) => "<",
            (CmpOp::Le, false) => "<=",
            (CmpOp::Lt, true) => ">=",
            (CmpOp::Le, true) => ">",
        };
        write!(f, "{lhs} {op} {}", -self.atom.expr.offset)
    }
}

/// `coeffs . x <= rhs`, strict when `strict`.
#[derive(Debug, Clone)]
struct LinCon {
    coeffs: BTreeMap<String, f64>,
    rhs: f64,
    strict: bool,
}

/// Conjunction of literals; canonical: sorted, deduplicated, and never
/// containing an atom with both polarities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Returns `None` when the literal set is contradictory on its face.
    pub fn new(mut literals: Vec<Literal>) -> Option<Clause> {
        literals.sort();
        literals.dedup();
        for pair in literals.windows(2) {
            if pair[0].atom == pair[1].atom && pair[0].negated != pair[1].negated {
                return None;
            }
        }
        Some(Clause { literals })
    }

    pub fn empty() -> Clause {
        Clause {
            literals: Vec::new(),
        }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn holds(&self, v: &Valuation) -> Result<bool, PredicateError> {
        for lit in &self.literals {
            if !lit.holds(v)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_predicate(&self) -> Predicate {
        Predicate {
            clauses: vec![self.clone()],
        }
    }

    fn mentioned_vars(&self) -> BTreeSet<String> {
        self.literals
            .iter()
            .flat_map(|l| l.atom.vars().map(str::to_string))
            .collect()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return write!(f, "true");
        }
        let parts: Vec<String> = self.literals.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(" & "))
    }
}

/// Input-pure and output-pure factors of one clause.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitClause {
    pub input: Clause,
    pub output: Clause,
}

/// DNF predicate. The false predicate has no clauses; the true predicate is
/// the single empty clause.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    clauses: Vec<Clause>,
}

impl Predicate {
    pub fn true_() -> Predicate {
        Predicate {
            clauses: vec![Clause::empty()],
        }
    }

    pub fn false_() -> Predicate {
        Predicate {
            clauses: Vec::new(),
        }
    }

    pub fn from_clauses(clauses: Vec<Clause>) -> Predicate {
        let mut clauses = clauses;
        // the true clause absorbs everything else
        if clauses.iter().any(|c| c.literals.is_empty()) {
            return Predicate::true_();
        }
        clauses.sort();
        clauses.dedup();
        Predicate { clauses }
    }

    pub fn from_literal(lit: Literal) -> Predicate {
        Predicate {
            clauses: vec![Clause::new(vec![lit]).expect("single literal")],
        }
    }

    pub fn or(&self, other: &Predicate) -> Predicate {
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        Predicate::from_clauses(clauses)
    }

    pub fn is_true(&self) -> bool {
        self.clauses.iter().any(|c| c.literals.is_empty())
    }

    pub fn is_false(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn atoms(&self) -> BTreeSet<PredAtom> {
        self.clauses
            .iter()
            .flat_map(|c| c.literals.iter().map(|l| l.atom.clone()))
            .collect()
    }

    /// DNF evaluation with strict comparisons.
    pub fn evaluate(&self, v: &Valuation) -> Result<bool, PredicateError> {
        for clause in &self.clauses {
            if clause.holds(v)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Exact satisfiability of the predicate within the variable box.
    pub fn is_satisfiable(&self, domains: &VarSet) -> Result<bool, PredicateError> {
        for clause in &self.clauses {
            if clause_feasible(clause, domains)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Interior-preferring model: for the first feasible clause in stable
    /// order, the point maximizing the minimum slack over clause literals
    /// and box faces. Unmentioned variables sit at their domain midpoint.
    pub fn find_model(&self, domains: &VarSet) -> Result<Option<Valuation>, PredicateError> {
        for clause in &self.clauses {
            if let Some(v) = clause_model(clause, domains)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    /// Chebyshev (L-infinity) distance from `v` to the closure of the
    /// satisfying set inside the box; infinite when that set is empty.
    pub fn distance(&self, v: &Valuation, domains: &VarSet) -> Result<f64, PredicateError> {
        let mut best = f64::INFINITY;
        for clause in &self.clauses {
            best = best.min(clause_distance(clause, v, domains)?);
        }
        Ok(best)
    }

    /// Widen every strict atom to non-strict: the set distance is
    /// measured against exactly this predicate.
    pub fn closure(&self) -> Predicate {
        Predicate {
            clauses: self
                .clauses
                .iter()
                .map(|c| {
                    Clause::new(c.literals.iter().map(Literal::closed).collect())
                        .expect("closing literals cannot introduce complements")
                })
                .collect(),
        }
    }

    /// Factor every clause into input-pure and output-pure parts.
    pub fn split_io(&self, vars: &VarSet) -> Result<Vec<SplitClause>, PredicateError> {
        let mut out = Vec::with_capacity(self.clauses.len());
        for clause in &self.clauses {
            let mut input = Vec::new();
            let mut output = Vec::new();
            for lit in &clause.literals {
                match lit.atom.kind(vars)? {
                    Some(VarKind::Input) => input.push(lit.clone()),
                    Some(VarKind::Output) => output.push(lit.clone()),
                    // an atom with no variables cannot be constructed
                    None => {
                        return Err(PredicateError::MixedAtom(lit.atom_string()))
                    }
                }
            }
            out.push(SplitClause {
                input: Clause::new(input).expect("subset of a canonical clause"),
                output: Clause::new(output).expect("subset of a canonical clause"),
            });
        }
        Ok(out)
    }
}

impl Literal {
    fn atom_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return write!(f, "false");
        }
        if self.is_true() {
            return write!(f, "true");
        }
        let parts: Vec<String> = self.clauses.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" | "))
    }
}

// ---------------------------------------------------------------------------
// LP backends
// ---------------------------------------------------------------------------

struct ClauseLp {
    names: Vec<String>,
    lo: Vec<f64>,
    width: Vec<f64>,
    cons: Vec<LinCon>,
    has_strict: bool,
}

fn clause_lp(clause: &Clause, domains: &VarSet) -> Result<ClauseLp, PredicateError> {
    let mut names = Vec::new();
    for name in clause.mentioned_vars() {
        if domains.get(&name).is_none() {
            return Err(PredicateError::UnknownVariable(name));
        }
        names.push(name);
    }
    let lo: Vec<f64> = names.iter().map(|n| domains.get(n).unwrap().lo).collect();
    let width: Vec<f64> = names
        .iter()
        .map(|n| {
            let p = domains.get(n).unwrap();
            p.hi - p.lo
        })
        .collect();
    let cons: Vec<LinCon> = clause.literals.iter().map(Literal::constraint).collect();
    let has_strict = cons.iter().any(|c| c.strict);
    Ok(ClauseLp {
        names,
        lo,
        width,
        cons,
        has_strict,
    })
}

impl ClauseLp {
    fn coeff_row(&self, con: &LinCon) -> (Vec<f64>, f64) {
        // rewrite coeffs . x <= rhs with x = lo + y
        let mut row = vec![0.0; self.names.len()];
        let mut shift = 0.0;
        for (name, c) in &con.coeffs {
            let i = self.names.iter().position(|n| n == name).unwrap();
            row[i] = *c;
            shift += c * self.lo[i];
        }
        (row, con.rhs - shift)
    }
}

/// Exact clause feasibility: strict literals must admit a positive margin.
fn clause_feasible(clause: &Clause, domains: &VarSet) -> Result<bool, PredicateError> {
    let lp = clause_lp(clause, domains)?;
    let d = lp.names.len();
    if lp.cons.is_empty() {
        return Ok(true);
    }
    // variables: y_0..y_{d-1}, then the strict margin e (when needed)
    let nvars = d + usize::from(lp.has_strict);
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..d {
        let mut r = vec![0.0; nvars];
        r[i] = 1.0;
        rows.push((r, lp.width[i]));
    }
    for con in &lp.cons {
        let (mut row, rhs) = lp.coeff_row(con);
        row.resize(nvars, 0.0);
        if con.strict {
            row[d] = 1.0;
        }
        rows.push((row, rhs));
    }
    let mut obj = vec![0.0; nvars];
    if lp.has_strict {
        obj[d] = 1.0;
        let mut cap = vec![0.0; nvars];
        cap[d] = 1.0;
        rows.push((cap, 1.0));
    }
    match lp::maximize(&obj, &rows) {
        LpResult::Infeasible => Ok(false),
        LpResult::Unbounded => Ok(true),
        LpResult::Optimal { value, .. } => {
            if lp.has_strict {
                Ok(value > STRICT_TOL)
            } else {
                Ok(true)
            }
        }
    }
}

/// Max-min-slack center of a feasible clause; `None` when infeasible.
fn clause_model(clause: &Clause, domains: &VarSet) -> Result<Option<Valuation>, PredicateError> {
    if !clause_feasible(clause, domains)? {
        return Ok(None);
    }
    let lp = clause_lp(clause, domains)?;
    let d = lp.names.len();

    // stage 1: widest margin achievable on the strict literals alone
    let strict_margin = if lp.has_strict {
        let nvars = d + 1;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..d {
            let mut r = vec![0.0; nvars];
            r[i] = 1.0;
            rows.push((r, lp.width[i]));
        }
        for con in &lp.cons {
            let (mut row, rhs) = lp.coeff_row(con);
            row.resize(nvars, 0.0);
            if con.strict {
                row[d] = 1.0;
            }
            rows.push((row, rhs));
        }
        let mut cap = vec![0.0; nvars];
        cap[d] = 1.0;
        rows.push((cap, 1.0));
        let mut obj = vec![0.0; nvars];
        obj[d] = 1.0;
        match lp::maximize(&obj, &rows) {
            LpResult::Optimal { value, .. } => value,
            _ => return Ok(None), // feasibility was just checked
        }
    } else {
        0.0
    };

    // stage 2: uniform slack over all literals and the box faces of the
    // mentioned variables, holding half the strict margin
    let nvars = d + 1; // y..., r
    let r_col = d;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..d {
        // face y_i >= r  ->  -y_i + r <= 0
        let mut r1 = vec![0.0; nvars];
        r1[i] = -1.0;
        r1[r_col] = 1.0;
        rows.push((r1, 0.0));
        // face y_i + r <= width
        let mut r2 = vec![0.0; nvars];
        r2[i] = 1.0;
        r2[r_col] = 1.0;
        rows.push((r2, lp.width[i]));
    }
    for con in &lp.cons {
        let (base, rhs) = lp.coeff_row(con);
        let mut row = base.clone();
        row.resize(nvars, 0.0);
        row[r_col] = 1.0;
        rows.push((row, rhs));
        if con.strict {
            let mut srow = base;
            srow.resize(nvars, 0.0);
            rows.push((srow, rhs - strict_margin / 2.0));
        }
    }
    let mut obj = vec![0.0; nvars];
    obj[r_col] = 1.0;
    let point = match lp::maximize(&obj, &rows) {
        LpResult::Optimal { point, .. } => point,
        LpResult::Unbounded => {
            // no mentioned variables: any point works, fall through to centers
            Vec::new()
        }
        LpResult::Infeasible => return Ok(None),
    };

    let mut bindings: Vec<(&str, f64)> = Vec::new();
    let mut values: BTreeMap<&str, f64> = BTreeMap::new();
    for (i, name) in lp.names.iter().enumerate() {
        let y = point.get(i).copied().unwrap_or(0.0);
        values.insert(name.as_str(), lp.lo[i] + y);
    }
    for p in domains.iter() {
        let v = values
            .get(p.name.as_str())
            .copied()
            .unwrap_or((p.lo + p.hi) / 2.0);
        // clamp away floating fuzz at the box border
        bindings.push((p.name.as_str(), v.clamp(p.lo, p.hi)));
    }
    let vars = std::sync::Arc::new(domains.clone());
    let model = Valuation::new(vars, &bindings).expect("model clamped into the box");
    Ok(Some(model))
}

/// Chebyshev distance from `v` to the closed clause region inside the box.
fn clause_distance(
    clause: &Clause,
    v: &Valuation,
    domains: &VarSet,
) -> Result<f64, PredicateError> {
    let lp = clause_lp(clause, domains)?;
    let d = lp.names.len();
    if d == 0 {
        return Ok(0.0); // the true clause
    }
    let mut center = Vec::with_capacity(d);
    for name in &lp.names {
        center.push(
            v.get(name)
                .ok_or_else(|| PredicateError::UnboundVariable(name.clone()))?,
        );
    }
    let nvars = d + 1; // y..., r
    let r_col = d;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..d {
        let mut up = vec![0.0; nvars];
        up[i] = 1.0;
        rows.push((up, lp.width[i]));
        // x_i - v_i <= r  ->  y_i - r <= v_i - lo_i
        let mut r1 = vec![0.0; nvars];
        r1[i] = 1.0;
        r1[r_col] = -1.0;
        rows.push((r1, center[i] - lp.lo[i]));
        // v_i - x_i <= r  ->  -y_i - r <= lo_i - v_i
        let mut r2 = vec![0.0; nvars];
        r2[i] = -1.0;
        r2[r_col] = -1.0;
        rows.push((r2, lp.lo[i] - center[i]));
    }
    for con in &lp.cons {
        let (mut row, rhs) = lp.coeff_row(con);
        row.resize(nvars, 0.0);
        rows.push((row, rhs)); // closure: strictness dropped
    }
    let mut obj = vec![0.0; nvars];
    obj[r_col] = -1.0;
    match lp::maximize(&obj, &rows) {
        LpResult::Infeasible => Ok(f64::INFINITY),
        LpResult::Unbounded => Ok(0.0),
        LpResult::Optimal { value, .. } => Ok((-value).max(0.0)),
    }
}

// ---------------------------------------------------------------------------
// Minterms
// ---------------------------------------------------------------------------

/// A fixed, ordered universe of canonical atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomUniverse {
    atoms: Vec<PredAtom>,
}

impl AtomUniverse {
    pub fn from_set(atoms: BTreeSet<PredAtom>) -> AtomUniverse {
        AtomUniverse {
            atoms: atoms.into_iter().collect(),
        }
    }

    pub fn atoms(&self) -> &[PredAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index_of(&self, atom: &PredAtom) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    /// All satisfiable sign assignments, lexicographic in atom id with
    /// `true` ordered before `false`.
    pub fn enumerate_minterms(
        &self,
        domains: &VarSet,
        cap: usize,
    ) -> Result<Vec<Minterm>, PredicateError> {
        let k = self.atoms.len();
        if k > cap {
            return Err(PredicateError::CapExceeded(k, cap));
        }
        let mut out = Vec::new();
        for m in 0u64..(1u64 << k) {
            let bits: Vec<bool> = (0..k).map(|i| (m >> (k - 1 - i)) & 1 == 0).collect();
            let minterm = Minterm { bits };
            let clause = minterm.clause(self);
            if clause_feasible(&clause, domains)? {
                out.push(minterm);
            }
        }
        Ok(out)
    }

    /// The minterm cell containing a valuation.
    pub fn cell_of(&self, v: &Valuation) -> Result<Minterm, PredicateError> {
        let bits = self
            .atoms
            .iter()
            .map(|a| a.holds(v))
            .collect::<Result<Vec<bool>, _>>()?;
        Ok(Minterm { bits })
    }
}

/// A total sign assignment over an atom universe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Minterm {
    pub bits: Vec<bool>,
}

impl Minterm {
    pub fn clause(&self, universe: &AtomUniverse) -> Clause {
        let lits = self
            .bits
            .iter()
            .zip(universe.atoms())
            .map(|(&b, atom)| Literal {
                atom: atom.clone(),
                negated: !b,
            })
            .collect();
        Clause::new(lits).expect("distinct atoms cannot clash")
    }

    pub fn truth(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    /// Truth of a literal under this assignment; `None` if the atom is
    /// outside the universe.
    pub fn literal_truth(&self, universe: &AtomUniverse, lit: &Literal) -> Option<bool> {
        let idx = universe.index_of(&lit.atom)?;
        Some(self.bits[idx] != lit.negated)
    }

    /// Truth of a whole DNF predicate under this assignment.
    pub fn satisfies(&self, universe: &AtomUniverse, pred: &Predicate) -> Option<bool> {
        'clauses: for clause in pred.clauses() {
            for lit in clause.literals() {
                match self.literal_truth(universe, lit) {
                    Some(true) => {}
                    Some(false) => continue 'clauses,
                    None => return None,
                }
            }
            return Some(true);
        }
        Some(false)
    }
}

// ---------------------------------------------------------------------------
// Cubes: partial assignments used to merge minterm unions into short guards
// ---------------------------------------------------------------------------

/// Partial sign assignment over an atom universe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cube {
    pub bits: Vec<Option<bool>>,
}

impl Cube {
    pub fn from_minterm(m: &Minterm) -> Cube {
        Cube {
            bits: m.bits.iter().map(|&b| Some(b)).collect(),
        }
    }

    pub fn clause(&self, universe: &AtomUniverse) -> Clause {
        let lits = self
            .bits
            .iter()
            .zip(universe.atoms())
            .filter_map(|(b, atom)| {
                b.map(|b| Literal {
                    atom: atom.clone(),
                    negated: !b,
                })
            })
            .collect();
        Clause::new(lits).expect("distinct atoms cannot clash")
    }

    fn covers(&self, other: &Cube) -> bool {
        self.bits
            .iter()
            .zip(&other.bits)
            .all(|(a, b)| match (a, b) {
                (None, _) => true,
                (Some(x), Some(y)) => x == y,
                (Some(_), None) => false,
            })
    }

    /// Merge two cubes with identical support differing in one polarity.
    fn merge(&self, other: &Cube) -> Option<Cube> {
        let mut diff = None;
        for (i, (a, b)) in self.bits.iter().zip(&other.bits).enumerate() {
            match (a, b) {
                (Some(x), Some(y)) if x != y => {
                    if diff.is_some() {
                        return None;
                    }
                    diff = Some(i);
                }
                (Some(_), Some(_)) => {}
                (None, None) => {}
                _ => return None,
            }
        }
        diff.map(|i| {
            let mut bits = self.bits.clone();
            bits[i] = None;
            Cube { bits }
        })
    }
}

/// Exact disjunction simplification: greedily merge cube pairs that differ
/// in a single polarity, then drop subsumed cubes. The union of covered
/// cells is preserved exactly.
pub fn simplify_cubes(mut cubes: Vec<Cube>) -> Vec<Cube> {
    cubes.sort();
    cubes.dedup();
    loop {
        let mut merged = None;
        'outer: for i in 0..cubes.len() {
            for j in (i + 1)..cubes.len() {
                if let Some(m) = cubes[i].merge(&cubes[j]) {
                    merged = Some((i, j, m));
                    break 'outer;
                }
            }
        }
        match merged {
            Some((i, j, m)) => {
                cubes.remove(j);
                cubes.remove(i);
                cubes.push(m);
                cubes.sort();
                cubes.dedup();
            }
            None => break,
        }
    }
    let snapshot = cubes.clone();
    cubes.retain(|c| {
        !snapshot
            .iter()
            .any(|other| other != c && other.covers(c))
    });
    cubes.sort();
    cubes
}

pub fn cubes_to_predicate(cubes: &[Cube], universe: &AtomUniverse) -> Predicate {
    Predicate::from_clauses(cubes.iter().map(|c| c.clause(universe)).collect())
}

// ---------------------------------------------------------------------------
// Serialization: clause list of literals {coeffs, offset, op: ">"|">=", neg}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LitJson {
    coeffs: BTreeMap<String, f64>,
    offset: f64,
    op: String,
    neg: bool,
}

impl Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let clauses: Vec<Vec<LitJson>> = self
            .clauses
            .iter()
            .map(|c| {
                c.literals
                    .iter()
                    .map(|l| {
                        // emit in `f op 0` form with f = -g
                        let f = l.atom.expr.negated();
                        LitJson {
                            coeffs: f.terms.clone(),
                            offset: f.offset,
                            op: match l.atom.op {
                                CmpOp::Lt => ">".to_string(),
                                CmpOp::Le => ">=".to_string(),
                            },
                            neg: l.negated,
                        }
                    })
                    .collect()
            })
            .collect();
        clauses.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let clauses: Vec<Vec<LitJson>> = Vec::deserialize(d)?;
        let mut out = Vec::with_capacity(clauses.len());
        for clause in clauses {
            let mut lits = Vec::with_capacity(clause.len());
            for lj in clause {
                let rel = match lj.op.as_str() {
                    ">" => Rel::Gt,
                    ">=" => Rel::Ge,
                    other => return Err(D::Error::custom(format!("bad literal op `{other}`"))),
                };
                let expr = AffineExpr::new(lj.coeffs, lj.offset);
                let mut lit = Literal::normalize(&expr, rel)
                    .map_err(|e| D::Error::custom(e.to_string()))?;
                lit.negated ^= lj.neg;
                lits.push(lit);
            }
            match Clause::new(lits) {
                Some(c) => out.push(c),
                None => return Err(D::Error::custom("contradictory clause in predicate")),
            }
        }
        Ok(Predicate::from_clauses(out))
    }
}

// ---------------------------------------------------------------------------
