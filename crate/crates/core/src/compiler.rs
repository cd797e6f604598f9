//! Translation of a specification into an equivalent deterministic,
//! complete symbolic automaton.
//!
//! Construction: the formula is normalized into an [`Obligation`] (negation
//! pushed to atom polarity, bounded until/release with an explicit
//! closed-inner-bound variant for residuals), past subformulas become fixed
//! width shift registers, and the automaton states are the reachable
//! `(canonical obligation, register bank)` pairs under single-step formula
//! progression over the satisfiable minterms of the formula's atoms. A
//! final pass collapses all states that cannot reach an accepting state
//! into one absorbing error location and merges bisimilar locations.
//!
//! The binding contract is run/verdict equivalence with the robustness
//! monitor: a run ends in the error location exactly when no extension of
//! the consumed prefix can satisfy the formula, and ends in an accepting
//! location exactly when the consumed prefix itself satisfies it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::automaton::{Location, SymbolicAutomaton, Transition, Verdict};
use crate::predicate::{
    cubes_to_predicate, simplify_cubes, AtomUniverse, Cube, Literal, Minterm, PredicateError,
};
use crate::signal::VarSet;
use crate::stl::ast::{Formula, IaStlSpec};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("unbounded interval outside the top-level always: {0}")]
    UnboundedOperator(String),
    #[error("future operator nested inside a past operator: {0}")]
    FutureInsidePast(String),
    #[error("past operator with unbounded interval: {0}")]
    UnboundedPast(String),
    #[error("state cap of {0} exceeded during determinization")]
    StateCapExceeded(usize),
    #[error("input automaton is not deterministic and complete: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    pub atom_cap: usize,
    pub state_cap: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            atom_cap: crate::predicate::DEFAULT_ATOM_CAP,
            state_cap: 4096,
        }
    }
}

// ---------------------------------------------------------------------------
// Obligations
// ---------------------------------------------------------------------------

/// Residual requirement over the remainder of a trace, in a canonical
/// syntactic normal form: operands of `And`/`Or` are flattened, sorted and
/// deduplicated, units absorbed, complementary literals collapsed.
///
/// `closed` marks the residual variant of until/release whose inner
/// quantifier includes the current step; source formulas always start with
/// the open variant, which does not constrain the left operand at the step
/// where evaluation begins.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Obligation {
    False,
    True,
    Lit {
        atom: usize,
        pos: bool,
    },
    PastLit {
        node: usize,
        pos: bool,
    },
    And(Vec<Obligation>),
    Or(Vec<Obligation>),
    Until {
        lo: u32,
        hi: Option<u32>,
        closed: bool,
        left: Box<Obligation>,
        right: Box<Obligation>,
    },
    Release {
        lo: u32,
        hi: Option<u32>,
        closed: bool,
        left: Box<Obligation>,
        right: Box<Obligation>,
    },
}

/// Crisp truths of the current step: one entry per universe atom and one
/// per past node.
pub struct StepTruth<'a> {
    pub atoms: &'a [bool],
    pub pasts: &'a [bool],
}

impl Obligation {
    fn and(items: Vec<Obligation>) -> Obligation {
        let mut flat = Vec::with_capacity(items.len());
        for it in items {
            match it {
                Obligation::True => {}
                Obligation::False => return Obligation::False,
                Obligation::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        flat.sort();
        flat.dedup();
        if Self::has_complementary(&flat) {
            return Obligation::False;
        }
        match flat.len() {
            0 => Obligation::True,
            1 => flat.pop().unwrap(),
            _ => Obligation::And(flat),
        }
    }

    fn or(items: Vec<Obligation>) -> Obligation {
        let mut flat = Vec::with_capacity(items.len());
        for it in items {
            match it {
                Obligation::False => {}
                Obligation::True => return Obligation::True,
                Obligation::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        flat.sort();
        flat.dedup();
        if Self::has_complementary(&flat) {
            return Obligation::True;
        }
        match flat.len() {
            0 => Obligation::False,
            1 => flat.pop().unwrap(),
            _ => Obligation::Or(flat),
        }
    }

    fn has_complementary(items: &[Obligation]) -> bool {
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                match (a, b) {
                    (
                        Obligation::Lit { atom: x, pos: p },
                        Obligation::Lit { atom: y, pos: q },
                    ) if x == y && p != q => return true,
                    (
                        Obligation::PastLit { node: x, pos: p },
                        Obligation::PastLit { node: y, pos: q },
                    ) if x == y && p != q => return true,
                    _ => {}
                }
            }
        }
        false
    }

    fn until(
        lo: u32,
        hi: Option<u32>,
        closed: bool,
        left: Obligation,
        right: Obligation,
    ) -> Obligation {
        if right == Obligation::False {
            return Obligation::False;
        }
        // a true left operand makes the inner quantifier irrelevant
        let closed = closed && left != Obligation::True;
        Obligation::Until {
            lo,
            hi,
            closed,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn release(
        lo: u32,
        hi: Option<u32>,
        closed: bool,
        left: Obligation,
        right: Obligation,
    ) -> Obligation {
        if right == Obligation::True {
            return Obligation::True;
        }
        let closed = closed && left != Obligation::False;
        Obligation::Release {
            lo,
            hi,
            closed,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Truth of the obligation when no further steps occur.
    pub fn holds_on_empty(&self) -> bool {
        match self {
            Obligation::True => true,
            Obligation::False => false,
            Obligation::Lit { .. } | Obligation::PastLit { .. } => false,
            Obligation::And(items) => items.iter().all(Obligation::holds_on_empty),
            Obligation::Or(items) => items.iter().any(Obligation::holds_on_empty),
            Obligation::Until { .. } => false,
            Obligation::Release { .. } => true,
        }
    }

    /// Residual obligation after consuming one step with the given truths.
    pub fn progress(&self, step: &StepTruth) -> Obligation {
        match self {
            Obligation::True => Obligation::True,
            Obligation::False => Obligation::False,
            Obligation::Lit { atom, pos } => {
                if step.atoms[*atom] == *pos {
                    Obligation::True
                } else {
                    Obligation::False
                }
            }
            Obligation::PastLit { node, pos } => {
                if step.pasts[*node] == *pos {
                    Obligation::True
                } else {
                    Obligation::False
                }
            }
            Obligation::And(items) => {
                Obligation::and(items.iter().map(|o| o.progress(step)).collect())
            }
            Obligation::Or(items) => {
                Obligation::or(items.iter().map(|o| o.progress(step)).collect())
            }
            Obligation::Until {
                lo,
                hi,
                closed,
                left,
                right,
            } => {
                let dec = hi.map(|h| h.saturating_sub(1));
                if *lo == 0 {
                    let now = right.progress(step);
                    let cont = if *hi == Some(0) {
                        Obligation::False
                    } else {
                        Obligation::until(0, dec, true, (**left).clone(), (**right).clone())
                    };
                    if *closed {
                        Obligation::or(vec![
                            now,
                            Obligation::and(vec![left.progress(step), cont]),
                        ])
                    } else {
                        Obligation::or(vec![now, cont])
                    }
                } else {
                    let cont = Obligation::until(
                        lo - 1,
                        dec,
                        true,
                        (**left).clone(),
                        (**right).clone(),
                    );
                    if *closed {
                        Obligation::and(vec![left.progress(step), cont])
                    } else {
                        cont
                    }
                }
            }
            Obligation::Release {
                lo,
                hi,
                closed,
                left,
                right,
            } => {
                let dec = hi.map(|h| h.saturating_sub(1));
                if *lo == 0 {
                    let now = right.progress(step);
                    let cont = if *hi == Some(0) {
                        Obligation::True
                    } else {
                        Obligation::release(0, dec, true, (**left).clone(), (**right).clone())
                    };
                    if *closed {
                        Obligation::and(vec![
                            now,
                            Obligation::or(vec![left.progress(step), cont]),
                        ])
                    } else {
                        Obligation::and(vec![now, cont])
                    }
                } else {
                    let cont = Obligation::release(
                        lo - 1,
                        dec,
                        true,
                        (**left).clone(),
                        (**right).clone(),
                    );
                    if *closed {
                        Obligation::or(vec![left.progress(step), cont])
                    } else {
                        cont
                    }
                }
            }
        }
    }
}

impl std::fmt::Display for Obligation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn iv(lo: u32, hi: Option<u32>) -> String {
            match hi {
                Some(h) => format!("[{lo},{h}]"),
                None => format!("[{lo},inf)"),
            }
        }
        match self {
            Obligation::True => write!(f, "true"),
            Obligation::False => write!(f, "false"),
            Obligation::Lit { atom, pos } => {
                write!(f, "{}a{atom}", if *pos { "" } else { "!" })
            }
            Obligation::PastLit { node, pos } => {
                write!(f, "{}p{node}", if *pos { "" } else { "!" })
            }
            Obligation::And(items) => {
                let parts: Vec<String> = items.iter().map(|o| o.to_string()).collect();
                write!(f, "({})", parts.join(" & "))
            }
            Obligation::Or(items) => {
                let parts: Vec<String> = items.iter().map(|o| o.to_string()).collect();
                write!(f, "({})", parts.join(" | "))
            }
            Obligation::Until {
                lo,
                hi,
                closed,
                left,
                right,
            } => {
                if **left == Obligation::True {
                    write!(f, "F{}({right})", iv(*lo, *hi))
                } else {
                    write!(
                        f,
                        "({left}) U{}{}({right})",
                        if *closed { "c" } else { "" },
                        iv(*lo, *hi)
                    )
                }
            }
            Obligation::Release {
                lo,
                hi,
                closed,
                left,
                right,
            } => {
                if **left == Obligation::False {
                    write!(f, "G{}({right})", iv(*lo, *hi))
                } else {
                    write!(
                        f,
                        "({left}) R{}{}({right})",
                        if *closed { "c" } else { "" },
                        iv(*lo, *hi)
                    )
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Past subformulas: shift registers over operand truths
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum PastExpr {
    True,
    False,
    Lit { atom: usize, pos: bool },
    Ref { node: usize, pos: bool },
    And(Vec<PastExpr>),
    Or(Vec<PastExpr>),
}

impl PastExpr {
    fn eval(&self, atoms: &[bool], pasts: &[bool]) -> bool {
        match self {
            PastExpr::True => true,
            PastExpr::False => false,
            PastExpr::Lit { atom, pos } => atoms[*atom] == *pos,
            PastExpr::Ref { node, pos } => pasts[*node] == *pos,
            PastExpr::And(items) => items.iter().all(|e| e.eval(atoms, pasts)),
            PastExpr::Or(items) => items.iter().any(|e| e.eval(atoms, pasts)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum PastKind {
    Historically,
    Once,
    Since,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PastNode {
    kind: PastKind,
    lo: u32,
    hi: u32,
    /// Left operand of since; unused for historically/once.
    left: Option<PastExpr>,
    right: PastExpr,
}

impl PastNode {
    fn width(&self) -> usize {
        self.hi as usize + 1
    }
}

/// Truth window of each past node's operands, newest entry first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Registers {
    bufs: Vec<RegBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
struct RegBuf {
    left: Vec<bool>,
    right: Vec<bool>,
}

impl Registers {
    fn fresh(table: &[PastNode]) -> Registers {
        Registers {
            bufs: vec![RegBuf::default(); table.len()],
        }
    }

    /// Push the current step's operand truths and evaluate every past node
    /// bottom-up (nested nodes precede their parents in the table).
    fn step(&self, table: &[PastNode], atoms: &[bool]) -> (Registers, Vec<bool>) {
        let mut next = self.clone();
        let mut truth = vec![false; table.len()];
        for (i, node) in table.iter().enumerate() {
            let r_now = node.right.eval(atoms, &truth);
            let buf = &mut next.bufs[i];
            buf.right.insert(0, r_now);
            buf.right.truncate(node.width());
            if let Some(left) = &node.left {
                let l_now = left.eval(atoms, &truth);
                buf.left.insert(0, l_now);
                buf.left.truncate(node.width());
            }
            let len = buf.right.len();
            let lo = node.lo as usize;
            truth[i] = match node.kind {
                PastKind::Historically => {
                    lo >= len || buf.right[lo..len.min(node.hi as usize + 1)].iter().all(|&b| b)
                }
                PastKind::Once => {
                    lo < len && buf.right[lo..len.min(node.hi as usize + 1)].iter().any(|&b| b)
                }
                PastKind::Since => {
                    let mut found = false;
                    for k in lo..len.min(node.hi as usize + 1) {
                        if buf.right[k] && (1..k).all(|j| buf.left[j]) {
                            found = true;
                            break;
                        }
                    }
                    found
                }
            };
        }
        (next, truth)
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct Translator<'a> {
    universe: &'a AtomUniverse,
    pasts: Vec<PastNode>,
    dedup: BTreeMap<String, usize>,
}

impl<'a> Translator<'a> {
    fn atom_lit(&self, atom: &crate::stl::ast::Atom, pos: bool) -> Result<Obligation, CompileError> {
        let lit = Literal::from_stl(atom)?;
        let idx = self
            .universe
            .index_of(&lit.atom)
            .expect("universe collected from this formula");
        Ok(Obligation::Lit {
            atom: idx,
            pos: pos != lit.negated,
        })
    }

    fn to_obligation(
        &mut self,
        f: &Formula,
        pos: bool,
        root: bool,
    ) -> Result<Obligation, CompileError> {
        match f {
            Formula::True => Ok(if pos {
                Obligation::True
            } else {
                Obligation::False
            }),
            Formula::Atom(a) => self.atom_lit(a, pos),
            Formula::Not(x) => self.to_obligation(x, !pos, false),
            Formula::Or(a, b) => {
                let (oa, ob) = (
                    self.to_obligation(a, pos, false)?,
                    self.to_obligation(b, pos, false)?,
                );
                Ok(if pos {
                    Obligation::or(vec![oa, ob])
                } else {
                    Obligation::and(vec![oa, ob])
                })
            }
            Formula::And(a, b) => {
                let (oa, ob) = (
                    self.to_obligation(a, pos, false)?,
                    self.to_obligation(b, pos, false)?,
                );
                Ok(if pos {
                    Obligation::and(vec![oa, ob])
                } else {
                    Obligation::or(vec![oa, ob])
                })
            }
            Formula::Implies(a, b) => {
                let (oa, ob) = (
                    self.to_obligation(a, !pos, false)?,
                    self.to_obligation(b, pos, false)?,
                );
                Ok(if pos {
                    Obligation::or(vec![oa, ob])
                } else {
                    Obligation::and(vec![oa, ob])
                })
            }
            Formula::Until(i, a, b) => {
                if i.hi.is_none() {
                    return Err(CompileError::UnboundedOperator(f.to_string()));
                }
                let (oa, ob) = (
                    self.to_obligation(a, pos, false)?,
                    self.to_obligation(b, pos, false)?,
                );
                Ok(if pos {
                    Obligation::until(i.lo, i.hi, false, oa, ob)
                } else {
                    Obligation::release(i.lo, i.hi, false, oa, ob)
                })
            }
            Formula::Eventually(i, x) => {
                if i.hi.is_none() {
                    return Err(CompileError::UnboundedOperator(f.to_string()));
                }
                let ox = self.to_obligation(x, pos, false)?;
                Ok(if pos {
                    Obligation::until(i.lo, i.hi, false, Obligation::True, ox)
                } else {
                    Obligation::release(i.lo, i.hi, false, Obligation::False, ox)
                })
            }
            Formula::Always(i, x) => {
                if i.hi.is_none() && !(root && pos) {
                    return Err(CompileError::UnboundedOperator(f.to_string()));
                }
                let ox = self.to_obligation(x, pos, false)?;
                Ok(if pos {
                    Obligation::release(i.lo, i.hi, false, Obligation::False, ox)
                } else {
                    Obligation::until(i.lo, i.hi, false, Obligation::True, ox)
                })
            }
            Formula::Since(_, _, _) | Formula::Once(_, _) | Formula::Historically(_, _) => {
                let node = self.register_past(f)?;
                Ok(Obligation::PastLit { node, pos })
            }
        }
    }

    fn to_past_expr(&mut self, f: &Formula, pos: bool) -> Result<PastExpr, CompileError> {
        match f {
            Formula::True => Ok(if pos { PastExpr::True } else { PastExpr::False }),
            Formula::Atom(a) => {
                let lit = Literal::from_stl(a)?;
                let idx = self
                    .universe
                    .index_of(&lit.atom)
                    .expect("universe collected from this formula");
                Ok(PastExpr::Lit {
                    atom: idx,
                    pos: pos != lit.negated,
                })
            }
            Formula::Not(x) => self.to_past_expr(x, !pos),
            Formula::Or(a, b) => {
                let (ea, eb) = (self.to_past_expr(a, pos)?, self.to_past_expr(b, pos)?);
                Ok(if pos {
                    PastExpr::Or(vec![ea, eb])
                } else {
                    PastExpr::And(vec![ea, eb])
                })
            }
            Formula::And(a, b) => {
                let (ea, eb) = (self.to_past_expr(a, pos)?, self.to_past_expr(b, pos)?);
                Ok(if pos {
                    PastExpr::And(vec![ea, eb])
                } else {
                    PastExpr::Or(vec![ea, eb])
                })
            }
            Formula::Implies(a, b) => {
                let (ea, eb) = (self.to_past_expr(a, !pos)?, self.to_past_expr(b, pos)?);
                Ok(if pos {
                    PastExpr::Or(vec![ea, eb])
                } else {
                    PastExpr::And(vec![ea, eb])
                })
            }
            Formula::Since(_, _, _) | Formula::Once(_, _) | Formula::Historically(_, _) => {
                let node = self.register_past(f)?;
                Ok(PastExpr::Ref { node, pos })
            }
            Formula::Until(_, _, _) | Formula::Eventually(_, _) | Formula::Always(_, _) => {
                Err(CompileError::FutureInsidePast(f.to_string()))
            }
        }
    }

    fn register_past(&mut self, f: &Formula) -> Result<usize, CompileError> {
        let (kind, interval, left, right) = match f {
            Formula::Historically(i, x) => (PastKind::Historically, i, None, x),
            Formula::Once(i, x) => (PastKind::Once, i, None, x),
            Formula::Since(i, a, b) => (PastKind::Since, i, Some(a), b),
            _ => unreachable!("callers match past operators"),
        };
        let hi = interval
            .hi
            .ok_or_else(|| CompileError::UnboundedPast(f.to_string()))?;
        let left = match left {
            Some(a) => Some(self.to_past_expr(a, true)?),
            None => None,
        };
        let right = self.to_past_expr(right, true)?;
        let node = PastNode {
            kind,
            lo: interval.lo,
            hi,
            left,
            right,
        };
        let key = format!("{node:?}");
        if let Some(&idx) = self.dedup.get(&key) {
            return Ok(idx);
        }
        let idx = self.pasts.len();
        self.pasts.push(node);
        self.dedup.insert(key, idx);
        Ok(idx)
    }
}

/// The normalized form of a specification formula, ready for progression.
pub struct NormalizedSpec {
    pub universe: AtomUniverse,
    pub obligation: Obligation,
    past_table: Vec<PastNode>,
}

impl NormalizedSpec {
    pub fn past_node_count(&self) -> usize {
        self.past_table.len()
    }
}

/// Collect the atom universe and normalize the formula.
pub fn normalize(spec: &IaStlSpec) -> Result<NormalizedSpec, CompileError> {
    let mut atoms = BTreeSet::new();
    for atom in spec.formula.atoms() {
        let lit = Literal::from_stl(atom)?;
        // insist on input-pure or output-pure atoms
        if lit.atom.kind(&spec.variables)?.is_none() {
            return Err(CompileError::Predicate(PredicateError::MixedAtom(
                lit.to_string(),
            )));
        }
        atoms.insert(lit.atom);
    }
    let universe = AtomUniverse::from_set(atoms);
    let mut tr = Translator {
        universe: &universe,
        pasts: Vec::new(),
        dedup: BTreeMap::new(),
    };
    let obligation = tr.to_obligation(&spec.formula, true, true)?;
    let past_table = tr.pasts;
    Ok(NormalizedSpec {
        universe,
        obligation,
        past_table,
    })
}

// ---------------------------------------------------------------------------
// Determinization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct StateKey {
    ob: Obligation,
    regs: Registers,
}

struct RawAutomaton {
    verdicts: Vec<Verdict>,
    /// succ[state][minterm] -> state
    succ: Vec<Vec<usize>>,
    init: usize,
}

fn determinize(
    normalized: &NormalizedSpec,
    minterms: &[Minterm],
    opts: &CompileOptions,
) -> Result<RawAutomaton, CompileError> {
    let table = &normalized.past_table;
    let sink_key = StateKey {
        ob: Obligation::False,
        regs: Registers::fresh(table),
    };
    let init_key = StateKey {
        ob: normalized.obligation.clone(),
        regs: Registers::fresh(table),
    };

    let mut index: BTreeMap<StateKey, usize> = BTreeMap::new();
    let mut states: Vec<StateKey> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut succ: Vec<Vec<usize>> = Vec::new();

    index.insert(init_key.clone(), 0);
    states.push(init_key);
    queue.push_back(0);

    while let Some(s) = queue.pop_front() {
        let key = states[s].clone();
        let mut row = Vec::with_capacity(minterms.len());
        for m in minterms {
            let (regs, pasts) = key.regs.step(table, &m.bits);
            let ob = key.ob.progress(&StepTruth {
                atoms: &m.bits,
                pasts: &pasts,
            });
            let next_key = if ob == Obligation::False {
                sink_key.clone()
            } else {
                StateKey { ob, regs }
            };
            let idx = match index.get(&next_key) {
                Some(&i) => i,
                None => {
                    let i = states.len();
                    if i >= opts.state_cap {
                        return Err(CompileError::StateCapExceeded(opts.state_cap));
                    }
                    index.insert(next_key.clone(), i);
                    states.push(next_key);
                    queue.push_back(i);
                    i
                }
            };
            row.push(idx);
        }
        // states pop in discovery order, so rows arrive in index order
        debug_assert_eq!(succ.len(), s);
        succ.push(row);
    }

    // accepting = obligation holds with no further steps
    let accepting: Vec<bool> = states.iter().map(|s| s.ob.holds_on_empty()).collect();

    // states from which no accepting state is reachable are all dead:
    // any extension of a prefix reaching them is violated
    let n = states.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, row) in succ.iter().enumerate() {
        for &d in row {
            preds[d].push(s);
        }
    }
    let mut alive = vec![false; n];
    let mut bfs: VecDeque<usize> = VecDeque::new();
    for (i, &acc) in accepting.iter().enumerate() {
        if acc {
            alive[i] = true;
            bfs.push_back(i);
        }
    }
    while let Some(s) = bfs.pop_front() {
        for &p in &preds[s] {
            if !alive[p] {
                alive[p] = true;
                bfs.push_back(p);
            }
        }
    }

    // collapse every dead state into one absorbing error location
    let any_dead = alive.iter().any(|a| !a);
    let mut remap = vec![usize::MAX; n];
    let mut verdicts = Vec::new();
    for (i, &a) in alive.iter().enumerate() {
        if a {
            remap[i] = verdicts.len();
            verdicts.push(if accepting[i] {
                Verdict::Accepting
            } else {
                Verdict::Active
            });
        }
    }
    let sink = if any_dead {
        verdicts.push(Verdict::ErrorSink);
        Some(verdicts.len() - 1)
    } else {
        None
    };
    for (i, &a) in alive.iter().enumerate() {
        if !a {
            remap[i] = sink.unwrap();
        }
    }
    let mut new_succ: Vec<Vec<usize>> = Vec::with_capacity(verdicts.len());
    for (i, row) in succ.iter().enumerate() {
        if alive[i] {
            new_succ.push(row.iter().map(|&d| remap[d]).collect());
        }
    }
    if let Some(sk) = sink {
        new_succ.push(vec![sk; minterms.len()]);
    }

    Ok(RawAutomaton {
        verdicts,
        succ: new_succ,
        init: remap[0],
    })
}

// ---------------------------------------------------------------------------
// Emission and minimization
// ---------------------------------------------------------------------------

/// Moore partition refinement over the minterm alphabet; returns the block
/// of each state with the initial state's block numbered in scan order.
fn refine(verdicts: &[Verdict], succ: &[Vec<usize>]) -> Vec<usize> {
    let n = verdicts.len();
    let mut block: Vec<usize> = verdicts
        .iter()
        .map(|v| match v {
            Verdict::Active => 0,
            Verdict::Accepting => 1,
            Verdict::ErrorSink => 2,
        })
        .collect();
    loop {
        let mut sigs: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next = vec![0usize; n];
        for s in 0..n {
            let sig = (
                block[s],
                succ[s].iter().map(|&d| block[d]).collect::<Vec<_>>(),
            );
            let id = sigs.len();
            let entry = sigs.entry(sig).or_insert(id);
            next[s] = *entry;
        }
        if next == block {
            return block;
        }
        block = next;
    }
}

fn emit(
    variables: Arc<VarSet>,
    universe: &AtomUniverse,
    minterms: &[Minterm],
    raw: &RawAutomaton,
) -> SymbolicAutomaton {
    let block = refine(&raw.verdicts, &raw.succ);

    // number blocks: initial first, then by first occurrence
    let mut order: BTreeMap<usize, usize> = BTreeMap::new();
    order.insert(block[raw.init], 0);
    for s in 0..raw.verdicts.len() {
        let b = block[s];
        let next = order.len();
        order.entry(b).or_insert(next);
    }
    let n_blocks = order.len();
    let mut rep = vec![usize::MAX; n_blocks];
    let mut verdicts = vec![Verdict::Active; n_blocks];
    for s in 0..raw.verdicts.len() {
        let b = order[&block[s]];
        if rep[b] == usize::MAX {
            rep[b] = s;
            verdicts[b] = raw.verdicts[s];
        }
    }

    let locations: Vec<Location> = (0..n_blocks)
        .map(|i| Location {
            id: i,
            name: format!("s{i}"),
            verdict: verdicts[i],
        })
        .collect();

    // one transition per ordered location pair, guard = union of cells
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for b in 0..n_blocks {
        let s = rep[b];
        for (mi, &d) in raw.succ[s].iter().enumerate() {
            groups.entry((b, order[&block[d]])).or_default().push(mi);
        }
    }
    let mut transitions = Vec::new();
    for ((src, dst), cells) in groups {
        let guard = if cells.len() == minterms.len() {
            crate::predicate::Predicate::true_()
        } else {
            let cubes: Vec<Cube> = cells
                .iter()
                .map(|&mi| Cube::from_minterm(&minterms[mi]))
                .collect();
            cubes_to_predicate(&simplify_cubes(cubes), universe)
        };
        transitions.push(Transition {
            id: transitions.len(),
            src,
            dst,
            guard,
        });
    }

    SymbolicAutomaton::new(variables, locations, vec![0], transitions)
}

/// Compile a specification into a deterministic complete automaton.
pub fn compile(spec: &IaStlSpec) -> Result<SymbolicAutomaton, CompileError> {
    compile_with(spec, &CompileOptions::default())
}

pub fn compile_with(
    spec: &IaStlSpec,
    opts: &CompileOptions,
) -> Result<SymbolicAutomaton, CompileError> {
    let normalized = normalize(spec)?;
    let minterms = normalized
        .universe
        .enumerate_minterms(&spec.variables, opts.atom_cap)?;
    let raw = determinize(&normalized, &minterms, opts)?;
    Ok(emit(
        spec.variables.clone(),
        &normalized.universe,
        &minterms,
        &raw,
    ))
}

/// Merge bisimilar locations of a deterministic complete automaton and
/// re-union parallel guards; induced-run verdicts are preserved.
pub fn minimize(a: &SymbolicAutomaton) -> Result<SymbolicAutomaton, CompileError> {
    let mut atoms = BTreeSet::new();
    for t in &a.transitions {
        atoms.extend(t.guard.atoms());
    }
    let universe = AtomUniverse::from_set(atoms);
    let minterms = universe.enumerate_minterms(&a.variables, crate::predicate::DEFAULT_ATOM_CAP)?;

    let n = a.locations.len();
    let mut succ: Vec<Vec<usize>> = Vec::with_capacity(n);
    for q in 0..n {
        let outgoing: Vec<&Transition> = a.outgoing(q).collect();
        let mut row = Vec::with_capacity(minterms.len());
        for m in &minterms {
            let enabled: Vec<&&Transition> = outgoing
                .iter()
                .filter(|t| m.satisfies(&universe, &t.guard).unwrap_or(false))
                .collect();
            match enabled.len() {
                1 => row.push(enabled[0].dst),
                0 => {
                    return Err(CompileError::InvalidInput(format!(
                        "location {} has an uncovered cell",
                        a.locations[q].name
                    )))
                }
                _ => {
                    return Err(CompileError::InvalidInput(format!(
                        "location {} has overlapping guards",
                        a.locations[q].name
                    )))
                }
            }
        }
        succ.push(row);
    }
    let raw = RawAutomaton {
        verdicts: a.locations.iter().map(|l| l.verdict).collect(),
        succ,
        init: a.initial_location(),
    };
    let mut out = emit(a.variables.clone(), &universe, &minterms, &raw);
    out.spec_hash = a.spec_hash.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Signal;
    use crate::stl::parser::parse_spec;

    pub const EXAMPLE_SPEC: &str = "\
input a in [-10, 10];
input b in [-10, 10];
output c in [-50, 50];
output d in [-50, 50];
formula: G( (H[0,1] a >= 4) -> ((b <= 0 and F[0,1] c >= 4) or (b > 0 and F[0,1] d >= 6)) )
";

    fn ob_of(text: &str, decls: &str) -> (NormalizedSpec, IaStlSpec) {
        let spec = parse_spec(&format!("{decls}\nformula: {text}")).unwrap();
        let n = normalize(&spec).unwrap();
        (n, spec)
    }

    const A_ONLY: &str = "input a in [-10, 10];";

    #[test]
    fn progress_invariant_maintained() {
        let (n, _) = ob_of("G a >= 4", A_ONLY);
        // single atom `a - 4 < 0`; `a >= 4` is its negation
        assert_eq!(n.universe.len(), 1);
        let hold = StepTruth {
            atoms: &[false], // a < 4 is false, i.e. a >= 4
            pasts: &[],
        };
        let broken = StepTruth {
            atoms: &[true],
            pasts: &[],
        };
        assert_eq!(n.obligation.progress(&hold), n.obligation);
        assert_eq!(n.obligation.progress(&broken), Obligation::False);
    }

    #[test]
    fn progress_eventually_shrinks_window() {
        let (n, _) = ob_of("F[0,1] c >= 4", "output c in [-50, 50];");
        let miss = StepTruth {
            atoms: &[true], // c < 4
            pasts: &[],
        };
        let got = n.obligation.progress(&miss);
        match &got {
            Obligation::Until { lo, hi, closed, left, .. } => {
                assert_eq!((*lo, *hi, *closed), (0, Some(0), false));
                assert_eq!(**left, Obligation::True);
            }
            other => panic!("expected a shortened eventually, got {other}"),
        }
        // and one more miss exhausts it
        assert_eq!(got.progress(&miss), Obligation::False);
        let hit = StepTruth {
            atoms: &[false],
            pasts: &[],
        };
        assert_eq!(got.progress(&hit), Obligation::True);
    }

    #[test]
    fn rejects_unbounded_outside_top_level() {
        let spec = parse_spec("input a in [0, 1];\nformula: F(G a > 0)").unwrap();
        assert!(matches!(
            normalize(&spec),
            Err(CompileError::UnboundedOperator(_))
        ));
        let spec = parse_spec("input a in [0, 1];\nformula: not G a > 0").unwrap();
        assert!(matches!(
            normalize(&spec),
            Err(CompileError::UnboundedOperator(_))
        ));
        // top-level G is allowed
        let spec = parse_spec("input a in [0, 1];\nformula: G a > 0").unwrap();
        assert!(normalize(&spec).is_ok());
    }

    #[test]
    fn rejects_future_inside_past() {
        let spec =
            parse_spec("input a in [0, 1];\nformula: H[0,2] (F[0,1] a > 0)").unwrap();
        assert!(matches!(
            normalize(&spec),
            Err(CompileError::FutureInsidePast(_))
        ));
    }

    #[test]
    fn rejects_mixed_atom() {
        let spec = parse_spec(
            "input a in [0, 1];\noutput c in [0, 1];\nformula: G a + c > 0",
        )
        .unwrap();
        assert!(matches!(
            normalize(&spec),
            Err(CompileError::Predicate(PredicateError::MixedAtom(_)))
        ));
    }

    #[test]
    fn compile_true_single_accepting_loop() {
        let spec = parse_spec("input a in [0, 1];\nformula: true").unwrap();
        let a = compile(&spec).unwrap();
        assert_eq!(a.locations.len(), 1);
        assert_eq!(a.locations[0].verdict, Verdict::Accepting);
        assert_eq!(a.transitions.len(), 1);
        assert!(a.transitions[0].guard.is_true());
        assert!(a.validate().unwrap().ok());
    }

    #[test]
    fn compile_global_invariant_two_locations() {
        let spec = parse_spec("input a in [-10, 10];\nformula: G a >= 4").unwrap();
        let a = compile(&spec).unwrap();
        assert_eq!(a.locations.len(), 2);
        let report = a.validate().unwrap();
        assert!(report.ok(), "witnesses: {:?}", report.witnesses);
        let init = a.initial_location();
        assert_eq!(a.locations[init].verdict, Verdict::Accepting);
        let sink = a.error_sink().expect("a violable invariant has a sink");
        // self-loop on holding, edge to the sink on breaking
        let w = Signal::from_rows(a.variables.clone(), vec![vec![5.0], vec![3.0]]).unwrap();
        let run = a.induced_run(&w).unwrap();
        assert_eq!(run.locations, vec![init, init, sink]);
    }

    #[test]
    fn compile_example_structure() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let a = compile(&spec).unwrap();
        let report = a.validate().unwrap();
        assert!(report.ok(), "witnesses: {:?}", report.witnesses);
        assert_eq!(a.locations.len(), 5);
        // 14 cross-location transitions plus the absorbing error self-loop
        assert_eq!(a.transitions.len(), 15);
        let sink = a.error_sink().unwrap();
        let into_sink: Vec<_> = a
            .transitions
            .iter()
            .filter(|t| t.dst == sink && t.src != sink)
            .collect();
        assert_eq!(into_sink.len(), 2);
    }

    #[test]
    fn minimize_is_idempotent_on_compiled_output() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let a = compile(&spec).unwrap();
        let m = minimize(&a).unwrap();
        assert_eq!(m.locations.len(), a.locations.len());
        assert_eq!(m.transitions.len(), a.transitions.len());
    }

    #[test]
    fn minimize_merges_bisimilar_locations() {
        use crate::automaton::{Location, Transition};
        use crate::predicate::Predicate;
        // two accepting locations with identical behavior collapse
        let vars = parse_spec("input a in [0, 1];\nformula: true")
            .unwrap()
            .variables;
        let dup = SymbolicAutomaton::new(
            vars,
            vec![
                Location {
                    id: 0,
                    name: "x".into(),
                    verdict: Verdict::Accepting,
                },
                Location {
                    id: 1,
                    name: "y".into(),
                    verdict: Verdict::Accepting,
                },
            ],
            vec![0],
            vec![
                Transition {
                    id: 0,
                    src: 0,
                    dst: 1,
                    guard: Predicate::true_(),
                },
                Transition {
                    id: 1,
                    src: 1,
                    dst: 0,
                    guard: Predicate::true_(),
                },
            ],
        );
        let m = minimize(&dup).unwrap();
        assert_eq!(m.locations.len(), 1);
    }
}
