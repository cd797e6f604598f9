//! Cooperative reachability games over a symbolic automaton.
//!
//! The tester picks inputs, the system answers with outputs, and a target
//! location should be reached. Per turn the tester can *force* progress
//! when some input reaches the next region for every output, and can only
//! *cooperate* when progress additionally needs a helpful output. The
//! winning region is computed by a nested fixpoint that prefers force
//! steps and spends cooperative steps only when forcing stalls; its
//! first-entry indices give each location a lexicographic rank that every
//! strategy edge strictly decreases.
//!
//! Exactness relies on guards whose atoms are input-pure or output-pure:
//! the input cells and output cells then partition independently and the
//! force condition is a finite check over cell pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::automaton::SymbolicAutomaton;
use crate::predicate::{
    cubes_to_predicate, simplify_cubes, AtomUniverse, Clause, Cube, Literal, Minterm, PredAtom,
    Predicate, PredicateError, DEFAULT_ATOM_CAP,
};
use crate::signal::VarKind;

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("target set is empty")]
    EmptyTargets,
    #[error("automaton is not deterministic over cell ({0}, {1})")]
    NonDeterministic(String, String),
}

/// A reachability game: deterministic complete automaton plus targets.
pub struct Game<'a> {
    pub automaton: &'a SymbolicAutomaton,
    pub targets: BTreeSet<usize>,
}

impl<'a> Game<'a> {
    pub fn new(automaton: &'a SymbolicAutomaton, targets: BTreeSet<usize>) -> Result<Self, GameError> {
        if targets.is_empty() {
            return Err(GameError::EmptyTargets);
        }
        Ok(Game { automaton, targets })
    }
}

/// First fixpoint region containing a location: (cooperative steps, force
/// steps), lexicographically ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(pub u32, pub u32);

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocClass {
    Target,
    Force,
    Coop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyEdge {
    pub transition: usize,
    pub src: usize,
    pub dst: usize,
}

/// The winning-region subgraph annotated with ranks, location classes and
/// the per-location set of good inputs.
#[derive(Debug, Clone)]
pub struct StrategyAutomaton {
    pub initial: usize,
    pub targets: BTreeSet<usize>,
    pub rank: BTreeMap<usize, Rank>,
    pub class: BTreeMap<usize, LocClass>,
    pub sigma: BTreeMap<usize, Predicate>,
    pub edges: Vec<StrategyEdge>,
}

impl StrategyAutomaton {
    pub fn region(&self) -> BTreeSet<usize> {
        self.rank.keys().copied().collect()
    }

    pub fn edges_from(&self, q: usize) -> impl Iterator<Item = &StrategyEdge> {
        self.edges.iter().filter(move |e| e.src == q)
    }

    /// JSON dump: every region location with rank, class and good-input
    /// predicate, plus the strategy edges.
    pub fn to_json(&self, aut: &SymbolicAutomaton) -> String {
        let locations: Vec<serde_json::Value> = self
            .rank
            .iter()
            .map(|(&q, rank)| {
                serde_json::json!({
                    "id": q,
                    "name": aut.locations[q].name,
                    "rank": [rank.0, rank.1],
                    "class": match self.class[&q] {
                        LocClass::Target => "target",
                        LocClass::Force => "force",
                        LocClass::Coop => "coop",
                    },
                    "inputs": serde_json::to_value(&self.sigma[&q]).expect("predicates serialize"),
                })
            })
            .collect();
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "transition": e.transition,
                    "src": e.src,
                    "dst": e.dst,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "initial": self.initial,
            "targets": self.targets.iter().collect::<Vec<_>>(),
            "locations": locations,
            "edges": edges,
        }))
        .expect("strategy serializes")
    }

    /// Graphviz rendering: cooperative locations bold, targets dashed,
    /// every location labeled with its rank and good-input set.
    pub fn export_dot(&self, aut: &SymbolicAutomaton) -> String {
        let mut out = String::from("digraph strategy {\n  rankdir=LR;\n");
        for (&q, rank) in &self.rank {
            let style = match self.class[&q] {
                LocClass::Target => "dashed",
                LocClass::Coop => "bold",
                LocClass::Force => "solid",
            };
            out.push_str(&format!(
                "  q{q} [label=\"{} {}\\n{}\", style={style}];\n",
                aut.locations[q].name, rank, self.sigma[&q]
            ));
        }
        for e in &self.edges {
            let guard = &aut.transition(e.transition).guard;
            out.push_str(&format!(
                "  q{} -> q{} [label=\"t{}: {}\"];\n",
                e.src, e.dst, e.transition, guard
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Input/output cell decomposition of one location's outgoing guards.
struct IoCells {
    input: AtomUniverse,
    output: AtomUniverse,
    input_cells: Vec<Minterm>,
    output_cells: Vec<Minterm>,
}

fn io_cells(aut: &SymbolicAutomaton, q: usize) -> Result<IoCells, GameError> {
    let mut in_atoms: BTreeSet<PredAtom> = BTreeSet::new();
    let mut out_atoms: BTreeSet<PredAtom> = BTreeSet::new();
    for t in aut.outgoing(q) {
        for atom in t.guard.atoms() {
            match atom.kind(&aut.variables)? {
                Some(VarKind::Input) => {
                    in_atoms.insert(atom);
                }
                Some(VarKind::Output) => {
                    out_atoms.insert(atom);
                }
                None => {
                    return Err(GameError::Predicate(PredicateError::MixedAtom(format!(
                        "{atom:?}"
                    ))))
                }
            }
        }
    }
    let input = AtomUniverse::from_set(in_atoms);
    let output = AtomUniverse::from_set(out_atoms);
    let input_cells = input.enumerate_minterms(&aut.variables, DEFAULT_ATOM_CAP)?;
    let output_cells = output.enumerate_minterms(&aut.variables, DEFAULT_ATOM_CAP)?;
    Ok(IoCells {
        input,
        output,
        input_cells,
        output_cells,
    })
}

impl IoCells {
    fn literal_truth(&self, lit: &Literal, mi: &Minterm, mo: &Minterm) -> bool {
        if let Some(idx) = self.input.index_of(&lit.atom) {
            return mi.truth(idx) != lit.negated;
        }
        if let Some(idx) = self.output.index_of(&lit.atom) {
            return mo.truth(idx) != lit.negated;
        }
        unreachable!("guard atoms are collected into the universes")
    }

    fn guard_truth(&self, guard: &Predicate, mi: &Minterm, mo: &Minterm) -> bool {
        guard.clauses().iter().any(|clause| {
            clause
                .literals()
                .iter()
                .all(|lit| self.literal_truth(lit, mi, mo))
        })
    }

    /// The unique transition from `q` enabled on the cell, if any survives
    /// in the (possibly pruned) automaton.
    fn enabled<'t>(
        &self,
        aut: &'t SymbolicAutomaton,
        q: usize,
        mi: &Minterm,
        mo: &Minterm,
    ) -> Result<Option<&'t crate::automaton::Transition>, GameError> {
        let mut found = None;
        for t in aut.outgoing(q) {
            if self.guard_truth(&t.guard, mi, mo) {
                if found.is_some() {
                    return Err(GameError::NonDeterministic(
                        aut.locations[q].name.clone(),
                        format!("{mi:?}/{mo:?}"),
                    ));
                }
                found = Some(t);
            }
        }
        Ok(found)
    }
}

/// Inputs from which every system output moves `q` into `S` in one turn.
pub fn ins_force(
    aut: &SymbolicAutomaton,
    q: usize,
    s: &BTreeSet<usize>,
) -> Result<Predicate, GameError> {
    if s.is_empty() {
        return Ok(Predicate::false_());
    }
    let cells = io_cells(aut, q)?;
    let mut kept: Vec<Cube> = Vec::new();
    for mi in &cells.input_cells {
        let mut all_in = true;
        for mo in &cells.output_cells {
            match cells.enabled(aut, q, mi, mo)? {
                Some(t) if s.contains(&t.dst) => {}
                _ => {
                    all_in = false;
                    break;
                }
            }
        }
        if all_in {
            kept.push(Cube::from_minterm(mi));
        }
    }
    if kept.len() == cells.input_cells.len() && !kept.is_empty() {
        return Ok(Predicate::true_());
    }
    Ok(cubes_to_predicate(&simplify_cubes(kept), &cells.input))
}

/// Inputs from which every system output fires exactly the given
/// transition (stronger than reaching its target location).
pub fn ins_force_edge(
    aut: &SymbolicAutomaton,
    transition_id: usize,
) -> Result<Predicate, GameError> {
    let t = match aut.find_transition(transition_id) {
        Some(t) => t,
        None => return Ok(Predicate::false_()),
    };
    let q = t.src;
    let cells = io_cells(aut, q)?;
    let mut kept: Vec<Cube> = Vec::new();
    for mi in &cells.input_cells {
        let mut all_fire = true;
        for mo in &cells.output_cells {
            match cells.enabled(aut, q, mi, mo)? {
                Some(e) if e.id == transition_id => {}
                _ => {
                    all_fire = false;
                    break;
                }
            }
        }
        if all_fire {
            kept.push(Cube::from_minterm(mi));
        }
    }
    if kept.len() == cells.input_cells.len() && !kept.is_empty() {
        return Ok(Predicate::true_());
    }
    Ok(cubes_to_predicate(&simplify_cubes(kept), &cells.input))
}

/// Inputs from which some cooperative output moves `q` into `S`: the input
/// projections of the satisfiable guard clauses on transitions into `S`.
pub fn ins_coop(
    aut: &SymbolicAutomaton,
    q: usize,
    s: &BTreeSet<usize>,
) -> Result<Predicate, GameError> {
    let mut clauses: Vec<Clause> = Vec::new();
    for t in aut.outgoing(q) {
        if !s.contains(&t.dst) {
            continue;
        }
        for clause in t.guard.clauses() {
            if !clause.to_predicate().is_satisfiable(&aut.variables)? {
                continue;
            }
            let mut input_lits = Vec::new();
            for lit in clause.literals() {
                match lit.atom.kind(&aut.variables)? {
                    Some(VarKind::Input) => input_lits.push(lit.clone()),
                    Some(VarKind::Output) => {}
                    None => {
                        return Err(GameError::Predicate(PredicateError::MixedAtom(
                            lit.to_string(),
                        )))
                    }
                }
            }
            clauses.push(Clause::new(input_lits).expect("subset of a canonical clause"));
        }
    }
    Ok(Predicate::from_clauses(clauses))
}

/// Region ranks from the nested force/cooperate fixpoint.
pub fn winning_fixpoint(game: &Game) -> Result<BTreeMap<usize, Rank>, GameError> {
    let aut = game.automaton;
    let all: Vec<usize> = aut.locations.iter().map(|l| l.id).collect();
    let mut rank: BTreeMap<usize, Rank> = BTreeMap::new();
    let mut region: BTreeSet<usize> = game.targets.clone();
    for &q in &game.targets {
        rank.insert(q, Rank(0, 0));
    }
    let mut i = 0u32;
    loop {
        // force closure within cooperative row i
        let mut j = 0u32;
        loop {
            let mut added = Vec::new();
            for &q in &all {
                if region.contains(&q) {
                    continue;
                }
                if !ins_force(aut, q, &region)?.is_false() {
                    added.push(q);
                }
            }
            if added.is_empty() {
                break;
            }
            for q in added {
                region.insert(q);
                rank.insert(q, Rank(i, j + 1));
            }
            j += 1;
        }
        // a single cooperative extension
        let mut added = Vec::new();
        for &q in &all {
            if region.contains(&q) {
                continue;
            }
            if !ins_coop(aut, q, &region)?.is_false() {
                added.push(q);
            }
        }
        if added.is_empty() {
            return Ok(rank);
        }
        for q in added {
            region.insert(q);
            rank.insert(q, Rank(i + 1, 0));
        }
        i += 1;
    }
}

fn sub_region(rank: &BTreeMap<usize, Rank>, bound: Rank) -> BTreeSet<usize> {
    rank.iter()
        .filter(|(_, &r)| r <= bound)
        .map(|(&q, _)| q)
        .collect()
}

fn row_region(rank: &BTreeMap<usize, Rank>, row: u32) -> BTreeSet<usize> {
    rank.iter()
        .filter(|(_, &r)| r.0 <= row)
        .map(|(&q, _)| q)
        .collect()
}

/// Extract the strategy automaton; `None` when the initial location is
/// outside the winning region.
pub fn build_strategy(game: &Game) -> Result<Option<StrategyAutomaton>, GameError> {
    let aut = game.automaton;
    let rank = winning_fixpoint(game)?;
    let init = aut.initial_location();
    if !rank.contains_key(&init) {
        return Ok(None);
    }

    let mut class = BTreeMap::new();
    let mut sigma = BTreeMap::new();
    let mut edges = Vec::new();
    for (&q, &r) in &rank {
        if game.targets.contains(&q) {
            class.insert(q, LocClass::Target);
            sigma.insert(q, Predicate::true_());
            continue;
        }
        let (cls, target_set) = if r.1 > 0 {
            (LocClass::Force, sub_region(&rank, Rank(r.0, r.1 - 1)))
        } else {
            (LocClass::Coop, row_region(&rank, r.0 - 1))
        };
        let inputs = match cls {
            LocClass::Force => ins_force(aut, q, &target_set)?,
            _ => ins_coop(aut, q, &target_set)?,
        };
        for t in aut.outgoing(q) {
            if target_set.contains(&t.dst) {
                edges.push(StrategyEdge {
                    transition: t.id,
                    src: q,
                    dst: t.dst,
                });
            }
        }
        class.insert(q, cls);
        sigma.insert(q, inputs);
    }
    edges.sort_by_key(|e| e.transition);

    Ok(Some(StrategyAutomaton {
        initial: init,
        targets: game.targets.clone(),
        rank,
        class,
        sigma,
        edges,
    }))
}
