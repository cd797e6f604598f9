//! Symbolic automata: finite locations with predicate-guarded transitions
//! over the declared variable box, plus validators, run induction and
//! JSON/DOT input-output.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicate::{AtomUniverse, Predicate, PredicateError, DEFAULT_ATOM_CAP};
use crate::signal::{Signal, Valuation, VariableProfile, VarSet};
use crate::util::fnv1a_hex;

#[derive(Debug, Error)]
pub enum AutomatonError {
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("validation bug: {0}")]
    ValidationBug(String),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("signal is not over the automaton's variables: {0}")]
    SignalMismatch(String),
}

/// Role of a location in verdict reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Neither accepting nor dead: obligations still pending.
    Active,
    /// The trace consumed so far satisfies the specification.
    Accepting,
    /// Absorbing: no extension of the trace can satisfy the specification.
    ErrorSink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: usize,
    pub name: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub guard: Predicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicAutomaton {
    pub variables: Arc<VarSet>,
    pub locations: Vec<Location>,
    pub initial: Vec<usize>,
    pub transitions: Vec<Transition>,
    /// Content hash of the specification source this automaton was
    /// compiled from, when known.
    pub spec_hash: Option<String>,
}

/// An alternating walk `q0, d1, q1, ..., dn, qn`.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub locations: Vec<usize>,
    pub transitions: Vec<usize>,
}

impl Run {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn last_location(&self) -> usize {
        *self.locations.last().expect("runs start somewhere")
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub deterministic: bool,
    pub complete: bool,
    pub all_guards_satisfiable: bool,
    pub witnesses: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.deterministic && self.complete && self.all_guards_satisfiable
    }
}

impl SymbolicAutomaton {
    pub fn new(
        variables: Arc<VarSet>,
        locations: Vec<Location>,
        initial: Vec<usize>,
        transitions: Vec<Transition>,
    ) -> Self {
        SymbolicAutomaton {
            variables,
            locations,
            initial,
            transitions,
            spec_hash: None,
        }
    }

    pub fn location(&self, id: usize) -> &Location {
        &self.locations[id]
    }

    pub fn initial_location(&self) -> usize {
        self.initial[0]
    }

    /// Ids of the accepting (final) locations.
    pub fn finals(&self) -> Vec<usize> {
        self.locations
            .iter()
            .filter(|l| l.verdict == Verdict::Accepting)
            .map(|l| l.id)
            .collect()
    }

    pub fn error_sink(&self) -> Option<usize> {
        self.locations
            .iter()
            .find(|l| l.verdict == Verdict::ErrorSink)
            .map(|l| l.id)
    }

    pub fn outgoing(&self, q: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.src == q)
    }

    /// Look up a transition by its stable id (positions shift when a
    /// working copy is pruned).
    pub fn transition(&self, id: usize) -> &Transition {
        self.transitions
            .iter()
            .find(|t| t.id == id)
            .expect("transition id present")
    }

    pub fn find_transition(&self, id: usize) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn remove_transition(&mut self, id: usize) -> bool {
        let before = self.transitions.len();
        self.transitions.retain(|t| t.id != id);
        self.transitions.len() != before
    }

    /// The single transition from `q` enabled by `v`, when exactly one is.
    pub fn enabled_transition(
        &self,
        q: usize,
        v: &Valuation,
    ) -> Result<Option<&Transition>, AutomatonError> {
        let mut found = None;
        for t in self.outgoing(q) {
            if t.guard.evaluate(v)? {
                if found.is_some() {
                    return Err(AutomatonError::ValidationBug(format!(
                        "multiple transitions enabled from {} by {:?}",
                        self.locations[q].name,
                        v.values()
                    )));
                }
                found = Some(t);
            }
        }
        Ok(found)
    }

    /// Exact determinism/completeness/satisfiability checks.
    pub fn validate(&self) -> Result<ValidationReport, AutomatonError> {
        let mut report = ValidationReport {
            deterministic: true,
            complete: true,
            all_guards_satisfiable: true,
            witnesses: Vec::new(),
        };

        if self.initial.len() != 1 {
            report.deterministic = false;
            report
                .witnesses
                .push(format!("{} initial locations", self.initial.len()));
        }

        for t in &self.transitions {
            if !t.guard.is_satisfiable(&self.variables)? {
                report.all_guards_satisfiable = false;
                report.witnesses.push(format!(
                    "guard of t{} ({} -> {}) is unsatisfiable",
                    t.id, self.locations[t.src].name, self.locations[t.dst].name
                ));
            }
        }

        for loc in &self.locations {
            let outgoing: Vec<&Transition> = self.outgoing(loc.id).collect();
            let mut atoms = BTreeSet::new();
            for t in &outgoing {
                atoms.extend(t.guard.atoms());
            }
            let universe = AtomUniverse::from_set(atoms);
            let minterms = universe.enumerate_minterms(&self.variables, DEFAULT_ATOM_CAP)?;
            for m in &minterms {
                let enabled: Vec<&&Transition> = outgoing
                    .iter()
                    .filter(|t| {
                        m.satisfies(&universe, &t.guard)
                            .expect("guard atoms are in the universe")
                    })
                    .collect();
                if enabled.is_empty() {
                    report.complete = false;
                    let witness = m
                        .clause(&universe)
                        .to_predicate()
                        .find_model(&self.variables)?
                        .map(|v| format!("{:?}", v.values()))
                        .unwrap_or_else(|| "<cell>".to_string());
                    report.witnesses.push(format!(
                        "location {} uncovered at {}",
                        loc.name, witness
                    ));
                } else if enabled.len() > 1 {
                    report.deterministic = false;
                    report.witnesses.push(format!(
                        "location {}: guards of t{} and t{} overlap",
                        loc.name, enabled[0].id, enabled[1].id
                    ));
                }
            }
        }
        Ok(report)
    }

    /// The unique run induced by a signal on a deterministic complete
    /// automaton.
    pub fn induced_run(&self, w: &Signal) -> Result<Run, AutomatonError> {
        if **w.vars() != *self.variables {
            return Err(AutomatonError::SignalMismatch(format!(
                "expected variables {:?}",
                self.variables.names().collect::<Vec<_>>()
            )));
        }
        let mut locations = vec![self.initial_location()];
        let mut transitions = Vec::with_capacity(w.len());
        for t in 0..w.len() {
            let v = w.valuation(t);
            let q = *locations.last().unwrap();
            match self.enabled_transition(q, &v)? {
                Some(tr) => {
                    transitions.push(tr.id);
                    locations.push(tr.dst);
                }
                None => {
                    return Err(AutomatonError::ValidationBug(format!(
                        "no transition enabled from {} at step {}",
                        self.locations[q].name, t
                    )))
                }
            }
        }
        Ok(Run {
            locations,
            transitions,
        })
    }

    /// Stable content hash of the serialized automaton.
    pub fn content_hash(&self) -> String {
        fnv1a_hex(self.to_json().as_bytes())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&AutJson::from(self)).expect("automaton serializes")
    }

    pub fn from_json(text: &str) -> Result<SymbolicAutomaton, AutomatonError> {
        let aj: AutJson = serde_json::from_str(text).map_err(|e| AutomatonError::Schema {
            path: "<root>".to_string(),
            message: e.to_string(),
        })?;
        aj.try_into()
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &std::path::Path) -> Result<SymbolicAutomaton, AutomatonError> {
        let text = std::fs::read_to_string(path).map_err(|e| AutomatonError::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Graphviz rendering. With annotations, visited elements are green and
    /// labeled with their visit count, unvisited elements red.
    pub fn export_dot(&self, annotations: Option<&DotAnnotations>) -> String {
        let mut out = String::from("digraph automaton {\n  rankdir=LR;\n");
        out.push_str("  __init [shape=point];\n");
        for loc in &self.locations {
            let shape = match loc.verdict {
                Verdict::Accepting => "doublecircle",
                Verdict::ErrorSink => "octagon",
                Verdict::Active => "circle",
            };
            let (color, label) = match annotations {
                Some(ann) => match ann.location_visits.get(&loc.id) {
                    Some(n) if *n > 0 => ("green", format!("{} (x{})", loc.name, n)),
                    _ => ("red", loc.name.clone()),
                },
                None => ("black", loc.name.clone()),
            };
            out.push_str(&format!(
                "  q{} [label=\"{}\", shape={}, color={}, fontcolor={}];\n",
                loc.id, label, shape, color, color
            ));
        }
        out.push_str(&format!("  __init -> q{};\n", self.initial_location()));
        for t in &self.transitions {
            let (color, label) = match annotations {
                Some(ann) => match ann.transition_visits.get(&t.id) {
                    Some(n) if *n > 0 => ("green", format!("t{}: {} (x{})", t.id, t.guard, n)),
                    _ => ("red", format!("t{}: {}", t.id, t.guard)),
                },
                None => ("black", format!("t{}: {}", t.id, t.guard)),
            };
            out.push_str(&format!(
                "  q{} -> q{} [label=\"{}\", color={}, fontcolor={}];\n",
                t.src, t.dst, label, color, color
            ));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct DotAnnotations {
    pub location_visits: BTreeMap<usize, u64>,
    pub transition_visits: BTreeMap<usize, u64>,
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AutJson {
    variables: Vec<VariableProfile>,
    locations: Vec<Location>,
    initial: Vec<usize>,
    #[serde(rename = "final")]
    final_: Vec<usize>,
    transitions: Vec<Transition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec_hash: Option<String>,
}

impl From<&SymbolicAutomaton> for AutJson {
    fn from(a: &SymbolicAutomaton) -> Self {
        AutJson {
            variables: a.variables.iter().cloned().collect(),
            locations: a.locations.clone(),
            initial: a.initial.clone(),
            final_: a.finals(),
            transitions: a.transitions.clone(),
            spec_hash: a.spec_hash.clone(),
        }
    }
}

impl TryFrom<AutJson> for SymbolicAutomaton {
    type Error = AutomatonError;

    fn try_from(aj: AutJson) -> Result<Self, Self::Error> {
        let variables =
            Arc::new(VarSet::new(aj.variables).map_err(|e| AutomatonError::Schema {
                path: "variables".to_string(),
                message: e.to_string(),
            })?);
        for (i, loc) in aj.locations.iter().enumerate() {
            if loc.id != i {
                return Err(AutomatonError::Schema {
                    path: format!("locations[{i}].id"),
                    message: format!("expected {i}, found {}", loc.id),
                });
            }
        }
        let n = aj.locations.len();
        for (i, t) in aj.transitions.iter().enumerate() {
            if t.id != i {
                return Err(AutomatonError::Schema {
                    path: format!("transitions[{i}].id"),
                    message: format!("expected {i}, found {}", t.id),
                });
            }
            if t.src >= n || t.dst >= n {
                return Err(AutomatonError::Schema {
                    path: format!("transitions[{i}]"),
                    message: "source or target out of range".to_string(),
                });
            }
        }
        for (i, q) in aj.initial.iter().enumerate() {
            if *q >= n {
                return Err(AutomatonError::Schema {
                    path: format!("initial[{i}]"),
                    message: "location id out of range".to_string(),
                });
            }
        }
        let aut = SymbolicAutomaton {
            variables,
            locations: aj.locations,
            initial: aj.initial,
            transitions: aj.transitions,
            spec_hash: aj.spec_hash,
        };
        let finals: BTreeSet<usize> = aut.finals().into_iter().collect();
        let declared: BTreeSet<usize> = aj.final_.into_iter().collect();
        if finals != declared {
            return Err(AutomatonError::Schema {
                path: "final".to_string(),
                message: "final set disagrees with location verdicts".to_string(),
            });
        }
        Ok(aut)
    }
}
