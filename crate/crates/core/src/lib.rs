//! Coverage-guided adaptive test generation for black-box discrete-time
//! systems.
//!
//! A temporal interface specification is parsed ([`stl`]), compiled into a
//! deterministic complete symbolic automaton ([`compiler`]), and exercised
//! by steering the system under test through cooperative reachability games
//! ([`game`], [`engine`]) with particle swarm optimization ([`pso`]).
//! Coverage of the automaton's locations and transitions ([`coverage`]) is
//! the campaign objective.

pub mod automaton;
pub mod compiler;
pub mod coverage;
pub mod engine;
pub mod game;
pub mod predicate;
pub mod pso;
pub mod signal;
pub mod stl;
pub mod sut;

pub mod rng;
pub mod util;

pub use automaton::{DotAnnotations, Run, SymbolicAutomaton, Verdict};
pub use compiler::{compile, compile_with, minimize, CompileError, CompileOptions, Obligation};
pub use coverage::{Criterion, CriterionKind, Ratio};
pub use engine::{
    adaptive_testing, falsify_global, random_testing, transition_coverage_campaign,
    AdaptiveConfig, CampaignOutcome, CampaignReport, EngineError, TargetPolicy,
};
pub use game::{build_strategy, winning_fixpoint, Game, Rank, StrategyAutomaton};
pub use predicate::{AtomUniverse, Literal, Minterm, PredAtom, Predicate};
pub use pso::{pso_minimize, PsoConfig, SearchOutcome, StopReason};
pub use signal::{Signal, SignalError, Valuation, VarKind, VarSet, VariableProfile};
pub use stl::{parse_spec, robustness, verdict, Formula, IaStlSpec, Interval};
pub use sut::{builtin, simulate, SimulationBudget, SystemModel};
