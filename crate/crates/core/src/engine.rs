//! Campaign engines: the adaptive coverage loop over strategy automata,
//! its transition-coverage variant, global falsification, and the random
//! baseline, all with exact simulation accounting and replayable seeds.
//!
//! The adaptive loop repeatedly picks an unvisited target, builds a
//! cooperative strategy for it on a working copy of the automaton, and
//! walks the strategy: force locations take a synthesized input directly,
//! cooperative locations run a swarm search that steers the system output
//! toward the chosen strategy transition. A failed cooperative step prunes
//! that transition from the working copy and the strategy is rebuilt;
//! when no strategy exists the target is parked as unreachable evidence.
//! Every simulation's induced run on the original automaton feeds the
//! coverage ledger, probe simulations included.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{AutomatonError, Run, SymbolicAutomaton};
use crate::coverage::{Criterion, CoverageError, CoverageLedger, CriterionKind, Ratio};
use crate::game::{build_strategy, ins_force_edge, Game, GameError, LocClass, StrategyAutomaton};
use crate::predicate::{Predicate, PredicateError};
use crate::pso::{pso_minimize, Evaluation, Objective, PsoConfig, StopReason};
use crate::rng::SplitMix64;
use crate::signal::{Signal, SignalError, Valuation, VarSet};
use crate::stl::{robustness, IaStlSpec, MonitorError};
use crate::sut::{simulate, SimulationBudget, SutError, SystemModel};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Sut(#[from] SutError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("system variables do not match the automaton: {0}")]
    VariableMismatch(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("engine invariant broken: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetPolicy {
    /// Smallest BFS distance from the initial location, ties by id.
    NearestFirst,
    IdOrder,
    SeededRandom,
}

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    pub budget: Option<u64>,
    pub criterion: CriterionKind,
    pub policy: TargetPolicy,
    pub pso: PsoConfig,
    pub seed: u64,
    /// Safety cap on generated prefix length.
    pub max_trace_len: usize,
    /// Keep transition prunings across targets instead of resetting the
    /// working copy per target.
    pub carry_pruning: bool,
    /// Restrict the campaign to these requirement ids.
    pub target_filter: Option<BTreeSet<usize>>,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            budget: None,
            criterion: CriterionKind::Location,
            policy: TargetPolicy::NearestFirst,
            pso: PsoConfig::default(),
            seed: 0,
            max_trace_len: 50,
            carry_pruning: false,
            target_filter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestRecord {
    pub id: usize,
    pub inputs: Signal,
    pub outputs: Signal,
    pub run: Run,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "id")]
pub enum EventKind {
    NewLocation(usize),
    NewTransition(usize),
    TargetSelected(usize),
    TargetUnreachable(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignEvent {
    pub elapsed_secs: f64,
    pub simulations: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

// ---------------------------------------------------------------------------
// Report JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalJson {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SignalJson {
    pub fn of(signal: &Signal) -> SignalJson {
        SignalJson {
            columns: signal.vars().names().map(str::to_string).collect(),
            rows: (0..signal.len()).map(|t| signal.row(t).to_vec()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunJson {
    pub locations: Vec<usize>,
    pub transitions: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestJson {
    pub id: usize,
    pub inputs: SignalJson,
    pub outputs: SignalJson,
    pub run: RunJson,
    pub maximal: bool,
}

/// JSON objects key by strings; requirement ids are numeric.
mod id_key_map {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<usize, u64>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), *v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<usize, u64>, D::Error> {
        let raw: BTreeMap<String, u64> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("bad requirement id `{k}`")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageBlock {
    pub criterion: CriterionKind,
    pub total: usize,
    pub satisfied: Vec<usize>,
    #[serde(with = "id_key_map")]
    pub counts: std::collections::BTreeMap<usize, u64>,
    pub ratio: Ratio,
    pub percent: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignReport {
    pub mode: String,
    #[serde(flatten)]
    pub coverage: CoverageBlock,
    pub secondary: CoverageBlock,
    pub tests: Vec<TestJson>,
    pub distinct_maximal_tests: usize,
    pub unreachable: Vec<usize>,
    pub simulations: u64,
    pub budget_initial: Option<u64>,
    pub budget_remaining: Option<i64>,
    pub wall_secs: f64,
    pub seed: u64,
    pub events: Vec<CampaignEvent>,
    pub new_locations_per_minute: Vec<u64>,
    pub automaton_hash: String,
    pub automaton: serde_json::Value,
}

/// Everything a campaign produced, report included.
#[derive(Debug)]
pub struct CampaignOutcome {
    pub tests: Vec<TestRecord>,
    pub visited_locations: BTreeSet<usize>,
    pub visited_transitions: BTreeSet<usize>,
    pub unreachable: BTreeSet<usize>,
    pub simulations: u64,
    pub budget_initial: Option<u64>,
    pub budget_remaining: Option<i64>,
    pub report: CampaignReport,
}

// ---------------------------------------------------------------------------
// Campaign bookkeeping
// ---------------------------------------------------------------------------

struct Recorder<'a> {
    aut: &'a SymbolicAutomaton,
    loc_criterion: Criterion,
    tr_criterion: Criterion,
    loc_ledger: CoverageLedger,
    tr_ledger: CoverageLedger,
    visited_loc: BTreeSet<usize>,
    visited_tr: BTreeSet<usize>,
    tests: Vec<TestRecord>,
    events: Vec<CampaignEvent>,
    start: Instant,
    budget: SimulationBudget,
}

impl<'a> Recorder<'a> {
    fn event(&mut self, kind: EventKind) {
        self.events.push(CampaignEvent {
            elapsed_secs: self.start.elapsed().as_secs_f64(),
            simulations: self.budget.used(),
            kind,
        });
    }

    fn mark_location(&mut self, q: usize) {
        if self.visited_loc.insert(q) {
            self.event(EventKind::NewLocation(q));
        }
    }

    fn mark_transition(&mut self, t: usize) {
        if self.visited_tr.insert(t) {
            self.event(EventKind::NewTransition(t));
        }
    }

    /// Record one simulation: induce the run on the original automaton,
    /// update both ledgers and the visited sets, and keep the test.
    fn record(&mut self, inputs: Signal, outputs: Signal) -> Result<Run, EngineError> {
        let w = inputs.compose(&outputs)?;
        let run = self.aut.induced_run(&w)?;
        self.loc_ledger.record(&run, &self.loc_criterion);
        self.tr_ledger.record(&run, &self.tr_criterion);
        for &q in &run.locations {
            self.mark_location(q);
        }
        for &t in &run.transitions {
            self.mark_transition(t);
        }
        let id = self.tests.len();
        self.tests.push(TestRecord {
            id,
            inputs,
            outputs,
            run: run.clone(),
        });
        Ok(run)
    }
}

struct Campaign<'a> {
    model: &'a mut dyn SystemModel,
    rec: Recorder<'a>,
    budget: SimulationBudget,
    pso: PsoConfig,
    seed: u64,
    episode: u64,
    max_trace_len: usize,
    input_vars: Arc<VarSet>,
    input_bounds: Vec<(f64, f64)>,
    unreachable: BTreeSet<usize>,
}

enum ExploreOutcome {
    Reached(Signal),
    FailedPruned,
    FailedBudget,
    /// No enabled transition in the pruned copy, or the length cap hit.
    FailedStuck,
}

impl<'a> Campaign<'a> {
    fn new(
        aut: &'a SymbolicAutomaton,
        model: &'a mut dyn SystemModel,
        budget: SimulationBudget,
        pso: PsoConfig,
        seed: u64,
        max_trace_len: usize,
    ) -> Result<Campaign<'a>, EngineError> {
        let composed = model.input_vars().union(model.output_vars())?;
        if composed != *aut.variables {
            return Err(EngineError::VariableMismatch(format!(
                "system {:?} vs automaton {:?}",
                composed.names().collect::<Vec<_>>(),
                aut.variables.names().collect::<Vec<_>>()
            )));
        }
        let input_vars = model.input_vars().clone();
        let input_bounds = input_vars.iter().map(|p| (p.lo, p.hi)).collect();
        let mut rec = Recorder {
            aut,
            loc_criterion: Criterion::locations(aut),
            tr_criterion: Criterion::transitions(aut),
            loc_ledger: CoverageLedger::default(),
            tr_ledger: CoverageLedger::default(),
            visited_loc: BTreeSet::new(),
            visited_tr: BTreeSet::new(),
            tests: Vec::new(),
            events: Vec::new(),
            start: Instant::now(),
            budget: budget.clone(),
        };
        // the empty run visits the initial location before any simulation
        rec.mark_location(aut.initial_location());
        Ok(Campaign {
            model,
            rec,
            budget,
            pso,
            seed,
            episode: 0,
            max_trace_len,
            input_vars,
            input_bounds,
            unreachable: BTreeSet::new(),
        })
    }

    fn aut(&self) -> &'a SymbolicAutomaton {
        self.rec.aut
    }

    fn episode_pso(&mut self) -> PsoConfig {
        let mut cfg = self.pso.clone();
        cfg.seed = SplitMix64::derive(self.seed, 0x9050 + self.episode).next_u64();
        self.episode += 1;
        cfg
    }

    fn input_valuation(&self, point: &[f64]) -> Valuation {
        let values = point
            .iter()
            .zip(self.input_vars.iter())
            .map(|(&v, p)| v.clamp(p.lo, p.hi))
            .collect();
        Valuation::from_values(self.input_vars.clone(), values)
            .expect("search points are clamped into the box")
    }

    /// Walk the strategy from `q` toward `qhat`, extending `prefix`.
    fn explore(
        &mut self,
        aprime: &mut SymbolicAutomaton,
        strat: &StrategyAutomaton,
        q: usize,
        qhat: usize,
        prefix: Signal,
    ) -> Result<ExploreOutcome, EngineError> {
        self.rec.mark_location(q);
        if q == qhat {
            return Ok(ExploreOutcome::Reached(prefix));
        }
        if self.budget.exhausted() {
            return Ok(ExploreOutcome::FailedBudget);
        }
        if prefix.len() >= self.max_trace_len {
            return Ok(ExploreOutcome::FailedStuck);
        }
        match strat.class.get(&q) {
            Some(LocClass::Force) => {
                let sigma = &strat.sigma[&q];
                let input = sigma
                    .find_model(&self.input_vars)?
                    .ok_or_else(|| {
                        EngineError::Internal(format!(
                            "unsatisfiable strategy inputs at location {q}"
                        ))
                    })?;
                let mut extended = prefix.clone();
                extended.push(&input)?;
                let outputs = simulate(self.model, &extended, &self.budget)?;
                self.rec.record(extended.clone(), outputs.clone())?;
                let last = input.compose(&outputs.valuation(outputs.len() - 1))?;
                match aprime.enabled_transition(q, &last)? {
                    Some(t) => {
                        let dst = t.dst;
                        self.explore(aprime, strat, dst, qhat, extended)
                    }
                    // the matching transition was pruned from the working
                    // copy: fail gracefully without removing anything
                    None => Ok(ExploreOutcome::FailedStuck),
                }
            }
            Some(LocClass::Coop) => {
                let mut edges: Vec<_> = strat.edges_from(q).collect();
                edges.sort_by_key(|e| (strat.rank[&e.dst], e.transition));
                let edge = match edges.first() {
                    Some(e) => (*e).clone(),
                    None => return Ok(ExploreOutcome::FailedStuck),
                };
                let guard = match aprime.find_transition(edge.transition) {
                    Some(t) => t.guard.clone(),
                    None => return Ok(ExploreOutcome::FailedStuck),
                };
                let cfg = self.episode_pso();
                let domains = self.rec.aut.variables.clone();
                let outcome = {
                    let mut objective = GuardObjective {
                        model: &mut *self.model,
                        rec: &mut self.rec,
                        budget: self.budget.clone(),
                        prefix: &prefix,
                        guard: &guard,
                        domains: &domains,
                        input_vars: &self.input_vars,
                        error: None,
                    };
                    let outcome = pso_minimize(
                        &mut objective,
                        &self.input_bounds,
                        &cfg,
                        &self.budget,
                        0.0,
                    );
                    if let Some(e) = objective.error {
                        return Err(e);
                    }
                    outcome
                };
                if outcome.success {
                    let input = self.input_valuation(&outcome.best_point);
                    let mut extended = prefix.clone();
                    extended.push(&input)?;
                    let dst = edge.dst;
                    self.explore(aprime, strat, dst, qhat, extended)
                } else {
                    aprime.remove_transition(edge.transition);
                    if outcome.stop_reason == StopReason::BudgetExhausted {
                        Ok(ExploreOutcome::FailedBudget)
                    } else {
                        Ok(ExploreOutcome::FailedPruned)
                    }
                }
            }
            // target class is handled by the q == qhat check above
            _ => Err(EngineError::Internal(format!(
                "explore entered location {q} outside the strategy"
            ))),
        }
    }
}

/// Swarm objective for one cooperative step: simulate `prefix + [u]`,
/// record the probe, and measure the distance of the final composed
/// valuation to the chosen strategy guard.
struct GuardObjective<'c, 'a> {
    model: &'c mut dyn SystemModel,
    rec: &'c mut Recorder<'a>,
    budget: SimulationBudget,
    prefix: &'c Signal,
    guard: &'c Predicate,
    domains: &'c Arc<VarSet>,
    input_vars: &'c Arc<VarSet>,
    error: Option<EngineError>,
}

impl Objective for GuardObjective<'_, '_> {
    fn evaluate(&mut self, point: &[f64]) -> Evaluation {
        if self.error.is_some() {
            return Evaluation {
                fitness: f64::INFINITY,
                goal_met: false,
            };
        }
        let values: Vec<f64> = point
            .iter()
            .zip(self.input_vars.iter())
            .map(|(&v, p)| v.clamp(p.lo, p.hi))
            .collect();
        let input = Valuation::from_values(self.input_vars.clone(), values)
            .expect("search points are clamped into the box");
        let mut probe = self.prefix.clone();
        if let Err(e) = probe.push(&input) {
            self.error = Some(e.into());
            return Evaluation {
                fitness: f64::INFINITY,
                goal_met: false,
            };
        }
        let outputs = match simulate(self.model, &probe, &self.budget) {
            Ok(o) => o,
            Err(e) => {
                self.error = Some(e.into());
                return Evaluation {
                    fitness: f64::INFINITY,
                    goal_met: false,
                };
            }
        };
        if let Err(e) = self.rec.record(probe.clone(), outputs.clone()) {
            self.error = Some(e);
            return Evaluation {
                fitness: f64::INFINITY,
                goal_met: false,
            };
        }
        let last = input
            .compose(&outputs.valuation(outputs.len() - 1))
            .expect("inputs and outputs are disjoint");
        let fitness = match self.guard.distance(&last, self.domains) {
            Ok(d) => d,
            Err(e) => {
                self.error = Some(e.into());
                return Evaluation {
                    fitness: f64::INFINITY,
                    goal_met: false,
                };
            }
        };
        let goal_met = self.guard.evaluate(&last).unwrap_or(false);
        Evaluation { fitness, goal_met }
    }
}

// ---------------------------------------------------------------------------
// Target selection
// ---------------------------------------------------------------------------

fn bfs_distances(aut: &SymbolicAutomaton) -> Vec<usize> {
    let n = aut.locations.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[aut.initial_location()] = 0;
    queue.push_back(aut.initial_location());
    while let Some(q) = queue.pop_front() {
        for t in aut.outgoing(q) {
            if dist[t.dst] == usize::MAX {
                dist[t.dst] = dist[q] + 1;
                queue.push_back(t.dst);
            }
        }
    }
    dist
}

/// Pick the next requirement to chase. For transition requirements the
/// distance of the source location is used.
pub fn select_target(
    candidates: &BTreeSet<usize>,
    aprime: &SymbolicAutomaton,
    kind: CriterionKind,
    policy: TargetPolicy,
    rng: &mut SplitMix64,
) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    match policy {
        TargetPolicy::IdOrder => candidates.iter().next().copied(),
        TargetPolicy::SeededRandom => {
            let v: Vec<usize> = candidates.iter().copied().collect();
            Some(v[rng.below(v.len())])
        }
        TargetPolicy::NearestFirst => {
            let dist = bfs_distances(aprime);
            candidates
                .iter()
                .map(|&c| {
                    let d = match kind {
                        CriterionKind::Location => dist.get(c).copied().unwrap_or(usize::MAX),
                        CriterionKind::Transition => aprime
                            .find_transition(c)
                            .map(|t| dist[t.src])
                            .unwrap_or(usize::MAX),
                    };
                    (d, c)
                })
                .min()
                .map(|(_, c)| c)
        }
    }
}

// ---------------------------------------------------------------------------
// Campaign drivers
// ---------------------------------------------------------------------------

/// Adaptive location-coverage campaign.
pub fn adaptive_testing(
    aut: &SymbolicAutomaton,
    model: &mut dyn SystemModel,
    cfg: &AdaptiveConfig,
) -> Result<CampaignOutcome, EngineError> {
    run_campaign(aut, model, cfg, CriterionKind::Location)
}

/// Transition-coverage variant: reach the source by the location game,
/// then take the target transition directly.
pub fn transition_coverage_campaign(
    aut: &SymbolicAutomaton,
    model: &mut dyn SystemModel,
    cfg: &AdaptiveConfig,
) -> Result<CampaignOutcome, EngineError> {
    run_campaign(aut, model, cfg, CriterionKind::Transition)
}

fn run_campaign(
    aut: &SymbolicAutomaton,
    model: &mut dyn SystemModel,
    cfg: &AdaptiveConfig,
    kind: CriterionKind,
) -> Result<CampaignOutcome, EngineError> {
    let budget = SimulationBudget::from_option(cfg.budget);
    let mut c = Campaign::new(
        aut,
        model,
        budget.clone(),
        cfg.pso.clone(),
        cfg.seed,
        cfg.max_trace_len,
    )?;
    let mut rng = SplitMix64::derive(cfg.seed, 0x5E1EC7);
    let mut aprime = aut.clone();
    // the pruning-retry loop cannot spin: every retry removed a transition
    let attempt_cap = aut.transitions.len() + 2;

    loop {
        if budget.exhausted() {
            break;
        }
        let visited = match kind {
            CriterionKind::Location => &c.rec.visited_loc,
            CriterionKind::Transition => &c.rec.visited_tr,
        };
        let all: BTreeSet<usize> = match kind {
            CriterionKind::Location => aut.locations.iter().map(|l| l.id).collect(),
            CriterionKind::Transition => aut.transitions.iter().map(|t| t.id).collect(),
        };
        let mut candidates: BTreeSet<usize> = all
            .difference(visited)
            .copied()
            .filter(|c2| !c.unreachable.contains(c2))
            .collect();
        if let Some(filter) = &cfg.target_filter {
            candidates = candidates.intersection(filter).copied().collect();
        }
        let Some(target) = select_target(&candidates, &aprime, kind, cfg.policy, &mut rng) else {
            break;
        };
        c.rec.event(EventKind::TargetSelected(target));
        if !cfg.carry_pruning {
            aprime = aut.clone();
        }

        let mut attempts = 0usize;
        loop {
            if budget.exhausted() {
                break;
            }
            attempts += 1;
            if attempts > attempt_cap {
                c.unreachable.insert(target);
                c.rec.event(EventKind::TargetUnreachable(target));
                break;
            }
            let reached = match kind {
                CriterionKind::Location => c.chase_location(&mut aprime, target)?,
                CriterionKind::Transition => c.chase_transition(&mut aprime, target)?,
            };
            match reached {
                ChaseResult::Done => break,
                ChaseResult::Retry => continue,
                ChaseResult::Budget => break,
                ChaseResult::Unreachable => {
                    c.unreachable.insert(target);
                    c.rec.event(EventKind::TargetUnreachable(target));
                    break;
                }
            }
        }
    }

    let mode = match kind {
        CriterionKind::Location => "adaptive",
        CriterionKind::Transition => "transition-coverage",
    };
    finish(c, aut, mode, kind, cfg.seed)
}

enum ChaseResult {
    Done,
    Retry,
    Budget,
    Unreachable,
}

impl<'a> Campaign<'a> {
    fn chase_location(
        &mut self,
        aprime: &mut SymbolicAutomaton,
        qhat: usize,
    ) -> Result<ChaseResult, EngineError> {
        let strat = {
            let game = Game::new(aprime, [qhat].into())?;
            build_strategy(&game)?
        };
        let Some(strat) = strat else {
            return Ok(ChaseResult::Unreachable);
        };
        let init = strat.initial;
        let empty = Signal::empty(self.input_vars.clone());
        match self.explore(aprime, &strat, init, qhat, empty)? {
            ExploreOutcome::Reached(_) => Ok(ChaseResult::Done),
            ExploreOutcome::FailedPruned => Ok(ChaseResult::Retry),
            ExploreOutcome::FailedBudget => Ok(ChaseResult::Budget),
            ExploreOutcome::FailedStuck => Ok(ChaseResult::Unreachable),
        }
    }

    fn chase_transition(
        &mut self,
        aprime: &mut SymbolicAutomaton,
        target: usize,
    ) -> Result<ChaseResult, EngineError> {
        if self.rec.visited_tr.contains(&target) {
            return Ok(ChaseResult::Done);
        }
        let t = self.aut().transition(target).clone();
        let strat = {
            let game = Game::new(aprime, [t.src].into())?;
            build_strategy(&game)?
        };
        let Some(strat) = strat else {
            return Ok(ChaseResult::Unreachable);
        };
        let init = strat.initial;
        let empty = Signal::empty(self.input_vars.clone());
        let prefix = match self.explore(aprime, &strat, init, t.src, empty)? {
            ExploreOutcome::Reached(p) => p,
            ExploreOutcome::FailedPruned => return Ok(ChaseResult::Retry),
            ExploreOutcome::FailedBudget => return Ok(ChaseResult::Budget),
            ExploreOutcome::FailedStuck => return Ok(ChaseResult::Unreachable),
        };
        if self.budget.exhausted() {
            return Ok(ChaseResult::Budget);
        }
        if prefix.len() >= self.max_trace_len {
            return Ok(ChaseResult::Unreachable);
        }

        // force the edge when some input guarantees it for every output
        let forced = ins_force_edge(aprime, target)?;
        if !forced.is_false() {
            let input = forced.find_model(&self.input_vars)?.ok_or_else(|| {
                EngineError::Internal("forced edge without a model".to_string())
            })?;
            let mut extended = prefix.clone();
            extended.push(&input)?;
            let outputs = simulate(self.model, &extended, &self.budget)?;
            let run = self.rec.record(extended, outputs)?;
            return if run.transitions.contains(&target) {
                Ok(ChaseResult::Done)
            } else {
                Ok(ChaseResult::Unreachable)
            };
        }

        // otherwise one cooperative search episode against the guard
        let cfg = self.episode_pso();
        let domains = self.rec.aut.variables.clone();
        let outcome = {
            let mut objective = GuardObjective {
                model: &mut *self.model,
                rec: &mut self.rec,
                budget: self.budget.clone(),
                prefix: &prefix,
                guard: &t.guard,
                domains: &domains,
                input_vars: &self.input_vars,
                error: None,
            };
            let outcome = pso_minimize(
                &mut objective,
                &self.input_bounds,
                &cfg,
                &self.budget,
                0.0,
            );
            if let Some(e) = objective.error {
                return Err(e);
            }
            outcome
        };
        if outcome.success {
            Ok(ChaseResult::Done)
        } else if outcome.stop_reason == StopReason::BudgetExhausted {
            Ok(ChaseResult::Budget)
        } else {
            aprime.remove_transition(target);
            Ok(ChaseResult::Unreachable)
        }
    }
}

// ---------------------------------------------------------------------------
// Falsification and random baselines
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct FalsifyOutcome {
    pub witness: Option<(Signal, Signal)>,
    pub best_robustness: f64,
    pub simulations: u64,
    pub wall_secs: f64,
}

struct FalsifyObjective<'c> {
    model: &'c mut dyn SystemModel,
    budget: SimulationBudget,
    spec: &'c IaStlSpec,
    input_vars: Arc<VarSet>,
    trace_len: usize,
    witness: Option<(Signal, Signal)>,
    error: Option<EngineError>,
}

impl FalsifyObjective<'_> {
    fn decode(&self, point: &[f64]) -> Signal {
        let d = self.input_vars.len();
        let rows: Vec<Vec<f64>> = (0..self.trace_len)
            .map(|t| {
                (0..d)
                    .map(|i| {
                        let p = self.input_vars.profile(i);
                        point[t * d + i].clamp(p.lo, p.hi)
                    })
                    .collect()
            })
            .collect();
        Signal::from_rows(self.input_vars.clone(), rows)
            .expect("search points are clamped into the box")
    }
}

impl Objective for FalsifyObjective<'_> {
    fn evaluate(&mut self, point: &[f64]) -> Evaluation {
        if self.error.is_some() {
            return Evaluation {
                fitness: f64::INFINITY,
                goal_met: false,
            };
        }
        let inputs = self.decode(point);
        let outputs = match simulate(self.model, &inputs, &self.budget) {
            Ok(o) => o,
            Err(e) => {
                self.error = Some(e.into());
                return Evaluation {
                    fitness: f64::INFINITY,
                    goal_met: false,
                };
            }
        };
        let w = match inputs.compose(&outputs) {
            Ok(w) => w,
            Err(e) => {
                self.error = Some(e.into());
                return Evaluation {
                    fitness: f64::INFINITY,
                    goal_met: false,
                };
            }
        };
        let rho = match robustness(&self.spec.formula, &w, 0) {
            Ok(r) => r,
            Err(e) => {
                self.error = Some(e.into());
                return Evaluation {
                    fitness: f64::INFINITY,
                    goal_met: false,
                };
            }
        };
        let goal_met = rho < 0.0;
        if goal_met && self.witness.is_none() {
            self.witness = Some((inputs, outputs));
        }
        Evaluation {
            fitness: rho,
            goal_met,
        }
    }
}

/// Global falsification: one swarm search over the whole input sequence,
/// minimizing robustness at time zero.
pub fn falsify_global(
    spec: &IaStlSpec,
    model: &mut dyn SystemModel,
    budget: Option<u64>,
    pso: &PsoConfig,
    trace_len: usize,
) -> Result<FalsifyOutcome, EngineError> {
    if trace_len == 0 {
        return Err(EngineError::Config("trace length must be positive".into()));
    }
    let start = Instant::now();
    let budget = SimulationBudget::from_option(budget);
    let input_vars = model.input_vars().clone();
    let bounds: Vec<(f64, f64)> = (0..trace_len)
        .flat_map(|_| input_vars.iter().map(|p| (p.lo, p.hi)))
        .collect();
    let mut objective = FalsifyObjective {
        model,
        budget: budget.clone(),
        spec,
        input_vars,
        trace_len,
        witness: None,
        error: None,
    };
    let outcome = pso_minimize(&mut objective, &bounds, pso, &budget, 0.0);
    if let Some(e) = objective.error {
        return Err(e);
    }
    Ok(FalsifyOutcome {
        witness: if outcome.success {
            objective.witness
        } else {
            None
        },
        best_robustness: outcome.best_fitness,
        simulations: budget.used(),
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Random baseline: budget-many uniform in-box input signals.
pub fn random_testing(
    aut: &SymbolicAutomaton,
    model: &mut dyn SystemModel,
    cfg: &AdaptiveConfig,
    trace_len: usize,
) -> Result<CampaignOutcome, EngineError> {
    let Some(budget_n) = cfg.budget else {
        return Err(EngineError::Config(
            "random testing requires a bounded budget".into(),
        ));
    };
    if trace_len == 0 {
        return Err(EngineError::Config("trace length must be positive".into()));
    }
    let budget = SimulationBudget::bounded(budget_n);
    let mut c = Campaign::new(
        aut,
        model,
        budget.clone(),
        cfg.pso.clone(),
        cfg.seed,
        cfg.max_trace_len,
    )?;
    let mut rng = SplitMix64::derive(cfg.seed, 0x7A2D);
    for _ in 0..budget_n {
        let rows: Vec<Vec<f64>> = (0..trace_len)
            .map(|_| {
                c.input_vars
                    .iter()
                    .map(|p| rng.uniform(p.lo, p.hi))
                    .collect()
            })
            .collect();
        let inputs = Signal::from_rows(c.input_vars.clone(), rows)?;
        let outputs = simulate(c.model, &inputs, &budget)?;
        c.rec.record(inputs, outputs)?;
    }
    finish(c, aut, "random", cfg.criterion, cfg.seed)
}

// ---------------------------------------------------------------------------

fn finish(
    c: Campaign,
    aut: &SymbolicAutomaton,
    mode: &str,
    kind: CriterionKind,
    seed: u64,
) -> Result<CampaignOutcome, EngineError> {
    let wall_secs = c.rec.start.elapsed().as_secs_f64();
    let (primary_ledger, primary_criterion, secondary_ledger, secondary_criterion) = match kind {
        CriterionKind::Location => (
            &c.rec.loc_ledger,
            &c.rec.loc_criterion,
            &c.rec.tr_ledger,
            &c.rec.tr_criterion,
        ),
        CriterionKind::Transition => (
            &c.rec.tr_ledger,
            &c.rec.tr_criterion,
            &c.rec.loc_ledger,
            &c.rec.loc_criterion,
        ),
    };
    let block = |ledger: &CoverageLedger, criterion: &Criterion| -> Result<CoverageBlock, EngineError> {
        let ratio = ledger.ratio(criterion)?;
        Ok(CoverageBlock {
            criterion: criterion.kind,
            total: criterion.len(),
            satisfied: ledger.satisfied().into_iter().collect(),
            counts: ledger.counts.clone(),
            ratio,
            percent: ratio.percent(),
        })
    };
    let mut coverage = block(primary_ledger, primary_criterion)?;
    // the initial location counts as visited even before any simulation
    if kind == CriterionKind::Location {
        let mut sat: BTreeSet<usize> = coverage.satisfied.iter().copied().collect();
        sat.extend(c.rec.visited_loc.iter());
        coverage.satisfied = sat.into_iter().collect();
        coverage.ratio = Ratio::new(coverage.satisfied.len() as u64, coverage.total as u64);
        coverage.percent = coverage.ratio.percent();
    }
    let secondary = block(secondary_ledger, secondary_criterion)?;

    let maximal = |i: usize| -> bool {
        let me = &c.rec.tests[i].inputs;
        !c.rec.tests.iter().any(|other| {
            other.id != i
                && other.inputs.len() > me.len()
                && (0..me.len()).all(|t| other.inputs.row(t) == me.row(t))
        })
    };
    let tests: Vec<TestJson> = c
        .rec
        .tests
        .iter()
        .map(|t| TestJson {
            id: t.id,
            inputs: SignalJson::of(&t.inputs),
            outputs: SignalJson::of(&t.outputs),
            run: RunJson {
                locations: t.run.locations.clone(),
                transitions: t.run.transitions.clone(),
            },
            maximal: maximal(t.id),
        })
        .collect();
    let distinct_maximal_tests = tests.iter().filter(|t| t.maximal).count();

    let max_minute = c
        .rec
        .events
        .iter()
        .map(|e| (e.elapsed_secs / 60.0) as usize)
        .max()
        .unwrap_or(0);
    let mut per_minute = vec![0u64; max_minute + 1];
    for e in &c.rec.events {
        if matches!(e.kind, EventKind::NewLocation(_)) {
            per_minute[(e.elapsed_secs / 60.0) as usize] += 1;
        }
    }

    let report = CampaignReport {
        mode: mode.to_string(),
        coverage,
        secondary,
        tests,
        distinct_maximal_tests,
        unreachable: c.unreachable.iter().copied().collect(),
        simulations: c.budget.used(),
        budget_initial: c.budget.initial(),
        budget_remaining: c.budget.remaining(),
        wall_secs,
        seed,
        events: c.rec.events.clone(),
        new_locations_per_minute: per_minute,
        automaton_hash: aut.content_hash(),
        automaton: serde_json::from_str(&aut.to_json()).expect("automaton JSON parses"),
    };
    Ok(CampaignOutcome {
        tests: c.rec.tests,
        visited_locations: c.rec.visited_loc,
        visited_transitions: c.rec.visited_tr,
        unreachable: c.unreachable,
        simulations: c.budget.used(),
        budget_initial: c.budget.initial(),
        budget_remaining: c.budget.remaining(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::compile;
    use crate::stl::parser::parse_spec;
    use crate::sut::builtin;
    use std::collections::BTreeMap;

    const EXAMPLE_SPEC: &str = "\
input a in [-10, 10];
input b in [-10, 10];
output c in [-50, 50];
output d in [-50, 50];
formula: G( (H[0,1] a >= 4) -> ((b <= 0 and F[0,1] c >= 4) or (b > 0 and F[0,1] d >= 6)) )
";

    fn cfg(budget: Option<u64>, seed: u64) -> AdaptiveConfig {
        AdaptiveConfig {
            budget,
            seed,
            ..AdaptiveConfig::default()
        }
    }

    #[test]
    fn adaptive_s2_reaches_error_sink() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let aut = compile(&spec).unwrap();
        let sink = aut.error_sink().unwrap();
        let mut model = builtin("s2", &BTreeMap::new()).unwrap();
        let out = adaptive_testing(&aut, model.as_mut(), &cfg(Some(2000), 11)).unwrap();
        assert!(
            out.visited_locations.contains(&sink),
            "visited: {:?}",
            out.visited_locations
        );
        assert_eq!(out.visited_locations.len(), aut.locations.len());
        assert!(out.simulations <= 2001);
    }

    #[test]
    fn adaptive_s1_never_reaches_error_sink() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let aut = compile(&spec).unwrap();
        let sink = aut.error_sink().unwrap();
        let mut model = builtin("s1", &BTreeMap::new()).unwrap();
        // no budget cap: the campaign must terminate by pruning alone
        let out = adaptive_testing(&aut, model.as_mut(), &cfg(None, 11)).unwrap();
        assert!(!out.visited_locations.contains(&sink));
        assert!(!out.unreachable.is_empty());
        assert!(out.visited_locations.len() < aut.locations.len());
        // every location is either visited or parked as unreachable
        for l in &aut.locations {
            assert!(
                out.visited_locations.contains(&l.id) || out.unreachable.contains(&l.id),
                "location {} unresolved",
                l.id
            );
        }
    }

    #[test]
    fn budget_zero_allows_at_most_one_simulation() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let aut = compile(&spec).unwrap();
        let mut model = builtin("s2", &BTreeMap::new()).unwrap();
        let out = adaptive_testing(&aut, model.as_mut(), &cfg(Some(0), 3)).unwrap();
        assert!(out.simulations <= 1);
        assert!(out.tests.len() <= 1);
    }

    #[test]
    fn falsify_s2_finds_witness_and_s1_does_not() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let mut s2 = builtin("s2", &BTreeMap::new()).unwrap();
        let pso = PsoConfig::default().with_seed(5);
        let out = falsify_global(&spec, s2.as_mut(), Some(3000), &pso, 3).unwrap();
        let (inputs, outputs) = out.witness.expect("a violating trace exists");
        let w = inputs.compose(&outputs).unwrap();
        assert!(robustness(&spec.formula, &w, 0).unwrap() < 0.0);

        let mut s1 = builtin("s1", &BTreeMap::new()).unwrap();
        let out = falsify_global(&spec, s1.as_mut(), Some(500), &pso, 3).unwrap();
        assert!(out.witness.is_none());
        assert!(out.best_robustness >= 0.0);
    }

    #[test]
    fn random_testing_is_reproducible() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let aut = compile(&spec).unwrap();
        let run = || {
            let mut model = builtin("s2", &BTreeMap::new()).unwrap();
            let out = random_testing(&aut, model.as_mut(), &cfg(Some(50), 3), 3).unwrap();
            (
                out.simulations,
                out.visited_locations.clone(),
                out.report.coverage.percent,
            )
        };
        let (s1, v1, p1) = run();
        let (s2, v2, p2) = run();
        assert_eq!(s1, 50);
        assert_eq!((s1, v1, p1), (s2, v2.clone(), p2));
    }

    #[test]
    fn transition_campaign_enters_sink_twice() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let aut = compile(&spec).unwrap();
        let sink = aut.error_sink().unwrap();
        let mut model = builtin("s2", &BTreeMap::new()).unwrap();
        let mut config = cfg(Some(4000), 11);
        config.criterion = CriterionKind::Transition;
        let out = transition_coverage_campaign(&aut, model.as_mut(), &config).unwrap();
        let sink_edges: Vec<usize> = aut
            .transitions
            .iter()
            .filter(|t| t.dst == sink && t.src != sink)
            .map(|t| t.id)
            .collect();
        let hit = sink_edges
            .iter()
            .filter(|id| out.visited_transitions.contains(id))
            .count();
        assert!(hit >= 2, "entered sink via {hit} transitions");
    }

    #[test]
    fn stateful_system_campaign_reaches_the_sink() {
        // the lag system carries state across steps, so every probe that
        // extends a prefix must re-simulate it from the initial state;
        // a violating window only opens after a long negative drive
        let spec = parse_spec(
            "input u in [-10, 10];\noutput y in [-20, 20];\n\
             formula: G( (H[0,1] u >= 2) -> F[0,1] y >= 2 )",
        )
        .unwrap();
        let aut = compile(&spec).unwrap();
        let sink = aut.error_sink().expect("the lag system can violate");
        let mut model = builtin(
            "leaky_integrator",
            &[("alpha".to_string(), 0.5)].into_iter().collect(),
        )
        .unwrap();
        let out = adaptive_testing(&aut, model.as_mut(), &cfg(Some(3000), 11)).unwrap();
        assert!(
            out.visited_locations.contains(&sink),
            "visited {:?}, unreachable {:?}",
            out.visited_locations,
            out.unreachable
        );
        // replay every recorded test: stateful outputs must reproduce
        let budget = SimulationBudget::unlimited();
        let mut replay = builtin(
            "leaky_integrator",
            &[("alpha".to_string(), 0.5)].into_iter().collect(),
        )
        .unwrap();
        for t in &out.tests {
            let again =
                crate::sut::simulate(replay.as_mut(), &t.inputs, &budget).unwrap();
            assert_eq!(again, t.outputs, "test {} does not replay", t.id);
        }
    }

    #[test]
    fn budget_accounting_is_exact() {
        let spec = parse_spec(EXAMPLE_SPEC).unwrap();
        let aut = compile(&spec).unwrap();
        let mut model = builtin("s2", &BTreeMap::new()).unwrap();
        let out = adaptive_testing(&aut, model.as_mut(), &cfg(Some(100), 7)).unwrap();
        let initial = out.budget_initial.unwrap() as i64;
        let remaining = out.budget_remaining.unwrap();
        assert_eq!(out.simulations as i64, initial - remaining);
    }
}
