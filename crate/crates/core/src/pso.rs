//! Global-best particle swarm minimization over a bounded box, adapted for
//! simulation-driven objectives: the search stops the moment an evaluation
//! meets its goal check, and it aborts the moment the shared simulation
//! budget is spent.
//!
//! The objective owns budget consumption (one unit per evaluation, the way
//! the simulation harness already counts); the optimizer only reads the
//! handle. Random draws are partitioned into one stream per particle, so
//! an evaluation-parallel variant would sample identical numbers.

use crate::rng::SplitMix64;
use crate::sut::SimulationBudget;

#[derive(Debug, Clone)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity clamp as a fraction of each axis extent.
    pub velocity_clamp: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 30,
            max_iterations: 50,
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            velocity_clamp: 0.5,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One objective evaluation: fitness to minimize plus the goal check
/// computed from the same underlying simulation.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub fitness: f64,
    pub goal_met: bool,
}

pub trait Objective {
    fn evaluate(&mut self, point: &[f64]) -> Evaluation;
}

impl<F: FnMut(&[f64]) -> Evaluation> Objective for F {
    fn evaluate(&mut self, point: &[f64]) -> Evaluation {
        self(point)
    }
}

/// Adapter for plain objectives in tests and offline use: pairs a fitness
/// function with a goal check and performs the per-evaluation budget
/// decrement itself.
pub struct BudgetedObjective<F, G> {
    pub fitness: F,
    pub goal: G,
    pub budget: SimulationBudget,
}

impl<F: FnMut(&[f64]) -> f64, G: FnMut(&[f64]) -> bool> Objective for BudgetedObjective<F, G> {
    fn evaluate(&mut self, point: &[f64]) -> Evaluation {
        self.budget.consume_one();
        Evaluation {
            fitness: (self.fitness)(point),
            goal_met: (self.goal)(point),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GoalMet,
    IterationsExhausted,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_point: Vec<f64>,
    pub best_fitness: f64,
    pub evaluations: u64,
    pub success: bool,
    pub stop_reason: StopReason,
}

/// Minimize over the box. Success requires the goal check, not merely a
/// small fitness: a zero distance may still sit on the wrong side of a
/// strict guard.
pub fn pso_minimize(
    objective: &mut dyn Objective,
    bounds: &[(f64, f64)],
    config: &PsoConfig,
    budget: &SimulationBudget,
    threshold: f64,
) -> SearchOutcome {
    let dim = bounds.len();
    let swarm = config.swarm_size.max(1);
    let extent: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let vmax: Vec<f64> = extent.iter().map(|e| e * config.velocity_clamp).collect();

    let mut rngs: Vec<SplitMix64> = (0..swarm)
        .map(|i| SplitMix64::derive(config.seed, i as u64))
        .collect();

    let mut pos: Vec<Vec<f64>> = Vec::with_capacity(swarm);
    let mut vel: Vec<Vec<f64>> = vec![vec![0.0; dim]; swarm];
    let mut pbest: Vec<Vec<f64>> = Vec::with_capacity(swarm);
    let mut pbest_fit: Vec<f64> = vec![f64::INFINITY; swarm];

    let mut best_point: Vec<f64> = vec![0.0; dim];
    let mut best_fitness = f64::INFINITY;
    let mut evaluations: u64 = 0;

    macro_rules! finish {
        ($success:expr, $reason:expr) => {
            return SearchOutcome {
                best_point,
                best_fitness,
                evaluations,
                success: $success,
                stop_reason: $reason,
            }
        };
    }

    // initial placement
    for i in 0..swarm {
        let p: Vec<f64> = (0..dim)
            .map(|d| rngs[i].uniform(bounds[d].0, bounds[d].1))
            .collect();
        let eval = objective.evaluate(&p);
        evaluations += 1;
        if eval.fitness < best_fitness {
            best_fitness = eval.fitness;
            best_point = p.clone();
        }
        pbest_fit[i] = eval.fitness;
        pbest.push(p.clone());
        pos.push(p.clone());
        if eval.goal_met && eval.fitness <= threshold {
            best_fitness = eval.fitness;
            best_point = p;
            finish!(true, StopReason::GoalMet);
        }
        if budget.exhausted() {
            finish!(false, StopReason::BudgetExhausted);
        }
    }

    for _iter in 0..config.max_iterations {
        for i in 0..swarm {
            for d in 0..dim {
                let r1 = rngs[i].next_f64();
                let r2 = rngs[i].next_f64();
                let v = config.inertia * vel[i][d]
                    + config.cognitive * r1 * (pbest[i][d] - pos[i][d])
                    + config.social * r2 * (best_point[d] - pos[i][d]);
                vel[i][d] = v.clamp(-vmax[d], vmax[d]);
                pos[i][d] = (pos[i][d] + vel[i][d]).clamp(bounds[d].0, bounds[d].1);
            }
            let eval = objective.evaluate(&pos[i]);
            evaluations += 1;
            if eval.fitness < pbest_fit[i] {
                pbest_fit[i] = eval.fitness;
                pbest[i] = pos[i].clone();
            }
            if eval.fitness < best_fitness {
                best_fitness = eval.fitness;
                best_point = pos[i].clone();
            }
            if eval.goal_met && eval.fitness <= threshold {
                best_fitness = eval.fitness;
                best_point = pos[i].clone();
                finish!(true, StopReason::GoalMet);
            }
            if budget.exhausted() {
                finish!(false, StopReason::BudgetExhausted);
            }
        }
    }
    finish!(false, StopReason::IterationsExhausted)
}
