//! Shared test oracles and generators.
//!
//! The robustness oracle is a literal transcription of the semantic
//! clauses over the core constructors, evaluated with explicit index
//! loops per time point. It deliberately shares nothing with the
//! monitor's evaluation strategy beyond atom arithmetic.

use std::collections::BTreeMap;
use std::sync::Arc;

use speccov_core::automaton::{Location, SymbolicAutomaton, Transition, Verdict};
use speccov_core::predicate::{AtomUniverse, Cube, Literal, PredAtom, Rel};
use speccov_core::rng::SplitMix64;
use speccov_core::signal::{Signal, VarKind, VarSet, VariableProfile};
use speccov_core::stl::ast::{AffineExpr, Atom, CmpOp, Formula};
use speccov_core::stl::Interval;

#[allow(dead_code)]
pub fn abcd_vars() -> Arc<VarSet> {
    Arc::new(
        VarSet::new(vec![
            VariableProfile::new("a", VarKind::Input, -10.0, 10.0),
            VariableProfile::new("b", VarKind::Input, -10.0, 10.0),
            VariableProfile::new("c", VarKind::Output, -50.0, 50.0),
            VariableProfile::new("d", VarKind::Output, -50.0, 50.0),
        ])
        .unwrap(),
    )
}

#[allow(dead_code)]
pub const EXAMPLE_SPEC: &str = "\
input a in [-10, 10];
input b in [-10, 10];
output c in [-50, 50];
output d in [-50, 50];
formula: G( (H[0,1] a >= 4) -> ((b <= 0 and F[0,1] c >= 4) or (b > 0 and F[0,1] d >= 6)) )
";

// ---------------------------------------------------------------------------
// Brute-force robustness oracle over core constructors
// ---------------------------------------------------------------------------

/// One robustness value per time point, straight from the clauses.
#[allow(dead_code)]
pub fn oracle_table(f: &Formula, w: &Signal) -> Vec<f64> {
    let n = w.len();
    match f {
        Formula::True => vec![f64::INFINITY; n],
        Formula::Atom(a) => (0..n)
            .map(|t| a.robustness(&w.valuation(t)).expect("trace binds atom vars"))
            .collect(),
        Formula::Not(x) => oracle_table(x, w).into_iter().map(|r| -r).collect(),
        Formula::Or(a, b) => {
            let (ta, tb) = (oracle_table(a, w), oracle_table(b, w));
            ta.into_iter().zip(tb).map(|(x, y)| x.max(y)).collect()
        }
        Formula::Until(i, a, b) => {
            let (ta, tb) = (oracle_table(a, w), oracle_table(b, w));
            (0..n)
                .map(|t| {
                    let mut sup = f64::NEG_INFINITY;
                    for tp in 0..n {
                        if tp < t + i.lo as usize {
                            continue;
                        }
                        if let Some(hi) = i.hi {
                            if tp > t + hi as usize {
                                continue;
                            }
                        }
                        let mut inf = f64::INFINITY;
                        for tpp in (t + 1)..tp {
                            inf = inf.min(ta[tpp]);
                        }
                        sup = sup.max(tb[tp].min(inf));
                    }
                    sup
                })
                .collect()
        }
        Formula::Since(i, a, b) => {
            let (ta, tb) = (oracle_table(a, w), oracle_table(b, w));
            (0..n)
                .map(|t| {
                    let mut sup = f64::NEG_INFINITY;
                    for tp in 0..=t {
                        if tp + (i.lo as usize) > t {
                            continue;
                        }
                        if let Some(hi) = i.hi {
                            if tp + (hi as usize) < t {
                                continue;
                            }
                        }
                        let mut inf = f64::INFINITY;
                        for tpp in (tp + 1)..t {
                            inf = inf.min(ta[tpp]);
                        }
                        sup = sup.max(tb[tp].min(inf));
                    }
                    sup
                })
                .collect()
        }
        other => panic!("oracle expects core form, got {other}"),
    }
}

// ---------------------------------------------------------------------------
// Random formulas and traces
// ---------------------------------------------------------------------------

/// `sum(coeffs) cmp threshold` in surface form, folded into normal form.
#[allow(dead_code)]
pub fn surface_atom(terms: &[(&str, f64)], cmp: &str, threshold: f64) -> Formula {
    let map: BTreeMap<String, f64> = terms
        .iter()
        .map(|(n, c)| (n.to_string(), *c))
        .collect();
    let base = AffineExpr::new(map, -threshold);
    let atom = match cmp {
        "<" => Atom {
            expr: base,
            op: CmpOp::Lt,
        },
        "<=" => Atom {
            expr: base,
            op: CmpOp::Le,
        },
        ">" => Atom {
            expr: base.negated(),
            op: CmpOp::Lt,
        },
        ">=" => Atom {
            expr: base.negated(),
            op: CmpOp::Le,
        },
        other => panic!("bad cmp {other}"),
    };
    Formula::Atom(atom)
}

#[allow(dead_code)]
pub fn random_interval(rng: &mut SplitMix64) -> Interval {
    let lo = rng.below(4) as u32;
    let hi = lo + rng.below((4 - lo as usize).max(1)) as u32;
    Interval::bounded(lo, hi.min(3))
}

/// Random formula over a, b, c, d with intervals within [0, 3].
#[allow(dead_code)]
pub fn random_formula(rng: &mut SplitMix64, depth: usize) -> Formula {
    let names = ["a", "b", "c", "d"];
    if depth == 0 || rng.below(10) < 3 {
        if rng.below(12) == 0 {
            return Formula::True;
        }
        let n_terms = 1 + rng.below(2);
        let mut terms = Vec::new();
        for _ in 0..n_terms {
            let name = names[rng.below(4)];
            let coeff = [-2.0, -1.0, 1.0, 2.0][rng.below(4)];
            terms.push((name, coeff));
        }
        let cmp = ["<", "<=", ">", ">="][rng.below(4)];
        let threshold = (rng.below(17) as f64) - 8.0;
        return surface_atom(&terms, cmp, threshold);
    }
    let sub = |rng: &mut SplitMix64| random_formula(rng, depth - 1);
    match rng.below(10) {
        0 => Formula::not(sub(rng)),
        1 => Formula::or(sub(rng), sub(rng)),
        2 => Formula::and(sub(rng), sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => {
            let i = random_interval(rng);
            Formula::until(i, sub(rng), sub(rng))
        }
        5 => {
            let i = random_interval(rng);
            Formula::since(i, sub(rng), sub(rng))
        }
        6 => Formula::eventually(random_interval(rng), sub(rng)),
        7 => Formula::always(random_interval(rng), sub(rng)),
        8 => Formula::once(random_interval(rng), sub(rng)),
        _ => Formula::historically(random_interval(rng), sub(rng)),
    }
}

/// Uniform random trace over the full variable set.
#[allow(dead_code)]
pub fn random_trace(rng: &mut SplitMix64, max_len: usize) -> Signal {
    let vars = abcd_vars();
    let len = 1 + rng.below(max_len);
    let rows = (0..len)
        .map(|_| vars.iter().map(|p| rng.uniform(p.lo, p.hi)).collect())
        .collect();
    Signal::from_rows(vars, rows).unwrap()
}

/// Grid trace over half-offset values: every sampled value sits strictly
/// between integer atom thresholds, so the crisp automaton semantics and
/// the sign of robustness agree everywhere.
#[allow(dead_code)]
pub fn grid_trace(rng: &mut SplitMix64, len: usize) -> Signal {
    let vars = abcd_vars();
    let rows = (0..len)
        .map(|_| {
            vars.iter()
                .map(|p| {
                    let span = (p.hi - p.lo) as usize;
                    p.lo + rng.below(span) as f64 + 0.5
                })
                .collect()
        })
        .collect();
    Signal::from_rows(vars, rows).unwrap()
}

#[allow(dead_code)]
pub fn grid_values(p: &VariableProfile) -> Vec<f64> {
    vec![p.lo + 0.5, (p.lo + p.hi) / 2.0 + 0.5, p.hi - 0.5]
}

// ---------------------------------------------------------------------------
// Random deterministic complete io-pure automata
// ---------------------------------------------------------------------------

/// Build a random automaton by assigning every satisfiable minterm cell
/// of a small atom universe to a random successor per location.
#[allow(dead_code)]
pub fn random_automaton(rng: &mut SplitMix64, max_locations: usize) -> SymbolicAutomaton {
    let vars = Arc::new(
        VarSet::new(vec![
            VariableProfile::new("a", VarKind::Input, -10.0, 10.0),
            VariableProfile::new("c", VarKind::Output, -50.0, 50.0),
        ])
        .unwrap(),
    );
    let mut atoms = std::collections::BTreeSet::new();
    let n_in = 1 + rng.below(2);
    let n_out = 1 + rng.below(2);
    for i in 0..n_in {
        let threshold = -4.0 + 4.0 * i as f64 + rng.below(3) as f64;
        let expr = AffineExpr::new(
            [("a".to_string(), 1.0)].into_iter().collect(),
            -threshold,
        );
        atoms.insert(Literal::normalize(&expr, Rel::Lt).unwrap().atom);
    }
    for i in 0..n_out {
        let threshold = -8.0 + 8.0 * i as f64 + rng.below(5) as f64;
        let expr = AffineExpr::new(
            [("c".to_string(), 1.0)].into_iter().collect(),
            -threshold,
        );
        atoms.insert(Literal::normalize(&expr, Rel::Lt).unwrap().atom);
    }
    let universe = AtomUniverse::from_set(atoms);
    let minterms = universe.enumerate_minterms(&vars, 16).unwrap();

    let n = 2 + rng.below(max_locations.saturating_sub(1).max(1));
    let locations: Vec<Location> = (0..n)
        .map(|id| Location {
            id,
            name: format!("q{id}"),
            verdict: Verdict::Active,
        })
        .collect();

    // group cells by successor per location, then merge into guards
    let mut transitions = Vec::new();
    for q in 0..n {
        let mut groups: BTreeMap<usize, Vec<Cube>> = BTreeMap::new();
        for m in &minterms {
            let dst = rng.below(n);
            groups.entry(dst).or_default().push(Cube::from_minterm(m));
        }
        for (dst, cubes) in groups {
            let guard = if cubes.len() == minterms.len() {
                speccov_core::Predicate::true_()
            } else {
                speccov_core::predicate::cubes_to_predicate(
                    &speccov_core::predicate::simplify_cubes(cubes),
                    &universe,
                )
            };
            transitions.push(Transition {
                id: transitions.len(),
                src: q,
                dst,
                guard,
            });
        }
    }
    SymbolicAutomaton::new(vars, locations, vec![0], transitions)
}

/// Locations from which some target is reachable along satisfiable guards.
#[allow(dead_code)]
pub fn backward_reachable(
    aut: &SymbolicAutomaton,
    targets: &std::collections::BTreeSet<usize>,
) -> std::collections::BTreeSet<usize> {
    let mut reach = targets.clone();
    loop {
        let mut grew = false;
        for t in &aut.transitions {
            if reach.contains(&t.dst) && reach.insert(t.src) {
                grew = true;
            }
        }
        if !grew {
            return reach;
        }
    }
}

#[allow(dead_code)]
pub fn atom_of(text: &str, vars: &Arc<VarSet>) -> PredAtom {
    match speccov_core::stl::parse_formula(text, vars).unwrap() {
        Formula::Atom(a) => Literal::from_stl(&a).unwrap().atom,
        other => panic!("expected atom, got {other}"),
    }
}
