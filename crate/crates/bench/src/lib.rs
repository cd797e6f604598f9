//! Shared fixtures for the benchmark suite.

use std::sync::Arc;

use speccov_core::signal::Signal;
use speccov_core::stl::parse_spec;
use speccov_core::{IaStlSpec, SymbolicAutomaton};

pub const EXAMPLE_SPEC: &str = "\
input a in [-10, 10];
input b in [-10, 10];
output c in [-50, 50];
output d in [-50, 50];
formula: G( (H[0,1] a >= 4) -> ((b <= 0 and F[0,1] c >= 4) or (b > 0 and F[0,1] d >= 6)) )
";

pub fn example_spec() -> IaStlSpec {
    parse_spec(EXAMPLE_SPEC).expect("bundled example parses")
}

pub fn example_automaton() -> SymbolicAutomaton {
    speccov_core::compile(&example_spec()).expect("bundled example compiles")
}

/// A deterministic sawtooth trace over all four variables.
pub fn long_trace(len: usize) -> Signal {
    let spec = example_spec();
    let vars: Arc<_> = spec.variables.clone();
    let rows = (0..len)
        .map(|t| {
            let phase = (t % 7) as f64;
            vec![phase - 3.0, 2.0 - phase, 2.0 * phase - 5.0, phase + 3.0]
        })
        .collect();
    Signal::from_rows(vars, rows).expect("sawtooth stays in the box")
}
