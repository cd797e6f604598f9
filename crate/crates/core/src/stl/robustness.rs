//! Offline quantitative monitor.
//!
//! Values are extended reals: `true` evaluates to `+inf`, an empty
//! supremum to `-inf`, an empty infimum to `+inf`. Every derived operator
//! is evaluated through a window form that is algebraically identical to
//! its core rewriting, so `robustness(F_I f) == robustness(true U_I f)`
//! bit for bit.
//!
//! The inner quantifier of `U`/`S` ranges over the open interval between
//! the evaluation point and the witness point: `f1 U_[0,b] f2` does not
//! constrain `f1` at the current step. Several monitoring tools close that
//! bound; this one follows the displayed semantics literally.

use thiserror::Error;

use super::ast::{Atom, Formula};
use crate::signal::Signal;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("time index {t} out of range for trace of length {len}")]
    TimeOutOfRange { t: usize, len: usize },
    #[error("trace does not bind variable `{0}`")]
    MissingVariable(String),
    #[error("empty trace has no verdict")]
    EmptySignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
}

/// Robustness of `f` on `w` at time `t`.
pub fn robustness(f: &Formula, w: &Signal, t: usize) -> Result<f64, MonitorError> {
    if t >= w.len() {
        return Err(MonitorError::TimeOutOfRange { t, len: w.len() });
    }
    Ok(eval(f, w)?[t])
}

/// Boolean verdict at time 0: satisfied iff robustness is nonnegative.
pub fn verdict(f: &Formula, w: &Signal) -> Result<Verdict, MonitorError> {
    if w.is_empty() {
        return Err(MonitorError::EmptySignal);
    }
    Ok(if eval(f, w)?[0] >= 0.0 {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    })
}

fn atom_row(atom: &Atom, w: &Signal) -> Result<Vec<f64>, MonitorError> {
    let vars = w.vars();
    let mut terms = Vec::with_capacity(atom.expr.terms.len());
    for (name, coeff) in &atom.expr.terms {
        match vars.index_of(name) {
            Some(i) => terms.push((i, *coeff)),
            None => return Err(MonitorError::MissingVariable(name.clone())),
        }
    }
    Ok((0..w.len())
        .map(|t| {
            let row = w.row(t);
            let mut g = atom.expr.offset;
            for &(i, c) in &terms {
                g += c * row[i];
            }
            -g
        })
        .collect())
}

/// One robustness value per time index, computed bottom-up per subformula.
fn eval(f: &Formula, w: &Signal) -> Result<Vec<f64>, MonitorError> {
    let n = w.len();
    match f {
        Formula::True => Ok(vec![f64::INFINITY; n]),
        Formula::Atom(a) => atom_row(a, w),
        Formula::Not(x) => Ok(eval(x, w)?.into_iter().map(|r| -r).collect()),
        Formula::Or(a, b) => {
            let (ra, rb) = (eval(a, w)?, eval(b, w)?);
            Ok(ra.into_iter().zip(rb).map(|(x, y)| x.max(y)).collect())
        }
        Formula::And(a, b) => {
            let (ra, rb) = (eval(a, w)?, eval(b, w)?);
            Ok(ra.into_iter().zip(rb).map(|(x, y)| x.min(y)).collect())
        }
        Formula::Implies(a, b) => {
            let (ra, rb) = (eval(a, w)?, eval(b, w)?);
            Ok(ra.into_iter().zip(rb).map(|(x, y)| (-x).max(y)).collect())
        }
        Formula::Until(i, a, b) => {
            let (ra, rb) = (eval(a, w)?, eval(b, w)?);
            let mut out = vec![f64::NEG_INFINITY; n];
            for t in 0..n {
                let end = match i.hi {
                    Some(hi) => (t + hi as usize).min(n - 1),
                    None => n - 1,
                };
                let mut sup = f64::NEG_INFINITY;
                let mut run_inf = f64::INFINITY; // over the open (t, t')
                for tp in t..=end {
                    if tp >= t + i.lo as usize {
                        sup = sup.max(rb[tp].min(run_inf));
                    }
                    if tp >= t + 1 {
                        run_inf = run_inf.min(ra[tp]);
                    }
                }
                out[t] = sup;
            }
            Ok(out)
        }
        Formula::Since(i, a, b) => {
            let (ra, rb) = (eval(a, w)?, eval(b, w)?);
            let mut out = vec![f64::NEG_INFINITY; n];
            for t in 0..n {
                let start = match i.hi {
                    Some(hi) => t.saturating_sub(hi as usize),
                    None => 0,
                };
                let mut sup = f64::NEG_INFINITY;
                let mut run_inf = f64::INFINITY; // over the open (t', t)
                let mut tp = t as isize;
                while tp >= start as isize {
                    let tpu = tp as usize;
                    if tpu + (i.lo as usize) <= t {
                        sup = sup.max(rb[tpu].min(run_inf));
                    }
                    if tpu + 1 <= t {
                        run_inf = run_inf.min(ra[tpu]);
                    }
                    tp -= 1;
                }
                out[t] = sup;
            }
            Ok(out)
        }
        Formula::Eventually(i, x) => {
            let rx = eval(x, w)?;
            Ok((0..n)
                .map(|t| {
                    let end = match i.hi {
                        Some(hi) => (t + hi as usize).min(n - 1),
                        None => n - 1,
                    };
                    let mut sup = f64::NEG_INFINITY;
                    for tp in (t + i.lo as usize)..=end {
                        if tp >= n {
                            break;
                        }
                        sup = sup.max(rx[tp]);
                    }
                    sup
                })
                .collect())
        }
        Formula::Always(i, x) => {
            let rx = eval(x, w)?;
            Ok((0..n)
                .map(|t| {
                    let end = match i.hi {
                        Some(hi) => (t + hi as usize).min(n - 1),
                        None => n - 1,
                    };
                    let mut inf = f64::INFINITY;
                    for tp in (t + i.lo as usize)..=end {
                        if tp >= n {
                            break;
                        }
                        inf = inf.min(rx[tp]);
                    }
                    inf
                })
                .collect())
        }
        Formula::Once(i, x) => {
            let rx = eval(x, w)?;
            Ok((0..n)
                .map(|t| {
                    let mut sup = f64::NEG_INFINITY;
                    if t >= i.lo as usize {
                        let start = match i.hi {
                            Some(hi) => t.saturating_sub(hi as usize),
                            None => 0,
                        };
                        for tp in start..=(t - i.lo as usize) {
                            sup = sup.max(rx[tp]);
                        }
                    }
                    sup
                })
                .collect())
        }
        Formula::Historically(i, x) => {
            let rx = eval(x, w)?;
            Ok((0..n)
                .map(|t| {
                    let mut inf = f64::INFINITY;
                    if t >= i.lo as usize {
                        let start = match i.hi {
                            Some(hi) => t.saturating_sub(hi as usize),
                            None => 0,
                        };
                        for tp in start..=(t - i.lo as usize) {
                            inf = inf.min(rx[tp]);
                        }
                    }
                    inf
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::signal::{VarKind, VarSet, VariableProfile};
    use crate::stl::parser::parse_formula;

    fn cvars() -> Arc<VarSet> {
        Arc::new(
            VarSet::new(vec![
                VariableProfile::new("a", VarKind::Input, -10.0, 10.0),
                VariableProfile::new("c", VarKind::Output, -50.0, 50.0),
            ])
            .unwrap(),
        )
    }

    fn sig(rows: Vec<Vec<f64>>) -> Signal {
        Signal::from_rows(cvars(), rows).unwrap()
    }

    #[test]
    fn atom_clause() {
        let vars = cvars();
        let f = parse_formula("a >= 4", &vars).unwrap();
        let w = sig(vec![vec![3.0, 0.0]]);
        assert_eq!(robustness(&f, &w, 0).unwrap(), -1.0);
    }

    #[test]
    fn eventually_window_clipped() {
        let vars = cvars();
        let f = parse_formula("F[0,1] c >= 4", &vars).unwrap();
        let w = sig(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 6.0]]);
        assert_eq!(robustness(&f, &w, 2).unwrap(), 2.0);
    }

    #[test]
    fn true_is_satisfied_anywhere() {
        let w = sig(vec![vec![0.0, 0.0]]);
        assert_eq!(verdict(&Formula::True, &w).unwrap(), Verdict::Satisfied);
        assert_eq!(robustness(&Formula::True, &w, 0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn empty_trace_errors() {
        let w = Signal::empty(cvars());
        assert_eq!(
            verdict(&Formula::True, &w).unwrap_err(),
            MonitorError::EmptySignal
        );
        assert!(matches!(
            robustness(&Formula::True, &w, 0).unwrap_err(),
            MonitorError::TimeOutOfRange { .. }
        ));
    }

    #[test]
    fn until_open_inner_interval() {
        // a U[0,2] c-atom: the left operand is not required at the current
        // step, so a violated `a` at t=0 must not matter when c holds at t=1.
        let vars = cvars();
        let f = parse_formula("a > 0 U[0,2] c > 0", &vars).unwrap();
        let w = sig(vec![vec![-5.0, -1.0], vec![-5.0, 3.0]]);
        // t'=1: min(rho(c,1)=3, inf over (0,1)=empty=+inf) = 3
        assert_eq!(robustness(&f, &w, 0).unwrap(), 3.0);
    }

    #[test]
    fn historical_window_clips_at_start() {
        let vars = cvars();
        let f = parse_formula("H[0,1] a >= 4", &vars).unwrap();
        let w = sig(vec![vec![5.0, 0.0], vec![6.0, 0.0]]);
        // at t=0 the window [t-1, t] clips to {0}
        assert_eq!(robustness(&f, &w, 0).unwrap(), 1.0);
        assert_eq!(robustness(&f, &w, 1).unwrap(), 1.0);
    }

    #[test]
    fn missing_variable_reported() {
        let vars = cvars();
        let f = parse_formula("a > 0", &vars).unwrap();
        let only_c = Arc::new(
            VarSet::new(vec![VariableProfile::new("c", VarKind::Output, -1.0, 1.0)]).unwrap(),
        );
        let w = Signal::from_rows(only_c, vec![vec![0.0]]).unwrap();
        assert_eq!(
            robustness(&f, &w, 0).unwrap_err(),
            MonitorError::MissingVariable("a".into())
        );
    }
}
