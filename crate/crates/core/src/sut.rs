//! The system-under-test abstraction: whole-prefix simulation with strict
//! budget accounting, built-in difference-equation systems, and a client
//! for external processes speaking a line-delimited JSON protocol.
//!
//! One `simulate` call costs one budget unit regardless of prefix length;
//! campaigns re-simulate the whole prefix on every extension, so budgets
//! count simulations the same way the reports do.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{Signal, SignalError, VarKind, VarSet, VariableProfile};

#[derive(Debug, Error)]
pub enum SutError {
    #[error("unknown builtin system `{0}`")]
    UnknownBuiltin(String),
    #[error("input signal is not over the system's input variables: {0}")]
    InputMismatch(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("output domain violation: {0}")]
    OutputDomain(String),
    #[error("failed to spawn `{command}`: {message}")]
    Spawn { command: String, message: String },
    #[error("external system protocol violation: {0}")]
    Protocol(String),
    #[error("external system timed out after {0:?}")]
    Timeout(Duration),
}

/// Shared simulation counter. `remaining` may reach -1 as a terminal
/// state; `used` counts every simulate call exactly once.
#[derive(Debug, Clone)]
pub struct SimulationBudget {
    inner: Arc<BudgetInner>,
}

#[derive(Debug)]
struct BudgetInner {
    remaining: AtomicI64,
    bounded: bool,
    initial: i64,
    used: AtomicU64,
}

impl SimulationBudget {
    pub fn bounded(n: u64) -> SimulationBudget {
        SimulationBudget {
            inner: Arc::new(BudgetInner {
                remaining: AtomicI64::new(n as i64),
                bounded: true,
                initial: n as i64,
                used: AtomicU64::new(0),
            }),
        }
    }

    pub fn unlimited() -> SimulationBudget {
        SimulationBudget {
            inner: Arc::new(BudgetInner {
                remaining: AtomicI64::new(i64::MAX),
                bounded: false,
                initial: 0,
                used: AtomicU64::new(0),
            }),
        }
    }

    pub fn from_option(n: Option<u64>) -> SimulationBudget {
        match n {
            Some(n) => SimulationBudget::bounded(n),
            None => SimulationBudget::unlimited(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.inner.bounded
    }

    /// Remaining units; `None` when unlimited.
    pub fn remaining(&self) -> Option<i64> {
        self.inner
            .bounded
            .then(|| self.inner.remaining.load(Ordering::SeqCst))
    }

    /// True once the budget has been driven below zero.
    pub fn exhausted(&self) -> bool {
        self.inner.bounded && self.inner.remaining.load(Ordering::SeqCst) < 0
    }

    pub fn used(&self) -> u64 {
        self.inner.used.load(Ordering::SeqCst)
    }

    pub fn initial(&self) -> Option<u64> {
        self.inner.bounded.then_some(self.inner.initial as u64)
    }

    /// Spend one unit: one simulation, or one non-simulation objective
    /// evaluation when a search runs without a system in the loop.
    pub fn consume_one(&self) {
        self.inner.used.fetch_add(1, Ordering::SeqCst);
        if self.inner.bounded {
            self.inner.remaining.fetch_sub(1, Ordering::SeqCst);
        }
    }
}

/// A black-box discrete-time system. Each simulate call re-runs the system
/// from its initial internal state: identical inputs yield identical
/// outputs, and prefixes can be replayed and extended freely.
pub trait SystemModel {
    fn name(&self) -> &str;
    fn input_vars(&self) -> &Arc<VarSet>;
    fn output_vars(&self) -> &Arc<VarSet>;
    /// Raw transfer function; budget accounting lives in [`simulate`].
    fn run(&mut self, inputs: &Signal) -> Result<Vec<Vec<f64>>, SutError>;
}

/// Simulate the whole input prefix, spending exactly one budget unit.
pub fn simulate(
    model: &mut dyn SystemModel,
    inputs: &Signal,
    budget: &SimulationBudget,
) -> Result<Signal, SutError> {
    budget.consume_one();
    if **inputs.vars() != **model.input_vars() {
        return Err(SutError::InputMismatch(format!(
            "expected {:?}",
            model.input_vars().names().collect::<Vec<_>>()
        )));
    }
    let rows = model.run(inputs)?;
    if rows.len() != inputs.len() {
        return Err(SutError::Protocol(format!(
            "system produced {} steps for {} input steps",
            rows.len(),
            inputs.len()
        )));
    }
    let out_vars = model.output_vars().clone();
    Signal::from_rows(out_vars, rows).map_err(|e| match e {
        SignalError::DomainViolation { .. } => SutError::OutputDomain(e.to_string()),
        other => SutError::Signal(other),
    })
}

fn ab_inputs() -> Arc<VarSet> {
    Arc::new(
        VarSet::new(vec![
            VariableProfile::new("a", VarKind::Input, -10.0, 10.0),
            VariableProfile::new("b", VarKind::Input, -10.0, 10.0),
        ])
        .unwrap(),
    )
}

fn cd_outputs() -> Arc<VarSet> {
    Arc::new(
        VarSet::new(vec![
            VariableProfile::new("c", VarKind::Output, -50.0, 50.0),
            VariableProfile::new("d", VarKind::Output, -50.0, 50.0),
        ])
        .unwrap(),
    )
}

/// The two stateless reference systems over inputs a, b and outputs c, d.
struct AbcdSystem {
    name: String,
    inputs: Arc<VarSet>,
    outputs: Arc<VarSet>,
    step: fn(f64, f64) -> (f64, f64),
}

impl SystemModel for AbcdSystem {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_vars(&self) -> &Arc<VarSet> {
        &self.inputs
    }

    fn output_vars(&self) -> &Arc<VarSet> {
        &self.outputs
    }

    fn run(&mut self, inputs: &Signal) -> Result<Vec<Vec<f64>>, SutError> {
        let (ai, bi) = (
            inputs.vars().index_of("a").unwrap(),
            inputs.vars().index_of("b").unwrap(),
        );
        Ok((0..inputs.len())
            .map(|t| {
                let row = inputs.row(t);
                let (c, d) = (self.step)(row[ai], row[bi]);
                vec![c, d]
            })
            .collect())
    }
}

/// Stateful first-order lag: y(t) = alpha * y(t-1) + u(t), y(-1) = 0.
struct LeakyIntegrator {
    alpha: f64,
    inputs: Arc<VarSet>,
    outputs: Arc<VarSet>,
}

impl SystemModel for LeakyIntegrator {
    fn name(&self) -> &str {
        "leaky_integrator"
    }

    fn input_vars(&self) -> &Arc<VarSet> {
        &self.inputs
    }

    fn output_vars(&self) -> &Arc<VarSet> {
        &self.outputs
    }

    fn run(&mut self, inputs: &Signal) -> Result<Vec<Vec<f64>>, SutError> {
        let ui = inputs.vars().index_of("u").unwrap();
        let mut y = 0.0;
        Ok((0..inputs.len())
            .map(|t| {
                y = self.alpha * y + inputs.row(t)[ui];
                vec![y]
            })
            .collect())
    }
}

/// Construct a built-in system by name.
pub fn builtin(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<Box<dyn SystemModel>, SutError> {
    match name {
        "s1" => Ok(Box::new(AbcdSystem {
            name: "s1".into(),
            inputs: ab_inputs(),
            outputs: cd_outputs(),
            step: |a, b| (a, a + b + 2.0),
        })),
        "s2" => Ok(Box::new(AbcdSystem {
            name: "s2".into(),
            inputs: ab_inputs(),
            outputs: cd_outputs(),
            step: |a, b| (2.0 * a + b, a + 10.0 - b),
        })),
        "leaky_integrator" => {
            let alpha = params.get("alpha").copied().unwrap_or(0.5);
            Ok(Box::new(LeakyIntegrator {
                alpha,
                inputs: Arc::new(
                    VarSet::new(vec![VariableProfile::new("u", VarKind::Input, -10.0, 10.0)])
                        .unwrap(),
                ),
                outputs: Arc::new(
                    VarSet::new(vec![VariableProfile::new(
                        "y",
                        VarKind::Output,
                        -20.0,
                        20.0,
                    )])
                    .unwrap(),
                ),
            }))
        }
        other => Err(SutError::UnknownBuiltin(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// External processes
// ---------------------------------------------------------------------------

#[derive(Serialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
enum HarnessMsg<'a> {
    Reset,
    Step { inputs: &'a BTreeMap<&'a str, f64> },
    End,
}

#[derive(Deserialize)]
struct SutReply {
    outputs: BTreeMap<String, f64>,
}

/// A system implemented by a child process: the harness sends a `reset`,
/// one `step` per time point, and an `end` per simulate call, all as
/// newline-delimited JSON on stdin; the process answers one `outputs`
/// object per step on stdout.
pub struct ExternalModel {
    command: Vec<String>,
    inputs: Arc<VarSet>,
    outputs: Arc<VarSet>,
    timeout: Duration,
    child: Option<ExternalChild>,
    display_name: String,
}

struct ExternalChild {
    process: Child,
    lines: Receiver<std::io::Result<String>>,
}

impl ExternalModel {
    pub fn new(
        command: Vec<String>,
        inputs: Arc<VarSet>,
        outputs: Arc<VarSet>,
        timeout: Duration,
    ) -> ExternalModel {
        let display_name = command.join(" ");
        ExternalModel {
            command,
            inputs,
            outputs,
            timeout,
            child: None,
            display_name,
        }
    }

    fn ensure_child(&mut self) -> Result<(), SutError> {
        let alive = match &mut self.child {
            Some(c) => c.process.try_wait().ok().flatten().is_none(),
            None => false,
        };
        if alive {
            return Ok(());
        }
        let mut process = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SutError::Spawn {
                command: self.display_name.clone(),
                message: e.to_string(),
            })?;
        let stdout = process.stdout.take().expect("stdout piped");
        let (tx, rx) = channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        self.child = Some(ExternalChild {
            process,
            lines: rx,
        });
        Ok(())
    }

    fn send(&mut self, msg: &HarnessMsg) -> Result<(), SutError> {
        let child = self.child.as_mut().expect("child ensured");
        let stdin = child.process.stdin.as_mut().expect("stdin piped");
        let line = serde_json::to_string(msg).expect("harness messages serialize");
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| SutError::Protocol(format!("write failed: {e}")))
    }

    fn read_reply(&mut self) -> Result<SutReply, SutError> {
        let child = self.child.as_mut().expect("child ensured");
        match child.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map_err(|e| SutError::Protocol(format!("bad reply `{line}`: {e}"))),
            Ok(Err(e)) => Err(SutError::Protocol(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(SutError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) =>

                Err(SutError::Protocol("process closed stdout".to_string())),
        }
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.process.kill();
            let _ = c.process.wait();
        }
    }
}

impl SystemModel for ExternalModel {
    fn name(&self) -> &str {
        &self.display_name
    }

    fn input_vars(&self) -> &Arc<VarSet> {
        &self.inputs
    }

    fn output_vars(&self) -> &Arc<VarSet> {
        &self.outputs
    }

    fn run(&mut self, inputs: &Signal) -> Result<Vec<Vec<f64>>, SutError> {
        self.ensure_child()?;
        self.send(&HarnessMsg::Reset)?;
        let names: Vec<String> = self.inputs.names().map(str::to_string).collect();
        let out_names: Vec<String> = self.outputs.names().map(str::to_string).collect();
        let mut rows = Vec::with_capacity(inputs.len());
        for t in 0..inputs.len() {
            let step: BTreeMap<&str, f64> = names
                .iter()
                .map(|n| (n.as_str(), inputs.value(t, n).unwrap()))
                .collect();
            self.send(&HarnessMsg::Step { inputs: &step })?;
            let reply = self.read_reply()?;
            let mut row = Vec::with_capacity(out_names.len());
            for name in &out_names {
                match reply.outputs.get(name) {
                    Some(&v) => row.push(v),
                    None => {
                        return Err(SutError::Protocol(format!(
                            "reply missing output `{name}`"
                        )))
                    }
                }
            }
            rows.push(row);
        }
        self.send(&HarnessMsg::End)?;
        Ok(rows)
    }
}
