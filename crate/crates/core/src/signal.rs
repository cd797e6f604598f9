//! Variables, valuations and discrete-time signals.
//!
//! Every variable is declared with a kind (input or output) and a bounded
//! domain. Valuations bind exactly the variables of one [`VarSet`] and are
//! checked against the domains on construction; signals are finite sequences
//! of valuations over a shared variable set, indexed from `t = 0`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("variable `{0}` appears in both operands")]
    DisjointnessViolation(String),
    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value {value} for `{name}` outside domain [{lo}, {hi}]")]
    DomainViolation {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{name}` has empty domain [{lo}, {hi}]")]
    EmptyDomain { name: String, lo: f64, hi: f64 },
    #[error("missing binding for variable `{0}`")]
    MissingBinding(String),
    #[error("trace format: {0}")]
    TraceFormat(String),
}

/// Whether a variable is controlled by the tester or by the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Input,
    Output,
}

/// A declared variable: name, kind and bounded closed domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableProfile {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

impl VariableProfile {
    pub fn new(name: impl Into<String>, kind: VarKind, lo: f64, hi: f64) -> Self {
        VariableProfile {
            name: name.into(),
            kind,
            lo,
            hi,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lo && value <= self.hi
    }
}

/// An ordered set of variables with unique names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<VariableProfile>", into = "Vec<VariableProfile>")]
pub struct VarSet {
    profiles: Vec<VariableProfile>,
    index: HashMap<String, usize>,
}

impl VarSet {
    pub fn new(profiles: Vec<VariableProfile>) -> Result<Self, SignalError> {
        let mut index = HashMap::new();
        for (i, p) in profiles.iter().enumerate() {
            if p.lo > p.hi {
                return Err(SignalError::EmptyDomain {
                    name: p.name.clone(),
                    lo: p.lo,
                    hi: p.hi,
                });
            }
            if index.insert(p.name.clone(), i).is_some() {
                return Err(SignalError::DuplicateVariable(p.name.clone()));
            }
        }
        Ok(VarSet { profiles, index })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VariableProfile> {
        self.profiles.iter()
    }

    pub fn get(&self, name: &str) -> Option<&VariableProfile> {
        self.index.get(name).map(|&i| &self.profiles[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn profile(&self, i: usize) -> &VariableProfile {
        &self.profiles[i]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.iter().map(|p| p.name.as_str())
    }

    pub fn inputs(&self) -> impl Iterator<Item = &VariableProfile> {
        self.profiles.iter().filter(|p| p.kind == VarKind::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &VariableProfile> {
        self.profiles.iter().filter(|p| p.kind == VarKind::Output)
    }

    /// Sub-set containing only the variables of the given kind, in order.
    pub fn restrict_kind(&self, kind: VarKind) -> VarSet {
        let profiles: Vec<_> = self
            .profiles
            .iter()
            .filter(|p| p.kind == kind)
            .cloned()
            .collect();
        VarSet::new(profiles).expect("restriction of a valid set is valid")
    }

    /// Union of two disjoint variable sets (left operand order first).
    pub fn union(&self, other: &VarSet) -> Result<VarSet, SignalError> {
        for p in &other.profiles {
            if self.index.contains_key(&p.name) {
                return Err(SignalError::DisjointnessViolation(p.name.clone()));
            }
        }
        let mut profiles = self.profiles.clone();
        profiles.extend(other.profiles.iter().cloned());
        VarSet::new(profiles)
    }

    pub fn subset(&self, names: &[&str]) -> Result<VarSet, SignalError> {
        let mut profiles = Vec::with_capacity(names.len());
        for &n in names {
            match self.get(n) {
                Some(p) => profiles.push(p.clone()),
                None => return Err(SignalError::UnknownVariable(n.to_string())),
            }
        }
        VarSet::new(profiles)
    }
}

impl PartialEq for VarSet {
    fn eq(&self, other: &Self) -> bool {
        if self.profiles.len() != other.profiles.len() {
            return false;
        }
        self.profiles
            .iter()
            .all(|p| other.get(&p.name) == Some(p))
    }
}

impl TryFrom<Vec<VariableProfile>> for VarSet {
    type Error = SignalError;
    fn try_from(v: Vec<VariableProfile>) -> Result<Self, Self::Error> {
        VarSet::new(v)
    }
}

impl From<VarSet> for Vec<VariableProfile> {
    fn from(v: VarSet) -> Self {
        v.profiles
    }
}

/// A binding of every variable of a [`VarSet`] to an in-domain real value.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    vars: Arc<VarSet>,
    values: Vec<f64>,
}

impl Valuation {
    /// Build a valuation from name/value pairs; every variable of `vars`
    /// must be bound exactly once and inside its domain.
    pub fn new(vars: Arc<VarSet>, bindings: &[(&str, f64)]) -> Result<Self, SignalError> {
        let mut values = vec![f64::NAN; vars.len()];
        let mut seen = vec![false; vars.len()];
        for &(name, value) in bindings {
            let i = vars
                .index_of(name)
                .ok_or_else(|| SignalError::UnknownVariable(name.to_string()))?;
            if seen[i] {
                return Err(SignalError::DuplicateVariable(name.to_string()));
            }
            seen[i] = true;
            values[i] = value;
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                return Err(SignalError::MissingBinding(vars.profile(i).name.clone()));
            }
        }
        Self::from_values(vars, values)
    }

    /// Build from values aligned with the variable order of `vars`.
    pub fn from_values(vars: Arc<VarSet>, values: Vec<f64>) -> Result<Self, SignalError> {
        assert_eq!(vars.len(), values.len(), "value row width mismatch");
        for (p, &v) in vars.iter().zip(values.iter()) {
            if !v.is_finite() || !p.contains(v) {
                return Err(SignalError::DomainViolation {
                    name: p.name.clone(),
                    value: v,
                    lo: p.lo,
                    hi: p.hi,
                });
            }
        }
        Ok(Valuation { vars, values })
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vars.index_of(name).map(|i| self.values[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Valuation composition `v1 || v2` over disjoint variable sets.
    pub fn compose(&self, other: &Valuation) -> Result<Valuation, SignalError> {
        let vars = Arc::new(self.vars.union(&other.vars)?);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Valuation { vars, values })
    }

    /// Restriction of the bindings to a subset of the variables.
    pub fn project(&self, names: &[&str]) -> Result<Valuation, SignalError> {
        let vars = Arc::new(self.vars.subset(names)?);
        let values = names
            .iter()
            .map(|n| self.get(n).expect("subset checked"))
            .collect();
        Ok(Valuation { vars, values })
    }
}

/// A finite sequence of valuations over a fixed variable set.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    vars: Arc<VarSet>,
    steps: Vec<Vec<f64>>,
}

impl Signal {
    pub fn empty(vars: Arc<VarSet>) -> Self {
        Signal {
            vars,
            steps: Vec::new(),
        }
    }

    pub fn from_rows(vars: Arc<VarSet>, rows: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        for row in &rows {
            Valuation::from_values(vars.clone(), row.clone())?;
        }
        Ok(Signal { vars, steps: rows })
    }

    pub fn from_valuations(
        vars: Arc<VarSet>,
        steps: Vec<Valuation>,
    ) -> Result<Self, SignalError> {
        let mut rows = Vec::with_capacity(steps.len());
        for v in steps {
            if **v.vars() != *vars {
                return Err(SignalError::UnknownVariable(
                    v.vars()
                        .names()
                        .find(|n| vars.get(n).is_none())
                        .unwrap_or("<set mismatch>")
                        .to_string(),
                ));
            }
            // realign to this signal's variable order
            let row = vars
                .names()
                .map(|n| v.get(n).expect("set equality checked"))
                .collect();
            rows.push(row);
        }
        Ok(Signal { vars, steps: rows })
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn value(&self, t: usize, name: &str) -> Option<f64> {
        let i = self.vars.index_of(name)?;
        self.steps.get(t).map(|row| row[i])
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.steps[t]
    }

    pub fn valuation(&self, t: usize) -> Valuation {
        Valuation {
            vars: self.vars.clone(),
            values: self.steps[t].clone(),
        }
    }

    pub fn push(&mut self, v: &Valuation) -> Result<(), SignalError> {
        if **v.vars() != *self.vars {
            return Err(SignalError::UnknownVariable(
                "<set mismatch on push>".to_string(),
            ));
        }
        let row = self
            .vars
            .names()
            .map(|n| v.get(n).expect("set equality checked"))
            .collect();
        self.steps.push(row);
        Ok(())
    }

    pub fn truncated(&self, len: usize) -> Signal {
        Signal {
            vars: self.vars.clone(),
            steps: self.steps[..len.min(self.steps.len())].to_vec(),
        }
    }

    /// Step-wise composition of two equal-length signals over disjoint sets.
    pub fn compose(&self, other: &Signal) -> Result<Signal, SignalError> {
        if self.len() != other.len() {
            return Err(SignalError::LengthMismatch(self.len(), other.len()));
        }
        let vars = Arc::new(self.vars.union(&other.vars)?);
        let steps = self
            .steps
            .iter()
            .zip(other.steps.iter())
            .map(|(a, b)| {
                let mut row = a.clone();
                row.extend_from_slice(b);
                row
            })
            .collect();
        Ok(Signal { vars, steps })
    }
}

/// Write a signal as CSV: header `t,<var1>,...`, one row per step.
pub fn write_csv<W: Write>(signal: &Signal, mut w: W) -> std::io::Result<()> {
    let names: Vec<&str> = signal.vars.names().collect();
    writeln!(w, "t,{}", names.join(","))?;
    for (t, row) in signal.steps.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{t},{}", cells.join(","))?;
    }
    Ok(())
}

/// Read a CSV trace over exactly the given variable set. Columns may appear
/// in any order; `t` must increase from 0 in steps of one.
pub fn read_csv<R: BufRead>(vars: Arc<VarSet>, r: R) -> Result<Signal, SignalError> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(Ok(h)) => h,
        _ => return Err(SignalError::TraceFormat("missing header row".into())),
    };
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if cols.first().map(String::as_str) != Some("t") {
        return Err(SignalError::TraceFormat(
            "first header column must be `t`".into(),
        ));
    }
    let var_cols = &cols[1..];
    if var_cols.len() != vars.len() {
        return Err(SignalError::TraceFormat(format!(
            "expected {} variable columns, found {}",
            vars.len(),
            var_cols.len()
        )));
    }
    let mut order = Vec::with_capacity(var_cols.len());
    for c in var_cols {
        match vars.index_of(c) {
            Some(i) => order.push(i),
            None => return Err(SignalError::UnknownVariable(c.clone())),
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| SignalError::TraceFormat(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(SignalError::TraceFormat(format!(
                "row {}: expected {} cells, found {}",
                lineno + 2,
                cols.len(),
                cells.len()
            )));
        }
        let t: usize = cells[0]
            .parse()
            .map_err(|_| SignalError::TraceFormat(format!("bad time index `{}`", cells[0])))?;
        if t != rows.len() {
            return Err(SignalError::TraceFormat(format!(
                "time index {} out of order (expected {})",
                t,
                rows.len()
            )));
        }
        let mut row = vec![0.0; vars.len()];
        for (k, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| SignalError::TraceFormat(format!("bad number `{cell}`")))?;
            row[order[k]] = v;
        }
        rows.push(row);
    }
    Signal::from_rows(vars, rows)
}
