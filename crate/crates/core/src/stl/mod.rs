//! Interface-aware temporal specifications: abstract syntax, a text parser
//! and the offline quantitative robustness monitor.

pub mod ast;
pub mod parser;
pub mod robustness;

pub use ast::{AffineExpr, Atom, CmpOp, Formula, IaStlSpec, Interval};
pub use parser::{parse_formula, parse_spec, ParseError};
pub use robustness::{robustness, verdict, MonitorError, Verdict};
