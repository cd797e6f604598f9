//! Text syntax for specifications.
//!
//! ```text
//! # declarations, then the formula
//! input a in [-10, 10];
//! input b in [-10, 10];
//! output c in [-50, 50];
//! output d in [-50, 50];
//! formula: G( (H[0,1] a >= 4) -> ((b <= 0 and F[0,1] c >= 4)
//!                              or (b > 0 and F[0,1] d >= 6)) )
//! ```
//!
//! Operators by loosening precedence: temporal prefixes (`not`, `G`, `F`,
//! `H`, `P`) and the binary `U`/`S`, then `and`, `or`, `->`. Every temporal
//! operator takes an optional interval `[a,b]` or `[a,inf)`; omitting it
//! means `[0,inf)`. Atoms are affine comparisons `expr (<|<=|>|>=) number`.
//! `#` starts a line comment.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{AffineExpr, Atom, CmpOp, Formula, IaStlSpec, Interval};
use crate::signal::{VarKind, VarSet, VariableProfile};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Plus,
    Minus,
    Star,
    Arrow,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Spanned {
                tok: $tok,
                line,
                col,
            });
            col += $len;
        }};
    }

    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                push!(Tok::LParen, 1);
            }
            ')' => {
                chars.next();
                push!(Tok::RParen, 1);
            }
            '[' => {
                chars.next();
                push!(Tok::LBracket, 1);
            }
            ']' => {
                chars.next();
                push!(Tok::RBracket, 1);
            }
            ',' => {
                chars.next();
                push!(Tok::Comma, 1);
            }
            ';' => {
                chars.next();
                push!(Tok::Semi, 1);
            }
            ':' => {
                chars.next();
                push!(Tok::Colon, 1);
            }
            '+' => {
                chars.next();
                push!(Tok::Plus, 1);
            }
            '*' => {
                chars.next();
                push!(Tok::Star, 1);
            }
            '-' => {
                chars.next();
                if chars.peek() == Some(&'>') {
                    chars.next();
                    push!(Tok::Arrow, 2);
                } else {
                    push!(Tok::Minus, 1);
                }
            }
            '<' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    push!(Tok::Le, 2);
                } else {
                    push!(Tok::Lt, 1);
                }
            }
            '>' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    push!(Tok::Ge, 2);
                } else {
                    push!(Tok::Gt, 1);
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() || c == '.' {
                        s.push(c);
                        chars.next();
                    } else if (c == 'e' || c == 'E')
                        && s.chars().any(|d| d.is_ascii_digit())
                    {
                        // exponent, possibly signed
                        let mut clone = chars.clone();
                        clone.next();
                        match clone.peek() {
                            Some(&d) if d.is_ascii_digit() || d == '+' || d == '-' => {
                                s.push(c);
                                chars.next();
                                if let Some(&sign) = chars.peek() {
                                    if sign == '+' || sign == '-' {
                                        s.push(sign);
                                        chars.next();
                                    }
                                }
                            }
                            _ => break,
                        }
                    } else {
                        break;
                    }
                }
                let n: f64 = s
                    .parse()
                    .map_err(|_| ParseError::new(line, col, format!("bad number `{s}`")))?;
                let len = s.len();
                push!(Tok::Num(n), len);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = s.len();
                push!(Tok::Ident(s), len);
            }
            other => {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("unexpected character `{other}`"),
                ))
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    declared: Option<Arc<VarSet>>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::new(t.line, t.col, message))
    }

    fn expect(&mut self, tok: Tok) -> Result<Spanned, ParseError> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            let found = self.peek().tok.clone();
            self.err(format!("expected {tok}, found {found}"))
        }
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn parse_signed_num(&mut self) -> Result<f64, ParseError> {
        let neg = if self.peek().tok == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.next().tok {
            Tok::Num(n) => Ok(if neg { -n } else { n }),
            other => {
                self.pos -= 1;
                self.err(format!("expected number, found {other}"))
            }
        }
    }

    fn parse_nat(&mut self) -> Result<u32, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(n) if n >= 0.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => {
                self.next();
                Ok(n as u32)
            }
            _ => self.err("interval bounds must be natural numbers"),
        }
    }

    /// `[a,b]` or `[a,inf)`; `None` when no bracket follows.
    fn parse_opt_interval(&mut self) -> Result<Option<Interval>, ParseError> {
        if self.peek().tok != Tok::LBracket {
            return Ok(None);
        }
        let open = self.next();
        let lo = self.parse_nat()?;
        self.expect(Tok::Comma)?;
        if self.eat_keyword("inf") {
            self.expect(Tok::RParen)?;
            return Ok(Some(Interval::unbounded_from(lo)));
        }
        let hi = self.parse_nat()?;
        self.expect(Tok::RBracket)?;
        if lo > hi {
            return Err(ParseError::new(
                open.line,
                open.col,
                format!("empty interval [{lo},{hi}]"),
            ));
        }
        Ok(Some(Interval::bounded(lo, hi)))
    }

    fn parse_formula(&mut self) -> Result<Formula, ParseError> {
        self.parse_implies()
    }

    fn parse_implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.parse_or()?;
        if self.peek().tok == Tok::Arrow {
            self.next();
            let rhs = self.parse_implies()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_or(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.parse_and()?;
        while self.eat_keyword("or") {
            let rhs = self.parse_and()?;
            f = Formula::or(f, rhs);
        }
        Ok(f)
    }

    fn parse_and(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.parse_binary_temporal()?;
        while self.eat_keyword("and") {
            let rhs = self.parse_binary_temporal()?;
            f = Formula::and(f, rhs);
        }
        Ok(f)
    }

    fn parse_binary_temporal(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.parse_unary()?;
        loop {
            let until = self.peek_keyword("U");
            let since = self.peek_keyword("S");
            if !until && !since {
                return Ok(f);
            }
            self.next();
            let interval = self.parse_opt_interval()?.unwrap_or_else(Interval::full);
            let rhs = self.parse_unary()?;
            f = if until {
                Formula::until(interval, f, rhs)
            } else {
                Formula::since(interval, f, rhs)
            };
        }
    }

    fn parse_unary(&mut self) -> Result<Formula, ParseError> {
        if self.eat_keyword("not") {
            return Ok(Formula::not(self.parse_unary()?));
        }
        for (kw, build) in [
            ("G", Formula::always as fn(Interval, Formula) -> Formula),
            ("F", Formula::eventually),
            ("H", Formula::historically),
            ("P", Formula::once),
        ] {
            if self.peek_keyword(kw) {
                self.next();
                let interval = self.parse_opt_interval()?.unwrap_or_else(Interval::full);
                return Ok(build(interval, self.parse_unary()?));
            }
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Formula, ParseError> {
        match &self.peek().tok {
            Tok::LParen => {
                self.next();
                let f = self.parse_formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" => {
                self.next();
                Ok(Formula::True)
            }
            _ => self.parse_atom(),
        }
    }

    fn parse_atom(&mut self) -> Result<Formula, ParseError> {
        let start = self.peek().clone();
        let lhs = self.parse_affine()?;
        let cmp = match self.next().tok {
            Tok::Lt => Tok::Lt,
            Tok::Le => Tok::Le,
            Tok::Gt => Tok::Gt,
            Tok::Ge => Tok::Ge,
            other => {
                self.pos -= 1;
                return self.err(format!("expected comparison operator, found {other}"));
            }
        };
        let rhs = self.parse_signed_num()?;
        if lhs.terms.is_empty() {
            return Err(ParseError::new(
                start.line,
                start.col,
                "atom mentions no variables",
            ));
        }
        // normalize to `g < 0` / `g <= 0`
        let atom = match cmp {
            Tok::Lt => Atom {
                expr: AffineExpr {
                    terms: lhs.terms,
                    offset: lhs.offset - rhs,
                },
                op: CmpOp::Lt,
            },
            Tok::Le => Atom {
                expr: AffineExpr {
                    terms: lhs.terms,
                    offset: lhs.offset - rhs,
                },
                op: CmpOp::Le,
            },
            Tok::Gt => Atom {
                expr: AffineExpr {
                    terms: lhs.terms,
                    offset: lhs.offset - rhs,
                }
                .negated(),
                op: CmpOp::Lt,
            },
            Tok::Ge => Atom {
                expr: AffineExpr {
                    terms: lhs.terms,
                    offset: lhs.offset - rhs,
                }
                .negated(),
                op: CmpOp::Le,
            },
            _ => unreachable!(),
        };
        Ok(Formula::Atom(atom))
    }

    fn parse_affine(&mut self) -> Result<AffineExpr, ParseError> {
        let mut terms: BTreeMap<String, f64> = BTreeMap::new();
        let mut offset = 0.0;
        let mut sign = 1.0;
        if self.peek().tok == Tok::Minus {
            self.next();
            sign = -1.0;
        }
        loop {
            self.parse_term(sign, &mut terms, &mut offset)?;
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    sign = 1.0;
                }
                Tok::Minus => {
                    self.next();
                    sign = -1.0;
                }
                _ => break,
            }
        }
        Ok(AffineExpr::new(terms, offset))
    }

    fn parse_term(
        &mut self,
        sign: f64,
        terms: &mut BTreeMap<String, f64>,
        offset: &mut f64,
    ) -> Result<(), ParseError> {
        match self.peek().tok.clone() {
            Tok::Num(n) => {
                self.next();
                if self.peek().tok == Tok::Star {
                    self.next();
                    let name = self.parse_var_name()?;
                    *terms.entry(name).or_insert(0.0) += sign * n;
                } else if matches!(&self.peek().tok, Tok::Ident(s) if self.is_var_candidate(s)) {
                    // implicit multiplication: `2a`
                    let name = self.parse_var_name()?;
                    *terms.entry(name).or_insert(0.0) += sign * n;
                } else {
                    *offset += sign * n;
                }
                Ok(())
            }
            Tok::Ident(_) => {
                let name = self.parse_var_name()?;
                *terms.entry(name).or_insert(0.0) += sign;
                Ok(())
            }
            other => self.err(format!("expected affine term, found {other}")),
        }
    }

    fn is_var_candidate(&self, s: &str) -> bool {
        !matches!(
            s,
            "and" | "or" | "not" | "true" | "U" | "S" | "G" | "F" | "H" | "P" | "inf"
        )
    }

    fn parse_var_name(&mut self) -> Result<String, ParseError> {
        let t = self.peek().clone();
        let name = match &t.tok {
            Tok::Ident(s) if self.is_var_candidate(s) => s.clone(),
            other => return self.err(format!("expected variable name, found {other}")),
        };
        if let Some(declared) = &self.declared {
            if declared.get(&name).is_none() {
                return Err(ParseError::new(
                    t.line,
                    t.col,
                    format!("undeclared variable `{name}`"),
                ));
            }
        }
        self.next();
        Ok(name)
    }

    fn parse_declarations(&mut self) -> Result<Vec<VariableProfile>, ParseError> {
        let mut profiles = Vec::new();
        loop {
            let kind = if self.peek_keyword("input") {
                VarKind::Input
            } else if self.peek_keyword("output") {
                VarKind::Output
            } else {
                break;
            };
            self.next();
            let name = match self.next().tok {
                Tok::Ident(s) => s,
                other => {
                    self.pos -= 1;
                    return self.err(format!("expected variable name, found {other}"));
                }
            };
            if !self.eat_keyword("in") {
                return self.err("expected `in`");
            }
            self.expect(Tok::LBracket)?;
            let lo = self.parse_signed_num()?;
            self.expect(Tok::Comma)?;
            let hi = self.parse_signed_num()?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Semi)?;
            profiles.push(VariableProfile::new(name, kind, lo, hi));
        }
        Ok(profiles)
    }
}

/// Parse a full specification: declarations followed by `formula: ...`.
pub fn parse_spec(text: &str) -> Result<IaStlSpec, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        declared: None,
    };
    let profiles = p.parse_declarations()?;
    let at = p.peek().clone();
    let variables = Arc::new(VarSet::new(profiles).map_err(|e| {
        ParseError::new(at.line, at.col, e.to_string())
    })?);
    if !p.eat_keyword("formula") {
        return p.err("expected `formula`");
    }
    p.expect(Tok::Colon)?;
    p.declared = Some(variables.clone());
    let formula = p.parse_formula()?;
    p.expect(Tok::Eof)?;
    Ok(IaStlSpec { variables, formula })
}

/// Parse a bare formula against an existing variable set.
pub fn parse_formula(text: &str, variables: &Arc<VarSet>) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        declared: Some(variables.clone()),
    };
    let formula = p.parse_formula()?;
    p.expect(Tok::Eof)?;
    Ok(formula)
}
