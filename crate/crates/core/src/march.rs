//! March test notation and interpreter.
//!
//! ```text
//! alg     := element { ';' element }
//! element := ('u' | 'd' | 'a') [ '@' int ] '(' op { ',' op } ')'
//! op      := 'r0' | 'r1' | 'w0' | 'w1'
//!          | 'r[' idx ']'
//!          | 'w[' idx ']' '=' expr
//! idx     := 'i' [ '+' int ]
//! expr    := term { '^' term }
//! term    := '~' term | int '*' atom | atom
//! atom    := 'r[' idx ']' | int | 'f(' expr { ',' expr } ')' | '(' expr ')'
//! ```
//!
//! `u`/`d` walk the addresses upward/downward; `a` (either order) walks
//! upward. An element marked `@p` runs once with `i` at traversal position
//! `p` instead of once per address. Offsets `i+d` count `d` positions
//! further along the traversal and wrap around the array. `r0`/`r1` expect
//! an all-zero/all-one word; `r[..]` expects whatever a fault-free copy of
//! the array holds. `^` is field addition, `c*x` field multiplication,
//! `~x` the complement, and `f(..)` the field sum of its arguments.

use std::fmt;

use thiserror::Error;

use crate::engine::{FeedbackNetwork, InversionMode, IterationConfig, Trajectory};
use crate::faults::{FaultError, FaultyMemory};
use crate::galois::FieldSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarchError {
    #[error("parse error at column {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid march element: {0}")]
    Semantic(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error(transparent)]
    Fault(#[from] FaultError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
    Any,
}

impl Direction {
    fn symbol(self) -> char {
        match self {
            Direction::Up => 'u',
            Direction::Down => 'd',
            Direction::Any => 'a',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(u32),
    Read(usize),
    Scaled(u32, Box<Expr>),
    Not(Box<Expr>),
    Xor(Vec<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    fn reads(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Read(d) => out.push(*d),
            Expr::Scaled(_, e) | Expr::Not(e) => e.reads(out),
            Expr::Xor(es) | Expr::Call(_, es) => es.iter().for_each(|e| e.reads(out)),
        }
    }

    fn eval(&self, reads: &[Option<u32>], field: Option<&FieldSpec>, mask: u32) -> Result<u32, MarchError> {
        Ok(match self {
            Expr::Const(c) => c & mask,
            Expr::Read(d) => reads
                .get(*d)
                .copied()
                .flatten()
                .ok_or_else(|| MarchError::Eval(format!("r[i+{d}] not read yet")))?,
            Expr::Scaled(c, e) => {
                let v = e.eval(reads, field, mask)?;
                match (c, field) {
                    (0, _) => 0,
                    (1, _) => v,
                    (_, Some(f)) => f
                        .mul(*c, v)
                        .map_err(|e| MarchError::Eval(e.to_string()))?,
                    (_, None) => {
                        return Err(MarchError::Eval(format!("coefficient {c} needs a field")))
                    }
                }
            }
            Expr::Not(e) => !e.eval(reads, field, mask)? & mask,
            Expr::Xor(es) | Expr::Call(_, es) => es
                .iter()
                .map(|e| e.eval(reads, field, mask))
                .try_fold(0, |acc, v| v.map(|v| acc ^ v))?,
        })
    }
}

fn offset(d: usize) -> String {
    if d == 0 {
        "i".into()
    } else {
        format!("i+{d}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Read(d) => write!(f, "r[{}]", offset(*d)),
            Expr::Scaled(c, e) => match **e {
                Expr::Xor(_) => write!(f, "{c}*({e})"),
                _ => write!(f, "{c}*{e}"),
            },
            Expr::Not(e) => match **e {
                Expr::Xor(_) => write!(f, "~({e})"),
                _ => write!(f, "~{e}"),
            },
            Expr::Xor(es) => {
                for (n, e) in es.iter().enumerate() {
                    if n > 0 {
                        f.write_str("^")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                for (n, e) in args.iter().enumerate() {
                    if n > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MarchOp {
    /// Read at the current address expecting all zeros (`false`) or ones.
    ReadConst(bool),
    WriteConst(bool),
    /// Read at offset, compared with the fault-free copy.
    Read(usize),
    Write(usize, Expr),
}

impl fmt::Display for MarchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarchOp::ReadConst(b) => write!(f, "r{}", *b as u8),
            MarchOp::WriteConst(b) => write!(f, "w{}", *b as u8),
            MarchOp::Read(d) => write!(f, "r[{}]", offset(*d)),
            MarchOp::Write(d, e) => write!(f, "w[{}]={e}", offset(*d)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarchElement {
    pub direction: Direction,
    /// Run once at this traversal position instead of over every address.
    pub once_at: Option<usize>,
    pub ops: Vec<MarchOp>,
}

impl fmt::Display for MarchElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.direction.symbol())?;
        if let Some(p) = self.once_at {
            write!(f, "@{p}")?;
        }
        f.write_str("(")?;
        for (n, op) in self.ops.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{op}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarchAlgorithm {
    pub elements: Vec<MarchElement>,
    /// Field used by `c*x` terms.
    pub field: Option<FieldSpec>,
}

impl MarchAlgorithm {
    pub fn with_field(mut self, field: FieldSpec) -> Self {
        self.field = Some(field);
        self
    }

    /// Operations per address summed over iterating elements.
    pub fn ops_per_address(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| e.once_at.is_none())
            .map(|e| e.ops.len())
            .sum()
    }
}

impl fmt::Display for MarchAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, e) in self.elements.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for MarchAlgorithm {
    type Err = MarchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_march(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, MarchError> {
        Err(MarchError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), MarchError> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(got) => self.err(format!("expected `{}`, found `{}`", c as char, got as char)),
                None => self.err(format!("expected `{}`, found end of input", c as char)),
            }
        }
    }

    fn int(&mut self) -> Result<u32, MarchError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a number");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("number too large"))
    }

    fn index(&mut self) -> Result<usize, MarchError> {
        self.expect(b'[')?;
        self.expect(b'i')?;
        let d = if self.eat(b'+') { self.int()? as usize } else { 0 };
        self.expect(b']')?;
        Ok(d)
    }

    fn algorithm(&mut self) -> Result<MarchAlgorithm, MarchError> {
        let mut elements = vec![self.element()?];
        while self.eat(b';') {
            elements.push(self.element()?);
        }
        if let Some(c) = self.peek() {
            return self.err(format!("unexpected `{}`", c as char));
        }
        Ok(MarchAlgorithm { elements, field: None })
    }

    fn element(&mut self) -> Result<MarchElement, MarchError> {
        let start = self.pos;
        let direction = match self.peek() {
            Some(b'u') => Direction::Up,
            Some(b'd') => Direction::Down,
            Some(b'a') => Direction::Any,
            Some(c) => return self.err(format!("expected u, d or a, found `{}`", c as char)),
            None => return self.err("expected a march element"),
        };
        self.pos += 1;
        let once_at = if self.eat(b'@') { Some(self.int()? as usize) } else { None };
        self.expect(b'(')?;
        let mut ops = vec![self.op()?];
        while self.eat(b',') {
            ops.push(self.op()?);
        }
        self.expect(b')')?;
        let el = MarchElement { direction, once_at, ops };
        validate_element(&el).map_err(|msg| MarchError::Parse { pos: start, msg })?;
        Ok(el)
    }

    fn op(&mut self) -> Result<MarchOp, MarchError> {
        let kind = match self.peek() {
            Some(c @ (b'r' | b'w')) => c,
            Some(c) => return self.err(format!("expected r or w, found `{}`", c as char)),
            None => return self.err("expected an operation"),
        };
        self.pos += 1;
        match (kind, self.peek()) {
            (_, Some(b @ (b'0' | b'1'))) => {
                self.pos += 1;
                Ok(if kind == b'r' {
                    MarchOp::ReadConst(b == b'1')
                } else {
                    MarchOp::WriteConst(b == b'1')
                })
            }
            (b'r', Some(b'[')) => Ok(MarchOp::Read(self.index()?)),
            (b'w', Some(b'[')) => {
                let d = self.index()?;
                self.expect(b'=')?;
                Ok(MarchOp::Write(d, self.expr()?))
            }
            _ => self.err("expected 0, 1 or `[`"),
        }
    }

    fn expr(&mut self) -> Result<Expr, MarchError> {
        let mut terms = vec![self.term()?];
        while self.eat(b'^') {
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Xor(terms) })
    }

    fn term(&mut self) -> Result<Expr, MarchError> {
        if self.eat(b'~') {
            return Ok(Expr::Not(Box::new(self.term()?)));
        }
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            let c = self.int()?;
            if self.eat(b'*') {
                return Ok(Expr::Scaled(c, Box::new(self.atom()?)));
            }
            return Ok(Expr::Const(c));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, MarchError> {
        match self.peek() {
            Some(b'r') => {
                self.pos += 1;
                Ok(Expr::Read(self.index()?))
            }
            Some(c) if c.is_ascii_digit() => Ok(Expr::Const(self.int()?)),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                if name != "f" {
                    self.pos = start;
                    return self.err(format!("unknown function `{name}`"));
                }
                self.expect(b'(')?;
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                self.expect(b')')?;
                Ok(Expr::Call(name, args))
            }
            Some(c) => self.err(format!("unexpected `{}` in expression", c as char)),
            None => self.err("unexpected end of expression"),
        }
    }
}

fn validate_element(el: &MarchElement) -> Result<(), String> {
    let mut read = Vec::new();
    for op in &el.ops {
        match op {
            MarchOp::ReadConst(_) => read.push(0),
            MarchOp::Read(d) => read.push(*d),
            MarchOp::WriteConst(_) => {}
            MarchOp::Write(_, e) => {
                let mut used = Vec::new();
                e.reads(&mut used);
                if let Some(d) = used.iter().find(|d| !read.contains(d)) {
                    return Err(format!("`{op}` uses r[{}] before it is read", offset(*d)));
                }
            }
        }
    }
    Ok(())
}

/// Parse a March algorithm such as `a(w0); u(r0,w1); d(r1,w0)`.
pub fn parse_march(text: &str) -> Result<MarchAlgorithm, MarchError> {
    Parser {
        src: text.as_bytes(),
        pos: 0,
    }
    .algorithm()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadRecord {
    pub element: usize,
    pub address: usize,
    pub expected: u32,
    pub actual: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarchReport {
    pub reads: Vec<ReadRecord>,
    /// Any read differed from its expected value.
    pub detected: bool,
    /// Per element: any of its reads mismatched.
    pub element_mismatch: Vec<bool>,
}

impl MarchReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &ReadRecord> {
        self.reads.iter().filter(|r| r.expected != r.actual)
    }

    /// Verdict of the last element alone.
    pub fn final_element_mismatch(&self) -> bool {
        self.element_mismatch.last().copied().unwrap_or(false)
    }
}

fn traversal(dir: Direction, n: usize) -> Vec<usize> {
    match dir {
        Direction::Up | Direction::Any => (0..n).collect(),
        Direction::Down => (0..n).rev().collect(),
    }
}

/// Execute `alg` on `mem`, one cycle per operation.
pub fn run_march(alg: &MarchAlgorithm, mem: &mut FaultyMemory) -> Result<MarchReport, MarchError> {
    let n = mem.spec().n_cells;
    let mask = mem.spec().word_mask();
    let field = alg.field.as_ref();
    let mut shadow = mem.state().cells().to_vec();
    let mut report = MarchReport::default();
    for (ei, el) in alg.elements.iter().enumerate() {
        let order = traversal(el.direction, n);
        let positions: Vec<usize> = match el.once_at {
            Some(p) => vec![p % n],
            None => (0..n).collect(),
        };
        let width = el
            .ops
            .iter()
            .map(|op| match op {
                MarchOp::Read(d) | MarchOp::Write(d, _) => d + 1,
                _ => 1,
            })
            .max()
            .unwrap_or(1);
        let mut mismatch = false;
        for i in positions {
            let addr = |d: usize| order[(i + d) % n];
            let mut actual = vec![None; width];
            let mut expected = vec![None; width];
            for op in &el.ops {
                match op {
                    MarchOp::ReadConst(_) | MarchOp::Read(_) => {
                        let d = if let MarchOp::Read(d) = op { *d } else { 0 };
                        let a = addr(d);
                        let got = mem.read(a)?;
                        let want = match op {
                            MarchOp::ReadConst(true) => mask,
                            MarchOp::ReadConst(false) => 0,
                            _ => shadow[a],
                        };
                        mismatch |= got != want;
                        actual[d] = Some(got);
                        expected[d] = Some(shadow[a]);
                        report.reads.push(ReadRecord {
                            element: ei,
                            address: a,
                            expected: want,
                            actual: got,
                        });
                    }
                    MarchOp::WriteConst(b) => {
                        let a = addr(0);
                        let v = if *b { mask } else { 0 };
                        mem.write(a, v)?;
                        shadow[a] = v;
                    }
                    MarchOp::Write(d, e) => {
                        let a = addr(*d);
                        let v = e.eval(&actual, field, mask)?;
                        let sv = e.eval(&expected, field, mask)?;
                        mem.write(a, v)?;
                        shadow[a] = sv;
                    }
                }
                mem.advance(1);
            }
        }
        report.detected |= mismatch;
        report.element_mismatch.push(mismatch);
    }
    Ok(report)
}

/// Express one iteration as a March algorithm: a one-shot element writing
/// the seed, the push element, and a one-shot element reading the final
/// window.
pub fn pi_as_march(cfg: &IterationConfig) -> Result<MarchAlgorithm, MarchError> {
    let direction = match cfg.trajectory {
        Trajectory::Up => Direction::Up,
        Trajectory::Down => Direction::Down,
        Trajectory::Pseudorandom { .. } => {
            return Err(MarchError::Unsupported(
                "pseudorandom trajectories have no monotone address order".into(),
            ))
        }
    };
    if cfg.inversion != InversionMode::None {
        return Err(MarchError::Unsupported("inversion modes".into()));
    }
    if cfg.steps.is_some() || cfg.refill.is_some() {
        return Err(MarchError::Unsupported("explicit step count or refill".into()));
    }
    let fb = match &cfg.feedback {
        FeedbackNetwork::WholeWord(fb) => fb,
        FeedbackNetwork::Lanes(_) => {
            return Err(MarchError::Unsupported("lane feedback networks".into()))
        }
    };
    let k = fb.len();
    if k > 4 {
        return Err(MarchError::Unsupported(format!("{k} stages (at most 4)")));
    }
    let seed_ops = cfg
        .seed
        .iter()
        .enumerate()
        .map(|(d, &s)| MarchOp::Write(d, Expr::Const(s)))
        .collect();
    let mut ops: Vec<MarchOp> = (0..k).map(MarchOp::Read).collect();
    let terms: Vec<Expr> = fb
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(d, &c)| match c {
            1 => Expr::Read(d),
            _ => Expr::Scaled(c, Box::new(Expr::Read(d))),
        })
        .collect();
    let feedback = if terms.len() == 1 {
        terms.into_iter().next().unwrap()
    } else {
        Expr::Xor(terms)
    };
    ops.push(MarchOp::Write(k, feedback));
    let unload = (0..k).map(MarchOp::Read).collect();
    Ok(MarchAlgorithm {
        elements: vec![
            MarchElement { direction, once_at: Some(0), ops: seed_ops },
            MarchElement { direction, once_at: None, ops },
            MarchElement { direction, once_at: Some(0), ops: unload },
        ],
        field: Some(*fb.field()),
    })
}
