//! Fault primitives in `<S/F/R>` notation, the default catalog, placement of
//! primitives onto memory bits, and a memory wrapper that applies them.
//!
//! Grammar accepted by [`parse_fp`]:
//!
//! ```text
//! fp     := '<' sens [ ';' sens ] '/' bit '/' ( bit | '-' ) '>'
//! sens   := bit { ('w' | 'r') bit }       e.g. 0, 1, 0w1, 1r1, 0w1w0
//! ```
//!
//! With two sensitizers the first belongs to the aggressor and the second to
//! the victim. `F` is the victim value after sensitization and `R` the value
//! a sensitizing read returns (`-` when the sensitizer does not end in a
//! read). Faults act on single bits; a word access sensitizes a bit when that
//! bit's old and new values match the primitive.

use std::fmt;

use thiserror::Error;

use crate::memory::{AccessOp, MemoryError, MemorySpec, MemoryState};

/// Longest operation sequence accepted in one sensitizer.
pub const MAX_SENSITIZER_OPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("parse error at column {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid fault primitive: {0}")]
    Semantic(String),
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<FaultError> },
    #[error("placement out of range: {0}")]
    Placement(String),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellOp {
    Write(u8),
    Read(u8),
}

/// Initial state of a cell plus the operations applied to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sensitizer {
    pub init: u8,
    pub ops: Vec<CellOp>,
}

impl Sensitizer {
    pub fn state(init: u8) -> Self {
        Self { init, ops: Vec::new() }
    }

    pub fn is_state(&self) -> bool {
        self.ops.is_empty()
    }

    fn ends_in_read(&self) -> bool {
        matches!(self.ops.last(), Some(CellOp::Read(_)))
    }
}

impl fmt::Display for Sensitizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.init)?;
        for op in &self.ops {
            match op {
                CellOp::Write(b) => write!(f, "w{b}")?,
                CellOp::Read(b) => write!(f, "r{b}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultPrimitive {
    pub aggressor: Option<Sensitizer>,
    pub victim: Sensitizer,
    pub effect: u8,
    pub read_out: Option<u8>,
}

impl FaultPrimitive {
    pub fn is_two_cell(&self) -> bool {
        self.aggressor.is_some()
    }

    /// Sensitized by cell states alone, checked after every access.
    pub fn is_state_fault(&self) -> bool {
        self.victim.is_state() && self.aggressor.as_ref().is_none_or(Sensitizer::is_state)
    }

    fn validate(&self) -> Result<(), FaultError> {
        let sides = self.aggressor.iter().chain(std::iter::once(&self.victim));
        for s in sides {
            if s.init > 1 || self.effect > 1 {
                return Err(FaultError::Semantic("values must be 0 or 1".into()));
            }
            if s.ops.len() > MAX_SENSITIZER_OPS {
                return Err(FaultError::Semantic(format!(
                    "sensitizer `{s}` has more than {MAX_SENSITIZER_OPS} operations"
                )));
            }
            let mut state = s.init;
            for op in &s.ops {
                match *op {
                    CellOp::Write(b) => state = b,
                    CellOp::Read(b) if b != state => {
                        return Err(FaultError::Semantic(format!(
                            "sensitizer `{s}` reads {b} from a cell holding {state}"
                        )))
                    }
                    CellOp::Read(_) => {}
                }
            }
        }
        if self.read_out.is_some() && !self.victim.ends_in_read() {
            return Err(FaultError::Semantic(
                "read output given but the victim sensitizer does not end in a read".into(),
            ));
        }
        if let Some(a) = &self.aggressor {
            if !a.is_state() && !self.victim.is_state() {
                return Err(FaultError::Semantic(
                    "aggressor and victim cannot both carry operations".into(),
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for FaultPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        if let Some(a) = &self.aggressor {
            write!(f, "{a};")?;
        }
        write!(f, "{}/{}/", self.victim, self.effect)?;
        match self.read_out {
            Some(r) => write!(f, "{r}>"),
            None => f.write_str("->"),
        }
    }
}

impl std::str::FromStr for FaultPrimitive {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fp(s)
    }
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    idx: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().collect(),
            idx: 0,
            src,
        }
    }

    fn pos(&self) -> usize {
        self.chars.get(self.idx).map_or(self.src.len(), |&(p, _)| p)
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.get(self.idx), Some((_, c)) if c.is_whitespace()) {
            self.idx += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.idx).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.idx += 1;
        }
        c
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FaultError> {
        Err(FaultError::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: char) -> Result<(), FaultError> {
        match self.peek() {
            Some(c) if c == want => {
                self.idx += 1;
                Ok(())
            }
            Some(c) => self.err(format!("expected `{want}`, found `{c}`")),
            None => self.err(format!("expected `{want}`, found end of input")),
        }
    }

    fn bit(&mut self) -> Result<u8, FaultError> {
        match self.peek() {
            Some('0') => {
                self.idx += 1;
                Ok(0)
            }
            Some('1') => {
                self.idx += 1;
                Ok(1)
            }
            Some(c) => self.err(format!("expected 0 or 1, found `{c}`")),
            None => self.err("expected 0 or 1, found end of input"),
        }
    }

    fn sensitizer(&mut self) -> Result<Sensitizer, FaultError> {
        let init = self.bit()?;
        let mut ops = Vec::new();
        loop {
            match self.peek() {
                Some('w') => {
                    self.idx += 1;
                    ops.push(CellOp::Write(self.bit()?));
                }
                Some('r') => {
                    self.idx += 1;
                    ops.push(CellOp::Read(self.bit()?));
                }
                _ => break,
            }
        }
        Ok(Sensitizer { init, ops })
    }
}

/// Parse a fault primitive such as `<0w0/1/->` or `<1;0w1/0/->`.
pub fn parse_fp(text: &str) -> Result<FaultPrimitive, FaultError> {
    let mut cur = Cursor::new(text);
    cur.expect('<')?;
    let first = cur.sensitizer()?;
    let (aggressor, victim) = if cur.peek() == Some(';') {
        cur.bump();
        (Some(first), cur.sensitizer()?)
    } else {
        (None, first)
    };
    cur.expect('/')?;
    let effect = cur.bit()?;
    cur.expect('/')?;
    let read_out = if cur.peek() == Some('-') {
        cur.bump();
        None
    } else {
        Some(cur.bit()?)
    };
    cur.expect('>')?;
    if let Some(c) = cur.peek() {
        return cur.err(format!("unexpected trailing `{c}`"));
    }
    let fp = FaultPrimitive {
        aggressor,
        victim,
        effect,
        read_out,
    };
    fp.validate()?;
    Ok(fp)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CatalogEntry {
    pub name: String,
    pub family: String,
    pub primitive: FaultPrimitive,
}

impl CatalogEntry {
    pub fn new(name: &str, text: &str) -> Result<Self, FaultError> {
        Ok(Self {
            name: name.to_string(),
            family: family_of(name),
            primitive: parse_fp(text)?,
        })
    }
}

/// Family of a catalog name: the name without its trailing digits.
pub fn family_of(name: &str) -> String {
    name.trim_end_matches(|c: char| c.is_ascii_digit()).to_string()
}

/// Named list of primitives.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultCatalog {
    entries: Vec<CatalogEntry>,
}

const SINGLE_CELL: &[(&str, &str)] = &[
    ("SF0", "<1/0/->"),
    ("SF1", "<0/1/->"),
    ("TF0", "<0w1/0/->"),
    ("TF1", "<1w0/1/->"),
    ("WDF0", "<0w0/1/->"),
    ("WDF1", "<1w1/0/->"),
    ("RDF0", "<0r0/1/1>"),
    ("RDF1", "<1r1/0/0>"),
    ("DRDF0", "<0r0/1/0>"),
    ("DRDF1", "<1r1/0/1>"),
    ("IRF0", "<0r0/0/1>"),
    ("IRF1", "<1r1/1/0>"),
];

const TWO_CELL: &[(&str, &str)] = &[
    ("CFst1", "<0;0/1/->"),
    ("CFst2", "<0;1/0/->"),
    ("CFst3", "<1;0/1/->"),
    ("CFst4", "<1;1/0/->"),
    ("CFds1", "<0w0;0/1/->"),
    ("CFds2", "<0w0;1/0/->"),
    ("CFds3", "<0w1;0/1/->"),
    ("CFds4", "<0w1;1/0/->"),
    ("CFds5", "<1w0;0/1/->"),
    ("CFds6", "<1w0;1/0/->"),
    ("CFds7", "<1w1;0/1/->"),
    ("CFds8", "<1w1;1/0/->"),
    ("CFtr1", "<0;0w1/0/->"),
    ("CFtr2", "<0;1w0/1/->"),
    ("CFtr3", "<1;0w1/0/->"),
    ("CFtr4", "<1;1w0/1/->"),
    ("CFwd1", "<0;0w0/1/->"),
    ("CFwd2", "<0;1w1/0/->"),
    ("CFwd3", "<1;0w0/1/->"),
    ("CFwd4", "<1;1w1/0/->"),
    ("CFrd1", "<0;0r0/1/1>"),
    ("CFrd2", "<0;1r1/0/0>"),
    ("CFrd3", "<1;0r0/1/1>"),
    ("CFrd4", "<1;1r1/0/0>"),
    ("CFdrd1", "<0;0r0/1/0>"),
    ("CFdrd2", "<0;1r1/0/1>"),
    ("CFdrd3", "<1;0r0/1/0>"),
    ("CFdrd4", "<1;1r1/0/1>"),
    ("CFir1", "<0;0r0/0/1>"),
    ("CFir2", "<0;1r1/1/0>"),
    ("CFir3", "<1;0r0/0/1>"),
    ("CFir4", "<1;1r1/1/0>"),
];

impl FaultCatalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, FaultError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(FaultError::Semantic(format!("duplicate catalog name `{}`", e.name)));
            }
        }
        Ok(Self { entries })
    }

    /// 12 static single-cell and 32 static two-cell primitives.
    pub fn default_catalog() -> Self {
        let entries = SINGLE_CELL
            .iter()
            .chain(TWO_CELL)
            .map(|(name, text)| CatalogEntry::new(name, text).expect("built-in primitive"))
            .collect();
        Self { entries }
    }

    pub fn single_cell() -> Self {
        let mut c = Self::default_catalog();
        c.entries.retain(|e| !e.primitive.is_two_cell());
        c
    }

    pub fn two_cell() -> Self {
        let mut c = Self::default_catalog();
        c.entries.retain(|e| e.primitive.is_two_cell());
        c
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A bit of the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitRef {
    pub cell: usize,
    pub bit: u32,
}

impl BitRef {
    pub fn new(cell: usize, bit: u32) -> Self {
        Self { cell, bit }
    }
}

impl fmt::Display for BitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.cell, self.bit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultInstance {
    pub name: String,
    pub family: String,
    pub primitive: FaultPrimitive,
    pub victim: BitRef,
    pub aggressor: Option<BitRef>,
    pub id: String,
}

impl FaultInstance {
    pub fn bind(
        entry: &CatalogEntry,
        victim: BitRef,
        aggressor: Option<BitRef>,
    ) -> Result<Self, FaultError> {
        match (entry.primitive.is_two_cell(), aggressor) {
            (true, None) => {
                return Err(FaultError::Placement(format!("`{}` needs an aggressor", entry.name)))
            }
            (false, Some(_)) => {
                return Err(FaultError::Placement(format!(
                    "`{}` is a single-cell primitive",
                    entry.name
                )))
            }
            (true, Some(a)) if a == victim => {
                return Err(FaultError::Placement(format!(
                    "`{}`: aggressor and victim are the same bit {a}",
                    entry.name
                )))
            }
            _ => {}
        }
        let id = match aggressor {
            Some(a) => format!("{}@v{victim}/a{a}", entry.name),
            None => format!("{}@v{victim}", entry.name),
        };
        Ok(Self {
            name: entry.name.clone(),
            family: entry.family.clone(),
            primitive: entry.primitive.clone(),
            victim,
            aggressor,
            id,
        })
    }

    fn check_bounds(&self, spec: &MemorySpec) -> Result<(), FaultError> {
        for b in std::iter::once(self.victim).chain(self.aggressor) {
            if b.cell >= spec.n_cells || b.bit >= spec.word_bits {
                return Err(FaultError::Placement(format!(
                    "{}: bit {b} outside {}x{} array",
                    self.id, spec.n_cells, spec.word_bits
                )));
            }
        }
        Ok(())
    }
}

/// How two-cell primitives are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Placement {
    /// Two-cell primitives are skipped.
    Single,
    /// Every ordered pair of distinct bits.
    #[default]
    Pairs,
    /// Same bit position in neighbouring cells, both orders.
    AdjacentPairs,
}

impl std::str::FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "single" => Ok(Self::Single),
            "pairs" => Ok(Self::Pairs),
            "adjacent-pairs" => Ok(Self::AdjacentPairs),
            other => Err(format!("unknown placement `{other}`")),
        }
    }
}

fn all_bits(spec: &MemorySpec) -> impl Iterator<Item = BitRef> + '_ {
    (0..spec.n_cells).flat_map(move |c| (0..spec.word_bits).map(move |b| BitRef::new(c, b)))
}

fn place(entry: &CatalogEntry, spec: &MemorySpec, mode: Placement, out: &mut Vec<FaultInstance>) {
    let bind = |v, a| FaultInstance::bind(entry, v, a).expect("placement is well-formed");
    if !entry.primitive.is_two_cell() {
        out.extend(all_bits(spec).map(|v| bind(v, None)));
        return;
    }
    for v in all_bits(spec) {
        match mode {
            Placement::Single => {}
            Placement::Pairs => {
                out.extend(all_bits(spec).filter(|&a| a != v).map(|a| bind(v, Some(a))));
            }
            Placement::AdjacentPairs => {
                let lo = v.cell.checked_sub(1).map(|c| BitRef::new(c, v.bit));
                let hi = (v.cell + 1 < spec.n_cells).then(|| BitRef::new(v.cell + 1, v.bit));
                out.extend(lo.into_iter().chain(hi).map(|a| bind(v, Some(a))));
            }
        }
    }
}

/// Bind every catalog primitive to every applicable location, ordered by
/// (primitive, victim, aggressor).
pub fn enumerate_instances(
    catalog: &FaultCatalog,
    spec: &MemorySpec,
    mode: Placement,
) -> Vec<FaultInstance> {
    let mut out = Vec::new();
    for entry in catalog.entries() {
        place(entry, spec, mode, &mut out);
    }
    out
}

/// Explicit placement from a fault-list directive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Cell(BitRef),
    Pair { aggressor: BitRef, victim: BitRef },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultListEntry {
    pub entry: CatalogEntry,
    pub binding: Option<Binding>,
}

fn parse_bitref(s: &str) -> Option<BitRef> {
    let s = s.trim();
    match s.split_once('.') {
        Some((c, b)) => Some(BitRef::new(c.trim().parse().ok()?, b.trim().parse().ok()?)),
        None => Some(BitRef::new(s.parse().ok()?, 0)),
    }
}

fn parse_binding(s: &str) -> Result<Binding, FaultError> {
    let bad = || FaultError::Placement(format!("bad binding `@{s}`"));
    if let Some(rest) = s.strip_prefix("pair") {
        let inner = rest
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (a, v) = inner.split_once(',').ok_or_else(bad)?;
        Ok(Binding::Pair {
            aggressor: parse_bitref(a).ok_or_else(bad)?,
            victim: parse_bitref(v).ok_or_else(bad)?,
        })
    } else {
        parse_bitref(s).map(Binding::Cell).ok_or_else(bad)
    }
}

fn parse_list_line(line: &str) -> Result<Option<FaultListEntry>, FaultError> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let open = line.find('<').ok_or_else(|| FaultError::Parse {
        pos: 0,
        msg: "missing `<`".into(),
    })?;
    let close = line.rfind('>').ok_or_else(|| FaultError::Parse {
        pos: line.len(),
        msg: "missing `>`".into(),
    })?;
    let name = line[..open].trim();
    let text = &line[open..=close];
    let primitive = parse_fp(text).map_err(|e| match e {
        FaultError::Parse { pos, msg } => FaultError::Parse { pos: pos + open, msg },
        other => other,
    })?;
    let rest = line[close + 1..].trim();
    let binding = match rest.strip_prefix('@') {
        Some(b) => Some(parse_binding(b.trim())?),
        None if rest.is_empty() => None,
        None => {
            return Err(FaultError::Parse {
                pos: close + 1,
                msg: format!("unexpected `{rest}`"),
            })
        }
    };
    let name = if name.is_empty() { primitive.to_string() } else { name.to_string() };
    Ok(Some(FaultListEntry {
        entry: CatalogEntry {
            family: family_of(&name),
            name,
            primitive,
        },
        binding,
    }))
}

/// Parse a fault-list file: one primitive per line with an optional leading
/// name and optional `@cell[.bit]` or `@pair(a[.bit],v[.bit])` placement.
/// `#` starts a comment.
pub fn parse_fault_list(text: &str) -> Result<Vec<FaultListEntry>, FaultError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_list_line(line) {
            Ok(Some(e)) => out.push(e),
            Ok(None) => {}
            Err(e) => {
                return Err(FaultError::Line {
                    line: i + 1,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// Instances for a parsed fault list: bound entries yield exactly one
/// instance, unbound ones are enumerated with `mode`.
pub fn instances_from_list(
    list: &[FaultListEntry],
    spec: &MemorySpec,
    mode: Placement,
) -> Result<Vec<FaultInstance>, FaultError> {
    let mut out = Vec::new();
    for item in list {
        match item.binding {
            None => place(&item.entry, spec, mode, &mut out),
            Some(Binding::Cell(v)) => out.push(FaultInstance::bind(&item.entry, v, None)?),
            Some(Binding::Pair { aggressor, victim }) => {
                out.push(FaultInstance::bind(&item.entry, victim, Some(aggressor))?)
            }
        }
    }
    for inst in &out {
        inst.check_bounds(spec)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Step {
    pre: u8,
    op: CellOp,
}

/// The last operations applied to one bit.
#[derive(Debug, Clone, Default)]
struct History {
    steps: [Option<Step>; MAX_SENSITIZER_OPS],
}

impl History {
    fn push(&mut self, step: Step) {
        self.steps.rotate_left(1);
        self.steps[MAX_SENSITIZER_OPS - 1] = Some(step);
    }

    fn matches(&self, s: &Sensitizer) -> bool {
        let n = s.ops.len();
        if n == 0 || n > MAX_SENSITIZER_OPS {
            return false;
        }
        let tail = &self.steps[MAX_SENSITIZER_OPS - n..];
        tail.iter().zip(&s.ops).all(|(st, op)| matches!(st, Some(st) if st.op == *op))
            && matches!(tail[0], Some(st) if st.pre == s.init)
    }
}

#[derive(Debug, Clone)]
struct ActiveFault {
    inst: FaultInstance,
    victim_hist: History,
    aggressor_hist: History,
}

#[inline]
fn bit_of(word: u32, bit: u32) -> u8 {
    (word >> bit & 1) as u8
}

#[inline]
fn with_bit(word: u32, bit: u32, value: u8) -> u32 {
    (word & !(1 << bit)) | ((value as u32) << bit)
}

/// A [`MemoryState`] whose accesses are perturbed by fault instances.
///
/// Instances are evaluated in the order given. Operation-sensitized faults
/// fire on the access that completes their sensitizer; state faults are
/// re-enforced after every access and after [`FaultyMemory::fill`].
#[derive(Debug, Clone)]
pub struct FaultyMemory {
    mem: MemoryState,
    faults: Vec<ActiveFault>,
}

impl FaultyMemory {
    pub fn new(mem: MemoryState, instances: Vec<FaultInstance>) -> Result<Self, FaultError> {
        for inst in &instances {
            inst.check_bounds(mem.spec())?;
        }
        let mut fm = Self {
            mem,
            faults: instances
                .into_iter()
                .map(|inst| ActiveFault {
                    inst,
                    victim_hist: History::default(),
                    aggressor_hist: History::default(),
                })
                .collect(),
        };
        fm.enforce_state_faults();
        Ok(fm)
    }

    pub fn fault_free(mem: MemoryState) -> Self {
        Self { mem, faults: Vec::new() }
    }

    pub fn state(&self) -> &MemoryState {
        &self.mem
    }

    pub fn into_state(self) -> MemoryState {
        self.mem
    }

    pub fn spec(&self) -> &MemorySpec {
        self.mem.spec()
    }

    pub fn instances(&self) -> impl Iterator<Item = &FaultInstance> {
        self.faults.iter().map(|f| &f.inst)
    }

    pub fn advance(&mut self, cycles: u64) {
        self.mem.advance(cycles);
    }

    /// Background fill outside the access path; state faults still apply.
    pub fn fill(&mut self, value: u32) -> Result<(), FaultError> {
        self.mem.fill(value)?;
        self.enforce_state_faults();
        Ok(())
    }

    fn bit_at(&self, b: BitRef) -> u8 {
        bit_of(self.mem.peek(b.cell), b.bit)
    }

    fn set_bit(&mut self, b: BitRef, value: u8) {
        let w = self.mem.peek(b.cell);
        self.mem.poke(b.cell, with_bit(w, b.bit, value));
    }

    /// Record `op` on every fault bit inside `address` and return the
    /// indices of operation-sensitized faults that fire. `new` is the word
    /// being written, ignored for reads.
    fn sensitize(&mut self, op: AccessOp, address: usize, new: u32) -> Vec<usize> {
        let pre = self.mem.peek(address);
        let mut fired = Vec::new();
        for i in 0..self.faults.len() {
            let (victim, aggressor) = (self.faults[i].inst.victim, self.faults[i].inst.aggressor);
            let cell_op = |b: BitRef| {
                let old = bit_of(pre, b.bit);
                let op = match op {
                    AccessOp::Read => CellOp::Read(old),
                    AccessOp::Write => CellOp::Write(bit_of(new, b.bit)),
                };
                Step { pre: old, op }
            };
            let victim_pre = self.bit_at(victim);
            let aggressor_pre = aggressor.map(|a| self.bit_at(a));
            let f = &mut self.faults[i];
            let fp = &f.inst.primitive;
            if victim.cell == address {
                f.victim_hist.push(cell_op(victim));
                if !fp.victim.is_state()
                    && f.victim_hist.matches(&fp.victim)
                    && fp.aggressor.as_ref().is_none_or(|a| aggressor_pre == Some(a.init))
                {
                    fired.push(i);
                }
            }
            if let Some(a) = aggressor.filter(|a| a.cell == address) {
                f.aggressor_hist.push(cell_op(a));
                let sens = fp.aggressor.as_ref().expect("two-cell primitive");
                if !sens.is_state() && f.aggressor_hist.matches(sens) && victim_pre == fp.victim.init
                {
                    fired.push(i);
                }
            }
        }
        fired
    }

    fn enforce_state_faults(&mut self) -> Vec<usize> {
        let mut changed = Vec::new();
        for i in 0..self.faults.len() {
            let inst = &self.faults[i].inst;
            if !inst.primitive.is_state_fault() {
                continue;
            }
            let fp = &inst.primitive;
            let (victim, aggressor, effect) = (inst.victim, inst.aggressor, fp.effect);
            let armed = self.bit_at(victim) == fp.victim.init
                && match (&fp.aggressor, aggressor) {
                    (Some(s), Some(a)) => self.bit_at(a) == s.init,
                    _ => true,
                };
            if armed && self.bit_at(victim) != effect {
                self.set_bit(victim, effect);
                changed.push(i);
            }
        }
        changed
    }

    pub fn read(&mut self, address: usize) -> Result<u32, FaultError> {
        self.mem.check_address(address)?;
        if self.faults.is_empty() {
            return Ok(self.mem.read(address)?);
        }
        let mut value = self.mem.peek(address);
        let fired = self.sensitize(AccessOp::Read, address, 0);
        for &i in &fired {
            let inst = &self.faults[i].inst;
            let (victim, effect, read_out) =
                (inst.victim, inst.primitive.effect, inst.primitive.read_out);
            let victim_read = victim.cell == address && inst.primitive.victim.ends_in_read();
            self.set_bit(victim, effect);
            if let (true, Some(r)) = (victim_read, read_out) {
                value = with_bit(value, victim.bit, r);
            }
        }
        let mut touched = fired;
        touched.extend(self.enforce_state_faults());
        self.mem.record(AccessOp::Read, address, value, touched);
        Ok(value)
    }

    pub fn write(&mut self, address: usize, value: u32) -> Result<(), FaultError> {
        self.mem.check_address(address)?;
        self.mem.check_value(value)?;
        if self.faults.is_empty() {
            return Ok(self.mem.write(address, value)?);
        }
        let fired = self.sensitize(AccessOp::Write, address, value);
        self.mem.poke(address, value);
        for &i in &fired {
            let inst = &self.faults[i].inst;
            let (victim, effect) = (inst.victim, inst.primitive.effect);
            self.set_bit(victim, effect);
        }
        let mut touched = fired;
        touched.extend(self.enforce_state_faults());
        self.mem.record(AccessOp::Write, address, value, touched);
        Ok(())
    }
}

/// Read through the fault layer.
pub fn faulty_read(mem: &mut FaultyMemory, address: usize) -> Result<u32, FaultError> {
    mem.read(address)
}

/// Write through the fault layer.
pub fn faulty_write(mem: &mut FaultyMemory, address: usize, value: u32) -> Result<(), FaultError> {
    mem.write(address, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::mem_new;

    fn bits(n: usize) -> MemorySpec {
        MemorySpec::bits(n)
    }

    fn one(name: &str, victim: usize, aggressor: Option<usize>) -> FaultInstance {
        let cat = FaultCatalog::default_catalog();
        let e = cat.get(name).unwrap();
        FaultInstance::bind(e, BitRef::new(victim, 0), aggressor.map(|a| BitRef::new(a, 0))).unwrap()
    }

    fn faulty(n: usize, fill: u32, insts: Vec<FaultInstance>) -> FaultyMemory {
        FaultyMemory::new(mem_new(bits(n), fill).unwrap(), insts).unwrap()
    }

    #[test]
    fn parse_examples() {
        let wdf0 = parse_fp("<0w0/1/->").unwrap();
        assert_eq!(wdf0.victim, Sensitizer { init: 0, ops: vec![CellOp::Write(0)] });
        assert_eq!((wdf0.effect, wdf0.read_out), (1, None));
        let drdf1 = parse_fp("<1r1/0/1>").unwrap();
        assert_eq!((drdf1.effect, drdf1.read_out), (0, Some(1)));
        let cftr = parse_fp("<1;0w1/0/->").unwrap();
        assert_eq!(cftr.aggressor, Some(Sensitizer::state(1)));
        assert_eq!(cftr.victim.ops, vec![CellOp::Write(1)]);
    }

    #[test]
    fn parse_tolerates_whitespace_and_canonicalizes() {
        let fp = parse_fp(" < 1 ; 0 w 1 / 0 / - > ").unwrap();
        assert_eq!(fp.to_string(), "<1;0w1/0/->");
        let dyn_fp = parse_fp("<0w1w0/1/->").unwrap();
        assert_eq!(dyn_fp.victim.ops.len(), 2);
        assert_eq!(dyn_fp.to_string(), "<0w1w0/1/->");
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_fp("<0x0/1/->") {
            Err(FaultError::Parse { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_fp(""), Err(FaultError::Parse { pos: 0, .. })));
        assert!(matches!(parse_fp("<0/1/->x"), Err(FaultError::Parse { pos: 7, .. })));
    }

    #[test]
    fn semantic_errors() {
        assert!(matches!(parse_fp("<0w1/0/1>"), Err(FaultError::Semantic(_))));
        assert!(matches!(parse_fp("<0r1/0/1>"), Err(FaultError::Semantic(_))));
        assert!(matches!(parse_fp("<0w1w0w1/0/->"), Err(FaultError::Semantic(_))));
        assert!(matches!(parse_fp("<0w1;0w1/0/->"), Err(FaultError::Semantic(_))));
    }

    #[test]
    fn catalog_shape() {
        let cat = FaultCatalog::default_catalog();
        assert_eq!(cat.len(), 44);
        assert_eq!(FaultCatalog::single_cell().len(), 12);
        assert_eq!(FaultCatalog::two_cell().len(), 32);
        for e in cat.entries() {
            assert_eq!(parse_fp(&e.primitive.to_string()).unwrap(), e.primitive);
        }
        let dup = vec![
            CatalogEntry::new("A", "<0/1/->").unwrap(),
            CatalogEntry::new("A", "<1/0/->").unwrap(),
        ];
        assert!(FaultCatalog::new(dup).is_err());
    }

    #[test]
    fn enumeration_counts() {
        let single = FaultCatalog::single_cell();
        assert_eq!(enumerate_instances(&single, &bits(16), Placement::Single).len(), 192);
        let one_cf = FaultCatalog::new(vec![CatalogEntry::new("CFst1", "<0;0/1/->").unwrap()]).unwrap();
        assert_eq!(enumerate_instances(&one_cf, &bits(4), Placement::Pairs).len(), 12);
        assert_eq!(enumerate_instances(&one_cf, &bits(4), Placement::AdjacentPairs).len(), 6);
        assert_eq!(enumerate_instances(&one_cf, &bits(4), Placement::Single).len(), 0);
    }

    #[test]
    fn enumeration_order() {
        let one_cf = FaultCatalog::new(vec![CatalogEntry::new("CFst1", "<0;0/1/->").unwrap()]).unwrap();
        let got: Vec<_> = enumerate_instances(&one_cf, &bits(3), Placement::Pairs)
            .iter()
            .map(|i| (i.victim.cell, i.aggressor.unwrap().cell))
            .collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }

    #[test]
    fn stuck_at_zero() {
        let mut m = faulty(4, 0, vec![one("SF0", 3, None)]);
        m.write(3, 1).unwrap();
        for _ in 0..3 {
            assert_eq!(m.read(3).unwrap(), 0);
        }
    }

    #[test]
    fn write_destructive() {
        let mut m = faulty(4, 0, vec![one("WDF0", 2, None)]);
        m.write(2, 0).unwrap();
        assert_eq!(m.state().cells()[2], 1);
        assert_eq!(m.state().trace()[0].faults, vec![0]);
    }

    #[test]
    fn transition_fault_only_on_transition() {
        let mut m = faulty(2, 0, vec![one("TF0", 0, None)]);
        m.write(0, 1).unwrap();
        assert_eq!(m.read(0).unwrap(), 0);
        let mut m = faulty(2, 1, vec![one("TF0", 0, None)]);
        m.write(0, 1).unwrap();
        assert_eq!(m.read(0).unwrap(), 1);
    }

    #[test]
    fn deceptive_read_destructive() {
        let mut m = faulty(2, 1, vec![one("DRDF1", 0, None)]);
        assert_eq!(m.read(0).unwrap(), 1);
        assert_eq!(m.read(0).unwrap(), 0);
    }

    #[test]
    fn coupling_transition_depends_on_aggressor() {
        let inst = one("CFtr3", 1, Some(0)); // <1;0w1/0/->
        let mut m = faulty(2, 0, vec![inst.clone()]);
        m.write(1, 1).unwrap();
        assert_eq!(m.read(1).unwrap(), 1);
        let mut m = faulty(2, 0, vec![inst]);
        m.write(0, 1).unwrap();
        m.write(1, 0).unwrap();
        m.write(1, 1).unwrap();
        assert_eq!(m.read(1).unwrap(), 0);
    }

    #[test]
    fn disturb_coupling_fires_on_aggressor_write() {
        let mut m = faulty(2, 0, vec![one("CFds3", 1, Some(0))]); // <0w1;0/1/->
        m.write(0, 1).unwrap();
        assert_eq!(m.read(1).unwrap(), 1);
    }

    #[test]
    fn state_coupling_is_invariant() {
        let mut m = faulty(2, 0, vec![one("CFst1", 1, Some(0))]); // <0;0/1/->
        assert_eq!(m.state().cells(), &[0, 1]);
        m.write(1, 0).unwrap();
        assert_eq!(m.read(1).unwrap(), 1);
        m.write(0, 1).unwrap();
        m.write(1, 0).unwrap();
        assert_eq!(m.read(1).unwrap(), 0);
    }

    #[test]
    fn dynamic_fault_needs_both_operations() {
        let e = CatalogEntry::new("dRDF", "<0w1r1/0/0>").unwrap();
        let inst = FaultInstance::bind(&e, BitRef::new(0, 0), None).unwrap();
        let mut m = faulty(2, 1, vec![inst.clone()]);
        assert_eq!(m.read(0).unwrap(), 1);
        let mut m = faulty(2, 0, vec![inst]);
        m.write(0, 1).unwrap();
        m.write(1, 1).unwrap();
        assert_eq!(m.read(0).unwrap(), 0);
        assert_eq!(m.read(0).unwrap(), 0);
    }

    #[test]
    fn word_faults_act_per_bit() {
        let spec = MemorySpec::new(2, 4, 1).unwrap();
        let e = FaultCatalog::default_catalog().get("TF0").unwrap().clone();
        let inst = FaultInstance::bind(&e, BitRef::new(0, 2), None).unwrap();
        let mut m = FaultyMemory::new(mem_new(spec, 0).unwrap(), vec![inst]).unwrap();
        m.write(0, 0b1111).unwrap();
        assert_eq!(m.read(0).unwrap(), 0b1011);
    }

    #[test]
    fn empty_fault_set_matches_plain_memory() {
        let mut plain = mem_new(bits(4), 0).unwrap();
        let mut f = faulty(4, 0, vec![]);
        for (a, v) in [(1, 1), (2, 0), (1, 0), (3, 1)] {
            plain.write(a, v).unwrap();
            f.write(a, v).unwrap();
            assert_eq!(plain.read(a).unwrap(), f.read(a).unwrap());
        }
        assert_eq!(plain.trace(), f.state().trace());
    }

    #[test]
    fn bind_rejects_bad_placements() {
        let cat = FaultCatalog::default_catalog();
        let cf = cat.get("CFst1").unwrap();
        assert!(FaultInstance::bind(cf, BitRef::new(0, 0), None).is_err());
        assert!(FaultInstance::bind(cf, BitRef::new(0, 0), Some(BitRef::new(0, 0))).is_err());
        let sf = cat.get("SF0").unwrap();
        assert!(FaultInstance::bind(sf, BitRef::new(0, 0), Some(BitRef::new(1, 0))).is_err());
        let far = FaultInstance::bind(sf, BitRef::new(9, 0), None).unwrap();
        assert!(FaultyMemory::new(mem_new(bits(4), 0).unwrap(), vec![far]).is_err());
    }

    #[test]
    fn fault_list_file() {
        let text = "# comment\n\
                    WDF0 <0w0/1/->  @3\n\
                    <1;0w1/0/-> @pair(1,2)\n\
                    SF1 <0/1/->\n";
        let list = parse_fault_list(text).unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[0].binding, Some(Binding::Cell(BitRef::new(3, 0))));
        assert_eq!(list[1].entry.name, "<1;0w1/0/->");
        let insts = instances_from_list(&list, &bits(4), Placement::Pairs).unwrap();
        assert_eq!(insts.len(), 1 + 1 + 4);
        assert_eq!(insts[1].aggressor, Some(BitRef::new(1, 0)));
        assert_eq!(insts[1].victim, BitRef::new(2, 0));
        assert!(instances_from_list(&list, &bits(3), Placement::Pairs).is_err());
    }

    #[test]
    fn fault_list_errors_have_line_numbers() {
        match parse_fault_list("SF0 <1/0/->\nbad <0/2/->\n") {
            Err(FaultError::Line { line: 2, source }) => {
                assert!(matches!(*source, FaultError::Parse { pos: 7, .. }))
            }
            other => panic!("{other:?}"),
        }
    }
}
