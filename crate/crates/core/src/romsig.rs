//! Two-stage program-memory signature.
//!
//! A lookup table holds `c2*i ^ c1*j` for every pair of field elements, and
//! a two-byte register `(msw, lsw)` is clocked once per ROM byte:
//!
//! ```text
//! msw' = lsw
//! lsw' = lsw ^ table[msw] ^ byte
//! ```
//!
//! The whole `msw` byte indexes the table, so for GF(16) its high nibble
//! selects the `c2`-scaled row and its low nibble the `c1`-scaled column.

use std::fmt;

use thiserror::Error;

use crate::galois::{FieldSpec, GaloisError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RomSigError {
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error("signature table must have 256 entries, found {0}")]
    TableSize(usize),
    #[error("field GF(2^{0}) too large for a lookup table")]
    FieldTooLarge(u32),
    #[error("bad signature seed `{0}`, expected MM:LL in hex")]
    Seed(String),
}

/// Table of `c2*i ^ c1*j`, row `i`, column `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumTable {
    side: usize,
    entries: Vec<u8>,
}

impl SumTable {
    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    /// Number of rows (and columns).
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.side + col]
    }

    /// Rows of comma-separated decimals, each prefixed with `prefix`.
    pub fn render(&self, prefix: &str) -> String {
        let mut out = String::new();
        for row in self.entries.chunks(self.side) {
            out.push_str(prefix);
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn gen_table(field: &FieldSpec, c1: u32, c2: u32) -> Result<SumTable, RomSigError> {
    field.check(c1)?;
    field.check(c2)?;
    if field.degree() > 4 {
        return Err(RomSigError::FieldTooLarge(field.degree()));
    }
    let side = field.order() as usize;
    let mut entries = Vec::with_capacity(side * side);
    for i in 0..side as u32 {
        let row = field.mul(c2, i)?;
        for j in 0..side as u32 {
            entries.push((row ^ field.mul(c1, j)?) as u8);
        }
    }
    Ok(SumTable { side, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SigState {
    pub msw: u8,
    pub lsw: u8,
}

impl SigState {
    pub fn new(msw: u8, lsw: u8) -> Self {
        Self { msw, lsw }
    }

    #[inline]
    pub fn step(self, table: &[u8; 256], byte: u8) -> Self {
        Self {
            msw: self.lsw,
            lsw: self.lsw ^ table[self.msw as usize] ^ byte,
        }
    }
}

impl fmt::Display for SigState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02x}:{:02x}", self.msw, self.lsw)
    }
}

impl std::str::FromStr for SigState {
    type Err = RomSigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RomSigError::Seed(s.to_string());
        let (m, l) = s.trim().split_once(':').ok_or_else(bad)?;
        Ok(Self {
            msw: u8::from_str_radix(m, 16).map_err(|_| bad())?,
            lsw: u8::from_str_radix(l, 16).map_err(|_| bad())?,
        })
    }
}

/// Clock the signature register over `rom` in address order.
pub fn rom_signature(rom: &[u8], table: &SumTable, seed: SigState) -> Result<SigState, RomSigError> {
    let table: &[u8; 256] = table
        .entries
        .as_slice()
        .try_into()
        .map_err(|_| RomSigError::TableSize(table.entries.len()))?;
    Ok(rom.iter().fold(seed, |s, &b| s.step(table, b)))
}

/// Fraction of single-byte corruptions of `rom` that change its signature,
/// as `(changed, total)` over every position and every nonzero error byte.
pub fn corruption_sensitivity(rom: &[u8], table: &SumTable, seed: SigState) -> Result<(u64, u64), RomSigError> {
    let golden = rom_signature(rom, table, seed)?;
    let mut copy = rom.to_vec();
    let mut changed = 0;
    for pos in 0..rom.len() {
        for err in 1..=255u8 {
            copy[pos] = rom[pos] ^ err;
            if rom_signature(&copy, table, seed)? != golden {
                changed += 1;
            }
        }
        copy[pos] = rom[pos];
    }
    Ok((changed, rom.len() as u64 * 255))
}
