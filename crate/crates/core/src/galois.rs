//! Binary polynomial arithmetic, GF(2^m) fields and GLFSR recurrences.
//!
//! Elements and polynomials are stored little-endian in an integer: bit `i`
//! is the coefficient of `x^i`, so `x^4 + x + 1` is `0b10011 = 19`.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Largest supported field degree.
pub const MAX_FIELD_DEGREE: u32 = 16;

/// Largest state space `(2^m)^k` explored by [`sequence_period`].
pub const MAX_STATE_SPACE: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaloisError {
    #[error("invalid modulus {0}: must have degree >= 1")]
    InvalidModulus(Poly2),
    #[error("invalid input {0}: {1}")]
    InvalidInput(Poly2, &'static str),
    #[error("element {value} out of range for GF(2^{m})")]
    InvalidElement { value: u32, m: u32 },
    #[error("window length {got} does not match register length {expected}")]
    Shape { expected: usize, got: usize },
    #[error("seed is all-zero; zero is a fixed point of the recurrence")]
    DegenerateSeed,
    #[error("state space (2^{m})^{k} exceeds 2^24")]
    StateSpaceTooLarge { m: u32, k: usize },
    #[error("field degree {0} exceeds the supported maximum of 16")]
    FieldTooLarge(u32),
    #[error("feedback polynomial needs at least one stage and a nonzero leading coefficient")]
    BadFeedback,
    #[error("sequence does not return to its seed (recurrence is not invertible)")]
    NotPeriodic,
}

/// A polynomial over GF(2).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Poly2(pub u32);

impl Poly2 {
    pub const ZERO: Poly2 = Poly2(0);
    pub const ONE: Poly2 = Poly2(1);
    pub const X: Poly2 = Poly2(2);

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(self) -> Option<u32> {
        if self.0 == 0 {
            None
        } else {
            Some(31 - self.0.leading_zeros())
        }
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly2({:#b})", self.0)
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("0");
        }
        let mut first = true;
        for i in 0..32 {
            if self.0 >> i & 1 == 1 {
                if !first {
                    f.write_str("+")?;
                }
                first = false;
                match i {
                    0 => f.write_str("1")?,
                    1 => f.write_str("x")?,
                    _ => write!(f, "x^{i}")?,
                }
            }
        }
        Ok(())
    }
}

/// Remainder of `a` divided by `m`, both as raw 64-bit coefficient masks.
fn rem_raw(mut a: u64, m: u64) -> u64 {
    let dm = 63 - m.leading_zeros();
    while a != 0 {
        let da = 63 - a.leading_zeros();
        if da < dm {
            break;
        }
        a ^= m << (da - dm);
    }
    a
}

fn clmul(a: u32, b: u32) -> u64 {
    let (a, mut b) = (a as u64, b);
    let mut acc = 0u64;
    let mut i = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a << i;
        }
        b >>= 1;
        i += 1;
    }
    acc
}

/// Carry-less product of `a` and `b` reduced modulo `modulus`.
pub fn poly2_mul_mod(a: Poly2, b: Poly2, modulus: Poly2) -> Result<Poly2, GaloisError> {
    match modulus.degree() {
        None | Some(0) => Err(GaloisError::InvalidModulus(modulus)),
        Some(_) => {
            let m = modulus.0 as u64;
            let a = rem_raw(a.0 as u64, m) as u32;
            let b = rem_raw(b.0 as u64, m) as u32;
            Ok(Poly2(rem_raw(clmul(a, b), m) as u32))
        }
    }
}

/// Irreducibility over GF(2) by trial division with every polynomial of
/// degree `1..=deg/2`.
pub fn is_irreducible(p: Poly2) -> Result<bool, GaloisError> {
    let d = match p.degree() {
        None | Some(0) => return Err(GaloisError::InvalidInput(p, "constant polynomial")),
        Some(d) => d,
    };
    if d > 31 {
        return Err(GaloisError::InvalidInput(p, "degree too large"));
    }
    let half = d / 2;
    for deg in 1..=half {
        for low in 0..(1u64 << deg) {
            let divisor = (1u64 << deg) | low;
            if rem_raw(p.0 as u64, divisor) == 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Multiplicative order of `x` modulo `p`, or `None` if `x` is not a unit.
fn order_of_x(p: Poly2) -> Option<u64> {
    let d = p.degree()?;
    let bound = 1u64 << d;
    let one = rem_raw(1, p.0 as u64);
    let mut acc = rem_raw(2, p.0 as u64);
    if acc == 0 {
        return None;
    }
    for n in 1..bound {
        if acc == one {
            return Some(n);
        }
        acc = rem_raw(acc << 1, p.0 as u64);
    }
    None
}

/// True iff `p` is irreducible and `x` generates the multiplicative group of
/// `GF(2)[x]/p`.
pub fn is_primitive(p: Poly2) -> Result<bool, GaloisError> {
    if !is_irreducible(p)? {
        return Err(GaloisError::InvalidInput(p, "reducible polynomial"));
    }
    let d = p.degree().unwrap();
    if d > MAX_FIELD_DEGREE {
        return Err(GaloisError::FieldTooLarge(d));
    }
    Ok(order_of_x(p) == Some((1u64 << d) - 1))
}

/// Smallest primitive polynomial of the given degree.
pub fn first_primitive(degree: u32) -> Option<Poly2> {
    if degree == 0 || degree > MAX_FIELD_DEGREE {
        return None;
    }
    (1u32 << degree..1u32 << (degree + 1))
        .map(Poly2)
        .find(|&p| is_irreducible(p).unwrap_or(false) && is_primitive(p).unwrap_or(false))
}

/// The field GF(2^m) generated by an irreducible polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    p: Poly2,
    m: u32,
}

impl FieldSpec {
    pub fn new(p: Poly2) -> Result<Self, GaloisError> {
        let m = match p.degree() {
            None | Some(0) => return Err(GaloisError::InvalidModulus(p)),
            Some(d) => d,
        };
        if m > MAX_FIELD_DEGREE {
            return Err(GaloisError::FieldTooLarge(m));
        }
        if !is_irreducible(p)? {
            return Err(GaloisError::InvalidInput(p, "reducible polynomial"));
        }
        Ok(Self { p, m })
    }

    /// GF(2) as `GF(2)[x]/(x+1)`.
    pub fn gf2() -> Self {
        Self { p: Poly2(0b11), m: 1 }
    }

    pub fn generator(&self) -> Poly2 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn order(&self) -> u32 {
        1 << self.m
    }

    pub fn mask(&self) -> u32 {
        (1 << self.m) - 1
    }

    pub fn check(&self, a: u32) -> Result<u32, GaloisError> {
        if a > self.mask() {
            Err(GaloisError::InvalidElement { value: a, m: self.m })
        } else {
            Ok(a)
        }
    }

    pub fn mul(&self, a: u32, b: u32) -> Result<u32, GaloisError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn mul_unchecked(&self, a: u32, b: u32) -> u32 {
        rem_raw(clmul(a, b), self.p.0 as u64) as u32
    }

    /// Multiplicative inverse by exponentiation, `a^(2^m - 2)`.
    pub fn inv(&self, a: u32) -> Result<Option<u32>, GaloisError> {
        self.check(a)?;
        if a == 0 {
            return Ok(None);
        }
        let mut e = self.order() - 2;
        let (mut base, mut acc) = (a, 1);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_unchecked(acc, base);
            }
            base = self.mul_unchecked(base, base);
            e >>= 1;
        }
        Ok(Some(acc))
    }
}

/// Product in `f`, with range checks.
pub fn field_mul(f: &FieldSpec, a: u32, b: u32) -> Result<u32, GaloisError> {
    f.mul(a, b)
}

/// Structure of a virtual register: `q(z) = c0 + c1 z + ... + ck z^k` over a
/// field. Only `c1..ck` take part in the recurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeedbackSpec {
    field: FieldSpec,
    coeffs: Vec<u32>,
    c0: u32,
}

impl FeedbackSpec {
    pub fn new(field: FieldSpec, coeffs: Vec<u32>) -> Result<Self, GaloisError> {
        Self::with_constant(field, 1, coeffs)
    }

    pub fn with_constant(field: FieldSpec, c0: u32, coeffs: Vec<u32>) -> Result<Self, GaloisError> {
        field.check(c0)?;
        for &c in &coeffs {
            field.check(c)?;
        }
        match coeffs.last() {
            Some(&c) if c != 0 => Ok(Self { field, coeffs, c0 }),
            _ => Err(GaloisError::BadFeedback),
        }
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn constant(&self) -> u32 {
        self.c0
    }

    /// Register length `k`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Feedback value for a window `(s_1, ..., s_k)`, oldest stage first.
    pub fn next(&self, window: &[u32]) -> Result<u32, GaloisError> {
        if window.len() != self.coeffs.len() {
            return Err(GaloisError::Shape {
                expected: self.coeffs.len(),
                got: window.len(),
            });
        }
        for &w in window {
            self.field.check(w)?;
        }
        Ok(self.next_unchecked(window.iter().copied()))
    }

    #[inline]
    pub(crate) fn next_unchecked(&self, window: impl Iterator<Item = u32>) -> u32 {
        self.coeffs
            .iter()
            .zip(window)
            .fold(0, |acc, (&c, s)| match c {
                0 => acc,
                1 => acc ^ s,
                _ => acc ^ self.field.mul_unchecked(c, s),
            })
    }
}

/// One GLFSR step: `c1*s1 ^ c2*s2 ^ ... ^ ck*sk`.
pub fn glfsr_next(fb: &FeedbackSpec, window: &[u32]) -> Result<u32, GaloisError> {
    fb.next(window)
}

/// Smallest `t > 0` after which the register window returns to `seed`.
pub fn sequence_period(fb: &FeedbackSpec, seed: &[u32]) -> Result<u64, GaloisError> {
    let k = fb.len();
    if seed.len() != k {
        return Err(GaloisError::Shape { expected: k, got: seed.len() });
    }
    for &s in seed {
        fb.field().check(s)?;
    }
    if seed.iter().all(|&s| s == 0) {
        return Err(GaloisError::DegenerateSeed);
    }
    let m = fb.field().degree();
    let space_bits = m as u64 * k as u64;
    if space_bits > 24 {
        return Err(GaloisError::StateSpaceTooLarge { m, k });
    }
    let bound = 1u64 << space_bits;
    let mut window: Vec<u32> = seed.to_vec();
    let mut seen = HashSet::new();
    for t in 1..=bound {
        let next = fb.next_unchecked(window.iter().copied());
        window.rotate_left(1);
        window[k - 1] = next;
        if window == seed {
            return Ok(t);
        }
        // A repeated non-seed state means the orbit is a tail plus a cycle.
        if !seen.insert(window.clone()) {
            return Err(GaloisError::NotPeriodic);
        }
    }
    Err(GaloisError::NotPeriodic)
}

/// Parse a polynomial written as decimal, `0b...` or `0x...`.
pub fn parse_poly(text: &str) -> Option<Poly2> {
    parse_int(text).map(Poly2)
}

/// Parse an unsigned integer written as decimal, `0b...` or `0x...`.
pub fn parse_int(text: &str) -> Option<u32> {
    let t = text.trim().replace('_', "");
    if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        u32::from_str_radix(b, 2).ok()
    } else if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u32::from_str_radix(h, 16).ok()
    } else {
        t.parse().ok()
    }
}
