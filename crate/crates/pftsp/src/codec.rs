//! Penalty-free maps between bit strings and valid cycles.
//!
//! Two codecs are provided. The non-factorial codec consumes one selection
//! chunk of `ceil(log2(i))` bits per placement step with a modulo wrap, so
//! every bit string of the right length decodes to a valid fixed-start cycle.
//! The factorial codec interprets the whole word as an integer index into the
//! `n!` permutations (a Lehmer/factoradic decode). Both support an optional
//! Gray interpretation of the sampled bits and an exact inverse used for warm
//! starts.

use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsp::Cycle;

/// Largest location count supported by the factorial decoder (`34! < 2^128`).
pub const FACTORIAL_DECODE_LIMIT: usize = 34;

/// A fixed-length binary word, most significant bit first.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    /// Wrap a bit slice; entries must be 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Domain("bit string entries must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    /// Parse an ASCII string of '0'/'1' characters.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Domain(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { bits })
    }

    /// The low `len` bits of `value`, most significant first.
    pub fn from_value(value: u128, len: usize) -> Self {
        let bits = (0..len)
            .map(|i| ((value >> (len - 1 - i)) & 1) as u8)
            .collect();
        Self { bits }
    }

    /// Uniformly random word of the given length.
    pub fn random(len: usize, rng: &mut impl rand::Rng) -> Self {
        Self {
            bits: (0..len).map(|_| rng.random_range(0..=1u8)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Plain binary value; the word must fit in 128 bits.
    pub fn value(&self) -> Result<u128> {
        if self.len() > 128 {
            return Err(Error::Domain(format!(
                "bit string of length {} exceeds 128-bit integer range",
                self.len()
            )));
        }
        Ok(self
            .bits
            .iter()
            .fold(0u128, |acc, &b| (acc << 1) | u128::from(b)))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl TryFrom<String> for BitString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        BitString::parse(&s)
    }
}

impl From<BitString> for String {
    fn from(b: BitString) -> String {
        b.to_string()
    }
}

/// Which penalty-free formulation maps bits to cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    NonFactorial,
    Factorial,
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecKind::NonFactorial => write!(f, "non_factorial"),
            CodecKind::Factorial => write!(f, "factorial"),
        }
    }
}

/// Granularity of the Gray interpretation for the non-factorial codec.
/// The factorial codec always treats the whole word as one Gray value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrayScope {
    #[default]
    PerChunk,
    WholeWord,
}

/// Full description of a bit-string-to-cycle mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecSpec {
    pub kind: CodecKind,
    pub gray: bool,
    #[serde(default)]
    pub gray_scope: GrayScope,
    pub n: usize,
}

impl CodecSpec {
    pub fn new(kind: CodecKind, gray: bool, n: usize) -> Self {
        Self {
            kind,
            gray,
            gray_scope: GrayScope::default(),
            n,
        }
    }

    /// Required word length for this codec and location count.
    pub fn bit_length(&self) -> Result<usize> {
        bit_length(self.kind, self.n)
    }

    pub fn decode(&self, b: &BitString) -> Result<Cycle> {
        match self.kind {
            CodecKind::NonFactorial => decode_non_factorial(b, self.n, self.gray, self.gray_scope),
            CodecKind::Factorial => decode_factorial(b, self.n, self.gray),
        }
    }

    pub fn encode(&self, c: &Cycle) -> Result<BitString> {
        match self.kind {
            CodecKind::NonFactorial => encode_non_factorial(c, self.n, self.gray, self.gray_scope),
            CodecKind::Factorial => encode_factorial(c, self.n, self.gray),
        }
    }

    /// Short digest used in result tables.
    pub fn digest(&self) -> String {
        format!(
            "{}{}",
            self.kind,
            if self.gray { "+gray" } else { "" }
        )
    }
}

/// Bits needed so that `2^k >= i`.
pub fn ceil_log2(i: usize) -> usize {
    if i <= 1 {
        0
    } else {
        (usize::BITS - (i - 1).leading_zeros()) as usize
    }
}

/// Exact word length for a codec: `sum_{i=1}^{n-1} ceil(log2 i)` for the
/// non-factorial formulation, `ceil(log2 n!)` for the factorial one.
pub fn bit_length(kind: CodecKind, n: usize) -> Result<usize> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "codecs are defined for n >= 3 locations, got {n}"
        )));
    }
    Ok(match kind {
        CodecKind::NonFactorial => (1..n).map(ceil_log2).sum(),
        CodecKind::Factorial => {
            // ceil(log2 n!) == bit count of n! - 1 (n! is never a power of
            // two for n >= 3).
            let f: BigUint = factorial_big(n) - BigUint::one();
            f.bits() as usize
        }
    })
}

fn factorial_big(n: usize) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// `n!` in native width; available for `n <= 34`.
pub fn factorial_u128(n: usize) -> Result<u128> {
    if n > FACTORIAL_DECODE_LIMIT {
        return Err(Error::Domain(format!(
            "factorial arithmetic overflows 128 bits for n={n} (limit {FACTORIAL_DECODE_LIMIT})"
        )));
    }
    Ok((2..=n as u128).product())
}

// Gray transforms on MSB-first bit slices: encoding XORs each bit with the
// previous plain bit, decoding is the running prefix XOR.

fn gray_decode_bits(bits: &mut [u8]) {
    let mut prev = 0u8;
    for b in bits.iter_mut() {
        prev ^= *b;
        *b = prev;
    }
}

fn gray_encode_bits(bits: &mut [u8]) {
    let mut prev = 0u8;
    for b in bits.iter_mut() {
        let plain = *b;
        *b = plain ^ prev;
        prev = plain;
    }
}

/// Value of a word under the inverse reflected-Gray map.
pub fn gray_to_index(b: &BitString) -> Result<u128> {
    if b.is_empty() {
        return Err(Error::Domain("empty bit string".into()));
    }
    let mut bits = b.bits().to_vec();
    gray_decode_bits(&mut bits);
    BitString::new(bits)?.value()
}

/// Gray word whose [`gray_to_index`] is `k`.
pub fn index_to_gray(k: u128, len: usize) -> BitString {
    let mut bits = BitString::from_value(k, len).bits.clone();
    gray_encode_bits(&mut bits);
    BitString { bits }
}

/// Interpret a word as an integer, either plain binary or Gray.
pub fn interpret(b: &BitString, gray: bool) -> Result<u128> {
    if gray {
        gray_to_index(b)
    } else {
        b.value()
    }
}

/// Count of differing positions between equal-length words.
pub fn hamming(a: &BitString, b: &BitString) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x != y)
        .count())
}

fn check_length(b: &BitString, kind: CodecKind, n: usize) -> Result<usize> {
    let expected = bit_length(kind, n)?;
    if b.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: b.len(),
        });
    }
    Ok(expected)
}

/// Non-factorial decode: consume `ceil(log2 i)` bits per step for
/// `i = n-1 .. 2`, pick index `j mod i` from the remaining-locations list,
/// append the final leftover last. Zero-based throughout.
pub fn decode_non_factorial(
    b: &BitString,
    n: usize,
    gray: bool,
    scope: GrayScope,
) -> Result<Cycle> {
    check_length(b, CodecKind::NonFactorial, n)?;
    let mut bits = b.bits().to_vec();
    if gray && scope == GrayScope::WholeWord {
        gray_decode_bits(&mut bits);
    }

    let mut remaining: Vec<usize> = (1..n).collect();
    let mut order = Vec::with_capacity(n);
    order.push(0);
    let mut cursor = 0;
    for i in (2..n).rev() {
        let width = ceil_log2(i);
        let chunk = &mut bits[cursor..cursor + width];
        if gray && scope == GrayScope::PerChunk {
            gray_decode_bits(chunk);
        }
        let j = chunk.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize);
        cursor += width;
        let k = j % i;
        order.push(remaining.remove(k));
    }
    order.push(remaining[0]);
    Ok(Cycle::from_order_unchecked(order))
}

/// Factorial decode: the word is an integer `x`; `y = x mod n!` indexes a
/// permutation positionally (factoradic digits). The raw permutation of
/// `{1, .., n}` is shifted down and rotated to the fixed-start convention.
pub fn decode_factorial(b: &BitString, n: usize, gray: bool) -> Result<Cycle> {
    check_length(b, CodecKind::Factorial, n)?;
    let x = if gray { gray_to_index(b)? } else { b.value()? };
    let mut f = factorial_u128(n)?;
    let mut y = x % f;
    let mut remaining: Vec<usize> = (1..=n).collect();
    let mut perm = Vec::with_capacity(n);
    for i in 0..n {
        f /= (n - i) as u128;
        let k = (y / f) as usize;
        perm.push(remaining.remove(k));
        y -= k as u128 * f;
    }
    // Shift {1,..,n} -> {0,..,n-1} and rotate the start to location 0; cycle
    // cost is rotation-invariant so this canonical form is free.
    let mut order: Vec<usize> = perm.into_iter().map(|v| v - 1).collect();
    let zero_at = order.iter().position(|&v| v == 0).unwrap();
    order.rotate_left(zero_at);
    Ok(Cycle::from_order_unchecked(order))
}

fn encode_non_factorial(c: &Cycle, n: usize, gray: bool, scope: GrayScope) -> Result<BitString> {
    if c.len() != n {
        return Err(Error::InvalidCycle(format!(
            "cycle has {} locations, codec expects {n}",
            c.len()
        )));
    }
    let mut remaining: Vec<usize> = (1..n).collect();
    let mut bits = Vec::with_capacity(bit_length(CodecKind::NonFactorial, n)?);
    for (step, &loc) in c.order()[1..n - 1].iter().enumerate() {
        let i = n - 1 - step;
        let width = ceil_log2(i);
        let k = remaining
            .iter()
            .position(|&r| r == loc)
            .ok_or_else(|| Error::InvalidCycle(format!("location {loc} repeated or missing")))?;
        remaining.remove(k);
        // Minimal preimage: emit j = k directly.
        let start = bits.len();
        bits.extend((0..width).map(|b| ((k >> (width - 1 - b)) & 1) as u8));
        if gray && scope == GrayScope::PerChunk {
            gray_encode_bits(&mut bits[start..]);
        }
    }
    if gray && scope == GrayScope::WholeWord {
        gray_encode_bits(&mut bits);
    }
    BitString::new(bits)
}

fn encode_factorial(c: &Cycle, n: usize, gray: bool) -> Result<BitString> {
    if c.len() != n {
        return Err(Error::InvalidCycle(format!(
            "cycle has {} locations, codec expects {n}",
            c.len()
        )));
    }
    // Lehmer rank of the {1,..,n} permutation that already starts at 1, so
    // the decode rotation is the identity.
    let mut remaining: Vec<usize> = (1..=n).collect();
    let mut f = factorial_u128(n)?;
    let mut y = 0u128;
    for (i, &loc) in c.order().iter().enumerate() {
        let target = loc + 1;
        f /= (n - i) as u128;
        let k = remaining
            .iter()
            .position(|&r| r == target)
            .ok_or_else(|| Error::InvalidCycle(format!("location {loc} repeated or missing")))?;
        remaining.remove(k);
        y += k as u128 * f;
    }
    let len = bit_length(CodecKind::Factorial, n)?;
    Ok(if gray {
        index_to_gray(y, len)
    } else {
        BitString::from_value(y, len)
    })
}

/// Inverse map used for warm starts: a word that decodes back to `c`.
pub fn encode_cycle(c: &Cycle, spec: &CodecSpec) -> Result<BitString> {
    spec.encode(c)
}
