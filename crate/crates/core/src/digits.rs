//! Arbitrary-precision naturals and their base-b digit expansions.
//!
//! Digits are stored as values (`u32`), most significant first. Text
//! rendering uses `0-9A-Z` and is therefore limited to bases up to 36;
//! the binary format has no such ceiling.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Digit = u32;

/// Arbitrary-precision natural number.
pub type Natural = BigUint;

pub const BINARY_MAGIC: &[u8; 4] = b"FSD1";
const TEXT_DIGITS: &[u8; 36] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";

/// The alphabet {0, ..., b-1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Alphabet(u32);

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet(2);
    pub const DECIMAL: Alphabet = Alphabet(10);

    pub fn new(base: u32) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidBase(base));
        }
        Ok(Alphabet(base))
    }

    #[inline]
    pub fn base(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn contains(self, d: Digit) -> bool {
        d < self.0
    }

    pub fn check(self, d: Digit) -> Result<Digit> {
        if self.contains(d) {
            Ok(d)
        } else {
            Err(Error::InvalidDigit { digit: d, base: self.0 })
        }
    }

    pub fn base_big(self) -> BigUint {
        BigUint::from(self.0)
    }

    /// `b^e` as a natural.
    pub fn pow(self, e: u64) -> Natural {
        num_traits::pow(self.base_big(), e as usize)
    }
}

impl TryFrom<u32> for Alphabet {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for u32 {
    fn from(a: Alphabet) -> u32 {
        a.0
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite string over an alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigitString {
    alphabet: Alphabet,
    digits: Vec<Digit>,
}

impl DigitString {
    pub fn new(alphabet: Alphabet, digits: Vec<Digit>) -> Result<Self> {
        for &d in &digits {
            alphabet.check(d)?;
        }
        Ok(DigitString { alphabet, digits })
    }

    /// Parses `0-9A-Z` characters (case-insensitive).
    pub fn parse(alphabet: Alphabet, text: &str) -> Result<Self> {
        let digits = text
            .chars()
            .map(|c| {
                let d = c
                    .to_digit(36)
                    .ok_or_else(|| Error::Parse(format!("invalid digit character {c:?}")))?;
                alphabet.check(d)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DigitString { alphabet, digits })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn digits(&self) -> &[Digit] {
        &self.digits
    }

    pub fn into_digits(self) -> Vec<Digit> {
        self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn to_text(&self) -> Result<String> {
        render_text(self.alphabet, &self.digits)
    }
}

impl fmt::Display for DigitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_text() {
            Ok(s) => f.write_str(&s),
            Err(_) => write!(f, "{:?}", self.digits),
        }
    }
}

/// Digits of `n` in base `b`, most significant first; `sigma_b(0) = [0]`.
pub fn sigma_b(n: &Natural, b: Alphabet) -> DigitString {
    DigitString {
        alphabet: b,
        digits: expand(n, b),
    }
}

/// Same as [`sigma_b`] but returns the bare digit vector.
pub fn expand(n: &Natural, b: Alphabet) -> Vec<Digit> {
    if n.is_zero() {
        return vec![0];
    }
    let base = b.base();
    if base <= 256 {
        return n.to_radix_be(base).into_iter().map(Digit::from).collect();
    }
    let mut out = Vec::new();
    let mut rest = n.clone();
    let big_base = b.base_big();
    while !rest.is_zero() {
        let (q, r) = rest.div_rem(&big_base);
        out.push(r.to_u32().expect("remainder below base"));
        rest = q;
    }
    out.reverse();
    out
}

/// Value of a digit string. Leading zeros are ignored.
pub fn from_digits(d: &DigitString) -> Result<Natural> {
    value_of(d.alphabet, &d.digits)
}

/// Value of raw digits in base `b`.
pub fn value_of(b: Alphabet, digits: &[Digit]) -> Result<Natural> {
    if digits.is_empty() {
        return Err(Error::EmptyDigits);
    }
    for &d in digits {
        b.check(d)?;
    }
    let base = b.base();
    if base <= 256 {
        let bytes: Vec<u8> = digits.iter().map(|&d| d as u8).collect();
        return Ok(BigUint::from_radix_be(&bytes, base).expect("digits validated"));
    }
    let mut n = BigUint::zero();
    for &d in digits {
        n *= base;
        n += d;
    }
    Ok(n)
}

/// `|sigma_b(n)|` without expanding the digits.
pub fn digit_length(n: &Natural, b: Alphabet) -> u64 {
    if n.is_zero() {
        return 1;
    }
    let base = b.base();
    let bits = n.bits();
    if base.is_power_of_two() {
        let k = u64::from(base.trailing_zeros());
        return bits.div_ceil(k);
    }
    // floor(log_b n) lies in [(bits-1)/log2(b), bits/log2(b)); start low and correct.
    let log2b = f64::from(base).log2();
    let mut e = (((bits - 1) as f64) / log2b).floor().max(1.0) as u64 - 1;
    let mut p = b.pow(e);
    while &p > n {
        e -= 1;
        p /= base;
    }
    loop {
        let next = &p * base;
        if &next > n {
            break;
        }
        p = next;
        e += 1;
    }
    e + 1
}

pub fn render_text(alphabet: Alphabet, digits: &[Digit]) -> Result<String> {
    if alphabet.base() > 36 {
        return Err(Error::BaseTooLargeForText(alphabet.base()));
    }
    Ok(digits.iter().map(|&d| TEXT_DIGITS[d as usize] as char).collect())
}

/// Writes the text digit format: `#base=<b>` header line, then the body.
pub fn write_text<W: Write>(mut w: W, s: &DigitString) -> Result<()> {
    let body = s.to_text()?;
    writeln!(w, "#base={}", s.alphabet.base())?;
    w.write_all(body.as_bytes())?;
    Ok(())
}

/// Reads the text digit format. Without a header, `default_base` applies
/// (10 when `None`). A trailing newline is tolerated.
pub fn read_text(text: &str, default_base: Option<u32>) -> Result<DigitString> {
    let (header, body) = match text.strip_prefix('#') {
        Some(rest) => {
            let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
            (Some(line.trim()), body)
        }
        None => (None, text),
    };
    let base = match header {
        Some(h) => h
            .strip_prefix("base=")
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::Parse(format!("bad header line #{h}")))?,
        None => default_base.unwrap_or(10),
    };
    let alphabet = Alphabet::new(base)?;
    let body = body.trim_end_matches(['\n', '\r']);
    DigitString::parse(alphabet, body)
}

/// Writes the binary digit format. Bases up to 256 store one byte per
/// digit; larger bases store a u64 digit count followed by u32 digits.
pub fn write_binary<W: Write>(mut w: W, s: &DigitString) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&s.alphabet.base().to_le_bytes())?;
    if s.alphabet.base() <= 256 {
        let bytes: Vec<u8> = s.digits.iter().map(|&d| d as u8).collect();
        w.write_all(&bytes)?;
    } else {
        w.write_all(&(s.digits.len() as u64).to_le_bytes())?;
        for &d in &s.digits {
            w.write_all(&d.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<DigitString> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    if &head[..4] != BINARY_MAGIC {
        return Err(Error::Parse("missing FSD1 magic".into()));
    }
    let alphabet = Alphabet::new(u32::from_le_bytes(head[4..8].try_into().unwrap()))?;
    let digits = if alphabet.base() <= 256 {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        bytes.into_iter().map(Digit::from).collect()
    } else {
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut raw = vec![0u8; len * 4];
        r.read_exact(&mut raw)?;
        raw.chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    DigitString::new(alphabet, digits)
}

/// Reads a digit file in either format, detected by the binary magic.
pub fn read_digit_file(path: &Path) -> Result<DigitString> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(&bytes[..])
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Parse(format!("{} is not a text digit file", path.display())))?;
        read_text(&text, None)
    }
}

/// Writes binary when the path ends in `.fsd` or the base exceeds 36,
/// text otherwise.
pub fn write_digit_file(path: &Path, s: &DigitString) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let binary = path.extension().is_some_and(|e| e == "fsd") || s.alphabet.base() > 36;
    if binary {
        write_binary(file, s)
    } else {
        write_text(file, s)
    }
}
