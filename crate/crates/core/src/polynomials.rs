//! Polynomials with exact rational or refinable real coefficients, and
//! provably correct `floor(p(n))`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::digits::{expand, read_text, value_of, Alphabet, Digit, Natural};
use crate::error::{Error, Result};
use crate::sequences::{
    concat_values, CopelandErdos, FixedDigits, NaturalIter, SequenceSource, SetStream, SharedSet, SharedSource,
};

pub type Rational = BigRational;

pub const DEFAULT_MAX_PRECISION: u32 = 4096;
const START_PRECISION: u32 = 32;

/// A real number known through digits in some base: `0.d1 d2 d3 ... * b^int_digits`,
/// optionally negated.
#[derive(Clone)]
pub struct DigitCoefficient {
    source: SharedSource,
    int_digits: u64,
    negative: bool,
    terminating: bool,
}

impl DigitCoefficient {
    /// `int_digits` leading digits form the integer part. A finite source is
    /// treated as an approximation unless `terminating` is set.
    pub fn new(source: SharedSource, int_digits: u64, negative: bool, terminating: bool) -> Self {
        DigitCoefficient {
            source,
            int_digits,
            negative,
            terminating,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    /// Reads a digit file. Header lines: `#base=<b>`, `#point=<k>` (integer
    /// digits, default 1), `#exact` (the expansion terminates).
    pub fn from_file(path: &Path, negative: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut base_line = None;
        let mut point = 1u64;
        let mut exact = false;
        let mut body = String::new();
        for line in text.lines() {
            if let Some(h) = line.strip_prefix('#') {
                let h = h.trim();
                if h.starts_with("base=") {
                    base_line = Some(format!("#{h}\n"));
                } else if let Some(p) = h.strip_prefix("point=") {
                    point = p
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad #point header in {}", path.display())))?;
                } else if h == "exact" {
                    exact = true;
                } else {
                    return Err(Error::Parse(format!("unknown header #{h} in {}", path.display())));
                }
            } else {
                body.push_str(line.trim());
            }
        }
        let digits = read_text(&format!("{}{}", base_line.unwrap_or_default(), body), None)?;
        if digits.is_empty() {
            return Err(Error::EmptyDigits);
        }
        Ok(DigitCoefficient::new(
            Arc::new(FixedDigits(digits)),
            point,
            negative,
            exact,
        ))
    }

    /// `[lo, hi]` from the first `int_digits + t` digits.
    fn interval(&self, t: u32) -> Result<(Rational, Rational)> {
        let want = self.int_digits as usize + t as usize;
        let digits: Vec<Digit> = self.source.digits().take(want).collect::<Result<_>>()?;
        let b = self.alphabet();
        let got_frac = digits.len().saturating_sub(self.int_digits as usize);
        let mut v = if digits.is_empty() {
            BigUint::zero()
        } else {
            value_of(b, &digits)?
        };
        // fewer digits than int_digits: scale up to the integer part
        if digits.len() < self.int_digits as usize {
            v *= b.pow(self.int_digits - digits.len() as u64);
        }
        let scale = BigInt::from(b.pow(got_frac as u64));
        let lo = Rational::new(BigInt::from(v), scale.clone());
        let exhausted = digits.len() < want;
        let hi = if exhausted && self.terminating {
            lo.clone()
        } else {
            &lo + Rational::new(BigInt::one(), scale)
        };
        Ok(if self.negative { (-hi, -lo) } else { (lo, hi) })
    }
}

impl fmt::Debug for DigitCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DigitCoefficient")
            .field("base", &self.alphabet().base())
            .field("int_digits", &self.int_digits)
            .field("negative", &self.negative)
            .field("terminating", &self.terminating)
            .finish()
    }
}

/// A coefficient: exact, or a real refined on demand.
#[derive(Debug, Clone)]
pub enum RealCoefficient {
    Exact(Rational),
    Digits(DigitCoefficient),
}

impl RealCoefficient {
    pub fn integer(v: i64) -> Self {
        RealCoefficient::Exact(Rational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        RealCoefficient::Exact(Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// An interval containing the value, of width at most `base^{-t}` in the
    /// coefficient's own base (exact coefficients have width 0). A finite,
    /// non-terminating digit source cannot refine past its length.
    pub fn interval(&self, t: u32) -> Result<(Rational, Rational)> {
        match self {
            RealCoefficient::Exact(q) => Ok((q.clone(), q.clone())),
            RealCoefficient::Digits(d) => d.interval(t),
        }
    }

    /// An interval of width at most `b^{-digits}` for base `b`.
    pub fn interval_in_base(&self, b: Alphabet, digits: u32) -> Result<(Rational, Rational)> {
        match self {
            RealCoefficient::Exact(_) => self.interval(0),
            RealCoefficient::Digits(d) => {
                let own = f64::from(d.alphabet().base()).ln();
                let t = (f64::from(digits) * f64::from(b.base()).ln() / own).ceil() as u32 + 1;
                d.interval(t)
            }
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            RealCoefficient::Exact(q) => Some(q),
            RealCoefficient::Digits(_) => None,
        }
    }
}

/// `sum_i coeffs[i] x^i`.
#[derive(Debug, Clone)]
pub struct Poly {
    coeffs: Vec<RealCoefficient>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Maximum refinement precision, in digits of each coefficient's base.
    pub max_precision: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_precision: DEFAULT_MAX_PRECISION,
        }
    }
}

impl Poly {
    /// Trailing exact zeros are dropped; the zero polynomial is rejected.
    pub fn new(mut coeffs: Vec<RealCoefficient>) -> Result<Self> {
        while matches!(coeffs.last(), Some(RealCoefficient::Exact(q)) if q.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("zero polynomial".into()));
        }
        Ok(Poly { coeffs })
    }

    pub fn rational(coeffs: Vec<Rational>) -> Result<Self> {
        Self::new(coeffs.into_iter().map(RealCoefficient::Exact).collect())
    }

    /// Integer coefficients, constant term first.
    pub fn integer(coeffs: &[i64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| RealCoefficient::integer(c)).collect())
    }

    /// `x^d`.
    pub fn monomial(d: usize) -> Self {
        let mut coeffs = vec![RealCoefficient::integer(0); d];
        coeffs.push(RealCoefficient::integer(1));
        Poly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[RealCoefficient] {
        &self.coeffs
    }

    pub fn is_exact(&self) -> bool {
        self.coeffs.iter().all(|c| c.as_exact().is_some())
    }

    /// Exact value for rational coefficients.
    pub fn eval_exact(&self, n: &Natural) -> Option<Rational> {
        let x = Rational::from_integer(BigInt::from(n.clone()));
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * &x + c.as_exact()?;
        }
        Some(acc)
    }

    pub fn eval_floor(&self, n: &Natural) -> Result<Natural> {
        eval_floor_with(self, n, EvalOptions::default())
    }

    /// Parses `q0 + q1*x + q2*x^2 + ...`; see [`parse_poly`].
    pub fn parse(s: &str) -> Result<Self> {
        parse_poly(s)
    }
}

pub fn eval_floor(p: &Poly, n: &Natural) -> Result<Natural> {
    eval_floor_with(p, n, EvalOptions::default())
}

/// `floor(p(n))`, exact. Real coefficients are refined by precision doubling
/// until the enclosing interval has a single floor.
pub fn eval_floor_with(p: &Poly, n: &Natural, opts: EvalOptions) -> Result<Natural> {
    if let Some(v) = p.eval_exact(n) {
        if v.is_negative() {
            return Err(Error::NegativeValue { n: n.clone() });
        }
        return Ok(rational_floor(&v));
    }
    let x = BigInt::from(n.clone());
    let powers: Vec<BigInt> = std::iter::successors(Some(BigInt::one()), |pw| Some(pw * &x))
        .take(p.coeffs.len())
        .collect();
    let mut t = START_PRECISION.min(opts.max_precision);
    loop {
        let mut lo = Rational::zero();
        let mut hi = Rational::zero();
        for (c, pw) in p.coeffs.iter().zip(&powers) {
            let (cl, ch) = c.interval(t)?;
            let w = Rational::from_integer(pw.clone());
            lo += cl * &w;
            hi += ch * &w;
        }
        if hi.is_negative() {
            return Err(Error::NegativeValue { n: n.clone() });
        }
        if !lo.is_negative() {
            let f_lo = lo.floor();
            if f_lo == hi.floor() {
                return Ok(rational_floor(&f_lo));
            }
        }
        if t >= opts.max_precision {
            return Err(Error::AmbiguousFloor {
                lo: Box::new(lo),
                hi: Box::new(hi),
            });
        }
        t = (t * 2).min(opts.max_precision);
    }
}

fn rational_floor(v: &Rational) -> Natural {
    let f = v.floor().to_integer();
    debug_assert!(f.sign() != Sign::Minus);
    f.to_biguint().expect("non-negative")
}

// ---------------------------------------------------------------------------
// Images

/// `floor(p(n_1)), floor(p(n_2)), ...` in the order of A.
pub struct ImageStream {
    poly: Arc<Poly>,
    set: SharedSet,
    opts: EvalOptions,
}

pub fn image_stream(p: Arc<Poly>, a: SharedSet) -> ImageStream {
    ImageStream {
        poly: p,
        set: a,
        opts: EvalOptions::default(),
    }
}

impl ImageStream {
    pub fn with_options(mut self, opts: EvalOptions) -> Self {
        self.opts = opts;
        self
    }
}

impl SetStream for ImageStream {
    fn values(&self) -> NaturalIter<'_> {
        let p = self.poly.clone();
        let opts = self.opts;
        Box::new(
            self.set
                .values()
                .map(move |v| v.and_then(|n| eval_floor_with(&p, &n, opts))),
        )
    }
}

/// CE_b of the image, concatenated in A's order.
pub fn ce_poly_sequence(p: Arc<Poly>, a: SharedSet, b: Alphabet) -> CopelandErdos {
    concat_values(Arc::new(image_stream(p, a)), b)
}

/// Positions `i` where `floor(p(n_i)) <= floor(p(n_{i-1}))` among the first
/// `limit` elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityReport {
    pub checked: usize,
    pub inversions: Vec<usize>,
}

pub fn check_monotone(p: &Arc<Poly>, a: SharedSet, limit: usize) -> Result<MonotonicityReport> {
    let img = image_stream(p.clone(), a);
    let mut prev: Option<Natural> = None;
    let mut inversions = Vec::new();
    let mut checked = 0;
    for (i, v) in img.values().take(limit).enumerate() {
        let v = v?;
        if prev.as_ref().is_some_and(|p| &v <= p) {
            inversions.push(i);
        }
        prev = Some(v);
        checked += 1;
    }
    Ok(MonotonicityReport { checked, inversions })
}

// ---------------------------------------------------------------------------
// Products of a coefficient and a digit stream

/// Leading significant digits of `c * alpha`. The radix point of `alpha`
/// does not affect them, so it is not an argument.
///
/// The result is the common prefix of the expansions of both ends of an
/// enclosing interval, so every returned digit is correct. Requires `c > 0`.
pub fn scaled_expansion(
    c: &RealCoefficient,
    alpha: &dyn SequenceSource,
    count: usize,
    opts: EvalOptions,
) -> Result<Vec<Digit>> {
    let b = alpha.alphabet();
    let mut guard = 16usize;
    loop {
        let n = count + guard;
        let digits: Vec<Digit> = alpha.digits().take(n).collect::<Result<_>>()?;
        if digits.is_empty() {
            return Err(Error::EmptyDigits);
        }
        let a_n = BigInt::from(value_of(b, &digits)?);
        let finite = digits.len() < n;
        let (c_lo, c_hi) = c.interval_in_base(b, n as u32)?;
        if !c_lo.is_positive() {
            return Err(Error::InvalidParameter("scaled expansion needs c > 0".into()));
        }
        let a_hi = if finite { a_n.clone() } else { &a_n + 1 };
        let y_lo = (c_lo * Rational::from_integer(a_n)).floor().to_integer();
        let y_hi = (c_hi * Rational::from_integer(a_hi)).floor().to_integer();
        let lo_digits = expand(&y_lo.to_biguint().expect("positive"), b);
        let hi_digits = expand(&y_hi.to_biguint().expect("positive"), b);
        let common = if lo_digits.len() == hi_digits.len() {
            lo_digits.iter().zip(&hi_digits).take_while(|(x, y)| x == y).count()
        } else {
            0
        };
        if common >= count {
            return Ok(lo_digits[..count].to_vec());
        }
        if guard >= opts.max_precision as usize || (finite && guard > 16) {
            let scale = Rational::from_integer(BigInt::from(b.pow(n as u64)));
            return Err(Error::AmbiguousFloor {
                lo: Box::new(Rational::from_integer(y_lo) / &scale),
                hi: Box::new(Rational::from_integer(y_hi) / scale),
            });
        }
        guard *= 2;
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Grammar (whitespace is ignored between tokens):
///
/// ```text
/// poly   := ['-'] term (('+' | '-') term)*
/// term   := coeff ['*' mono] | mono
/// mono   := 'x' ['^' digits]
/// coeff  := digits ['/' digits] | 'real:' path
/// ```
///
/// `real:<path>` names a digit file (see [`DigitCoefficient::from_file`]);
/// the path runs to the next whitespace or `*`. Repeated exponents add up.
pub fn parse_poly(s: &str) -> Result<Poly> {
    let mut p = Parser {
        s: s.as_bytes(),
        pos: 0,
        src: s,
    };
    let mut terms: Vec<(bool, RealCoefficient, usize)> = Vec::new();
    p.ws();
    let mut negative = p.eat(b'-');
    loop {
        p.ws();
        let (coeff, exp) = p.term()?;
        terms.push((negative, coeff, exp));
        p.ws();
        if p.eat(b'+') {
            negative = false;
        } else if p.eat(b'-') {
            negative = true;
        } else if p.pos == p.s.len() {
            break;
        } else {
            return Err(p.error("expected '+', '-' or end of input"));
        }
    }
    let degree = terms.iter().map(|t| t.2).max().unwrap_or(0);
    let mut exact: Vec<Rational> = vec![Rational::zero(); degree + 1];
    let mut real: Vec<Option<RealCoefficient>> = vec![None; degree + 1];
    for (neg, c, e) in terms {
        match c {
            RealCoefficient::Exact(q) => {
                if neg {
                    exact[e] -= q
                } else {
                    exact[e] += q
                }
            }
            RealCoefficient::Digits(mut d) => {
                if real[e].is_some() {
                    return Err(Error::Parse(format!("two real coefficients for x^{e}")));
                }
                d.negative ^= neg;
                real[e] = Some(RealCoefficient::Digits(d));
            }
        }
    }
    let mut coeffs = Vec::with_capacity(degree + 1);
    for (e, (q, r)) in exact.into_iter().zip(real).enumerate() {
        match r {
            None => coeffs.push(RealCoefficient::Exact(q)),
            Some(r) if q.is_zero() => coeffs.push(r),
            Some(_) => {
                return Err(Error::Parse(format!(
                    "x^{e} mixes a real coefficient with a rational one"
                )))
            }
        }
    }
    Poly::new(coeffs)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at column {} in {:?}", self.pos + 1, self.src))
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Result<BigInt> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected digits"));
        }
        Ok(self.src[start..self.pos].parse().expect("ascii digits"))
    }

    fn mono(&mut self) -> Result<usize> {
        if !self.eat(b'x') {
            return Err(self.error("expected 'x'"));
        }
        self.ws();
        if self.eat(b'^') {
            self.ws();
            let e = self.digits()?;
            return e.to_usize().ok_or_else(|| self.error("exponent too large"));
        }
        Ok(1)
    }

    fn term(&mut self) -> Result<(RealCoefficient, usize)> {
        if self.s.get(self.pos) == Some(&b'x') {
            return Ok((RealCoefficient::integer(1), self.mono()?));
        }
        let coeff = if self.src[self.pos..].starts_with("real:") {
            self.pos += 5;
            let start = self.pos;
            while self.pos < self.s.len() && !self.s[self.pos].is_ascii_whitespace() && self.s[self.pos] != b'*' {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected a path after real:"));
            }
            let path = &self.src[start..self.pos];
            RealCoefficient::Digits(DigitCoefficient::from_file(Path::new(path), false)?)
        } else {
            let num = self.digits()?;
            self.ws();
            if self.eat(b'/') {
                self.ws();
                let den = self.digits()?;
                if den.is_zero() {
                    return Err(self.error("zero denominator"));
                }
                RealCoefficient::Exact(Rational::new(num, den))
            } else {
                RealCoefficient::Exact(Rational::from_integer(num))
            }
        };
        self.ws();
        if self.eat(b'*') {
            self.ws();
            return Ok((coeff, self.mono()?));
        }
        Ok((coeff, 0))
    }
}
