//! Lazy digit sequences: Copeland-Erdős concatenations and the sequence
//! transforms (sparse insertion/deletion, zero dilution, prefix
//! concatenation, alignment padding).
//!
//! Every source is restartable: [`SequenceSource::digits`] returns a fresh
//! iterator, and two traversals yield identical digits.

use std::collections::VecDeque;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::digits::{digit_length, expand, Alphabet, Digit, DigitString, Natural};
use crate::entropy::BlockCensus;
use crate::error::{Error, Result};

pub type DigitIter<'a> = Box<dyn Iterator<Item = Result<Digit>> + Send + 'a>;
pub type NaturalIter<'a> = Box<dyn Iterator<Item = Result<Natural>> + Send + 'a>;
/// Digits paired with a flag marking inserted (padding) material.
pub type TaggedIter<'a> = Box<dyn Iterator<Item = Result<(Digit, bool)>> + Send + 'a>;

pub type SharedSource = Arc<dyn SequenceSource>;
pub type SharedSet = Arc<dyn SetStream>;
pub type SharedIndices = Arc<dyn IndexSet>;

/// A restartable producer of digits over a fixed alphabet.
pub trait SequenceSource: Send + Sync {
    fn alphabet(&self) -> Alphabet;

    fn digits(&self) -> DigitIter<'_>;

    fn known_len(&self) -> Option<u64> {
        None
    }

    /// First `n` digits (fewer if the source is finite and shorter).
    fn prefix(&self, n: usize) -> Result<DigitString> {
        let digits = self.digits().take(n).collect::<Result<Vec<_>>>()?;
        DigitString::new(self.alphabet(), digits)
    }
}

/// A restartable stream of naturals. Implementations promise strictly
/// increasing output; consumers that depend on it check it.
pub trait SetStream: Send + Sync {
    fn values(&self) -> NaturalIter<'_>;
}

/// Strictly increasing positions in a sequence.
pub trait IndexSet: Send + Sync {
    fn indices(&self) -> Box<dyn Iterator<Item = u64> + Send + '_>;

    /// Number of members strictly below `n`.
    fn count_below(&self, n: u64) -> u64;
}

// ---------------------------------------------------------------------------
// Set streams

/// The naturals from `start` upwards.
#[derive(Debug, Clone, Copy)]
pub struct Naturals {
    pub start: u64,
}

impl SetStream for Naturals {
    fn values(&self) -> NaturalIter<'_> {
        Box::new((self.start..).map(|n| Ok(BigUint::from(n))))
    }
}

/// A finite, validated, strictly increasing set.
#[derive(Debug, Clone, Default)]
pub struct ExplicitSet {
    values: Vec<Natural>,
}

impl ExplicitSet {
    pub fn new(values: Vec<Natural>) -> Result<Self> {
        check_increasing(&values)?;
        Ok(ExplicitSet { values })
    }

    pub fn from_u64s(values: &[u64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| BigUint::from(v)).collect())
    }

    pub fn as_slice(&self) -> &[Natural] {
        &self.values
    }

    /// Parses the set file format: one decimal integer per line.
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<BigUint>()
                    .map_err(|_| Error::Parse(format!("not a natural: {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.values {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

impl SetStream for ExplicitSet {
    fn values(&self) -> NaturalIter<'_> {
        Box::new(self.values.iter().cloned().map(Ok))
    }
}

fn check_increasing(values: &[Natural]) -> Result<()> {
    for w in values.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::OrderViolation {
                prev: w[0].to_string(),
                next: w[1].to_string(),
            });
        }
    }
    Ok(())
}

/// A set stream backed by a closure; the closure must be deterministic.
pub struct SetFn<F>(pub F);

impl<F> SetStream for SetFn<F>
where
    F: Fn() -> NaturalIter<'static> + Send + Sync,
{
    fn values(&self) -> NaturalIter<'_> {
        (self.0)()
    }
}

/// First `count` elements of another set.
pub struct TakeSet {
    pub inner: SharedSet,
    pub count: usize,
}

impl SetStream for TakeSet {
    fn values(&self) -> NaturalIter<'_> {
        Box::new(self.inner.values().take(self.count))
    }
}

/// Primes in increasing order, optionally only those below `limit`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Primes {
    pub limit: Option<u64>,
}

pub fn primes_stream(limit: Option<u64>) -> Primes {
    Primes { limit }
}

impl Primes {
    pub fn iter_u64(&self) -> PrimeIter {
        PrimeIter::new(self.limit)
    }
}

impl SetStream for Primes {
    fn values(&self) -> NaturalIter<'_> {
        Box::new(self.iter_u64().map(|p| Ok(BigUint::from(p))))
    }
}

const SEGMENT: u64 = 1 << 16;

/// Incremental segmented sieve of Eratosthenes.
pub struct PrimeIter {
    limit: Option<u64>,
    base: Vec<u64>,
    base_bound: u64,
    lo: u64,
    composite: Vec<bool>,
    pos: usize,
}

impl PrimeIter {
    fn new(limit: Option<u64>) -> Self {
        let mut it = PrimeIter {
            limit,
            base: Vec::new(),
            base_bound: 1,
            lo: 0,
            composite: Vec::new(),
            pos: 0,
        };
        it.sieve_segment();
        it
    }

    fn ensure_base(&mut self, bound: u64) {
        if bound <= self.base_bound {
            return;
        }
        let bound = bound.max(self.base_bound * 2).max(64);
        let mut marks = vec![true; bound as usize + 1];
        marks[0] = false;
        marks[1] = false;
        let mut i = 2usize;
        while i * i <= bound as usize {
            if marks[i] {
                let mut j = i * i;
                while j <= bound as usize {
                    marks[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        self.base = (2..=bound).filter(|&p| marks[p as usize]).collect();
        self.base_bound = bound;
    }

    fn sieve_segment(&mut self) {
        let lo = self.lo;
        let hi = lo + SEGMENT;
        self.ensure_base(hi.isqrt() + 1);
        self.composite.clear();
        self.composite.resize(SEGMENT as usize, false);
        for n in lo..lo.max(2).min(hi) {
            self.composite[(n - lo) as usize] = true;
        }
        for &p in &self.base {
            if p * p >= hi {
                break;
            }
            let mut m = (lo.div_ceil(p) * p).max(p * p);
            while m < hi {
                self.composite[(m - lo) as usize] = true;
                m += p;
            }
        }
        self.pos = 0;
    }
}

impl Iterator for PrimeIter {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            while self.pos < self.composite.len() {
                let n = self.lo + self.pos as u64;
                let composite = self.composite[self.pos];
                self.pos += 1;
                if self.limit.is_some_and(|l| n >= l) {
                    return None;
                }
                if !composite {
                    return Some(n);
                }
            }
            self.lo += SEGMENT;
            if self.limit.is_some_and(|l| self.lo >= l) {
                return None;
            }
            self.sieve_segment();
        }
    }
}

/// Each element replaced by its nearest multiple of `b` (ties round up),
/// consecutive duplicates removed.
pub struct NearestMultiple {
    pub inner: SharedSet,
    pub alphabet: Alphabet,
}

pub fn nearest_multiple_stream(a: SharedSet, b: Alphabet) -> NearestMultiple {
    NearestMultiple { inner: a, alphabet: b }
}

pub fn nearest_multiple(n: &Natural, b: Alphabet) -> Natural {
    let base = b.base_big();
    let (q, r) = n.div_rem(&base);
    // r >= b - r  <=>  2r >= b
    if &r * 2u32 >= base {
        (q + 1u32) * base
    } else {
        q * base
    }
}

impl SetStream for NearestMultiple {
    fn values(&self) -> NaturalIter<'_> {
        let b = self.alphabet;
        let mut last: Option<Natural> = None;
        Box::new(self.inner.values().filter_map(move |v| match v {
            Err(e) => Some(Err(e)),
            Ok(n) => {
                let m = nearest_multiple(&n, b);
                if last.as_ref() == Some(&m) {
                    None
                } else {
                    last = Some(m.clone());
                    Some(Ok(m))
                }
            }
        }))
    }
}

// ---------------------------------------------------------------------------
// Basic digit sources

/// A finite literal digit string.
#[derive(Debug, Clone)]
pub struct FixedDigits(pub DigitString);

impl SequenceSource for FixedDigits {
    fn alphabet(&self) -> Alphabet {
        self.0.alphabet()
    }

    fn digits(&self) -> DigitIter<'_> {
        Box::new(self.0.digits().iter().copied().map(Ok))
    }

    fn known_len(&self) -> Option<u64> {
        Some(self.0.len() as u64)
    }
}

/// Endless repetition of a pattern.
#[derive(Debug, Clone)]
pub struct Periodic {
    pub alphabet: Alphabet,
    pub pattern: Vec<Digit>,
}

impl Periodic {
    pub fn new(alphabet: Alphabet, pattern: Vec<Digit>) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::EmptyDigits);
        }
        for &d in &pattern {
            alphabet.check(d)?;
        }
        Ok(Periodic { alphabet, pattern })
    }
}

impl SequenceSource for Periodic {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn digits(&self) -> DigitIter<'_> {
        Box::new(self.pattern.iter().copied().cycle().map(Ok))
    }
}

/// Digits of sqrt(k): the integer part followed by the fractional digits.
#[derive(Debug, Clone)]
pub struct SqrtDigits {
    pub radicand: Natural,
    pub alphabet: Alphabet,
}

impl SqrtDigits {
    pub fn new(radicand: Natural, alphabet: Alphabet) -> Self {
        SqrtDigits { radicand, alphabet }
    }

    /// Number of digits before the radix point.
    pub fn int_digits(&self) -> u64 {
        digit_length(&self.radicand.sqrt(), self.alphabet)
    }

    /// The exact value is rational only for perfect squares.
    pub fn is_exact(&self) -> bool {
        let r = self.radicand.sqrt();
        &r * &r == self.radicand
    }
}

impl SequenceSource for SqrtDigits {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn digits(&self) -> DigitIter<'_> {
        let b = self.alphabet;
        let radicand = self.radicand.clone();
        let mut emitted = 0usize;
        let mut buf: VecDeque<Digit> = VecDeque::new();
        let mut frac = 0u64;
        Box::new(std::iter::from_fn(move || {
            if buf.is_empty() {
                frac = (frac * 2).max(64);
                let scaled = &radicand * b.pow(2 * frac);
                let all = expand(&scaled.sqrt(), b);
                buf.extend(all.into_iter().skip(emitted));
            }
            emitted += 1;
            buf.pop_front().map(Ok)
        }))
    }
}

/// Digits of num/den: the integer part then the (eventually periodic)
/// fractional digits by long division.
#[derive(Debug, Clone)]
pub struct RationalDigits {
    pub num: Natural,
    pub den: Natural,
    pub alphabet: Alphabet,
}

impl RationalDigits {
    pub fn new(num: Natural, den: Natural, alphabet: Alphabet) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidParameter("zero denominator".into()));
        }
        Ok(RationalDigits { num, den, alphabet })
    }

    pub fn int_digits(&self) -> u64 {
        digit_length(&(&self.num / &self.den), self.alphabet)
    }
}

impl SequenceSource for RationalDigits {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn digits(&self) -> DigitIter<'_> {
        let (q, r) = self.num.div_rem(&self.den);
        let int = expand(&q, self.alphabet);
        let den = self.den.clone();
        let base = self.alphabet.base();
        let mut rem = r;
        let frac = std::iter::from_fn(move || {
            rem *= base;
            let (d, r) = rem.div_rem(&den);
            rem = r;
            Some(Ok(d.to_u32().expect("digit below base")))
        });
        Box::new(int.into_iter().map(Ok).chain(frac))
    }
}

// ---------------------------------------------------------------------------
// Copeland-Erdős sequences

/// `sigma_b(a_1) sigma_b(a_2) ...` for a set stream.
pub struct CopelandErdos {
    set: SharedSet,
    alphabet: Alphabet,
    check_order: bool,
}

/// CE_b(A). The stream must be strictly increasing; a violation surfaces
/// as an `OrderViolation` item.
pub fn ce_sequence(a: SharedSet, b: Alphabet) -> CopelandErdos {
    CopelandErdos {
        set: a,
        alphabet: b,
        check_order: true,
    }
}

/// Concatenation in stream order without the ordering check (used for
/// polynomial images, which follow A's order).
pub fn concat_values(values: SharedSet, b: Alphabet) -> CopelandErdos {
    CopelandErdos {
        set: values,
        alphabet: b,
        check_order: false,
    }
}

impl CopelandErdos {
    /// Per-element digit strings, after the ordering check.
    pub fn items(&self) -> impl Iterator<Item = Result<Vec<Digit>>> + Send + '_ {
        let b = self.alphabet;
        let check = self.check_order;
        let mut prev: Option<Natural> = None;
        let mut failed = false;
        self.set.values().map_while(move |v| {
            if failed {
                return None;
            }
            let n = match v {
                Ok(n) => n,
                Err(e) => {
                    failed = true;
                    return Some(Err(e));
                }
            };
            if check {
                if let Some(p) = &prev {
                    if &n <= p {
                        failed = true;
                        return Some(Err(Error::OrderViolation {
                            prev: p.to_string(),
                            next: n.to_string(),
                        }));
                    }
                }
                prev = Some(n.clone());
            }
            Some(Ok(expand(&n, b)))
        })
    }
}

impl SequenceSource for CopelandErdos {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn digits(&self) -> DigitIter<'_> {
        Box::new(
            self.items()
                .flat_map(|item| -> Box<dyn Iterator<Item = Result<Digit>> + Send> {
                    match item {
                        Ok(ds) => Box::new(ds.into_iter().map(Ok)),
                        Err(e) => Box::new(std::iter::once(Err(e))),
                    }
                }),
        )
    }
}

/// Total digit length of the first `k` elements of CE_b(A).
pub fn ce_length(a: &dyn SetStream, b: Alphabet, k: usize) -> Result<u64> {
    a.values().take(k).map(|v| v.map(|n| digit_length(&n, b))).sum()
}

// ---------------------------------------------------------------------------
// Index sets

/// `{k^2 : k >= 1}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Squares;

impl IndexSet for Squares {
    fn indices(&self) -> Box<dyn Iterator<Item = u64> + Send + '_> {
        Box::new((1u64..).map(|k| k * k))
    }

    fn count_below(&self, n: u64) -> u64 {
        if n <= 1 {
            0
        } else {
            (n - 1).isqrt()
        }
    }
}

/// `{start, start + step, start + 2 step, ...}`.
#[derive(Debug, Clone, Copy)]
pub struct Arithmetic {
    pub start: u64,
    pub step: u64,
}

impl IndexSet for Arithmetic {
    fn indices(&self) -> Box<dyn Iterator<Item = u64> + Send + '_> {
        let (start, step) = (self.start, self.step.max(1));
        Box::new((0u64..).map(move |i| start + i * step))
    }

    fn count_below(&self, n: u64) -> u64 {
        if n <= self.start {
            0
        } else {
            (n - self.start).div_ceil(self.step.max(1))
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExplicitIndices(Vec<u64>);

impl ExplicitIndices {
    pub fn new(indices: Vec<u64>) -> Result<Self> {
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::OrderViolation {
                    prev: w[0].to_string(),
                    next: w[1].to_string(),
                });
            }
        }
        Ok(ExplicitIndices(indices))
    }

    pub fn empty() -> Self {
        ExplicitIndices(Vec::new())
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

impl IndexSet for ExplicitIndices {
    fn indices(&self) -> Box<dyn Iterator<Item = u64> + Send + '_> {
        Box::new(self.0.iter().copied())
    }

    fn count_below(&self, n: u64) -> u64 {
        self.0.partition_point(|&i| i < n) as u64
    }
}

// ---------------------------------------------------------------------------
// Insertion and deletion

/// Material placed at inserted positions.
#[derive(Clone)]
pub enum Fill {
    Digit(Digit),
    Stream(SharedSource),
}

/// Output position `i` holds fill material when `i` is in the index set,
/// otherwise the next unconsumed digit of the source.
pub struct InsertAt {
    source: SharedSource,
    indices: SharedIndices,
    fill: Fill,
}

pub fn insert_at(s: SharedSource, indices: SharedIndices, fill: Fill) -> Result<InsertAt> {
    match &fill {
        Fill::Digit(d) => {
            s.alphabet().check(*d)?;
        }
        Fill::Stream(f) => {
            if f.alphabet() != s.alphabet() {
                return Err(Error::InvalidParameter("fill alphabet differs from source".into()));
            }
        }
    }
    Ok(InsertAt {
        source: s,
        indices,
        fill,
    })
}

impl InsertAt {
    pub fn tagged(&self) -> TaggedIter<'_> {
        let mut src = self.source.digits().peekable();
        let mut idx = self.indices.indices().peekable();
        let mut fill: Box<dyn Iterator<Item = Result<Digit>> + Send> = match &self.fill {
            Fill::Digit(d) => {
                let d = *d;
                Box::new(std::iter::repeat(d).map(Ok))
            }
            Fill::Stream(f) => f.digits(),
        };
        let mut pos = 0u64;
        Box::new(std::iter::from_fn(move || {
            src.peek()?;
            while idx.peek().is_some_and(|&i| i < pos) {
                idx.next();
            }
            let here = pos;
            pos += 1;
            if idx.peek() == Some(&here) {
                idx.next();
                Some(fill.next()?.map(|d| (d, true)))
            } else {
                src.next().map(|d| d.map(|d| (d, false)))
            }
        }))
    }
}

impl SequenceSource for InsertAt {
    fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    fn digits(&self) -> DigitIter<'_> {
        Box::new(self.tagged().map(|r| r.map(|(d, _)| d)))
    }
}

/// Skips the source digits at the given positions.
pub struct DeleteAt {
    source: SharedSource,
    indices: SharedIndices,
}

pub fn delete_at(s: SharedSource, indices: SharedIndices) -> DeleteAt {
    DeleteAt { source: s, indices }
}

impl SequenceSource for DeleteAt {
    fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    fn digits(&self) -> DigitIter<'_> {
        let mut idx = self.indices.indices().peekable();
        Box::new(self.source.digits().enumerate().filter_map(move |(i, d)| {
            let i = i as u64;
            while idx.peek().is_some_and(|&j| j < i) {
                idx.next();
            }
            if idx.peek() == Some(&i) {
                idx.next();
                None
            } else {
                Some(d)
            }
        }))
    }
}

// ---------------------------------------------------------------------------
// Dilution

/// Where zero-runs go, in terms of source digits consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DilutionSchedule {
    None,
    /// After every `every` source digits, insert `zeros` zeros.
    Periodic {
        every: u64,
        zeros: u64,
    },
    /// Event j copies `unit * j` source digits and then inserts zeros so the
    /// cumulative zero count tracks `rho / (1 - rho)` times the source
    /// consumed. Insertion events up to position n number O(sqrt n).
    GrowingRuns {
        rho: f64,
        unit: u64,
    },
    /// `(source position, zero count)` pairs, positions non-decreasing.
    Explicit {
        events: Vec<(u64, u64)>,
    },
}

impl DilutionSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            DilutionSchedule::None => Ok(()),
            DilutionSchedule::Periodic { every, .. } if *every == 0 => {
                Err(Error::InvalidParameter("periodic dilution needs every >= 1".into()))
            }
            DilutionSchedule::Periodic { .. } => Ok(()),
            DilutionSchedule::GrowingRuns { rho, unit } => {
                if !(0.0..1.0).contains(rho) || *unit == 0 {
                    Err(Error::InvalidParameter(format!(
                        "growing-runs dilution needs 0 <= rho < 1 and unit >= 1 (rho={rho}, unit={unit})"
                    )))
                } else {
                    Ok(())
                }
            }
            DilutionSchedule::Explicit { events } => {
                if events.windows(2).any(|w| w[1].0 < w[0].0) {
                    Err(Error::OrderViolation {
                        prev: events[0].0.to_string(),
                        next: "earlier position".into(),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    fn events(&self) -> Box<dyn Iterator<Item = (u64, u64)> + Send + '_> {
        match self {
            DilutionSchedule::None => Box::new(std::iter::empty()),
            DilutionSchedule::Periodic { every, zeros } => {
                let (every, zeros) = (*every, *zeros);
                Box::new((1u64..).map(move |k| (k * every, zeros)))
            }
            DilutionSchedule::GrowingRuns { rho, unit } => {
                let factor = rho / (1.0 - rho);
                let unit = *unit;
                let mut consumed = 0u64;
                let mut zeros = 0u64;
                Box::new((1u64..).map(move |j| {
                    consumed += unit * j;
                    let target = (factor * consumed as f64).round() as u64;
                    let run = target.saturating_sub(zeros);
                    zeros += run;
                    (consumed, run)
                }))
            }
            DilutionSchedule::Explicit { events } => Box::new(events.iter().copied()),
        }
    }
}

/// Zero-runs interleaved into a source per a schedule.
pub struct Dilute {
    source: SharedSource,
    schedule: DilutionSchedule,
}

pub fn dilute(s: SharedSource, schedule: DilutionSchedule) -> Result<Dilute> {
    schedule.validate()?;
    Ok(Dilute { source: s, schedule })
}

impl Dilute {
    /// Digits tagged `true` when inserted. The running count of `true`
    /// tags among the first n outputs is z(n).
    pub fn tagged(&self) -> TaggedIter<'_> {
        let mut src = self.source.digits();
        let mut events = self.schedule.events().peekable();
        let mut consumed = 0u64;
        let mut pending = 0u64;
        Box::new(std::iter::from_fn(move || loop {
            if pending > 0 {
                pending -= 1;
                return Some(Ok((0, true)));
            }
            if let Some(&(at, run)) = events.peek() {
                if at <= consumed {
                    events.next();
                    pending = run;
                    continue;
                }
            }
            let d = src.next()?;
            consumed += 1;
            return Some(d.map(|d| (d, false)));
        }))
    }

    /// z(n) at each requested output position (positions increasing).
    pub fn zero_counts(&self, positions: &[u64]) -> Result<Vec<u64>> {
        tagged_counts(self.tagged(), positions)
    }
}

impl SequenceSource for Dilute {
    fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    fn digits(&self) -> DigitIter<'_> {
        Box::new(self.tagged().map(|r| r.map(|(d, _)| d)))
    }
}

/// Counts of tagged digits among the first `p` outputs for each `p`.
pub fn tagged_counts(iter: TaggedIter<'_>, positions: &[u64]) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(positions.len());
    let mut pending = positions.iter().copied().peekable();
    let mut count = 0u64;
    let mut n = 0u64;
    while pending.peek() == Some(&0) {
        out.push(0);
        pending.next();
    }
    if pending.peek().is_none() {
        return Ok(out);
    }
    for item in iter {
        let (_, tag) = item?;
        n += 1;
        count += u64::from(tag);
        while pending.peek() == Some(&n) {
            out.push(count);
            pending.next();
        }
        if pending.peek().is_none() {
            break;
        }
    }
    // positions past the end of a finite stream see the final count
    out.extend(pending.map(|_| count));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Prefix concatenation

/// Prefix lengths m_1 < m_2 < ... for `S[0..m_1) S[0..m_2) ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthPolicy {
    /// `m_1 = first`, `m_{i+1} = ceil(ratio * m_i)`.
    Geometric {
        first: u64,
        ratio: f64,
    },
    /// Every prefix: lengths 1, 2, 3, ...
    AllPrefixes,
    Explicit {
        lengths: Vec<u64>,
    },
    /// Entropy-driven cut points; see [`adaptive_cuts`].
    Adaptive(AdaptiveConfig),
}

impl GrowthPolicy {
    pub fn geometric(ratio: f64) -> Self {
        GrowthPolicy::Geometric { first: 1, ratio }
    }

    fn lengths<'a>(&'a self, source: &'a dyn SequenceSource) -> Result<Box<dyn Iterator<Item = u64> + Send + 'a>> {
        Ok(match self {
            GrowthPolicy::Geometric { first, ratio } => {
                if *ratio <= 1.0 || *first == 0 {
                    return Err(Error::OrderViolation {
                        prev: first.to_string(),
                        next: format!("ceil({ratio} * {first})"),
                    });
                }
                let ratio = *ratio;
                Box::new(std::iter::successors(Some(*first), move |&m| {
                    Some(((m as f64) * ratio).ceil() as u64)
                }))
            }
            GrowthPolicy::AllPrefixes => Box::new(1u64..),
            GrowthPolicy::Explicit { lengths } => {
                for w in lengths.windows(2) {
                    if w[1] <= w[0] {
                        return Err(Error::OrderViolation {
                            prev: w[0].to_string(),
                            next: w[1].to_string(),
                        });
                    }
                }
                if lengths.first() == Some(&0) {
                    return Err(Error::InvalidParameter("prefix length 0".into()));
                }
                Box::new(lengths.iter().copied())
            }
            GrowthPolicy::Adaptive(cfg) => {
                let cuts = adaptive_cuts(&[source], cfg)?;
                let tail_ratio = cfg.min_ratio;
                let last = *cuts.last().expect("adaptive cuts are non-empty");
                let tail =
                    std::iter::successors(Some(last), move |&m| Some(((m as f64) * tail_ratio).ceil() as u64)).skip(1);
                Box::new(cuts.into_iter().chain(tail))
            }
        })
    }
}

pub struct PrefixConcat {
    source: SharedSource,
    policy: GrowthPolicy,
}

pub fn prefix_concat(s: SharedSource, policy: GrowthPolicy) -> Result<PrefixConcat> {
    if let GrowthPolicy::Geometric { ratio, .. } = &policy {
        if *ratio <= 1.0 {
            return Err(Error::OrderViolation {
                prev: "m".into(),
                next: format!("ceil({ratio} * m)"),
            });
        }
    }
    Ok(PrefixConcat { source: s, policy })
}

impl PrefixConcat {
    /// The prefix lengths in use, as far as `count` of them.
    pub fn cut_lengths(&self, count: usize) -> Result<Vec<u64>> {
        Ok(self.policy.lengths(&*self.source)?.take(count).collect())
    }
}

impl SequenceSource for PrefixConcat {
    fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    fn digits(&self) -> DigitIter<'_> {
        let mut lengths = match self.policy.lengths(&*self.source) {
            Ok(l) => l,
            Err(e) => return Box::new(std::iter::once(Err(e))),
        };
        let mut src = self.source.digits();
        let mut buf: Vec<Digit> = Vec::new();
        let mut exhausted = false;
        let mut cur_len = 0u64;
        let mut pos = 0u64;
        Box::new(std::iter::from_fn(move || {
            if pos == cur_len {
                if exhausted {
                    return None;
                }
                cur_len = lengths.next()?;
                pos = 0;
            }
            while buf.len() as u64 <= pos {
                match src.next() {
                    Some(Ok(d)) => buf.push(d),
                    Some(Err(e)) => return Some(Err(e)),
                    None => {
                        exhausted = true;
                        cur_len = buf.len() as u64;
                        if pos >= cur_len {
                            return None;
                        }
                    }
                }
            }
            let d = buf[pos as usize];
            pos += 1;
            Some(Ok(d))
        }))
    }
}

/// Finite-horizon surrogate for the prefix-growth conditions.
///
/// For each source, the reference level of block length l is the minimum of
/// `H_l(S[0..n))` over geometric checkpoints in the upper half of
/// `[reference_len / 8, reference_len]`. Cut `m_i` is the first candidate in
/// `[min_ratio * m_{i-1}, max_ratio * m_{i-1}]` (stepping by `step`) at which
/// `H_l(T_{i-1} S[0..m_i))` stays below reference + tolerance for every
/// `l <= max_block`, where tolerance is `2^{-i}` floored at `min_tolerance`.
/// With several sources the cut is the maximum of the per-source cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub max_block: usize,
    pub first: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub step: f64,
    pub reference_len: u64,
    pub min_tolerance: f64,
    /// Stop choosing cuts once the concatenation reaches this length.
    pub total_len: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            max_block: 4,
            first: 64,
            min_ratio: 2.0,
            max_ratio: 8.0,
            step: 1.25,
            reference_len: 1 << 16,
            min_tolerance: 1e-3,
            total_len: 1 << 20,
        }
    }
}

pub fn adaptive_cuts(sources: &[&dyn SequenceSource], cfg: &AdaptiveConfig) -> Result<Vec<u64>> {
    if cfg.min_ratio <= 1.0 || cfg.max_ratio < cfg.min_ratio || cfg.step <= 1.0 || cfg.first == 0 {
        return Err(Error::InvalidParameter("adaptive policy ratios must exceed 1".into()));
    }
    if sources.is_empty() {
        return Err(Error::InvalidParameter("adaptive policy needs a source".into()));
    }
    let mut cuts = vec![cfg.first];
    let mut total = cfg.first;
    let per_source = sources
        .iter()
        .map(|s| AdaptiveState::new(*s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut states = per_source;
    for s in &mut states {
        s.append_prefix(cfg.first)?;
    }
    let mut stage = 1i32;
    while total < cfg.total_len {
        stage += 1;
        let prev = *cuts.last().unwrap();
        let tol = 2f64.powi(-stage).max(cfg.min_tolerance);
        let mut chosen = 0u64;
        for s in &states {
            chosen = chosen.max(s.choose(prev, tol, cfg)?);
        }
        for s in &mut states {
            s.append_prefix(chosen)?;
        }
        cuts.push(chosen);
        total += chosen;
    }
    Ok(cuts)
}

struct AdaptiveState {
    alphabet: Alphabet,
    prefix: Vec<Digit>,
    reference: Vec<f64>,
    concat: Vec<BlockCensus>,
}

impl AdaptiveState {
    fn new(source: &dyn SequenceSource, cfg: &AdaptiveConfig) -> Result<Self> {
        let alphabet = source.alphabet();
        let need = (cfg.reference_len as f64 * cfg.max_ratio.max(1.0)).max(cfg.reference_len as f64) as usize;
        let prefix = source.prefix(need.max(cfg.reference_len as usize))?.into_digits();
        let checkpoints: Vec<u64> = std::iter::successors(Some((cfg.reference_len / 8).max(1)), |&c| {
            Some(((c as f64) * 1.25).ceil() as u64)
        })
        .take_while(|&c| c <= cfg.reference_len)
        .filter(|&c| c >= cfg.reference_len / 2)
        .collect();
        let mut reference = vec![f64::INFINITY; cfg.max_block];
        for l in 1..=cfg.max_block {
            let mut census = BlockCensus::new(alphabet, l)?;
            let mut fed = 0u64;
            for &c in &checkpoints {
                let end = (c as usize).min(prefix.len());
                census.extend(&prefix[fed as usize..end]);
                fed = end as u64;
                if census.total() > 0 {
                    let h: f64 = census.entropy()?;
                    reference[l - 1] = reference[l - 1].min(h);
                }
            }
        }
        let concat = (1..=cfg.max_block)
            .map(|l| BlockCensus::new(alphabet, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(AdaptiveState {
            alphabet,
            prefix,
            reference,
            concat,
        })
    }

    fn digits_upto(&self, m: u64) -> Result<&[Digit]> {
        if m as usize > self.prefix.len() {
            return Err(Error::InvalidParameter(format!(
                "adaptive cut {m} beyond buffered prefix {}",
                self.prefix.len()
            )));
        }
        Ok(&self.prefix[..m as usize])
    }

    fn append_prefix(&mut self, m: u64) -> Result<()> {
        let digits = self.digits_upto(m)?.to_vec();
        for c in &mut self.concat {
            c.extend(&digits);
        }
        Ok(())
    }

    fn choose(&self, prev: u64, tol: f64, cfg: &AdaptiveConfig) -> Result<u64> {
        let lo = ((prev as f64) * cfg.min_ratio).ceil() as u64;
        let hi = (((prev as f64) * cfg.max_ratio).floor() as u64)
            .min(self.prefix.len() as u64)
            .max(lo);
        let mut candidates: Vec<u64> =
            std::iter::successors(Some(lo), |&m| Some(((m as f64) * cfg.step).ceil() as u64))
                .take_while(|&m| m < hi)
                .collect();
        candidates.push(hi);
        for &m in &candidates {
            let digits = self.digits_upto(m)?;
            let mut ok = true;
            for (l0, base) in self.concat.iter().enumerate() {
                let mut part = BlockCensus::new(self.alphabet, l0 + 1)?;
                part.extend(digits);
                let merged = base.clone().merge(&part)?;
                let h: f64 = merged.entropy()?;
                if h > self.reference[l0] + tol {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(m);
            }
        }
        Ok(hi)
    }
}

// ---------------------------------------------------------------------------
// Alignment padding

/// `0^{j_i} sigma_b(n_i)` per element, with
/// `j_i = | |sigma_b(n_i)| - |sigma_b(k n_i)| |`.
pub struct AlignPad {
    set: SharedSet,
    factor: Natural,
    alphabet: Alphabet,
}

pub fn align_pad(a: SharedSet, k: Natural, b: Alphabet) -> Result<AlignPad> {
    if k.is_zero() {
        return Err(Error::InvalidParameter("alignment factor must be >= 1".into()));
    }
    Ok(AlignPad {
        set: a,
        factor: k,
        alphabet: b,
    })
}

impl AlignPad {
    pub fn tagged(&self) -> TaggedIter<'_> {
        let b = self.alphabet;
        let k = self.factor.clone();
        Box::new(self.set.values().flat_map(move |v| -> TaggedIter<'static> {
            match v {
                Err(e) => Box::new(std::iter::once(Err(e))),
                Ok(n) => {
                    let len = digit_length(&n, b);
                    let scaled = digit_length(&(&n * &k), b);
                    let pad = len.abs_diff(scaled);
                    let body = expand(&n, b);
                    Box::new(
                        std::iter::repeat_n((0, true), pad as usize)
                            .map(Ok)
                            .chain(body.into_iter().map(|d| Ok((d, false)))),
                    )
                }
            }
        }))
    }
}

impl SequenceSource for AlignPad {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn digits(&self) -> DigitIter<'_> {
        Box::new(self.tagged().map(|r| r.map(|(d, _)| d)))
    }
}

/// Fraction of tagged positions among the first `n` (or all, if fewer).
pub fn tagged_density(iter: TaggedIter<'_>, n: u64) -> Result<f64> {
    let mut seen = 0u64;
    let mut tagged = 0u64;
    for item in iter.take(n as usize) {
        let (_, t) = item?;
        seen += 1;
        tagged += u64::from(t);
    }
    Ok(if seen == 0 { 0.0 } else { tagged as f64 / seen as f64 })
}

/// Drains a source into a vector (bounded by `limit`).
pub fn collect_digits(s: &dyn SequenceSource, limit: usize) -> Result<Vec<Digit>> {
    s.digits().take(limit).collect()
}
