//! (ε,k)-normality of individual naturals.
//!
//! `n` is (ε,k)-normal in base b when every block `w` of length k satisfies
//! `|N(w, σ_b(n)) / |σ_b(n)| - b^-k| <= ε`. The denominator is the full
//! digit length, not the window count `|σ_b(n)| - k + 1` used by
//! [`crate::entropy`]; the two differ by `k - 1` windows, which matters only
//! for short strings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Pow, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digits::{expand, value_of, Alphabet, Digit, Natural};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityParams {
    pub epsilon: f64,
    pub k: usize,
    #[serde(rename = "base")]
    pub alphabet: Alphabet,
}

impl NormalityParams {
    pub fn new(epsilon: f64, k: usize, alphabet: Alphabet) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        Ok(NormalityParams { epsilon, k, alphabet })
    }

    /// Stage `i` of the staged constructions: `ε = 2^-i`, `k = max(i, 1)`.
    pub fn stage(i: u32, alphabet: Alphabet) -> Self {
        NormalityParams {
            epsilon: 0.5f64.powi(i as i32),
            k: (i as usize).max(1),
            alphabet,
        }
    }

    /// Inclusive range of admissible block counts in a string of `len`
    /// digits. Exact: ε is converted from its binary representation.
    pub fn count_bounds(&self, len: u64) -> (BigInt, BigInt) {
        let eps = BigRational::from_float(self.epsilon).expect("finite epsilon");
        let len = BigRational::from_integer(BigInt::from(len));
        let expected = &len / BigRational::from_integer(BigInt::from(self.alphabet.base()).pow(self.k));
        let slack = eps * len;
        (
            (&expected - &slack).ceil().to_integer(),
            (expected + slack).floor().to_integer(),
        )
    }
}

/// Tests digit strings against fixed parameters, caching count bounds by
/// length.
#[derive(Debug, Clone)]
pub struct NormalityTester {
    params: NormalityParams,
    // b^k, when it fits
    space: Option<u128>,
    bounds: BTreeMap<u64, (i128, i128)>,
}

impl NormalityTester {
    pub fn new(params: NormalityParams) -> Self {
        let space = u32::try_from(params.k)
            .ok()
            .and_then(|k| u128::from(params.alphabet.base()).checked_pow(k))
            .filter(|&s| s <= u128::MAX / u128::from(params.alphabet.base()));
        NormalityTester {
            params,
            space,
            bounds: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> &NormalityParams {
        &self.params
    }

    fn bounds(&mut self, len: u64) -> (i128, i128) {
        *self.bounds.entry(len).or_insert_with(|| {
            let (lo, hi) = self.params.count_bounds(len);
            let clamp = |v: BigInt| {
                v.to_i128()
                    .unwrap_or(if v.is_negative() { i128::MIN } else { i128::MAX })
            };
            (clamp(lo), clamp(hi))
        })
    }

    pub fn is_normal_digits(&mut self, digits: &[Digit]) -> bool {
        let len = digits.len() as u64;
        let (lo, hi) = self.bounds(len);
        let k = self.params.k;
        let windows = digits.len().saturating_sub(k - 1);
        let ok = |c: u64| lo <= i128::from(c) && i128::from(c) <= hi;
        let distinct;
        match self.space {
            Some(_) => {
                let b = u128::from(self.params.alphabet.base());
                let mut codes: Vec<u128> = Vec::with_capacity(windows);
                let mut code = 0u128;
                let top = b.pow(k as u32 - 1);
                for (i, &d) in digits.iter().enumerate() {
                    if i >= k {
                        code -= u128::from(digits[i - k]) * top;
                    }
                    code = code * b + u128::from(d);
                    if i + 1 >= k {
                        codes.push(code);
                    }
                }
                codes.sort_unstable();
                let mut n = 0;
                for run in codes.chunk_by(|a, b| a == b) {
                    if !ok(run.len() as u64) {
                        return false;
                    }
                    n += 1;
                }
                distinct = n as u128;
            }
            None => {
                let mut blocks: Vec<&[Digit]> = digits.windows(k).collect();
                blocks.sort_unstable();
                let mut n = 0;
                for run in blocks.chunk_by(|a, b| a == b) {
                    if !ok(run.len() as u64) {
                        return false;
                    }
                    n += 1;
                }
                distinct = n;
            }
        }
        // blocks that never occur have count 0
        let all_seen = self.space.is_some_and(|s| distinct == s);
        all_seen || ok(0)
    }

    pub fn is_normal(&mut self, n: &Natural) -> bool {
        let digits = expand(n, self.params.alphabet);
        self.is_normal_digits(&digits)
    }
}

pub fn is_ek_normal(n: &Natural, params: &NormalityParams) -> bool {
    NormalityTester::new(*params).is_normal(n)
}

pub fn is_ek_normal_digits(digits: &[Digit], params: &NormalityParams) -> bool {
    NormalityTester::new(*params).is_normal_digits(digits)
}

// ---------------------------------------------------------------------------
// Targets

/// The image `coeff * n^power` of a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Target {
    pub coeff: u64,
    pub power: u32,
}

impl Target {
    pub const N: Target = Target { coeff: 1, power: 1 };
    pub const TWO_N: Target = Target { coeff: 2, power: 1 };
    pub const N_SQUARED: Target = Target { coeff: 1, power: 2 };

    pub fn new(coeff: u64, power: u32) -> Result<Self> {
        if coeff == 0 || power == 0 {
            return Err(Error::InvalidParameter("target needs coeff >= 1 and power >= 1".into()));
        }
        Ok(Target { coeff, power })
    }

    pub fn apply(&self, n: &Natural) -> Natural {
        Pow::pow(n, self.power) * self.coeff
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeff != 1 {
            write!(f, "{}", self.coeff)?;
        }
        write!(f, "n")?;
        if self.power != 1 {
            write!(f, "^{}", self.power)?;
        }
        Ok(())
    }
}

impl FromStr for Target {
    type Err = Error;

    /// Accepts `n`, `2n`, `n2`, `n^2`, `3n^2`, `n²`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad target {s:?}"));
        let t = s.trim();
        let (coeff, rest) = t.split_once('n').ok_or_else(bad)?;
        let coeff = if coeff.is_empty() {
            1
        } else {
            coeff.parse().map_err(|_| bad())?
        };
        let power = match rest.strip_prefix('^').unwrap_or(rest) {
            "" => 1,
            "²" => 2,
            "³" => 3,
            p => p.parse().map_err(|_| bad())?,
        };
        Target::new(coeff, power).map_err(|_| bad())
    }
}

impl TryFrom<String> for Target {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        t.to_string()
    }
}

/// Parses a comma-separated target list such as `n,2n,n2`.
pub fn parse_targets(s: &str) -> Result<Vec<Target>> {
    let targets = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if targets.is_empty() {
        return Err(Error::Parse("empty target list".into()));
    }
    Ok(targets)
}

/// Tests every target image of `n`, stopping at the first failure.
pub fn all_targets_normal(n: &Natural, targets: &[Target], tester: &mut NormalityTester) -> bool {
    targets.iter().all(|t| tester.is_normal(&t.apply(n)))
}

// ---------------------------------------------------------------------------
// Census

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadeCount {
    /// Members `1..=upper` are included.
    pub upper: u64,
    pub failures: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCensus {
    pub target: Target,
    pub failures: u64,
    pub fraction: f64,
    /// Cumulative counts at every power of ten below `m`, then at `m`.
    pub decades: Vec<DecadeCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityCensus {
    pub m: u64,
    pub params: NormalityParams,
    pub targets: Vec<TargetCensus>,
}

impl NormalityCensus {
    pub fn target(&self, t: Target) -> Option<&TargetCensus> {
        self.targets.iter().find(|c| c.target == t)
    }
}

const CENSUS_CHUNK: u64 = 4096;

/// Failure counts of each target over `n = 1..=m`.
pub fn census(m: u64, params: &NormalityParams, targets: &[Target]) -> Result<NormalityCensus> {
    if m == 0 {
        return Err(Error::InvalidParameter("census range must be >= 1".into()));
    }
    let mut uppers: Vec<u64> = std::iter::successors(Some(10u64), |&u| u.checked_mul(10))
        .take_while(|&u| u < m)
        .collect();
    uppers.push(m);
    let chunks = m.div_ceil(CENSUS_CHUNK);
    // per chunk: failures[target][decade]
    let per_chunk: Vec<Vec<Vec<u64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tester = NormalityTester::new(*params);
            let mut fails = vec![vec![0u64; uppers.len()]; targets.len()];
            let lo = c * CENSUS_CHUNK + 1;
            let hi = ((c + 1) * CENSUS_CHUNK).min(m);
            for n in lo..=hi {
                let first = uppers.partition_point(|&u| u < n);
                let big = BigUint::from(n);
                for (t, target) in targets.iter().enumerate() {
                    if !tester.is_normal(&target.apply(&big)) {
                        fails[t][first] += 1;
                    }
                }
            }
            fails
        })
        .collect();
    let targets = targets
        .iter()
        .enumerate()
        .map(|(t, &target)| {
            let mut cumulative = 0;
            let decades: Vec<DecadeCount> = uppers
                .iter()
                .enumerate()
                .map(|(d, &upper)| {
                    cumulative += per_chunk.iter().map(|f| f[t][d]).sum::<u64>();
                    DecadeCount {
                        upper,
                        failures: cumulative,
                        fraction: cumulative as f64 / upper as f64,
                    }
                })
                .collect();
            TargetCensus {
                target,
                failures: cumulative,
                fraction: cumulative as f64 / m as f64,
                decades,
            }
        })
        .collect();
    Ok(NormalityCensus {
        m,
        params: *params,
        targets,
    })
}

// ---------------------------------------------------------------------------
// Witness search

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchOrder {
    /// Increasing n from `b^(l-1)`.
    Ascending,
    /// Uniform l-digit candidates from a ChaCha8 stream keyed by
    /// `(seed, base, l)`.
    Sampled { seed: u64 },
    /// Ascending when the whole length class fits the budget (the result is
    /// then the smallest witness), sampled otherwise.
    Auto { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessSearch {
    pub budget: u64,
    pub order: SearchOrder,
}

pub const DEFAULT_WITNESS_BUDGET: u64 = 1_000_000;

impl Default for WitnessSearch {
    fn default() -> Self {
        WitnessSearch {
            budget: DEFAULT_WITNESS_BUDGET,
            order: SearchOrder::Auto { seed: 0 },
        }
    }
}

impl WitnessSearch {
    pub fn with_budget(self, budget: u64) -> Self {
        WitnessSearch { budget, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub n: Natural,
    pub len: u64,
    /// Position of `n` in the search order, counting from 1.
    pub tried: u64,
}

const WITNESS_CHUNK: u64 = 256;

fn chunk_seed(seed: u64, base: u32, len: u64, chunk: u64) -> u64 {
    // splitmix64 over the key
    let mut x = seed ^ (u64::from(base) << 48) ^ len.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ chunk.rotate_left(29);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Candidates `[chunk * WITNESS_CHUNK, ...)` of the search order, capped at
/// `end`.
fn chunk_candidates(order: SearchOrder, b: Alphabet, len: u64, chunk: u64, end: u64) -> Vec<Natural> {
    let start = chunk * WITNESS_CHUNK;
    let stop = (start + WITNESS_CHUNK).min(end);
    match order {
        SearchOrder::Ascending | SearchOrder::Auto { .. } => {
            let first = b.pow(len - 1) + start;
            (0..stop - start).map(|j| &first + j).collect()
        }
        SearchOrder::Sampled { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(seed, b.base(), len, chunk));
            (start..stop)
                .map(|_| {
                    let digits: Vec<Digit> = (0..len)
                        .map(|i| {
                            if i == 0 {
                                rng.gen_range(1..b.base())
                            } else {
                                rng.gen_range(0..b.base())
                            }
                        })
                        .collect();
                    value_of(b, &digits).expect("digits in range")
                })
                .collect()
        }
    }
}

fn class_size(b: Alphabet, len: u64) -> Option<u64> {
    // (b - 1) * b^(len - 1)
    let size = b.pow(len - 1) * (b.base() - 1);
    size.to_u64()
}

/// Finds a natural with exactly `len` digits whose target images are all
/// (ε,k)-normal.
///
/// Candidates are examined in chunks in parallel; the result is always the
/// first success in search order, so it does not depend on thread count.
pub fn find_witness(len: u64, params: &NormalityParams, targets: &[Target], search: WitnessSearch) -> Result<Witness> {
    if len == 0 {
        return Err(Error::InvalidParameter("witness length must be >= 1".into()));
    }
    let b = params.alphabet;
    let class = class_size(b, len);
    let order = match search.order {
        SearchOrder::Auto { seed } if class.is_none_or(|c| c > search.budget) => SearchOrder::Sampled { seed },
        o => o,
    };
    let end = match order {
        SearchOrder::Sampled { .. } => search.budget,
        _ => class.map_or(search.budget, |c| c.min(search.budget)),
    };
    let chunks = end.div_ceil(WITNESS_CHUNK);
    let wave = (rayon::current_num_threads() as u64 * 2).max(1);
    let mut next = 0;
    while next < chunks {
        let upto = (next + wave).min(chunks);
        let hit = (next..upto)
            .into_par_iter()
            .map(|c| {
                let mut tester = NormalityTester::new(*params);
                chunk_candidates(order, b, len, c, end)
                    .into_iter()
                    .enumerate()
                    .find(|(_, n)| all_targets_normal(n, targets, &mut tester))
                    .map(|(j, n)| (c * WITNESS_CHUNK + j as u64, n))
            })
            .find_first(|r| r.is_some())
            .flatten();
        if let Some((idx, n)) = hit {
            return Ok(Witness { n, len, tried: idx + 1 });
        }
        next = upto;
    }
    Err(Error::WitnessNotFound { len, tried: end })
}

// ---------------------------------------------------------------------------
// Thresholds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Witness search used for each probed length.
    pub probe: WitnessSearch,
    /// Lengths `l + 1 ..= l + window` must succeed as well.
    pub window: u64,
    pub start: u64,
    pub max_len: u64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            probe: WitnessSearch::default().with_budget(256),
            window: 8,
            start: 1,
            max_len: 4096,
        }
    }
}

/// Resumable search for the smallest `l` such that witnesses exist at
/// every length in `l ..= l + window`.
#[derive(Debug, Clone)]
pub struct ThresholdFinder {
    params: NormalityParams,
    targets: Vec<Target>,
    opts: ThresholdOptions,
    run_start: u64,
    next: u64,
    probes: BTreeMap<u64, Option<Witness>>,
}

impl ThresholdFinder {
    pub fn new(params: NormalityParams, targets: Vec<Target>, opts: ThresholdOptions) -> Self {
        let start = opts.start.max(1);
        ThresholdFinder {
            params,
            targets,
            opts,
            run_start: start,
            next: start,
            probes: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> &NormalityParams {
        &self.params
    }

    /// The threshold, if already established.
    pub fn threshold(&self) -> Option<u64> {
        (self.next > self.run_start + self.opts.window).then_some(self.run_start)
    }

    /// Probes lengths up to `limit` (capped by `max_len`) until the
    /// threshold is established.
    pub fn advance(&mut self, limit: u64) -> Option<u64> {
        let limit = limit.min(self.opts.max_len);
        while self.threshold().is_none() && self.next <= limit {
            let l = self.next;
            let found = find_witness(l, &self.params, &self.targets, self.opts.probe).ok();
            let ok = found.is_some();
            self.probes.insert(l, found);
            self.next += 1;
            if !ok {
                self.run_start = self.next;
            }
        }
        self.threshold()
    }

    /// Witness found while probing length `l`, if that probe succeeded.
    pub fn probe_witness(&self, l: u64) -> Option<&Witness> {
        self.probes.get(&l).and_then(Option::as_ref)
    }

    /// Every length in `start..limit` has been probed and the threshold is
    /// not below `limit`.
    pub fn exceeds(&mut self, limit: u64) -> bool {
        match self.advance(limit.saturating_add(self.opts.window)) {
            Some(t) => t >= limit,
            None => self.run_start >= limit || self.next > self.opts.max_len,
        }
    }
}

pub fn find_threshold(params: &NormalityParams, targets: &[Target], opts: ThresholdOptions) -> Result<u64> {
    let mut finder = ThresholdFinder::new(*params, targets.to_vec(), opts);
    finder
        .advance(opts.max_len)
        .ok_or(Error::ThresholdNotFound { max_len: opts.max_len })
}
