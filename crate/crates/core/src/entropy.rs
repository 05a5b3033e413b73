//! Sliding-block counting and block entropies.
//!
//! `H_l(x) = (1/l) * sum_w P(w,x) log_b(1/P(w,x))`, where `P(w,x)` is the
//! sliding count of `w` divided by the number of length-l windows,
//! `|x| - l + 1`. Logarithms are taken in the alphabet base so every
//! entropy lies in `[0, 1]`.

use std::collections::HashMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digits::{Alphabet, Digit};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequences::SequenceSource;

/// Census tables up to this many cells are dense arrays.
pub const DENSE_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
enum Counts {
    Dense(Vec<u64>),
    Sparse(HashMap<u128, u64>),
}

/// Sliding-window counts of all length-l blocks seen so far.
///
/// Censuses of adjacent segments merge exactly: the windows straddling the
/// boundary are recovered from the last `l-1` digits of the left segment
/// and the first `l-1` digits of the right one.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCensus {
    alphabet: Alphabet,
    block_len: usize,
    space: u128,
    counts: Counts,
    total: u64,
    consumed: u64,
    head: Vec<Digit>,
    // code of the last min(consumed, l) digits
    code: u128,
}

impl BlockCensus {
    pub fn new(alphabet: Alphabet, block_len: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::InvalidParameter("block length must be >= 1".into()));
        }
        let too_large = Error::BlockSpaceTooLarge {
            base: alphabet.base(),
            len: block_len,
        };
        let exp = u32::try_from(block_len).map_err(|_| Error::InvalidParameter("block length".into()))?;
        let space = u128::from(alphabet.base()).checked_pow(exp).ok_or(too_large)?;
        if space > u128::MAX / u128::from(alphabet.base()) {
            return Err(Error::BlockSpaceTooLarge {
                base: alphabet.base(),
                len: block_len,
            });
        }
        let counts = if space <= DENSE_LIMIT {
            Counts::Dense(vec![0; space as usize])
        } else {
            Counts::Sparse(HashMap::new())
        };
        Ok(BlockCensus {
            alphabet,
            block_len,
            space,
            counts,
            total: 0,
            consumed: 0,
            head: Vec::with_capacity(block_len - 1),
            code: 0,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Number of windows counted: `max(0, consumed - l + 1)`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.counts, Counts::Dense(_))
    }

    #[inline]
    pub fn push(&mut self, d: Digit) {
        debug_assert!(self.alphabet.contains(d));
        let b = u128::from(self.alphabet.base());
        self.code = if self.space <= u128::from(u32::MAX) {
            let space = self.space as u64;
            u128::from(((self.code as u64) * b as u64 + u64::from(d)) % space)
        } else {
            (self.code * b + u128::from(d)) % self.space
        };
        if self.head.len() + 1 < self.block_len {
            self.head.push(d);
        }
        self.consumed += 1;
        if self.consumed >= self.block_len as u64 {
            self.total += 1;
            match &mut self.counts {
                Counts::Dense(v) => v[self.code as usize] += 1,
                Counts::Sparse(m) => *m.entry(self.code).or_insert(0) += 1,
            }
        }
    }

    pub fn extend(&mut self, digits: &[Digit]) {
        for &d in digits {
            self.push(d);
        }
    }

    /// Consumes up to `limit` digits from a source.
    pub fn extend_from(&mut self, s: &dyn SequenceSource, limit: u64) -> Result<()> {
        for d in s.digits().take(limit as usize) {
            self.push(self.alphabet.check(d?)?);
        }
        Ok(())
    }

    fn encode(&self, w: &[Digit]) -> Result<u128> {
        if w.len() != self.block_len {
            return Err(Error::BlockLengthMismatch {
                expected: self.block_len,
                got: w.len(),
            });
        }
        let b = u128::from(self.alphabet.base());
        w.iter()
            .try_fold(0u128, |acc, &d| Ok(acc * b + u128::from(self.alphabet.check(d)?)))
    }

    /// `N(w, s)`.
    pub fn count(&self, w: &[Digit]) -> Result<u64> {
        let code = self.encode(w)?;
        Ok(match &self.counts {
            Counts::Dense(v) => v[code as usize],
            Counts::Sparse(m) => m.get(&code).copied().unwrap_or(0),
        })
    }

    /// Non-zero counts, in no particular order.
    pub fn nonzero_counts(&self) -> Box<dyn Iterator<Item = u64> + '_> {
        match &self.counts {
            Counts::Dense(v) => Box::new(v.iter().copied().filter(|&c| c > 0)),
            Counts::Sparse(m) => Box::new(m.values().copied().filter(|&c| c > 0)),
        }
    }

    /// `(block code, count)` pairs with non-zero count.
    pub fn entries(&self) -> Vec<(u128, u64)> {
        let mut out: Vec<(u128, u64)> = match &self.counts {
            Counts::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i as u128, c))
                .collect(),
            Counts::Sparse(m) => m.iter().filter(|(_, &c)| c > 0).map(|(&k, &c)| (k, c)).collect(),
        };
        out.sort_unstable();
        out
    }

    /// `P(w, s) = N(w, s) / (|s| - l + 1)`, exactly.
    pub fn probability(&self, w: &[Digit]) -> Result<Ratio<u64>> {
        if self.total == 0 {
            return Err(Error::EmptyCensus);
        }
        Ok(Ratio::new(self.count(w)?, self.total))
    }

    /// `H_l` of the counted string.
    pub fn entropy<F: Scalar>(&self) -> Result<F> {
        if self.total == 0 {
            return Err(Error::EmptyCensus);
        }
        Ok(entropy_of_counts(
            self.nonzero_counts(),
            self.total,
            self.block_len,
            self.alphabet,
        ))
    }

    /// Merges the census of the segment immediately following this one.
    pub fn merge(mut self, right: &BlockCensus) -> Result<Self> {
        if self.alphabet != right.alphabet || self.block_len != right.block_len {
            return Err(Error::BlockLengthMismatch {
                expected: self.block_len,
                got: right.block_len,
            });
        }
        let head_len = right.head.len() as u64;
        // windows crossing the boundary end inside right's first l-1 digits
        for &d in &right.head {
            self.push(d);
        }
        self.total += right.total;
        match (&mut self.counts, &right.counts) {
            (Counts::Dense(a), Counts::Dense(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += *y;
                }
            }
            (Counts::Sparse(a), Counts::Sparse(b)) => {
                for (k, v) in b {
                    *a.entry(*k).or_insert(0) += *v;
                }
            }
            _ => unreachable!("storage is a function of alphabet and block length"),
        }
        if right.consumed > head_len {
            self.code = right.code;
            self.consumed += right.consumed - head_len;
        }
        Ok(self)
    }
}

/// Census of a digit string.
pub fn count_blocks(digits: &[Digit], block_len: usize, alphabet: Alphabet) -> Result<BlockCensus> {
    let mut c = BlockCensus::new(alphabet, block_len)?;
    for &d in digits {
        c.push(alphabet.check(d)?);
    }
    Ok(c)
}

/// Census of a digit string counted in `chunks` independent segments and
/// merged in order.
pub fn count_blocks_parallel(
    digits: &[Digit],
    block_len: usize,
    alphabet: Alphabet,
    chunks: usize,
) -> Result<BlockCensus> {
    let chunk = digits.len().div_ceil(chunks.max(1)).max(1);
    let parts = digits
        .par_chunks(chunk)
        .map(|seg| count_blocks(seg, block_len, alphabet))
        .collect::<Result<Vec<_>>>()?;
    parts
        .into_iter()
        .try_fold(BlockCensus::new(alphabet, block_len)?, |acc, p| acc.merge(&p))
}

/// `(1/l) * sum_i (c_i / total) * log_b(total / c_i)`, clamped to `[0, 1]`.
pub fn entropy_of_counts<F: Scalar>(
    counts: impl IntoIterator<Item = u64>,
    total: u64,
    block_len: usize,
    alphabet: Alphabet,
) -> F {
    if total == 0 {
        return F::zero();
    }
    let t = F::from_count(total);
    let ln_t = t.ln();
    let mut acc = F::zero();
    for c in counts {
        if c == 0 {
            continue;
        }
        let cf = F::from_count(c);
        acc += cf * (ln_t - cf.ln());
    }
    let norm = t * F::from_count(block_len as u64) * F::from_count(u64::from(alphabet.base())).ln();
    (acc / norm).max(F::zero()).min(F::one())
}

/// `H_l` of a probability vector over blocks of length l.
pub fn distribution_entropy<F: Scalar>(probs: &[F], block_len: usize, alphabet: Alphabet) -> F {
    let mut acc = F::zero();
    for &p in probs {
        if p > F::zero() {
            acc -= p * p.ln();
        }
    }
    acc / (F::from_count(block_len as u64) * F::from_count(u64::from(alphabet.base())).ln())
}

/// `H_l(lambda P_u + (1 - lambda) P_v)` for the window distributions of two
/// censuses.
pub fn mixture_entropy<F: Scalar>(u: &BlockCensus, v: &BlockCensus, lambda: F) -> Result<F> {
    if u.total == 0 || v.total == 0 {
        return Err(Error::EmptyCensus);
    }
    if u.block_len != v.block_len || u.alphabet != v.alphabet {
        return Err(Error::BlockLengthMismatch {
            expected: u.block_len,
            got: v.block_len,
        });
    }
    let mut mix: HashMap<u128, F> = HashMap::new();
    let (tu, tv) = (F::from_count(u.total), F::from_count(v.total));
    for (k, c) in u.entries() {
        *mix.entry(k).or_insert(F::zero()) += lambda * F::from_count(c) / tu;
    }
    for (k, c) in v.entries() {
        *mix.entry(k).or_insert(F::zero()) += (F::one() - lambda) * F::from_count(c) / tv;
    }
    let probs: Vec<F> = mix.into_values().collect();
    Ok(distribution_entropy(&probs, u.block_len, u.alphabet))
}

// ---------------------------------------------------------------------------
// Profiles and dimension estimates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointSchedule {
    Geometric { start: u64, ratio: f64 },
    Explicit { positions: Vec<u64> },
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        CheckpointSchedule::Geometric {
            start: 1 << 10,
            ratio: 2.0,
        }
    }
}

impl CheckpointSchedule {
    /// Positions up to and including `limit`.
    pub fn positions(&self, limit: u64) -> Result<Vec<u64>> {
        match self {
            CheckpointSchedule::Geometric { start, ratio } => {
                if *ratio <= 1.0 || *start == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "geometric checkpoints need start >= 1 and ratio > 1 (got {start}, {ratio})"
                    )));
                }
                let r = *ratio;
                // the cast saturates, so stop once the sequence stalls
                Ok(std::iter::successors(Some(*start), |&p| {
                    Some(((p as f64) * r).ceil() as u64).filter(|&q| q > p)
                })
                .take_while(|&p| p <= limit)
                .collect())
            }
            CheckpointSchedule::Explicit { positions } => {
                if positions.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter(
                        "checkpoints must be strictly increasing".into(),
                    ));
                }
                Ok(positions.iter().copied().filter(|&p| p <= limit).collect())
            }
        }
    }
}

/// `H[l][j] = H_{l+1}(S[0..n_j))` for each checkpoint `n_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile<F> {
    pub base: u32,
    pub length: u64,
    pub checkpoints: Vec<u64>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<F>>,
}

impl<F: Scalar> EntropyProfile<F> {
    pub fn max_block(&self) -> usize {
        self.h.len()
    }

    /// `H_l` at the last checkpoint.
    pub fn last(&self, l: usize) -> F {
        *self.h[l - 1].last().expect("profile has at least one checkpoint")
    }

    /// `H_l` at the checkpoint equal to `position`, if recorded.
    pub fn at(&self, l: usize, position: u64) -> Option<F> {
        let j = self.checkpoints.iter().position(|&c| c == position)?;
        Some(self.h[l - 1][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("position");
        for l in 1..=self.h.len() {
            out.push_str(&format!(",H{l}"));
        }
        out.push('\n');
        for (j, n) in self.checkpoints.iter().enumerate() {
            out.push_str(&n.to_string());
            for row in &self.h {
                out.push_str(&format!(",{:.12}", row[j].to_f64_lossy()));
            }
            out.push('\n');
        }
        out
    }
}

/// One streaming pass over at most `limit` digits, maintaining censuses for
/// every block length `1..=max_block`. The final position is always a
/// checkpoint.
pub fn profile<F: Scalar>(
    s: &dyn SequenceSource,
    max_block: usize,
    schedule: &CheckpointSchedule,
    limit: u64,
) -> Result<EntropyProfile<F>> {
    let alphabet = s.alphabet();
    let mut censuses = (1..=max_block)
        .map(|l| BlockCensus::new(alphabet, l))
        .collect::<Result<Vec<_>>>()?;
    let positions = schedule.positions(limit)?;
    let mut pending = positions.iter().copied().peekable();
    let mut checkpoints = Vec::new();
    let mut h: Vec<Vec<F>> = vec![Vec::new(); max_block];
    let mut n = 0u64;

    let record = |n: u64, censuses: &[BlockCensus], checkpoints: &mut Vec<u64>, h: &mut Vec<Vec<F>>| {
        checkpoints.push(n);
        for (row, c) in h.iter_mut().zip(censuses) {
            row.push(c.entropy().unwrap_or(F::zero()));
        }
    };

    while pending.peek() == Some(&0) {
        pending.next();
    }
    for d in s.digits().take(limit as usize) {
        let d = alphabet.check(d?)?;
        for c in &mut censuses {
            c.push(d);
        }
        n += 1;
        if pending.peek() == Some(&n) {
            pending.next();
            record(n, &censuses, &mut checkpoints, &mut h);
        }
    }
    if checkpoints.last() != Some(&n) {
        record(n, &censuses, &mut checkpoints, &mut h);
    }
    Ok(EntropyProfile {
        base: alphabet.base(),
        length: n,
        checkpoints,
        h,
    })
}

/// Profile of an in-memory digit string.
pub fn profile_digits<F: Scalar>(
    digits: &[Digit],
    alphabet: Alphabet,
    max_block: usize,
    schedule: &CheckpointSchedule,
) -> Result<EntropyProfile<F>> {
    let src = crate::sequences::FixedDigits(crate::digits::DigitString::new(alphabet, digits.to_vec())?);
    profile(&src, max_block, schedule, digits.len() as u64)
}

/// Finite-horizon proxies for dimension and strong dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate<F> {
    pub dim_proxy: F,
    pub strong_dim_proxy: F,
    /// Checkpoints below this position were discarded.
    pub burn_in: u64,
    pub max_block: usize,
    /// Per block length, the minimum / maximum of `H_l` over the tail.
    pub tail_min: Vec<F>,
    pub tail_max: Vec<F>,
}

pub const DEFAULT_BURN_IN: f64 = 0.125;

/// `dim_proxy = min_l min_tail H_l`, `strong_dim_proxy = min_l max_tail H_l`,
/// where the tail is the checkpoints at or past `burn_in * length`.
pub fn estimate_dim<F: Scalar>(prof: &EntropyProfile<F>, burn_in: f64) -> Result<DimensionEstimate<F>> {
    if !(0.0..=1.0).contains(&burn_in) {
        return Err(Error::InvalidParameter(format!(
            "burn-in fraction {burn_in} outside [0, 1]"
        )));
    }
    let cutoff = (prof.length as f64 * burn_in).ceil() as u64;
    let tail: Vec<usize> = prof
        .checkpoints
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= cutoff && c > 0)
        .map(|(j, _)| j)
        .collect();
    if tail.len() < 2 {
        return Err(Error::NotEnoughData { found: tail.len() });
    }
    let mut tail_min = Vec::with_capacity(prof.h.len());
    let mut tail_max = Vec::with_capacity(prof.h.len());
    for row in &prof.h {
        let vals = tail.iter().map(|&j| row[j]);
        tail_min.push(vals.clone().fold(F::infinity(), F::min));
        tail_max.push(vals.fold(F::neg_infinity(), F::max));
    }
    let dim_proxy = tail_min.iter().copied().fold(F::infinity(), F::min);
    let strong_dim_proxy = tail_max.iter().copied().fold(F::infinity(), F::min);
    Ok(DimensionEstimate {
        dim_proxy,
        strong_dim_proxy,
        burn_in: cutoff,
        max_block: prof.h.len(),
        tail_min,
        tail_max,
    })
}

/// Block entropy of a normal sequence diluted with zero-density `rho`:
///
/// `-(1/l) [ p0 log_b p0 + (b^l - 1) q log_b q ]` with
/// `p0 = rho + (1 - rho) b^{-l}` and `q = (1 - rho) b^{-l}`.
///
/// Non-increasing in `l`, tending to `1 - rho`.
pub fn prop8_entropy<F: Scalar>(rho: F, block_len: usize, alphabet: Alphabet) -> F {
    let one = F::one();
    let l = F::from_count(block_len as u64);
    let ln_b = F::from_count(u64::from(alphabet.base())).ln();
    let b_neg_l = (-l * ln_b).exp();
    let p0 = rho + (one - rho) * b_neg_l;
    let zero_term = if p0 > F::zero() { p0 * p0.ln() } else { F::zero() };
    let rest = if rho < one {
        // (b^l - 1) q = (1 - rho)(1 - b^{-l}),  ln q = ln(1 - rho) - l ln b
        (one - rho) * (one - b_neg_l) * ((one - rho).ln() - l * ln_b)
    } else {
        F::zero()
    };
    let h = -(zero_term + rest) / (l * ln_b);
    h.max(F::zero()).min(one)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::DigitString;
    use crate::sequences::{ce_sequence, FixedDigits, Naturals, Periodic};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn d(s: &str) -> Vec<Digit> {
        s.chars().map(|c| c.to_digit(36).unwrap()).collect()
    }

    /// Window-by-window enumeration, straight from the definition.
    fn naive_counts(s: &[Digit], l: usize) -> HashMap<Vec<Digit>, u64> {
        let mut m = HashMap::new();
        if s.len() >= l {
            for i in 0..=s.len() - l {
                *m.entry(s[i..i + l].to_vec()).or_insert(0) += 1;
            }
        }
        m
    }

    fn assert_matches_naive(c: &BlockCensus, s: &[Digit]) {
        let l = c.block_len();
        let naive = naive_counts(s, l);
        let total: u64 = naive.values().sum();
        assert_eq!(c.total(), total);
        assert_eq!(c.total(), (s.len() as u64 + 1).saturating_sub(l as u64));
        let b = u128::from(c.alphabet().base());
        let mut seen = 0;
        for (code, cnt) in c.entries() {
            let mut w = vec![0; l];
            let mut x = code;
            for slot in w.iter_mut().rev() {
                *slot = (x % b) as Digit;
                x /= b;
            }
            assert_eq!(naive.get(&w).copied(), Some(cnt), "block {w:?}");
            seen += 1;
        }
        assert_eq!(seen, naive.len());
    }

    #[test]
    fn unbounded_checkpoints_terminate() {
        let p = CheckpointSchedule::default().positions(u64::MAX).unwrap();
        assert_eq!(p[0], 1024);
        assert!(p.len() < 64 && p.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn count_examples() {
        let c = count_blocks(&d("1111"), 2, Alphabet::BINARY).unwrap();
        assert_eq!(c.count(&[1, 1]).unwrap(), 3);
        assert_eq!(c.total(), 3);
        let c = count_blocks(&d("0101"), 2, Alphabet::BINARY).unwrap();
        assert_eq!(c.count(&[0, 1]).unwrap(), 2);
        assert_eq!(c.count(&[1, 0]).unwrap(), 1);
        let c = count_blocks(&d("01"), 3, Alphabet::BINARY).unwrap();
        assert_eq!(c.total(), 0);
        assert_eq!(c.entries(), vec![]);
    }

    #[test]
    fn probability_examples() {
        let c = count_blocks(&d("0101"), 2, Alphabet::BINARY).unwrap();
        assert_eq!(c.probability(&[0, 1]).unwrap(), Ratio::new(2, 3));
        assert_eq!(c.probability(&[0, 0]).unwrap(), Ratio::new(0, 1));
        let c = count_blocks(&d("0110"), 4, Alphabet::BINARY).unwrap();
        assert_eq!(c.probability(&[0, 1, 1, 0]).unwrap(), Ratio::new(1, 1));
        let empty = BlockCensus::new(Alphabet::BINARY, 2).unwrap();
        assert!(matches!(empty.probability(&[0, 1]), Err(Error::EmptyCensus)));
        assert!(matches!(c.probability(&[0, 1]), Err(Error::BlockLengthMismatch { .. })));
    }

    #[test]
    fn entropy_examples() {
        let h: f64 = count_blocks(&d("0101"), 1, Alphabet::BINARY)
            .unwrap()
            .entropy()
            .unwrap();
        assert!((h - 1.0).abs() < 1e-12);
        let h: f64 = count_blocks(&d("0000"), 1, Alphabet::BINARY)
            .unwrap()
            .entropy()
            .unwrap();
        assert_eq!(h, 0.0);
        let h: f64 = count_blocks(&d("0101"), 2, Alphabet::BINARY)
            .unwrap()
            .entropy()
            .unwrap();
        let expected = 0.5 * ((2.0 / 3.0) * (1.5f64).log2() + (1.0 / 3.0) * 3f64.log2());
        assert!((h - expected).abs() < 1e-9);
        assert!((h - 0.4591).abs() < 1e-4);
        let h32: f32 = count_blocks(&d("0101"), 2, Alphabet::BINARY)
            .unwrap()
            .entropy()
            .unwrap();
        assert!((f64::from(h32) - expected).abs() < 1e-6);
        let empty = BlockCensus::new(Alphabet::BINARY, 1).unwrap();
        assert!(matches!(empty.entropy::<f64>(), Err(Error::EmptyCensus)));
    }

    #[test]
    fn sparse_storage_for_large_block_spaces() {
        let c = BlockCensus::new(Alphabet::DECIMAL, 8).unwrap();
        assert!(!c.is_dense());
        let s: Vec<Digit> = (0..5000u32).map(|i| (i * 7 + i / 13) % 10).collect();
        let c = count_blocks(&s, 8, Alphabet::DECIMAL).unwrap();
        assert_matches_naive(&c, &s);
        assert!(BlockCensus::new(Alphabet::DECIMAL, 37).is_ok());
        assert!(matches!(
            BlockCensus::new(Alphabet::DECIMAL, 40),
            Err(Error::BlockSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn merge_at_every_split_point() {
        let s = d("0110100110010110100101100110100101");
        for l in 1..=6 {
            let whole = count_blocks(&s, l, Alphabet::BINARY).unwrap();
            for cut in 0..=s.len() {
                let left = count_blocks(&s[..cut], l, Alphabet::BINARY).unwrap();
                let right = count_blocks(&s[cut..], l, Alphabet::BINARY).unwrap();
                let merged = left.merge(&right).unwrap();
                assert_eq!(merged, whole, "l={l} cut={cut}");
            }
        }
    }

    #[test]
    fn merge_of_short_pieces() {
        let s = d("2101202");
        let b3 = Alphabet::new(3).unwrap();
        for l in 1..=5 {
            let whole = count_blocks(&s, l, b3).unwrap();
            let merged = s
                .iter()
                .map(|&x| count_blocks(&[x], l, b3).unwrap())
                .try_fold(BlockCensus::new(b3, l).unwrap(), |acc, p| acc.merge(&p))
                .unwrap();
            assert_eq!(merged, whole);
        }
    }

    #[test]
    fn parallel_count_equals_sequential() {
        let s: Vec<Digit> = (0..100_000u64).map(|i| ((i * i + 3 * i) % 10) as Digit).collect();
        for l in [1, 3, 6] {
            let seq = count_blocks(&s, l, Alphabet::DECIMAL).unwrap();
            for chunks in [1, 7, 64] {
                assert_eq!(count_blocks_parallel(&s, l, Alphabet::DECIMAL, chunks).unwrap(), seq);
            }
        }
    }

    #[test]
    fn profile_of_zeros_and_periodic() {
        let zeros = Periodic::new(Alphabet::BINARY, vec![0]).unwrap();
        let p: EntropyProfile<f64> = profile(&zeros, 4, &CheckpointSchedule::default(), 1 << 14).unwrap();
        assert!(p.h.iter().flatten().all(|&h| h == 0.0));
        let e = estimate_dim(&p, DEFAULT_BURN_IN).unwrap();
        assert_eq!((e.dim_proxy, e.strong_dim_proxy), (0.0, 0.0));

        let alt = Periodic::new(Alphabet::BINARY, vec![0, 1]).unwrap();
        let p: EntropyProfile<f64> = profile(&alt, 4, &CheckpointSchedule::default(), 1 << 16).unwrap();
        assert!((p.last(1) - 1.0).abs() < 1e-9);
        assert!((p.last(2) - 0.5).abs() < 1e-4);
        assert!((p.last(4) - 0.25).abs() < 1e-4);
    }

    #[test]
    fn profile_checkpoints_and_final_position() {
        let src = FixedDigits(DigitString::parse(Alphabet::BINARY, &"01".repeat(1500)).unwrap());
        let p: EntropyProfile<f64> = profile(&src, 2, &CheckpointSchedule::default(), 1 << 20).unwrap();
        assert_eq!(p.checkpoints, vec![1024, 2048, 3000]);
        assert_eq!(p.length, 3000);
        assert_eq!(p.h.len(), 2);
        assert!(p.to_csv().starts_with("position,H1,H2\n1024,"));
    }

    #[test]
    fn champernowne_profile_is_high() {
        let c = ce_sequence(Arc::new(Naturals { start: 0 }), Alphabet::BINARY);
        let p: EntropyProfile<f64> = profile(&c, 4, &CheckpointSchedule::default(), 1_000_000).unwrap();
        for l in 1..=4 {
            assert!(p.last(l) >= 0.95, "H_{l} = {}", p.last(l));
        }
        let e = estimate_dim(&p, DEFAULT_BURN_IN).unwrap();
        assert!(e.dim_proxy >= 0.95);
        assert!(e.dim_proxy <= e.strong_dim_proxy);
    }

    #[test]
    fn estimate_needs_two_tail_checkpoints() {
        let p = EntropyProfile::<f64> {
            base: 2,
            length: 100,
            checkpoints: vec![100],
            h: vec![vec![0.5]],
        };
        assert!(matches!(
            estimate_dim(&p, 0.125),
            Err(Error::NotEnoughData { found: 1 })
        ));
    }

    #[test]
    fn prop8_formula_values() {
        for l in [1, 2, 8, 20] {
            let h0: f64 = prop8_entropy(0.0, l, Alphabet::BINARY);
            let h1: f64 = prop8_entropy(1.0, l, Alphabet::BINARY);
            assert!((h0 - 1.0).abs() < 1e-12);
            assert_eq!(h1, 0.0);
        }
        let h: f64 = prop8_entropy(0.5, 1, Alphabet::BINARY);
        let expected = -(0.75 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.8113).abs() < 1e-4);
        // decimal check against direct summation over all blocks
        let (rho, l, b) = (0.3f64, 3usize, 10u32);
        let p0 = rho + (1.0 - rho) / 1000.0;
        let q = (1.0 - rho) / 1000.0;
        let direct = -(p0 * p0.log10() + 999.0 * q * q.log10()) / l as f64;
        let ours: f64 = prop8_entropy(rho, l, Alphabet::new(b).unwrap());
        assert!((ours - direct).abs() < 1e-12);
    }

    #[test]
    fn prop8_non_increasing_and_limit() {
        for i in 1..=9 {
            let rho = f64::from(i) / 10.0;
            let mut prev = f64::INFINITY;
            for l in 1..=20 {
                let h: f64 = prop8_entropy(rho, l, Alphabet::BINARY);
                assert!(h <= prev + 1e-15, "rho={rho} l={l}");
                prev = h;
            }
            // l * H_l = (1 - rho) l + h(rho) + o(1)
            let h2 = -rho * rho.log2() - (1.0 - rho) * (1.0 - rho).log2();
            let h60: f64 = prop8_entropy(rho, 60, Alphabet::BINARY);
            let gap = 60.0 * h60 - 60.0 * (1.0 - rho) - h2;
            assert!(gap.abs() < 1e-6, "rho={rho} gap={gap}");
        }
    }

    #[test]
    fn prop8_matches_mixture_distribution() {
        let (rho, l) = (0.25f64, 3usize);
        let mut probs = vec![(1.0 - rho) / 8.0; 8];
        probs[0] += rho;
        let direct: f64 = distribution_entropy(&probs, l, Alphabet::BINARY);
        let formula: f64 = prop8_entropy(rho, l, Alphabet::BINARY);
        assert!((direct - formula).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn census_matches_naive(
            s in proptest::collection::vec(0u32..3, 0..400),
            l in 1usize..6,
            cut in 0usize..400,
        ) {
            let b3 = Alphabet::new(3).unwrap();
            let c = count_blocks(&s, l, b3).unwrap();
            assert_matches_naive(&c, &s);
            let cut = cut.min(s.len());
            let merged = count_blocks(&s[..cut], l, b3).unwrap()
                .merge(&count_blocks(&s[cut..], l, b3).unwrap()).unwrap();
            prop_assert_eq!(merged, c);
        }

        #[test]
        fn entropy_bounds(s in proptest::collection::vec(0u32..10, 1..300), l in 1usize..4) {
            let c = count_blocks(&s, l, Alphabet::DECIMAL).unwrap();
            if c.total() > 0 {
                let h: f64 = c.entropy().unwrap();
                prop_assert!((0.0..=1.0).contains(&h));
                let single = c.nonzero_counts().count() == 1;
                prop_assert_eq!(h == 0.0, single);
            }
        }
    }
}
