//! Explicit sets with prescribed Copeland-Erdős dimensions.
//!
//! The staged builders emit elements whose expansions are a marker digit, a
//! run of padding zeros and a normal payload. The padding fraction fixes the
//! dimension (see [`crate::entropy::prop8_entropy`]); the payloads are
//! witnesses of increasingly strict (ε,k)-normality.
//!
//! * [`build_prop11`]: elements `b^(2l) + n`, `n` of exactly `l` digits, so
//!   `CE(A)` is about half padding and `CE(x^2(A))` about a quarter.
//! * [`build_corollary_d`]: elements `b^i + n` with slots wide enough that
//!   every binomial term of `(b^i + n)^d` is carry-free.
//! * [`build_prop13`]: elements `m * b^(d_n - c_n)`, equal padding fraction
//!   in `A` and `x^2(A)`.
//! * [`prop7_demo`]: prefixes of a real `α` against the digits of `c α`.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Pow};
use serde::{Deserialize, Serialize};

use crate::digits::{digit_length, expand, value_of, Alphabet, Digit, DigitString, Natural};
use crate::entropy::{estimate_dim, profile, CheckpointSchedule, DimensionEstimate, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::normality::{
    find_witness, is_ek_normal, NormalityParams, SearchOrder, Target, ThresholdFinder, ThresholdOptions, Witness,
    WitnessSearch,
};
use crate::polynomials::{eval_floor, scaled_expansion, EvalOptions, Poly, Rational, RealCoefficient};
use crate::sequences::{
    prefix_concat, DigitIter, ExplicitSet, FixedDigits, GrowthPolicy, SequenceSource, SharedSource,
};

mod nat_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(n)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Slot layouts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// The leading 1 of a power of the base.
    Marker,
    /// Padding zeros.
    Pad,
    Payload,
}

/// A run of `len` digits of one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot(pub SlotKind, pub u64);

pub fn layout_len(layout: &[Slot]) -> u64 {
    layout.iter().map(|s| s.1).sum()
}

pub fn layout_zeros(layout: &[Slot]) -> u64 {
    layout.iter().filter(|s| s.0 == SlotKind::Pad).map(|s| s.1).sum()
}

pub fn binomial(d: u32, j: u32) -> Natural {
    (0..j).fold(BigUint::one(), |acc, t| acc * (d - t) / (t + 1))
}

/// Layout of `σ_b((b^i + n)^d)`: the marker, then for `j = 1..=d` the term
/// `C(d,j) n^j` right-aligned in a slot of width `i`. Also returns the
/// payload values in order.
///
/// Fails if some term does not fit its slot, which would let a carry leak
/// into the slot to its left.
pub fn binomial_layout(n: &Natural, i: u64, d: u32, b: Alphabet) -> Result<(Vec<Slot>, Vec<Natural>)> {
    let mut layout = vec![Slot(SlotKind::Marker, 1)];
    let mut payloads = Vec::with_capacity(d as usize);
    for j in 1..=d {
        let term = binomial(d, j) * Pow::pow(n, j);
        let len = digit_length(&term, b);
        if len > i {
            return Err(Error::IntegrityError(format!(
                "term C({d},{j}) n^{j} has {len} digits, slot width is {i}"
            )));
        }
        if len < i {
            layout.push(Slot(SlotKind::Pad, i - len));
        }
        layout.push(Slot(SlotKind::Payload, len));
        payloads.push(term);
    }
    Ok((layout, payloads))
}

/// Digits described by a layout and its payloads.
pub fn render_layout(layout: &[Slot], payloads: &[Natural], b: Alphabet) -> Result<Vec<Digit>> {
    let mut out = Vec::with_capacity(layout_len(layout) as usize);
    let mut payloads = payloads.iter();
    for &Slot(kind, len) in layout {
        match kind {
            SlotKind::Marker => out.extend(std::iter::repeat_n(1, len as usize)),
            SlotKind::Pad => out.extend(std::iter::repeat_n(0, len as usize)),
            SlotKind::Payload => {
                let p = payloads
                    .next()
                    .ok_or_else(|| Error::IntegrityError("layout has more payload slots than payloads".into()))?;
                let digits = expand(p, b);
                if digits.len() as u64 != len {
                    return Err(Error::IntegrityError(format!(
                        "payload has {} digits, slot has {len}",
                        digits.len()
                    )));
                }
                out.extend(digits);
            }
        }
    }
    if payloads.next().is_some() {
        return Err(Error::IntegrityError("unused payloads".into()));
    }
    Ok(out)
}

/// Checks that `σ_b(value)` is exactly the layout, digit for digit.
pub fn check_slot_integrity(value: &Natural, layout: &[Slot], payloads: &[Natural], b: Alphabet) -> Result<()> {
    let expected = render_layout(layout, payloads, b)?;
    let actual = expand(value, b);
    if actual != expected {
        let at = actual.iter().zip(&expected).take_while(|(x, y)| x == y).count();
        return Err(Error::IntegrityError(format!(
            "expansion of {value} departs from its slot layout at digit {at}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Specs, schedules and reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedSpec {
    pub base: Alphabet,
    /// Stage `i` requires (2^-i, max(i,1))-normality.
    pub first_stage: u32,
    /// Digit budget for each Copeland-Erdős stream.
    pub digits: u64,
    pub max_elements: Option<u64>,
    pub witness: WitnessSearch,
    pub thresholds: ThresholdOptions,
    /// Known thresholds for `first_stage, first_stage + 1, ...`; the rest
    /// are searched for.
    pub cached_thresholds: Vec<u64>,
}

impl StagedSpec {
    pub fn new(base: Alphabet, digits: u64) -> Self {
        StagedSpec {
            base,
            first_stage: 1,
            digits,
            max_elements: None,
            witness: WitnessSearch::default(),
            thresholds: ThresholdOptions::default(),
            cached_thresholds: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.digits == 0 {
            return Err(Error::InvalidParameter("digit budget must be positive".into()));
        }
        if self.witness.budget == 0 || self.thresholds.probe.budget == 0 {
            return Err(Error::InvalidParameter("search budgets must be positive".into()));
        }
        if self.cached_thresholds.windows(2).any(|w| w[1] < w[0]) || self.cached_thresholds.first() == Some(&0) {
            return Err(Error::InvalidParameter(
                "cached thresholds must be positive and non-decreasing".into(),
            ));
        }
        Ok(())
    }
}

/// The rationals `c_n / d_n` of the dimension-s construction, for
/// `n = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prop13Schedule {
    /// `d_n = d0 + n`, `c_n = max(1, round(s d_n))`.
    Target { s: f64, d0: u64 },
    /// `c_n = c0 + c_step n`, `d_n = d0 + d_step n`.
    Linear { c0: u64, c_step: u64, d0: u64, d_step: u64 },
}

impl Prop13Schedule {
    pub fn target(s: f64) -> Self {
        Prop13Schedule::Target { s, d0: 16 }
    }

    pub fn pair(&self, n: u64) -> (u64, u64) {
        match *self {
            Prop13Schedule::Target { s, d0 } => {
                let d = d0 + n;
                (((s * d as f64).round() as u64).clamp(1, d), d)
            }
            Prop13Schedule::Linear { c0, c_step, d0, d_step } => (c0 + c_step * n, d0 + d_step * n),
        }
    }

    /// The bound `a` on `d_{n+1} - d_n`.
    pub fn gap(&self) -> u64 {
        match *self {
            Prop13Schedule::Target { .. } => 1,
            Prop13Schedule::Linear { d_step, .. } => d_step,
        }
    }

    /// `lim c_n / d_n`.
    pub fn limit(&self) -> f64 {
        match *self {
            Prop13Schedule::Target { s, .. } => s,
            Prop13Schedule::Linear { c_step, d_step, .. } => c_step as f64 / d_step as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Prop13Schedule::Target { s, .. } => {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidParameter(format!("target dimension {s} outside [0, 1]")));
                }
            }
            Prop13Schedule::Linear { c0, c_step, d0, d_step } => {
                if d_step == 0 || c_step == 0 || c_step > d_step || c0 + c_step > d0 + d_step || c0 > d0 {
                    return Err(Error::InvalidParameter(
                        "linear schedule needs 1 <= c_step <= d_step and c_n <= d_n".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recipe {
    Prop11,
    Corollary { degree: u32 },
    Prop13 { schedule: Prop13Schedule },
}

impl Recipe {
    /// Degree of the polynomial `x^d` applied to `A`.
    pub fn degree(&self) -> u32 {
        match self {
            Recipe::Corollary { degree } => *degree,
            _ => 2,
        }
    }

    /// The element of `A` recorded by `rec`.
    pub fn element(&self, rec: &ElementRecord, b: Alphabet) -> Natural {
        match self {
            Recipe::Prop13 { .. } => &rec.witness * b.pow(rec.shift),
            _ => b.pow(rec.shift) + &rec.witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub stage: u32,
    #[serde(with = "nat_string")]
    pub witness: Natural,
    /// Digits of the witness.
    pub len: u64,
    /// Slot width `i` for `b^i + n`, or the zero count `d_n - c_n`.
    pub shift: u64,
    pub layout: Vec<Slot>,
    pub image_layout: Vec<Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    /// Index of the element cut short.
    pub element: usize,
    pub kept: u64,
    pub len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroPoint {
    pub position: u64,
    /// Padding zeros among the first `position` digits.
    pub zeros: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub digits: u64,
    pub truncated: Option<Truncation>,
    pub zero_trace: Vec<ZeroPoint>,
}

impl StreamReport {
    /// `z(n)/n` at the end of the stream.
    pub fn zero_density(&self) -> f64 {
        self.zero_trace.last().map_or(0.0, |p| {
            if p.position == 0 {
                0.0
            } else {
                p.zeros as f64 / p.position as f64
            }
        })
    }

    fn build<'a>(layouts: impl Iterator<Item = &'a [Slot]>, budget: u64) -> Result<StreamReport> {
        let layouts: Vec<&[Slot]> = layouts.collect();
        let total: u64 = layouts.iter().map(|l| layout_len(l)).sum();
        let end = total.min(budget);
        let mut checkpoints = CheckpointSchedule::default().positions(end)?;
        if checkpoints.last() != Some(&end) {
            checkpoints.push(end);
        }
        let mut cps = checkpoints.into_iter().peekable();
        let mut trace = Vec::new();
        let (mut pos, mut zeros) = (0u64, 0u64);
        let mut truncated = None;
        for (e, layout) in layouts.iter().enumerate() {
            if pos >= end {
                break;
            }
            let start = pos;
            for &Slot(kind, len) in layout.iter() {
                while let Some(&cp) = cps.peek() {
                    if cp > pos + len {
                        break;
                    }
                    let extra = if kind == SlotKind::Pad { cp - pos } else { 0 };
                    trace.push(ZeroPoint {
                        position: cp,
                        zeros: zeros + extra,
                    });
                    cps.next();
                }
                if kind == SlotKind::Pad {
                    zeros += len;
                }
                pos += len;
            }
            if pos > end {
                truncated = Some(Truncation {
                    element: e,
                    kept: end - start,
                    len: pos - start,
                });
            }
        }
        // the zero-length stream still gets its single checkpoint
        for cp in cps {
            trace.push(ZeroPoint { position: cp, zeros });
        }
        Ok(StreamReport {
            digits: end,
            truncated,
            zero_trace: trace,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageThreshold {
    pub stage: u32,
    pub threshold: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub recipe: Recipe,
    pub base: Alphabet,
    pub budget: u64,
    pub thresholds: Vec<StageThreshold>,
    pub elements: Vec<ElementRecord>,
    /// `CE_b(A)`.
    pub a: StreamReport,
    /// `CE_b(x^d(A))`.
    pub image: StreamReport,
    pub audit: Vec<AuditEntry>,
}

impl ConstructionReport {
    pub fn stream(&self, which: Which) -> &StreamReport {
        match which {
            Which::A => &self.a,
            Which::Image => &self.image,
        }
    }

    pub fn layouts(&self, which: Which) -> impl Iterator<Item = &[Slot]> {
        self.elements.iter().map(move |e| match which {
            Which::A => e.layout.as_slice(),
            Which::Image => e.image_layout.as_slice(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Rebuilds every element from its record and checks both expansions
    /// against their layouts with exact arithmetic.
    pub fn verify_slots(&self) -> Result<usize> {
        let b = self.base;
        let d = self.recipe.degree();
        for rec in &self.elements {
            let value = self.recipe.element(rec, b);
            let image = Pow::pow(&value, d);
            match self.recipe {
                Recipe::Prop13 { .. } => {
                    check_slot_integrity(&value, &rec.layout, std::slice::from_ref(&rec.witness), b)?;
                    let sq = Pow::pow(&rec.witness, 2u32);
                    check_slot_integrity(&image, &rec.image_layout, &[sq], b)?;
                }
                _ => {
                    let (layout, payloads) = binomial_layout(&rec.witness, rec.shift, 1, b)?;
                    if layout != rec.layout {
                        return Err(Error::IntegrityError(format!("recorded layout of {value} is stale")));
                    }
                    check_slot_integrity(&value, &layout, &payloads, b)?;
                    let (layout, payloads) = binomial_layout(&rec.witness, rec.shift, d, b)?;
                    if layout != rec.image_layout {
                        return Err(Error::IntegrityError(format!(
                            "recorded image layout of {value} is stale"
                        )));
                    }
                    check_slot_integrity(&image, &layout, &payloads, b)?;
                }
            }
        }
        Ok(self.elements.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    A,
    Image,
}

/// A built set, its image under `x^d`, and the report.
#[derive(Debug, Clone)]
pub struct Construction {
    pub set: ExplicitSet,
    pub image: ExplicitSet,
    pub report: ConstructionReport,
}

impl Construction {
    /// The Copeland-Erdős stream, cut at the digit budget.
    pub fn ce_digits(&self, which: Which) -> Result<DigitString> {
        let b = self.report.base;
        let values = match which {
            Which::A => self.set.as_slice(),
            Which::Image => self.image.as_slice(),
        };
        let limit = self.report.stream(which).digits as usize;
        let mut out = Vec::with_capacity(limit);
        for v in values {
            if out.len() >= limit {
                break;
            }
            out.extend(expand(v, b));
        }
        out.truncate(limit);
        DigitString::new(b, out)
    }

    pub fn ce_source(&self, which: Which) -> Result<SharedSource> {
        Ok(Arc::new(FixedDigits(self.ce_digits(which)?)))
    }
}

// ---------------------------------------------------------------------------
// Stage thresholds

struct Stages {
    base: Alphabet,
    targets: Vec<Target>,
    opts: ThresholdOptions,
    first: u32,
    cached: Vec<u64>,
    known: Vec<u64>,
    pending: Option<ThresholdFinder>,
}

impl Stages {
    fn new(spec: &StagedSpec, targets: Vec<Target>) -> Self {
        Stages {
            base: spec.base,
            targets,
            opts: spec.thresholds,
            first: spec.first_stage,
            cached: spec.cached_thresholds.clone(),
            known: Vec::new(),
            pending: None,
        }
    }

    fn next_stage(&self) -> u32 {
        self.first + self.known.len() as u32
    }

    fn finder(&mut self) -> &mut ThresholdFinder {
        let stage = self.next_stage();
        let start = self.known.last().copied().unwrap_or(self.opts.start);
        let (base, targets, opts) = (self.base, self.targets.clone(), self.opts);
        self.pending.get_or_insert_with(|| {
            ThresholdFinder::new(
                NormalityParams::stage(stage, base),
                targets,
                ThresholdOptions { start, ..opts },
            )
        })
    }

    fn first_threshold(&mut self) -> Result<u64> {
        if self.known.is_empty() {
            if let Some(&t) = self.cached.first() {
                self.known.push(t);
            } else {
                let max_len = self.opts.max_len;
                let t = self
                    .finder()
                    .advance(max_len)
                    .ok_or(Error::ThresholdNotFound { max_len })?;
                self.pending = None;
                self.known.push(t);
            }
        }
        Ok(self.known[0])
    }

    /// The largest stage whose threshold is at most `limit`.
    fn stage_at_most(&mut self, limit: u64) -> Option<u32> {
        loop {
            let idx = self.known.len();
            if let Some(&t) = self.cached.get(idx) {
                if t > limit {
                    break;
                }
                self.known.push(t);
                continue;
            }
            let f = self.finder();
            if f.exceeds(limit.saturating_add(1)) {
                break;
            }
            let t = f.threshold().expect("threshold established below limit");
            self.pending = None;
            self.known.push(t);
        }
        (!self.known.is_empty()).then(|| self.first + self.known.len() as u32 - 1)
    }

    fn report(&self) -> Vec<StageThreshold> {
        self.known
            .iter()
            .enumerate()
            .map(|(i, &threshold)| StageThreshold {
                stage: self.first + i as u32,
                threshold,
            })
            .collect()
    }
}

fn stage_witness(len: u64, stage: u32, base: Alphabet, targets: &[Target], search: WitnessSearch) -> Result<Witness> {
    find_witness(len, &NormalityParams::stage(stage, base), targets, search).map_err(|e| match e {
        Error::WitnessNotFound { len, tried } => Error::StageFailed { stage, len, tried },
        e => e,
    })
}

fn reverify(n: &Natural, stage: u32, base: Alphabet, targets: &[Target]) -> Result<()> {
    let params = NormalityParams::stage(stage, base);
    for t in targets {
        if !is_ek_normal(&t.apply(n), &params) {
            return Err(Error::IntegrityError(format!(
                "witness {n} fails target {t} at stage {stage}"
            )));
        }
    }
    Ok(())
}

fn budget_reached(spec: &StagedSpec, elements: usize, a_len: u64, image_len: u64) -> bool {
    spec.max_elements.is_some_and(|m| elements as u64 >= m) || (a_len >= spec.digits && image_len >= spec.digits)
}

fn finish(
    recipe: Recipe,
    spec: &StagedSpec,
    stages: &Stages,
    elements: Vec<ElementRecord>,
    set: Vec<Natural>,
    image: Vec<Natural>,
    audit: Vec<AuditEntry>,
) -> Result<Construction> {
    let a = StreamReport::build(elements.iter().map(|e| e.layout.as_slice()), spec.digits)?;
    let img = StreamReport::build(elements.iter().map(|e| e.image_layout.as_slice()), spec.digits)?;
    Ok(Construction {
        set: ExplicitSet::new(set)?,
        image: ExplicitSet::new(image)?,
        report: ConstructionReport {
            recipe,
            base: spec.base,
            budget: spec.digits,
            thresholds: stages.report(),
            elements,
            a,
            image: img,
            audit,
        },
    })
}

// ---------------------------------------------------------------------------
// Builders

/// Targets whose normality a degree-d witness needs: `n` and every
/// `C(d,j) n^j`.
pub fn binomial_targets(d: u32) -> Vec<Target> {
    let mut targets = vec![Target::N];
    for j in 1..=d {
        let c = binomial(d, j);
        let coeff = u64::try_from(c).expect("binomial coefficient fits u64");
        let t = Target { coeff, power: j };
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    targets
}

/// Smallest slot width `i > d l + |σ_b(C(d, ⌊d/2⌋))|`.
pub fn corollary_slot_width(len: u64, d: u32, b: Alphabet) -> u64 {
    u64::from(d) * len + digit_length(&binomial(d, d / 2), b) + 1
}

pub fn build_prop11(spec: &StagedSpec) -> Result<Construction> {
    build_binomial(spec, Recipe::Prop11)
}

pub fn build_corollary_d(spec: &StagedSpec, d: u32) -> Result<Construction> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("degree must be >= 2, got {d}")));
    }
    build_binomial(spec, Recipe::Corollary { degree: d })
}

fn build_binomial(spec: &StagedSpec, recipe: Recipe) -> Result<Construction> {
    spec.validate()?;
    let b = spec.base;
    let d = recipe.degree();
    let targets = binomial_targets(d);
    let mut stages = Stages::new(spec, targets.clone());
    let mut len = stages.first_threshold()?;
    let (mut elements, mut set, mut image) = (Vec::new(), Vec::new(), Vec::new());
    let (mut a_len, mut image_len) = (0u64, 0u64);
    while !budget_reached(spec, elements.len(), a_len, image_len) {
        let stage = stages.stage_at_most(len).expect("length is past the first threshold");
        let witness = stage_witness(len, stage, b, &targets, spec.witness)?;
        let n = witness.n;
        reverify(&n, stage, b, &targets)?;
        let i = match recipe {
            Recipe::Prop11 => 2 * len,
            _ => corollary_slot_width(len, d, b),
        };
        let value = b.pow(i) + &n;
        let (layout, payloads) = binomial_layout(&n, i, 1, b)?;
        check_slot_integrity(&value, &layout, &payloads, b)?;
        let power = Pow::pow(&value, d);
        let (image_layout, payloads) = binomial_layout(&n, i, d, b)?;
        check_slot_integrity(&power, &image_layout, &payloads, b)?;
        a_len += layout_len(&layout);
        image_len += layout_len(&image_layout);
        elements.push(ElementRecord {
            stage,
            witness: n,
            len,
            shift: i,
            layout,
            image_layout,
        });
        set.push(value);
        image.push(power);
        len += 1;
    }
    finish(recipe, spec, &stages, elements, set, image, Vec::new())
}

fn reseed(search: WitnessSearch, k: u64) -> WitnessSearch {
    let order = match search.order {
        SearchOrder::Sampled { seed } => SearchOrder::Sampled {
            seed: seed.wrapping_add(k),
        },
        SearchOrder::Auto { seed } => SearchOrder::Auto {
            seed: seed.wrapping_add(k),
        },
        o => o,
    };
    WitnessSearch { order, ..search }
}

/// Elements `m b^(d_n - c_n)` with `m` of exactly `c_n` digits and `m`, `m^2`
/// normal for the largest stage whose threshold is below `c_n` (the first
/// stage while no threshold is). Thresholds are those of the degree-2
/// construction. The sampling seed is offset by `n` so equal lengths get
/// different witnesses.
pub fn build_prop13(schedule: &Prop13Schedule, spec: &StagedSpec) -> Result<Construction> {
    spec.validate()?;
    schedule.validate()?;
    let b = spec.base;
    let mut stages = Stages::new(spec, binomial_targets(2));
    let targets = [Target::N, Target::N_SQUARED];
    let (mut elements, mut set, mut image): (Vec<ElementRecord>, Vec<Natural>, Vec<Natural>) =
        (Vec::new(), Vec::new(), Vec::new());
    let mut audit = Vec::new();
    let (mut a_len, mut image_len) = (0u64, 0u64);
    let mut n = 0u64;
    while !budget_reached(spec, elements.len(), a_len, image_len) {
        n += 1;
        let (c, d) = schedule.pair(n);
        if c == 0 || c > d {
            return Err(Error::InvalidParameter(format!(
                "schedule gives c_{n} = {c}, d_{n} = {d}"
            )));
        }
        let stage = stages.stage_at_most(c - 1).unwrap_or(spec.first_stage);
        let w = stage_witness(c, stage, b, &targets, reseed(spec.witness, n))?;
        reverify(&w.n, stage, b, &targets)?;
        let shift = d - c;
        let value = &w.n * b.pow(shift);
        if set.last().is_some_and(|prev| &value <= prev) {
            audit.push(AuditEntry {
                index: n,
                reason: format!("element for n = {n} does not exceed its predecessor; skipped"),
            });
            continue;
        }
        let square = Pow::pow(&w.n, 2u32);
        let sq_len = digit_length(&square, b);
        let mut layout = vec![Slot(SlotKind::Payload, c)];
        let mut image_layout = vec![Slot(SlotKind::Payload, sq_len)];
        if shift > 0 {
            layout.push(Slot(SlotKind::Pad, shift));
            image_layout.push(Slot(SlotKind::Pad, 2 * shift));
        }
        let power = Pow::pow(&value, 2u32);
        check_slot_integrity(&value, &layout, std::slice::from_ref(&w.n), b)?;
        check_slot_integrity(&power, &image_layout, &[square], b)?;
        a_len += layout_len(&layout);
        image_len += layout_len(&image_layout);
        elements.push(ElementRecord {
            stage,
            witness: w.n,
            len: c,
            shift,
            layout,
            image_layout,
        });
        set.push(value);
        image.push(power);
    }
    finish(
        Recipe::Prop13 {
            schedule: schedule.clone(),
        },
        spec,
        &stages,
        elements,
        set,
        image,
        audit,
    )
}

// ---------------------------------------------------------------------------
// Stripping

/// A construction stream with markers and padding removed, leaving the
/// concatenated payloads.
pub struct Stripped {
    source: SharedSource,
    layouts: Arc<Vec<Vec<Slot>>>,
    digits: u64,
}

pub fn strip_padding(seq: SharedSource, report: &ConstructionReport, which: Which) -> Result<Stripped> {
    if seq.alphabet() != report.base {
        return Err(Error::IntegrityError(format!(
            "sequence is base {}, report is base {}",
            seq.alphabet(),
            report.base
        )));
    }
    Ok(Stripped {
        source: seq,
        layouts: Arc::new(report.layouts(which).map(<[Slot]>::to_vec).collect()),
        digits: report.stream(which).digits,
    })
}

impl SequenceSource for Stripped {
    fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    fn digits(&self) -> DigitIter<'_> {
        if self.layouts.is_empty() {
            return self.source.digits();
        }
        let mut src = self.source.digits();
        let slots = self.layouts.iter().flatten().copied().filter(|s| s.1 > 0);
        let mut slots = slots.peekable();
        let mut left = 0u64;
        let mut pos = 0u64;
        let limit = self.digits;
        let mut failed = false;
        Box::new(std::iter::from_fn(move || loop {
            if failed {
                return None;
            }
            let d = match src.next() {
                None if pos == limit => return None,
                None => {
                    failed = true;
                    return Some(Err(Error::IntegrityError(format!(
                        "sequence ends at {pos}, report expects {limit} digits"
                    ))));
                }
                Some(Err(e)) => return Some(Err(e)),
                Some(Ok(d)) => d,
            };
            if pos >= limit {
                failed = true;
                return Some(Err(Error::IntegrityError(format!(
                    "sequence is longer than the {limit} reported digits"
                ))));
            }
            if left == 0 {
                // consumed only when a digit needs it
                let Some(&Slot(_, len)) = slots.peek() else {
                    failed = true;
                    return Some(Err(Error::IntegrityError(
                        "layouts exhausted before the sequence".into(),
                    )));
                };
                left = len;
            }
            let kind = slots.peek().expect("checked above").0;
            left -= 1;
            if left == 0 {
                slots.next();
            }
            pos += 1;
            match kind {
                SlotKind::Payload => return Some(Ok(d)),
                SlotKind::Marker if d != 1 => {
                    failed = true;
                    return Some(Err(Error::IntegrityError(format!(
                        "digit {d} at {} is not a marker",
                        pos - 1
                    ))));
                }
                SlotKind::Pad if d != 0 => {
                    failed = true;
                    return Some(Err(Error::IntegrityError(format!(
                        "digit {d} at {} is not padding",
                        pos - 1
                    ))));
                }
                _ => continue,
            }
        }))
    }
}

// ---------------------------------------------------------------------------
// Prefix sets of a real number

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop7Config {
    pub cuts: GrowthPolicy,
    /// Digit budget for each Copeland-Erdős stream.
    pub digits: u64,
    pub max_block: usize,
    pub burn_in: f64,
    pub checkpoints: CheckpointSchedule,
}

impl Default for Prop7Config {
    fn default() -> Self {
        Prop7Config {
            cuts: GrowthPolicy::geometric(2.0),
            digits: 100_000,
            max_block: 4,
            burn_in: DEFAULT_BURN_IN,
            checkpoints: CheckpointSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub position: u64,
    pub count: u64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop7Report {
    pub base: Alphabet,
    pub budget: u64,
    pub cuts: Vec<u64>,
    pub a_truncated: Option<Truncation>,
    pub image_truncated: Option<Truncation>,
    /// Positions of `CE_b(cA)` where `σ_b(⌊c a_i⌋)` differs from the
    /// leading digits of `c α`.
    pub disagreements: u64,
    pub density: f64,
    pub trace: Vec<DensityPoint>,
    /// Whether the trace density strictly decreases.
    pub decreasing: bool,
    pub dim_a: DimensionEstimate<f64>,
    pub dim_image: DimensionEstimate<f64>,
}

#[derive(Debug, Clone)]
pub struct Prop7Demo {
    pub set: ExplicitSet,
    pub image: ExplicitSet,
    pub a_digits: DigitString,
    pub image_digits: DigitString,
    pub report: Prop7Report,
}

/// Cut lengths whose concatenated prefixes first reach `budget` digits.
fn demo_cuts(alpha: &SharedSource, policy: &GrowthPolicy, budget: u64) -> Result<Vec<u64>> {
    let pc = prefix_concat(alpha.clone(), policy.clone())?;
    let mut count = 64;
    loop {
        let lengths = pc.cut_lengths(count)?;
        let mut total = 0u64;
        let mut out = Vec::new();
        for &m in &lengths {
            out.push(m);
            total += m;
            if total >= budget {
                return Ok(out);
            }
        }
        if lengths.len() < count {
            return Ok(out);
        }
        count *= 2;
    }
}

fn truncation(lengths: &[u64], budget: u64) -> (Option<Truncation>, u64) {
    let mut pos = 0;
    for (e, &len) in lengths.iter().enumerate() {
        if pos + len > budget {
            return (
                Some(Truncation {
                    element: e,
                    kept: budget - pos,
                    len,
                }),
                budget,
            );
        }
        pos += len;
    }
    (None, pos)
}

/// `A = {σ_b(α)[0..n_i)}` read as naturals and `cA = {⌊c a⌋}`, with the
/// density of digits of `CE_b(cA)` that disagree with `c α`.
pub fn prop7_demo(alpha: SharedSource, c: &RealCoefficient, cfg: &Prop7Config) -> Result<Prop7Demo> {
    let b = alpha.alphabet();
    if cfg.digits == 0 {
        return Err(Error::InvalidParameter("digit budget must be positive".into()));
    }
    let mut cuts = demo_cuts(&alpha, &cfg.cuts, cfg.digits)?;
    let longest = cuts.iter().copied().max().unwrap_or(0);
    let alpha_digits: Vec<Digit> = alpha.digits().take(longest as usize).collect::<Result<_>>()?;
    match alpha_digits.first() {
        None => return Err(Error::EmptyDigits),
        Some(0) => {
            return Err(Error::InvalidParameter(
                "the expansion of alpha must begin with a nonzero digit".into(),
            ))
        }
        Some(_) => {}
    }
    // a finite alpha ends the cuts at its length
    let avail = alpha_digits.len() as u64;
    if let Some(p) = cuts.iter().position(|&m| m >= avail) {
        cuts.truncate(p + 1);
        cuts[p] = avail;
        if p > 0 && cuts[p - 1] >= avail {
            cuts.pop();
        }
    }
    let set: Vec<Natural> = cuts
        .iter()
        .map(|&m| value_of(b, &alpha_digits[..m as usize]))
        .collect::<Result<_>>()?;
    let linear = Poly::new(vec![
        RealCoefficient::Exact(Rational::from_integer(0.into())),
        c.clone(),
    ])?;
    let image: Vec<Natural> = set.iter().map(|a| eval_floor(&linear, a)).collect::<Result<_>>()?;
    let image_expansions: Vec<Vec<Digit>> = image.iter().map(|v| expand(v, b)).collect();
    let widest = image_expansions.iter().map(Vec::len).max().unwrap_or(0);
    let c_alpha = scaled_expansion(c, &*alpha, widest, EvalOptions::default())?;

    let a_lengths: Vec<u64> = cuts.clone();
    let image_lengths: Vec<u64> = image_expansions.iter().map(|e| e.len() as u64).collect();
    let (a_truncated, a_end) = truncation(&a_lengths, cfg.digits);
    let (image_truncated, image_end) = truncation(&image_lengths, cfg.digits);

    let mut a_digits = Vec::with_capacity(a_end as usize);
    for &m in &cuts {
        a_digits.extend_from_slice(&alpha_digits[..m as usize]);
    }
    a_digits.truncate(a_end as usize);
    let mut image_digits = Vec::with_capacity(image_end as usize);
    let mut mismatch_at = Vec::new();
    for e in &image_expansions {
        for (j, &d) in e.iter().enumerate() {
            if d != c_alpha[j] {
                mismatch_at.push(image_digits.len() as u64);
            }
            image_digits.push(d);
        }
    }
    image_digits.truncate(image_end as usize);
    mismatch_at.retain(|&p| p < image_end);

    let mut positions = cfg.checkpoints.positions(image_end)?;
    if positions.last() != Some(&image_end) {
        positions.push(image_end);
    }
    let trace: Vec<DensityPoint> = positions
        .iter()
        .filter(|&&p| p > 0)
        .map(|&p| {
            let count = mismatch_at.partition_point(|&m| m < p) as u64;
            DensityPoint {
                position: p,
                count,
                density: count as f64 / p as f64,
            }
        })
        .collect();
    let decreasing = trace.windows(2).all(|w| w[1].density < w[0].density);
    let a_digits = DigitString::new(b, a_digits)?;
    let image_digits = DigitString::new(b, image_digits)?;
    let dim = |s: &DigitString| -> Result<DimensionEstimate<f64>> {
        let prof = profile::<f64>(&FixedDigits(s.clone()), cfg.max_block, &cfg.checkpoints, s.len() as u64)?;
        estimate_dim(&prof, cfg.burn_in)
    };
    let report = Prop7Report {
        base: b,
        budget: cfg.digits,
        cuts,
        a_truncated,
        image_truncated,
        disagreements: mismatch_at.len() as u64,
        density: if image_end == 0 {
            0.0
        } else {
            mismatch_at.len() as f64 / image_end as f64
        },
        trace,
        decreasing,
        dim_a: dim(&a_digits)?,
        dim_image: dim(&image_digits)?,
    };
    Ok(Prop7Demo {
        set: ExplicitSet::new(set)?,
        image: ExplicitSet::new(image)?,
        a_digits,
        image_digits,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{count_blocks, prop8_entropy};
    use crate::sequences::{ce_sequence, Naturals};
    use rand::{Rng, SeedableRng};

    fn nat(v: u64) -> Natural {
        BigUint::from(v)
    }

    fn small_spec(b: u32, digits: u64) -> StagedSpec {
        StagedSpec::new(Alphabet::new(b).unwrap(), digits)
    }

    #[test]
    fn binomials() {
        let row: Vec<Natural> = (0..=5).map(|j| binomial(5, j)).collect();
        assert_eq!(row, [1u64, 5, 10, 10, 5, 1].map(nat));
        assert_eq!(binomial_targets(2), [Target::N, Target::TWO_N, Target::N_SQUARED]);
        assert_eq!(binomial_targets(3).len(), 4);
    }

    #[test]
    fn cube_layout_example() {
        let b = Alphabet::DECIMAL;
        let value = b.pow(20) + nat(7);
        let cube = Pow::pow(&value, 3u32);
        let (layout, payloads) = binomial_layout(&nat(7), 20, 3, b).unwrap();
        assert_eq!(payloads, [nat(21), nat(147), nat(343)]);
        let expected = format!("1{}21{}147{}343", "0".repeat(18), "0".repeat(17), "0".repeat(17));
        assert_eq!(crate::digits::sigma_b(&cube, b).to_text().unwrap(), expected);
        check_slot_integrity(&cube, &layout, &payloads, b).unwrap();
    }

    #[test]
    fn square_layouts_match_big_integer_expansion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let b = Alphabet::new(rng.gen_range(2..=16)).unwrap();
            let l = rng.gen_range(1..40u64);
            let digits: Vec<Digit> = (0..l)
                .map(|i| {
                    if i == 0 {
                        rng.gen_range(1..b.base())
                    } else {
                        rng.gen_range(0..b.base())
                    }
                })
                .collect();
            let n = value_of(b, &digits).unwrap();
            let i = rng.gen_range(2 * l..3 * l + 2);
            let sq = Pow::pow(&(b.pow(i) + &n), 2u32);
            let (layout, payloads) = binomial_layout(&n, i, 2, b).unwrap();
            check_slot_integrity(&sq, &layout, &payloads, b).unwrap();
            assert_eq!(layout_len(&layout), 2 * i + 1);
        }
    }

    #[test]
    fn overlapping_slots_are_rejected() {
        let b = Alphabet::DECIMAL;
        // 99^2 = 9801 needs four digits
        assert!(matches!(
            binomial_layout(&nat(99), 3, 2, b),
            Err(Error::IntegrityError(_))
        ));
        let (layout, payloads) = binomial_layout(&nat(5), 3, 2, b).unwrap();
        let wrong = Pow::pow(&(b.pow(3) + nat(6)), 2u32);
        assert!(check_slot_integrity(&wrong, &layout, &payloads, b).is_err());
    }

    #[test]
    fn first_stage_at_epsilon_one() {
        for b in [2u32, 3, 10] {
            let mut spec = small_spec(b, 1);
            spec.first_stage = 0;
            spec.max_elements = Some(1);
            let c = build_prop11(&spec).unwrap();
            assert_eq!(c.set.as_slice()[0], nat(u64::from(b * b + 1)));
            assert_eq!(c.report.thresholds[0], StageThreshold { stage: 0, threshold: 1 });
        }
    }

    #[test]
    fn corollary_needs_degree_two() {
        assert!(matches!(
            build_corollary_d(&small_spec(2, 100), 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    fn recount(c: &Construction, which: Which) -> (u64, u64) {
        let digits = c.ce_digits(which).unwrap();
        let mut zeros = 0;
        let mut pos = 0usize;
        let d = digits.digits();
        'outer: for layout in c.report.layouts(which) {
            for &Slot(kind, len) in layout {
                for _ in 0..len {
                    if pos == d.len() {
                        break 'outer;
                    }
                    match kind {
                        SlotKind::Marker => assert_eq!(d[pos], 1),
                        SlotKind::Pad => {
                            assert_eq!(d[pos], 0);
                            zeros += 1;
                        }
                        SlotKind::Payload => {}
                    }
                    pos += 1;
                }
            }
        }
        (zeros, pos as u64)
    }

    #[test]
    fn prop11_small_build() {
        let spec = small_spec(2, 20_000);
        let c = build_prop11(&spec).unwrap();
        let r = &c.report;
        assert_eq!(r.a.digits, 20_000);
        assert_eq!(r.image.digits, 20_000);
        assert_eq!(r.verify_slots().unwrap(), r.elements.len());
        for which in [Which::A, Which::Image] {
            let (zeros, len) = recount(&c, which);
            assert_eq!(len, r.stream(which).digits);
            assert_eq!(zeros, r.stream(which).zero_trace.last().unwrap().zeros);
        }
        // consecutive lengths, strictly increasing values
        for w in r.elements.windows(2) {
            assert_eq!(w[1].len, w[0].len + 1);
            assert!(w[1].stage >= w[0].stage);
        }
        for e in &r.elements {
            reverify(&e.witness, e.stage, spec.base, &binomial_targets(2)).unwrap();
            let t = r.thresholds.iter().find(|t| t.stage == e.stage).unwrap();
            assert!(e.len >= t.threshold);
        }
        assert!((r.a.zero_density() - 0.5).abs() < 0.05, "{}", r.a.zero_density());
        assert!(
            (r.image.zero_density() - 0.25).abs() < 0.05,
            "{}",
            r.image.zero_density()
        );
    }

    #[test]
    fn zero_trace_matches_prefix_recounts() {
        let c = build_prop13(&Prop13Schedule::target(0.5), &small_spec(2, 5000)).unwrap();
        for which in [Which::A, Which::Image] {
            let digits = c.ce_digits(which).unwrap();
            for p in &c.report.stream(which).zero_trace {
                let prefix = Construction {
                    report: ConstructionReport {
                        a: StreamReport {
                            digits: p.position,
                            ..c.report.a.clone()
                        },
                        image: StreamReport {
                            digits: p.position,
                            ..c.report.image.clone()
                        },
                        ..c.report.clone()
                    },
                    ..c.clone()
                };
                let (zeros, len) = recount(&prefix, which);
                assert_eq!(len, p.position);
                assert_eq!(zeros, p.zeros);
                assert!(len as usize <= digits.len());
            }
        }
    }

    #[test]
    fn builders_are_deterministic() {
        let spec = small_spec(10, 5000);
        let a = build_prop11(&spec).unwrap();
        let b = build_prop11(&spec).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.set.as_slice(), b.set.as_slice());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| build_prop11(&spec).unwrap());
        assert_eq!(a.report, c.report);
        let s = Prop13Schedule::target(0.3);
        assert_eq!(
            build_prop13(&s, &spec).unwrap().report,
            pool.install(|| build_prop13(&s, &spec).unwrap()).report
        );
    }

    #[test]
    fn cached_thresholds_are_used() {
        let spec = small_spec(2, 3000);
        let fresh = build_prop11(&spec).unwrap();
        let cached = StagedSpec {
            cached_thresholds: fresh.report.thresholds.iter().map(|t| t.threshold).collect(),
            ..spec
        };
        let again = build_prop11(&cached).unwrap();
        assert_eq!(again.set.as_slice(), fresh.set.as_slice());
    }

    #[test]
    fn corollary_cubes() {
        for b in [2u32, 10] {
            let mut spec = small_spec(b, u64::MAX);
            spec.max_elements = Some(30);
            let c = build_corollary_d(&spec, 3).unwrap();
            assert_eq!(c.report.elements.len(), 30);
            assert_eq!(c.report.verify_slots().unwrap(), 30);
            for (e, v) in c.report.elements.iter().zip(c.set.as_slice()) {
                assert_eq!(e.shift, corollary_slot_width(e.len, 3, spec.base));
                assert_eq!(&c.report.recipe.element(e, spec.base), v);
            }
        }
    }

    #[test]
    fn prop13_schedules() {
        let s = Prop13Schedule::target(0.5);
        assert_eq!(s.pair(1), (9, 17));
        assert_eq!(s.pair(2), (9, 18));
        assert!(Prop13Schedule::target(1.5).validate().is_err());
        let half = Prop13Schedule::Linear {
            c0: 0,
            c_step: 1,
            d0: 0,
            d_step: 2,
        };
        half.validate().unwrap();
        assert_eq!(half.limit(), 0.5);
        let c = build_prop13(&half, &small_spec(2, 20_000)).unwrap();
        assert!((c.report.a.zero_density() - 0.5).abs() < 0.02);
        assert!((c.report.image.zero_density() - 0.5).abs() < 0.02);
        c.report.verify_slots().unwrap();
        assert!(c.report.audit.is_empty());
    }

    #[test]
    fn prop13_full_dimension_has_no_padding() {
        let one = Prop13Schedule::Linear {
            c0: 0,
            c_step: 1,
            d0: 0,
            d_step: 1,
        };
        let c = build_prop13(&one, &small_spec(2, 5000)).unwrap();
        assert_eq!(c.report.a.zero_trace.last().unwrap().zeros, 0);
        assert_eq!(c.report.image.zero_trace.last().unwrap().zeros, 0);
        for e in &c.report.elements {
            assert!(e.layout.iter().all(|s| s.0 == SlotKind::Payload));
        }
    }

    #[test]
    fn stripping() {
        let c = build_prop11(&small_spec(2, 20_000)).unwrap();
        for which in [Which::A, Which::Image] {
            let seq = c.ce_source(which).unwrap();
            let stripped = strip_padding(seq, &c.report, which).unwrap();
            let got = stripped.prefix(usize::MAX).unwrap();
            let mut expected = Vec::new();
            let values = match which {
                Which::A => c.set.as_slice(),
                Which::Image => c.image.as_slice(),
            };
            for (e, v) in c.report.elements.iter().zip(values) {
                let digits = expand(v, c.report.base);
                let layout = match which {
                    Which::A => &e.layout,
                    Which::Image => &e.image_layout,
                };
                let mut pos = 0;
                for &Slot(kind, len) in layout {
                    if kind == SlotKind::Payload {
                        expected.extend_from_slice(&digits[pos..pos + len as usize]);
                    }
                    pos += len as usize;
                }
            }
            let kept = got.len();
            assert_eq!(got.digits(), &expected[..kept]);
            assert!(kept > 0);
        }
        // empty report: identity
        let empty = ConstructionReport {
            elements: Vec::new(),
            ..c.report.clone()
        };
        let src: SharedSource = Arc::new(FixedDigits(DigitString::parse(Alphabet::BINARY, "0110").unwrap()));
        let same = strip_padding(src, &empty, Which::A).unwrap();
        assert_eq!(same.prefix(10).unwrap().to_text().unwrap(), "0110");
    }

    #[test]
    fn stripping_detects_mismatch() {
        let c = build_prop11(&small_spec(2, 2000)).unwrap();
        let mut digits = c.ce_digits(Which::A).unwrap().into_digits();
        // the second digit of the first element is padding
        digits[1] = 1;
        let bad: SharedSource = Arc::new(FixedDigits(DigitString::new(Alphabet::BINARY, digits).unwrap()));
        let stripped = strip_padding(bad, &c.report, Which::A).unwrap();
        assert!(matches!(stripped.prefix(5000), Err(Error::IntegrityError(_))));
        let head = c.ce_digits(Which::A).unwrap().digits()[..100].to_vec();
        let short: SharedSource = Arc::new(FixedDigits(DigitString::new(Alphabet::BINARY, head).unwrap()));
        assert!(matches!(
            strip_padding(short, &c.report, Which::A).unwrap().prefix(5000),
            Err(Error::IntegrityError(_))
        ));
    }

    #[test]
    fn report_json_round_trip() {
        let c = build_prop13(&Prop13Schedule::target(0.25), &small_spec(3, 3000)).unwrap();
        let json = c.report.to_json().unwrap();
        assert_eq!(ConstructionReport::from_json(&json).unwrap(), c.report);
    }

    #[test]
    fn dilute_law_consistency() {
        let c = build_prop11(&small_spec(2, 200_000)).unwrap();
        let digits = c.ce_digits(Which::A).unwrap();
        let h8: f64 = count_blocks(digits.digits(), 8, Alphabet::BINARY)
            .unwrap()
            .entropy()
            .unwrap();
        let rho = c.report.a.zero_density();
        let predicted: f64 = prop8_entropy(rho, 8, Alphabet::BINARY);
        assert!((h8 - predicted).abs() < 0.1, "h8={h8} predicted={predicted}");
    }

    fn champernowne(b: Alphabet) -> SharedSource {
        Arc::new(ce_sequence(Arc::new(Naturals { start: 1 }), b))
    }

    #[test]
    fn prop7_identity_coefficient() {
        let alpha = champernowne(Alphabet::BINARY);
        let cfg = Prop7Config {
            digits: 5000,
            ..Prop7Config::default()
        };
        let demo = prop7_demo(alpha.clone(), &RealCoefficient::integer(1), &cfg).unwrap();
        assert_eq!(demo.report.disagreements, 0);
        let pc = prefix_concat(alpha, GrowthPolicy::geometric(2.0)).unwrap();
        assert_eq!(demo.a_digits, pc.prefix(5000).unwrap());
        assert_eq!(demo.image_digits, demo.a_digits);
    }

    #[test]
    fn prop7_requires_nonzero_lead() {
        let alpha = Arc::new(ce_sequence(Arc::new(Naturals { start: 0 }), Alphabet::BINARY));
        let err = prop7_demo(alpha, &RealCoefficient::integer(3), &Prop7Config::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn prop7_triple() {
        let cfg = Prop7Config {
            digits: 20_000,
            ..Prop7Config::default()
        };
        let demo = prop7_demo(champernowne(Alphabet::BINARY), &RealCoefficient::integer(3), &cfg).unwrap();
        let r = &demo.report;
        for (a, y) in demo.set.as_slice().iter().zip(demo.image.as_slice()) {
            assert_eq!(y, &(a * 3u32));
        }
        assert!(r.density < 0.05, "{}", r.density);
        assert_eq!(demo.a_digits.len() as u64, cfg.digits);
        assert_eq!(demo.image_digits.len() as u64, cfg.digits);
        assert!(r.a_truncated.is_some());
    }
}
