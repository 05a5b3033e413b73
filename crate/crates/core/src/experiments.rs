//! Self-contained experiments with pass/fail reports.
//!
//! Each experiment generates its own inputs, measures, and compares every
//! measurement against a fixed threshold. Nothing here reads files or uses
//! unseeded randomness.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::constructions::{
    build_prop11, build_prop13, strip_padding, Construction, Prop13Schedule, StagedSpec, Which,
};
use crate::digits::{Alphabet, Digit};
use crate::entropy::{
    count_blocks, estimate_dim, mixture_entropy, profile, prop8_entropy, CheckpointSchedule, DEFAULT_BURN_IN,
};
use crate::error::{Error, Result};
use crate::normality::{census, NormalityParams, Target};
use crate::polynomials::{image_stream, Poly};
use crate::sequences::{
    ce_sequence, collect_digits, concat_values, dilute, insert_at, primes_stream, DilutionSchedule, Fill, Naturals,
    SequenceSource, SharedSet, SharedSource, Squares,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Le,
    Lt,
    Ge,
}

impl Comparator {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Comparator::Le => measured <= threshold,
            Comparator::Lt => measured < threshold,
            Comparator::Ge => measured >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparator: Comparator,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, comparator: Comparator, threshold: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            threshold,
            comparator,
            pass: comparator.holds(measured, threshold),
        }
    }

    /// `|value - target| <= tolerance`.
    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Check::new(name, (value - target).abs(), Comparator::Le, tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub experiment: String,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_clock_ms: u64,
    /// Resolved configuration and supporting measurements.
    pub config: serde_json::Value,
}

impl VerifyReport {
    fn new(experiment: &str, checks: Vec<Check>, started: Instant, config: serde_json::Value) -> Self {
        VerifyReport {
            experiment: experiment.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            wall_clock_ms: started.elapsed().as_millis() as u64,
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Prop1,
    Prop2,
    Prop8,
    Prop9,
    Prop11,
    Prop13,
    Lemma10,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Prop1,
        Experiment::Prop2,
        Experiment::Prop8,
        Experiment::Prop9,
        Experiment::Prop11,
        Experiment::Prop13,
        Experiment::Lemma10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Prop1 => "prop1",
            Experiment::Prop2 => "prop2",
            Experiment::Prop8 => "prop8",
            Experiment::Prop9 => "prop9",
            Experiment::Prop11 => "prop11",
            Experiment::Prop13 => "prop13",
            Experiment::Lemma10 => "lemma10",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment {s:?}")))
    }
}

/// Overrides; unset fields take each experiment's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub digits: Option<u64>,
    pub rho: Option<f64>,
    pub s: Option<f64>,
    pub range: Option<u64>,
    pub max_block: Option<usize>,
    pub base: Option<u32>,
}

pub fn run(experiment: Experiment, opts: &VerifyOptions) -> Result<VerifyReport> {
    match experiment {
        Experiment::Prop1 => prop1(opts),
        Experiment::Prop2 => prop2(opts),
        Experiment::Prop8 => prop8(opts),
        Experiment::Prop9 => prop9(opts),
        Experiment::Prop11 => prop11(opts),
        Experiment::Prop13 => prop13(opts),
        Experiment::Lemma10 => lemma10(opts),
    }
}

fn alphabet(opts: &VerifyOptions, default: u32) -> Result<Alphabet> {
    Alphabet::new(opts.base.unwrap_or(default))
}

fn champernowne(b: Alphabet) -> SharedSource {
    Arc::new(ce_sequence(Arc::new(Naturals { start: 0 }), b))
}

fn entropies(s: &dyn SequenceSource, max_block: usize, limit: u64) -> Result<Vec<f64>> {
    let prof = profile::<f64>(s, max_block, &CheckpointSchedule::Explicit { positions: vec![] }, limit)?;
    Ok((1..=max_block).map(|l| prof.last(l)).collect())
}

/// Zeros inserted at the square indices leave the block entropies of
/// Champernowne's sequence unchanged.
pub fn prop1(opts: &VerifyOptions) -> Result<VerifyReport> {
    let started = Instant::now();
    let b = alphabet(opts, 2)?;
    let digits = opts.digits.unwrap_or(1_000_000);
    let l = opts.max_block.unwrap_or(4);
    let base = champernowne(b);
    let inserted = insert_at(base.clone(), Arc::new(Squares), Fill::Digit(0))?;
    let h = entropies(&*base, l, digits)?;
    let g = entropies(&inserted, l, digits)?;
    let checks = vec![Check::within(format!("|dH_{l}|"), g[l - 1], h[l - 1], 0.01)];
    let config = json!({ "base": b, "digits": digits, "block": l, "H_original": h, "H_inserted": g });
    Ok(VerifyReport::new("prop1", checks, started, config))
}

fn random_string(rng: &mut ChaCha8Rng, b: u32, lens: std::ops::Range<usize>) -> Vec<Digit> {
    let len = rng.gen_range(lens);
    // a skewed source gives a spread of entropies
    let bias: f64 = rng.gen_range(0.0..1.0);
    (0..len)
        .map(|_| if rng.gen_bool(bias) { 0 } else { rng.gen_range(0..b) })
        .collect()
}

/// Concavity of block entropy, for mixtures of distributions and for
/// concatenations.
pub fn prop2(opts: &VerifyOptions) -> Result<VerifyReport> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_mixture = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let b = *[2u32, 3, 10].get(rng.gen_range(0..3)).expect("in range");
        let alpha = Alphabet::new(b)?;
        let l = rng.gen_range(1..=4usize);
        let u = random_string(&mut rng, b, l..2000);
        let v = random_string(&mut rng, b, l..2000);
        let lambda: f64 = rng.gen_range(0.0..=1.0);
        let cu = count_blocks(&u, l, alpha)?;
        let cv = count_blocks(&v, l, alpha)?;
        let mixed: f64 = mixture_entropy(&cu, &cv, lambda)?;
        let hu: f64 = cu.entropy()?;
        let hv: f64 = cv.entropy()?;
        worst_mixture = worst_mixture.max(lambda * hu + (1.0 - lambda) * hv - mixed);
    }
    let min_len = opts.digits.unwrap_or(10_000) as usize;
    let mut worst_concat = f64::NEG_INFINITY;
    for _ in 0..50 {
        let b = *[2u32, 3, 10].get(rng.gen_range(0..3)).expect("in range");
        let alpha = Alphabet::new(b)?;
        let l = rng.gen_range(1..=4usize);
        let u = random_string(&mut rng, b, min_len..2 * min_len);
        let v = random_string(&mut rng, b, min_len..2 * min_len);
        let w: Vec<Digit> = u.iter().chain(&v).copied().collect();
        let (hu, hv, hw): (f64, f64, f64) = (
            count_blocks(&u, l, alpha)?.entropy()?,
            count_blocks(&v, l, alpha)?.entropy()?,
            count_blocks(&w, l, alpha)?.entropy()?,
        );
        let (fu, fv) = (u.len() as f64 / w.len() as f64, v.len() as f64 / w.len() as f64);
        worst_concat = worst_concat.max(fu * hu + fv * hv - hw);
    }
    let checks = vec![
        Check::new("mixture violation", worst_mixture, Comparator::Le, 1e-12),
        Check::new("concatenation violation", worst_concat, Comparator::Le, 0.01),
    ];
    let config = json!({ "mixture_trials": 1000, "concat_trials": 50, "min_len": min_len });
    Ok(VerifyReport::new("prop2", checks, started, config))
}

/// Champernowne's sequence diluted to zero-density rho has the block
/// entropies of the dilution formula and dimension about `1 - rho`.
pub fn prop8(opts: &VerifyOptions) -> Result<VerifyReport> {
    let started = Instant::now();
    let b = alphabet(opts, 2)?;
    let rho = opts.rho.unwrap_or(0.5);
    let digits = opts.digits.unwrap_or(1 << 20);
    let l = opts.max_block.unwrap_or(8);
    let diluted = dilute(champernowne(b), DilutionSchedule::GrowingRuns { rho, unit: 64 })?;
    let prof = profile::<f64>(&diluted, l, &CheckpointSchedule::default(), digits)?;
    let est = estimate_dim(&prof, DEFAULT_BURN_IN)?;
    let zeros = diluted.zero_counts(&[prof.length])?[0];
    let h1 = prof.last(1);
    let hl = prof.last(l);
    let t1: f64 = prop8_entropy(rho, 1, b);
    let tl: f64 = prop8_entropy(rho, l, b);
    let checks = vec![
        Check::within("H_1 vs formula", h1, t1, 0.02),
        Check::within(format!("H_{l} vs formula"), hl, tl, 0.05),
        Check::within(format!("dim proxy (L={l}) vs 1-rho"), est.dim_proxy, 1.0 - rho, 0.1),
    ];
    let config = json!({
        "base": b, "rho": rho, "digits": prof.length, "max_block": l,
        "H_1": h1, "H_l": hl, "formula_H_1": t1, "formula_H_l": tl,
        "dim_proxy": est.dim_proxy, "strong_dim_proxy": est.strong_dim_proxy,
        "realized_zero_density": zeros as f64 / prof.length as f64,
    });
    Ok(VerifyReport::new("prop8", checks, started, config))
}

/// An affine image of the primes has the same dimension proxy.
pub fn prop9(opts: &VerifyOptions) -> Result<VerifyReport> {
    let started = Instant::now();
    let b = alphabet(opts, 10)?;
    let range = opts.range.unwrap_or(1_000_000);
    let l = opts.max_block.unwrap_or(4);
    let primes: SharedSet = Arc::new(primes_stream(Some(range)));
    let p = Arc::new(Poly::integer(&[5, 3])?);
    let a = ce_sequence(primes.clone(), b);
    let pa = concat_values(Arc::new(image_stream(p, primes)), b);
    let dim = |s: &dyn SequenceSource| -> Result<f64> {
        let prof = profile::<f64>(s, l, &CheckpointSchedule::default(), u64::MAX)?;
        Ok(estimate_dim(&prof, DEFAULT_BURN_IN)?.dim_proxy)
    };
    let (da, dp) = (dim(&a)?, dim(&pa)?);
    let checks = vec![Check::within("|dim(A) - dim(p(A))|", da, dp, 0.05)];
    let config = json!({ "base": b, "range": range, "polynomial": "3x+5", "max_block": l, "dim_A": da, "dim_pA": dp });
    Ok(VerifyReport::new("prop9", checks, started, config))
}

fn stripped_entropy(c: &Construction, which: Which, l: usize) -> Result<f64> {
    let stripped = strip_padding(c.ce_source(which)?, &c.report, which)?;
    let digits = collect_digits(&stripped, usize::MAX)?;
    count_blocks(&digits, l, c.report.base)?.entropy()
}

fn ce_entropy(c: &Construction, which: Which, l: usize) -> Result<f64> {
    count_blocks(c.ce_digits(which)?.digits(), l, c.report.base)?.entropy()
}

/// The degree-2 construction: half padding in `CE(A)`, a quarter in
/// `CE(x^2(A))`.
pub fn prop11(opts: &VerifyOptions) -> Result<VerifyReport> {
    let started = Instant::now();
    let b = alphabet(opts, 2)?;
    let digits = opts.digits.unwrap_or(1_000_000);
    let c = build_prop11(&StagedSpec::new(b, digits))?;
    let slot_failures = match c.report.verify_slots() {
        Ok(_) => 0.0,
        Err(_) => 1.0,
    };
    let (za, zi) = (c.report.a.zero_density(), c.report.image.zero_density());
    let (ha, hi) = (ce_entropy(&c, Which::A, 8)?, ce_entropy(&c, Which::Image, 8)?);
    let (sa, si) = (
        stripped_entropy(&c, Which::A, 4)?,
        stripped_entropy(&c, Which::Image, 4)?,
    );
    let checks = vec![
        Check::within("zero density CE(A) vs 1/2", za, 0.5, 0.02),
        Check::within("zero density CE(x^2 A) vs 1/4", zi, 0.25, 0.05),
        Check::new("slot integrity failures", slot_failures, Comparator::Le, 0.0),
        Check::new("stripped CE(A) H_4", sa, Comparator::Ge, 0.9),
        Check::new("stripped CE(x^2 A) H_4", si, Comparator::Ge, 0.9),
        Check::within("H_8 CE(A) vs 0.5", ha, 0.5, 0.1),
        Check::within("H_8 CE(x^2 A) vs 0.75", hi, 0.75, 0.1),
    ];
    let config = json!({
        "base": b, "digits": digits, "elements": c.report.elements.len(),
        "thresholds": c.report.thresholds,
        "H_8_A": ha, "H_8_image": hi,
        "formula_H_8_A": prop8_entropy::<f64>(za, 8, b), "formula_H_8_image": prop8_entropy::<f64>(zi, 8, b),
    });
    Ok(VerifyReport::new("prop11", checks, started, config))
}

/// The dimension-s construction: equal padding fraction `1 - s` in both
/// streams.
pub fn prop13(opts: &VerifyOptions) -> Result<VerifyReport> {
    let started = Instant::now();
    let b = alphabet(opts, 2)?;
    let digits = opts.digits.unwrap_or(1_000_000);
    let s = opts.s.unwrap_or(0.5);
    let c = build_prop13(&Prop13Schedule::target(s), &StagedSpec::new(b, digits))?;
    let (za, zi) = (c.report.a.zero_density(), c.report.image.zero_density());
    let (ha, hi) = (ce_entropy(&c, Which::A, 8)?, ce_entropy(&c, Which::Image, 8)?);
    let checks = vec![
        Check::within("zero density CE(A) vs 1-s", za, 1.0 - s, 0.02),
        Check::within("zero density CE(x^2 A) vs 1-s", zi, 1.0 - s, 0.02),
        Check::within("H_8 CE(A) vs s", ha, s, 0.1),
        Check::within("H_8 CE(x^2 A) vs s", hi, s, 0.1),
    ];
    let config = json!({
        "base": b, "digits": digits, "s": s, "elements": c.report.elements.len(),
        "audit": c.report.audit.len(),
        "H_8_A": ha, "H_8_image": hi,
        "formula_H_8_A": prop8_entropy::<f64>(za, 8, b), "formula_H_8_image": prop8_entropy::<f64>(zi, 8, b),
    });
    Ok(VerifyReport::new("prop13", checks, started, config))
}

/// Failure fractions of (0.1, 2)-normality decrease with the range.
pub fn lemma10(opts: &VerifyOptions) -> Result<VerifyReport> {
    let started = Instant::now();
    let b = alphabet(opts, 2)?;
    let range = opts.range.unwrap_or(100_000);
    let params = NormalityParams::new(0.1, 2, b)?;
    let targets = [Target::N, Target::N_SQUARED];
    let c = census(range, &params, &targets)?;
    let mut checks = Vec::new();
    for tc in &c.targets {
        let points: Vec<_> = tc.decades.iter().filter(|d| d.upper >= 1000).collect();
        for w in points.windows(2) {
            checks.push(Check::new(
                format!("{}: fraction at {} minus at {}", tc.target, w[1].upper, w[0].upper),
                w[1].fraction - w[0].fraction,
                Comparator::Lt,
                0.0,
            ));
        }
    }
    let config = json!({ "base": b, "range": range, "epsilon": 0.1, "k": 2, "census": c });
    Ok(VerifyReport::new("lemma10", checks, started, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparators() {
        assert!(Comparator::Le.holds(1.0, 1.0));
        assert!(!Comparator::Lt.holds(1.0, 1.0));
        assert!(Comparator::Ge.holds(1.0, 1.0));
        assert!(Check::within("x", 0.81, 0.8113, 0.02).pass);
        assert!(!Check::within("x", 0.5, 0.8113, 0.02).pass);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("prop3".parse::<Experiment>().is_err());
    }

    #[test]
    fn report_round_trips_losslessly() {
        let opts = VerifyOptions {
            range: Some(3000),
            ..VerifyOptions::default()
        };
        let report = lemma10(&opts).unwrap();
        assert_eq!(report.checks.len(), 2);
        let json = report.to_json().unwrap();
        assert_eq!(VerifyReport::from_json(&json).unwrap(), report);
        let awkward = VerifyReport {
            checks: vec![Check::new("x", 0.1 + 0.2, Comparator::Le, 1.0 / 3.0)],
            ..report
        };
        assert_eq!(VerifyReport::from_json(&awkward.to_json().unwrap()).unwrap(), awkward);
    }

    #[test]
    fn pass_is_conjunction_of_checks() {
        let opts = VerifyOptions {
            digits: Some(50_000),
            ..VerifyOptions::default()
        };
        let r = prop1(&opts).unwrap();
        assert_eq!(r.pass, r.checks.iter().all(|c| c.pass));
        let r = prop2(&VerifyOptions {
            digits: Some(2000),
            ..opts
        })
        .unwrap();
        assert!(r.pass, "{r:?}");
    }
}
