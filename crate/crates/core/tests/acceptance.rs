//! Acceptance criteria. Each test prints one PASS/FAIL line and then asserts
//! it. Run with `cargo test -p fsdim --test acceptance -- --nocapture`.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fsdim::constructions::{
    build_corollary_d, build_prop11, build_prop13, prop7_demo, strip_padding, Construction, Prop13Schedule,
    Prop7Config, SlotKind, StagedSpec, Which,
};
use fsdim::digits::{expand, Alphabet, Digit};
use fsdim::entropy::{
    count_blocks, count_blocks_parallel, estimate_dim, mixture_entropy, profile, prop8_entropy, BlockCensus,
    CheckpointSchedule, DEFAULT_BURN_IN,
};
use fsdim::normality::{census, NormalityParams, Target};
use fsdim::polynomials::{eval_floor, image_stream, DigitCoefficient, Poly, RealCoefficient};
use fsdim::sequences::{
    ce_sequence, collect_digits, concat_values, dilute, insert_at, primes_stream, DilutionSchedule, Fill, Naturals,
    SequenceSource, SharedSource, SqrtDigits, Squares,
};
use fsdim::Error;

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {n:>2} {}: {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {detail}");
}

fn champernowne(b: u32) -> SharedSource {
    Arc::new(ce_sequence(Arc::new(Naturals { start: 0 }), Alphabet::new(b).unwrap()))
}

fn last_entropies(s: &dyn SequenceSource, max_block: usize, limit: u64) -> Vec<f64> {
    let prof = profile::<f64>(s, max_block, &CheckpointSchedule::Explicit { positions: vec![] }, limit).unwrap();
    (1..=max_block).map(|l| prof.last(l)).collect()
}

fn entropy_of(digits: &[Digit], l: usize, b: Alphabet) -> f64 {
    count_blocks(digits, l, b).unwrap().entropy().unwrap()
}

// ---------------------------------------------------------------------------

fn naive(s: &[Digit], l: usize) -> HashMap<Vec<Digit>, u64> {
    let mut m = HashMap::new();
    for w in s.windows(l) {
        *m.entry(w.to_vec()).or_insert(0u64) += 1;
    }
    m
}

fn agrees(c: &BlockCensus, expected: &HashMap<Vec<Digit>, u64>) -> bool {
    let found: u64 = c.nonzero_counts().count() as u64;
    found == expected.len() as u64
        && expected.iter().all(|(w, &k)| c.count(w).unwrap() == k)
        && c.total() == expected.values().sum::<u64>()
}

#[test]
fn c01_census_matches_window_enumeration() {
    const STRINGS: usize = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..STRINGS {
        let b = [2u32, 3, 10][rng.gen_range(0..3)];
        let alpha = Alphabet::new(b).unwrap();
        let len = rng.gen_range(0..=10_000);
        let s: Vec<Digit> = (0..len).map(|_| rng.gen_range(0..b)).collect();
        let l = rng.gen_range(1..=6);
        let expected = naive(&s, l);
        let mut streaming = BlockCensus::new(alpha, l).unwrap();
        for &d in &s {
            streaming.push(d);
        }
        let batch = count_blocks(&s, l, alpha).unwrap();
        let parallel = count_blocks_parallel(&s, l, alpha, rng.gen_range(1..9)).unwrap();
        if !(agrees(&streaming, &expected) && agrees(&batch, &expected) && agrees(&parallel, &expected)) {
            mismatches += 1;
        }
    }
    report(
        1,
        "census vs naive windows",
        mismatches == 0,
        format!("{mismatches} mismatches in {STRINGS} strings"),
    );
}

#[test]
fn c02_champernowne_block_entropy() {
    const DIGITS: u64 = 1_000_000;
    const MIN_H: f64 = 0.95;
    let h2 = last_entropies(&*champernowne(2), 4, DIGITS);
    let h10 = last_entropies(&*champernowne(10), 4, DIGITS);
    let worst = h2.iter().chain(&h10).copied().fold(f64::INFINITY, f64::min);
    report(
        2,
        "Champernowne H_l >= 0.95, l <= 4",
        worst >= MIN_H,
        format!("base 2 {h2:.4?}, base 10 {h10:.4?}"),
    );
}

#[test]
fn c03_zeros_at_squares() {
    const DIGITS: u64 = 1_000_000;
    const TOL: f64 = 0.01;
    let base = champernowne(2);
    let inserted = insert_at(base.clone(), Arc::new(Squares), Fill::Digit(0)).unwrap();
    let before = last_entropies(&*base, 4, DIGITS)[3];
    let after = last_entropies(&inserted, 4, DIGITS)[3];
    let delta = (after - before).abs();
    report(
        3,
        "zeros at squares leave H_4",
        delta <= TOL,
        format!("H_4 {before:.6} -> {after:.6}, |d| = {delta:.2e}"),
    );
}

fn skewed(rng: &mut ChaCha8Rng, b: u32, len: usize) -> Vec<Digit> {
    let bias: f64 = rng.gen();
    (0..len)
        .map(|_| if rng.gen_bool(bias) { 0 } else { rng.gen_range(0..b) })
        .collect()
}

#[test]
fn c04_concavity() {
    const MIXTURE_TOL: f64 = 1e-12;
    const CONCAT_SLACK: f64 = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_mix = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let b = [2u32, 3, 10][rng.gen_range(0..3)];
        let alpha = Alphabet::new(b).unwrap();
        let l = rng.gen_range(1..=4);
        let (lu, lv) = (rng.gen_range(l..3000), rng.gen_range(l..3000));
        let u = skewed(&mut rng, b, lu);
        let v = skewed(&mut rng, b, lv);
        let lambda: f64 = rng.gen();
        let (cu, cv) = (count_blocks(&u, l, alpha).unwrap(), count_blocks(&v, l, alpha).unwrap());
        let mixed: f64 = mixture_entropy(&cu, &cv, lambda).unwrap();
        let (hu, hv): (f64, f64) = (cu.entropy().unwrap(), cv.entropy().unwrap());
        worst_mix = worst_mix.max(lambda * hu + (1.0 - lambda) * hv - mixed);
    }
    let mut worst_cat = f64::NEG_INFINITY;
    for _ in 0..40 {
        let b = [2u32, 3, 10][rng.gen_range(0..3)];
        let alpha = Alphabet::new(b).unwrap();
        let l = rng.gen_range(1..=4);
        let (lu, lv) = (rng.gen_range(10_000..30_000), rng.gen_range(10_000..30_000));
        let u = skewed(&mut rng, b, lu);
        let v = skewed(&mut rng, b, lv);
        let w: Vec<Digit> = u.iter().chain(&v).copied().collect();
        let (fu, fv) = (u.len() as f64 / w.len() as f64, v.len() as f64 / w.len() as f64);
        let gap = fu * entropy_of(&u, l, alpha) + fv * entropy_of(&v, l, alpha) - entropy_of(&w, l, alpha);
        worst_cat = worst_cat.max(gap);
    }
    report(
        4,
        "entropy concavity",
        worst_mix <= MIXTURE_TOL && worst_cat <= CONCAT_SLACK,
        format!("worst mixture excess {worst_mix:.2e}, worst concatenation excess {worst_cat:.2e}"),
    );
}

#[test]
fn c05_dilution_entropy() {
    const DIGITS: u64 = 1 << 20;
    const H1_TOL: f64 = 0.02;
    const H8_TOL: f64 = 0.05;
    const DIM_TOL: f64 = 0.1;
    let b = Alphabet::BINARY;
    let mut pass = true;
    let mut detail = Vec::new();
    for rho in [0.5, 0.25] {
        let s = dilute(champernowne(2), DilutionSchedule::GrowingRuns { rho, unit: 64 }).unwrap();
        let prof = profile::<f64>(&s, 8, &CheckpointSchedule::default(), DIGITS).unwrap();
        let est = estimate_dim(&prof, DEFAULT_BURN_IN).unwrap();
        let (h1, h8) = (prof.last(1), prof.last(8));
        let (t1, t8): (f64, f64) = (prop8_entropy(rho, 1, b), prop8_entropy(rho, 8, b));
        let ok =
            (h1 - t1).abs() <= H1_TOL && (h8 - t8).abs() <= H8_TOL && (est.dim_proxy - (1.0 - rho)).abs() <= DIM_TOL;
        pass &= ok;
        detail.push(format!(
            "rho {rho}: H_1 {h1:.4} (formula {t1:.4}), H_8 {h8:.4} (formula {t8:.4}), dim proxy {:.4} (1-rho {})",
            est.dim_proxy,
            1.0 - rho
        ));
    }
    report(5, "diluted Champernowne", pass, detail.join("; "));
}

#[test]
fn c06_affine_image_of_primes() {
    const TOL: f64 = 0.05;
    let b = Alphabet::DECIMAL;
    let primes = Arc::new(primes_stream(Some(1_000_001)));
    let p = Arc::new(Poly::integer(&[5, 3]).unwrap());
    let a = ce_sequence(primes.clone(), b);
    let pa = concat_values(Arc::new(image_stream(p, primes)), b);
    let dim = |s: &dyn SequenceSource| {
        let prof = profile::<f64>(s, 4, &CheckpointSchedule::default(), u64::MAX).unwrap();
        estimate_dim(&prof, DEFAULT_BURN_IN).unwrap().dim_proxy
    };
    let (da, dp) = (dim(&a), dim(&pa));
    report(
        6,
        "dim proxy of primes vs 3p+5",
        (da - dp).abs() <= TOL,
        format!("{da:.4} vs {dp:.4}, |d| = {:.4}", (da - dp).abs()),
    );
}

#[test]
fn c07_normality_failures_decrease() {
    let params = NormalityParams::new(0.1, 2, Alphabet::BINARY).unwrap();
    let c = census(100_000, &params, &[Target::N, Target::N_SQUARED]).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for t in &c.targets {
        let f: Vec<f64> = [1_000, 10_000, 100_000]
            .iter()
            .map(|&m| {
                t.decades
                    .iter()
                    .find(|d| d.upper == m)
                    .expect("decade recorded")
                    .fraction
            })
            .collect();
        pass &= f[1] < f[0] && f[2] < f[1];
        detail.push(format!("{}: {:.4} {:.4} {:.4}", t.target, f[0], f[1], f[2]));
    }
    report(7, "(0.1,2) failure fraction decreasing", pass, detail.join("; "));
}

fn stripped_h4(c: &Construction, which: Which) -> f64 {
    let s = strip_padding(c.ce_source(which).unwrap(), &c.report, which).unwrap();
    entropy_of(&collect_digits(&s, usize::MAX).unwrap(), 4, c.report.base)
}

fn ce_h8(c: &Construction, which: Which) -> f64 {
    entropy_of(c.ce_digits(which).unwrap().digits(), 8, c.report.base)
}

/// Padding zeros among the first `digits` positions, recounted from the
/// layouts and cross-checked against the report.
fn digit_zero_density(c: &Construction, which: Which) -> f64 {
    let budget = c.report.stream(which).digits;
    assert_eq!(c.ce_digits(which).unwrap().len() as u64, budget);
    let (mut pos, mut pads) = (0u64, 0u64);
    for slot in c.report.layouts(which).flatten() {
        let take = slot.1.min(budget - pos);
        if slot.0 == SlotKind::Pad {
            pads += take;
        }
        pos += take;
        if pos == budget {
            break;
        }
    }
    let density = pads as f64 / budget as f64;
    assert!((density - c.report.stream(which).zero_density()).abs() < 1e-12);
    density
}

#[test]
fn c08_degree_two_construction() {
    const DIGITS: u64 = 1_000_000;
    let c = build_prop11(&StagedSpec::new(Alphabet::BINARY, DIGITS)).unwrap();
    let (za, zi) = (digit_zero_density(&c, Which::A), digit_zero_density(&c, Which::Image));
    let slots = c.report.verify_slots();
    let (sa, si) = (stripped_h4(&c, Which::A), stripped_h4(&c, Which::Image));
    let (ha, hi) = (ce_h8(&c, Which::A), ce_h8(&c, Which::Image));
    let structural = (za - 0.5).abs() <= 0.02 && (zi - 0.25).abs() <= 0.05 && slots.is_ok() && sa >= 0.9 && si >= 0.9;
    let entropic = (ha - 0.5).abs() <= 0.1 && (hi - 0.75).abs() <= 0.1;
    report(
        8,
        "degree-2 construction",
        structural && entropic,
        format!(
            "zero density {za:.4} / {zi:.4}, slots {}, stripped H_4 {sa:.4} / {si:.4}, H_8 {ha:.4} / {hi:.4} \
             (targets 0.5 / 0.75)",
            match &slots {
                Ok(n) => format!("{n} ok"),
                Err(e) => e.to_string(),
            }
        ),
    );
}

#[test]
fn c09_cube_slots() {
    const ELEMENTS: u64 = 100;
    let mut checked = 0;
    let mut bad = 0;
    for b in [2u32, 10] {
        let alpha = Alphabet::new(b).unwrap();
        let mut spec = StagedSpec::new(alpha, u64::MAX / 4);
        spec.max_elements = Some(ELEMENTS);
        let c = build_corollary_d(&spec, 3).unwrap();
        assert_eq!(c.report.elements.len() as u64, ELEMENTS);
        c.report.verify_slots().unwrap();
        for (rec, v) in c.report.elements.iter().zip(c.set.as_slice()) {
            let n = &rec.witness;
            let i = rec.shift as usize;
            // 1, then 3n, 3n^2 and n^3 each zero-padded to i digits
            let mut expected = vec![1];
            for part in [n * 3u32, n * n * 3u32, n * n * n] {
                let e = expand(&part, alpha);
                assert!(e.len() <= i);
                expected.extend(std::iter::repeat_n(0, i - e.len()));
                expected.extend(e);
            }
            let cube = v * v * v;
            checked += 1;
            if *v != alpha.pow(rec.shift) + n || expand(&cube, alpha) != expected {
                bad += 1;
            }
        }
    }
    report(
        9,
        "cube slot decomposition",
        bad == 0 && checked == 200,
        format!("{checked} elements, {bad} mismatches"),
    );
}

#[test]
fn c10_dimension_s_construction() {
    const DIGITS: u64 = 1_000_000;
    const S: f64 = 0.5;
    let c = build_prop13(&Prop13Schedule::target(S), &StagedSpec::new(Alphabet::BINARY, DIGITS)).unwrap();
    let (za, zi) = (digit_zero_density(&c, Which::A), digit_zero_density(&c, Which::Image));
    let (ha, hi) = (ce_h8(&c, Which::A), ce_h8(&c, Which::Image));
    let pass = (za - (1.0 - S)).abs() <= 0.02
        && (zi - (1.0 - S)).abs() <= 0.02
        && (ha - S).abs() <= 0.1
        && (hi - S).abs() <= 0.1;
    report(
        10,
        "dimension-s construction, s = 0.5",
        pass,
        format!("zero density {za:.4} / {zi:.4}, H_8 {ha:.4} / {hi:.4}"),
    );
}

#[test]
fn c11_prefix_set_times_three() {
    const DENSITY: f64 = 0.05;
    const DIM_TOL: f64 = 0.05;
    let alpha: SharedSource = Arc::new(ce_sequence(Arc::new(Naturals { start: 1 }), Alphabet::BINARY));
    let demo = prop7_demo(alpha, &RealCoefficient::integer(3), &Prop7Config::default()).unwrap();
    let r = &demo.report;
    let (da, di) = (r.dim_a.dim_proxy, r.dim_image.dim_proxy);
    let pass = r.density < DENSITY && r.decreasing && (da - di).abs() <= DIM_TOL;
    let trace: Vec<String> = r.trace.iter().map(|p| format!("{:.4}", p.density)).collect();
    report(
        11,
        "prefix set and its triple",
        pass,
        format!(
            "density {:.4}, trace [{}], dim proxies {da:.4} / {di:.4}",
            r.density,
            trace.join(" ")
        ),
    );
}

#[test]
fn c12_floor_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut bad = 0;
    let mut negative = 0;
    for _ in 0..10_000 {
        let degree = rng.gen_range(0..=4);
        let mut coeffs: Vec<BigRational> = (0..=degree)
            .map(|_| BigRational::new(rng.gen_range(-60i64..=60).into(), rng.gen_range(1i64..=24).into()))
            .collect();
        // the zero polynomial is rejected by construction
        if coeffs.iter().all(Zero::is_zero) {
            coeffs[0] = BigRational::from_integer(1.into());
        }
        let bits = rng.gen_range(1..40);
        let n = BigUint::from(rng.gen_range(0u64..1 << bits));
        let p = Poly::rational(coeffs.clone()).unwrap();
        let x = BigRational::from_integer(BigInt::from(n.clone()));
        let mut value = BigRational::zero();
        for c in coeffs.iter().rev() {
            value = value * &x + c;
        }
        let got = eval_floor(&p, &n);
        let ok = if value.is_negative() {
            negative += 1;
            matches!(got, Err(Error::NegativeValue { .. }))
        } else {
            got.ok() == value.floor().to_integer().to_biguint()
        };
        bad += usize::from(!ok);
    }
    let root2 = DigitCoefficient::new(
        Arc::new(SqrtDigits::new(2u32.into(), Alphabet::BINARY)),
        1,
        false,
        false,
    );
    let p = Poly::new(vec![RealCoefficient::integer(0), RealCoefficient::Digits(root2)]).unwrap();
    let mut bad_root = 0;
    for n in 0u64..=10_000 {
        let n = BigUint::from(n);
        if eval_floor(&p, &n).unwrap() != (&n * &n * 2u32).sqrt() {
            bad_root += 1;
        }
    }
    report(
        12,
        "floor of polynomial values",
        bad == 0 && bad_root == 0,
        format!("{bad} rational mismatches ({negative} negative values), {bad_root} sqrt(2) mismatches"),
    );
}
