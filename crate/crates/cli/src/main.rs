use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fsdim::constructions::{
    build_corollary_d, build_prop11, build_prop13, prop7_demo, Construction, Prop13Schedule, Prop7Config, StagedSpec,
    Which,
};
use fsdim::digits::{read_digit_file, write_digit_file, Alphabet, DigitString};
use fsdim::entropy::{estimate_dim, profile, CheckpointSchedule, DEFAULT_BURN_IN};
use fsdim::experiments::{self, Experiment, VerifyOptions};
use fsdim::normality::{census, parse_targets, NormalityParams};
use fsdim::polynomials::{ce_poly_sequence, parse_poly, Poly, RealCoefficient};
use fsdim::sequences::{
    ce_sequence, dilute, insert_at, prefix_concat, primes_stream, Arithmetic, ExplicitSet, Fill, FixedDigits,
    GrowthPolicy, Naturals, SharedIndices, SharedSet, SharedSource, Squares,
};

mod specs;
use specs::{IndexSpec, RecipeSpec, SetSpec, Transform};

/// Copeland-Erdős sequences, block entropies and finite-state dimension
/// estimates.
#[derive(Parser)]
#[command(name = "fsdim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the Copeland-Erdős sequence of a set.
    Generate(GenerateArgs),
    /// Block entropies of a digit file at checkpoints, with the dimension estimate.
    Entropy(EntropyArgs),
    /// Dimension estimate of a digit file.
    Dimension(EntropyArgs),
    /// Build one of the staged sets and its polynomial image.
    Construct(ConstructArgs),
    /// Count naturals below a range whose target values fail (ε,k)-normality.
    Normality(NormalityArgs),
    /// Run a self-contained experiment; exit 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// naturals, primes, file:<path> (one integer per line), or
    /// construct:{prop11|corollary:<d>|prop13:<s>}
    #[arg(long, value_parser = specs::set)]
    set: SetSpec,
    #[arg(long, default_value_t = 2)]
    base: u32,
    #[arg(long)]
    digits: u64,
    /// Polynomial applied to the set first: `q0 + q1*x + q2*x^2 ...` with
    /// literals `a/b` or `real:<digit file>`.
    #[arg(long)]
    poly: Option<String>,
    /// dilute:rho:<r>[:<unit>] | dilute:periodic:<every>:<zeros> |
    /// insert:squares[:<d>] | insert:arith:<start>:<step>[:<d>] |
    /// prefix-concat:geometric:<r> | prefix-concat:all
    #[arg(long, value_parser = specs::transform)]
    transform: Vec<Transform>,
    /// Output digit file (binary if it ends in .fsd); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 8)]
    max_block: usize,
    /// geometric:<ratio>[:<start>] or explicit:<p1>,<p2>,...
    #[arg(long, value_parser = specs::checkpoints, default_value = "geometric:2")]
    checkpoints: CheckpointSchedule,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: f64,
    /// Read at most this many digits.
    #[arg(long)]
    limit: Option<u64>,
    #[arg(long)]
    json: bool,
    /// Also write the entropy matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    /// prop11, corollary:<d>, prop13:<s> or prop7
    #[arg(long, value_parser = specs::recipe)]
    recipe: RecipeSpec,
    #[arg(long, default_value_t = 2)]
    base: u32,
    #[arg(long)]
    digits: u64,
    /// Output prefix: <prefix>.set.txt, <prefix>.ce.txt, <prefix>.image.txt,
    /// <prefix>.report.json
    #[arg(long)]
    out: PathBuf,
    /// Stage of the first element.
    #[arg(long)]
    first_stage: Option<u32>,
    #[arg(long)]
    max_elements: Option<u64>,
    /// Candidates examined per witness search.
    #[arg(long)]
    candidates: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// prop7: digit file holding the expansion of alpha (default: the
    /// Copeland-Erdős sequence of the positive naturals).
    #[arg(long)]
    alpha: Option<PathBuf>,
    /// prop7: multiplier, a rational literal or real:<digit file>.
    #[arg(long, default_value = "3")]
    c: String,
    /// prop7: growth ratio of the prefix lengths.
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
}

#[derive(Args)]
struct NormalityArgs {
    #[arg(long, default_value_t = 2)]
    base: u32,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    range: u64,
    /// Comma-separated targets such as n,2n,n2.
    #[arg(long, default_value = "n")]
    targets: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    experiment: Experiment,
    #[arg(long)]
    digits: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    range: Option<u64>,
    #[arg(long)]
    max_block: Option<usize>,
    #[arg(long)]
    base: Option<u32>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Files this command has started writing; removed unless it completes.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    /// Validates an output path before any work is done.
    fn check(&self, path: &Path) -> anyhow::Result<PathBuf> {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !dir.is_dir() {
            bail!("output directory {} does not exist", dir.display());
        }
        if path.is_dir() {
            bail!("output path {} is a directory", path.display());
        }
        Ok(path.to_path_buf())
    }

    fn write_text(&mut self, path: &Path, text: &str) -> anyhow::Result<()> {
        self.written.push(path.to_path_buf());
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn write_digits(&mut self, path: &Path, s: &DigitString) -> anyhow::Result<()> {
        self.written.push(path.to_path_buf());
        write_digit_file(path, s).with_context(|| format!("writing {}", path.display()))
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let mut outputs = Outputs::default();
    let result = match cli.command {
        Command::Generate(a) => generate(a, &mut outputs),
        Command::Entropy(a) => entropy(a, false, &mut outputs),
        Command::Dimension(a) => entropy(a, true, &mut outputs),
        Command::Construct(a) => construct(a, &mut outputs),
        Command::Normality(a) => normality(a),
        Command::Verify(a) => verify(a, &mut outputs),
    };
    match result {
        Ok(pass) => {
            outputs.keep = true;
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("FSDIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("FSDIM_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn positive(flag: &str, v: u64) -> anyhow::Result<u64> {
    if v == 0 {
        bail!("{flag} must be positive");
    }
    Ok(v)
}

fn staged_spec(a: &ConstructArgs, b: Alphabet, digits: u64) -> StagedSpec {
    let mut spec = StagedSpec::new(b, digits);
    if let Some(s) = a.first_stage {
        spec.first_stage = s;
    }
    spec.max_elements = a.max_elements;
    if let Some(c) = a.candidates {
        spec.witness = spec.witness.with_budget(c);
    }
    if let Some(seed) = a.seed {
        spec.witness.order = fsdim::normality::SearchOrder::Auto { seed };
    }
    spec
}

fn build(recipe: &RecipeSpec, spec: &StagedSpec) -> fsdim::Result<Construction> {
    match recipe {
        RecipeSpec::Prop11 => build_prop11(spec),
        RecipeSpec::Corollary(d) => build_corollary_d(spec, *d),
        RecipeSpec::Prop13(s) => build_prop13(&Prop13Schedule::target(*s), spec),
        RecipeSpec::Prop7 => unreachable!("prop7 is not a staged construction"),
    }
}

fn generate(a: GenerateArgs, outputs: &mut Outputs) -> anyhow::Result<bool> {
    let b = Alphabet::new(a.base)?;
    let digits = positive("--digits", a.digits)?;
    let out = a.out.as_deref().map(|p| outputs.check(p)).transpose()?;
    let poly = a
        .poly
        .as_deref()
        .map(parse_poly)
        .transpose()
        .context("--poly")?
        .map(Arc::new);

    let set: SharedSet = match &a.set {
        SetSpec::Naturals => Arc::new(Naturals { start: 0 }),
        SetSpec::Primes => Arc::new(primes_stream(None)),
        SetSpec::File(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("--set file:{}", p.display()))?;
            Arc::new(ExplicitSet::parse(&text)?)
        }
        SetSpec::Construct(r) => {
            let c = build(r, &StagedSpec::new(b, digits))?;
            Arc::new(c.set)
        }
    };
    let mut source: SharedSource = match poly {
        Some(p) => Arc::new(ce_poly_sequence(p, set, b)),
        None => Arc::new(ce_sequence(set, b)),
    };
    for t in a.transform {
        source = match t {
            Transform::Dilute(sched) => Arc::new(dilute(source, sched)?),
            Transform::Insert { indices, digit } => {
                let indices: SharedIndices = match indices {
                    IndexSpec::Squares => Arc::new(Squares),
                    IndexSpec::Arithmetic { start, step } => Arc::new(Arithmetic { start, step }),
                };
                Arc::new(insert_at(source, indices, Fill::Digit(b.check(digit)?))?)
            }
            Transform::PrefixConcat(policy) => Arc::new(prefix_concat(source, policy)?),
        };
    }
    let s = source.prefix(digits as usize)?;
    match out {
        Some(path) => outputs.write_digits(&path, &s)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", s.to_text()?)?;
        }
    }
    Ok(true)
}

fn entropy(a: EntropyArgs, estimate_only: bool, outputs: &mut Outputs) -> anyhow::Result<bool> {
    if a.max_block == 0 {
        bail!("--max-block must be positive");
    }
    if !(0.0..1.0).contains(&a.burn_in) {
        bail!("--burn-in must lie in [0, 1)");
    }
    let csv = a.csv.as_deref().map(|p| outputs.check(p)).transpose()?;
    let s = read_digit_file(&a.input).with_context(|| format!("--in {}", a.input.display()))?;
    let limit = a.limit.unwrap_or(s.len() as u64);
    let prof = profile::<f64>(&FixedDigits(s), a.max_block, &a.checkpoints, limit)?;
    let est = estimate_dim(&prof, a.burn_in)?;
    if let Some(path) = csv {
        outputs.write_text(&path, &prof.to_csv())?;
    }
    let report = if estimate_only {
        json!({
            "base": prof.base, "length": prof.length, "max_block": est.max_block, "burn_in": est.burn_in,
            "dim_proxy": est.dim_proxy, "strong_dim_proxy": est.strong_dim_proxy,
        })
    } else {
        json!({
            "base": prof.base, "length": prof.length, "checkpoints": prof.checkpoints, "H": prof.h,
            "dim_proxy": est.dim_proxy, "strong_dim_proxy": est.strong_dim_proxy, "burn_in": est.burn_in,
        })
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("base {}  length {}", prof.base, prof.length);
        if !estimate_only {
            for l in 1..=prof.max_block() {
                println!("H_{l} = {:.6}", prof.last(l));
            }
        }
        println!(
            "dim proxy {:.6}  strong dim proxy {:.6}",
            est.dim_proxy, est.strong_dim_proxy
        );
    }
    Ok(true)
}

fn construct(a: ConstructArgs, outputs: &mut Outputs) -> anyhow::Result<bool> {
    let b = Alphabet::new(a.base)?;
    let digits = positive("--digits", a.digits)?;
    let name = a
        .out
        .file_name()
        .context("--out needs a file name prefix")?
        .to_string_lossy()
        .into_owned();
    let path = |suffix: &str| a.out.with_file_name(format!("{name}.{suffix}"));
    let ext = if a.base > 36 { "fsd" } else { "txt" };
    let set_path = outputs.check(&path("set.txt"))?;
    let ce_path = outputs.check(&path(&format!("ce.{ext}")))?;
    let image_path = outputs.check(&path(&format!("image.{ext}")))?;
    let report_path = outputs.check(&path("report.json"))?;

    if a.recipe == RecipeSpec::Prop7 {
        let alpha: SharedSource = match &a.alpha {
            Some(p) => Arc::new(FixedDigits(
                read_digit_file(p).with_context(|| format!("--alpha {}", p.display()))?,
            )),
            None => Arc::new(ce_sequence(Arc::new(Naturals { start: 1 }), b)),
        };
        if alpha.alphabet() != b {
            bail!("--alpha is base {}, --base is {b}", alpha.alphabet());
        }
        let c = coefficient(&a.c).context("--c")?;
        let cfg = Prop7Config {
            cuts: GrowthPolicy::geometric(a.ratio),
            digits,
            ..Prop7Config::default()
        };
        let demo = prop7_demo(alpha, &c, &cfg)?;
        outputs.write_text(&set_path, &demo.set.to_text())?;
        outputs.write_digits(&ce_path, &demo.a_digits)?;
        outputs.write_digits(&image_path, &demo.image_digits)?;
        outputs.write_text(&report_path, &serde_json::to_string_pretty(&demo.report)?)?;
        println!(
            "{} elements, disagreement density {:.6}, dim proxies {:.6} / {:.6}",
            demo.report.cuts.len(),
            demo.report.density,
            demo.report.dim_a.dim_proxy,
            demo.report.dim_image.dim_proxy
        );
        return Ok(true);
    }

    let c = build(&a.recipe, &staged_spec(&a, b, digits))?;
    outputs.write_text(&set_path, &c.set.to_text())?;
    outputs.write_digits(&ce_path, &c.ce_digits(Which::A)?)?;
    outputs.write_digits(&image_path, &c.ce_digits(Which::Image)?)?;
    outputs.write_text(&report_path, &c.report.to_json()?)?;
    println!(
        "{} elements, zero density {:.6} (A) / {:.6} (image), {} audit entries",
        c.report.elements.len(),
        c.report.a.zero_density(),
        c.report.image.zero_density(),
        c.report.audit.len()
    );
    Ok(true)
}

fn coefficient(s: &str) -> anyhow::Result<RealCoefficient> {
    let p: Poly = parse_poly(s)?;
    if p.degree() != 0 {
        bail!("expected a constant, got a polynomial of degree {}", p.degree());
    }
    Ok(p.coefficients()[0].clone())
}

fn normality(a: NormalityArgs) -> anyhow::Result<bool> {
    let b = Alphabet::new(a.base)?;
    let params = NormalityParams::new(a.epsilon, a.k, b)?;
    let targets = parse_targets(&a.targets).context("--targets")?;
    let range = positive("--range", a.range)?;
    let c = census(range, &params, &targets)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&c)?);
    } else {
        for t in &c.targets {
            println!("target {}: {} failures ({:.6})", t.target, t.failures, t.fraction);
            for d in &t.decades {
                println!("  n < {:>12}: {:>10} ({:.6})", d.upper, d.failures, d.fraction);
            }
        }
    }
    Ok(true)
}

fn verify(a: VerifyArgs, outputs: &mut Outputs) -> anyhow::Result<bool> {
    let out = a.out.as_deref().map(|p| outputs.check(p)).transpose()?;
    let opts = VerifyOptions {
        digits: a.digits,
        rho: a.rho,
        s: a.s,
        range: a.range,
        max_block: a.max_block,
        base: a.base,
    };
    let report = experiments::run(a.experiment, &opts)?;
    let text = report.to_json()?;
    if let Some(path) = out {
        outputs.write_text(&path, &text)?;
    }
    println!("{text}");
    Ok(report.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfinished_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b, untouched) = (
            dir.path().join("a.txt"),
            dir.path().join("b.txt"),
            dir.path().join("c.txt"),
        );
        std::fs::write(&untouched, "keep").unwrap();
        {
            let mut out = Outputs::default();
            out.check(&untouched).unwrap();
            out.write_text(&a, "1").unwrap();
            out.write_text(&b, "2").unwrap();
        }
        assert!(!a.exists() && !b.exists());
        assert_eq!(std::fs::read_to_string(&untouched).unwrap(), "keep");
        {
            let mut out = Outputs::default();
            out.write_text(&a, "1").unwrap();
            out.keep = true;
        }
        assert!(a.exists());
    }

    #[test]
    fn output_paths_are_checked_first() {
        let dir = tempfile::tempdir().unwrap();
        let out = Outputs::default();
        assert!(out.check(&dir.path().join("missing/x.txt")).is_err());
        assert!(out.check(dir.path()).is_err());
        assert!(out.check(&dir.path().join("x.txt")).is_ok());
    }
}
