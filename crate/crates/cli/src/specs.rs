//! Flag-value grammars. Each parser returns a message naming what it
//! expected, which clap attaches to the offending flag.

use std::path::PathBuf;

use fsdim::constructions::Prop13Schedule;
use fsdim::entropy::CheckpointSchedule;
use fsdim::sequences::{DilutionSchedule, GrowthPolicy};

#[derive(Debug, Clone)]
pub enum SetSpec {
    Naturals,
    Primes,
    File(PathBuf),
    Construct(RecipeSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecipeSpec {
    Prop11,
    Corollary(u32),
    Prop13(f64),
    Prop7,
}

#[derive(Debug, Clone)]
pub enum Transform {
    Dilute(DilutionSchedule),
    Insert { indices: IndexSpec, digit: u32 },
    PrefixConcat(GrowthPolicy),
}

#[derive(Debug, Clone, Copy)]
pub enum IndexSpec {
    Squares,
    Arithmetic { start: u64, step: u64 },
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("{what}: cannot parse {s:?}"))
}

pub fn set(s: &str) -> Result<SetSpec, String> {
    if let Some(path) = s.strip_prefix("file:") {
        return Ok(SetSpec::File(PathBuf::from(path)));
    }
    if let Some(name) = s.strip_prefix("construct:") {
        return match recipe(name)? {
            RecipeSpec::Prop7 => Err("construct:prop7 does not define a set of naturals on its own".into()),
            r => Ok(SetSpec::Construct(r)),
        };
    }
    match s {
        "naturals" => Ok(SetSpec::Naturals),
        "primes" => Ok(SetSpec::Primes),
        _ => Err("expected naturals, primes, file:<path> or construct:<recipe>".into()),
    }
}

pub fn recipe(s: &str) -> Result<RecipeSpec, String> {
    match s.split_once(':') {
        None if s == "prop11" => Ok(RecipeSpec::Prop11),
        None if s == "prop7" => Ok(RecipeSpec::Prop7),
        Some(("corollary", d)) => {
            let d: u32 = num(d, "degree")?;
            if d < 2 {
                return Err("corollary degree must be at least 2".into());
            }
            Ok(RecipeSpec::Corollary(d))
        }
        Some(("prop13", v)) => {
            let v: f64 = num(v, "target dimension")?;
            Prop13Schedule::target(v).validate().map_err(|e| e.to_string())?;
            Ok(RecipeSpec::Prop13(v))
        }
        _ => Err("expected prop11, corollary:<d>, prop13:<s> or prop7".into()),
    }
}

/// `dilute:rho:<r>[:<unit>]`, `dilute:periodic:<every>:<zeros>`,
/// `insert:squares[:<digit>]`, `insert:arith:<start>:<step>[:<digit>]`,
/// `prefix-concat:geometric:<r>`, `prefix-concat:all`.
pub fn transform(s: &str) -> Result<Transform, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let t = match parts.as_slice() {
        ["dilute", "rho", r] => Transform::Dilute(DilutionSchedule::GrowingRuns {
            rho: num(r, "rho")?,
            unit: 64,
        }),
        ["dilute", "rho", r, u] => Transform::Dilute(DilutionSchedule::GrowingRuns {
            rho: num(r, "rho")?,
            unit: num(u, "unit")?,
        }),
        ["dilute", "periodic", every, zeros] => Transform::Dilute(DilutionSchedule::Periodic {
            every: num(every, "period")?,
            zeros: num(zeros, "zeros")?,
        }),
        ["insert", "squares"] => Transform::Insert {
            indices: IndexSpec::Squares,
            digit: 0,
        },
        ["insert", "squares", d] => Transform::Insert {
            indices: IndexSpec::Squares,
            digit: num(d, "digit")?,
        },
        ["insert", "arith", start, step, rest @ ..] if rest.len() <= 1 => Transform::Insert {
            indices: IndexSpec::Arithmetic {
                start: num(start, "start")?,
                step: num(step, "step")?,
            },
            digit: rest.first().map_or(Ok(0), |d| num(d, "digit"))?,
        },
        ["prefix-concat", "geometric", r] => Transform::PrefixConcat(GrowthPolicy::geometric(num(r, "ratio")?)),
        ["prefix-concat", "all"] => Transform::PrefixConcat(GrowthPolicy::AllPrefixes),
        _ => {
            return Err(
                "expected dilute:rho:<r>[:<unit>], dilute:periodic:<every>:<zeros>, insert:squares[:<d>], \
                 insert:arith:<start>:<step>[:<d>], prefix-concat:geometric:<r> or prefix-concat:all"
                    .into(),
            )
        }
    };
    if let Transform::Dilute(sched) = &t {
        sched.validate().map_err(|e| e.to_string())?;
    }
    Ok(t)
}

/// `geometric:<ratio>[:<start>]` or `explicit:<p1>,<p2>,...`.
pub fn checkpoints(s: &str) -> Result<CheckpointSchedule, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let sched = match parts.as_slice() {
        ["geometric", r] => CheckpointSchedule::Geometric {
            start: 1024,
            ratio: num(r, "ratio")?,
        },
        ["geometric", r, start] => CheckpointSchedule::Geometric {
            start: num(start, "start")?,
            ratio: num(r, "ratio")?,
        },
        ["explicit", list] => CheckpointSchedule::Explicit {
            positions: list
                .split(',')
                .map(|p| num(p.trim(), "checkpoint"))
                .collect::<Result<_, _>>()?,
        },
        _ => return Err("expected geometric:<ratio>[:<start>] or explicit:<p1>,<p2>,...".into()),
    };
    sched.positions(0).map_err(|e| e.to_string())?;
    Ok(sched)
}
