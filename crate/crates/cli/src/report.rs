//! Benchmark runs and their JSON report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use tablesynth::domains::{check_overfit, BenchmarkCase, DomainError};
use tablesynth::dsl::exec_program;
use tablesynth::synth::{synthesize, Mode, SynthOutcome, SynthSettings, SynthStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solved,
    Timeout,
    Exhausted,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub id: String,
    pub path: String,
    pub outcome: Outcome,
    pub elapsed_ms: u64,
    /// Only meaningful for solved cases.
    pub overfit: Option<bool>,
    pub program: Option<String>,
    pub regression: bool,
    /// Whether the committed reference reproduces the examples and the
    /// expected pending output.
    pub reference_ok: Option<bool>,
    pub stats: Option<SynthStats>,
    pub error: Option<String>,
}

impl CaseReport {
    /// A regression-marked case fails when it is not solved, its solution
    /// over-fits, or its reference program no longer holds.
    pub fn regressed(&self) -> bool {
        self.regression
            && (self.outcome != Outcome::Solved
                || self.overfit != Some(false)
                || self.reference_ok == Some(false))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub total: usize,
    pub solved: usize,
    pub overfit: usize,
    /// solved / total
    pub success_rate: f64,
    /// overfit / solved
    pub overfit_rate: f64,
    pub regressions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub cases: Vec<CaseReport>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchOutput {
    pub reports: Vec<RunReport>,
}

impl BenchOutput {
    /// Regressions only count in bidirectional runs; the baseline is
    /// expected to miss cases.
    pub fn regressed(&self) -> bool {
        self.reports
            .iter()
            .filter(|r| r.mode == Mode::Bidirectional)
            .any(|r| r.aggregate.regressions > 0)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl RunReport {
    pub fn new(mode: Mode, mut cases: Vec<CaseReport>) -> Self {
        cases.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.path.cmp(&b.path)));
        let solved = cases
            .iter()
            .filter(|c| c.outcome == Outcome::Solved)
            .count();
        let overfit = cases.iter().filter(|c| c.overfit == Some(true)).count();
        let aggregate = Aggregate {
            total: cases.len(),
            solved,
            overfit,
            success_rate: ratio(solved, cases.len()),
            overfit_rate: ratio(overfit, solved),
            regressions: cases.iter().filter(|c| c.regressed()).count(),
        };
        RunReport {
            mode,
            cases,
            aggregate,
        }
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode: {}", self.mode);
        let _ = writeln!(
            s,
            "{:<28} {:<10} {:>10}  {:<8} regression",
            "case", "outcome", "ms", "overfit"
        );
        for c in &self.cases {
            let overfit = match c.overfit {
                Some(true) => "yes",
                Some(false) => "no",
                None => "-",
            };
            let outcome = serde_json::to_value(c.outcome)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let reg = if c.regressed() {
                "FAILED"
            } else if c.regression {
                "ok"
            } else {
                "-"
            };
            let _ = writeln!(
                s,
                "{:<28} {:<10} {:>10}  {:<8} {}",
                c.id, outcome, c.elapsed_ms, overfit, reg
            );
        }
        let a = &self.aggregate;
        let _ = writeln!(
            s,
            "solved {}/{} ({:.1}%), over-fit {}/{} ({:.1}%)",
            a.solved,
            a.total,
            100.0 * a.success_rate,
            a.overfit,
            a.solved,
            100.0 * a.overfit_rate
        );
        s
    }
}

fn reference_ok(case: &BenchmarkCase) -> Option<bool> {
    let p = case.reference.as_ref()?;
    let reproduces = exec_program(p, &case.inputs, &case.action).is_ok_and(|t| t == case.output);
    Some(reproduces && check_overfit(case, p).is_consistent())
}

pub fn run_case(path: &Path, case: &BenchmarkCase, settings: &SynthSettings) -> CaseReport {
    let task = case.task().with_settings(settings.clone());
    let start = Instant::now();
    let res = synthesize(&task);
    let elapsed_ms = start.elapsed().as_millis() as u64;
    let mut r = CaseReport {
        id: case.id.clone(),
        path: path.display().to_string(),
        outcome: Outcome::Error,
        elapsed_ms,
        overfit: None,
        program: None,
        regression: case.regression,
        reference_ok: reference_ok(case),
        stats: None,
        error: None,
    };
    match res {
        Ok(out) => {
            r.stats = Some(out.stats().clone());
            match out {
                SynthOutcome::Solved(s) => {
                    r.outcome = Outcome::Solved;
                    r.overfit = Some(!check_overfit(case, &s.program).is_consistent());
                    r.program = Some(s.program.to_string());
                }
                SynthOutcome::Timeout(_) => r.outcome = Outcome::Timeout,
                SynthOutcome::Exhausted(_) => r.outcome = Outcome::Exhausted,
            }
        }
        Err(e) => r.error = Some(e.to_string()),
    }
    r
}

fn load_error(path: &Path, e: &DomainError) -> CaseReport {
    CaseReport {
        id: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        path: path.display().to_string(),
        outcome: Outcome::Error,
        elapsed_ms: 0,
        overfit: None,
        program: None,
        // a case that cannot be loaded cannot be vouched for
        regression: true,
        reference_ok: None,
        stats: None,
        error: Some(e.to_string()),
    }
}

/// Runs every case under every mode, cases in parallel.
pub fn run_bench(
    cases: &[(PathBuf, Result<BenchmarkCase, DomainError>)],
    modes: &[Mode],
    settings: impl Fn(Mode) -> SynthSettings + Sync,
) -> BenchOutput {
    let reports = modes
        .iter()
        .map(|&mode| {
            let s = settings(mode);
            let cases = cases
                .par_iter()
                .map(|(path, case)| match case {
                    Ok(c) => run_case(path, c, &s),
                    Err(e) => load_error(path, e),
                })
                .collect();
            RunReport::new(mode, cases)
        })
        .collect();
    BenchOutput { reports }
}
