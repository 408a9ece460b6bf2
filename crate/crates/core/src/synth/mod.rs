//! Program search: forward enumeration of transform statements, backward
//! decomposition of the output example into ranked hypotheses, and feature
//! solving where the two meet.

mod assemble;
mod forward;
mod hypothesis;
mod matching;
mod rowset;
mod strategy;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{ActionSignature, Program};
use crate::features::SolverCaps;
use crate::table::{Table, Value};

pub use assemble::{assemble_mapping, assemble_program, Matched};
pub use forward::{expand, ForwardEntry, ForwardSet};
pub use hypothesis::{score_subtable, Hypothesis, HypothesisGenerator, Provenance};
pub use matching::{build_abstract_table, AbstractTable, ColumnSource, MatchResult, Matcher};
pub use rowset::RowSet;
pub use strategy::{Bidirectional, ForwardOnly, SearchStrategy, Session, Stop, StrategyRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "bi")]
    Bidirectional,
    #[serde(rename = "forward-only")]
    ForwardOnly,
}

impl Mode {
    /// Registry name of the strategy implementing this mode.
    pub fn name(self) -> &'static str {
        match self {
            Mode::Bidirectional => "bi",
            Mode::ForwardOnly => "forward-only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bi" | "bidirectional" => Ok(Mode::Bidirectional),
            "forward-only" => Ok(Mode::ForwardOnly),
            _ => Err(format!(
                "unknown mode `{s}` (expected `bi` or `forward-only`)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSettings {
    pub max_depth: usize,
    pub hypothesis_bound: usize,
    pub timeout: Duration,
    pub mode: Mode,
    pub caps: SolverCaps,
    /// Largest aggregation list per group-join.
    pub max_agg_subset: usize,
    /// Forward tables beyond this count are discarded.
    pub max_forward_tables: usize,
    /// Distinct filter predicates kept per size and source table.
    pub max_predicates_per_level: usize,
    /// Joins producing more rows are skipped.
    pub max_join_rows: usize,
    /// Try every surjection from small base tables when no anchor exists.
    pub exhaustive_surjections: bool,
    pub cache_solvers: bool,
    /// Merge observationally equal forward tables.
    pub merge_equivalent: bool,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            max_depth: 3,
            hypothesis_bound: 20,
            timeout: Duration::from_secs(120),
            mode: Mode::Bidirectional,
            caps: SolverCaps::default(),
            max_agg_subset: 2,
            max_forward_tables: 20_000,
            max_predicates_per_level: 4_000,
            max_join_rows: 10_000,
            exhaustive_surjections: false,
            cache_solvers: true,
            merge_equivalent: true,
        }
    }
}

impl SynthSettings {
    pub fn check(&self) -> Result<(), SynthError> {
        let positive = [
            ("max_depth", self.max_depth),
            ("hypothesis_bound", self.hypothesis_bound),
            ("max_agg_subset", self.max_agg_subset),
            ("max_forward_tables", self.max_forward_tables),
            ("max_predicates_per_level", self.max_predicates_per_level),
            ("max_join_rows", self.max_join_rows),
            ("div_max", self.caps.div_max.max(0) as usize),
            ("max_segments", self.caps.max_segments),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SynthError::InvalidTask(format!("{name} must be positive")));
            }
        }
        if self.timeout.is_zero() {
            return Err(SynthError::InvalidTask("timeout must be positive".into()));
        }
        Ok(())
    }
}

/// Example inputs, the output example for one action, and the constant pool.
#[derive(Debug, Clone)]
pub struct SynthTask {
    pub inputs: Vec<Table>,
    pub output: Table,
    pub action: ActionSignature,
    pub constants: Vec<Value>,
    pub settings: SynthSettings,
}

impl SynthTask {
    pub fn new(
        inputs: Vec<Table>,
        output: Table,
        action: ActionSignature,
        constants: Vec<Value>,
    ) -> Self {
        SynthTask {
            inputs,
            output,
            action,
            constants,
            settings: SynthSettings::default(),
        }
    }

    pub fn with_settings(mut self, settings: SynthSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn check(&self) -> Result<(), SynthError> {
        self.settings.check()?;
        let bad = |m: String| Err(SynthError::InvalidTask(m));
        let schema = self
            .action
            .schema()
            .map_err(|e| SynthError::InvalidTask(e.to_string()))?;
        if *self.output.schema() != schema {
            return bad(format!(
                "output schema does not match action `{}`",
                self.action.name
            ));
        }
        if self.output.is_empty() {
            return bad("output example is empty".into());
        }
        let action = Value::str(&self.action.name);
        if self.output.rows().iter().any(|r| r[0] != action) {
            return bad(format!(
                "output rows must all carry action `{}`",
                self.action.name
            ));
        }
        let mut names = HashSet::new();
        for t in &self.inputs {
            if !names.insert(t.name()) {
                return bad(format!("duplicate input table `{}`", t.name()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthStats {
    pub elapsed_ms: u64,
    pub forward_tables: usize,
    pub hypotheses_tried: usize,
    pub matches_solved: usize,
    pub mode: Mode,
}

impl SynthStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

#[derive(Debug, Clone)]
pub struct SynthResult {
    pub program: Program,
    pub stats: SynthStats,
}

#[derive(Debug, Clone)]
pub enum SynthOutcome {
    Solved(SynthResult),
    Timeout(SynthStats),
    Exhausted(SynthStats),
}

impl SynthOutcome {
    pub fn stats(&self) -> &SynthStats {
        match self {
            SynthOutcome::Solved(r) => &r.stats,
            SynthOutcome::Timeout(s) | SynthOutcome::Exhausted(s) => s,
        }
    }

    pub fn program(&self) -> Option<&Program> {
        match self {
            SynthOutcome::Solved(r) => Some(&r.program),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SynthOutcome::Solved(_) => "solved",
            SynthOutcome::Timeout(_) => "timeout",
            SynthOutcome::Exhausted(_) => "exhausted",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    /// A candidate failed verification; indicates an engine bug.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("unknown search strategy `{0}`")]
    UnknownStrategy(String),
}

/// Raised from inside the search when the budget runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedOut;

#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    start: Instant,
    limit: Duration,
}

impl Deadline {
    pub fn new(limit: Duration) -> Self {
        Deadline {
            start: Instant::now(),
            limit,
        }
    }

    pub fn check(&self) -> Result<(), TimedOut> {
        if self.start.elapsed() >= self.limit {
            Err(TimedOut)
        } else {
            Ok(())
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}

/// Runs the strategy selected by `task.settings.mode`.
pub fn synthesize(task: &SynthTask) -> Result<SynthOutcome, SynthError> {
    StrategyRegistry::builtin().run(task.settings.mode.name(), task)
}

/// The baseline without backward search, regardless of `task.settings.mode`.
pub fn synthesize_forward_only(task: &SynthTask) -> Result<SynthOutcome, SynthError> {
    let mut t = task.clone();
    t.settings.mode = Mode::ForwardOnly;
    synthesize(&t)
}
