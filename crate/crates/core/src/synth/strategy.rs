//! Search strategies over a shared session state, looked up by name.

use std::collections::{HashMap, HashSet};

use super::assemble::{assemble_mapping, assemble_program, Matched};
use super::forward::{expand, ForwardSet};
use super::hypothesis::{Hypothesis, HypothesisGenerator, Provenance};
use super::matching::Matcher;
use super::rowset::RowSet;
use super::{
    Deadline, Mode, SynthError, SynthOutcome, SynthResult, SynthStats, SynthTask, TimedOut,
};
use crate::dsl::{MappingStmt, Program};
use crate::features::FeatureRegistry;

/// Why a search stopped without a program.
#[derive(Debug)]
pub enum Stop {
    Timeout,
    Error(SynthError),
}

impl From<TimedOut> for Stop {
    fn from(_: TimedOut) -> Self {
        Stop::Timeout
    }
}

impl From<SynthError> for Stop {
    fn from(e: SynthError) -> Self {
        Stop::Error(e)
    }
}

/// State of one synthesis run.
pub struct Session<'a> {
    pub task: &'a SynthTask,
    pub forward: ForwardSet,
    pub matcher: Matcher,
    pub deadline: Deadline,
    pub matched: Vec<Matched>,
    pub hypotheses_tried: usize,
}

impl<'a> Session<'a> {
    pub fn new(task: &'a SynthTask) -> Self {
        let deadline = Deadline::new(task.settings.timeout);
        Session {
            task,
            forward: ForwardSet::new(&task.inputs, &task.settings),
            matcher: Matcher::new(
                task.action.clone(),
                FeatureRegistry::builtin(),
                &task.settings,
                deadline,
            ),
            deadline,
            matched: Vec::new(),
            hypotheses_tried: 0,
        }
    }

    pub fn expand(&mut self, d: usize) -> Result<usize, TimedOut> {
        expand(
            &mut self.forward,
            d,
            &self.task.constants,
            &self.task.settings,
            &self.deadline,
        )
    }

    pub fn record(&mut self, rows: RowSet, score: i64, entry: usize, stmt: MappingStmt) {
        self.matched.push(Matched {
            rows,
            score,
            entry,
            stmt,
        });
    }

    /// A verified program if the matches so far cover the output.
    pub fn try_assemble(&self) -> Result<Option<Program>, SynthError> {
        let Some(cover) = assemble_mapping(&self.matched, self.task.output.len()) else {
            return Ok(None);
        };
        assemble_program(
            &self.forward,
            &cover,
            &self.task.inputs,
            &self.task.output,
            &self.task.action,
        )
        .map(Some)
    }

    pub fn stats(&self, mode: Mode) -> SynthStats {
        SynthStats {
            elapsed_ms: self.deadline.elapsed().as_millis() as u64,
            forward_tables: self.forward.len(),
            hypotheses_tried: self.hypotheses_tried,
            matches_solved: self.matched.len(),
            mode,
        }
    }
}

pub trait SearchStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn mode(&self) -> Mode;

    /// `Ok(None)` once every depth is exhausted without a cover.
    fn search(&self, session: &mut Session<'_>) -> Result<Option<Program>, Stop>;
}

/// Forward expansion meets backward hypotheses at each depth.
pub struct Bidirectional;

impl SearchStrategy for Bidirectional {
    fn name(&self) -> &'static str {
        "bi"
    }

    fn mode(&self) -> Mode {
        Mode::Bidirectional
    }

    fn search(&self, s: &mut Session<'_>) -> Result<Option<Program>, Stop> {
        let task = s.task;
        let out = &task.output;
        // forward-set length at the last attempt of each hypothesis
        let mut tried: HashMap<RowSet, usize> = HashMap::new();
        for d in 1..=task.settings.max_depth {
            s.expand(d)?;
            let mut gen =
                HypothesisGenerator::new(out, &task.inputs, task.settings.hypothesis_bound);
            for m in &s.matched {
                gen.update_rank(&Hypothesis {
                    rows: m.rows.clone(),
                    score: m.score,
                    provenance: Provenance::SignatureGroup,
                });
            }
            while let Some(h) = gen.next() {
                s.deadline.check()?;
                if s.matched.iter().any(|m| m.rows == h.rows) {
                    continue;
                }
                let from = tried.get(&h.rows).copied().unwrap_or(0);
                if from >= s.forward.len() {
                    continue;
                }
                s.hypotheses_tried += 1;
                let sub = out.select_rows(h.rows.iter());
                let found = s
                    .matcher
                    .match_hypothesis(&sub, &s.forward.entries()[from..])?;
                tried.insert(h.rows.clone(), s.forward.len());
                if let Some((i, stmt, _)) = found {
                    s.record(h.rows.clone(), h.score, from + i, stmt);
                    gen.update_rank(&h);
                    if let Some(p) = s.try_assemble()? {
                        return Ok(Some(p));
                    }
                }
            }
        }
        Ok(None)
    }
}

/// The baseline: every forward table against every subset of the output,
/// largest subsets first, with no ranking.
pub struct ForwardOnly;

const TIMEOUT_CHECK_EVERY: usize = 64;

impl SearchStrategy for ForwardOnly {
    fn name(&self) -> &'static str {
        "forward-only"
    }

    fn mode(&self) -> Mode {
        Mode::ForwardOnly
    }

    fn search(&self, s: &mut Session<'_>) -> Result<Option<Program>, Stop> {
        let task = s.task;
        let out = &task.output;
        let n = out.len();
        let mut done = 0;
        let mut matched_rows: HashSet<RowSet> = HashSet::new();
        let mut ticks = 0usize;
        for d in 1..=task.settings.max_depth {
            s.expand(d)?;
            let end = s.forward.len();
            for e in done..end {
                let base = s.forward.get(e).table.clone();
                for size in (1..=n.min(base.len())).rev() {
                    let mut comb: Vec<usize> = (0..size).collect();
                    loop {
                        ticks += 1;
                        if ticks % TIMEOUT_CHECK_EVERY == 0 {
                            s.deadline.check()?;
                        }
                        let rows = RowSet::from_indices(n, comb.iter().copied());
                        if !matched_rows.contains(&rows) {
                            s.hypotheses_tried += 1;
                            let sub = out.select_rows(comb.iter().copied());
                            if let Some((projections, _)) = s.matcher.match_table(&sub, &base) {
                                let stmt = MappingStmt {
                                    src: base.name().to_string(),
                                    projections,
                                };
                                matched_rows.insert(rows.clone());
                                s.record(rows, 0, e, stmt);
                            }
                        }
                        if !next_combination(&mut comb, n) {
                            break;
                        }
                    }
                }
                if let Some(p) = s.try_assemble()? {
                    return Ok(Some(p));
                }
            }
            done = end;
        }
        Ok(None)
    }
}

/// Advances `comb` (strictly increasing indices below `n`) to the next
/// combination in lexicographic order.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Strategies by name.
pub struct StrategyRegistry {
    strategies: Vec<Box<dyn SearchStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            strategies: Vec::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Bidirectional));
        r.register(Box::new(ForwardOnly));
        r
    }

    /// Adds a strategy, replacing any registered under the same name.
    pub fn register(&mut self, s: Box<dyn SearchStrategy>) {
        self.strategies.retain(|x| x.name() != s.name());
        self.strategies.push(s);
    }

    pub fn get(&self, name: &str) -> Option<&dyn SearchStrategy> {
        self.strategies
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.iter().map(|s| s.name()).collect()
    }

    pub fn run(&self, name: &str, task: &SynthTask) -> Result<SynthOutcome, SynthError> {
        let strategy = self
            .get(name)
            .ok_or_else(|| SynthError::UnknownStrategy(name.to_string()))?;
        task.check()?;
        let mut session = Session::new(task);
        let res = strategy.search(&mut session);
        let stats = session.stats(strategy.mode());
        match res {
            Ok(Some(program)) => Ok(SynthOutcome::Solved(SynthResult { program, stats })),
            Ok(None) => Ok(SynthOutcome::Exhausted(stats)),
            Err(Stop::Timeout) => Ok(SynthOutcome::Timeout(stats)),
            Err(Stop::Error(e)) => Err(e),
        }
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_advance_lexicographically() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(all.len(), 6);
        assert_eq!(all.last().unwrap(), &vec![2, 3]);
    }

    #[test]
    fn registry_names() {
        let r = StrategyRegistry::builtin();
        assert_eq!(r.names(), vec!["bi", "forward-only"]);
        assert_eq!(r.get("bi").unwrap().mode(), Mode::Bidirectional);
        assert!(r.get("nope").is_none());
    }
}
