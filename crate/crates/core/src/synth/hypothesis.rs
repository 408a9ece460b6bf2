//! Backward decomposition of the output example into ranked sub-tables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use super::rowset::RowSet;
use crate::table::{ColumnType, Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    FullTable,
    SignatureGroup,
    Complement,
}

/// A sub-table of the output example, by row index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub rows: RowSet,
    pub score: i64,
    pub provenance: Provenance,
}

/// Consistency score of `rows` within `out`: for each column, one point
/// each for a single value, consecutive integers and concat coverage,
/// multiplied by the row count.
pub fn score_subtable(out: &Table, rows: &RowSet, inputs: &[Table]) -> i64 {
    Scorer::new(out, inputs).score(rows)
}

pub(crate) struct Scorer {
    types: Vec<ColumnType>,
    cells: Vec<Vec<Value>>,
    // concat_ok[row][col], false for non-Str columns
    concat_ok: Vec<Vec<bool>>,
}

impl Scorer {
    pub(crate) fn new(out: &Table, inputs: &[Table]) -> Self {
        let input_rows: Vec<Vec<&str>> = inputs
            .iter()
            .flat_map(|t| t.rows())
            .map(|r| r.iter().filter_map(Value::as_str).collect::<Vec<_>>())
            .filter(|fields| !fields.is_empty())
            .collect();
        let types = out.schema().types();
        let concat_ok = out
            .rows()
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| match v {
                        Value::Str(s) => input_rows.iter().any(|f| greedy_cover(s, f)),
                        _ => false,
                    })
                    .collect()
            })
            .collect();
        Scorer {
            types,
            cells: out.rows().to_vec(),
            concat_ok,
        }
    }

    pub(crate) fn concat_ok(&self, row: usize, col: usize) -> bool {
        self.concat_ok[row][col]
    }

    pub(crate) fn score(&self, rows: &RowSet) -> i64 {
        let idx: Vec<usize> = rows.iter().collect();
        if idx.is_empty() {
            return 0;
        }
        let mut per_row = 0i64;
        for (c, ty) in self.types.iter().enumerate() {
            let first = &self.cells[idx[0]][c];
            if idx.iter().all(|&r| self.cells[r][c] == *first) {
                per_row += 1;
            }
            if *ty == ColumnType::Int && idx.len() >= 2 {
                let mut vals: Vec<i64> = idx
                    .iter()
                    .filter_map(|&r| self.cells[r][c].as_int())
                    .collect();
                vals.sort_unstable();
                if vals.windows(2).all(|w| w[0].checked_add(1) == Some(w[1])) {
                    per_row += 1;
                }
            }
            if *ty == ColumnType::Str && idx.iter().all(|&r| self.concat_ok[r][c]) {
                per_row += 1;
            }
        }
        per_row * idx.len() as i64
    }
}

/// Whether `s` splits into pieces that are each a substring of some field,
/// taking the longest piece at every step.
fn greedy_cover(s: &str, fields: &[&str]) -> bool {
    let bounds: Vec<usize> = s
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(s.len()))
        .collect();
    let mut at = 0;
    while at + 1 < bounds.len() {
        let start = bounds[at];
        let step = (at + 1..bounds.len()).rev().find(|&e| {
            let piece = &s[start..bounds[e]];
            fields.iter().any(|f| f.contains(piece))
        });
        match step {
            Some(e) => at = e,
            None => return false,
        }
    }
    true
}

fn rank_cmp(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .cmp(&a.score)
        .then(b.rows.count().cmp(&a.rows.count()))
        .then(a.rows.canonical_cmp(&b.rows))
}

/// Bounded stream of hypotheses, best first, with rank updates driven by
/// successful matches.
pub struct HypothesisGenerator {
    n: usize,
    scorer: Scorer,
    bound: usize,
    pending: Vec<Hypothesis>,
    demoted: Vec<Hypothesis>,
    front: VecDeque<Hypothesis>,
    emitted: HashSet<RowSet>,
    ranked_emitted: usize,
    matched: Vec<RowSet>,
}

impl HypothesisGenerator {
    pub fn new(out: &Table, inputs: &[Table], bound: usize) -> Self {
        let scorer = Scorer::new(out, inputs);
        let n = out.len();
        let mut g = HypothesisGenerator {
            n,
            bound,
            pending: Vec::new(),
            demoted: Vec::new(),
            front: VecDeque::new(),
            emitted: HashSet::new(),
            ranked_emitted: 0,
            matched: Vec::new(),
            scorer,
        };
        let pool = candidate_pool(out, inputs, &g.scorer, bound);
        g.pending = pool
            .into_iter()
            .map(|(rows, provenance)| g.hypothesis(rows, provenance))
            .collect();
        g.pending.sort_by(rank_cmp);
        g
    }

    fn hypothesis(&self, rows: RowSet, provenance: Provenance) -> Hypothesis {
        Hypothesis {
            score: self.scorer.score(&rows),
            rows,
            provenance,
        }
    }

    /// Hypotheses still queued for ranked emission, best first.
    pub fn pending(&self) -> impl Iterator<Item = &Hypothesis> {
        self.front
            .iter()
            .chain(&self.pending)
            .chain(&self.demoted)
            .filter(|h| !self.emitted.contains(&h.rows))
    }

    fn queued(&self, rows: &RowSet) -> bool {
        self.pending
            .iter()
            .chain(&self.demoted)
            .any(|h| h.rows == *rows)
    }

    fn emit(&mut self, h: Hypothesis) -> Hypothesis {
        self.emitted.insert(h.rows.clone());
        let c = h.rows.complement();
        if !c.is_empty() && !self.emitted.contains(&c) && !self.queued(&c) {
            let ch = self.hypothesis(c, Provenance::Complement);
            // keep emission in rank order; a better-ranked complement only
            // comes forward through update_rank
            if rank_cmp(&ch, &h) == Ordering::Less {
                return h;
            }
            let at = self
                .pending
                .partition_point(|p| rank_cmp(p, &ch) == Ordering::Less);
            self.pending.insert(at, ch);
        }
        h
    }

    /// Records a successful match: queued subsets of `matched` move behind
    /// everything else, and the rows it leaves uncovered move to the front.
    pub fn update_rank(&mut self, matched: &Hypothesis) {
        self.matched.push(matched.rows.clone());
        let (sub, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|h| h.rows.is_subset(&matched.rows));
        self.pending = keep;
        self.demoted.extend(sub);
        self.demoted.sort_by(rank_cmp);

        let mut promote = vec![matched.rows.complement()];
        let mut union = RowSet::empty(self.n);
        for m in &self.matched {
            if m.is_disjoint(&union) {
                union = union.or(m);
            }
        }
        promote.push(union.complement());
        for rows in promote {
            if rows.is_empty()
                || self.emitted.contains(&rows)
                || self.front.iter().any(|h| h.rows == rows)
            {
                continue;
            }
            self.pending.retain(|h| h.rows != rows);
            self.demoted.retain(|h| h.rows != rows);
            let h = self.hypothesis(rows, Provenance::Complement);
            self.front.push_back(h);
        }
    }
}

impl Iterator for HypothesisGenerator {
    type Item = Hypothesis;

    fn next(&mut self) -> Option<Hypothesis> {
        loop {
            if let Some(h) = self.front.pop_front() {
                if self.emitted.contains(&h.rows) {
                    continue;
                }
                return Some(self.emit(h));
            }
            if self.ranked_emitted >= self.bound {
                return None;
            }
            let h = if !self.pending.is_empty() {
                self.pending.remove(0)
            } else if !self.demoted.is_empty() {
                self.demoted.remove(0)
            } else {
                return None;
            };
            if self.emitted.contains(&h.rows) {
                continue;
            }
            self.ranked_emitted += 1;
            return Some(self.emit(h));
        }
    }
}

/// Candidate sub-tables. When the whole power set fits in the bound it is
/// used directly; otherwise the pool holds the full table, value groups,
/// consecutive runs, concat-feasible groups, collinear groups and pairwise
/// intersections of those.
fn candidate_pool(
    out: &Table,
    inputs: &[Table],
    scorer: &Scorer,
    bound: usize,
) -> Vec<(RowSet, Provenance)> {
    let n = out.len();
    if n == 0 {
        return Vec::new();
    }
    if n < 64 && (1u64 << n) - 1 <= bound as u64 {
        return (1..(1u64 << n))
            .map(|m| {
                let rows = RowSet::from_mask(n, m);
                let p = if rows.is_full() {
                    Provenance::FullTable
                } else {
                    Provenance::SignatureGroup
                };
                (rows, p)
            })
            .collect();
    }

    let full = RowSet::full(n);
    let mut seen: HashSet<RowSet> = HashSet::from([full.clone()]);
    let mut base: Vec<RowSet> = Vec::new();
    let mut add = |rows: RowSet, base: &mut Vec<RowSet>| {
        if !rows.is_empty() && seen.insert(rows.clone()) {
            base.push(rows);
        }
    };

    let types = out.schema().types();
    for (c, ty) in types.iter().enumerate() {
        let mut groups: BTreeMap<&Value, Vec<usize>> = BTreeMap::new();
        for (r, row) in out.rows().iter().enumerate() {
            groups.entry(&row[c]).or_default().push(r);
        }
        for g in groups.into_values() {
            add(RowSet::from_indices(n, g), &mut base);
        }
        if *ty == ColumnType::Int {
            for run in consecutive_runs(out, c) {
                add(run, &mut base);
            }
        }
        if *ty == ColumnType::Str {
            add(
                RowSet::from_indices(n, (0..n).filter(|&r| scorer.concat_ok(r, c))),
                &mut base,
            );
        }
    }
    for g in collinear_groups(out, inputs) {
        add(g, &mut base);
    }

    let multi: Vec<&RowSet> = base.iter().filter(|r| r.count() > 1).collect();
    let mut inter = Vec::new();
    for (i, a) in multi.iter().enumerate() {
        for b in &multi[i + 1..] {
            let x = a.and(b);
            if !x.is_empty() && seen.insert(x.clone()) {
                inter.push(x);
            }
        }
    }

    let mut pool = vec![(full, Provenance::FullTable)];
    pool.extend(
        base.into_iter()
            .chain(inter)
            .map(|r| (r, Provenance::SignatureGroup)),
    );
    pool
}

/// Maximal runs of consecutive distinct values in Int column `c`, length 2
/// or more.
fn consecutive_runs(out: &Table, c: usize) -> Vec<RowSet> {
    let n = out.len();
    let mut by_val: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (r, row) in out.rows().iter().enumerate() {
        if let Some(v) = row[c].as_int() {
            by_val.entry(v).or_default().push(r);
        }
    }
    let mut runs = Vec::new();
    let mut cur: Vec<(i64, &Vec<usize>)> = Vec::new();
    let flush = |cur: &mut Vec<(i64, &Vec<usize>)>, runs: &mut Vec<RowSet>| {
        if cur.len() >= 2 {
            runs.push(RowSet::from_indices(
                n,
                cur.iter().flat_map(|(_, rs)| rs.iter().copied()),
            ));
        }
        cur.clear();
    };
    for (v, rs) in &by_val {
        if let Some((last, _)) = cur.last() {
            if last.checked_add(1) != Some(*v) {
                flush(&mut cur, &mut runs);
            }
        }
        cur.push((*v, rs));
    }
    flush(&mut cur, &mut runs);
    runs
}

/// Rows lying on a common integer line `y = a*x + b`, 3 or more per line.
/// Points pair two Int columns of `out`, or an Int column of `out` with an
/// Int column of an input row reached through a shared Id value.
fn collinear_groups(out: &Table, inputs: &[Table]) -> Vec<RowSet> {
    let n = out.len();
    let types = out.schema().types();
    let ints: Vec<usize> = (0..types.len())
        .filter(|&c| types[c] == ColumnType::Int)
        .collect();
    let mut series: Vec<Vec<(usize, i64, i64)>> = Vec::new();
    let int_at = |row: &[Value], c: usize| row[c].as_int().unwrap_or(0);

    for &x in &ints {
        for &y in &ints {
            if x != y {
                series.push(
                    out.rows()
                        .iter()
                        .enumerate()
                        .map(|(r, row)| (r, int_at(row, x), int_at(row, y)))
                        .collect(),
                );
            }
        }
    }

    let ids: Vec<usize> = (0..types.len())
        .filter(|&c| types[c] == ColumnType::Id)
        .collect();
    for &k in &ids {
        for t in inputs {
            let ttypes = t.schema().types();
            for q in (0..ttypes.len()).filter(|&q| ttypes[q] == ColumnType::Id) {
                let mut by_id: HashMap<&Value, usize> = HashMap::new();
                let mut unique = true;
                for (i, row) in t.rows().iter().enumerate() {
                    unique &= by_id.insert(&row[q], i).is_none();
                }
                if !unique {
                    continue;
                }
                let linked: Vec<(usize, usize)> = out
                    .rows()
                    .iter()
                    .enumerate()
                    .filter_map(|(r, row)| by_id.get(&row[k]).map(|&i| (r, i)))
                    .collect();
                if linked.len() < 3 {
                    continue;
                }
                for p in (0..ttypes.len()).filter(|&p| ttypes[p] == ColumnType::Int) {
                    for &y in &ints {
                        series.push(
                            linked
                                .iter()
                                .map(|&(r, i)| {
                                    (r, int_at(&t.rows()[i], p), int_at(&out.rows()[r], y))
                                })
                                .collect(),
                        );
                    }
                }
            }
        }
    }

    let mut groups = Vec::new();
    let mut seen = HashSet::new();
    for pts in series {
        let mut lines: BTreeMap<(i64, i64), ()> = BTreeMap::new();
        for (i, &(_, x1, y1)) in pts.iter().enumerate() {
            for &(_, x2, y2) in &pts[i + 1..] {
                if x1 == x2 {
                    continue;
                }
                let (Some(dy), Some(dx)) = (y2.checked_sub(y1), x2.checked_sub(x1)) else {
                    continue;
                };
                if dy % dx != 0 {
                    continue;
                }
                let a = dy / dx;
                let Some(b) = a.checked_mul(x1).and_then(|ax| y1.checked_sub(ax)) else {
                    continue;
                };
                lines.insert((a, b), ());
            }
        }
        for (a, b) in lines.into_keys() {
            let members: Vec<usize> = pts
                .iter()
                .filter(|&&(_, x, y)| a.checked_mul(x).and_then(|ax| ax.checked_add(b)) == Some(y))
                .map(|&(r, _, _)| r)
                .collect();
            if members.len() >= 3 {
                let rows = RowSet::from_indices(n, members);
                if !rows.is_full() && seen.insert(rows.clone()) {
                    groups.push(rows);
                }
            }
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::fixtures::*;
    use crate::table::Schema;

    fn set(n: usize, idx: &[usize]) -> RowSet {
        RowSet::from_indices(n, idx.iter().copied())
    }

    fn row_of(out: &Table, frame: i64) -> usize {
        out.rows()
            .iter()
            .position(|r| r[1] == Value::id(format!("f{frame}")))
            .unwrap()
    }

    #[test]
    fn running_example_scores() {
        let out = shift_out();
        let inputs = [frames_in()];
        let odd = set(4, &[row_of(&out, 1), row_of(&out, 3)]);
        assert_eq!(score_subtable(&out, &odd, &inputs), 4);
        let one = set(4, &[0]);
        assert_eq!(score_subtable(&out, &one, &inputs), 5);
    }

    #[test]
    fn consecutive_column_scores_order() {
        let schema = Schema::of(&[("action", ColumnType::Str), ("row", ColumnType::Int)]).unwrap();
        let out = Table::new(
            "out",
            schema,
            (1..=3).map(|i| vec![Value::str("x"), Value::Int(i)]),
        )
        .unwrap();
        // const action + consecutive rows, concat fails without inputs
        assert_eq!(score_subtable(&out, &RowSet::full(3), &[]), 2 * 3);
        assert_eq!(score_subtable(&out, &set(3, &[0, 2]), &[]), 2);
    }

    #[test]
    fn greedy_cover_checks() {
        assert!(greedy_cover("abcde", &["xabc", "de"]));
        assert!(greedy_cover("", &["a"]));
        assert!(!greedy_cover("abz", &["ab"]));
        assert!(greedy_cover("héé", &["é", "h"]));
    }

    #[test]
    fn running_example_pool_contains_both_halves() {
        let out = shift_out();
        let g = HypothesisGenerator::new(&out, &[frames_in()], 20);
        let odd = set(4, &[row_of(&out, 1), row_of(&out, 3)]);
        let even = odd.complement();
        let all: Vec<Hypothesis> = g.collect();
        assert_eq!(all[0].rows, RowSet::full(4));
        assert!(all.iter().any(|h| h.rows == odd));
        assert!(all.iter().any(|h| h.rows == even));
        assert_eq!(all.len(), 15);
    }

    #[test]
    fn single_row_output() {
        let out = shift_rows(&[(1, -30)]);
        let all: Vec<Hypothesis> = HypothesisGenerator::new(&out, &[], 20).collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].provenance, Provenance::FullTable);
    }

    #[test]
    fn emission_order_is_ranked() {
        let rows: Vec<(i64, i64)> = (1..=12).map(|f| (f, f * 7 % 5)).collect();
        let out = shift_rows(&rows);
        let all: Vec<Hypothesis> = HypothesisGenerator::new(&out, &[frames(1..=12)], 20).collect();
        assert!(all.len() >= 20);
        for w in all[..20].windows(2) {
            assert_ne!(rank_cmp(&w[0], &w[1]), Ordering::Greater);
        }
    }

    #[test]
    fn complement_promoted_after_match() {
        let out = shift_rows(
            &(1..=10)
                .map(|f| (f, if f % 2 == 1 { -5 * f - 25 } else { 5 * f + 20 }))
                .collect::<Vec<_>>(),
        );
        let mut g = HypothesisGenerator::new(&out, &[frames(1..=10)], 20);
        let odd =
            RowSet::from_indices(10, (1..=10).filter(|f| f % 2 == 1).map(|f| row_of(&out, f)));
        // whichever half comes first, its complement follows once it matches
        let h = loop {
            let h = g.next().expect("both halves are collinear groups");
            if h.rows == odd || h.rows == odd.complement() {
                break h;
            }
        };
        g.update_rank(&h);
        assert_eq!(g.next().unwrap().rows, h.rows.complement());
    }

    #[test]
    fn matched_full_table_promotes_nothing() {
        let out = shift_out();
        let mut g = HypothesisGenerator::new(&out, &[], 20);
        let h = g.next().unwrap();
        assert!(h.rows.is_full());
        g.update_rank(&h);
        // every remaining candidate is a subset of the match and was demoted
        assert!(g.front.is_empty());
        assert!(g.pending.is_empty());
        assert_eq!(g.demoted.len(), 14);
    }

    #[test]
    fn subsets_of_match_move_behind() {
        // five rows with no structure beyond the shared action
        let schema = Schema::of(&[("action", ColumnType::Str), ("v", ColumnType::Int)]).unwrap();
        let out = Table::new(
            "out",
            schema,
            [0, 10, 20, 35, 51].map(|v| vec![Value::str("a"), Value::Int(v)]),
        )
        .unwrap();
        let mut g = HypothesisGenerator::new(&out, &[], 40);
        let three = set(5, &[0, 1, 2]);
        g.update_rank(&Hypothesis {
            rows: three.clone(),
            score: 0,
            provenance: Provenance::SignatureGroup,
        });
        let order: Vec<RowSet> = g.pending().map(|h| h.rows.clone()).collect();
        let first_sub = order.iter().position(|r| r.is_subset(&three)).unwrap();
        assert!(order[first_sub..].iter().all(|r| r.is_subset(&three)));
        assert_eq!(order[0], set(5, &[3, 4]));
    }
}
