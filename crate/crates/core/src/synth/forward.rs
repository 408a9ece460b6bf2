//! Forward enumeration of transform statements by depth.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::{Hash, Hasher};

use super::rowset::RowSet;
use super::{Deadline, SynthSettings, TimedOut};
use crate::dsl::{
    exec_groupjoin, exec_join, exec_order, Agg, Atom, CompiledPredicate, PredSymbol, Predicate,
    TransformOp, TransformStmt,
};
use crate::table::{ColumnType, Schema, Table, Value};

/// A table reachable from the inputs, with the statement producing it.
#[derive(Debug, Clone)]
pub struct ForwardEntry {
    /// `None` for input tables.
    pub stmt: Option<TransformStmt>,
    pub table: Table,
    pub depth: usize,
    /// Indices of the input tables this entry derives from.
    pub roots: BTreeSet<usize>,
}

impl ForwardEntry {
    pub fn name(&self) -> &str {
        self.table.name()
    }
}

#[derive(Default)]
struct PredLevels {
    // levels[k - 1] holds predicates with k symbols
    levels: Vec<Vec<(Predicate, RowSet)>>,
    seen: HashSet<RowSet>,
}

/// Every forward table found so far, in creation order. Creation order is
/// also a topological order of the statements.
pub struct ForwardSet {
    entries: Vec<ForwardEntry>,
    by_hash: HashMap<u64, Vec<usize>>,
    by_name: HashMap<String, usize>,
    next_name: usize,
    merge: bool,
    cap: usize,
    preds: HashMap<usize, PredLevels>,
}

fn table_hash(t: &Table) -> u64 {
    let mut h = DefaultHasher::new();
    t.hash(&mut h);
    h.finish()
}

impl ForwardSet {
    pub fn new(inputs: &[Table], settings: &SynthSettings) -> Self {
        let mut s = ForwardSet {
            entries: Vec::new(),
            by_hash: HashMap::new(),
            by_name: HashMap::new(),
            next_name: 1,
            merge: settings.merge_equivalent,
            cap: settings.max_forward_tables,
            preds: HashMap::new(),
        };
        for (i, t) in inputs.iter().enumerate() {
            s.push(ForwardEntry {
                stmt: None,
                table: t.clone(),
                depth: 0,
                roots: BTreeSet::from([i]),
            });
        }
        s
    }

    pub fn entries(&self) -> &[ForwardEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &ForwardEntry {
        &self.entries[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.cap
    }

    fn push(&mut self, e: ForwardEntry) {
        let i = self.entries.len();
        self.by_hash
            .entry(table_hash(&e.table))
            .or_default()
            .push(i);
        self.by_name.insert(e.name().to_string(), i);
        self.entries.push(e);
    }

    fn contains_equal(&self, t: &Table) -> bool {
        self.by_hash
            .get(&table_hash(t))
            .is_some_and(|ix| ix.iter().any(|&i| self.entries[i].table == *t))
    }

    fn fresh_name(&mut self) -> String {
        loop {
            let n = format!("t{}", self.next_name);
            self.next_name += 1;
            if !self.by_name.contains_key(&n) {
                return n;
            }
        }
    }

    /// Adds the result of `op` unless an equal table exists (when merging)
    /// or the set is full. Returns whether it was added.
    fn add(&mut self, op: TransformOp, table: Table, depth: usize) -> bool {
        if self.is_full() || (self.merge && self.contains_equal(&table)) {
            return false;
        }
        let roots = op
            .sources()
            .iter()
            .flat_map(|s| self.entries[self.by_name[*s]].roots.iter().copied())
            .collect();
        let target = self.fresh_name();
        self.push(ForwardEntry {
            stmt: Some(TransformStmt {
                target: target.clone(),
                op,
            }),
            table: table.renamed(target),
            depth,
            roots,
        });
        true
    }
}

/// Adds every table of exactly depth `d` built from the existing entries.
/// Returns the number of entries added.
pub fn expand(
    forward: &mut ForwardSet,
    d: usize,
    constants: &[Value],
    settings: &SynthSettings,
    deadline: &Deadline,
) -> Result<usize, TimedOut> {
    let before = forward.len();
    let n = before;

    // Filters: a k-symbol predicate over an entry of depth d - k.
    for i in 0..n {
        deadline.check()?;
        let depth = forward.entries[i].depth;
        if depth >= d {
            continue;
        }
        let k = d - depth;
        let mut levels = forward.preds.remove(&i).unwrap_or_default();
        let res = fill_levels(
            &mut levels,
            &forward.entries[i].table,
            constants,
            k,
            settings.max_predicates_per_level,
            deadline,
        );
        let preds: Vec<(Predicate, RowSet)> = levels.levels.get(k - 1).cloned().unwrap_or_default();
        forward.preds.insert(i, levels);
        res?;
        for (pred, rows) in preds {
            let src = &forward.entries[i].table;
            let table = src.select_rows(rows.iter());
            let op = TransformOp::Filter {
                src: src.name().to_string(),
                pred,
            };
            forward.add(op, table, d);
        }
    }

    // Joins over Id columns; at least one operand has depth d - 1.
    for a in 0..n {
        deadline.check()?;
        for b in a + 1..n {
            let (ea, eb) = (&forward.entries[a], &forward.entries[b]);
            if ea.depth.max(eb.depth) + 1 != d {
                continue;
            }
            let shared_root = !ea.roots.is_disjoint(&eb.roots);
            let ids = |s: &Schema| -> Vec<String> {
                s.columns()
                    .iter()
                    .filter(|c| c.ty == ColumnType::Id)
                    .map(|c| c.name.clone())
                    .collect()
            };
            let mut ops = Vec::new();
            for ca in ids(ea.table.schema()) {
                for cb in ids(eb.table.schema()) {
                    if shared_root && ca == cb {
                        continue;
                    }
                    let size = join_size(&ea.table, &eb.table, &ca, &cb);
                    if size == 0 || size > settings.max_join_rows {
                        continue;
                    }
                    ops.push((ca.clone(), cb));
                }
            }
            for (ca, cb) in ops {
                let (ta, tb) = (&forward.entries[a].table, &forward.entries[b].table);
                let Ok(table) = exec_join(ta, tb, &ca, &cb) else {
                    continue;
                };
                let op = TransformOp::Join {
                    left: ta.name().to_string(),
                    right: tb.name().to_string(),
                    left_col: ca,
                    right_col: cb,
                };
                forward.add(op, table, d);
            }
        }
    }

    // Group-joins and orders over entries of depth d - 1.
    for i in 0..n {
        deadline.check()?;
        if forward.entries[i].depth + 1 != d {
            continue;
        }
        let src = forward.entries[i].table.clone();
        for (index, aggs) in groupjoin_candidates(&src, settings.max_agg_subset) {
            let Ok(table) = exec_groupjoin(&src, &index, &aggs) else {
                continue;
            };
            let op = TransformOp::GroupJoin {
                src: src.name().to_string(),
                index,
                aggs,
            };
            forward.add(op, table, d);
        }
        for (col, index) in order_candidates(&src) {
            let Ok(table) = exec_order(&src, &col, 0, false, index.as_deref()) else {
                continue;
            };
            if redundant_last_column(&src, &table) {
                continue;
            }
            let op = TransformOp::Order {
                src: src.name().to_string(),
                col,
                start: 0,
                descending: false,
                index,
            };
            forward.add(op, table, d);
        }
    }
    Ok(forward.len() - before)
}

fn join_size(a: &Table, b: &Table, ca: &str, cb: &str) -> usize {
    let (Some(ia), Some(ib)) = (a.schema().index_of(ca), b.schema().index_of(cb)) else {
        return 0;
    };
    let mut counts: HashMap<&Value, usize> = HashMap::new();
    for r in b.rows() {
        *counts.entry(&r[ib]).or_default() += 1;
    }
    a.rows()
        .iter()
        .map(|r| counts.get(&r[ia]).copied().unwrap_or(0))
        .sum()
}

fn column(t: &Table, i: usize) -> Vec<&Value> {
    t.rows().iter().map(|r| &r[i]).collect()
}

fn distinct_count(vals: &[&Value]) -> usize {
    vals.iter().collect::<HashSet<_>>().len()
}

/// Atomic predicates for `schema`, in enumeration order: constant
/// comparisons per column, parity, then column-column comparisons.
pub(crate) fn atoms(schema: &Schema, constants: &[Value]) -> Vec<Atom> {
    use PredSymbol::*;
    let mut out = Vec::new();
    for c in schema.columns() {
        let syms: &[PredSymbol] = match c.ty {
            ColumnType::Int => &[IntEq, IntLt, IntGeq, IntLeq, IntGt],
            ColumnType::Str => &[StrEq, IsSubstring, StartsWith, EndsWith],
            ColumnType::Id => &[],
        };
        for k in constants.iter().filter(|k| k.ty() == c.ty) {
            for &s in syms {
                out.push(Atom::with_const(s, c.name.clone(), k.clone()));
            }
        }
    }
    for c in schema.columns().iter().filter(|c| c.ty == ColumnType::Int) {
        out.push(Atom::unary(IsOdd, c.name.clone()));
        out.push(Atom::unary(IsEven, c.name.clone()));
    }
    let cols = schema.columns();
    for (i, a) in cols.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            if i == j || a.ty != b.ty {
                continue;
            }
            let syms: &[PredSymbol] = match a.ty {
                ColumnType::Int if i < j => &[IntEq, IntLt, IntLeq],
                ColumnType::Int => &[IntLt, IntLeq],
                ColumnType::Str if i < j => &[StrEq, IsSubstring, StartsWith, EndsWith],
                ColumnType::Str => &[IsSubstring, StartsWith, EndsWith],
                ColumnType::Id => &[],
            };
            for &s in syms {
                out.push(Atom::with_col(s, a.name.clone(), b.name.clone()));
            }
        }
    }
    out
}

fn eval_rows(pred: &Predicate, t: &Table) -> Option<RowSet> {
    let cp = CompiledPredicate::new(pred, t.schema()).ok()?;
    Some(RowSet::from_indices(
        t.len(),
        t.rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| cp.eval(r))
            .map(|(i, _)| i),
    ))
}

/// Extends `levels` up to predicates of `k` symbols. Each level keeps only
/// row sets not produced by any smaller predicate; empty and full sets are
/// dropped since they never give a new table.
fn fill_levels(
    levels: &mut PredLevels,
    t: &Table,
    constants: &[Value],
    k: usize,
    cap: usize,
    deadline: &Deadline,
) -> Result<(), TimedOut> {
    let keep = |seen: &mut HashSet<RowSet>, rows: &RowSet| {
        !rows.is_empty() && !rows.is_full() && seen.insert(rows.clone())
    };
    if levels.levels.is_empty() {
        let mut l1 = Vec::new();
        let mut negs = Vec::new();
        for a in atoms(t.schema(), constants) {
            let p = Predicate::Atom(a);
            let Some(rows) = eval_rows(&p, t) else {
                continue;
            };
            negs.push((Predicate::not(p.clone()), rows.complement()));
            if keep(&mut levels.seen, &rows) {
                l1.push((p, rows));
            }
        }
        for (p, rows) in negs {
            if keep(&mut levels.seen, &rows) {
                l1.push((p, rows));
            }
        }
        l1.truncate(cap);
        levels.levels.push(l1);
    }
    while levels.levels.len() < k {
        let size = levels.levels.len() + 1;
        let mut next = Vec::new();
        'outer: for i in 1..=size / 2 {
            let j = size - i;
            for (ai, (pa, ra)) in levels.levels[i - 1].iter().enumerate() {
                deadline.check()?;
                let start = if i == j { ai + 1 } else { 0 };
                for (pb, rb) in &levels.levels[j - 1][start..] {
                    let and = ra.and(rb);
                    if keep(&mut levels.seen, &and) {
                        next.push((Predicate::and(pa.clone(), pb.clone()), and));
                    }
                    let or = ra.or(rb);
                    if keep(&mut levels.seen, &or) {
                        next.push((Predicate::or(pa.clone(), pb.clone()), or));
                    }
                    if next.len() >= cap {
                        break 'outer;
                    }
                }
            }
        }
        levels.levels.push(next);
    }
    Ok(())
}

/// `(index, aggregations)` lists worth trying on `t`.
fn groupjoin_candidates(t: &Table, max_subset: usize) -> Vec<(String, Vec<(Agg, String)>)> {
    let schema = t.schema();
    let existing: Vec<Vec<&Value>> = (0..schema.len()).map(|i| column(t, i)).collect();
    let mut out = Vec::new();
    for (ki, key) in schema.columns().iter().enumerate() {
        if distinct_count(&existing[ki]) == t.len() {
            continue;
        }
        let mut groups: HashMap<&Value, Vec<usize>> = HashMap::new();
        for (r, v) in existing[ki].iter().enumerate() {
            groups.entry(*v).or_default().push(r);
        }
        let mut options: Vec<(Agg, String)> = Vec::new();
        let mut seen_vals: Vec<Vec<i64>> = Vec::new();
        let mut candidates: Vec<(Agg, usize)> = Vec::new();
        for (ci, c) in schema.columns().iter().enumerate() {
            if c.ty == ColumnType::Int {
                for agg in [Agg::Max, Agg::Min, Agg::Sum, Agg::Avg] {
                    candidates.push((agg, ci));
                }
            }
        }
        candidates.push((Agg::Cnt, ki));
        for (agg, ci) in candidates {
            let Some(vals) = agg_values(t, &groups, ki, agg, ci) else {
                continue;
            };
            let as_existing = existing
                .iter()
                .any(|col| col.iter().zip(&vals).all(|(v, x)| v.as_int() == Some(*x)));
            if as_existing || seen_vals.contains(&vals) {
                continue;
            }
            seen_vals.push(vals);
            options.push((agg, schema.columns()[ci].name.clone()));
        }
        for size in 1..=max_subset.min(options.len()) {
            for combo in combinations(options.len(), size) {
                let aggs = combo.iter().map(|&i| options[i].clone()).collect();
                out.push((key.name.clone(), aggs));
            }
        }
    }
    out
}

fn agg_values(
    t: &Table,
    groups: &HashMap<&Value, Vec<usize>>,
    ki: usize,
    agg: Agg,
    ci: usize,
) -> Option<Vec<i64>> {
    let mut per: HashMap<&Value, i64> = HashMap::new();
    for (k, rows) in groups {
        let ints = || rows.iter().map(|&r| t.rows()[r][ci].as_int().unwrap_or(0));
        let v = match agg {
            Agg::Cnt => rows.len() as i64,
            Agg::Max => ints().max()?,
            Agg::Min => ints().min()?,
            Agg::Sum => ints().try_fold(0i64, |a, b| a.checked_add(b))?,
            Agg::Avg => ints().try_fold(0i64, |a, b| a.checked_add(b))? / rows.len() as i64,
        };
        per.insert(*k, v);
    }
    Some(t.rows().iter().map(|r| per[&r[ki]]).collect())
}

/// Index lists of size `k` over `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

fn order_candidates(t: &Table) -> Vec<(String, Option<String>)> {
    let schema = t.schema();
    let useful_index: Vec<&str> = schema
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let d = distinct_count(&column(t, *i));
            d > 1 && d < t.len()
        })
        .map(|(_, c)| c.name.as_str())
        .collect();
    let mut out = Vec::new();
    for c in schema.columns() {
        if c.ty == ColumnType::Id {
            continue;
        }
        out.push((c.name.clone(), None));
        for ix in &useful_index {
            if *ix != c.name {
                out.push((c.name.clone(), Some(ix.to_string())));
            }
        }
    }
    out
}

/// The appended column is constant or repeats an existing column.
fn redundant_last_column(src: &Table, t: &Table) -> bool {
    let last = t.schema().len() - 1;
    let vals = column(t, last);
    if distinct_count(&vals) <= 1 {
        return true;
    }
    (0..src.schema().len()).any(|i| src.rows().iter().zip(&vals).all(|(r, v)| r[i] == **v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::fixtures::*;
    use std::time::Duration;

    fn deadline() -> Deadline {
        Deadline::new(Duration::from_secs(60))
    }

    fn stmt_texts(f: &ForwardSet) -> Vec<String> {
        f.entries()
            .iter()
            .filter_map(|e| e.stmt.as_ref().map(|s| s.to_string()))
            .collect()
    }

    #[test]
    fn depth_one_over_frames_has_parity_filters() {
        let settings = SynthSettings::default();
        let mut f = ForwardSet::new(&[frames_in()], &settings);
        expand(&mut f, 1, &[], &settings, &deadline()).unwrap();
        let texts = stmt_texts(&f);
        assert!(texts.contains(&"t1 = Filter(ti, isOdd(frame));".to_string()));
        assert!(texts.contains(&"t2 = Filter(ti, isEven(frame));".to_string()));
        // no constant pool, no comparisons against constants
        assert!(texts.iter().all(|t| !t.contains("intEq(frame, ")));
        for e in &f.entries()[1..] {
            assert_eq!(e.depth, 1);
        }
    }

    #[test]
    fn equivalent_tables_are_merged() {
        let settings = SynthSettings::default();
        let mut f = ForwardSet::new(&[frames_in()], &settings);
        expand(&mut f, 1, &[], &settings, &deadline()).unwrap();
        let odd = f.get(f.index_of("t1").unwrap()).table.clone();
        let count = f.entries().iter().filter(|e| e.table == odd).count();
        assert_eq!(count, 1);
        // not(isEven(frame)) produces the same rows and is not kept
        assert!(stmt_texts(&f).iter().all(|t| !t.contains("not(isEven")));

        let off = SynthSettings {
            merge_equivalent: false,
            ..SynthSettings::default()
        };
        let mut g = ForwardSet::new(&[frames_in(), frames_in().renamed("tj")], &off);
        expand(&mut g, 1, &[], &off, &deadline()).unwrap();
        assert!(g.len() > f.len());
    }

    #[test]
    fn depth_accounting() {
        let settings = SynthSettings::default();
        let mut f = ForwardSet::new(&[frames(1..=6)], &settings);
        expand(&mut f, 1, &[Value::Int(3)], &settings, &deadline()).unwrap();
        expand(&mut f, 2, &[Value::Int(3)], &settings, &deadline()).unwrap();
        for e in f.entries() {
            let Some(s) = &e.stmt else {
                assert_eq!(e.depth, 0);
                continue;
            };
            let src_depth =
                s.op.sources()
                    .iter()
                    .map(|n| f.get(f.index_of(n).unwrap()).depth)
                    .max()
                    .unwrap();
            assert_eq!(e.depth, src_depth + s.op.own_depth(), "{s}");
        }
        assert!(stmt_texts(&f).iter().any(|t| t.contains("and(")));
    }

    #[test]
    fn joins_groupjoins_orders() {
        let schema = Schema::of(&[
            ("id", ColumnType::Id),
            ("parent", ColumnType::Id),
            ("size", ColumnType::Int),
        ])
        .unwrap();
        let row = |i: &str, p: &str, s: i64| vec![Value::id(i), Value::id(p), Value::Int(s)];
        let t = Table::new(
            "files",
            schema,
            vec![
                row("a", "d", 3),
                row("b", "d", 5),
                row("c", "e", 7),
                row("d", "e", 1),
            ],
        )
        .unwrap();
        let settings = SynthSettings::default();
        let mut f = ForwardSet::new(&[t], &settings);
        expand(&mut f, 1, &[], &settings, &deadline()).unwrap();
        let texts = stmt_texts(&f);
        assert!(texts
            .iter()
            .any(|t| t.contains("GroupJoin(files, parent, (max, size))")));
        assert!(texts
            .iter()
            .any(|t| t.contains("Order(files, size, 0, false)")));
        // group index `id` is unique and never used
        assert!(texts.iter().all(|t| !t.contains("GroupJoin(files, id,")));
        expand(&mut f, 2, &[], &settings, &deadline()).unwrap();
        assert!(stmt_texts(&f).iter().any(|t| t.contains("Join(")));
    }

    #[test]
    fn combinations_in_order() {
        assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(combinations(2, 3), Vec::<Vec<usize>>::new());
    }
}
