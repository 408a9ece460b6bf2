//! Matching a hypothesis against a forward table: find a row surjection and
//! a source for every hypothesis column, solving feature parameters where
//! needed.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use super::forward::ForwardEntry;
use super::{Deadline, SynthSettings, TimedOut};
use crate::dsl::{yield_rows, ActionSignature, MappingStmt, Projection};
use crate::features::{FeatureFamily, FeatureInstance, FeatureRegistry, Sample, SolverCaps};
use crate::table::{ColumnType, Table, Value};

/// A forward table extended with the columns a hypothesis may draw from:
/// constants taken from single-valued hypothesis columns, and one symbolic
/// column per feature family and type-compatible input columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractTable {
    pub base: String,
    pub constant_columns: Vec<Value>,
    pub symbolic_columns: Vec<(FeatureFamily, Vec<String>)>,
}

/// `None` when `t` has fewer rows than `h`, so no surjection exists.
pub fn build_abstract_table(
    t: &Table,
    h: &Table,
    registry: &FeatureRegistry,
) -> Option<AbstractTable> {
    if t.len() < h.len() {
        return None;
    }
    let mut constant_columns = Vec::new();
    for c in 0..h.schema().len() {
        if let Some(v) = single_value(h, c) {
            if !constant_columns.contains(v) {
                constant_columns.push(v.clone());
            }
        }
    }
    Some(AbstractTable {
        base: t.name().to_string(),
        constant_columns,
        symbolic_columns: symbolic_columns(t, registry),
    })
}

fn single_value(h: &Table, c: usize) -> Option<&Value> {
    let first = &h.rows().first()?[c];
    h.rows().iter().all(|r| r[c] == *first).then_some(first)
}

fn symbolic_columns(t: &Table, registry: &FeatureRegistry) -> Vec<(FeatureFamily, Vec<String>)> {
    let cols = t.schema().columns();
    let of_type = |ty: ColumnType| -> Vec<String> {
        cols.iter()
            .filter(|c| c.ty == ty)
            .map(|c| c.name.clone())
            .collect()
    };
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for name in registry.names() {
        let Some(family) = FeatureFamily::ALL.into_iter().find(|f| f.name() == name) else {
            continue;
        };
        let ty = family.input_type();
        let names = of_type(ty);
        let mut combos: Vec<Vec<String>> = names.iter().map(|n| vec![n.clone()]).collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                combos.push(vec![a.clone(), b.clone()]);
            }
        }
        if names.len() > 2 {
            combos.push(names.clone());
        }
        for combo in combos {
            let types = vec![ty; combo.len()];
            if !family.accepts(&types, family.output_type()) {
                continue;
            }
            // concat takes every Str column at once and keeps the ones it uses
            if family == FeatureFamily::Concat && combo.len() != names.len() {
                continue;
            }
            if seen.insert((family, combo.clone())) {
                out.push((family, combo));
            }
        }
    }
    out
}

/// Where a hypothesis column comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSource {
    Col(String),
    Const(Value),
    Feature {
        instance: FeatureInstance,
        cols: Vec<String>,
    },
}

impl ColumnSource {
    fn projection(&self) -> Projection {
        match self {
            ColumnSource::Col(c) => Projection::Col(c.clone()),
            ColumnSource::Const(v) => Projection::Const(v.clone()),
            ColumnSource::Feature { instance, cols } => Projection::Mutate {
                feature: instance.clone(),
                cols: cols.clone(),
            },
        }
    }
}

/// `row_map[i]` is the hypothesis row produced by base row `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub row_map: Vec<usize>,
    pub col_map: Vec<ColumnSource>,
}

/// The hypothesis with lookup structures built once per match attempt.
struct Target<'a> {
    table: &'a Table,
    types: Vec<ColumnType>,
    // value -> row for columns whose values are all distinct
    index: Vec<Option<HashMap<&'a Value, usize>>>,
}

impl<'a> Target<'a> {
    fn new(table: &'a Table) -> Self {
        let types = table.schema().types();
        let index = (0..types.len())
            .map(|c| {
                let mut m = HashMap::with_capacity(table.len());
                for (r, row) in table.rows().iter().enumerate() {
                    if m.insert(&row[c], r).is_some() {
                        return None;
                    }
                }
                Some(m)
            })
            .collect();
        Target {
            table,
            types,
            index,
        }
    }

    fn len(&self) -> usize {
        self.table.len()
    }
}

type CacheKey = (&'static str, Vec<Sample>);

/// Matches hypotheses against forward tables for one action. Holds the
/// solver cache of one synthesis session.
pub struct Matcher {
    action: ActionSignature,
    registry: FeatureRegistry,
    caps: SolverCaps,
    exhaustive: bool,
    cache: Option<RefCell<HashMap<CacheKey, Option<FeatureInstance>>>>,
    deadline: Deadline,
}

const EXHAUSTIVE_LIMIT: usize = 50_000;

impl Matcher {
    pub fn new(
        action: ActionSignature,
        registry: FeatureRegistry,
        settings: &SynthSettings,
        deadline: Deadline,
    ) -> Self {
        Matcher {
            action,
            registry,
            caps: settings.caps.clone(),
            exhaustive: settings.exhaustive_surjections,
            cache: settings.cache_solvers.then(|| RefCell::new(HashMap::new())),
            deadline,
        }
    }

    pub fn registry(&self) -> &FeatureRegistry {
        &self.registry
    }

    /// First entry (in the given order) that `h` matches, with its index in
    /// `entries`.
    pub fn match_hypothesis(
        &self,
        h: &Table,
        entries: &[ForwardEntry],
    ) -> Result<Option<(usize, MappingStmt, MatchResult)>, TimedOut> {
        let target = Target::new(h);
        for (i, e) in entries.iter().enumerate() {
            self.deadline.check()?;
            if let Some((projections, m)) = self.match_target(&target, &e.table) {
                let stmt = MappingStmt {
                    src: e.name().to_string(),
                    projections,
                };
                return Ok(Some((i, stmt, m)));
            }
        }
        Ok(None)
    }

    /// Projections of `base` reproducing `h` exactly, if any.
    pub fn match_table(&self, h: &Table, base: &Table) -> Option<(Vec<Projection>, MatchResult)> {
        self.match_target(&Target::new(h), base)
    }

    fn match_target(&self, tg: &Target, base: &Table) -> Option<(Vec<Projection>, MatchResult)> {
        if tg.len() == 0 || base.len() < tg.len() {
            return None;
        }
        let symbolic = symbolic_columns(base, &self.registry);
        for row_map in self.row_maps(tg, base) {
            let Some(col_map) = self.solve_columns(tg, base, &row_map, &symbolic) else {
                continue;
            };
            let projections: Vec<Projection> =
                col_map.iter().map(ColumnSource::projection).collect();
            match yield_rows(base, &projections, &self.action) {
                Ok(t) if t == *tg.table => {
                    return Some((projections, MatchResult { row_map, col_map }));
                }
                _ => continue,
            }
        }
        None
    }

    /// Candidate surjections from base rows onto hypothesis rows: anchored
    /// on a distinct-valued hypothesis column first, then pairings by sort
    /// order for equal sizes, then (optionally) every surjection.
    fn row_maps(&self, tg: &Target, base: &Table) -> Vec<Vec<usize>> {
        let (m, k) = (base.len(), tg.len());
        if k == 1 {
            return vec![vec![0; m]];
        }
        let btypes = base.schema().types();
        let mut order: Vec<usize> = Vec::new();
        for ty in [ColumnType::Id, ColumnType::Int, ColumnType::Str] {
            order.extend((1..tg.types.len()).filter(|&c| tg.types[c] == ty));
        }
        let mut maps: Vec<Vec<usize>> = Vec::new();
        let push = |map: Vec<usize>, maps: &mut Vec<Vec<usize>>| {
            if !maps.contains(&map) {
                maps.push(map);
            }
        };
        for &j in &order {
            let Some(ix) = &tg.index[j] else { continue };
            for b in (0..btypes.len()).filter(|&b| btypes[b] == tg.types[j]) {
                let map: Option<Vec<usize>> =
                    base.rows().iter().map(|r| ix.get(&r[b]).copied()).collect();
                if let Some(map) = map {
                    if surjective(&map, k) {
                        push(map, &mut maps);
                    }
                }
            }
        }
        if !maps.is_empty() {
            return maps;
        }
        if m == k {
            for &j in &order {
                if tg.types[j] == ColumnType::Id || tg.index[j].is_none() {
                    continue;
                }
                let mut hrows: Vec<usize> = (0..k).collect();
                hrows.sort_by(|&a, &b| tg.table.rows()[a][j].cmp(&tg.table.rows()[b][j]));
                for b in (0..btypes.len()).filter(|&b| btypes[b] == tg.types[j]) {
                    let col: Vec<&Value> = base.rows().iter().map(|r| &r[b]).collect();
                    if col.iter().collect::<HashSet<_>>().len() != m {
                        continue;
                    }
                    let mut brows: Vec<usize> = (0..m).collect();
                    brows.sort_by(|&x, &y| col[x].cmp(col[y]));
                    for desc in [false, true] {
                        let mut map = vec![0; m];
                        for (pos, &br) in brows.iter().enumerate() {
                            let hr = if desc { hrows[k - 1 - pos] } else { hrows[pos] };
                            map[br] = hr;
                        }
                        push(map, &mut maps);
                    }
                }
            }
        }
        if maps.is_empty() && self.exhaustive {
            maps.extend(all_surjections(m, k, EXHAUSTIVE_LIMIT));
        }
        maps
    }

    fn solve_columns(
        &self,
        tg: &Target,
        base: &Table,
        row_map: &[usize],
        symbolic: &[(FeatureFamily, Vec<String>)],
    ) -> Option<Vec<ColumnSource>> {
        let bcols = base.schema().columns();
        let mut out = Vec::with_capacity(tg.types.len());
        for (j, &ty) in tg.types.iter().enumerate() {
            let want: Vec<&Value> = row_map.iter().map(|&r| &tg.table.rows()[r][j]).collect();
            let constant = want.iter().all(|v| *v == want[0]);
            if j == 0 {
                if !constant || want[0].as_str() != Some(&self.action.name) {
                    return None;
                }
                out.push(ColumnSource::Const(want[0].clone()));
                continue;
            }
            let col = bcols.iter().enumerate().find(|(b, c)| {
                c.ty == ty && base.rows().iter().zip(&want).all(|(r, w)| r[*b] == **w)
            });
            if let Some((_, c)) = col {
                out.push(ColumnSource::Col(c.name.clone()));
                continue;
            }
            if constant && ty != ColumnType::Id {
                out.push(ColumnSource::Const(want[0].clone()));
                continue;
            }
            let solved = symbolic
                .iter()
                .filter(|(f, _)| f.output_type() == ty)
                .find_map(|(f, cols)| self.solve_symbolic(*f, cols, base, &want));
            out.push(solved?);
        }
        Some(out)
    }

    fn solve_symbolic(
        &self,
        family: FeatureFamily,
        cols: &[String],
        base: &Table,
        want: &[&Value],
    ) -> Option<ColumnSource> {
        let idx: Vec<usize> = cols
            .iter()
            .map(|c| base.schema().index_of(c))
            .collect::<Option<_>>()?;
        let mut seen: HashMap<Vec<Value>, &Value> = HashMap::new();
        let mut samples = Vec::new();
        for (r, w) in base.rows().iter().zip(want) {
            let inputs: Vec<Value> = idx.iter().map(|&i| r[i].clone()).collect();
            match seen.get(&inputs) {
                Some(prev) if *prev != *w => return None,
                Some(_) => continue,
                None => {
                    seen.insert(inputs.clone(), w);
                    samples.push(Sample {
                        inputs,
                        output: (*w).clone(),
                    });
                }
            }
        }
        let instance = self.solve_cached(family, samples)?;
        if let FeatureInstance::Concat(p) = &instance {
            let (p, used) = p.compact();
            if used.is_empty() {
                return None;
            }
            return Some(ColumnSource::Feature {
                instance: FeatureInstance::Concat(p),
                cols: used.iter().map(|&i| cols[i].clone()).collect(),
            });
        }
        Some(ColumnSource::Feature {
            instance,
            cols: cols.to_vec(),
        })
    }

    fn solve_cached(&self, family: FeatureFamily, samples: Vec<Sample>) -> Option<FeatureInstance> {
        let solver = self.registry.get(family.name())?;
        let Some(cache) = &self.cache else {
            return solver.solve(&samples, &self.caps);
        };
        let key = (solver.name(), samples);
        if let Some(hit) = cache.borrow().get(&key) {
            return hit.clone();
        }
        let res = solver.solve(&key.1, &self.caps);
        cache.borrow_mut().insert(key, res.clone());
        res
    }
}

fn surjective(map: &[usize], k: usize) -> bool {
    let mut hit = vec![false; k];
    for &r in map {
        hit[r] = true;
    }
    hit.into_iter().all(|b| b)
}

/// Every surjection `0..m -> 0..k`, in lexicographic order, stopping after
/// `limit` candidate maps have been examined.
fn all_surjections(m: usize, k: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || m < k {
        return out;
    }
    let mut cur = vec![0usize; m];
    for _ in 0..limit {
        if surjective(&cur, k) {
            out.push(cur.clone());
        }
        // increment as a base-k counter, last position fastest
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < k {
                break;
            }
            cur[i] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{exec_filter, Atom, PredSymbol};
    use crate::table::fixtures::*;
    use crate::table::Schema;
    use std::time::Duration;

    fn sig() -> ActionSignature {
        ActionSignature::from_schema("shift", &shift_schema()).unwrap()
    }

    fn matcher() -> Matcher {
        Matcher::new(
            sig(),
            FeatureRegistry::builtin(),
            &SynthSettings::default(),
            Deadline::new(Duration::from_secs(60)),
        )
    }

    fn odd_u() -> Table {
        exec_filter(
            &frames_in(),
            &Atom::unary(PredSymbol::IsOdd, "frame").into(),
        )
        .unwrap()
        .renamed("u")
    }

    fn text(ps: &[Projection]) -> Vec<String> {
        ps.iter().map(|p| p.to_string()).collect()
    }

    #[test]
    fn abstract_table_of_running_example() {
        let yield1 = shift_rows(&[(1, -30), (3, -40)]);
        let a = build_abstract_table(&odd_u(), &yield1, &FeatureRegistry::builtin()).unwrap();
        assert_eq!(
            a.constant_columns,
            vec![Value::str("shift"), Value::str("GB")]
        );
        let fams: Vec<&str> = a.symbolic_columns.iter().map(|(f, _)| f.name()).collect();
        assert_eq!(fams, vec!["linear", "div", "mod", "substring", "concat"]);
        assert!(a
            .symbolic_columns
            .iter()
            .all(|(_, cols)| !cols.contains(&"id".to_string())));
        assert!(build_abstract_table(
            &shift_rows(&[(1, 0)]).renamed("x"),
            &shift_out(),
            &FeatureRegistry::builtin()
        )
        .is_none());
    }

    #[test]
    fn two_int_columns_add_sum() {
        let schema = Schema::of(&[("a", ColumnType::Int), ("b", ColumnType::Int)]).unwrap();
        let t = Table::new("t", schema, vec![vec![Value::Int(1), Value::Int(2)]]).unwrap();
        let a =
            build_abstract_table(&t, &shift_rows(&[(1, 0)]), &FeatureRegistry::builtin()).unwrap();
        assert!(a
            .symbolic_columns
            .contains(&(FeatureFamily::Sum, vec!["a".into(), "b".into()])));
    }

    #[test]
    fn yield1_matches_odd_table() {
        let (ps, m) = matcher()
            .match_table(&shift_rows(&[(1, -30), (3, -40)]), &odd_u())
            .unwrap();
        assert_eq!(
            text(&ps),
            vec![
                "\"shift\"",
                "id",
                "\"GB\"",
                "linear(-5,-25)(frame)",
                "linear(-5,-25)(frame)"
            ]
        );
        assert_eq!(m.row_map.len(), 2);
    }

    #[test]
    fn yield2_does_not_match_odd_table() {
        assert!(matcher()
            .match_table(&shift_rows(&[(2, 30), (4, 40)]), &odd_u())
            .is_none());
    }

    #[test]
    fn pure_projection() {
        let out = shift_rows(&[(1, 1), (2, 2), (3, 3), (4, 4)]);
        let (ps, _) = matcher().match_table(&out, &frames_in()).unwrap();
        assert_eq!(
            text(&ps),
            vec!["\"shift\"", "id", "\"GB\"", "frame", "frame"]
        );
    }

    #[test]
    fn cache_is_transparent() {
        let off = Matcher::new(
            sig(),
            FeatureRegistry::builtin(),
            &SynthSettings {
                cache_solvers: false,
                ..SynthSettings::default()
            },
            Deadline::new(Duration::from_secs(60)),
        );
        let on = matcher();
        for h in [
            shift_rows(&[(1, -30), (3, -40)]),
            shift_rows(&[(1, 3), (3, 7)]),
            shift_rows(&[(1, 3), (3, 7)]),
            shift_rows(&[(2, 30), (4, 40)]),
        ] {
            assert_eq!(on.match_table(&h, &odd_u()), off.match_table(&h, &odd_u()));
        }
    }

    #[test]
    fn sorted_pairing_without_anchor() {
        // no Id column in the output; rows pair by sorted value
        let sig = ActionSignature::new("put", &[("n", ColumnType::Int)]);
        let out = Table::new(
            "out",
            sig.schema().unwrap(),
            [10, 12, 14].map(|v| vec![Value::str("put"), Value::Int(v)]),
        )
        .unwrap();
        let m = Matcher::new(
            sig,
            FeatureRegistry::builtin(),
            &SynthSettings::default(),
            Deadline::new(Duration::from_secs(60)),
        );
        let (ps, _) = m.match_table(&out, &frames(1..=3)).unwrap();
        assert_eq!(text(&ps), vec!["\"put\"", "linear(2,8)(frame)"]);
    }

    #[test]
    fn surjection_enumeration() {
        let s = all_surjections(3, 2, 1000);
        assert_eq!(s.len(), 6);
        assert!(s.iter().all(|m| surjective(m, 2)));
        assert!(all_surjections(1, 2, 1000).is_empty());
    }
}
