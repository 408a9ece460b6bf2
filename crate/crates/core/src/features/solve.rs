//! Parameter solvers, one per feature family.
//!
//! Each solver takes (input, expected output) samples and returns a concrete
//! [`FeatureInstance`] reproducing every sample, or `None` when no instance
//! within the search caps exists. Tie-breaking is fixed so results are
//! reproducible.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::extract::{ExtractIndex, ExtractSpec};
use super::{ConcatProgram, FeatureInstance, Segment};

/// Search bounds for the solvers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverCaps {
    /// Largest divisor tried by `div`.
    pub div_max: i64,
    /// Most token classes in one extraction.
    pub max_tokens: usize,
    /// Largest occurrence magnitude in one extraction.
    pub max_occurrence: usize,
    /// Most segments in a concat program.
    pub max_segments: usize,
}

impl Default for SolverCaps {
    fn default() -> Self {
        SolverCaps {
            div_max: 100,
            max_tokens: 3,
            max_occurrence: 3,
            max_segments: 6,
        }
    }
}

/// Mod divisors are fixed to this range.
pub const MOD_DIVISORS: std::ops::RangeInclusive<i64> = 2..=10;

fn distinct_xs(pairs: &[(i64, i64)]) -> usize {
    let mut xs: Vec<i64> = pairs.iter().map(|p| p.0).collect();
    xs.sort_unstable();
    xs.dedup();
    xs.len()
}

/// `a*x + b`, from the first two samples with distinct `x`.
pub fn solve_linear(pairs: &[(i64, i64)]) -> Option<FeatureInstance> {
    let &(x1, y1) = pairs.first()?;
    let &(x2, y2) = pairs.iter().find(|p| p.0 != x1)?;
    let dy = y2.checked_sub(y1)?;
    let dx = x2.checked_sub(x1)?;
    if dy % dx != 0 {
        return None;
    }
    let a = dy / dx;
    let b = y1.checked_sub(a.checked_mul(x1)?)?;
    let ok = pairs
        .iter()
        .all(|&(x, y)| a.checked_mul(x).and_then(|v| v.checked_add(b)) == Some(y));
    ok.then_some(FeatureInstance::Linear { a, b })
}

/// `x + y + b`.
pub fn solve_sum(triples: &[(i64, i64, i64)]) -> Option<FeatureInstance> {
    let &(x, y, o) = triples.first()?;
    let b = o.checked_sub(x.checked_add(y)?)?;
    let ok = triples
        .iter()
        .all(|&(x, y, o)| x.checked_add(y).and_then(|s| s.checked_add(b)) == Some(o));
    ok.then_some(FeatureInstance::Sum { b })
}

/// `floor((x + b) / d)`: each sample pins `b` to `[d*y - x, d*y - x + d - 1]`;
/// the smallest `d` with a nonempty intersection wins, with the smallest `b`.
pub fn solve_div(pairs: &[(i64, i64)], div_max: i64) -> Option<FeatureInstance> {
    if distinct_xs(pairs) < 2 {
        return None;
    }
    'd: for d in 2..=div_max {
        let mut lo = i64::MIN;
        let mut hi = i64::MAX;
        for &(x, y) in pairs {
            let Some(low) = d.checked_mul(y).and_then(|v| v.checked_sub(x)) else {
                continue 'd;
            };
            let Some(high) = low.checked_add(d - 1) else {
                continue 'd;
            };
            lo = lo.max(low);
            hi = hi.min(high);
            if lo > hi {
                continue 'd;
            }
        }
        return Some(FeatureInstance::Div { b: lo, d });
    }
    None
}

/// `((x + b1) mod d) + b2` for `d` in 2..=10 and `b1` in `0..d`, first
/// consistent triple in enumeration order.
pub fn solve_mod(pairs: &[(i64, i64)]) -> Option<FeatureInstance> {
    if distinct_xs(pairs) < 2 {
        return None;
    }
    let &(x1, y1) = pairs.first()?;
    for d in MOD_DIVISORS {
        for b1 in 0..d {
            let Some(r1) = x1.checked_add(b1).map(|v| v.rem_euclid(d)) else {
                continue;
            };
            let Some(b2) = y1.checked_sub(r1) else {
                continue;
            };
            let ok = pairs.iter().all(|&(x, y)| {
                x.checked_add(b1)
                    .map(|v| v.rem_euclid(d))
                    .and_then(|r| r.checked_add(b2))
                    == Some(y)
            });
            if ok {
                return Some(FeatureInstance::Mod { b1, b2, d });
            }
        }
    }
    None
}

/// Best-ranked extraction reproducing every `(input, output)` pair.
pub fn solve_substring(pairs: &[(&str, &str)], caps: &SolverCaps) -> Option<FeatureInstance> {
    let &(x0, y0) = pairs.first()?;
    if pairs.iter().any(|(_, y)| y.is_empty()) {
        return None;
    }
    let index = ExtractIndex::build(x0, caps.max_tokens, caps.max_occurrence);
    index
        .specs_for(y0)
        .iter()
        .find(|spec| {
            pairs
                .iter()
                .all(|(x, y)| spec.apply(x).as_deref() == Some(*y))
        })
        .cloned()
        .map(FeatureInstance::Substring)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct ConcatCost {
    literal_chars: usize,
    segments: usize,
    // Negated extract count: more extracts is cheaper.
    neg_extracts: i64,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ConcatState {
    pos: Vec<usize>,
    segments: usize,
    after_literal: bool,
}

/// Concatenation of extracts and literals reproducing every row.
///
/// Segments are shared by all rows: an extract uses one spec on the same input
/// in every row, and a literal must be identical in every row. Among the
/// programs within the segment cap, the one with the fewest literal
/// characters wins, then the fewest segments, then the most extracts.
pub fn solve_concat(rows: &[(Vec<&str>, &str)], caps: &SolverCaps) -> Option<FeatureInstance> {
    let arity = rows.first()?.0.len();
    if arity == 0 || rows.iter().any(|(xs, y)| xs.len() != arity || y.is_empty()) {
        return None;
    }
    let outs: Vec<Vec<char>> = rows.iter().map(|(_, y)| y.chars().collect()).collect();
    let indexes: Vec<ExtractIndex> = rows[0]
        .0
        .iter()
        .map(|x| ExtractIndex::build(x, caps.max_tokens, caps.max_occurrence))
        .collect();

    // Parent links for program reconstruction.
    let mut nodes: Vec<(Option<usize>, Option<Segment>)> = vec![(None, None)];
    let start = ConcatState {
        pos: vec![0; rows.len()],
        segments: 0,
        after_literal: false,
    };
    let zero = ConcatCost {
        literal_chars: 0,
        segments: 0,
        neg_extracts: 0,
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Reverse((zero, seq, 0usize, start)));
    let mut done: HashMap<ConcatState, ()> = HashMap::new();

    while let Some(Reverse((cost, _, node, state))) = heap.pop() {
        if done.insert(state.clone(), ()).is_some() {
            continue;
        }
        if state.pos.iter().zip(&outs).all(|(p, o)| *p == o.len()) {
            return Some(FeatureInstance::Concat(ConcatProgram {
                segments: rebuild(&nodes, node),
            }));
        }
        if state.segments == caps.max_segments {
            continue;
        }
        let mut push = |seg: Segment, pos: Vec<usize>, lit: usize, heap: &mut BinaryHeap<_>| {
            let is_lit = lit > 0;
            let next = ConcatState {
                pos,
                segments: state.segments + 1,
                after_literal: is_lit,
            };
            if done.contains_key(&next) {
                return;
            }
            nodes.push((Some(node), Some(seg)));
            seq += 1;
            let c = ConcatCost {
                literal_chars: cost.literal_chars + lit,
                segments: cost.segments + 1,
                neg_extracts: cost.neg_extracts - i64::from(!is_lit),
            };
            heap.push(Reverse((c, seq, nodes.len() - 1, next)));
        };

        // Extracts.
        let p0 = state.pos[0];
        for (input, index) in indexes.iter().enumerate() {
            for end in p0 + 1..=outs[0].len() {
                let text: String = outs[0][p0..end].iter().collect();
                for spec in index.specs_for(&text) {
                    if let Some(pos) = advance_extract(rows, &outs, &state.pos, input, spec) {
                        push(
                            Segment::Extract {
                                input,
                                spec: spec.clone(),
                            },
                            pos,
                            0,
                            &mut heap,
                        );
                    }
                }
            }
        }

        // Literals, never two in a row.
        if !state.after_literal {
            let common = (0..)
                .take_while(|&k| {
                    let c = outs[0].get(p0 + k);
                    c.is_some() && outs.iter().zip(&state.pos).all(|(o, p)| o.get(p + k) == c)
                })
                .count();
            for len in 1..=common {
                let lit: String = outs[0][p0..p0 + len].iter().collect();
                let pos = state.pos.iter().map(|p| p + len).collect();
                push(Segment::Literal(lit), pos, len, &mut heap);
            }
        }
    }
    None
}

fn advance_extract(
    rows: &[(Vec<&str>, &str)],
    outs: &[Vec<char>],
    pos: &[usize],
    input: usize,
    spec: &ExtractSpec,
) -> Option<Vec<usize>> {
    rows.iter()
        .zip(outs)
        .zip(pos)
        .map(|(((xs, _), out), &p)| {
            let piece: Vec<char> = spec.apply(xs[input])?.chars().collect();
            let end = p + piece.len();
            (end <= out.len() && out[p..end] == piece[..]).then_some(end)
        })
        .collect()
}

fn rebuild(nodes: &[(Option<usize>, Option<Segment>)], mut at: usize) -> Vec<Segment> {
    let mut segs = Vec::new();
    while let (Some(parent), Some(seg)) = &nodes[at] {
        segs.push(seg.clone());
        at = *parent;
    }
    segs.reverse();
    segs
}

impl ConcatProgram {
    /// Renumbers inputs so only referenced ones remain, in order of first
    /// reference position. Returns the program and the original index of each
    /// new input.
    pub fn compact(&self) -> (ConcatProgram, Vec<usize>) {
        let mut used: Vec<usize> = self
            .segments
            .iter()
            .filter_map(|s| match s {
                Segment::Extract { input, .. } => Some(*input),
                Segment::Literal(_) => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        let segments = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Extract { input, spec } => Segment::Extract {
                    input: used.binary_search(input).expect("collected above"),
                    spec: spec.clone(),
                },
                lit => lit.clone(),
            })
            .collect();
        (ConcatProgram { segments }, used)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{apply_feature, TokenClass::*};
    use super::*;
    use crate::table::Value;
    use proptest::prelude::*;

    // Brute-force oracles over small parameter boxes. They enumerate the
    // parameter space directly instead of reasoning about constraints.
    fn brute_linear(pairs: &[(i64, i64)]) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for a in -10..=10 {
            for b in -10..=10 {
                if pairs.iter().all(|&(x, y)| a * x + b == y) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn brute_div(pairs: &[(i64, i64)]) -> Option<(i64, i64)> {
        for d in 2..=100i64 {
            for b in -200..=200i64 {
                if pairs
                    .iter()
                    .all(|&(x, y)| ((x + b) as f64 / d as f64).floor() as i64 == y)
                {
                    return Some((b, d));
                }
            }
        }
        None
    }

    fn brute_mod(pairs: &[(i64, i64)]) -> Option<(i64, i64, i64)> {
        for d in 2..=10i64 {
            for b1 in 0..d {
                for b2 in -50..=50 {
                    if pairs.iter().all(|&(x, y)| {
                        let mut r = (x + b1) % d;
                        if r < 0 {
                            r += d;
                        }
                        r + b2 == y
                    }) {
                        return Some((d, b1, b2));
                    }
                }
            }
        }
        None
    }

    #[test]
    fn linear_examples() {
        assert_eq!(
            solve_linear(&[(1, -30), (3, -40)]),
            Some(FeatureInstance::Linear { a: -5, b: -25 })
        );
        assert_eq!(
            solve_linear(&[(2, 30), (4, 40)]),
            Some(FeatureInstance::Linear { a: 5, b: 20 })
        );
        assert_eq!(
            solve_linear(&[(0, 0), (1, 1), (2, 2)]),
            Some(FeatureInstance::Linear { a: 1, b: 0 })
        );
        let unsat = [(1, 0), (2, 0), (3, 1)];
        assert!(brute_linear(&unsat).is_empty());
        assert_eq!(solve_linear(&unsat), None);
        // single x is ambiguous
        assert_eq!(solve_linear(&[(3, 4), (3, 4)]), None);
        // fractional slope
        assert_eq!(solve_linear(&[(0, 0), (2, 1)]), None);
    }

    #[test]
    fn sum_examples() {
        assert_eq!(
            solve_sum(&[(1, 2, 103)]),
            Some(FeatureInstance::Sum { b: 100 })
        );
        assert_eq!(solve_sum(&[(0, 0, 0)]), Some(FeatureInstance::Sum { b: 0 }));
        assert_eq!(solve_sum(&[(1, 1, 3), (2, 2, 4)]), None);
    }

    #[test]
    fn div_examples() {
        let p = [(0, 0), (1, 0), (2, 1), (3, 1)];
        assert_eq!(brute_div(&p), Some((0, 2)));
        assert_eq!(
            solve_div(&p, 100),
            Some(FeatureInstance::Div { b: 0, d: 2 })
        );

        let p = [(10, 1), (25, 2), (31, 3)];
        let (b, d) = brute_div(&p).unwrap();
        assert_eq!((b, d), (-2, 8));
        assert_eq!(solve_div(&p, 100), Some(FeatureInstance::Div { b, d }));

        // Slope one is reachable with b = d - 1: floor((0+1)/2)=0, floor((1+1)/2)=1.
        let p = [(0, 0), (1, 1)];
        assert_eq!(brute_div(&p), Some((1, 2)));
        assert_eq!(
            solve_div(&p, 100),
            Some(FeatureInstance::Div { b: 1, d: 2 })
        );

        let p = [(0, 0), (1, 2)];
        assert_eq!(brute_div(&p), None);
        assert_eq!(solve_div(&p, 100), None);
    }

    #[test]
    fn mod_examples() {
        let p = [(1, 1), (2, 0), (3, 1), (4, 0)];
        assert_eq!(
            solve_mod(&p),
            Some(FeatureInstance::Mod { b1: 0, b2: 0, d: 2 })
        );

        // Consecutive inputs never share a residue, so a constant output is
        // out of reach for every divisor.
        let p = [(5, 0), (6, 0)];
        assert_eq!(brute_mod(&p), None);
        assert_eq!(solve_mod(&p), None);

        let p = [(1, 0), (2, 5)];
        assert_eq!(brute_mod(&p), None);
        assert_eq!(solve_mod(&p), None);

        let p = [(5, 0), (7, 0)];
        let (d, b1, b2) = brute_mod(&p).unwrap();
        assert_eq!(solve_mod(&p), Some(FeatureInstance::Mod { b1, b2, d }));
    }

    #[test]
    fn substring_examples() {
        let caps = SolverCaps::default();
        assert_eq!(
            solve_substring(&[("tiktok.jpg", "tiktok")], &caps),
            Some(FeatureInstance::Substring(ExtractSpec::new(vec![Alnum], 1)))
        );
        assert_eq!(
            solve_substring(&[("a1b22", "22")], &caps),
            Some(FeatureInstance::Substring(ExtractSpec::new(
                vec![Digits],
                2
            )))
        );
        assert_eq!(solve_substring(&[("abc", "zz")], &caps), None);
        // Two rows disambiguate first vs. last.
        assert_eq!(
            solve_substring(&[("a1b22", "22"), ("7x8y9", "9")], &caps),
            Some(FeatureInstance::Substring(ExtractSpec::new(
                vec![Digits],
                -1
            )))
        );
    }

    #[test]
    fn concat_examples() {
        let caps = SolverCaps::default();
        let f = solve_concat(&[(vec!["report", "2021"], "report-2021")], &caps).unwrap();
        assert_eq!(f.to_string(), r#"concat[x0{Alnum#1} "-" x1{Digits#1}]"#);

        let f = solve_concat(&[(vec!["notes"], "notes")], &caps).unwrap();
        assert_eq!(f.to_string(), "concat[x0{Alnum#1}]");

        // `!` appears in no input and differs between rows.
        let rows = [(vec!["a"], "a!"), (vec!["b"], "b?")];
        assert_eq!(solve_concat(&rows, &caps), None);

        // A literal shared by every row is fine.
        let rows = [
            (vec!["report", "pdf"], "/docs/report.pdf"),
            (vec!["summary", "txt"], "/docs/summary.txt"),
        ];
        let f = solve_concat(&rows, &caps).unwrap();
        for (xs, y) in rows {
            let args: Vec<Value> = xs.iter().map(Value::str).collect();
            assert_eq!(apply_feature(&f, &args).unwrap(), Value::str(y));
        }
    }

    #[test]
    fn concat_compaction() {
        let p = ConcatProgram {
            segments: vec![
                Segment::Extract {
                    input: 2,
                    spec: ExtractSpec::new(vec![Alnum], 1),
                },
                Segment::Literal("_".into()),
            ],
        };
        let (c, used) = p.compact();
        assert_eq!(used, vec![2]);
        assert_eq!(c.to_string(), r#"concat[x0{Alnum#1} "_"]"#);
    }

    proptest! {
        #[test]
        fn linear_recovers(a in -20i64..=20, b in -20i64..=20, xs in prop::collection::vec(-50i64..50, 2..6)) {
            prop_assume!(distinct_xs(&xs.iter().map(|&x| (x, 0)).collect::<Vec<_>>()) >= 2);
            let pairs: Vec<_> = xs.iter().map(|&x| (x, a * x + b)).collect();
            prop_assert_eq!(solve_linear(&pairs), Some(FeatureInstance::Linear { a, b }));
        }

        #[test]
        fn monotone_families(x in -100i64..100, dx in 0i64..50, a in 1i64..10, b in -20i64..20, d in 2i64..20) {
            let lin = FeatureInstance::Linear { a, b };
            let div = FeatureInstance::Div { b, d };
            let sum = FeatureInstance::Sum { b };
            for f in [&lin, &div] {
                let lo = apply_feature(f, &[Value::Int(x)]).unwrap();
                let hi = apply_feature(f, &[Value::Int(x + dx)]).unwrap();
                prop_assert!(lo <= hi);
            }
            let lo = apply_feature(&sum, &[Value::Int(x), Value::Int(3)]).unwrap();
            let hi = apply_feature(&sum, &[Value::Int(x + dx), Value::Int(3)]).unwrap();
            prop_assert!(lo <= hi);
        }

        #[test]
        fn substring_is_sound(words in prop::collection::vec("[a-z]{1,4}[0-9]{0,3}[._-]?", 1..4), pick in 0usize..4) {
            let s: String = words.concat();
            let chars: Vec<char> = s.chars().collect();
            let start = pick % chars.len();
            let y: String = chars[start..].iter().take(3).collect();
            if let Some(f) = solve_substring(&[(&s, &y)], &SolverCaps::default()) {
                prop_assert_eq!(apply_feature(&f, &[Value::str(&s)]).unwrap(), Value::str(&y));
                prop_assert!(s.contains(&y));
            }
        }

        #[test]
        fn concat_is_sound(a in "[a-z]{1,5}", b in "[0-9]{1,4}", sep in "[-_/]") {
            let y = format!("{b}{sep}{a}");
            let f = solve_concat(&[(vec![a.as_str(), b.as_str()], y.as_str())], &SolverCaps::default()).unwrap();
            prop_assert_eq!(apply_feature(&f, &[Value::str(&a), Value::str(&b)]).unwrap(), Value::str(&y));
        }
    }
}
