//! Combining matched hypotheses into a verified program.

use std::collections::{BTreeSet, HashSet};

use super::forward::ForwardSet;
use super::rowset::RowSet;
use super::SynthError;
use crate::dsl::ActionSignature;
use crate::dsl::{exec_program, input_schemas, validate_program, MappingStmt, Program};
use crate::table::Table;

/// A hypothesis that matched, with the `Yield` producing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matched {
    pub rows: RowSet,
    pub score: i64,
    /// Index of the source table in the forward set.
    pub entry: usize,
    pub stmt: MappingStmt,
}

const COVER_NODE_LIMIT: usize = 200_000;

/// Pairwise disjoint matches whose rows together are every row of the
/// output, searched depth-first with higher scores tried first. `None` when
/// no such cover exists.
pub fn assemble_mapping(matched: &[Matched], n: usize) -> Option<Vec<&Matched>> {
    let mut order: Vec<&Matched> = Vec::new();
    let mut seen = HashSet::new();
    let mut sorted: Vec<&Matched> = matched.iter().collect();
    sorted.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(b.rows.count().cmp(&a.rows.count()))
            .then(a.rows.canonical_cmp(&b.rows))
    });
    for m in sorted {
        if !m.rows.is_empty() && seen.insert(&m.rows) {
            order.push(m);
        }
    }
    let mut chosen = Vec::new();
    let mut nodes = 0;
    cover(&order, &RowSet::empty(n), &mut chosen, &mut nodes).then_some(chosen)
}

fn cover<'a>(
    order: &[&'a Matched],
    covered: &RowSet,
    chosen: &mut Vec<&'a Matched>,
    nodes: &mut usize,
) -> bool {
    let Some(pivot) = covered.complement().iter().next() else {
        return true;
    };
    for m in order {
        *nodes += 1;
        if *nodes > COVER_NODE_LIMIT {
            return false;
        }
        if !m.rows.contains(pivot) || !m.rows.is_disjoint(covered) {
            continue;
        }
        chosen.push(m);
        if cover(order, &covered.or(&m.rows), chosen, nodes) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// The transform statements behind each mapping's source table, in creation
/// order and without repeats, followed by the mappings. The result is
/// validated and executed; anything but an exact reproduction of `output`
/// is an internal error.
pub fn assemble_program(
    forward: &ForwardSet,
    mapping: &[&Matched],
    inputs: &[Table],
    output: &Table,
    action: &ActionSignature,
) -> Result<Program, SynthError> {
    if mapping.is_empty() {
        return Err(SynthError::Internal("empty mapping".into()));
    }
    let mut needed = BTreeSet::new();
    let mut stack: Vec<usize> = mapping.iter().map(|m| m.entry).collect();
    while let Some(i) = stack.pop() {
        if !needed.insert(i) {
            continue;
        }
        if let Some(stmt) = &forward.get(i).stmt {
            for src in stmt.op.sources() {
                let j = forward
                    .index_of(src)
                    .ok_or_else(|| SynthError::Internal(format!("unknown table `{src}`")))?;
                stack.push(j);
            }
        }
    }
    let program = Program {
        transforms: needed
            .into_iter()
            .filter_map(|i| forward.get(i).stmt.clone())
            .collect(),
        mappings: mapping.iter().map(|m| m.stmt.clone()).collect(),
    };
    validate_program(&program, &input_schemas(inputs), action).map_err(|vs| {
        SynthError::Internal(format!(
            "assembled program is invalid: {}",
            vs.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        ))
    })?;
    match exec_program(&program, inputs, action) {
        Ok(t) if t == *output => Ok(program),
        Ok(_) => Err(SynthError::Internal(format!(
            "assembled program does not reproduce the output example:\n{program}"
        ))),
        Err(e) => Err(SynthError::Internal(format!(
            "assembled program failed to run: {e}\n{program}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{Projection, TransformOp};
    use crate::synth::{expand, Deadline, SynthSettings};
    use crate::table::fixtures::*;
    use crate::table::Value;
    use std::time::Duration;

    fn m(n: usize, rows: &[usize], score: i64) -> Matched {
        Matched {
            rows: RowSet::from_indices(n, rows.iter().copied()),
            score,
            entry: 0,
            stmt: MappingStmt::new("a", "t", vec![]),
        }
    }

    #[test]
    fn exact_cover() {
        let ms = vec![m(3, &[0, 1], 5), m(3, &[1, 2], 4), m(3, &[2], 1)];
        let c = assemble_mapping(&ms, 3).unwrap();
        let rows: Vec<Vec<usize>> = c.iter().map(|x| x.rows.iter().collect()).collect();
        assert_eq!(rows, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn overlapping_pieces_do_not_cover() {
        let ms = vec![m(3, &[0, 1], 5), m(3, &[1, 2], 4)];
        assert!(assemble_mapping(&ms, 3).is_none());
    }

    #[test]
    fn whole_table_alone() {
        let ms = vec![m(3, &[0, 1, 2], 9), m(3, &[0], 1)];
        assert_eq!(assemble_mapping(&ms, 3).unwrap().len(), 1);
    }

    fn lin(a: i64, b: i64) -> Projection {
        Projection::Mutate {
            feature: crate::features::FeatureInstance::Linear { a, b },
            cols: vec!["frame".into()],
        }
    }

    fn yield_from(src: &str, a: i64, b: i64) -> MappingStmt {
        MappingStmt::new(
            "shift",
            src,
            vec![
                Projection::Col("id".into()),
                Projection::Const(Value::str("GB")),
                lin(a, b),
                lin(a, b),
            ],
        )
    }

    #[test]
    fn running_example_assembly() {
        let settings = SynthSettings::default();
        let inputs = [frames_in()];
        let mut f = ForwardSet::new(&inputs, &settings);
        expand(
            &mut f,
            1,
            &[],
            &settings,
            &Deadline::new(Duration::from_secs(60)),
        )
        .unwrap();
        let odd = f.index_of("t1").unwrap();
        let even = f.index_of("t2").unwrap();
        let out = shift_out();
        let action = crate::dsl::ActionSignature::from_schema("shift", &shift_schema()).unwrap();
        let odd_rows = RowSet::from_indices(4, [0, 2]);
        let a = Matched {
            rows: odd_rows.clone(),
            score: 4,
            entry: odd,
            stmt: yield_from("t1", -5, -25),
        };
        let b = Matched {
            rows: odd_rows.complement(),
            score: 4,
            entry: even,
            stmt: yield_from("t2", 5, 20),
        };
        let p = assemble_program(&f, &[&a, &b], &inputs, &out, &action).unwrap();
        assert_eq!(p.transforms.len(), 2);
        assert_eq!(p.mappings.len(), 2);

        // the odd rows twice leave the even rows uncovered
        let c = Matched {
            stmt: yield_from("t1", -5, -25),
            ..a.clone()
        };
        let err = assemble_program(&f, &[&a, &c], &inputs, &out, &action).unwrap_err();
        assert!(matches!(err, SynthError::Internal(_)));
    }

    #[test]
    fn shared_source_statement_appears_once() {
        let settings = SynthSettings::default();
        let inputs = [frames_in()];
        let mut f = ForwardSet::new(&inputs, &settings);
        expand(
            &mut f,
            1,
            &[],
            &settings,
            &Deadline::new(Duration::from_secs(60)),
        )
        .unwrap();
        let odd = f.index_of("t1").unwrap();
        let out = shift_rows(&[(1, -30), (3, -40), (1, 6), (3, 8)]);
        let action = crate::dsl::ActionSignature::from_schema("shift", &shift_schema()).unwrap();
        let first = Matched {
            rows: RowSet::from_indices(4, [0, 1]),
            score: 0,
            entry: odd,
            stmt: yield_from("t1", -5, -25),
        };
        let second = Matched {
            rows: RowSet::from_indices(4, [2, 3]),
            score: 0,
            entry: odd,
            stmt: yield_from("t1", 1, 5),
        };
        let p = assemble_program(&f, &[&first, &second], &inputs, &out, &action).unwrap();
        assert_eq!(p.transforms.len(), 1);
        assert!(matches!(p.transforms[0].op, TransformOp::Filter { .. }));
    }

    #[test]
    fn raw_input_mapping_has_no_transforms() {
        let settings = SynthSettings::default();
        let inputs = [frames_in()];
        let f = ForwardSet::new(&inputs, &settings);
        let out = shift_rows(&[(1, 1), (2, 2), (3, 3), (4, 4)]);
        let action = crate::dsl::ActionSignature::from_schema("shift", &shift_schema()).unwrap();
        let all = Matched {
            rows: RowSet::full(4),
            score: 0,
            entry: 0,
            stmt: MappingStmt::new(
                "shift",
                "ti",
                vec![
                    Projection::Col("id".into()),
                    Projection::Const(Value::str("GB")),
                    Projection::Col("frame".into()),
                    Projection::Col("frame".into()),
                ],
            ),
        };
        let p = assemble_program(&f, &[&all], &inputs, &out, &action).unwrap();
        assert!(p.transforms.is_empty());
    }
}
