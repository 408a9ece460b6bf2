//! Generated synthesis tasks: the odd/even linear-split family and tasks
//! drawn from random programs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dsl::{
    exec_program, ActionSignature, Atom, MappingStmt, PredSymbol, Predicate, Program, Projection,
    TransformOp, TransformStmt,
};
use crate::features::{ConcatProgram, ExtractSpec, FeatureInstance, Segment, TokenClass};
use crate::synth::SynthTask;
use crate::table::{ColumnType, Schema, Table, Value};

/// Frames table `ti(file: Str, frame: Int, id: Id)` with ids `f<frame>`.
pub fn frames_table(frames: impl IntoIterator<Item = i64>) -> Table {
    let schema = Schema::of(&[
        ("file", ColumnType::Str),
        ("frame", ColumnType::Int),
        ("id", ColumnType::Id),
    ])
    .expect("static schema");
    Table::new(
        "ti",
        schema,
        frames.into_iter().map(|i| {
            vec![
                Value::str("tiktok.jpg"),
                Value::Int(i),
                Value::id(format!("f{i}")),
            ]
        }),
    )
    .expect("well-typed rows")
}

/// `shift(id: Id, channel: Str, bx: Int, by: Int)`
pub fn shift_signature() -> ActionSignature {
    ActionSignature::new(
        "shift",
        &[
            ("id", ColumnType::Id),
            ("channel", ColumnType::Str),
            ("bx", ColumnType::Int),
            ("by", ColumnType::Int),
        ],
    )
}

/// Odd frames shift by `-5f-25`, even frames by `5f+20`, on both axes of
/// the "GB" channel.
pub fn linear_split_output(frames: impl IntoIterator<Item = i64>) -> Table {
    let sig = shift_signature();
    Table::new(
        "out",
        sig.schema().expect("static signature"),
        frames.into_iter().map(|f| {
            let b = if f % 2 != 0 { -5 * f - 25 } else { 5 * f + 20 };
            vec![
                Value::str("shift"),
                Value::id(format!("f{f}")),
                Value::str("GB"),
                Value::Int(b),
                Value::Int(b),
            ]
        }),
    )
    .expect("well-typed rows")
}

/// The linear-split task over frames `1..=k`; `k = 4` is the four-frame
/// running example.
pub fn linear_split_task(k: usize) -> SynthTask {
    let k = k as i64;
    SynthTask::new(
        vec![frames_table(1..=k)],
        linear_split_output(1..=k),
        shift_signature(),
        vec![],
    )
}

/// A task produced by running a random program, with the program kept as
/// the oracle and a held-out input on which solutions can be compared.
#[derive(Debug, Clone)]
pub struct GeneratedTask {
    pub task: SynthTask,
    pub program: Program,
    pub pending: Vec<Table>,
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub min_rows: usize,
    pub max_rows: usize,
    /// Largest program depth: 0 uses the input directly, 1 adds a filter or
    /// order, 2 adds a two-symbol filter or a filter over an order.
    pub max_depth: usize,
    pub max_yields: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            min_rows: 3,
            max_rows: 6,
            max_depth: 2,
            max_yields: 2,
        }
    }
}

/// `emit(id: Id, x: Int, y: Str)`
pub fn emit_signature() -> ActionSignature {
    ActionSignature::new(
        "emit",
        &[
            ("id", ColumnType::Id),
            ("x", ColumnType::Int),
            ("y", ColumnType::Str),
        ],
    )
}

fn source_schema() -> Schema {
    Schema::of(&[
        ("id", ColumnType::Id),
        ("a", ColumnType::Int),
        ("b", ColumnType::Int),
        ("name", ColumnType::Str),
    ])
    .expect("static schema")
}

fn random_source(rng: &mut impl Rng, rows: usize, id_prefix: &str) -> Table {
    const LETTERS: &[u8] = b"abcdefghkmnprstw";
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let word: String = (0..rng.gen_range(2..=4))
            .map(|_| *LETTERS.choose(rng).expect("nonempty") as char)
            .collect();
        let name = format!("{word}{}", rng.gen_range(1..1000));
        out.push(vec![
            Value::id(format!("{id_prefix}{i}")),
            Value::Int(rng.gen_range(-9..=20)),
            Value::Int(rng.gen_range(0..=30)),
            Value::str(name),
        ]);
    }
    Table::new("src", source_schema(), out).expect("well-typed rows")
}

fn random_atom(rng: &mut impl Rng, t: &Table, pool: &mut Vec<Value>) -> Predicate {
    use PredSymbol::*;
    let a: Vec<i64> = t.rows().iter().filter_map(|r| r[1].as_int()).collect();
    match rng.gen_range(0..4) {
        0 => Atom::unary(*[IsOdd, IsEven].choose(rng).expect("nonempty"), "a").into(),
        1 => Atom::unary(*[IsOdd, IsEven].choose(rng).expect("nonempty"), "b").into(),
        2 => {
            let c = *a.choose(rng).unwrap_or(&0);
            pool.push(Value::Int(c));
            Atom::with_const(
                *[IntLt, IntGeq].choose(rng).expect("nonempty"),
                "a",
                Value::Int(c),
            )
            .into()
        }
        _ => Atom::with_col(IntLt, "a", "b").into(),
    }
}

fn random_int_projection<R: Rng>(rng: &mut R, cols: &[&str]) -> Projection {
    let pick = |rng: &mut R| cols[rng.gen_range(0..cols.len())].to_string();
    match rng.gen_range(0..6) {
        0 => Projection::Col(pick(rng)),
        1 => Projection::Const(Value::Int(rng.gen_range(-50..=50))),
        2 => Projection::Mutate {
            feature: FeatureInstance::Linear {
                a: *[-5, -3, -2, -1, 2, 3, 4, 7].choose(rng).expect("nonempty"),
                b: rng.gen_range(-20..=20),
            },
            cols: vec![pick(rng)],
        },
        3 => Projection::Mutate {
            feature: FeatureInstance::Div {
                b: rng.gen_range(-5..=5),
                d: rng.gen_range(2..=9),
            },
            cols: vec![pick(rng)],
        },
        4 => Projection::Mutate {
            feature: FeatureInstance::Mod {
                b1: rng.gen_range(0..=3),
                b2: rng.gen_range(-3..=3),
                d: rng.gen_range(2..=10),
            },
            cols: vec![pick(rng)],
        },
        _ => Projection::Mutate {
            feature: FeatureInstance::Sum {
                b: rng.gen_range(-10..=10),
            },
            cols: vec!["a".into(), "b".into()],
        },
    }
}

fn random_str_projection(rng: &mut impl Rng) -> Projection {
    let name = || vec!["name".to_string()];
    match rng.gen_range(0..5) {
        0 => Projection::Col("name".into()),
        1 => Projection::Const(Value::str(
            *["ok", "skip", "x-1"].choose(rng).expect("nonempty"),
        )),
        2 => Projection::Mutate {
            feature: FeatureInstance::Substring(ExtractSpec::new(vec![TokenClass::Lower], 1)),
            cols: name(),
        },
        3 => Projection::Mutate {
            feature: FeatureInstance::Substring(ExtractSpec::new(vec![TokenClass::Digits], -1)),
            cols: name(),
        },
        _ => Projection::Mutate {
            feature: FeatureInstance::Concat(ConcatProgram {
                segments: vec![
                    Segment::Extract {
                        input: 0,
                        spec: ExtractSpec::new(vec![TokenClass::Digits], 1),
                    },
                    Segment::Literal("-".into()),
                    Segment::Extract {
                        input: 0,
                        spec: ExtractSpec::new(vec![TokenClass::Lower], 1),
                    },
                ],
            }),
            cols: name(),
        },
    }
}

fn random_yield(rng: &mut impl Rng, src: &str, int_cols: &[&str]) -> MappingStmt {
    MappingStmt::new(
        "emit",
        src,
        vec![
            Projection::Col("id".into()),
            random_int_projection(rng, int_cols),
            random_str_projection(rng),
        ],
    )
}

fn filter(target: &str, src: &str, pred: Predicate) -> TransformStmt {
    TransformStmt {
        target: target.into(),
        op: TransformOp::Filter {
            src: src.into(),
            pred,
        },
    }
}

fn random_program(
    rng: &mut impl Rng,
    t: &Table,
    cfg: &GeneratorConfig,
    pool: &mut Vec<Value>,
) -> Program {
    let depth = rng.gen_range(0..=cfg.max_depth);
    let yields = rng.gen_range(1..=cfg.max_yields.max(1));
    let mut p = Program::default();
    let mut src = "src".to_string();
    let mut ints = vec!["a", "b"];
    let mut remaining = depth;

    if remaining >= 1 && rng.gen_bool(0.3) {
        p.transforms.push(TransformStmt {
            target: "o".into(),
            op: TransformOp::Order {
                src: src.clone(),
                col: "b".into(),
                start: 0,
                descending: false,
                index: None,
            },
        });
        src = "o".into();
        ints.push("ord_b");
        remaining -= 1;
    }

    if remaining == 0 {
        // one Yield over the whole table
        p.mappings.push(random_yield(rng, &src, &ints));
        return p;
    }
    let mut pred = random_atom(rng, t, pool);
    if remaining >= 2 && rng.gen_bool(0.5) {
        let other = random_atom(rng, t, pool);
        pred = if rng.gen_bool(0.5) {
            Predicate::and(pred, other)
        } else {
            Predicate::or(pred, other)
        };
    }
    p.transforms.push(filter("u", &src, pred.clone()));
    p.mappings.push(random_yield(rng, "u", &ints));
    if yields == 2 {
        p.transforms.push(filter("v", &src, Predicate::not(pred)));
        p.mappings.push(random_yield(rng, "v", &ints));
    }
    p
}

/// Draws a random program and input and runs one on the other. Programs
/// that fail on their own input or produce nothing are redrawn.
pub fn random_task(rng: &mut impl Rng, cfg: &GeneratorConfig) -> GeneratedTask {
    let sig = emit_signature();
    loop {
        let rows = rng.gen_range(cfg.min_rows..=cfg.max_rows.max(cfg.min_rows));
        let input = random_source(rng, rows, "r");
        let mut pool = Vec::new();
        let program = random_program(rng, &input, cfg, &mut pool);
        let Ok(out) = exec_program(&program, std::slice::from_ref(&input), &sig) else {
            continue;
        };
        if out.is_empty() {
            continue;
        }
        let pending = random_source(rng, rows, "p");
        pool.sort();
        pool.dedup();
        return GeneratedTask {
            task: SynthTask::new(vec![input], out, sig, pool),
            program,
            pending: vec![pending],
        };
    }
}
