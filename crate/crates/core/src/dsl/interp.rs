//! Operator semantics.
//!
//! Every `exec_*` function is pure: it reads its operand tables and returns a
//! new one. Output schemas are computed by the `*_schema` helpers, which the
//! validator reuses so that static checking and execution agree.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::ast::*;
use super::validate::{validate_program, Violation};
use crate::features::{apply_feature, FeatureError};
use crate::table::{Column, ColumnType, Row, Schema, Table, TableError, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("invalid program:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("{0}")]
    Type(String),
    #[error("integer overflow in {0}")]
    Overflow(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("statement {index}: {source}")]
    At {
        index: usize,
        #[source]
        source: Box<ExecError>,
    },
}

impl ExecError {
    fn at(self, index: usize) -> ExecError {
        ExecError::At {
            index,
            source: Box::new(self),
        }
    }
}

/// Named tables defined so far.
#[derive(Debug, Clone, Default)]
pub struct ExecState {
    tables: BTreeMap<String, Table>,
}

impl ExecState {
    pub fn new(inputs: &[Table]) -> Self {
        ExecState {
            tables: inputs
                .iter()
                .map(|t| (t.name().to_string(), t.clone()))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Table, ExecError> {
        self.tables
            .get(name)
            .ok_or_else(|| ExecError::UnknownTable(name.to_string()))
    }

    pub fn insert(&mut self, t: Table) {
        self.tables.insert(t.name().to_string(), t);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }
}

fn col_index(schema: &Schema, col: &str) -> Result<usize, ExecError> {
    schema
        .index_of(col)
        .ok_or_else(|| TableError::UnknownColumn(col.to_string()).into())
}

enum COperand {
    Col(usize),
    Const(Value),
}

enum CPred {
    Atom {
        symbol: PredSymbol,
        col: usize,
        arg: Option<COperand>,
    },
    And(Box<CPred>, Box<CPred>),
    Or(Box<CPred>, Box<CPred>),
    Not(Box<CPred>),
}

/// A predicate with column names resolved against one schema.
pub struct CompiledPredicate(CPred);

impl CompiledPredicate {
    pub fn new(pred: &Predicate, schema: &Schema) -> Result<Self, ExecError> {
        compile(pred, schema).map(CompiledPredicate)
    }

    pub fn eval(&self, row: &[Value]) -> bool {
        eval(&self.0, row)
    }
}

/// Type errors for one atom, if any.
pub(crate) fn check_atom(a: &Atom, schema: &Schema) -> Result<(), String> {
    let want = a.symbol.arg_type();
    let ty = schema
        .type_of(&a.col)
        .ok_or_else(|| format!("unknown column `{}`", a.col))?;
    if ty != want {
        return Err(format!(
            "{} expects {want} column, `{}` is {ty}",
            a.symbol.name(),
            a.col
        ));
    }
    match (&a.arg, a.symbol.is_unary()) {
        (None, true) => Ok(()),
        (Some(_), true) => Err(format!("{} takes one argument", a.symbol.name())),
        (None, false) => Err(format!("{} takes two arguments", a.symbol.name())),
        (Some(Operand::Col(c)), false) => match schema.type_of(c) {
            None => Err(format!("unknown column `{c}`")),
            Some(t) if t != want => Err(format!(
                "{} expects {want} column, `{c}` is {t}",
                a.symbol.name()
            )),
            _ => Ok(()),
        },
        (Some(Operand::Const(v)), false) if v.ty() != want => Err(format!(
            "{} expects {want} constant, got {v}",
            a.symbol.name()
        )),
        _ => Ok(()),
    }
}

fn compile(pred: &Predicate, schema: &Schema) -> Result<CPred, ExecError> {
    Ok(match pred {
        Predicate::Atom(a) => {
            check_atom(a, schema).map_err(ExecError::Type)?;
            CPred::Atom {
                symbol: a.symbol,
                col: col_index(schema, &a.col)?,
                arg: match &a.arg {
                    None => None,
                    Some(Operand::Col(c)) => Some(COperand::Col(col_index(schema, c)?)),
                    Some(Operand::Const(v)) => Some(COperand::Const(v.clone())),
                },
            }
        }
        Predicate::And(a, b) => {
            CPred::And(Box::new(compile(a, schema)?), Box::new(compile(b, schema)?))
        }
        Predicate::Or(a, b) => {
            CPred::Or(Box::new(compile(a, schema)?), Box::new(compile(b, schema)?))
        }
        Predicate::Not(p) => CPred::Not(Box::new(compile(p, schema)?)),
    })
}

fn eval(p: &CPred, row: &[Value]) -> bool {
    match p {
        CPred::Atom { symbol, col, arg } => {
            let x = &row[*col];
            let y = match arg {
                None => None,
                Some(COperand::Col(i)) => Some(&row[*i]),
                Some(COperand::Const(v)) => Some(v),
            };
            eval_atom(*symbol, x, y)
        }
        CPred::And(a, b) => eval(a, row) && eval(b, row),
        CPred::Or(a, b) => eval(a, row) || eval(b, row),
        CPred::Not(a) => !eval(a, row),
    }
}

/// One predicate symbol on already-typed values.
pub fn eval_atom(symbol: PredSymbol, x: &Value, y: Option<&Value>) -> bool {
    use PredSymbol::*;
    match (symbol, x, y) {
        (IsOdd, Value::Int(a), _) => a.rem_euclid(2) == 1,
        (IsEven, Value::Int(a), _) => a.rem_euclid(2) == 0,
        (IntEq, Value::Int(a), Some(Value::Int(b))) => a == b,
        (IntLt, Value::Int(a), Some(Value::Int(b))) => a < b,
        (IntLeq, Value::Int(a), Some(Value::Int(b))) => a <= b,
        (IntGt, Value::Int(a), Some(Value::Int(b))) => a > b,
        (IntGeq, Value::Int(a), Some(Value::Int(b))) => a >= b,
        (StrEq, Value::Str(a), Some(Value::Str(b))) => a == b,
        (IsSubstring, Value::Str(a), Some(Value::Str(b))) => a.contains(&**b),
        (StartsWith, Value::Str(a), Some(Value::Str(b))) => a.starts_with(&**b),
        (EndsWith, Value::Str(a), Some(Value::Str(b))) => a.ends_with(&**b),
        _ => unreachable!("predicate arguments are type-checked before evaluation"),
    }
}

/// Evaluates `pred` on one row of a table with schema `schema`.
pub fn eval_predicate(pred: &Predicate, schema: &Schema, row: &[Value]) -> Result<bool, ExecError> {
    Ok(CompiledPredicate::new(pred, schema)?.eval(row))
}

pub fn exec_filter(t: &Table, pred: &Predicate) -> Result<Table, ExecError> {
    let p = CompiledPredicate::new(pred, t.schema())?;
    let keep = (0..t.len()).filter(|&i| p.eval(&t.rows()[i]));
    Ok(t.select_rows(keep))
}

/// Output schema of a join: left columns then right columns, with names
/// present on both sides prefixed by their table name.
pub fn join_schema(left: &str, ls: &Schema, right: &str, rs: &Schema) -> Schema {
    let clash = |n: &str, other: &Schema| other.index_of(n).is_some();
    let mut cols: Vec<Column> = Vec::with_capacity(ls.len() + rs.len());
    let push = |cols: &mut Vec<Column>, c: &Column, table: &str, other: &Schema| {
        let base = if clash(&c.name, other) {
            format!("{table}.{}", c.name)
        } else {
            c.name.clone()
        };
        let mut name = base.clone();
        let mut k = 2;
        while cols.iter().any(|o| o.name == name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        cols.push(Column::new(name, c.ty));
    };
    for c in ls.columns() {
        push(&mut cols, c, left, rs);
    }
    for c in rs.columns() {
        push(&mut cols, c, right, ls);
    }
    Schema::new(cols).expect("names made unique above")
}

pub(crate) fn check_join(
    ls: &Schema,
    rs: &Schema,
    left_col: &str,
    right_col: &str,
) -> Result<(), (bool, String)> {
    // (is_id_rule, message)
    let lt = ls
        .type_of(left_col)
        .ok_or_else(|| (false, format!("unknown column `{left_col}`")))?;
    let rt = rs
        .type_of(right_col)
        .ok_or_else(|| (false, format!("unknown column `{right_col}`")))?;
    if lt != ColumnType::Id || rt != ColumnType::Id {
        return Err((
            true,
            format!("join columns `{left_col}` ({lt}) and `{right_col}` ({rt}) must both be Id"),
        ));
    }
    Ok(())
}

pub fn exec_join(
    left: &Table,
    right: &Table,
    left_col: &str,
    right_col: &str,
) -> Result<Table, ExecError> {
    if left.name() == right.name() {
        return Err(ExecError::Type(format!(
            "join operands must be distinct tables, got `{}` twice",
            left.name()
        )));
    }
    check_join(left.schema(), right.schema(), left_col, right_col)
        .map_err(|(_, m)| ExecError::Type(m))?;
    let li = col_index(left.schema(), left_col)?;
    let ri = col_index(right.schema(), right_col)?;
    let schema = join_schema(left.name(), left.schema(), right.name(), right.schema());
    let mut by_key: HashMap<&Value, Vec<&Row>> = HashMap::new();
    for r in right.rows() {
        by_key.entry(&r[ri]).or_default().push(r);
    }
    let mut rows = Vec::new();
    for l in left.rows() {
        if let Some(matches) = by_key.get(&l[li]) {
            for r in matches {
                let mut row = l.clone();
                row.extend(r.iter().cloned());
                rows.push(row);
            }
        }
    }
    Ok(Table::from_checked(left.name().to_string(), schema, rows))
}

/// Output schema of a group-join and the names of the appended columns.
pub fn groupjoin_schema(s: &Schema, aggs: &[(Agg, String)]) -> (Schema, Vec<String>) {
    let mut schema = s.clone();
    let mut names = Vec::new();
    for (agg, col) in aggs {
        let ty = ColumnType::Int;
        let name = schema.fresh_name(&format!("{}_{col}", agg.name()));
        schema = schema
            .with_column(Column::new(name.clone(), ty))
            .expect("fresh name");
        names.push(name);
    }
    (schema, names)
}

pub(crate) fn check_groupjoin(
    s: &Schema,
    index: &str,
    aggs: &[(Agg, String)],
) -> Result<(), String> {
    if s.index_of(index).is_none() {
        return Err(format!("unknown column `{index}`"));
    }
    if aggs.is_empty() {
        return Err("group-join needs at least one aggregation".into());
    }
    for (agg, col) in aggs {
        let ty = s
            .type_of(col)
            .ok_or_else(|| format!("unknown column `{col}`"))?;
        if !agg.accepts(ty) {
            return Err(format!(
                "{} needs an Int column, `{col}` is {ty}",
                agg.name()
            ));
        }
    }
    Ok(())
}

fn aggregate(agg: Agg, vals: &[&Value]) -> Result<i64, ExecError> {
    let ints = || vals.iter().map(|v| v.as_int().expect("type-checked"));
    let overflow = || ExecError::Overflow(format!("{} aggregation", agg.name()));
    let count = vals.len() as i64;
    Ok(match agg {
        Agg::Cnt => count,
        Agg::Max => ints().max().expect("groups are nonempty"),
        Agg::Min => ints().min().expect("groups are nonempty"),
        Agg::Sum => ints()
            .try_fold(0i64, |a, b| a.checked_add(b))
            .ok_or_else(overflow)?,
        Agg::Avg => {
            ints()
                .try_fold(0i64, |a, b| a.checked_add(b))
                .ok_or_else(overflow)?
                / count
        }
    })
}

pub fn exec_groupjoin(t: &Table, index: &str, aggs: &[(Agg, String)]) -> Result<Table, ExecError> {
    check_groupjoin(t.schema(), index, aggs).map_err(ExecError::Type)?;
    let ki = col_index(t.schema(), index)?;
    let mut groups: HashMap<&Value, Vec<usize>> = HashMap::new();
    for (i, r) in t.rows().iter().enumerate() {
        groups.entry(&r[ki]).or_default().push(i);
    }
    let (schema, _) = groupjoin_schema(t.schema(), aggs);
    let mut rows: Vec<Row> = t.rows().to_vec();
    for (agg, col) in aggs {
        let ci = col_index(t.schema(), col)?;
        let mut per_group: HashMap<&Value, i64> = HashMap::new();
        for (key, members) in &groups {
            let vals: Vec<&Value> = members.iter().map(|&i| &t.rows()[i][ci]).collect();
            per_group.insert(*key, aggregate(*agg, &vals)?);
        }
        for (i, r) in t.rows().iter().enumerate() {
            rows[i].push(Value::Int(per_group[&r[ki]]));
        }
    }
    Ok(Table::from_checked(t.name().to_string(), schema, rows))
}

pub fn order_schema(s: &Schema, col: &str) -> (Schema, String) {
    let name = s.fresh_name(&format!("ord_{col}"));
    let schema = s
        .with_column(Column::new(name.clone(), ColumnType::Int))
        .expect("fresh name");
    (schema, name)
}

pub(crate) fn check_order(s: &Schema, col: &str, index: Option<&str>) -> Result<(), String> {
    match s.type_of(col) {
        None => return Err(format!("unknown column `{col}`")),
        Some(ColumnType::Id) => return Err(format!("cannot order by Id column `{col}`")),
        _ => {}
    }
    if let Some(ix) = index {
        if s.index_of(ix).is_none() {
            return Err(format!("unknown column `{ix}`"));
        }
    }
    Ok(())
}

/// Appends a competition rank: `start` plus the number of rows in the same
/// group whose `col` value comes strictly before this row's.
pub fn exec_order(
    t: &Table,
    col: &str,
    start: i64,
    descending: bool,
    index: Option<&str>,
) -> Result<Table, ExecError> {
    check_order(t.schema(), col, index).map_err(ExecError::Type)?;
    let ci = col_index(t.schema(), col)?;
    let ki = index.map(|ix| col_index(t.schema(), ix)).transpose()?;
    let mut groups: HashMap<Option<&Value>, Vec<&Value>> = HashMap::new();
    for r in t.rows() {
        groups.entry(ki.map(|k| &r[k])).or_default().push(&r[ci]);
    }
    for vals in groups.values_mut() {
        vals.sort_unstable();
    }
    let (schema, _) = order_schema(t.schema(), col);
    let mut rows = Vec::with_capacity(t.len());
    for r in t.rows() {
        let vals = &groups[&ki.map(|k| &r[k])];
        let x = &r[ci];
        let before = if descending {
            vals.len() - vals.partition_point(|v| *v <= x)
        } else {
            vals.partition_point(|v| *v < x)
        };
        let rank = start
            .checked_add(before as i64)
            .ok_or_else(|| ExecError::Overflow("order rank".into()))?;
        let mut row = r.clone();
        row.push(Value::Int(rank));
        rows.push(row);
    }
    Ok(Table::from_checked(t.name().to_string(), schema, rows))
}

pub fn exec_transform(state: &ExecState, stmt: &TransformStmt) -> Result<Table, ExecError> {
    let t = match &stmt.op {
        TransformOp::Filter { src, pred } => exec_filter(state.get(src)?, pred)?,
        TransformOp::Join {
            left,
            right,
            left_col,
            right_col,
        } => exec_join(state.get(left)?, state.get(right)?, left_col, right_col)?,
        TransformOp::GroupJoin { src, index, aggs } => {
            exec_groupjoin(state.get(src)?, index, aggs)?
        }
        TransformOp::Order {
            src,
            col,
            start,
            descending,
            index,
        } => exec_order(state.get(src)?, col, *start, *descending, index.as_deref())?,
    };
    Ok(t.renamed(stmt.target.clone()))
}

/// Projects the source table row-wise and renames the result to the action
/// signature.
pub fn exec_yield(
    state: &ExecState,
    stmt: &MappingStmt,
    action: &ActionSignature,
) -> Result<Table, ExecError> {
    let src = state.get(&stmt.src)?;
    yield_rows(src, &stmt.projections, action)
}

pub(crate) fn yield_rows(
    src: &Table,
    projections: &[Projection],
    action: &ActionSignature,
) -> Result<Table, ExecError> {
    let schema = action.schema()?;
    if projections.len() != schema.len() {
        return Err(ExecError::Type(format!(
            "yield has {} projections, action `{}` needs {}",
            projections.len(),
            action.name,
            schema.len()
        )));
    }
    enum P<'a> {
        Col(usize),
        Const(&'a Value),
        Mutate(&'a crate::features::FeatureInstance, Vec<usize>),
    }
    let ps = projections
        .iter()
        .map(|p| {
            Ok(match p {
                Projection::Col(c) => P::Col(col_index(src.schema(), c)?),
                Projection::Const(v) => P::Const(v),
                Projection::Mutate { feature, cols } => P::Mutate(
                    feature,
                    cols.iter()
                        .map(|c| col_index(src.schema(), c))
                        .collect::<Result<_, _>>()?,
                ),
            })
        })
        .collect::<Result<Vec<_>, ExecError>>()?;
    let mut rows = Vec::with_capacity(src.len());
    for r in src.rows() {
        let mut row = Vec::with_capacity(ps.len());
        for p in &ps {
            row.push(match p {
                P::Col(i) => r[*i].clone(),
                P::Const(v) => (*v).clone(),
                P::Mutate(f, idx) => {
                    let args: Vec<Value> = idx.iter().map(|&i| r[i].clone()).collect();
                    apply_feature(f, &args)?
                }
            });
        }
        rows.push(row);
    }
    Ok(Table::new("out", schema, rows)?)
}

/// Runs every statement and unions the `Yield` outputs.
pub fn exec_program(
    p: &Program,
    inputs: &[Table],
    action: &ActionSignature,
) -> Result<Table, ExecError> {
    let schemas: Vec<(String, Schema)> = inputs
        .iter()
        .map(|t| (t.name().to_string(), t.schema().clone()))
        .collect();
    validate_program(p, &schemas, action).map_err(ExecError::Invalid)?;
    let mut state = ExecState::new(inputs);
    for (i, stmt) in p.transforms.iter().enumerate() {
        let t = exec_transform(&state, stmt).map_err(|e| e.at(i))?;
        state.insert(t);
    }
    let mut out = Table::empty("out", action.schema()?);
    for (j, m) in p.mappings.iter().enumerate() {
        let t = exec_yield(&state, m, action).map_err(|e| e.at(p.transforms.len() + j))?;
        out = out.union(&t)?;
    }
    Ok(out)
}
