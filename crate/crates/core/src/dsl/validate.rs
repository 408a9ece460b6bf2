//! Static validity: names are defined before use, targets are fresh, and
//! every operator and projection type-checks.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::ast::*;
use super::interp::{
    check_atom, check_groupjoin, check_join, check_order, groupjoin_schema, join_schema,
    order_schema,
};
use crate::table::{ColumnType, Schema, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    DefinedBeforeUse,
    FreshName,
    TypeCheck,
    IdTypedJoin,
    ActionConstant,
    ActionArity,
    ArgumentType,
    NoMapping,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::DefinedBeforeUse => "defined before use",
            Rule::FreshName => "fresh name",
            Rule::TypeCheck => "type check",
            Rule::IdTypedJoin => "Id-typed join",
            Rule::ActionConstant => "action constant",
            Rule::ActionArity => "action arity",
            Rule::ArgumentType => "argument type",
            Rule::NoMapping => "nonempty mapping",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule: {}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Zero-based statement index; transforms come first, then `Yield`s.
    pub statement: usize,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "statement {}: {}: {}",
            self.statement, self.rule, self.message
        )
    }
}

/// Checks `p` against the named input schemas and the action signature.
/// Collects every violation instead of stopping at the first.
pub fn validate_program(
    p: &Program,
    inputs: &[(String, Schema)],
    action: &ActionSignature,
) -> Result<(), Vec<Violation>> {
    // `None` marks a table whose schema is unknown because its own statement
    // was invalid; uses of it are not reported again.
    let mut env: HashMap<&str, Option<Schema>> = inputs
        .iter()
        .map(|(n, s)| (n.as_str(), Some(s.clone())))
        .collect();
    let mut out = Vec::new();

    for (i, stmt) in p.transforms.iter().enumerate() {
        let mut v = |rule, message: String| {
            out.push(Violation {
                statement: i,
                rule,
                message,
            })
        };
        if env.contains_key(stmt.target.as_str()) {
            v(
                Rule::FreshName,
                format!("table `{}` is already defined", stmt.target),
            );
        }
        let mut srcs = Vec::new();
        let mut missing = false;
        for s in stmt.op.sources() {
            match env.get(s) {
                None => {
                    v(
                        Rule::DefinedBeforeUse,
                        format!("table `{s}` is not defined"),
                    );
                    missing = true;
                }
                Some(None) => missing = true,
                Some(Some(schema)) => srcs.push(schema),
            }
        }
        let schema = if missing {
            None
        } else {
            match transform_schema(&stmt.op, &srcs) {
                Ok(s) => Some(s),
                Err((rule, m)) => {
                    v(rule, m);
                    None
                }
            }
        };
        env.entry(stmt.target.as_str()).or_insert(schema);
    }

    if p.mappings.is_empty() {
        out.push(Violation {
            statement: p.transforms.len(),
            rule: Rule::NoMapping,
            message: "program has no Yield statement".into(),
        });
    }
    let n_args = action.args.len();
    for (j, m) in p.mappings.iter().enumerate() {
        let idx = p.transforms.len() + j;
        let mut v = |rule, message: String| {
            out.push(Violation {
                statement: idx,
                rule,
                message,
            })
        };
        match m.projections.first() {
            Some(Projection::Const(Value::Str(s))) if **s == *action.name => {}
            Some(Projection::Const(Value::Str(s))) => v(
                Rule::ActionConstant,
                format!("action `{s}` does not match signature `{}`", action.name),
            ),
            _ => v(
                Rule::ActionConstant,
                "first projection must be the action name string".into(),
            ),
        }
        if m.projections.len() != n_args + 1 {
            v(
                Rule::ActionArity,
                format!(
                    "action `{}` takes {n_args} argument(s), got {}",
                    action.name,
                    m.projections.len().saturating_sub(1)
                ),
            );
        }
        let schema = match env.get(m.src.as_str()) {
            None => {
                v(
                    Rule::DefinedBeforeUse,
                    format!("table `{}` is not defined", m.src),
                );
                continue;
            }
            Some(None) => continue,
            Some(Some(s)) => s,
        };
        for (k, (p, arg)) in m.projections.iter().skip(1).zip(&action.args).enumerate() {
            match projection_type(p, schema) {
                Err(msg) => v(Rule::TypeCheck, msg),
                Ok(ty) if ty != arg.ty => v(
                    Rule::ArgumentType,
                    format!(
                        "argument {} (`{}`) expects {}, projection gives {ty}",
                        k + 1,
                        arg.name,
                        arg.ty
                    ),
                ),
                Ok(_) => {}
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn transform_schema(op: &TransformOp, srcs: &[&Schema]) -> Result<Schema, (Rule, String)> {
    let ty = |m: String| (Rule::TypeCheck, m);
    match op {
        TransformOp::Filter { pred, .. } => {
            for a in pred.atoms() {
                check_atom(a, srcs[0]).map_err(ty)?;
            }
            Ok(srcs[0].clone())
        }
        TransformOp::Join {
            left,
            right,
            left_col,
            right_col,
        } => {
            if left == right {
                return Err(ty(format!(
                    "join operands must be distinct tables, got `{left}` twice"
                )));
            }
            check_join(srcs[0], srcs[1], left_col, right_col).map_err(|(id_rule, m)| {
                if id_rule {
                    (Rule::IdTypedJoin, m)
                } else {
                    ty(m)
                }
            })?;
            Ok(join_schema(left, srcs[0], right, srcs[1]))
        }
        TransformOp::GroupJoin { index, aggs, .. } => {
            check_groupjoin(srcs[0], index, aggs).map_err(ty)?;
            Ok(groupjoin_schema(srcs[0], aggs).0)
        }
        TransformOp::Order { col, index, .. } => {
            check_order(srcs[0], col, index.as_deref()).map_err(ty)?;
            Ok(order_schema(srcs[0], col).0)
        }
    }
}

/// Type produced by a projection over `schema`.
pub fn projection_type(p: &Projection, schema: &Schema) -> Result<ColumnType, String> {
    match p {
        Projection::Col(c) => schema
            .type_of(c)
            .ok_or_else(|| format!("unknown column `{c}`")),
        Projection::Const(v) => Ok(v.ty()),
        Projection::Mutate { feature, cols } => {
            feature.check_params()?;
            if !feature.accepts_arity(cols.len()) {
                return Err(format!(
                    "feature {feature} cannot take {} column(s)",
                    cols.len()
                ));
            }
            let want = feature.family().input_type();
            for c in cols {
                let t = schema
                    .type_of(c)
                    .ok_or_else(|| format!("unknown column `{c}`"))?;
                if t != want {
                    return Err(format!(
                        "feature {feature} needs {want} input, `{c}` is {t}"
                    ));
                }
            }
            Ok(feature.output_type())
        }
    }
}

/// `(name, schema)` pairs for the given tables.
pub fn input_schemas(tables: &[crate::table::Table]) -> Vec<(String, Schema)> {
    tables
        .iter()
        .map(|t| (t.name().to_string(), t.schema().clone()))
        .collect()
}
