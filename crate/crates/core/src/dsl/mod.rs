//! The table-transformation language: syntax tree, static validity, text
//! format and interpreter.

mod ast;
mod interp;
mod syntax;
mod validate;

pub use ast::*;
pub(crate) use interp::yield_rows;
pub use interp::{
    eval_atom, eval_predicate, exec_filter, exec_groupjoin, exec_join, exec_order, exec_program,
    exec_transform, exec_yield, groupjoin_schema, join_schema, order_schema, CompiledPredicate,
    ExecError, ExecState,
};
pub use syntax::{parse_predicate, parse_program};
pub use validate::{input_schemas, projection_type, validate_program, Rule, Violation};
