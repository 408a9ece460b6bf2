//! Program text: one statement per line, e.g.
//!
//! ```text
//! u = Filter(ti, isOdd(frame));
//! Yield("shift", u, id, "GB", linear(-5,-25)(frame), linear(-5,-25)(frame));
//! ```

use std::fmt;

use super::ast::*;
use crate::features::{is_feature_start, parse_feature_from};
use crate::table::Value;
use crate::text::{Lexer, ParseError, Tok};

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Col(c) => f.write_str(c),
            Operand::Const(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Atom(a) => match &a.arg {
                None => write!(f, "{}({})", a.symbol.name(), a.col),
                Some(o) => write!(f, "{}({}, {o})", a.symbol.name(), a.col),
            },
            Predicate::And(a, b) => write!(f, "and({a}, {b})"),
            Predicate::Or(a, b) => write!(f, "or({a}, {b})"),
            Predicate::Not(p) => write!(f, "not({p})"),
        }
    }
}

impl fmt::Display for TransformStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = ", self.target)?;
        match &self.op {
            TransformOp::Filter { src, pred } => write!(f, "Filter({src}, {pred});"),
            TransformOp::Join {
                left,
                right,
                left_col,
                right_col,
            } => write!(f, "Join({left}, {right}, {left_col}, {right_col});"),
            TransformOp::GroupJoin { src, index, aggs } => {
                write!(f, "GroupJoin({src}, {index}")?;
                for (a, c) in aggs {
                    write!(f, ", ({}, {c})", a.name())?;
                }
                f.write_str(");")
            }
            TransformOp::Order {
                src,
                col,
                start,
                descending,
                index,
            } => {
                write!(f, "Order({src}, {col}, {start}, {descending}")?;
                if let Some(ix) = index {
                    write!(f, ", {ix}")?;
                }
                f.write_str(");")
            }
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Projection::Col(c) => f.write_str(c),
            Projection::Const(v) => write!(f, "{v}"),
            Projection::Mutate { feature, cols } => write!(f, "{feature}({})", cols.join(", ")),
        }
    }
}

impl fmt::Display for MappingStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Yield(")?;
        let mut ps = self.projections.iter();
        if let Some(first) = ps.next() {
            write!(f, "{first}, ")?;
        }
        f.write_str(&self.src)?;
        for p in ps {
            write!(f, ", {p}")?;
        }
        f.write_str(");")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.transforms {
            writeln!(f, "{t}")?;
        }
        if !self.transforms.is_empty() && !self.mappings.is_empty() {
            writeln!(f)?;
        }
        for m in &self.mappings {
            writeln!(f, "{m}")?;
        }
        Ok(())
    }
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut lx = Lexer::new(src)?;
    let mut p = Program::default();
    while !lx.at_end() {
        let is_yield = matches!(
            (lx.peek(), lx.peek_at(1)),
            (Some(Tok::Ident(k)), Some(Tok::Sym('('))) if k == "Yield"
        );
        if is_yield {
            p.mappings.push(parse_yield(&mut lx)?);
        } else {
            if !p.mappings.is_empty() {
                return Err(lx.error("transform statements must precede Yield statements"));
            }
            p.transforms.push(parse_transform(&mut lx)?);
        }
        lx.expect_sym(';')?;
    }
    Ok(p)
}

pub fn parse_predicate(src: &str) -> Result<Predicate, ParseError> {
    let mut lx = Lexer::new(src)?;
    let p = predicate(&mut lx)?;
    lx.expect_end()?;
    Ok(p)
}

fn parse_yield(lx: &mut Lexer) -> Result<MappingStmt, ParseError> {
    lx.ident()?;
    lx.expect_sym('(')?;
    let first = projection(lx)?;
    lx.expect_sym(',')?;
    let src = lx.ident()?;
    let mut projections = vec![first];
    while lx.eat_sym(',') {
        projections.push(projection(lx)?);
    }
    lx.expect_sym(')')?;
    Ok(MappingStmt { src, projections })
}

fn parse_transform(lx: &mut Lexer) -> Result<TransformStmt, ParseError> {
    let target = lx.ident()?;
    lx.expect_sym('=')?;
    let op_name = lx.ident()?;
    lx.expect_sym('(')?;
    let op = match op_name.as_str() {
        "Filter" => {
            let src = lx.ident()?;
            lx.expect_sym(',')?;
            let pred = predicate(lx)?;
            TransformOp::Filter { src, pred }
        }
        "Join" => {
            let left = lx.ident()?;
            lx.expect_sym(',')?;
            let right = lx.ident()?;
            lx.expect_sym(',')?;
            let left_col = lx.ident()?;
            lx.expect_sym(',')?;
            let right_col = lx.ident()?;
            TransformOp::Join {
                left,
                right,
                left_col,
                right_col,
            }
        }
        "GroupJoin" => {
            let src = lx.ident()?;
            lx.expect_sym(',')?;
            let index = lx.ident()?;
            let mut aggs = Vec::new();
            while lx.eat_sym(',') {
                lx.expect_sym('(')?;
                let name = lx.ident()?;
                let agg = Agg::from_name(&name)
                    .ok_or_else(|| lx.error(format!("unknown aggregation `{name}`")))?;
                lx.expect_sym(',')?;
                aggs.push((agg, lx.ident()?));
                lx.expect_sym(')')?;
            }
            TransformOp::GroupJoin { src, index, aggs }
        }
        "Order" => {
            let src = lx.ident()?;
            lx.expect_sym(',')?;
            let col = lx.ident()?;
            lx.expect_sym(',')?;
            let start = lx.int()?;
            lx.expect_sym(',')?;
            let descending = match lx.ident()?.as_str() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(lx.error(format!("expected `true` or `false`, found `{other}`")))
                }
            };
            let index = if lx.eat_sym(',') {
                Some(lx.ident()?)
            } else {
                None
            };
            TransformOp::Order {
                src,
                col,
                start,
                descending,
                index,
            }
        }
        other => return Err(lx.error(format!("unknown operator `{other}`"))),
    };
    lx.expect_sym(')')?;
    Ok(TransformStmt { target, op })
}

fn predicate(lx: &mut Lexer) -> Result<Predicate, ParseError> {
    let name = lx.ident()?;
    lx.expect_sym('(')?;
    let p = match name.as_str() {
        "and" | "or" => {
            let a = predicate(lx)?;
            lx.expect_sym(',')?;
            let b = predicate(lx)?;
            if name == "and" {
                Predicate::and(a, b)
            } else {
                Predicate::or(a, b)
            }
        }
        "not" => Predicate::not(predicate(lx)?),
        sym => {
            let symbol = PredSymbol::from_name(sym)
                .ok_or_else(|| lx.error(format!("unknown predicate `{sym}`")))?;
            let col = lx.ident()?;
            let arg = if lx.eat_sym(',') {
                Some(match lx.peek() {
                    Some(Tok::Ident(_)) => Operand::Col(lx.ident()?),
                    _ => Operand::Const(constant(lx)?),
                })
            } else {
                None
            };
            Predicate::Atom(Atom { symbol, col, arg })
        }
    };
    lx.expect_sym(')')?;
    Ok(p)
}

fn projection(lx: &mut Lexer) -> Result<Projection, ParseError> {
    if is_feature_start(lx) {
        let feature = parse_feature_from(lx)?;
        lx.expect_sym('(')?;
        let mut cols = vec![lx.ident()?];
        while lx.eat_sym(',') {
            cols.push(lx.ident()?);
        }
        lx.expect_sym(')')?;
        return Ok(Projection::Mutate { feature, cols });
    }
    match lx.peek() {
        Some(Tok::Ident(_)) => Ok(Projection::Col(lx.ident()?)),
        _ => Ok(Projection::Const(constant(lx)?)),
    }
}

fn constant(lx: &mut Lexer) -> Result<Value, ParseError> {
    match lx.next() {
        Some(Tok::Int(v)) => Ok(Value::Int(v)),
        Some(Tok::Str(s)) => Ok(Value::str(s)),
        Some(Tok::Sym('@')) => match lx.next() {
            Some(Tok::Ident(s)) | Some(Tok::Str(s)) => Ok(Value::id(s)),
            _ => Err(lx.error("expected Id label after `@`")),
        },
        _ => Err(lx.error("expected a constant")),
    }
}
