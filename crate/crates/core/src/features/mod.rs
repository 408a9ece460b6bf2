//! Parameterized value computations used by `Mutate` projections.
//!
//! Each [`FeatureFamily`] is a higher-order function whose parameters are
//! recovered from examples by a solver (see [`solve`]). Solvers are registered
//! by name in a [`FeatureRegistry`] and tried in a fixed order.

pub mod extract;
mod registry;
pub mod solve;

use std::fmt;

use thiserror::Error;

use crate::table::{ColumnType, Value};
use crate::text::{Lexer, ParseError, Tok};

pub use extract::{ExtractIndex, ExtractSpec, TokenClass};
pub use registry::{enumerate_feature_families, FeatureRegistry, FeatureSolver, Sample};
pub use solve::{
    solve_concat, solve_div, solve_linear, solve_mod, solve_substring, solve_sum, SolverCaps,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("{feature} expects {expected} argument(s), got {found}")]
    Arity {
        feature: String,
        expected: usize,
        found: usize,
    },
    #[error("{feature} expects {expected} input, got {found}")]
    Type {
        feature: String,
        expected: ColumnType,
        found: ColumnType,
    },
    #[error("extraction {spec} does not match {input:?}")]
    NoMatch { spec: String, input: String },
    #[error("integer overflow in {0}")]
    Overflow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureFamily {
    Linear,
    Div,
    Mod,
    Sum,
    Substring,
    Concat,
}

impl FeatureFamily {
    /// Every family, in solving order.
    pub const ALL: [FeatureFamily; 6] = [
        FeatureFamily::Linear,
        FeatureFamily::Div,
        FeatureFamily::Mod,
        FeatureFamily::Sum,
        FeatureFamily::Substring,
        FeatureFamily::Concat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureFamily::Linear => "linear",
            FeatureFamily::Div => "div",
            FeatureFamily::Mod => "mod",
            FeatureFamily::Sum => "sum",
            FeatureFamily::Substring => "substring",
            FeatureFamily::Concat => "concat",
        }
    }

    /// Whether the family accepts `inputs` and produces `out`.
    pub fn accepts(self, inputs: &[ColumnType], out: ColumnType) -> bool {
        use ColumnType::*;
        match self {
            FeatureFamily::Linear | FeatureFamily::Div | FeatureFamily::Mod => {
                inputs == [Int] && out == Int
            }
            FeatureFamily::Sum => inputs == [Int, Int] && out == Int,
            FeatureFamily::Substring => inputs == [Str] && out == Str,
            FeatureFamily::Concat => {
                !inputs.is_empty() && inputs.iter().all(|t| *t == Str) && out == Str
            }
        }
    }

    pub fn output_type(self) -> ColumnType {
        match self {
            FeatureFamily::Substring | FeatureFamily::Concat => ColumnType::Str,
            _ => ColumnType::Int,
        }
    }

    pub fn input_type(self) -> ColumnType {
        self.output_type()
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Extract { input: usize, spec: ExtractSpec },
    Literal(String),
}

/// Left-to-right concatenation of extracts and literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConcatProgram {
    pub segments: Vec<Segment>,
}

impl ConcatProgram {
    /// Smallest arity that covers every referenced input.
    pub fn min_arity(&self) -> usize {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Extract { input, .. } => Some(input + 1),
                Segment::Literal(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn run(&self, inputs: &[&str]) -> Result<String, FeatureError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Extract { input, spec } => {
                    let x = inputs.get(*input).ok_or_else(|| FeatureError::Arity {
                        feature: "concat".into(),
                        expected: input + 1,
                        found: inputs.len(),
                    })?;
                    let piece = spec.apply(x).ok_or_else(|| FeatureError::NoMatch {
                        spec: spec.to_string(),
                        input: x.to_string(),
                    })?;
                    out.push_str(&piece);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for ConcatProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Extract { input, spec } => format!("x{input}{spec}"),
                Segment::Literal(l) => crate::text::quote(l),
            })
            .collect();
        write!(f, "concat[{}]", parts.join(" "))
    }
}

/// A feature with every parameter fixed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FeatureInstance {
    Linear { a: i64, b: i64 },
    Div { b: i64, d: i64 },
    Mod { b1: i64, b2: i64, d: i64 },
    Sum { b: i64 },
    Substring(ExtractSpec),
    Concat(ConcatProgram),
}

impl FeatureInstance {
    pub fn family(&self) -> FeatureFamily {
        match self {
            FeatureInstance::Linear { .. } => FeatureFamily::Linear,
            FeatureInstance::Div { .. } => FeatureFamily::Div,
            FeatureInstance::Mod { .. } => FeatureFamily::Mod,
            FeatureInstance::Sum { .. } => FeatureFamily::Sum,
            FeatureInstance::Substring(_) => FeatureFamily::Substring,
            FeatureInstance::Concat(_) => FeatureFamily::Concat,
        }
    }

    /// Number of input columns, or `None` for concat (any arity covering
    /// its extracts).
    pub fn arity(&self) -> Option<usize> {
        match self {
            FeatureInstance::Sum { .. } => Some(2),
            FeatureInstance::Concat(_) => None,
            _ => Some(1),
        }
    }

    pub fn accepts_arity(&self, n: usize) -> bool {
        match self {
            FeatureInstance::Concat(p) => n >= 1 && n >= p.min_arity(),
            _ => self.arity() == Some(n),
        }
    }

    pub fn output_type(&self) -> ColumnType {
        self.family().output_type()
    }

    /// Checks parameter invariants (divisor ranges and the like).
    pub fn check_params(&self) -> Result<(), String> {
        match self {
            FeatureInstance::Div { d, .. } if *d < 2 => Err(format!("div divisor {d} < 2")),
            FeatureInstance::Mod { b1, d, .. } => {
                if !(2..=10).contains(d) {
                    Err(format!("mod divisor {d} outside 2..=10"))
                } else if !(0..*d).contains(b1) {
                    Err(format!("mod offset {b1} outside 0..{d}"))
                } else {
                    Ok(())
                }
            }
            FeatureInstance::Substring(s) if s.tokens.is_empty() || s.occurrence == 0 => {
                Err("empty extraction".into())
            }
            FeatureInstance::Concat(p) if p.segments.is_empty() => Err("empty concat".into()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FeatureInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureInstance::Linear { a, b } => write!(f, "linear({a},{b})"),
            FeatureInstance::Div { b, d } => write!(f, "div({b},{d})"),
            FeatureInstance::Mod { b1, b2, d } => write!(f, "mod({b1},{b2},{d})"),
            FeatureInstance::Sum { b } => write!(f, "sum({b})"),
            FeatureInstance::Substring(s) => write!(f, "substring{s}"),
            FeatureInstance::Concat(p) => write!(f, "{p}"),
        }
    }
}

fn int_arg(f: &FeatureInstance, v: &Value) -> Result<i64, FeatureError> {
    v.as_int().ok_or_else(|| FeatureError::Type {
        feature: f.to_string(),
        expected: ColumnType::Int,
        found: v.ty(),
    })
}

fn str_arg<'a>(f: &FeatureInstance, v: &'a Value) -> Result<&'a str, FeatureError> {
    v.as_str().ok_or_else(|| FeatureError::Type {
        feature: f.to_string(),
        expected: ColumnType::Str,
        found: v.ty(),
    })
}

/// Applies a concrete feature to one row's argument values.
pub fn apply_feature(f: &FeatureInstance, args: &[Value]) -> Result<Value, FeatureError> {
    if !f.accepts_arity(args.len()) {
        return Err(FeatureError::Arity {
            feature: f.to_string(),
            expected: f.arity().unwrap_or_else(|| match f {
                FeatureInstance::Concat(p) => p.min_arity().max(1),
                _ => 1,
            }),
            found: args.len(),
        });
    }
    let overflow = || FeatureError::Overflow(f.to_string());
    Ok(match f {
        FeatureInstance::Linear { a, b } => {
            let x = int_arg(f, &args[0])?;
            Value::Int(
                a.checked_mul(x)
                    .and_then(|v| v.checked_add(*b))
                    .ok_or_else(overflow)?,
            )
        }
        FeatureInstance::Sum { b } => {
            let x = int_arg(f, &args[0])?;
            let y = int_arg(f, &args[1])?;
            Value::Int(
                x.checked_add(y)
                    .and_then(|v| v.checked_add(*b))
                    .ok_or_else(overflow)?,
            )
        }
        FeatureInstance::Div { b, d } => {
            let x = int_arg(f, &args[0])?;
            Value::Int(x.checked_add(*b).ok_or_else(overflow)?.div_euclid(*d))
        }
        FeatureInstance::Mod { b1, b2, d } => {
            let x = int_arg(f, &args[0])?;
            let r = x.checked_add(*b1).ok_or_else(overflow)?.rem_euclid(*d);
            Value::Int(r.checked_add(*b2).ok_or_else(overflow)?)
        }
        FeatureInstance::Substring(spec) => {
            let x = str_arg(f, &args[0])?;
            Value::str(spec.apply(x).ok_or_else(|| FeatureError::NoMatch {
                spec: spec.to_string(),
                input: x.to_string(),
            })?)
        }
        FeatureInstance::Concat(p) => {
            let xs = args
                .iter()
                .map(|a| str_arg(f, a))
                .collect::<Result<Vec<_>, _>>()?;
            Value::str(p.run(&xs)?)
        }
    })
}

/// Parses a feature in its printed form, e.g. `linear(-5,-25)` or
/// `concat[x0{Alnum#1} "-" x1{Digits#1}]`.
pub fn parse_feature(src: &str) -> Result<FeatureInstance, ParseError> {
    let mut lx = Lexer::new(src)?;
    let f = parse_feature_from(&mut lx)?;
    lx.expect_end()?;
    Ok(f)
}

pub(crate) fn is_feature_start(lx: &Lexer) -> bool {
    match (lx.peek(), lx.peek_at(1)) {
        (Some(Tok::Ident(name)), Some(Tok::Sym(s))) => matches!(
            (name.as_str(), s),
            ("linear" | "div" | "mod" | "sum", '(') | ("substring", '{') | ("concat", '[')
        ),
        _ => false,
    }
}

pub(crate) fn parse_feature_from(lx: &mut Lexer) -> Result<FeatureInstance, ParseError> {
    let name = lx.ident()?;
    let int_args = |lx: &mut Lexer, n: usize| -> Result<Vec<i64>, ParseError> {
        lx.expect_sym('(')?;
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                lx.expect_sym(',')?;
            }
            v.push(lx.int()?);
        }
        lx.expect_sym(')')?;
        Ok(v)
    };
    let f = match name.as_str() {
        "linear" => {
            let v = int_args(lx, 2)?;
            FeatureInstance::Linear { a: v[0], b: v[1] }
        }
        "div" => {
            let v = int_args(lx, 2)?;
            FeatureInstance::Div { b: v[0], d: v[1] }
        }
        "mod" => {
            let v = int_args(lx, 3)?;
            FeatureInstance::Mod {
                b1: v[0],
                b2: v[1],
                d: v[2],
            }
        }
        "sum" => {
            let v = int_args(lx, 1)?;
            FeatureInstance::Sum { b: v[0] }
        }
        "substring" => FeatureInstance::Substring(parse_spec(lx)?),
        "concat" => {
            lx.expect_sym('[')?;
            let mut segments = Vec::new();
            while !lx.eat_sym(']') {
                match lx.next() {
                    Some(Tok::Str(s)) if !s.is_empty() => segments.push(Segment::Literal(s)),
                    Some(Tok::Ident(x)) if x.starts_with('x') => {
                        let input = x[1..]
                            .parse::<usize>()
                            .map_err(|_| lx.error(format!("bad input reference `{x}`")))?;
                        segments.push(Segment::Extract {
                            input,
                            spec: parse_spec(lx)?,
                        });
                    }
                    _ => return Err(lx.error("expected concat segment")),
                }
            }
            FeatureInstance::Concat(ConcatProgram { segments })
        }
        other => return Err(lx.error(format!("unknown feature `{other}`"))),
    };
    f.check_params().map_err(|m| lx.error(m))?;
    Ok(f)
}

fn parse_spec(lx: &mut Lexer) -> Result<ExtractSpec, ParseError> {
    lx.expect_sym('{')?;
    let mut tokens = Vec::new();
    loop {
        match lx.next() {
            Some(Tok::Ident(n)) => tokens.push(
                TokenClass::from_name(&n)
                    .ok_or_else(|| lx.error(format!("unknown token class `{n}`")))?,
            ),
            Some(Tok::Char(c)) => tokens.push(TokenClass::Punct(c)),
            _ => return Err(lx.error("expected token class")),
        }
        if lx.eat_sym('#') {
            break;
        }
        lx.expect_sym(',')?;
    }
    let occ = lx.int()?;
    lx.expect_sym('}')?;
    if occ == 0 || occ.unsigned_abs() > i32::MAX as u64 {
        return Err(lx.error("occurrence must be a nonzero 32-bit integer"));
    }
    Ok(ExtractSpec::new(tokens, occ as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenClass::*;

    fn ints(f: &FeatureInstance, xs: &[i64]) -> Vec<i64> {
        xs.iter()
            .map(|x| {
                apply_feature(f, &[Value::Int(*x)])
                    .unwrap()
                    .as_int()
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn linear_values() {
        let f = FeatureInstance::Linear { a: -5, b: -25 };
        assert_eq!(ints(&f, &[1, 3]), vec![-30, -40]);
        let id = FeatureInstance::Linear { a: 1, b: 0 };
        assert_eq!(ints(&id, &[-7, 0, 9]), vec![-7, 0, 9]);
    }

    #[test]
    fn mod_parity() {
        let f = FeatureInstance::Mod { b1: 0, b2: 0, d: 2 };
        assert_eq!(ints(&f, &[1, 2, 3, 4]), vec![1, 0, 1, 0]);
        assert_eq!(ints(&f, &[-3]), vec![1]);
    }

    #[test]
    fn div_floors() {
        let f = FeatureInstance::Div { b: 0, d: 2 };
        assert_eq!(ints(&f, &[-3, -1, 0, 3]), vec![-2, -1, 0, 1]);
    }

    #[test]
    fn sum_value() {
        let f = FeatureInstance::Sum { b: 100 };
        assert_eq!(
            apply_feature(&f, &[Value::Int(1), Value::Int(2)]).unwrap(),
            Value::Int(103)
        );
    }

    #[test]
    fn errors() {
        let f = FeatureInstance::Linear { a: i64::MAX, b: 1 };
        assert!(matches!(
            apply_feature(&f, &[Value::Int(2)]),
            Err(FeatureError::Overflow(_))
        ));
        assert!(matches!(
            apply_feature(&f, &[Value::str("x")]),
            Err(FeatureError::Type { .. })
        ));
        assert!(matches!(
            apply_feature(&f, &[]),
            Err(FeatureError::Arity { .. })
        ));
        let s = FeatureInstance::Substring(ExtractSpec::new(vec![Digits], 1));
        assert!(matches!(
            apply_feature(&s, &[Value::str("abc")]),
            Err(FeatureError::NoMatch { .. })
        ));
    }

    #[test]
    fn concat_runs() {
        let p = FeatureInstance::Concat(ConcatProgram {
            segments: vec![
                Segment::Extract {
                    input: 0,
                    spec: ExtractSpec::new(vec![Alnum], 1),
                },
                Segment::Literal("-".into()),
                Segment::Extract {
                    input: 1,
                    spec: ExtractSpec::new(vec![Digits], 1),
                },
            ],
        });
        assert_eq!(
            apply_feature(&p, &[Value::str("report"), Value::str("2021")]).unwrap(),
            Value::str("report-2021")
        );
        assert_eq!(p.to_string(), r#"concat[x0{Alnum#1} "-" x1{Digits#1}]"#);
    }

    #[test]
    fn printed_forms_parse_back() {
        let cases = [
            "linear(-5,-25)",
            "mod(0,0,2)",
            "div(1,10)",
            "sum(100)",
            "substring{Alnum,'.',Digits#-2}",
            r#"concat[x0{Alnum#1} "-" x1{Digits#1}]"#,
            r#"concat["/a\"b" x0{'\'',Ws#3}]"#,
        ];
        for c in cases {
            let f = parse_feature(c).unwrap();
            assert_eq!(f.to_string(), c);
        }
        assert!(parse_feature("mod(0,0,11)").is_err());
        assert!(parse_feature("mod(2,0,2)").is_err());
        assert!(parse_feature("substring{Nope#1}").is_err());
        assert!(parse_feature("substring{Digits#0}").is_err());
    }
}
