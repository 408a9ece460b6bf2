use serde::{Deserialize, Serialize};

use crate::features::FeatureInstance;
use crate::table::{Column, ColumnType, Schema, TableError, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredSymbol {
    IntEq,
    IntLt,
    IntLeq,
    IntGt,
    IntGeq,
    StrEq,
    IsSubstring,
    StartsWith,
    EndsWith,
    IsOdd,
    IsEven,
}

impl PredSymbol {
    pub const ALL: [PredSymbol; 11] = [
        PredSymbol::IntEq,
        PredSymbol::IntLt,
        PredSymbol::IntLeq,
        PredSymbol::IntGt,
        PredSymbol::IntGeq,
        PredSymbol::StrEq,
        PredSymbol::IsSubstring,
        PredSymbol::StartsWith,
        PredSymbol::EndsWith,
        PredSymbol::IsOdd,
        PredSymbol::IsEven,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredSymbol::IntEq => "intEq",
            PredSymbol::IntLt => "intLt",
            PredSymbol::IntLeq => "intLeq",
            PredSymbol::IntGt => "intGt",
            PredSymbol::IntGeq => "intGeq",
            PredSymbol::StrEq => "strEq",
            PredSymbol::IsSubstring => "isSubstring",
            PredSymbol::StartsWith => "startsWith",
            PredSymbol::EndsWith => "endsWith",
            PredSymbol::IsOdd => "isOdd",
            PredSymbol::IsEven => "isEven",
        }
    }

    pub fn from_name(name: &str) -> Option<PredSymbol> {
        PredSymbol::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Type of every argument.
    pub fn arg_type(self) -> ColumnType {
        match self {
            PredSymbol::IntEq
            | PredSymbol::IntLt
            | PredSymbol::IntLeq
            | PredSymbol::IntGt
            | PredSymbol::IntGeq
            | PredSymbol::IsOdd
            | PredSymbol::IsEven => ColumnType::Int,
            _ => ColumnType::Str,
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, PredSymbol::IsOdd | PredSymbol::IsEven)
    }
}

/// Second argument of a binary predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Col(String),
    Const(Value),
}

/// A predicate symbol applied to a column (and, for binary symbols, an operand).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub symbol: PredSymbol,
    pub col: String,
    pub arg: Option<Operand>,
}

impl Atom {
    pub fn unary(symbol: PredSymbol, col: impl Into<String>) -> Self {
        Atom {
            symbol,
            col: col.into(),
            arg: None,
        }
    }

    pub fn with_const(symbol: PredSymbol, col: impl Into<String>, c: Value) -> Self {
        Atom {
            symbol,
            col: col.into(),
            arg: Some(Operand::Const(c)),
        }
    }

    pub fn with_col(symbol: PredSymbol, col: impl Into<String>, other: impl Into<String>) -> Self {
        Atom {
            symbol,
            col: col.into(),
            arg: Some(Operand::Col(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    Atom(Atom),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    /// Number of predicate symbols (leaves).
    pub fn size(&self) -> usize {
        match self {
            Predicate::Atom(_) => 1,
            Predicate::And(a, b) | Predicate::Or(a, b) => a.size() + b.size(),
            Predicate::Not(p) => p.size(),
        }
    }

    pub fn and(a: Predicate, b: Predicate) -> Predicate {
        Predicate::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Predicate, b: Predicate) -> Predicate {
        Predicate::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Predicate) -> Predicate {
        Predicate::Not(Box::new(p))
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Predicate::Atom(a) => out.push(a),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Predicate::Not(p) => p.collect_atoms(out),
        }
    }
}

impl From<Atom> for Predicate {
    fn from(a: Atom) -> Self {
        Predicate::Atom(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Agg {
    Max,
    Min,
    Sum,
    Avg,
    Cnt,
}

impl Agg {
    pub const ALL: [Agg; 5] = [Agg::Max, Agg::Min, Agg::Sum, Agg::Avg, Agg::Cnt];

    pub fn name(self) -> &'static str {
        match self {
            Agg::Max => "max",
            Agg::Min => "min",
            Agg::Sum => "sum",
            Agg::Avg => "avg",
            Agg::Cnt => "cnt",
        }
    }

    pub fn from_name(name: &str) -> Option<Agg> {
        Agg::ALL.into_iter().find(|a| a.name() == name)
    }

    /// `cnt` counts any column; the others need Int.
    pub fn accepts(self, ty: ColumnType) -> bool {
        self == Agg::Cnt || ty == ColumnType::Int
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TransformOp {
    Filter {
        src: String,
        pred: Predicate,
    },
    Join {
        left: String,
        right: String,
        left_col: String,
        right_col: String,
    },
    GroupJoin {
        src: String,
        index: String,
        aggs: Vec<(Agg, String)>,
    },
    Order {
        src: String,
        col: String,
        start: i64,
        descending: bool,
        index: Option<String>,
    },
}

impl TransformOp {
    /// Tables read by the operation.
    pub fn sources(&self) -> Vec<&str> {
        match self {
            TransformOp::Join { left, right, .. } => vec![left, right],
            TransformOp::Filter { src, .. }
            | TransformOp::GroupJoin { src, .. }
            | TransformOp::Order { src, .. } => vec![src],
        }
    }

    /// Depth contributed by the operation itself: the predicate size for
    /// filters, one otherwise.
    pub fn own_depth(&self) -> usize {
        match self {
            TransformOp::Filter { pred, .. } => pred.size(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransformStmt {
    pub target: String,
    pub op: TransformOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Projection {
    Col(String),
    Const(Value),
    Mutate {
        feature: FeatureInstance,
        cols: Vec<String>,
    },
}

/// `Yield(action, src, projections...)`. The first projection is the action
/// name constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MappingStmt {
    pub src: String,
    pub projections: Vec<Projection>,
}

impl MappingStmt {
    pub fn new(action: &str, src: impl Into<String>, args: Vec<Projection>) -> Self {
        let mut projections = vec![Projection::Const(Value::str(action))];
        projections.extend(args);
        MappingStmt {
            src: src.into(),
            projections,
        }
    }
}

/// Name and typed arguments of an action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSignature {
    pub name: String,
    pub args: Vec<Column>,
}

impl ActionSignature {
    pub fn new(name: impl Into<String>, args: &[(&str, ColumnType)]) -> Self {
        ActionSignature {
            name: name.into(),
            args: args.iter().map(|(n, t)| Column::new(*n, *t)).collect(),
        }
    }

    /// `⟨action: String, arg1: τ1, ...⟩`
    pub fn schema(&self) -> Result<Schema, TableError> {
        let mut cols = vec![Column::new("action", ColumnType::Str)];
        cols.extend(self.args.iter().cloned());
        Schema::new(cols)
    }

    /// Reads a signature back from an action table schema; the action name
    /// is supplied separately since it lives in the rows.
    pub fn from_schema(name: impl Into<String>, schema: &Schema) -> Option<Self> {
        let (first, rest) = schema.columns().split_first()?;
        (first.ty == ColumnType::Str).then(|| ActionSignature {
            name: name.into(),
            args: rest.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Program {
    pub transforms: Vec<TransformStmt>,
    pub mappings: Vec<MappingStmt>,
}

impl Program {
    /// Number of statements.
    pub fn len(&self) -> usize {
        self.transforms.len() + self.mappings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
