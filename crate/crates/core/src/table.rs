//! Typed values, schemas and set-semantics tables.
//!
//! A [`Table`] is an unordered set of typed rows. Rows are kept sorted in a
//! canonical total order and deduplicated on construction, so iteration,
//! hashing and printing are deterministic and two tables holding the same set
//! of rows compare equal regardless of how they were built.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row index {index} out of range for table with {len} rows")]
    RowOutOfRange { index: usize, len: usize },
    #[error("projection needs at least one column")]
    EmptyProjection,
    #[error("table must have at least one column")]
    NoColumns,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{column}` expects {expected}, found {found}")]
    TypeMismatch {
        column: String,
        expected: ColumnType,
        found: ColumnType,
    },
    #[error("row has {found} cells, schema has {expected} columns")]
    ArityMismatch { expected: usize, found: usize },
    #[error("column has {found} values, table has {expected} rows")]
    LengthMismatch { expected: usize, found: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

/// Column type tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ColumnType {
    Int,
    #[serde(rename = "String", alias = "Str")]
    Str,
    Id,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Int => "Int",
            ColumnType::Str => "String",
            ColumnType::Id => "Id",
        })
    }
}

/// A single cell value.
///
/// The derived ordering (variant first, then payload) is the canonical cell
/// order; `Id` labels compare lexicographically. It is used only to
/// canonicalize tables and never reaches DSL predicates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Str(Arc<str>),
    Id(Arc<str>),
}

impl Value {
    pub fn str(s: impl AsRef<str>) -> Self {
        Value::Str(Arc::from(s.as_ref()))
    }

    pub fn id(label: impl AsRef<str>) -> Self {
        Value::Id(Arc::from(label.as_ref()))
    }

    pub fn ty(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Int,
            Value::Str(_) => ColumnType::Str,
            Value::Id(_) => ColumnType::Id,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::str(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{}", crate::text::quote(s)),
            Value::Id(s) => {
                if crate::text::is_ident(s) {
                    write!(f, "@{s}")
                } else {
                    write!(f, "@{}", crate::text::quote(s))
                }
            }
        }
    }
}

// JSON encoding: Int -> number, Str -> string, Id -> {"id": label}.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Int(i64),
    Str(String),
    Id { id: String },
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(v) => ValueRepr::Int(*v),
            Value::Str(v) => ValueRepr::Str(v.to_string()),
            Value::Id(v) => ValueRepr::Id { id: v.to_string() },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match ValueRepr::deserialize(d)? {
            ValueRepr::Int(v) => Value::Int(v),
            ValueRepr::Str(v) => Value::str(v),
            ValueRepr::Id { id } => Value::id(id),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// Ordered list of uniquely named, typed columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self, TableError> {
        if columns.is_empty() {
            return Err(TableError::NoColumns);
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(Schema { columns })
    }

    /// Convenience constructor from `(name, type)` pairs.
    pub fn of(cols: &[(&str, ColumnType)]) -> Result<Self, TableError> {
        Schema::new(cols.iter().map(|(n, t)| Column::new(*n, *t)).collect())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column, TableError> {
        self.index_of(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn type_of(&self, name: &str) -> Option<ColumnType> {
        self.index_of(name).map(|i| self.columns[i].ty)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn types(&self) -> Vec<ColumnType> {
        self.columns.iter().map(|c| c.ty).collect()
    }

    /// Returns a schema with `col` appended.
    pub fn with_column(&self, col: Column) -> Result<Schema, TableError> {
        if self.index_of(&col.name).is_some() {
            return Err(TableError::DuplicateColumn(col.name));
        }
        let mut columns = self.columns.clone();
        columns.push(col);
        Ok(Schema { columns })
    }

    /// A name derived from `base` that does not clash with any column here:
    /// `base`, then `base_2`, `base_3`, ...
    pub fn fresh_name(&self, base: &str) -> String {
        if self.index_of(base).is_none() {
            return base.to_string();
        }
        (2..)
            .map(|i| format!("{base}_{i}"))
            .find(|n| self.index_of(n).is_none())
            .expect("unbounded suffix search")
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let columns = Vec::<Column>::deserialize(d)?;
        Schema::new(columns).map_err(serde::de::Error::custom)
    }
}

pub type Row = Vec<Value>;

/// A named, schema-typed set of rows held in canonical order.
///
/// Equality and hashing consider only schema and rows; the name is a label.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    schema: Schema,
    rows: Vec<Row>,
}

impl PartialEq for Table {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.rows == other.rows
    }
}

impl Eq for Table {}

impl Hash for Table {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.schema.hash(state);
        self.rows.hash(state);
    }
}

impl Table {
    /// Builds a table, type-checking every cell, sorting rows canonically and
    /// dropping duplicates.
    pub fn new(
        name: impl Into<String>,
        schema: Schema,
        rows: impl IntoIterator<Item = Row>,
    ) -> Result<Self, TableError> {
        let mut rows: Vec<Row> = rows.into_iter().collect();
        for row in &rows {
            check_row(&schema, row)?;
        }
        rows.sort_unstable();
        rows.dedup();
        Ok(Table {
            name: name.into(),
            schema,
            rows,
        })
    }

    // Rows already checked against `schema`.
    pub(crate) fn from_checked(name: String, schema: Schema, mut rows: Vec<Row>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Table { name, schema, rows }
    }

    pub fn empty(name: impl Into<String>, schema: Schema) -> Self {
        Table {
            name: name.into(),
            schema,
            rows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Rows in canonical order.
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Replaces the column names, keeping types and rows.
    pub fn with_column_names(self, names: &[String]) -> Result<Self, TableError> {
        if names.len() != self.schema.len() {
            return Err(TableError::ArityMismatch {
                expected: self.schema.len(),
                found: names.len(),
            });
        }
        let schema = Schema::new(
            names
                .iter()
                .zip(self.schema.columns())
                .map(|(n, c)| Column::new(n.clone(), c.ty))
                .collect(),
        )?;
        Ok(Table {
            name: self.name,
            schema,
            rows: self.rows,
        })
    }

    /// Position of a row (by value) in canonical order.
    pub fn position(&self, row: &[Value]) -> Option<usize> {
        self.rows.binary_search_by(|r| r.as_slice().cmp(row)).ok()
    }

    /// Cell at canonical row index `row`, column `col`.
    pub fn fetch(&self, row: usize, col: &str) -> Result<&Value, TableError> {
        let c = self
            .schema
            .index_of(col)
            .ok_or_else(|| TableError::UnknownColumn(col.to_string()))?;
        self.rows
            .get(row)
            .map(|r| &r[c])
            .ok_or(TableError::RowOutOfRange {
                index: row,
                len: self.rows.len(),
            })
    }

    /// All values of one column in canonical row order.
    pub fn column_values(&self, col: &str) -> Result<Vec<Value>, TableError> {
        let c = self
            .schema
            .index_of(col)
            .ok_or_else(|| TableError::UnknownColumn(col.to_string()))?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }

    /// Keeps only `cols` (in the given order) and deduplicates the images.
    pub fn project(&self, cols: &[&str]) -> Result<Table, TableError> {
        if cols.is_empty() {
            return Err(TableError::EmptyProjection);
        }
        let idx = cols
            .iter()
            .map(|c| {
                self.schema
                    .index_of(c)
                    .ok_or_else(|| TableError::UnknownColumn(c.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let schema = Schema::new(
            idx.iter()
                .map(|&i| self.schema.columns[i].clone())
                .collect(),
        )?;
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(Table::from_checked(self.name.clone(), schema, rows))
    }

    /// Appends a column whose values line up with the canonical row order.
    /// Rows never merge: the originals were already distinct.
    pub fn append_column(
        &self,
        name: &str,
        ty: ColumnType,
        vals: Vec<Value>,
    ) -> Result<Table, TableError> {
        if vals.len() != self.rows.len() {
            return Err(TableError::LengthMismatch {
                expected: self.rows.len(),
                found: vals.len(),
            });
        }
        if let Some(bad) = vals.iter().find(|v| v.ty() != ty) {
            return Err(TableError::TypeMismatch {
                column: name.to_string(),
                expected: ty,
                found: bad.ty(),
            });
        }
        let schema = self.schema.with_column(Column::new(name, ty))?;
        let rows = self
            .rows
            .iter()
            .zip(vals)
            .map(|(r, v)| {
                let mut r = r.clone();
                r.push(v);
                r
            })
            .collect();
        // Sorting is a no-op here (distinct prefixes keep their order) but
        // from_checked keeps the invariant obvious.
        Ok(Table::from_checked(self.name.clone(), schema, rows))
    }

    /// Set union of two tables with identical schemas.
    pub fn union(&self, other: &Table) -> Result<Table, TableError> {
        if self.schema != other.schema {
            return Err(TableError::SchemaMismatch(format!(
                "cannot union `{}` and `{}`",
                self.name, other.name
            )));
        }
        let mut rows = Vec::with_capacity(self.rows.len() + other.rows.len());
        rows.extend(self.rows.iter().cloned());
        rows.extend(other.rows.iter().cloned());
        Ok(Table::from_checked(
            self.name.clone(),
            self.schema.clone(),
            rows,
        ))
    }

    /// Subset of rows selected by canonical index.
    pub fn select_rows(&self, idx: impl IntoIterator<Item = usize>) -> Table {
        let rows = idx.into_iter().map(|i| self.rows[i].clone()).collect();
        Table::from_checked(self.name.clone(), self.schema.clone(), rows)
    }

    /// Re-checks every cell against the schema.
    pub fn check(&self) -> Result<(), TableError> {
        for r in &self.rows {
            check_row(&self.schema, r)?;
        }
        let sorted = self
            .rows
            .windows(2)
            .all(|w| w[0].cmp(&w[1]) == Ordering::Less);
        if !sorted {
            return Err(TableError::SchemaMismatch(
                "rows not in canonical order".into(),
            ));
        }
        Ok(())
    }
}

fn check_row(schema: &Schema, row: &[Value]) -> Result<(), TableError> {
    if row.len() != schema.len() {
        return Err(TableError::ArityMismatch {
            expected: schema.len(),
            found: row.len(),
        });
    }
    for (v, c) in row.iter().zip(schema.columns()) {
        if v.ty() != c.ty {
            return Err(TableError::TypeMismatch {
                column: c.name.clone(),
                expected: c.ty,
                found: v.ty(),
            });
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    name: String,
    columns: Vec<Column>,
    rows: Vec<Vec<Value>>,
}

impl Serialize for Table {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TableRepr {
            name: self.name.clone(),
            columns: self.schema.columns.clone(),
            rows: self.rows.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Table {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TableRepr::deserialize(d)?;
        let schema = Schema::new(repr.columns).map_err(serde::de::Error::custom)?;
        let name = repr.name.clone();
        Table::new(repr.name, schema, repr.rows)
            .map_err(|e| serde::de::Error::custom(format!("table `{name}`: {e}")))
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect())
            .collect();
        let widths: Vec<usize> = self
            .schema
            .columns()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                cells
                    .iter()
                    .map(|r| r[i].chars().count())
                    .chain(std::iter::once(c.name.chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        writeln!(f, "{}:", self.name)?;
        let header: Vec<String> = self
            .schema
            .columns()
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{:<w$}", c.name, w = *w))
            .collect();
        writeln!(f, "| {} |", header.join(" | "))?;
        for r in &cells {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:<w$}", w = *w))
                .collect();
            writeln!(f, "| {} |", line.join(" | "))?;
        }
        Ok(())
    }
}
