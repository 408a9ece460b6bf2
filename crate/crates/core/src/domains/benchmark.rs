//! Benchmark cases: example inputs and output, held-out pending inputs with
//! their expected output, and optionally a reference program.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::builtin_domain;
use crate::dsl::{
    exec_program, input_schemas, parse_program, validate_program, ActionSignature, Program,
};
use crate::synth::SynthTask;
use crate::table::{Row, Table, Value};

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema mismatch in table `{table}`: {detail}")]
    SchemaMismatch { table: String, detail: String },
    #[error("domain `{domain}` has no action `{action}`")]
    UnknownAction { domain: String, action: String },
    #[error("invalid benchmark: {0}")]
    Invalid(String),
}

/// On-disk JSON form of a benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    pub id: String,
    pub domain: String,
    #[serde(default)]
    pub description: String,
    pub inputs: Vec<Table>,
    pub output: Table,
    #[serde(default)]
    pub constants: Vec<Value>,
    #[serde(default)]
    pub pending: Vec<Table>,
    pub expected: Table,
    /// Action name; defaults to the one named in the output rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// Required only for domains other than the built-in ones, and even
    /// then defaults to the output schema.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<ActionSignature>,
    /// Cases that must stay solved and consistent.
    #[serde(default)]
    pub regression: bool,
    /// Program text known to solve the case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkCase {
    pub id: String,
    pub domain: String,
    pub description: String,
    pub inputs: Vec<Table>,
    pub output: Table,
    pub constants: Vec<Value>,
    pub pending: Vec<Table>,
    pub expected: Table,
    pub action: ActionSignature,
    pub regression: bool,
    pub reference: Option<Program>,
}

impl BenchmarkCase {
    /// A synthesis task with default settings.
    pub fn task(&self) -> SynthTask {
        SynthTask::new(
            self.inputs.clone(),
            self.output.clone(),
            self.action.clone(),
            self.constants.clone(),
        )
    }

    pub fn to_file(&self) -> BenchmarkFile {
        BenchmarkFile {
            id: self.id.clone(),
            domain: self.domain.clone(),
            description: self.description.clone(),
            inputs: self.inputs.clone(),
            output: self.output.clone(),
            constants: self.constants.clone(),
            pending: self.pending.clone(),
            expected: self.expected.clone(),
            action: Some(self.action.name.clone()),
            signature: builtin_domain(&self.domain)
                .is_none()
                .then(|| self.action.clone()),
            regression: self.regression,
            reference: self.reference.as_ref().map(|p| p.to_string()),
        }
    }
}

pub fn parse_benchmark(src: &str) -> Result<BenchmarkCase, DomainError> {
    let file: BenchmarkFile =
        serde_json::from_str(src).map_err(|e| DomainError::Parse(e.to_string()))?;
    BenchmarkCase::try_from(file)
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<BenchmarkCase, DomainError> {
    let path = path.as_ref();
    let src = fs::read_to_string(path).map_err(|source| DomainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_benchmark(&src)
}

/// Every `*.json` file below `dir`, sorted by path, each with its own load
/// result so one bad file does not hide the rest.
pub fn load_benchmark_dir(
    dir: impl AsRef<Path>,
) -> Result<Vec<(PathBuf, Result<BenchmarkCase, DomainError>)>, DomainError> {
    let mut files = Vec::new();
    collect_json(dir.as_ref(), &mut files)?;
    files.sort();
    Ok(files
        .into_iter()
        .map(|p| {
            let case = load_benchmark(&p);
            (p, case)
        })
        .collect())
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), DomainError> {
    let io = |source| DomainError::Io {
        path: dir.to_path_buf(),
        source,
    };
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

fn mismatch(table: &str, detail: impl Into<String>) -> DomainError {
    DomainError::SchemaMismatch {
        table: table.to_string(),
        detail: detail.into(),
    }
}

fn action_name(file: &BenchmarkFile) -> Result<String, DomainError> {
    if let Some(a) = &file.action {
        return Ok(a.clone());
    }
    let mut names = file
        .output
        .rows()
        .iter()
        .chain(file.expected.rows())
        .map(|r| r.first().and_then(Value::as_str));
    match names.next() {
        Some(Some(n)) => Ok(n.to_string()),
        _ => Err(DomainError::Invalid(
            "cannot tell the action: no `action` field and no output rows".into(),
        )),
    }
}

impl TryFrom<BenchmarkFile> for BenchmarkCase {
    type Error = DomainError;

    fn try_from(file: BenchmarkFile) -> Result<Self, DomainError> {
        if file.inputs.is_empty() {
            return Err(DomainError::Invalid("no input tables".into()));
        }
        for (i, t) in file.inputs.iter().enumerate() {
            if file.inputs[..i].iter().any(|u| u.name() == t.name()) {
                return Err(DomainError::Invalid(format!(
                    "duplicate input table `{}`",
                    t.name()
                )));
            }
        }
        if !file.pending.is_empty() {
            if file.pending.len() != file.inputs.len() {
                return Err(mismatch(
                    "pending",
                    format!(
                        "{} pending tables for {} inputs",
                        file.pending.len(),
                        file.inputs.len()
                    ),
                ));
            }
            for (p, t) in file.pending.iter().zip(&file.inputs) {
                if p.name() != t.name() {
                    return Err(mismatch(
                        p.name(),
                        format!("pending table stands in for `{}`", t.name()),
                    ));
                }
                if p.schema() != t.schema() {
                    return Err(mismatch(
                        p.name(),
                        "pending schema differs from the input schema",
                    ));
                }
            }
        }

        let name = action_name(&file)?;
        let action = match builtin_domain(&file.domain) {
            Some(d) => {
                for t in &file.inputs {
                    if d.entity_for(t.schema()).is_none() {
                        return Err(mismatch(
                            t.name(),
                            format!("not an entity of domain `{}`", d.name),
                        ));
                    }
                }
                let a = d
                    .action(&name)
                    .cloned()
                    .ok_or_else(|| DomainError::UnknownAction {
                        domain: d.name.clone(),
                        action: name.clone(),
                    })?;
                if file.signature.as_ref().is_some_and(|s| *s != a) {
                    return Err(mismatch("output", "signature differs from the domain's"));
                }
                a
            }
            None => match &file.signature {
                Some(s) if s.name == name => s.clone(),
                Some(s) => {
                    return Err(DomainError::Invalid(format!(
                        "signature names `{}`, rows name `{name}`",
                        s.name
                    )))
                }
                None => ActionSignature::from_schema(name, file.output.schema())
                    .ok_or_else(|| mismatch("output", "first column must be String"))?,
            },
        };

        let schema = action
            .schema()
            .map_err(|e| DomainError::Invalid(e.to_string()))?;
        for (label, t) in [("output", &file.output), ("expected", &file.expected)] {
            if *t.schema() != schema {
                return Err(mismatch(
                    label,
                    format!("does not match action `{}`", action.name),
                ));
            }
            if let Some(r) = t
                .rows()
                .iter()
                .find(|r| r[0].as_str() != Some(&action.name))
            {
                return Err(DomainError::Invalid(format!(
                    "{label} row names action {} instead of `{}`",
                    r[0], action.name
                )));
            }
        }

        let reference = match &file.reference {
            None => None,
            Some(src) => {
                let p = parse_program(src)
                    .map_err(|e| DomainError::Parse(format!("reference: {e}")))?;
                validate_program(&p, &input_schemas(&file.inputs), &action).map_err(|vs| {
                    DomainError::Invalid(format!(
                        "reference: {}",
                        vs.iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join("; ")
                    ))
                })?;
                Some(p)
            }
        };

        Ok(BenchmarkCase {
            id: file.id,
            domain: file.domain,
            description: file.description,
            inputs: file.inputs,
            output: file.output.renamed("out"),
            constants: file.constants,
            pending: file.pending,
            expected: file.expected.renamed("out"),
            action,
            regression: file.regression,
            reference,
        })
    }
}

/// Result of running a program on a case's pending inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Overfit {
    Consistent,
    Overfit {
        /// Expected rows the program did not produce.
        missing: Vec<Row>,
        /// Produced rows that were not expected.
        unexpected: Vec<Row>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
}

impl Overfit {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Overfit::Consistent)
    }
}

impl fmt::Display for Overfit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Overfit::Consistent => f.write_str("consistent"),
            Overfit::Overfit { error: Some(e), .. } => {
                write!(f, "overfit: failed on pending data: {e}")
            }
            Overfit::Overfit {
                missing,
                unexpected,
                ..
            } => {
                write!(f, "overfit:")?;
                let show = |r: &Row| {
                    r.iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                for r in missing {
                    write!(f, "\n  - ({})", show(r))?;
                }
                for r in unexpected {
                    write!(f, "\n  + ({})", show(r))?;
                }
                Ok(())
            }
        }
    }
}

/// Runs `p` on the pending inputs and compares with the expected output.
/// Cases without pending inputs are trivially consistent.
pub fn check_overfit(case: &BenchmarkCase, p: &Program) -> Overfit {
    if case.pending.is_empty() {
        return Overfit::Consistent;
    }
    let got = match exec_program(p, &case.pending, &case.action) {
        Ok(t) => t,
        Err(e) => {
            return Overfit::Overfit {
                missing: case.expected.rows().to_vec(),
                unexpected: vec![],
                error: Some(e.to_string()),
            }
        }
    };
    if got == case.expected {
        return Overfit::Consistent;
    }
    let missing = case
        .expected
        .rows()
        .iter()
        .filter(|r| got.position(r).is_none())
        .cloned()
        .collect();
    let unexpected = got
        .rows()
        .iter()
        .filter(|r| case.expected.position(r).is_none())
        .cloned()
        .collect();
    Overfit::Overfit {
        missing,
        unexpected,
        error: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{MappingStmt, Projection};
    use crate::synthetic::{frames_table, linear_split_output, shift_signature};

    const ODD_EVEN: &str = "u = Filter(ti, isOdd(frame));\nv = Filter(ti, isEven(frame));\n\
        Yield(\"shift\", u, id, \"GB\", linear(-5,-25)(frame), linear(-5,-25)(frame));\n\
        Yield(\"shift\", v, id, \"GB\", linear(5,20)(frame), linear(5,20)(frame));";

    fn running_file() -> BenchmarkFile {
        BenchmarkFile {
            id: "running".into(),
            domain: "image".into(),
            description: String::new(),
            inputs: vec![frames_table(1..=4)],
            output: linear_split_output(1..=4),
            constants: vec![],
            pending: vec![frames_table(5..=8)],
            expected: linear_split_output(5..=8),
            action: None,
            signature: None,
            regression: true,
            reference: Some(ODD_EVEN.into()),
        }
    }

    fn running() -> BenchmarkCase {
        BenchmarkCase::try_from(running_file()).unwrap()
    }

    #[test]
    fn running_example_loads() {
        let c = running();
        assert_eq!(c.action, shift_signature());
        let bx: Vec<i64> = c
            .expected
            .rows()
            .iter()
            .map(|r| r[3].as_int().unwrap())
            .collect();
        assert_eq!(bx, vec![-50, 50, -60, 60]);
        let json = serde_json::to_string(&c.to_file()).unwrap();
        assert_eq!(parse_benchmark(&json).unwrap(), c);
    }

    #[test]
    fn malformed_type_tag() {
        let json =
            serde_json::to_string(&running_file())
                .unwrap()
                .replacen("\"Int\"", "\"Integer\"", 1);
        assert!(matches!(parse_benchmark(&json), Err(DomainError::Parse(_))));
    }

    #[test]
    fn reordered_pending_columns() {
        let mut f = running_file();
        let p = &f.pending[0];
        f.pending[0] = p.project(&["frame", "file", "id"]).unwrap().renamed("ti");
        match BenchmarkCase::try_from(f) {
            Err(DomainError::SchemaMismatch { table, .. }) => assert_eq!(table, "ti"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reference_is_consistent() {
        let c = running();
        assert_eq!(
            check_overfit(&c, c.reference.as_ref().unwrap()),
            Overfit::Consistent
        );
    }

    #[test]
    fn per_row_constants_overfit() {
        let c = running();
        // one constant Yield per example row: reproduces t^o, nothing else
        let mut p = Program::default();
        for (i, r) in c.output.rows().iter().enumerate() {
            p.transforms.push(crate::dsl::TransformStmt {
                target: format!("r{i}"),
                op: crate::dsl::TransformOp::Filter {
                    src: "ti".into(),
                    pred: crate::dsl::Atom::with_const(
                        crate::dsl::PredSymbol::IntEq,
                        "frame",
                        Value::Int(i as i64 + 1),
                    )
                    .into(),
                },
            });
            p.mappings.push(MappingStmt::new(
                "shift",
                format!("r{i}"),
                vec![
                    Projection::Col("id".into()),
                    Projection::Const(r[2].clone()),
                    Projection::Const(r[3].clone()),
                    Projection::Const(r[4].clone()),
                ],
            ));
        }
        assert_eq!(exec_program(&p, &c.inputs, &c.action).unwrap(), c.output);
        match check_overfit(&c, &p) {
            Overfit::Overfit {
                missing,
                unexpected,
                error,
            } => {
                assert_eq!(missing.len(), 4);
                assert!(unexpected.is_empty());
                assert!(error.is_none());
            }
            Overfit::Consistent => panic!("should overfit"),
        }
    }

    #[test]
    fn empty_pending_is_consistent() {
        let mut f = running_file();
        f.pending.clear();
        let c = BenchmarkCase::try_from(f).unwrap();
        assert!(check_overfit(&c, &Program::default()).is_consistent());
    }

    #[test]
    fn unknown_action_in_builtin_domain() {
        let mut f = running_file();
        f.domain = "file".into();
        assert!(matches!(
            BenchmarkCase::try_from(f),
            Err(DomainError::SchemaMismatch { .. })
        ));
    }
}
