//! Application domains (entity schemas and action signatures) and the
//! benchmark file format.

mod benchmark;

pub use benchmark::{
    check_overfit, load_benchmark, load_benchmark_dir, parse_benchmark, BenchmarkCase,
    BenchmarkFile, DomainError, Overfit,
};

use serde::{Deserialize, Serialize};

use crate::dsl::ActionSignature;
use crate::table::{ColumnType, Schema};

/// Declared type of an entity field. Spreadsheet cells hold either text or
/// numbers; a concrete table picks one of the two per column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    Exact(ColumnType),
    StrOrInt,
}

impl FieldType {
    pub fn admits(self, ty: ColumnType) -> bool {
        match self {
            FieldType::Exact(t) => t == ty,
            FieldType::StrOrInt => matches!(ty, ColumnType::Str | ColumnType::Int),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: FieldType,
}

/// The row shape of one kind of entity. With `extra` set, any number of
/// further columns named `<prefix>1`, `<prefix>2`, ... of that type follow
/// the fixed fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySchema {
    pub name: String,
    pub fields: Vec<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<(String, FieldType)>,
}

impl EntitySchema {
    fn new(name: &str, fields: &[(&str, FieldType)]) -> Self {
        EntitySchema {
            name: name.into(),
            fields: fields
                .iter()
                .map(|(n, t)| Field {
                    name: n.to_string(),
                    ty: *t,
                })
                .collect(),
            extra: None,
        }
    }

    /// Whether a concrete table schema instantiates this entity.
    pub fn conforms(&self, s: &Schema) -> bool {
        let cols = s.columns();
        if cols.len() < self.fields.len() {
            return false;
        }
        let fixed = self
            .fields
            .iter()
            .zip(cols)
            .all(|(f, c)| f.name == c.name && f.ty.admits(c.ty));
        let rest = &cols[self.fields.len()..];
        match &self.extra {
            None => fixed && rest.is_empty(),
            Some((prefix, ty)) => {
                fixed
                    && rest
                        .iter()
                        .enumerate()
                        .all(|(i, c)| c.name == format!("{prefix}{}", i + 1) && ty.admits(c.ty))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub entity_schemas: Vec<EntitySchema>,
    pub actions: Vec<ActionSignature>,
}

impl DomainSpec {
    pub fn action(&self, name: &str) -> Option<&ActionSignature> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn entity_for(&self, s: &Schema) -> Option<&EntitySchema> {
        self.entity_schemas.iter().find(|e| e.conforms(s))
    }
}

const ID: FieldType = FieldType::Exact(ColumnType::Id);
const INT: FieldType = FieldType::Exact(ColumnType::Int);
const STR: FieldType = FieldType::Exact(ColumnType::Str);

/// File management. Booleans are stored as Int 0/1 and the modification
/// time as Int epoch seconds.
pub fn file_domain() -> DomainSpec {
    let file = EntitySchema::new(
        "file",
        &[
            ("id", ID),
            ("basename", STR),
            ("extension", STR),
            ("path", STR),
            ("size", INT),
            ("modification_time", INT),
            ("readable", INT),
            ("writable", INT),
            ("executable", INT),
            ("group", STR),
            ("year", INT),
            ("month", INT),
            ("day", INT),
            ("year_s", STR),
            ("month_s", STR),
            ("day_s", STR),
        ],
    );
    use ColumnType::{Id, Str};
    let id_str = |name: &str, arg: &str| ActionSignature::new(name, &[("id", Id), (arg, Str)]);
    DomainSpec {
        name: "file".into(),
        entity_schemas: vec![file],
        actions: vec![
            id_str("chmod", "mod"),
            id_str("copy", "path"),
            id_str("unzip", "path"),
            id_str("move", "path"),
            id_str("rename", "name"),
            ActionSignature::new("delete", &[("id", Id)]),
            id_str("chgrp", "group"),
            id_str("chext", "extension"),
            id_str("tar", "name"),
        ],
    }
}

/// Spreadsheets, as one row per cell and as the plain grid.
pub fn spreadsheet_domain() -> DomainSpec {
    let cell = EntitySchema::new(
        "cell",
        &[
            ("id", ID),
            ("row", INT),
            ("col", INT),
            ("row_head", FieldType::StrOrInt),
            ("col_head", FieldType::StrOrInt),
            ("content", FieldType::StrOrInt),
            ("read_ord", INT),
        ],
    );
    let mut tabular = EntitySchema::new("tabular", &[("row", INT)]);
    tabular.extra = Some(("col".into(), FieldType::StrOrInt));
    DomainSpec {
        name: "spreadsheet".into(),
        entity_schemas: vec![cell, tabular],
        actions: vec![ActionSignature::new(
            "fill",
            &[
                ("content", ColumnType::Str),
                ("row", ColumnType::Int),
                ("col", ColumnType::Int),
            ],
        )],
    }
}

/// XML elements and attributes. Missing parent or sibling links point to a
/// designated null id.
pub fn xml_domain() -> DomainSpec {
    let element = EntitySchema::new(
        "element",
        &[
            ("id", ID),
            ("tag", STR),
            ("text", STR),
            ("parent", ID),
            ("previous", ID),
            ("next", ID),
        ],
    );
    let attribute = EntitySchema::new(
        "attribute",
        &[("id", ID), ("element", ID), ("key", STR), ("value", STR)],
    );
    use ColumnType::{Id, Str};
    DomainSpec {
        name: "xml".into(),
        entity_schemas: vec![element, attribute],
        actions: vec![
            ActionSignature::new("delete_element", &[("element", Id)]),
            ActionSignature::new("modify_text", &[("element", Id), ("text", Str)]),
            ActionSignature::new("modify_attribute", &[("element", Id), ("value", Str)]),
            ActionSignature::new("modify_tag", &[("element", Id), ("tag", Str)]),
            ActionSignature::new(
                "add_element",
                &[("parent", Id), ("tag", Str), ("text", Str)],
            ),
            ActionSignature::new(
                "add_element_above",
                &[("element", Id), ("tag", Str), ("text", Str)],
            ),
            ActionSignature::new(
                "add_attribute",
                &[("element", Id), ("key", Str), ("value", Str)],
            ),
            ActionSignature::new("wrap", &[("element", Id), ("tag", Str)]),
            ActionSignature::new("move_below", &[("element", Id), ("target", Id)]),
            ActionSignature::new("append_child", &[("element", Id), ("target", Id)]),
        ],
    }
}

pub fn builtin_domains() -> Vec<DomainSpec> {
    vec![file_domain(), spreadsheet_domain(), xml_domain()]
}

pub fn builtin_domain(name: &str) -> Option<DomainSpec> {
    builtin_domains().into_iter().find(|d| d.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_domain_fields_and_actions() {
        let d = file_domain();
        assert_eq!(d.entity_schemas[0].fields.len(), 16);
        assert_eq!(d.actions.len(), 9);
        assert!(d.action("tar").is_some() && d.action("chgrp").is_some());
        let chmod = d.action("chmod").unwrap();
        assert_eq!(chmod.args[1].name, "mod");
        assert_eq!(chmod.args[1].ty, ColumnType::Str);
    }

    #[test]
    fn spreadsheet_has_only_fill() {
        let d = spreadsheet_domain();
        let names: Vec<&str> = d.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, vec!["fill"]);
        let fill = &d.actions[0];
        let args: Vec<(&str, ColumnType)> =
            fill.args.iter().map(|c| (c.name.as_str(), c.ty)).collect();
        assert_eq!(
            args,
            vec![
                ("content", ColumnType::Str),
                ("row", ColumnType::Int),
                ("col", ColumnType::Int)
            ]
        );
    }

    #[test]
    fn xml_element_links() {
        let d = xml_domain();
        let el = &d.entity_schemas[0];
        for f in ["parent", "previous", "next"] {
            assert!(el.fields.iter().any(|x| x.name == f && x.ty == ID));
        }
        assert_eq!(d.actions.len(), 10);
        let wrap = d.action("wrap").unwrap();
        assert_eq!(wrap.args[0].name, "element");
        assert_eq!(wrap.args[1].name, "tag");
    }

    #[test]
    fn builtins_round_trip() {
        for d in builtin_domains() {
            let s = serde_json::to_string(&d).unwrap();
            assert_eq!(serde_json::from_str::<DomainSpec>(&s).unwrap(), d);
            for a in &d.actions {
                a.schema().unwrap();
            }
        }
    }

    #[test]
    fn tabular_conformance() {
        let d = spreadsheet_domain();
        let ok = Schema::of(&[
            ("row", ColumnType::Int),
            ("col1", ColumnType::Str),
            ("col2", ColumnType::Int),
        ])
        .unwrap();
        assert_eq!(d.entity_for(&ok).unwrap().name, "tabular");
        let skipped = Schema::of(&[("row", ColumnType::Int), ("col2", ColumnType::Int)]).unwrap();
        assert!(d.entity_for(&skipped).is_none());
        let id_cell = Schema::of(&[("row", ColumnType::Int), ("col1", ColumnType::Id)]).unwrap();
        assert!(d.entity_for(&id_cell).is_none());
    }
}
