//! Typed model of a GraphQL schema as returned by the standard introspection
//! query, plus parsing and (re)serialization.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use thiserror::Error;

/// Maximum `ofType` nesting accepted when unwrapping type wrappers. Matches
/// the nesting depth requested by [`INTROSPECTION_QUERY`].
pub const MAX_WRAPPER_DEPTH: usize = 7;

/// The full introspection query sent to a target, with `ofType` nested to
/// depth 7.
pub const INTROSPECTION_QUERY: &str = r#"query IntrospectionQuery {
  __schema {
    queryType { name }
    mutationType { name }
    types {
      kind
      name
      fields(includeDeprecated: true) {
        name
        description
        args {
          name
          description
          defaultValue
          type { ...TypeRef }
        }
        type { ...TypeRef }
        isDeprecated
      }
      inputFields {
        name
        description
        defaultValue
        type { ...TypeRef }
      }
      enumValues(includeDeprecated: true) { name }
      possibleTypes { name }
      interfaces { name }
    }
  }
}
fragment TypeRef on __Type {
  kind
  name
  ofType {
    kind
    name
    ofType {
      kind
      name
      ofType {
        kind
        name
        ofType {
          kind
          name
          ofType {
            kind
            name
            ofType {
              kind
              name
              ofType { kind name }
            }
          }
        }
      }
    }
  }
}"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TypeKind {
    Scalar,
    Object,
    Enum,
    InputObject,
    Interface,
    Union,
    List,
    NonNull,
}

impl TypeKind {
    pub fn is_wrapper(self) -> bool {
        matches!(self, TypeKind::List | TypeKind::NonNull)
    }
}

/// An introspection type reference: a chain of NON_NULL/LIST wrappers ending
/// in a named type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeRef {
    pub kind: TypeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "ofType", default, skip_serializing_if = "Option::is_none")]
    pub of_type: Option<Box<TypeRef>>,
}

impl TypeRef {
    pub fn named(kind: TypeKind, name: &str) -> Self {
        TypeRef { kind, name: Some(name.to_string()), of_type: None }
    }

    pub fn non_null(inner: TypeRef) -> Self {
        TypeRef { kind: TypeKind::NonNull, name: None, of_type: Some(Box::new(inner)) }
    }

    pub fn list(inner: TypeRef) -> Self {
        TypeRef { kind: TypeKind::List, name: None, of_type: Some(Box::new(inner)) }
    }

    /// True when the outermost wrapper is NON_NULL. Drives hard-dependency
    /// classification.
    pub fn is_outer_non_null(&self) -> bool {
        self.kind == TypeKind::NonNull
    }

    /// Strips all NON_NULL/LIST wrappers and returns the underlying named
    /// type. Wrapper chains are bounded by construction (see `validate`).
    pub fn unwrap_named(&self) -> (&TypeKind, &str) {
        let mut cur = self;
        for _ in 0..=MAX_WRAPPER_DEPTH {
            if cur.kind.is_wrapper() {
                cur = cur.of_type.as_deref().expect("wrapper without ofType");
            } else {
                return (&cur.kind, cur.name.as_deref().unwrap_or(""));
            }
        }
        panic!("wrapper chain exceeds depth bound");
    }

    /// True when any wrapper in the chain is LIST.
    pub fn contains_list(&self) -> bool {
        let mut cur = self;
        loop {
            if cur.kind == TypeKind::List {
                return true;
            }
            match cur.of_type.as_deref() {
                Some(inner) => cur = inner,
                None => return false,
            }
        }
    }

    /// Renders the type in SDL notation, e.g. `[String!]!`, for variable
    /// definitions.
    pub fn render_sdl(&self) -> String {
        match self.kind {
            TypeKind::NonNull => format!("{}!", self.of_type.as_ref().unwrap().render_sdl()),
            TypeKind::List => format!("[{}]", self.of_type.as_ref().unwrap().render_sdl()),
            _ => self.name.clone().unwrap_or_default(),
        }
    }

    fn validate(&self, path: &str) -> Result<(), SchemaError> {
        let mut cur = self;
        let mut depth = 0usize;
        loop {
            if cur.kind.is_wrapper() {
                if cur.name.is_some() || cur.of_type.is_none() {
                    return Err(SchemaError::Malformed {
                        path: path.to_string(),
                        message: "wrapper type must have ofType and no name".into(),
                    });
                }
                let inner = cur.of_type.as_deref().unwrap();
                if cur.kind == TypeKind::NonNull && inner.kind == TypeKind::NonNull {
                    return Err(SchemaError::Malformed {
                        path: path.to_string(),
                        message: "NON_NULL directly wraps NON_NULL".into(),
                    });
                }
                depth += 1;
                if depth > MAX_WRAPPER_DEPTH {
                    return Err(SchemaError::Malformed {
                        path: path.to_string(),
                        message: format!("wrapper nesting exceeds {MAX_WRAPPER_DEPTH}"),
                    });
                }
                cur = inner;
            } else {
                if cur.name.is_none() || cur.of_type.is_some() {
                    return Err(SchemaError::Malformed {
                        path: path.to_string(),
                        message: "named type must have a name and no ofType".into(),
                    });
                }
                return Ok(());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: TypeRef,
    #[serde(rename = "defaultValue", default, skip_serializing_if = "Option::is_none")]
    pub default_value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    #[serde(default)]
    pub args: Vec<ArgDef>,
    #[serde(rename = "type")]
    pub ty: TypeRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(rename = "isDeprecated", default)]
    pub is_deprecated: bool,
}

/// The parsed schema: operation fields plus type tables.
///
/// Interfaces are folded into `object_types` with their declared fields;
/// union member resolution is left to payload construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub query_fields: Vec<FieldDef>,
    pub mutation_fields: Vec<FieldDef>,
    pub object_types: IndexMap<String, Vec<FieldDef>>,
    pub scalar_names: BTreeSet<String>,
    pub enum_values: IndexMap<String, Vec<String>>,
    pub input_object_fields: IndexMap<String, Vec<ArgDef>>,
    pub union_members: IndexMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed schema at {path}: {message}")]
    Malformed { path: String, message: String },
}

impl SchemaDocument {
    pub fn object_fields(&self, name: &str) -> Option<&[FieldDef]> {
        self.object_types.get(name).map(|v| v.as_slice())
    }

    /// Case-insensitive object lookup; returns the canonical name.
    pub fn find_object_ci(&self, candidate: &str) -> Option<&str> {
        let lower = candidate.to_lowercase();
        self.object_types
            .keys()
            .find(|k| k.to_lowercase() == lower)
            .map(|s| s.as_str())
    }

    pub fn operation_field(&self, name: &str) -> Option<(&FieldDef, bool)> {
        if let Some(f) = self.query_fields.iter().find(|f| f.name == name) {
            return Some((f, true));
        }
        self.mutation_fields.iter().find(|f| f.name == name).map(|f| (f, false))
    }
}

fn get_str(v: &Value, key: &str) -> Option<String> {
    v.get(key).and_then(Value::as_str).map(str::to_string)
}

fn parse_type_ref(v: &Value, path: &str) -> Result<TypeRef, SchemaError> {
    let tr: TypeRef = serde_json::from_value(v.clone()).map_err(|e| SchemaError::Malformed {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    tr.validate(path)?;
    Ok(tr)
}

fn parse_args(v: &Value, path: &str) -> Result<Vec<ArgDef>, SchemaError> {
    let mut out = Vec::new();
    let Some(items) = v.as_array() else { return Ok(out) };
    for (i, item) in items.iter().enumerate() {
        let p = format!("{path}[{i}]");
        let name = get_str(item, "name").ok_or_else(|| SchemaError::Malformed {
            path: p.clone(),
            message: "argument without a name".into(),
        })?;
        if name.is_empty() {
            return Err(SchemaError::Malformed { path: p, message: "empty argument name".into() });
        }
        let ty = parse_type_ref(
            item.get("type").unwrap_or(&Value::Null),
            &format!("{p}.type"),
        )?;
        out.push(ArgDef {
            name,
            ty,
            default_value: get_str(item, "defaultValue"),
            description: get_str(item, "description"),
        });
    }
    Ok(out)
}

fn parse_fields(v: &Value, path: &str) -> Result<Vec<FieldDef>, SchemaError> {
    let mut out = Vec::new();
    let Some(items) = v.as_array() else { return Ok(out) };
    for (i, item) in items.iter().enumerate() {
        let p = format!("{path}[{i}]");
        let name = get_str(item, "name").ok_or_else(|| SchemaError::Malformed {
            path: p.clone(),
            message: "field without a name".into(),
        })?;
        if name.is_empty() {
            return Err(SchemaError::Malformed { path: p, message: "empty field name".into() });
        }
        let args = parse_args(item.get("args").unwrap_or(&Value::Null), &format!("{p}.args"))?;
        let ty = parse_type_ref(item.get("type").unwrap_or(&Value::Null), &format!("{p}.type"))?;
        out.push(FieldDef {
            name,
            args,
            ty,
            description: get_str(item, "description"),
            is_deprecated: item
                .get("isDeprecated")
                .and_then(Value::as_bool)
                .unwrap_or(false),
        });
    }
    Ok(out)
}

/// Parses a raw introspection result into a [`SchemaDocument`]. Accepts
/// either a full response (`data.__schema`) or a bare `__schema` object.
pub fn parse_schema(raw: &Value) -> Result<SchemaDocument, SchemaError> {
    let schema = raw
        .pointer("/data/__schema")
        .or_else(|| raw.get("__schema"))
        .or_else(|| raw.pointer("/__schema"))
        .ok_or_else(|| SchemaError::Malformed {
            path: "data.__schema".into(),
            message: "missing __schema section".into(),
        })?;

    let query_type = schema
        .pointer("/queryType/name")
        .and_then(Value::as_str)
        .unwrap_or("Query")
        .to_string();
    let mutation_type = schema
        .pointer("/mutationType/name")
        .and_then(Value::as_str)
        .map(str::to_string);

    let mut doc = SchemaDocument::default();
    let types = schema
        .get("types")
        .and_then(Value::as_array)
        .ok_or_else(|| SchemaError::Malformed {
            path: "__schema.types".into(),
            message: "missing types array".into(),
        })?;

    for (i, t) in types.iter().enumerate() {
        let p = format!("__schema.types[{i}]");
        let name = get_str(t, "name").ok_or_else(|| SchemaError::Malformed {
            path: p.clone(),
            message: "type without a name".into(),
        })?;
        if name.starts_with("__") {
            continue;
        }
        let kind: TypeKind = serde_json::from_value(t.get("kind").cloned().unwrap_or(Value::Null))
            .map_err(|e| SchemaError::Malformed { path: p.clone(), message: e.to_string() })?;
        match kind {
            TypeKind::Object | TypeKind::Interface => {
                let fields =
                    parse_fields(t.get("fields").unwrap_or(&Value::Null), &format!("{p}.fields"))?;
                if name == query_type {
                    doc.query_fields = fields;
                } else if Some(&name) == mutation_type.as_ref() {
                    doc.mutation_fields = fields;
                } else {
                    doc.object_types.insert(name, fields);
                }
            }
            TypeKind::Scalar => {
                doc.scalar_names.insert(name);
            }
            TypeKind::Enum => {
                let values = t
                    .get("enumValues")
                    .and_then(Value::as_array)
                    .map(|vs| {
                        vs.iter().filter_map(|v| get_str(v, "name")).collect::<Vec<_>>()
                    })
                    .unwrap_or_default();
                doc.enum_values.insert(name, values);
            }
            TypeKind::InputObject => {
                let fields = parse_args(
                    t.get("inputFields").unwrap_or(&Value::Null),
                    &format!("{p}.inputFields"),
                )?;
                doc.input_object_fields.insert(name, fields);
            }
            TypeKind::Union => {
                let members = t
                    .get("possibleTypes")
                    .and_then(Value::as_array)
                    .map(|vs| {
                        vs.iter().filter_map(|v| get_str(v, "name")).collect::<Vec<_>>()
                    })
                    .unwrap_or_default();
                doc.union_members.insert(name, members);
            }
            TypeKind::List | TypeKind::NonNull => {
                return Err(SchemaError::Malformed {
                    path: p,
                    message: "wrapper kind at top-level type".into(),
                });
            }
        }
    }

    validate_references(&doc)?;
    Ok(doc)
}

/// Every named type reachable from the operation fields must resolve within
/// the document's type tables.
fn validate_references(doc: &SchemaDocument) -> Result<(), SchemaError> {
    let resolves = |name: &str| -> bool {
        doc.object_types.contains_key(name)
            || doc.scalar_names.contains(name)
            || doc.enum_values.contains_key(name)
            || doc.input_object_fields.contains_key(name)
            || doc.union_members.contains_key(name)
            || is_builtin_scalar(name)
    };
    let check = |tr: &TypeRef, path: String| -> Result<(), SchemaError> {
        let (_, name) = tr.unwrap_named();
        if !resolves(name) {
            return Err(SchemaError::Malformed {
                path,
                message: format!("dangling type name {name:?}"),
            });
        }
        Ok(())
    };
    let check_fields = |fields: &[FieldDef], prefix: &str| -> Result<(), SchemaError> {
        for f in fields {
            check(&f.ty, format!("{prefix}.{}.type", f.name))?;
            for a in &f.args {
                check(&a.ty, format!("{prefix}.{}.args.{}", f.name, a.name))?;
            }
        }
        Ok(())
    };
    check_fields(&doc.query_fields, "query")?;
    check_fields(&doc.mutation_fields, "mutation")?;
    for (name, fields) in &doc.object_types {
        check_fields(fields, name)?;
    }
    for (name, args) in &doc.input_object_fields {
        for a in args {
            check(&a.ty, format!("{name}.{}", a.name))?;
        }
    }
    Ok(())
}

pub fn is_builtin_scalar(name: &str) -> bool {
    matches!(name, "Int" | "Float" | "String" | "Boolean" | "ID")
}

fn type_ref_json(tr: &TypeRef) -> Value {
    serde_json::to_value(tr).unwrap()
}

fn args_json(args: &[ArgDef]) -> Value {
    Value::Array(
        args.iter()
            .map(|a| {
                json!({
                    "name": a.name,
                    "description": a.description,
                    "type": type_ref_json(&a.ty),
                    "defaultValue": a.default_value,
                })
            })
            .collect(),
    )
}

fn fields_json(fields: &[FieldDef]) -> Value {
    Value::Array(
        fields.iter()
            .map(|f| {
                json!({
                    "name": f.name,
                    "description": f.description,
                    "args": args_json(&f.args),
                    "type": type_ref_json(&f.ty),
                    "isDeprecated": f.is_deprecated,
                })
            })
            .collect(),
    )
}

/// Re-serializes the document as an introspection response
/// (`{"data": {"__schema": ...}}`), the same format [`parse_schema`] accepts.
pub fn serialize_schema(doc: &SchemaDocument) -> Value {
    let mut types = Vec::new();
    types.push(json!({
        "kind": "OBJECT", "name": "Query", "fields": fields_json(&doc.query_fields)
    }));
    types.push(json!({
        "kind": "OBJECT", "name": "Mutation", "fields": fields_json(&doc.mutation_fields)
    }));
    for (name, fields) in &doc.object_types {
        types.push(json!({"kind": "OBJECT", "name": name, "fields": fields_json(fields)}));
    }
    for name in &doc.scalar_names {
        types.push(json!({"kind": "SCALAR", "name": name}));
    }
    for (name, values) in &doc.enum_values {
        let vs: Vec<Value> = values.iter().map(|v| json!({"name": v})).collect();
        types.push(json!({"kind": "ENUM", "name": name, "enumValues": vs}));
    }
    for (name, args) in &doc.input_object_fields {
        types.push(json!({"kind": "INPUT_OBJECT", "name": name, "inputFields": args_json(args)}));
    }
    for (name, members) in &doc.union_members {
        let ms: Vec<Value> = members.iter().map(|m| json!({"name": m})).collect();
        types.push(json!({"kind": "UNION", "name": name, "possibleTypes": ms}));
    }
    json!({
        "data": {
            "__schema": {
                "queryType": {"name": "Query"},
                "mutationType": {"name": "Mutation"},
                "types": types,
            }
        }
    })
}
