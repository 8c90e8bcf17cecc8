//! Payload materialization: turning a compiled endpoint plus the current
//! objects bucket into concrete request bodies — minimally valid, maximally
//! valid, and one per fuzz class.

use crate::bucket::{ObjectsBucket, ScalarKind};
use crate::compiler::{DepStrength, Endpoint, EndpointKind};
use crate::schema::{is_builtin_scalar, SchemaDocument, TypeKind, TypeRef, INTROSPECTION_QUERY};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FuzzClass {
    BatchQuery,
    DeepRecursion,
    ResourceIntensive,
    FieldDuplication,
    AliasOverload,
    CircularFragment,
    OsCommandInjection,
    Ssrf,
    SqlInjection,
    PathTraversal,
    InfoDisclosure,
    StoredXss,
    HtmlInjection,
    DenylistBypass,
}

pub const ALL_FUZZ_CLASSES: [FuzzClass; 14] = [
    FuzzClass::BatchQuery,
    FuzzClass::DeepRecursion,
    FuzzClass::ResourceIntensive,
    FuzzClass::FieldDuplication,
    FuzzClass::AliasOverload,
    FuzzClass::CircularFragment,
    FuzzClass::OsCommandInjection,
    FuzzClass::Ssrf,
    FuzzClass::SqlInjection,
    FuzzClass::PathTraversal,
    FuzzClass::InfoDisclosure,
    FuzzClass::StoredXss,
    FuzzClass::HtmlInjection,
    FuzzClass::DenylistBypass,
];

impl FuzzClass {
    /// The SCREAMING_SNAKE_CASE wire name, matching the serialized form.
    pub fn wire_name(self) -> &'static str {
        match self {
            FuzzClass::BatchQuery => "BATCH_QUERY",
            FuzzClass::DeepRecursion => "DEEP_RECURSION",
            FuzzClass::ResourceIntensive => "RESOURCE_INTENSIVE",
            FuzzClass::FieldDuplication => "FIELD_DUPLICATION",
            FuzzClass::AliasOverload => "ALIAS_OVERLOAD",
            FuzzClass::CircularFragment => "CIRCULAR_FRAGMENT",
            FuzzClass::OsCommandInjection => "OS_COMMAND_INJECTION",
            FuzzClass::Ssrf => "SSRF",
            FuzzClass::SqlInjection => "SQL_INJECTION",
            FuzzClass::PathTraversal => "PATH_TRAVERSAL",
            FuzzClass::InfoDisclosure => "INFO_DISCLOSURE",
            FuzzClass::StoredXss => "STORED_XSS",
            FuzzClass::HtmlInjection => "HTML_INJECTION",
            FuzzClass::DenylistBypass => "DENYLIST_BYPASS",
        }
    }

    pub fn is_dos(self) -> bool {
        matches!(
            self,
            FuzzClass::BatchQuery
                | FuzzClass::DeepRecursion
                | FuzzClass::ResourceIntensive
                | FuzzClass::FieldDuplication
                | FuzzClass::AliasOverload
                | FuzzClass::CircularFragment
        )
    }

    pub fn is_injection(self) -> bool {
        matches!(
            self,
            FuzzClass::OsCommandInjection
                | FuzzClass::Ssrf
                | FuzzClass::SqlInjection
                | FuzzClass::PathTraversal
                | FuzzClass::StoredXss
                | FuzzClass::HtmlInjection
        )
    }
}

impl std::fmt::Display for FuzzClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.wire_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PayloadKind {
    MinimalValid,
    MaximalValid,
    Fuzz(FuzzClass),
}

impl PayloadKind {
    pub fn is_valid(self) -> bool {
        matches!(self, PayloadKind::MinimalValid | PayloadKind::MaximalValid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Minimal,
    Maximal,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzParams {
    pub depth: usize,
    pub alias_count: usize,
    pub dup_count: usize,
    pub batch_count: usize,
}

impl Default for FuzzParams {
    fn default() -> Self {
        FuzzParams { depth: 20, alias_count: 100, dup_count: 100, batch_count: 10 }
    }
}

/// One injection probe value and the response signature that indicates the
/// probe was acted on rather than merely echoed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CanaryEntry {
    pub payload: String,
    pub signature: String,
    /// A substring whose presence vetoes the finding (distinguishes raw echo
    /// from execution, e.g. the unexpanded command substitution).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub veto: Option<String>,
}

/// Editable table of injection canaries, one per injection class.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CanaryTable {
    pub sql_injection: CanaryEntry,
    pub path_traversal: CanaryEntry,
    pub os_command_injection: CanaryEntry,
    pub ssrf: CanaryEntry,
    pub stored_xss: CanaryEntry,
    pub html_injection: CanaryEntry,
}

impl Default for CanaryTable {
    fn default() -> Self {
        let e = |payload: &str, signature: &str, veto: Option<&str>| CanaryEntry {
            payload: payload.to_string(),
            signature: signature.to_string(),
            veto: veto.map(str::to_string),
        };
        CanaryTable {
            sql_injection: e("' OR '1'='1' --", "SQL syntax error", None),
            path_traversal: e("../../../../etc/passwd", "root:x:0:0:", None),
            os_command_injection: e("$(echo qlx_cmd_canary)", "qlx_cmd_canary", Some("$(echo")),
            ssrf: e("http://169.254.169.254/latest/meta-data/", "instance-identity", None),
            stored_xss: e(
                "<script>alert('qlx_xss_canary')</script>",
                "<script>alert('qlx_xss_canary')</script>",
                None,
            ),
            html_injection: e("<h1>qlx_html_canary</h1>", "<h1>qlx_html_canary</h1>", None),
        }
    }
}

impl CanaryTable {
    pub fn entry(&self, class: FuzzClass) -> Option<&CanaryEntry> {
        match class {
            FuzzClass::SqlInjection => Some(&self.sql_injection),
            FuzzClass::PathTraversal => Some(&self.path_traversal),
            FuzzClass::OsCommandInjection => Some(&self.os_command_injection),
            FuzzClass::Ssrf => Some(&self.ssrf),
            FuzzClass::StoredXss => Some(&self.stored_xss),
            FuzzClass::HtmlInjection => Some(&self.html_injection),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaterializeError {
    /// A HARD-dependency ID is absent from the bucket; the request must wait.
    #[error("deferred: no {0} ID in the objects bucket")]
    Deferred(String),
    /// The fuzz class has nothing to attach to on this endpoint (skip, not
    /// failure).
    #[error("fuzz class not applicable to this endpoint")]
    ClassNotApplicable,
}

/// One node of an output selection tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub alias: Option<String>,
    pub name: String,
    /// `Some(type)` renders as an inline fragment `... on type { children }`.
    pub fragment_on: Option<String>,
    pub children: Vec<Selection>,
}

impl Selection {
    pub fn field(name: &str) -> Self {
        Selection { alias: None, name: name.to_string(), fragment_on: None, children: Vec::new() }
    }

    pub fn with_children(name: &str, children: Vec<Selection>) -> Self {
        Selection {
            alias: None,
            name: name.to_string(),
            fragment_on: None,
            children,
        }
    }

    fn render(&self, out: &mut String) {
        if let Some(on) = &self.fragment_on {
            out.push_str("... on ");
            out.push_str(on);
        } else {
            if let Some(a) = &self.alias {
                out.push_str(a);
                out.push_str(": ");
            }
            out.push_str(&self.name);
        }
        if !self.children.is_empty() {
            out.push_str(" { ");
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                c.render(out);
            }
            out.push_str(" }");
        }
    }

    fn collect_paths(&self, prefix: &str, out: &mut BTreeSet<String>) {
        let path = if prefix.is_empty() {
            self.name.clone()
        } else {
            format!("{prefix}.{}", self.name)
        };
        out.insert(path.clone());
        for c in &self.children {
            c.collect_paths(&path, out);
        }
    }
}

/// A fully materialized request, carrying enough structure to be re-rendered
/// after failure-driven adjustments.
#[derive(Debug, Clone)]
pub struct Payload {
    pub kind: PayloadKind,
    pub target_node: String,
    pub operation: String,
    pub var_defs: Vec<(String, String)>,
    pub variables: BTreeMap<String, Value>,
    pub selection: Vec<Selection>,
    pub query_text: String,
    /// Pre-built operation bodies for batched requests.
    pub batch: Option<Vec<Value>>,
    /// When set, `query_text` is hand-built and `rerender` leaves it alone.
    raw_text: bool,
}

impl Payload {
    /// An empty placeholder payload for records that never reached the
    /// network (deferrals).
    pub fn stub(target_node: &str) -> Self {
        Payload {
            kind: PayloadKind::MinimalValid,
            target_node: target_node.to_string(),
            operation: String::new(),
            var_defs: Vec::new(),
            variables: BTreeMap::new(),
            selection: Vec::new(),
            query_text: String::new(),
            batch: None,
            raw_text: true,
        }
    }

    /// The GraphQL-over-HTTP request body.
    pub fn body(&self) -> Value {
        if let Some(ops) = &self.batch {
            return Value::Array(ops.clone());
        }
        json!({
            "query": self.query_text,
            "variables": self.variables,
        })
    }

    /// The dotted selector paths of the output selection.
    pub fn selector_paths(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in &self.selection {
            s.collect_paths("", &mut out);
        }
        out
    }

    /// Rebuilds `query_text` from the structured parts.
    pub fn rerender(&mut self) {
        if self.raw_text {
            return;
        }
        self.query_text = render_document(
            &self.operation,
            &self.target_node,
            &self.var_defs,
            &self.selection,
        );
    }

    /// Drops every selector with the given field name anywhere in the tree.
    pub fn remove_selector(&mut self, field_name: &str) -> bool {
        fn prune(nodes: &mut Vec<Selection>, name: &str) -> bool {
            let before = nodes.len();
            nodes.retain(|n| n.name != name || n.fragment_on.is_some());
            let mut removed = nodes.len() != before;
            for n in nodes.iter_mut() {
                removed |= prune(&mut n.children, name);
            }
            removed
        }
        let removed = prune(&mut self.selection, field_name);
        if removed {
            self.rerender();
        }
        removed
    }

    /// Adds a top-level selector if not already present.
    pub fn add_selector(&mut self, field_name: &str) {
        if self.selection.iter().any(|s| s.name == field_name) {
            return;
        }
        self.selection.push(Selection::field(field_name));
        self.rerender();
    }

    /// Drops an argument (variable definition and value).
    pub fn remove_arg(&mut self, arg_name: &str) -> bool {
        let before = self.var_defs.len();
        self.var_defs.retain(|(n, _)| n != arg_name);
        self.variables.remove(arg_name);
        let removed = self.var_defs.len() != before;
        if removed {
            self.rerender();
        }
        removed
    }
}

fn render_document(
    operation: &str,
    field_name: &str,
    var_defs: &[(String, String)],
    selection: &[Selection],
) -> String {
    let mut out = String::new();
    out.push_str(operation);
    out.push(' ');
    out.push_str(field_name);
    if !var_defs.is_empty() {
        out.push('(');
        for (i, (name, sdl)) in var_defs.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('$');
            out.push_str(name);
            out.push_str(": ");
            out.push_str(sdl);
        }
        out.push(')');
    }
    out.push_str(" { ");
    out.push_str(field_name);
    if !var_defs.is_empty() {
        out.push('(');
        for (i, (name, _)) in var_defs.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(name);
            out.push_str(": $");
            out.push_str(name);
        }
        out.push(')');
    }
    if !selection.is_empty() {
        out.push_str(" { ");
        for (i, s) in selection.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let mut rendered = String::new();
            s.render(&mut rendered);
            out.push_str(&rendered);
        }
        out.push_str(" }");
    }
    out.push_str(" }");
    out
}

/// Random scalar generation: strings 1–10 alphanumeric chars, ints in
/// [0, 100], floats in [0, 100) at 2 decimals, IDs 8 alphanumeric chars.
/// Unknown custom scalars fall back to the string rule with a log note.
pub fn random_scalar(type_name: &str, rng: &mut impl Rng) -> Value {
    fn alnum(rng: &mut impl Rng, len: usize) -> String {
        const CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
        (0..len).map(|_| CHARS[rng.gen_range(0..CHARS.len())] as char).collect()
    }
    match type_name {
        "String" => {
            let len = rng.gen_range(1..=10);
            Value::String(alnum(rng, len))
        }
        "Boolean" => Value::Bool(rng.gen()),
        "Int" => Value::Number(rng.gen_range(0..=100).into()),
        "Float" => {
            let v: f64 = rng.gen_range(0.0..100.0);
            let rounded = (v * 100.0).round() / 100.0;
            json!(rounded)
        }
        "ID" => Value::String(alnum(rng, 8)),
        other => {
            log::debug!("no generator for custom scalar {other:?}; using string rule");
            let len = rng.gen_range(1..=10);
            Value::String(alnum(rng, len))
        }
    }
}

fn scalar_kind_of(type_name: &str) -> Option<ScalarKind> {
    match type_name {
        "String" => Some(ScalarKind::String),
        "Int" => Some(ScalarKind::Int),
        "Float" => Some(ScalarKind::Float),
        "Boolean" => Some(ScalarKind::Boolean),
        _ => None,
    }
}

fn scalar_text_to_value(kind: ScalarKind, text: &str) -> Value {
    match kind {
        ScalarKind::String => Value::String(text.to_string()),
        ScalarKind::Int => text.parse::<i64>().map(Into::into).unwrap_or(Value::Null),
        ScalarKind::Float => text.parse::<f64>().map(|f| json!(f)).unwrap_or(Value::Null),
        ScalarKind::Boolean => text.parse::<bool>().map(Value::Bool).unwrap_or(Value::Null),
    }
}

/// Value for a non-dependency argument: remembered scalar, else random; enums
/// pick a declared value; input objects fill one level of fields.
fn fill_value(
    ty: &TypeRef,
    bare_name: &str,
    via_prefix: &str,
    endpoint: &Endpoint,
    schema: &SchemaDocument,
    bucket: &ObjectsBucket,
    rng: &mut impl Rng,
) -> Result<Value, MaterializeError> {
    let (kind, type_name) = ty.unwrap_named();
    let inner = match kind {
        TypeKind::Scalar => {
            if type_name == "ID" {
                random_scalar("ID", rng)
            } else if let Some(k) = scalar_kind_of(type_name) {
                match bucket.lookup_scalar(bare_name, k, rng) {
                    Some(text) => scalar_text_to_value(k, &text),
                    None => random_scalar(type_name, rng),
                }
            } else {
                random_scalar(type_name, rng)
            }
        }
        TypeKind::Enum => {
            let values = schema.enum_values.get(type_name).cloned().unwrap_or_default();
            if values.is_empty() {
                random_scalar("String", rng)
            } else {
                Value::String(values[rng.gen_range(0..values.len())].clone())
            }
        }
        TypeKind::InputObject => {
            let mut map = serde_json::Map::new();
            let fields = schema
                .input_object_fields
                .get(type_name)
                .cloned()
                .unwrap_or_default();
            for f in &fields {
                let via = format!("{via_prefix}{}", f.name);
                if let Some(dep) = endpoint.input_deps.iter().find(|d| d.via_arg == via) {
                    match bucket.lookup_id(&dep.object_name, rng) {
                        Some(id) => {
                            map.insert(f.name.clone(), Value::String(id));
                        }
                        None if dep.strength == DepStrength::Hard => {
                            return Err(MaterializeError::Deferred(dep.object_name.clone()));
                        }
                        None => {} // soft, unmet: skip
                    }
                    continue;
                }
                let (fk, _) = f.ty.unwrap_named();
                // Only descend one level; deeper required input objects get an
                // empty object rather than unbounded recursion.
                if *fk == TypeKind::InputObject {
                    if f.ty.is_outer_non_null() {
                        map.insert(f.name.clone(), json!({}));
                    }
                    continue;
                }
                if f.ty.is_outer_non_null() || f.default_value.is_none() {
                    let v = fill_value(&f.ty, &f.name, "", endpoint, schema, bucket, rng)?;
                    map.insert(f.name.clone(), v);
                }
            }
            Value::Object(map)
        }
        _ => Value::Null,
    };
    if ty.contains_list() {
        Ok(Value::Array(vec![inner]))
    } else {
        Ok(inner)
    }
}

fn is_scalar_like(ty: &TypeRef) -> bool {
    matches!(ty.unwrap_named().0, TypeKind::Scalar | TypeKind::Enum)
}

fn is_object_like(ty: &TypeRef) -> bool {
    matches!(ty.unwrap_named().0, TypeKind::Object | TypeKind::Interface)
}

/// Recursive MAXIMAL selection: every scalar field, plus object fields'
/// scalars down to `depth_cap` levels, cutting at revisited object names.
fn maximal_selection(
    schema: &SchemaDocument,
    object: &str,
    visited: &mut BTreeSet<String>,
    depth: usize,
    depth_cap: usize,
) -> Vec<Selection> {
    let mut out = Vec::new();
    let Some(fields) = schema.object_fields(object) else {
        return vec![Selection::field("__typename")];
    };
    for f in fields {
        if is_scalar_like(&f.ty) {
            out.push(Selection::field(&f.name));
        }
    }
    if depth < depth_cap {
        for f in fields {
            let (kind, name) = f.ty.unwrap_named();
            match kind {
                TypeKind::Object | TypeKind::Interface => {
                    if visited.contains(name) {
                        continue;
                    }
                    visited.insert(name.to_string());
                    let children =
                        maximal_selection(schema, name, visited, depth + 1, depth_cap);
                    visited.remove(name);
                    if !children.is_empty() {
                        out.push(Selection::with_children(&f.name, children));
                    }
                }
                TypeKind::Union => {
                    out.push(Selection::with_children(
                        &f.name,
                        union_selection(schema, name),
                    ));
                }
                _ => {}
            }
        }
    }
    if out.is_empty() {
        out.push(Selection::field("__typename"));
    }
    out
}

/// Union outputs select `__typename` plus each member's scalar fields via
/// inline fragments.
fn union_selection(schema: &SchemaDocument, union_name: &str) -> Vec<Selection> {
    let mut out = vec![Selection::field("__typename")];
    for member in schema.union_members.get(union_name).cloned().unwrap_or_default() {
        let scalars: Vec<Selection> = schema
            .object_fields(&member)
            .map(|fs| {
                fs.iter()
                    .filter(|f| is_scalar_like(&f.ty))
                    .map(|f| Selection::field(&f.name))
                    .collect()
            })
            .unwrap_or_default();
        if !scalars.is_empty() {
            out.push(Selection {
                alias: None,
                name: member.clone(),
                fragment_on: Some(member.clone()),
                children: scalars,
            });
        }
    }
    out
}

fn minimal_selection(schema: &SchemaDocument, out_ty: &TypeRef) -> Vec<Selection> {
    let (kind, name) = out_ty.unwrap_named();
    match kind {
        TypeKind::Scalar | TypeKind::Enum => Vec::new(),
        TypeKind::Union => union_selection(schema, name),
        _ => {
            let Some(fields) = schema.object_fields(name) else {
                return vec![Selection::field("__typename")];
            };
            if fields.iter().any(|f| f.name == "id") {
                return vec![Selection::field("id")];
            }
            if let Some(f) = fields.iter().find(|f| is_scalar_like(&f.ty)) {
                return vec![Selection::field(&f.name)];
            }
            // Object with only object fields: select into the first one.
            if let Some(f) = fields.iter().find(|f| is_object_like(&f.ty)) {
                let inner = minimal_selection(schema, &f.ty);
                return vec![Selection::with_children(&f.name, inner)];
            }
            vec![Selection::field("__typename")]
        }
    }
}

fn output_selection(
    schema: &SchemaDocument,
    out_ty: &TypeRef,
    mode: Mode,
    depth_cap: usize,
) -> Vec<Selection> {
    let (kind, name) = out_ty.unwrap_named();
    match (mode, kind) {
        (_, TypeKind::Scalar) | (_, TypeKind::Enum) => Vec::new(),
        (Mode::Minimal, _) => minimal_selection(schema, out_ty),
        (Mode::Maximal, TypeKind::Union) => union_selection(schema, name),
        (Mode::Maximal, _) => {
            let mut visited = BTreeSet::from([name.to_string()]);
            maximal_selection(schema, name, &mut visited, 1, depth_cap)
        }
    }
}

/// Materializes a valid payload. HARD dependencies must be satisfiable from
/// the bucket; unmet SOFT-dependency arguments are omitted.
pub fn materialize_valid(
    endpoint: &Endpoint,
    bucket: &ObjectsBucket,
    schema: &SchemaDocument,
    mode: Mode,
    depth_cap: usize,
    rng: &mut impl Rng,
) -> Result<Payload, MaterializeError> {
    let mut var_defs = Vec::new();
    let mut variables = BTreeMap::new();

    for arg in &endpoint.args {
        let dep = endpoint.input_deps.iter().find(|d| d.via_arg == arg.name);
        let value = if let Some(dep) = dep {
            match bucket.lookup_id(&dep.object_name, rng) {
                Some(id) => {
                    if arg.ty.contains_list() {
                        Some(Value::Array(vec![Value::String(id)]))
                    } else {
                        Some(Value::String(id))
                    }
                }
                None if dep.strength == DepStrength::Hard => {
                    return Err(MaterializeError::Deferred(dep.object_name.clone()));
                }
                None => None,
            }
        } else {
            let prefix = format!("{}.", arg.name);
            Some(fill_value(&arg.ty, &arg.name, &prefix, endpoint, schema, bucket, rng)?)
        };
        if let Some(v) = value {
            var_defs.push((arg.name.clone(), arg.ty.render_sdl()));
            variables.insert(arg.name.clone(), v);
        }
    }

    let selection = output_selection(schema, &endpoint.raw_output_type, mode, depth_cap);
    let operation = match endpoint.kind {
        EndpointKind::Query => "query",
        EndpointKind::Mutation => "mutation",
    }
    .to_string();
    let mut payload = Payload {
        kind: match mode {
            Mode::Minimal => PayloadKind::MinimalValid,
            Mode::Maximal => PayloadKind::MaximalValid,
        },
        target_node: endpoint.name.clone(),
        operation,
        var_defs,
        variables,
        selection,
        query_text: String::new(),
        batch: None,
        raw_text: false,
    };
    payload.rerender();
    Ok(payload)
}

/// A chain of object-typed field names that keeps descending from `root`,
/// preferring fields that lead to further object fields so cyclic schemas
/// loop indefinitely.
fn recursion_chain(schema: &SchemaDocument, root: &str, depth: usize) -> Vec<(String, String)> {
    let mut chain = Vec::new();
    let mut cur = root.to_string();
    for _ in 0..depth {
        let Some(fields) = schema.object_fields(&cur) else { break };
        let object_fields: Vec<_> = fields.iter().filter(|f| is_object_like(&f.ty)).collect();
        if object_fields.is_empty() {
            break;
        }
        let continuing = object_fields.iter().find(|f| {
            let (_, name) = f.ty.unwrap_named();
            schema
                .object_fields(name)
                .map(|fs| fs.iter().any(|g| is_object_like(&g.ty)))
                .unwrap_or(false)
        });
        let f = continuing.unwrap_or(&object_fields[0]);
        let (_, next) = f.ty.unwrap_named();
        chain.push((f.name.clone(), next.to_string()));
        cur = next.to_string();
    }
    chain
}

fn leaf_selection(schema: &SchemaDocument, object: &str) -> Selection {
    let Some(fields) = schema.object_fields(object) else {
        return Selection::field("__typename");
    };
    if fields.iter().any(|f| f.name == "id") {
        return Selection::field("id");
    }
    fields
        .iter()
        .find(|f| is_scalar_like(&f.ty))
        .map(|f| Selection::field(&f.name))
        .unwrap_or_else(|| Selection::field("__typename"))
}

/// Materializes a fuzz payload of the given class, starting from the
/// endpoint's minimal valid payload.
pub fn materialize_fuzz(
    endpoint: &Endpoint,
    bucket: &ObjectsBucket,
    schema: &SchemaDocument,
    class: FuzzClass,
    params: &FuzzParams,
    depth_cap: usize,
    canaries: &CanaryTable,
    rng: &mut impl Rng,
) -> Result<Payload, MaterializeError> {
    let mut payload = materialize_valid(endpoint, bucket, schema, Mode::Minimal, depth_cap, rng)?;
    payload.kind = PayloadKind::Fuzz(class);
    let (out_kind, out_name) = endpoint.raw_output_type.unwrap_named();
    let out_object = match out_kind {
        TypeKind::Object | TypeKind::Interface => Some(out_name.to_string()),
        _ => None,
    };

    match class {
        FuzzClass::BatchQuery => {
            let op = json!({"query": payload.query_text, "variables": payload.variables});
            payload.batch = Some(vec![op; params.batch_count]);
            payload.raw_text = true;
        }
        FuzzClass::DeepRecursion => {
            let Some(root) = &out_object else {
                return Err(MaterializeError::ClassNotApplicable);
            };
            let chain = recursion_chain(schema, root, params.depth);
            if chain.len() < params.depth {
                // The schema has no cycle reachable from this output; nesting
                // cannot reach the requested depth.
                return Err(MaterializeError::ClassNotApplicable);
            }
            let (last_field, last_obj) = chain.last().unwrap().clone();
            let mut sel = Selection::with_children(&last_field, vec![leaf_selection(schema, &last_obj)]);
            for (field, _) in chain[..chain.len() - 1].iter().rev() {
                sel = Selection::with_children(field, vec![sel]);
            }
            payload.selection = vec![sel];
            payload.rerender();
        }
        FuzzClass::ResourceIntensive => {
            // Duplicate a list-typed object field enough times to trip
            // complexity limits without exceeding depth or alias limits.
            const LIST_DUPS: usize = 8;
            let list_field = out_object.as_deref().and_then(|root| {
                schema.object_fields(root).and_then(|fs| {
                    fs.iter()
                        .find(|f| f.ty.contains_list() && is_object_like(&f.ty))
                        .cloned()
                })
            });
            if let Some(f) = list_field {
                let (_, child_obj) = f.ty.unwrap_named();
                let scalars: Vec<Selection> = schema
                    .object_fields(child_obj)
                    .map(|fs| {
                        fs.iter()
                            .filter(|g| is_scalar_like(&g.ty))
                            .map(|g| Selection::field(&g.name))
                            .collect()
                    })
                    .unwrap_or_else(|| vec![Selection::field("__typename")]);
                payload.selection = (0..LIST_DUPS)
                    .map(|_| Selection::with_children(&f.name, scalars.clone()))
                    .collect();
                payload.rerender();
            } else if endpoint.raw_output_type.contains_list() {
                // The root field itself returns a list: alias-duplicate it.
                let mut body = String::new();
                let sel = &payload.selection;
                let mut root_sel = String::new();
                root_sel.push_str(&payload.target_node);
                if !payload.var_defs.is_empty() {
                    root_sel.push('(');
                    for (i, (name, _)) in payload.var_defs.iter().enumerate() {
                        if i > 0 {
                            root_sel.push_str(", ");
                        }
                        root_sel.push_str(&format!("{name}: ${name}"));
                    }
                    root_sel.push(')');
                }
                if !sel.is_empty() {
                    root_sel.push_str(" { ");
                    for (i, s) in sel.iter().enumerate() {
                        if i > 0 {
                            root_sel.push(' ');
                        }
                        let mut r = String::new();
                        s.render(&mut r);
                        root_sel.push_str(&r);
                    }
                    root_sel.push_str(" }");
                }
                body.push_str(&payload.operation);
                body.push_str(&format!(" {}", payload.target_node));
                if !payload.var_defs.is_empty() {
                    body.push('(');
                    for (i, (name, sdl)) in payload.var_defs.iter().enumerate() {
                        if i > 0 {
                            body.push_str(", ");
                        }
                        body.push_str(&format!("${name}: {sdl}"));
                    }
                    body.push(')');
                }
                body.push_str(" { ");
                for i in 0..LIST_DUPS {
                    if i > 0 {
                        body.push(' ');
                    }
                    body.push_str(&format!("r{i}: {root_sel}"));
                }
                body.push_str(" }");
                payload.query_text = body;
                payload.raw_text = true;
            } else {
                return Err(MaterializeError::ClassNotApplicable);
            }
        }
        FuzzClass::FieldDuplication => {
            if let Some(first) = payload.selection.first().cloned() {
                payload.selection = vec![first; params.dup_count];
                payload.rerender();
            } else {
                // Scalar output: duplicate the root field itself.
                let mut body = String::new();
                body.push_str(&payload.operation);
                body.push_str(&format!(" {}", payload.target_node));
                if !payload.var_defs.is_empty() {
                    body.push('(');
                    for (i, (name, sdl)) in payload.var_defs.iter().enumerate() {
                        if i > 0 {
                            body.push_str(", ");
                        }
                        body.push_str(&format!("${name}: {sdl}"));
                    }
                    body.push(')');
                }
                body.push_str(" { ");
                let mut call = payload.target_node.clone();
                if !payload.var_defs.is_empty() {
                    call.push('(');
                    for (i, (name, _)) in payload.var_defs.iter().enumerate() {
                        if i > 0 {
                            call.push_str(", ");
                        }
                        call.push_str(&format!("{name}: ${name}"));
                    }
                    call.push(')');
                }
                for i in 0..params.dup_count {
                    if i > 0 {
                        body.push(' ');
                    }
                    body.push_str(&call);
                }
                body.push_str(" }");
                payload.query_text = body;
                payload.raw_text = true;
            }
        }
        FuzzClass::AliasOverload => {
            let mut root_sel = payload.target_node.clone();
            if !payload.var_defs.is_empty() {
                root_sel.push('(');
                for (i, (name, _)) in payload.var_defs.iter().enumerate() {
                    if i > 0 {
                        root_sel.push_str(", ");
                    }
                    root_sel.push_str(&format!("{name}: ${name}"));
                }
                root_sel.push(')');
            }
            if !payload.selection.is_empty() {
                root_sel.push_str(" { ");
                for (i, s) in payload.selection.iter().enumerate() {
                    if i > 0 {
                        root_sel.push(' ');
                    }
                    let mut r = String::new();
                    s.render(&mut r);
                    root_sel.push_str(&r);
                }
                root_sel.push_str(" }");
            }
            let mut body = String::new();
            body.push_str(&payload.operation);
            body.push_str(&format!(" {}", payload.target_node));
            if !payload.var_defs.is_empty() {
                body.push('(');
                for (i, (name, sdl)) in payload.var_defs.iter().enumerate() {
                    if i > 0 {
                        body.push_str(", ");
                    }
                    body.push_str(&format!("${name}: {sdl}"));
                }
                body.push(')');
            }
            body.push_str(" { ");
            for i in 0..params.alias_count {
                if i > 0 {
                    body.push(' ');
                }
                body.push_str(&format!("a{i}: {root_sel}"));
            }
            body.push_str(" }");
            payload.query_text = body;
            payload.raw_text = true;
        }
        FuzzClass::CircularFragment => {
            let on = out_object.as_deref().unwrap_or("Query");
            payload.query_text = format!(
                "query loop {{ ...F0 }} fragment F0 on {on} {{ ...F1 }} fragment F1 on {on} {{ ...F0 }}"
            );
            payload.variables.clear();
            payload.var_defs.clear();
            payload.raw_text = true;
        }
        FuzzClass::InfoDisclosure => {
            payload.query_text = INTROSPECTION_QUERY.to_string();
            payload.variables.clear();
            payload.var_defs.clear();
            payload.raw_text = true;
        }
        FuzzClass::DenylistBypass => {
            // Re-encode with a comment after the opening brace so exact
            // substring filters miss the operation name.
            payload.query_text = payload
                .query_text
                .replacen("{ ", "{\n# probe\n", 1);
            payload.raw_text = true;
        }
        FuzzClass::OsCommandInjection
        | FuzzClass::Ssrf
        | FuzzClass::SqlInjection
        | FuzzClass::PathTraversal
        | FuzzClass::StoredXss
        | FuzzClass::HtmlInjection => {
            let entry = canaries.entry(class).expect("injection class has a canary");
            // Echo-friendly output: select every scalar field so stored
            // canaries show up in the response.
            payload.selection =
                output_selection(schema, &endpoint.raw_output_type, Mode::Maximal, depth_cap);
            let text_args: Vec<String> = payload
                .var_defs
                .iter()
                .filter(|(_, sdl)| {
                    let base = sdl.trim_matches(|c| c == '[' || c == ']' || c == '!');
                    // Custom scalars take the string fallback, so they count
                    // as text-valued inputs too.
                    base == "String"
                        || (!is_builtin_scalar(base) && schema.scalar_names.contains(base))
                })
                .map(|(name, _)| name.clone())
                .collect();
            if text_args.is_empty() {
                return Err(MaterializeError::ClassNotApplicable);
            }
            for name in &text_args {
                let value = if payload
                    .variables
                    .get(name)
                    .map(|v| v.is_array())
                    .unwrap_or(false)
                {
                    Value::Array(vec![Value::String(entry.payload.clone())])
                } else {
                    Value::String(entry.payload.clone())
                };
                payload.variables.insert(name.clone(), value);
            }
            payload.rerender();
        }
    }
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bucket::LookupStrategy;
    use crate::compiler::{compile, ActionLexicon};
    use crate::schema::parse_schema;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn schema() -> SchemaDocument {
        let raw = json!({"data": {"__schema": {
            "queryType": {"name": "Query"},
            "mutationType": {"name": "Mutation"},
            "types": [
                {"kind": "OBJECT", "name": "Query", "fields": [
                    {"name": "getUser", "args": [
                        {"name": "userId",
                         "type": {"kind": "NON_NULL", "name": null,
                                  "ofType": {"kind": "SCALAR", "name": "ID"}}}
                    ], "type": {"kind": "OBJECT", "name": "User"}},
                    {"name": "getWallet", "args": [
                        {"name": "walletId",
                         "type": {"kind": "NON_NULL", "name": null,
                                  "ofType": {"kind": "SCALAR", "name": "ID"}}}
                    ], "type": {"kind": "OBJECT", "name": "Wallet"}},
                    {"name": "listCurrencies", "args": [],
                     "type": {"kind": "LIST", "name": null,
                              "ofType": {"kind": "OBJECT", "name": "Currency"}}}
                ]},
                {"kind": "OBJECT", "name": "Mutation", "fields": [
                    {"name": "createWallet", "args": [
                        {"name": "currencyId",
                         "type": {"kind": "NON_NULL", "name": null,
                                  "ofType": {"kind": "SCALAR", "name": "ID"}}},
                        {"name": "userId", "type": {"kind": "SCALAR", "name": "ID"}},
                        {"name": "balance", "type": {"kind": "SCALAR", "name": "Float"}}
                    ], "type": {"kind": "OBJECT", "name": "Wallet"}},
                    {"name": "createCurrency", "args": [
                        {"name": "abbreviation",
                         "type": {"kind": "NON_NULL", "name": null,
                                  "ofType": {"kind": "SCALAR", "name": "String"}}},
                        {"name": "symbol",
                         "type": {"kind": "NON_NULL", "name": null,
                                  "ofType": {"kind": "SCALAR", "name": "String"}}}
                    ], "type": {"kind": "OBJECT", "name": "Currency"}},
                    {"name": "bumpCounter", "args": [
                        {"name": "amount",
                         "type": {"kind": "NON_NULL", "name": null,
                                  "ofType": {"kind": "SCALAR", "name": "Int"}}}
                    ], "type": {"kind": "SCALAR", "name": "Int"}}
                ]},
                {"kind": "OBJECT", "name": "User", "fields": [
                    {"name": "id", "args": [],
                     "type": {"kind": "NON_NULL", "name": null,
                              "ofType": {"kind": "SCALAR", "name": "ID"}}},
                    {"name": "name", "args": [], "type": {"kind": "SCALAR", "name": "String"}},
                    {"name": "role", "args": [], "type": {"kind": "OBJECT", "name": "Role"}},
                    {"name": "wallets", "args": [],
                     "type": {"kind": "LIST", "name": null,
                              "ofType": {"kind": "NON_NULL", "name": null,
                                         "ofType": {"kind": "OBJECT", "name": "Wallet"}}}}
                ]},
                {"kind": "OBJECT", "name": "Wallet", "fields": [
                    {"name": "id", "args": [], "type": {"kind": "SCALAR", "name": "ID"}},
                    {"name": "balance", "args": [], "type": {"kind": "SCALAR", "name": "Float"}},
                    {"name": "user", "args": [], "type": {"kind": "OBJECT", "name": "User"}},
                    {"name": "currency", "args": [], "type": {"kind": "OBJECT", "name": "Currency"}}
                ]},
                {"kind": "OBJECT", "name": "Currency", "fields": [
                    {"name": "id", "args": [], "type": {"kind": "SCALAR", "name": "ID"}},
                    {"name": "abbreviation", "args": [], "type": {"kind": "SCALAR", "name": "String"}}
                ]},
                {"kind": "OBJECT", "name": "Role", "fields": [
                    {"name": "id", "args": [], "type": {"kind": "SCALAR", "name": "ID"}},
                    {"name": "title", "args": [], "type": {"kind": "SCALAR", "name": "String"}}
                ]},
                {"kind": "SCALAR", "name": "ID"},
                {"kind": "SCALAR", "name": "String"},
                {"kind": "SCALAR", "name": "Float"},
                {"kind": "SCALAR", "name": "Int"}
            ]
        }}});
        parse_schema(&raw).unwrap()
    }

    fn endpoint(name: &str) -> Endpoint {
        let s = schema();
        compile(&s, &ActionLexicon::default())
            .into_iter()
            .find(|e| e.name == name)
            .unwrap()
    }

    fn parse_ok(text: &str) {
        graphql_parser::parse_query::<String>(text)
            .unwrap_or_else(|e| panic!("unparseable document: {e}\n{text}"));
    }

    #[test]
    fn create_wallet_minimal_with_partial_bucket() {
        let s = schema();
        let ep = endpoint("createWallet");
        let mut bucket = ObjectsBucket::default();
        bucket.put_id("Currency", "c1");
        let p = materialize_valid(&ep, &bucket, &s, Mode::Minimal, 2, &mut rng()).unwrap();
        assert_eq!(p.variables.get("currencyId"), Some(&json!("c1")));
        assert!(!p.variables.contains_key("userId"), "soft unmet arg must be omitted");
        assert!(p.variables.contains_key("balance"));
        assert_eq!(p.selection, vec![Selection::field("id")]);
        assert!(p.query_text.contains("mutation createWallet"));
        parse_ok(&p.query_text);
    }

    #[test]
    fn create_wallet_empty_bucket_defers() {
        let s = schema();
        let ep = endpoint("createWallet");
        let err = materialize_valid(&ep, &ObjectsBucket::default(), &s, Mode::Minimal, 2, &mut rng())
            .unwrap_err();
        assert_eq!(err, MaterializeError::Deferred("Currency".into()));
    }

    #[test]
    fn get_user_maximal_includes_role_scalars() {
        let s = schema();
        let ep = endpoint("getUser");
        let mut bucket = ObjectsBucket::default();
        bucket.put_id("User", "u1");
        let p = materialize_valid(&ep, &bucket, &s, Mode::Maximal, 2, &mut rng()).unwrap();
        let paths = p.selector_paths();
        assert!(paths.contains("id"));
        assert!(paths.contains("name"));
        assert!(paths.contains("role.title"));
        assert!(paths.contains("wallets.balance"));
        parse_ok(&p.query_text);
    }

    #[test]
    fn self_reference_recursion_stops_at_revisit() {
        let raw = json!({"data": {"__schema": {
            "queryType": {"name": "Query"},
            "types": [
                {"kind": "OBJECT", "name": "Query", "fields": [
                    {"name": "me", "args": [], "type": {"kind": "OBJECT", "name": "Person"}}
                ]},
                {"kind": "OBJECT", "name": "Person", "fields": [
                    {"name": "id", "args": [], "type": {"kind": "SCALAR", "name": "ID"}},
                    {"name": "friend", "args": [], "type": {"kind": "OBJECT", "name": "Person"}}
                ]},
                {"kind": "SCALAR", "name": "ID"}
            ]
        }}});
        let s = parse_schema(&raw).unwrap();
        let eps = compile(&s, &ActionLexicon::default());
        let p = materialize_valid(&eps[0], &ObjectsBucket::default(), &s, Mode::Maximal, 3, &mut rng())
            .unwrap();
        // friend: Person revisits Person immediately, so no nesting appears.
        assert!(!p.selector_paths().iter().any(|p| p.contains("friend")), "{:?}", p.selector_paths());
        parse_ok(&p.query_text);
    }

    #[test]
    fn minimal_selectors_subset_of_maximal() {
        let s = schema();
        let mut bucket = ObjectsBucket::default();
        for (o, id) in [("Currency", "c1"), ("User", "u1"), ("Wallet", "w1")] {
            bucket.put_id(o, id);
        }
        for ep in compile(&s, &ActionLexicon::default()) {
            let min = materialize_valid(&ep, &bucket, &s, Mode::Minimal, 2, &mut rng()).unwrap();
            let max = materialize_valid(&ep, &bucket, &s, Mode::Maximal, 2, &mut rng()).unwrap();
            assert!(
                min.selector_paths().is_subset(&max.selector_paths()),
                "{}: {:?} not within {:?}",
                ep.name,
                min.selector_paths(),
                max.selector_paths()
            );
        }
    }

    #[test]
    fn deep_recursion_reaches_requested_depth() {
        let s = schema();
        let ep = endpoint("getWallet");
        let mut bucket = ObjectsBucket::default();
        bucket.put_id("Wallet", "w1");
        let params = FuzzParams { depth: 20, ..Default::default() };
        let p = materialize_fuzz(
            &ep, &bucket, &s, FuzzClass::DeepRecursion, &params, 2,
            &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        parse_ok(&p.query_text);
        // Count nesting by walking the selection tree.
        let mut depth = 0;
        let mut cur = &p.selection;
        while let Some(first) = cur.first() {
            depth += 1;
            cur = &first.children;
        }
        // Chain of 20 plus the leaf selector.
        assert_eq!(depth, 21);
    }

    #[test]
    fn deep_recursion_without_cycle_not_applicable() {
        let s = schema();
        let ep = endpoint("listCurrencies");
        let err = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::DeepRecursion,
            &FuzzParams::default(), 2, &CanaryTable::default(), &mut rng(),
        )
        .unwrap_err();
        assert_eq!(err, MaterializeError::ClassNotApplicable);
    }

    #[test]
    fn alias_overload_count() {
        let s = schema();
        let ep = endpoint("listCurrencies");
        let params = FuzzParams { alias_count: 100, ..Default::default() };
        let p = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::AliasOverload, &params, 2,
            &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        parse_ok(&p.query_text);
        assert_eq!(p.query_text.matches("a0:").count(), 1);
        assert_eq!(p.query_text.matches("a99:").count(), 1);
        let aliases = (0..100).filter(|i| p.query_text.contains(&format!("a{i}: "))).count();
        assert_eq!(aliases, 100);
    }

    #[test]
    fn field_duplication_repeats_scalar() {
        let s = schema();
        let ep = endpoint("listCurrencies");
        let params = FuzzParams { dup_count: 100, ..Default::default() };
        let p = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::FieldDuplication, &params, 2,
            &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        parse_ok(&p.query_text);
        assert_eq!(p.selection.len(), 100);
    }

    #[test]
    fn batch_query_packs_operations() {
        let s = schema();
        let ep = endpoint("listCurrencies");
        let params = FuzzParams { batch_count: 10, ..Default::default() };
        let p = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::BatchQuery, &params, 2,
            &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        let body = p.body();
        assert_eq!(body.as_array().unwrap().len(), 10);
    }

    #[test]
    fn circular_fragment_parses_and_cycles() {
        let s = schema();
        let ep = endpoint("getUser");
        let mut bucket = ObjectsBucket::default();
        bucket.put_id("User", "u1");
        let p = materialize_fuzz(
            &ep, &bucket, &s, FuzzClass::CircularFragment, &FuzzParams::default(), 2,
            &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        parse_ok(&p.query_text);
        assert!(p.query_text.contains("fragment F0"));
        assert!(p.query_text.contains("...F0"));
    }

    #[test]
    fn sql_canary_substitutes_text_inputs() {
        let s = schema();
        let ep = endpoint("createCurrency");
        let table = CanaryTable::default();
        let p = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::SqlInjection,
            &FuzzParams::default(), 2, &table, &mut rng(),
        )
        .unwrap();
        assert_eq!(
            p.variables.get("abbreviation"),
            Some(&json!(table.sql_injection.payload))
        );
        assert_eq!(p.variables.get("symbol"), Some(&json!(table.sql_injection.payload)));
        parse_ok(&p.query_text);
    }

    #[test]
    fn injection_on_int_only_endpoint_not_applicable() {
        let s = schema();
        let ep = endpoint("bumpCounter");
        let err = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::OsCommandInjection,
            &FuzzParams::default(), 2, &CanaryTable::default(), &mut rng(),
        )
        .unwrap_err();
        assert_eq!(err, MaterializeError::ClassNotApplicable);
    }

    #[test]
    fn denylist_bypass_avoids_plain_pattern() {
        let s = schema();
        let ep = endpoint("listCurrencies");
        let p = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::DenylistBypass,
            &FuzzParams::default(), 2, &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        assert!(!p.query_text.contains("{ listCurrencies"), "{}", p.query_text);
        parse_ok(&p.query_text);
    }

    #[test]
    fn info_disclosure_is_the_introspection_probe() {
        let s = schema();
        let ep = endpoint("listCurrencies");
        let p = materialize_fuzz(
            &ep, &ObjectsBucket::default(), &s, FuzzClass::InfoDisclosure,
            &FuzzParams::default(), 2, &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        assert!(p.query_text.contains("__schema"));
        parse_ok(&p.query_text);
    }

    #[test]
    fn resource_intensive_duplicates_list_field() {
        let s = schema();
        let ep = endpoint("getUser");
        let mut bucket = ObjectsBucket::default();
        bucket.put_id("User", "u1");
        let p = materialize_fuzz(
            &ep, &bucket, &s, FuzzClass::ResourceIntensive, &FuzzParams::default(), 2,
            &CanaryTable::default(), &mut rng(),
        )
        .unwrap();
        parse_ok(&p.query_text);
        assert_eq!(p.selection.iter().filter(|sel| sel.name == "wallets").count(), 8);
    }

    #[test]
    fn deterministic_under_fixed_seed_and_bucket() {
        let s = schema();
        let ep = endpoint("createCurrency");
        let one = materialize_valid(
            &ep, &ObjectsBucket::default(), &s, Mode::Minimal, 2,
            &mut ChaCha8Rng::seed_from_u64(99),
        )
        .unwrap();
        let two = materialize_valid(
            &ep, &ObjectsBucket::default(), &s, Mode::Minimal, 2,
            &mut ChaCha8Rng::seed_from_u64(99),
        )
        .unwrap();
        assert_eq!(one.query_text, two.query_text);
        assert_eq!(one.variables, two.variables);
    }

    #[test]
    fn scalar_lookup_prefers_remembered_values() {
        let s = schema();
        let ep = endpoint("createCurrency");
        let mut bucket = ObjectsBucket::new(100, LookupStrategy::Latest);
        bucket.put_scalar("abbreviation", &json!("USD"));
        let p = materialize_valid(&ep, &bucket, &s, Mode::Minimal, 2, &mut rng()).unwrap();
        assert_eq!(p.variables.get("abbreviation"), Some(&json!("USD")));
    }

    #[test]
    fn selector_repair_rerenders() {
        let s = schema();
        let ep = endpoint("listCurrencies");
        let mut p = materialize_valid(&ep, &ObjectsBucket::default(), &s, Mode::Maximal, 2, &mut rng())
            .unwrap();
        assert!(p.query_text.contains("abbreviation"));
        assert!(p.remove_selector("abbreviation"));
        assert!(!p.query_text.contains("abbreviation"));
        parse_ok(&p.query_text);
        p.add_selector("abbreviation");
        assert!(p.query_text.contains("abbreviation"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn random_strings_match_shape(seed in 0u64..10_000) {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let v = random_scalar("String", &mut r);
                let s = v.as_str().unwrap();
                prop_assert!((1..=10).contains(&s.len()));
                prop_assert!(s.chars().all(|c| c.is_ascii_alphanumeric()));
            }

            #[test]
            fn random_ints_in_range(seed in 0u64..10_000) {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let v = random_scalar("Int", &mut r);
                let n = v.as_i64().unwrap();
                prop_assert!((0..=100).contains(&n));
            }

            #[test]
            fn custom_scalar_falls_back_to_string(seed in 0u64..1_000) {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let v = random_scalar("CustomDate", &mut r);
                prop_assert!(v.is_string());
            }
        }
    }
}
