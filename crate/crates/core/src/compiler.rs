//! Compilation: annotate mutations with actions and infer object/operation
//! dependencies from ID-shaped inputs, producing [`Endpoint`] records.

use crate::schema::{ArgDef, FieldDef, SchemaDocument, TypeKind, TypeRef};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Create,
    Update,
    Delete,
    Unknown,
    /// Marker for queries, which carry no mutation action.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DepStrength {
    Hard,
    Soft,
}

/// A link from an operation input to the object whose ID it consumes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DependencyRef {
    pub object_name: String,
    pub strength: DepStrength,
    /// Argument (or `arg.field` for one level of input-object nesting) that
    /// induced the link.
    pub via_arg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EndpointKind {
    Query,
    Mutation,
}

/// A compiled query or mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub name: String,
    pub kind: EndpointKind,
    pub action: Action,
    #[serde(skip)]
    pub args: Vec<ArgDef>,
    pub input_deps: Vec<DependencyRef>,
    pub output_object: Option<String>,
    #[serde(skip, default = "default_output_type")]
    pub raw_output_type: TypeRef,
}

fn default_output_type() -> TypeRef {
    TypeRef::named(TypeKind::Scalar, "Boolean")
}

/// Verb tables used to annotate mutation actions. Overridable via config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionLexicon {
    pub create: Vec<String>,
    pub update: Vec<String>,
    pub delete: Vec<String>,
}

impl Default for ActionLexicon {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        ActionLexicon {
            create: v(&["create", "add", "new", "insert", "register", "make", "post"]),
            update: v(&["update", "edit", "set", "modify", "change", "patch"]),
            delete: v(&["delete", "remove", "destroy", "deactivate", "purge"]),
        }
    }
}

impl ActionLexicon {
    fn classify(&self, token: &str) -> Option<Action> {
        let t = token.to_lowercase();
        if self.create.iter().any(|v| *v == t) {
            Some(Action::Create)
        } else if self.update.iter().any(|v| *v == t) {
            Some(Action::Update)
        } else if self.delete.iter().any(|v| *v == t) {
            Some(Action::Delete)
        } else {
            None
        }
    }
}

/// Splits an identifier into lowercase tokens at underscores and camelCase
/// boundaries.
pub fn tokenize(name: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for part in name.split('_') {
        let mut cur = String::new();
        for c in part.chars() {
            if c.is_uppercase() && !cur.is_empty() {
                tokens.push(cur.to_lowercase());
                cur = String::new();
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            tokens.push(cur.to_lowercase());
        }
    }
    tokens
}

/// Determines a mutation's action from its first name token, then from verbs
/// in its description; falls back to UNKNOWN.
pub fn annotate_action(
    name: &str,
    description: Option<&str>,
    lexicon: &ActionLexicon,
) -> Action {
    if let Some(first) = tokenize(name).first() {
        if let Some(a) = lexicon.classify(first) {
            return a;
        }
    }
    if let Some(desc) = description {
        for word in desc.split(|c: char| !c.is_alphanumeric()) {
            if word.is_empty() {
                continue;
            }
            // "deletes a ship" should still match "delete"
            let candidates = [word.to_string(), word.trim_end_matches('s').to_string()];
            for cand in &candidates {
                if let Some(a) = lexicon.classify(cand) {
                    return a;
                }
            }
        }
    }
    Action::Unknown
}

/// Strips a trailing ID marker from an argument name, returning the object
/// name candidate. `currencyId` -> `currency`, `user_id` -> `user`,
/// a bare `id` yields an empty candidate.
fn strip_id_suffix(name: &str) -> Option<String> {
    if name == "id" || name == "ID" || name == "Id" {
        return Some(String::new());
    }
    for suffix in ["_id", "_ID", "Id", "ID"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            if !stem.is_empty() {
                return Some(stem.to_string());
            }
        }
    }
    None
}

/// Case-insensitive object match with trailing `s`/`es` stripping.
fn match_object<'a>(schema: &'a SchemaDocument, candidate: &str) -> Option<&'a str> {
    if candidate.is_empty() {
        return None;
    }
    if let Some(hit) = schema.find_object_ci(candidate) {
        return Some(hit);
    }
    if let Some(stem) = candidate.strip_suffix("es") {
        if let Some(hit) = schema.find_object_ci(stem) {
            return Some(hit);
        }
    }
    if let Some(stem) = candidate.strip_suffix('s') {
        if let Some(hit) = schema.find_object_ci(stem) {
            return Some(hit);
        }
    }
    None
}

/// Object name candidate for an argument, or None when the argument does not
/// look like an ID input.
fn id_candidate(arg_name: &str, ty: &TypeRef) -> Option<String> {
    let (kind, type_name) = ty.unwrap_named();
    let is_id_type = *kind == TypeKind::Scalar && type_name == "ID";
    match strip_id_suffix(arg_name) {
        Some(stem) => Some(stem),
        None if is_id_type => Some(arg_name.to_string()),
        None => None,
    }
}

/// Mutation name with its leading action verb removed: `deleteWallet` ->
/// `Wallet` candidate.
fn verb_stripped_name(name: &str, lexicon: &ActionLexicon) -> Option<String> {
    let tokens = tokenize(name);
    let first = tokens.first()?;
    lexicon.classify(first)?;
    if tokens.len() < 2 {
        return None;
    }
    Some(tokens[1..].join(""))
}

/// Compiles one schema field into an [`Endpoint`], inferring input
/// dependencies from ID-shaped arguments. Unresolvable links are dropped.
pub fn infer_dependencies(
    field: &FieldDef,
    kind: EndpointKind,
    schema: &SchemaDocument,
    lexicon: &ActionLexicon,
) -> Endpoint {
    let action = match kind {
        EndpointKind::Query => Action::None,
        EndpointKind::Mutation => {
            annotate_action(&field.name, field.description.as_deref(), lexicon)
        }
    };

    let mut deps: Vec<DependencyRef> = Vec::new();
    let mut push_dep = |object: &str, strength: DepStrength, via: String| {
        let dep = DependencyRef {
            object_name: object.to_string(),
            strength,
            via_arg: via,
        };
        if !deps.contains(&dep) {
            deps.push(dep);
        }
    };

    let resolve = |candidate: &str| -> Option<String> {
        if candidate.is_empty() {
            // Bare `id`: only a mutation named after an object links it.
            if kind == EndpointKind::Mutation {
                let stem = verb_stripped_name(&field.name, lexicon)?;
                return match_object(schema, &stem).map(str::to_string);
            }
            return None;
        }
        match_object(schema, candidate).map(str::to_string)
    };

    for arg in &field.args {
        if let Some(candidate) = id_candidate(&arg.name, &arg.ty) {
            if let Some(object) = resolve(&candidate) {
                let strength = if arg.ty.is_outer_non_null() {
                    DepStrength::Hard
                } else {
                    DepStrength::Soft
                };
                push_dep(&object, strength, arg.name.clone());
                continue;
            }
        }
        // One level of input-object recursion.
        let (k, type_name) = arg.ty.unwrap_named();
        if *k == TypeKind::InputObject {
            if let Some(inner_args) = schema.input_object_fields.get(type_name) {
                for inner in inner_args {
                    if let Some(candidate) = id_candidate(&inner.name, &inner.ty) {
                        if candidate.is_empty() {
                            continue;
                        }
                        if let Some(object) = match_object(schema, &candidate) {
                            let strength = if inner.ty.is_outer_non_null() {
                                DepStrength::Hard
                            } else {
                                DepStrength::Soft
                            };
                            push_dep(object, strength, format!("{}.{}", arg.name, inner.name));
                        }
                    }
                }
            }
        }
    }

    let (out_kind, out_name) = field.ty.unwrap_named();
    let output_object = match out_kind {
        TypeKind::Object | TypeKind::Interface => Some(out_name.to_string()),
        _ => None,
    };

    Endpoint {
        name: field.name.clone(),
        kind,
        action,
        args: field.args.clone(),
        input_deps: deps,
        output_object,
        raw_output_type: field.ty.clone(),
    }
}

/// Compiles every query and mutation in the schema.
pub fn compile(schema: &SchemaDocument, lexicon: &ActionLexicon) -> Vec<Endpoint> {
    let mut out = Vec::new();
    for f in &schema.query_fields {
        out.push(infer_dependencies(f, EndpointKind::Query, schema, lexicon));
    }
    for f in &schema.mutation_fields {
        out.push(infer_dependencies(f, EndpointKind::Mutation, schema, lexicon));
    }
    out
}

/// Serializes compiled endpoints as the compile-phase artifact: one array for
/// queries and one for mutations.
pub fn endpoints_to_json(endpoints: &[Endpoint]) -> serde_json::Value {
    let (queries, mutations): (Vec<_>, Vec<_>) = endpoints
        .iter()
        .partition(|e| e.kind == EndpointKind::Query);
    serde_json::json!({
        "queries": queries,
        "mutations": mutations,
    })
}

/// Rebuilds full endpoints from the serialized artifact joined with the
/// schema (which carries args and output types). Manual edits to the
/// artifact's dependency lists and actions are honored.
pub fn endpoints_from_json(
    artifact: &serde_json::Value,
    schema: &SchemaDocument,
) -> Result<Vec<Endpoint>, String> {
    let mut out = Vec::new();
    for key in ["queries", "mutations"] {
        let Some(items) = artifact.get(key).and_then(|v| v.as_array()) else {
            return Err(format!("artifact missing {key:?} array"));
        };
        for item in items {
            let mut ep: Endpoint =
                serde_json::from_value(item.clone()).map_err(|e| e.to_string())?;
            let (field, _is_query) = schema
                .operation_field(&ep.name)
                .ok_or_else(|| format!("endpoint {:?} not present in schema", ep.name))?;
            ep.args = field.args.clone();
            ep.raw_output_type = field.ty.clone();
            out.push(ep);
        }
    }
    Ok(out)
}
