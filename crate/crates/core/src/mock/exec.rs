//! Request execution for the mock target: structural limits, seeded
//! vulnerability sinks, and resolvers over the in-memory wallet store.

use super::schema::{fixture_schema, fixture_schema_document};
use graphql_parser::query::{
    Definition, Document, OperationDefinition, Selection, SelectionSet, Value as QValue,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

/// One boolean per fuzz class plus the hidden-field scenario. All-off is a
/// correct, secure server; each toggle enables exactly one flaw.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct VulnToggles {
    pub batch_query: bool,
    pub deep_recursion: bool,
    pub resource_intensive: bool,
    pub field_duplication: bool,
    pub alias_overload: bool,
    pub circular_fragment: bool,
    pub os_command_injection: bool,
    pub ssrf: bool,
    pub sql_injection: bool,
    pub path_traversal: bool,
    pub info_disclosure: bool,
    pub stored_xss: bool,
    pub html_injection: bool,
    pub denylist_bypass: bool,
    pub hidden_field_enabled: bool,
}

impl VulnToggles {
    pub fn all_on() -> Self {
        VulnToggles {
            batch_query: true,
            deep_recursion: true,
            resource_intensive: true,
            field_duplication: true,
            alias_overload: true,
            circular_fragment: true,
            os_command_injection: true,
            ssrf: true,
            sql_injection: true,
            path_traversal: true,
            info_disclosure: true,
            stored_xss: true,
            html_injection: true,
            denylist_bypass: true,
            hidden_field_enabled: false,
        }
    }
}

/// How long a vulnerable denial-of-service path stalls: just over the 2 s
/// detection floor.
pub const DOS_SLEEP: Duration = Duration::from_millis(2100);
/// Per-selector resolution delay, keeping minimal-request timings small but
/// nonzero.
const SELECTOR_DELAY_MS: u64 = 5;
const MAX_DEPTH: usize = 10;
const MAX_ALIASES: usize = 10;
const MAX_DUPES: usize = 10;
const MAX_LIST_SELECTIONS: usize = 5;

#[derive(Debug, Clone, Default)]
struct UserRec {
    id: String,
    name: String,
    role_id: Option<String>,
}

#[derive(Debug, Clone, Default)]
struct RoleRec {
    id: String,
    title: String,
}

#[derive(Debug, Clone, Default)]
struct WalletRec {
    id: String,
    balance: Option<f64>,
    user_id: Option<String>,
    currency_id: String,
}

#[derive(Debug, Clone, Default)]
struct CurrencyRec {
    id: String,
    abbreviation: String,
    symbol: String,
    country: Option<String>,
}

/// In-memory store with reproducible sequential IDs.
#[derive(Debug, Default)]
pub struct MockState {
    users: Vec<UserRec>,
    roles: Vec<RoleRec>,
    wallets: Vec<WalletRec>,
    currencies: Vec<CurrencyRec>,
    counters: BTreeMap<&'static str, usize>,
}

impl MockState {
    pub fn new() -> Self {
        MockState::default()
    }

    pub fn reset(&mut self) {
        *self = MockState::default();
    }

    fn next_id(&mut self, prefix: &'static str) -> String {
        let n = self.counters.entry(prefix).or_insert(0);
        *n += 1;
        format!("{prefix}{n}")
    }
}

#[derive(Debug)]
pub struct MockResponse {
    pub status: u16,
    pub body: Value,
    pub delay: Duration,
}

fn graphql_errors(messages: &[String]) -> Value {
    json!({
        "data": null,
        "errors": messages.iter().map(|m| json!({"message": m})).collect::<Vec<_>>(),
    })
}

fn graphql_error(message: &str) -> Value {
    graphql_errors(&[message.to_string()])
}

/// Entry point: dispatches a raw HTTP request body (single operation or
/// batch array) against the store.
pub fn handle_request(state: &mut MockState, toggles: &VulnToggles, raw_body: &str) -> MockResponse {
    let parsed: Value = match serde_json::from_str(raw_body) {
        Ok(v) => v,
        Err(_) => {
            return MockResponse {
                status: 400,
                body: json!({"error": "request body is not JSON"}),
                delay: Duration::ZERO,
            }
        }
    };

    if let Value::Array(ops) = parsed {
        if ops.len() > 2 && !toggles.batch_query {
            return MockResponse {
                status: 400,
                body: json!({"error": "batch requests are disabled"}),
                delay: Duration::ZERO,
            };
        }
        let delay = if ops.len() > 2 { DOS_SLEEP } else { Duration::ZERO };
        let mut results = Vec::new();
        for op in &ops {
            let r = handle_single(state, toggles, op);
            results.push(r.body);
        }
        return MockResponse { status: 200, body: Value::Array(results), delay };
    }

    handle_single(state, toggles, &parsed)
}

fn handle_single(state: &mut MockState, toggles: &VulnToggles, op: &Value) -> MockResponse {
    let query = op.get("query").and_then(Value::as_str).unwrap_or("");
    let variables = op
        .get("variables")
        .and_then(Value::as_object)
        .cloned()
        .unwrap_or_default();

    // Naive WAF-style deny list on the raw text (present only when the
    // bypassable-deny-list flaw is enabled).
    if toggles.denylist_bypass && query.contains("{ listCurrencies") {
        return MockResponse {
            status: 403,
            body: json!({"error": "query blocked by deny list"}),
            delay: Duration::ZERO,
        };
    }

    if query.contains("__schema") {
        return if toggles.info_disclosure {
            MockResponse {
                status: 200,
                body: fixture_schema_document(),
                delay: Duration::ZERO,
            }
        } else {
            MockResponse {
                status: 200,
                body: graphql_error("introspection is disabled"),
                delay: Duration::ZERO,
            }
        };
    }

    let doc = match graphql_parser::parse_query::<String>(query) {
        Ok(d) => d,
        Err(e) => {
            return MockResponse {
                status: 200,
                body: graphql_error(&format!("syntax error: {e}")),
                delay: Duration::ZERO,
            }
        }
    };

    if has_fragment_cycle(&doc) {
        return if toggles.circular_fragment {
            MockResponse { status: 200, body: json!({"data": {}}), delay: DOS_SLEEP }
        } else {
            MockResponse {
                status: 200,
                body: graphql_error("fragment cycle detected"),
                delay: Duration::ZERO,
            }
        };
    }

    let m = doc_metrics(&doc);
    if m.depth > MAX_DEPTH {
        return dos_or_reject(toggles.deep_recursion, "query depth limit exceeded");
    }
    if m.aliases > MAX_ALIASES {
        return dos_or_reject(toggles.alias_overload, "too many aliased fields");
    }
    if m.max_dupes > MAX_DUPES {
        return dos_or_reject(toggles.field_duplication, "duplicate field limit exceeded");
    }
    if m.list_selections > MAX_LIST_SELECTIONS {
        return dos_or_reject(toggles.resource_intensive, "query complexity limit exceeded");
    }

    let selection_set = match root_selection(&doc) {
        Some(s) => s,
        None => {
            return MockResponse {
                status: 200,
                body: graphql_error("no operation found"),
                delay: Duration::ZERO,
            }
        }
    };

    let mut data = Map::new();
    let mut errors: Vec<String> = Vec::new();
    for sel in &selection_set.items {
        let Selection::Field(f) = sel else { continue };
        let args = resolve_args(&f.arguments, &variables);
        match execute_root(state, toggles, &f.name, &args, &f.selection_set, &mut errors) {
            Some(v) => {
                let key = f.alias.clone().unwrap_or_else(|| f.name.clone());
                data.insert(key, v);
            }
            None => {}
        }
    }

    let body = if errors.is_empty() {
        json!({"data": data})
    } else {
        graphql_errors(&errors)
    };
    let delay = Duration::from_millis(SELECTOR_DELAY_MS * m.selectors.min(30) as u64);
    MockResponse { status: 200, body, delay }
}

fn dos_or_reject(vulnerable: bool, message: &str) -> MockResponse {
    if vulnerable {
        MockResponse { status: 200, body: json!({"data": {}}), delay: DOS_SLEEP }
    } else {
        MockResponse { status: 200, body: graphql_error(message), delay: Duration::ZERO }
    }
}

fn root_selection<'a>(
    doc: &'a Document<'a, String>,
) -> Option<&'a SelectionSet<'a, String>> {
    doc.definitions.iter().find_map(|d| match d {
        Definition::Operation(OperationDefinition::Query(q)) => Some(&q.selection_set),
        Definition::Operation(OperationDefinition::Mutation(m)) => Some(&m.selection_set),
        Definition::Operation(OperationDefinition::SelectionSet(s)) => Some(s),
        _ => None,
    })
}

struct DocMetrics {
    depth: usize,
    aliases: usize,
    max_dupes: usize,
    list_selections: usize,
    selectors: usize,
}

fn doc_metrics(doc: &Document<'_, String>) -> DocMetrics {
    let mut m = DocMetrics { depth: 0, aliases: 0, max_dupes: 0, list_selections: 0, selectors: 0 };
    fn walk(set: &SelectionSet<'_, String>, depth: usize, m: &mut DocMetrics) {
        m.depth = m.depth.max(depth);
        let mut per_name: BTreeMap<&str, usize> = BTreeMap::new();
        for item in &set.items {
            match item {
                Selection::Field(f) => {
                    m.selectors += 1;
                    if f.alias.is_some() {
                        m.aliases += 1;
                    } else {
                        *per_name.entry(f.name.as_str()).or_insert(0) += 1;
                    }
                    if matches!(f.name.as_str(), "wallets" | "listCurrencies") {
                        m.list_selections += 1;
                    }
                    if !f.selection_set.items.is_empty() {
                        walk(&f.selection_set, depth + 1, m);
                    }
                }
                Selection::InlineFragment(frag) => walk(&frag.selection_set, depth, m),
                Selection::FragmentSpread(_) => {}
            }
        }
        if let Some(max) = per_name.values().max() {
            m.max_dupes = m.max_dupes.max(*max);
        }
    }
    for def in &doc.definitions {
        match def {
            Definition::Operation(OperationDefinition::Query(q)) => walk(&q.selection_set, 1, &mut m),
            Definition::Operation(OperationDefinition::Mutation(q)) => walk(&q.selection_set, 1, &mut m),
            Definition::Operation(OperationDefinition::SelectionSet(s)) => walk(s, 1, &mut m),
            Definition::Fragment(f) => walk(&f.selection_set, 1, &mut m),
            _ => {}
        }
    }
    m
}

fn has_fragment_cycle(doc: &Document<'_, String>) -> bool {
    fn spreads(set: &SelectionSet<'_, String>, out: &mut Vec<String>) {
        for item in &set.items {
            match item {
                Selection::FragmentSpread(s) => out.push(s.fragment_name.clone()),
                Selection::Field(f) => spreads(&f.selection_set, out),
                Selection::InlineFragment(f) => spreads(&f.selection_set, out),
            }
        }
    }
    let mut edges: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for def in &doc.definitions {
        if let Definition::Fragment(f) = def {
            let mut out = Vec::new();
            spreads(&f.selection_set, &mut out);
            edges.insert(f.name.clone(), out);
        }
    }
    fn dfs(
        node: &str,
        edges: &BTreeMap<String, Vec<String>>,
        path: &mut BTreeSet<String>,
    ) -> bool {
        if !path.insert(node.to_string()) {
            return true;
        }
        let found = edges
            .get(node)
            .map(|next| next.iter().any(|n| dfs(n, edges, path)))
            .unwrap_or(false);
        path.remove(node);
        found
    }
    edges.keys().any(|k| dfs(k, &edges, &mut BTreeSet::new()))
}

fn resolve_args(
    arguments: &[(String, QValue<'_, String>)],
    variables: &Map<String, Value>,
) -> BTreeMap<String, Value> {
    fn to_json(v: &QValue<'_, String>, variables: &Map<String, Value>) -> Value {
        match v {
            QValue::Variable(name) => variables.get(name.as_str()).cloned().unwrap_or(Value::Null),
            QValue::Int(n) => json!(n.as_i64()),
            QValue::Float(f) => json!(f),
            QValue::String(s) => Value::String(s.clone()),
            QValue::Boolean(b) => Value::Bool(*b),
            QValue::Null => Value::Null,
            QValue::Enum(e) => Value::String(e.clone()),
            QValue::List(items) => {
                Value::Array(items.iter().map(|i| to_json(i, variables)).collect())
            }
            QValue::Object(map) => Value::Object(
                map.iter()
                    .map(|(k, v)| (k.to_string(), to_json(v, variables)))
                    .collect(),
            ),
        }
    }
    arguments
        .iter()
        .map(|(name, v)| (name.clone(), to_json(v, variables)))
        .collect()
}

/// Seeded input sinks: applied to every stored string value.
fn transform_input(toggles: &VulnToggles, value: &str) -> String {
    let mut v = value.to_string();
    if toggles.os_command_injection {
        // "Executes" command substitutions by expanding them.
        while let Some(start) = v.find("$(echo ") {
            if let Some(end) = v[start..].find(')') {
                let inner = v[start + 7..start + end].trim().to_string();
                v.replace_range(start..start + end + 1, &inner);
            } else {
                break;
            }
        }
    }
    if toggles.ssrf && v.starts_with("http://169.254.") {
        // "Fetches" the internal metadata URL server-side.
        v = "{\"instance-identity\": \"document\"}".to_string();
    }
    if toggles.path_traversal && v.contains("../") {
        // "Reads" the traversed file path.
        v = "root:x:0:0:root:/root:/bin/bash".to_string();
    }
    v
}

/// Output encoding: HTML-escapes markup unless the matching flaw leaves the
/// corresponding pattern raw.
fn render_text(toggles: &VulnToggles, value: &str) -> String {
    let raw_script = toggles.stored_xss && value.contains("<script");
    let raw_markup = toggles.html_injection && value.contains("<h1>");
    if raw_script || raw_markup {
        return value.to_string();
    }
    value.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn arg_str(args: &BTreeMap<String, Value>, name: &str) -> Option<String> {
    args.get(name).and_then(Value::as_str).map(str::to_string)
}

fn sql_tripped(toggles: &VulnToggles, args: &BTreeMap<String, Value>) -> bool {
    toggles.sql_injection
        && args
            .values()
            .filter_map(Value::as_str)
            .any(|s| s.contains("' OR '"))
}

fn execute_root(
    state: &mut MockState,
    toggles: &VulnToggles,
    name: &str,
    args: &BTreeMap<String, Value>,
    selection: &SelectionSet<'_, String>,
    errors: &mut Vec<String>,
) -> Option<Value> {
    if sql_tripped(toggles, args) {
        errors.push("SQL syntax error near \"' OR '1'='1'\" in statement".to_string());
        return None;
    }
    let t = |v: &str| transform_input(toggles, v);
    match name {
        "getUser" => {
            let id = arg_str(args, "userId").unwrap_or_default();
            let user = state.users.iter().find(|u| u.id == id).cloned();
            Some(match user {
                Some(u) => resolve_user(state, toggles, &u, selection, 0, errors),
                None => Value::Null,
            })
        }
        "getWallet" => {
            let id = arg_str(args, "walletId").unwrap_or_default();
            let w = state.wallets.iter().find(|w| w.id == id).cloned();
            Some(match w {
                Some(w) => resolve_wallet(state, toggles, &w, selection, 0, errors),
                None => Value::Null,
            })
        }
        "listCurrencies" => {
            let all: Vec<CurrencyRec> = state.currencies.clone();
            Some(Value::Array(
                all.iter()
                    .map(|c| resolve_currency(toggles, c, selection, errors))
                    .collect(),
            ))
        }
        "createUser" => {
            let role_id = arg_str(args, "roleTitle").map(|title| {
                let id = state.next_id("r");
                state.roles.push(RoleRec { id: id.clone(), title: t(&title) });
                id
            });
            let rec = UserRec {
                id: state.next_id("u"),
                name: t(&arg_str(args, "name").unwrap_or_default()),
                role_id,
            };
            state.users.push(rec.clone());
            Some(resolve_user(state, toggles, &rec, selection, 0, errors))
        }
        "createCurrency" => {
            let rec = CurrencyRec {
                id: state.next_id("c"),
                abbreviation: t(&arg_str(args, "abbreviation").unwrap_or_default()),
                symbol: t(&arg_str(args, "symbol").unwrap_or_default()),
                country: arg_str(args, "country").map(|c| t(&c)),
            };
            state.currencies.push(rec.clone());
            Some(resolve_currency(toggles, &rec, selection, errors))
        }
        "createWallet" => {
            let currency_id = arg_str(args, "currencyId").unwrap_or_default();
            if !state.currencies.iter().any(|c| c.id == currency_id) {
                errors.push(format!("unknown currency {currency_id:?}"));
                return None;
            }
            let user_id =
                arg_str(args, "userId").filter(|id| state.users.iter().any(|u| &u.id == id));
            let rec = WalletRec {
                id: state.next_id("w"),
                balance: args.get("balance").and_then(Value::as_f64),
                user_id,
                currency_id,
            };
            state.wallets.push(rec.clone());
            Some(resolve_wallet(state, toggles, &rec, selection, 0, errors))
        }
        "updateWallet" => {
            let id = arg_str(args, "walletId").unwrap_or_default();
            let balance = args.get("balance").and_then(Value::as_f64);
            let rec = state.wallets.iter_mut().find(|w| w.id == id).map(|w| {
                w.balance = balance;
                w.clone()
            });
            Some(match rec {
                Some(w) => resolve_wallet(state, toggles, &w, selection, 0, errors),
                None => Value::Null,
            })
        }
        "deleteWallet" => {
            let id = arg_str(args, "walletId").unwrap_or_default();
            let before = state.wallets.len();
            state.wallets.retain(|w| w.id != id);
            Some(Value::Bool(state.wallets.len() != before))
        }
        other => {
            errors.push(format!("Cannot query field \"{other}\" on type \"Query\""));
            None
        }
    }
}

/// Validates one selected field name against the fixture type, honoring the
/// hidden-field flaw.
fn check_field(
    toggles: &VulnToggles,
    type_name: &str,
    field: &str,
    errors: &mut Vec<String>,
) -> bool {
    if field == "__typename" {
        return true;
    }
    static SCHEMA: std::sync::OnceLock<crate::schema::SchemaDocument> = std::sync::OnceLock::new();
    let hidden = toggles.hidden_field_enabled && type_name == "Currency" && field == "country";
    let known = SCHEMA
        .get_or_init(fixture_schema)
        .object_fields(type_name)
        .map(|fs| fs.iter().any(|f| f.name == field))
        .unwrap_or(false);
    if hidden || !known {
        errors.push(format!("Cannot query field \"{field}\" on type \"{type_name}\""));
        return false;
    }
    true
}

fn resolve_user(
    state: &MockState,
    toggles: &VulnToggles,
    rec: &UserRec,
    selection: &SelectionSet<'_, String>,
    depth: usize,
    errors: &mut Vec<String>,
) -> Value {
    if depth > 12 {
        return Value::Null;
    }
    let mut out = Map::new();
    for item in &selection.items {
        let Selection::Field(f) = item else { continue };
        if !check_field(toggles, "User", &f.name, errors) {
            continue;
        }
        let key = f.alias.clone().unwrap_or_else(|| f.name.clone());
        let v = match f.name.as_str() {
            "__typename" => json!("User"),
            "id" => json!(rec.id),
            "name" => json!(render_text(toggles, &rec.name)),
            "role" => match rec.role_id.as_ref().and_then(|id| {
                state.roles.iter().find(|r| &r.id == id)
            }) {
                Some(r) => resolve_role(toggles, r, &f.selection_set, errors),
                None => Value::Null,
            },
            "wallets" => Value::Array(
                state
                    .wallets
                    .iter()
                    .filter(|w| w.user_id.as_deref() == Some(&rec.id))
                    .map(|w| resolve_wallet(state, toggles, w, &f.selection_set, depth + 1, errors))
                    .collect(),
            ),
            _ => Value::Null,
        };
        out.insert(key, v);
    }
    Value::Object(out)
}

fn resolve_wallet(
    state: &MockState,
    toggles: &VulnToggles,
    rec: &WalletRec,
    selection: &SelectionSet<'_, String>,
    depth: usize,
    errors: &mut Vec<String>,
) -> Value {
    if depth > 12 {
        return Value::Null;
    }
    let mut out = Map::new();
    for item in &selection.items {
        let Selection::Field(f) = item else { continue };
        if !check_field(toggles, "Wallet", &f.name, errors) {
            continue;
        }
        let key = f.alias.clone().unwrap_or_else(|| f.name.clone());
        let v = match f.name.as_str() {
            "__typename" => json!("Wallet"),
            "id" => json!(rec.id),
            "balance" => rec.balance.map(|b| json!(b)).unwrap_or(Value::Null),
            "user" => match rec.user_id.as_ref().and_then(|id| {
                state.users.iter().find(|u| &u.id == id)
            }) {
                Some(u) => resolve_user(state, toggles, u, &f.selection_set, depth + 1, errors),
                None => Value::Null,
            },
            "currency" => match state.currencies.iter().find(|c| c.id == rec.currency_id) {
                Some(c) => resolve_currency(toggles, c, &f.selection_set, errors),
                None => Value::Null,
            },
            _ => Value::Null,
        };
        out.insert(key, v);
    }
    Value::Object(out)
}

fn resolve_currency(
    toggles: &VulnToggles,
    rec: &CurrencyRec,
    selection: &SelectionSet<'_, String>,
    errors: &mut Vec<String>,
) -> Value {
    let mut out = Map::new();
    for item in &selection.items {
        let Selection::Field(f) = item else { continue };
        if !check_field(toggles, "Currency", &f.name, errors) {
            continue;
        }
        let key = f.alias.clone().unwrap_or_else(|| f.name.clone());
        let v = match f.name.as_str() {
            "__typename" => json!("Currency"),
            "id" => json!(rec.id),
            "abbreviation" => json!(render_text(toggles, &rec.abbreviation)),
            "symbol" => json!(render_text(toggles, &rec.symbol)),
            "country" => rec
                .country
                .as_ref()
                .map(|c| json!(render_text(toggles, c)))
                .unwrap_or(Value::Null),
            _ => Value::Null,
        };
        out.insert(key, v);
    }
    Value::Object(out)
}

fn resolve_role(
    toggles: &VulnToggles,
    rec: &RoleRec,
    selection: &SelectionSet<'_, String>,
    errors: &mut Vec<String>,
) -> Value {
    let mut out = Map::new();
    for item in &selection.items {
        let Selection::Field(f) = item else { continue };
        if !check_field(toggles, "Role", &f.name, errors) {
            continue;
        }
        let key = f.alias.clone().unwrap_or_else(|| f.name.clone());
        let v = match f.name.as_str() {
            "__typename" => json!("Role"),
            "id" => json!(rec.id),
            "title" => json!(render_text(toggles, &rec.title)),
            _ => Value::Null,
        };
        out.insert(key, v);
    }
    Value::Object(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secure() -> VulnToggles {
        VulnToggles::default()
    }

    fn run(state: &mut MockState, toggles: &VulnToggles, query: &str, vars: Value) -> MockResponse {
        let body = json!({"query": query, "variables": vars}).to_string();
        handle_request(state, toggles, &body)
    }

    #[test]
    fn create_and_get_wallet_chain() {
        let mut st = MockState::new();
        let tg = secure();
        let r = run(
            &mut st, &tg,
            "mutation createCurrency($abbreviation: String!, $symbol: String!) { createCurrency(abbreviation: $abbreviation, symbol: $symbol) { id } }",
            json!({"abbreviation": "USD", "symbol": "$"}),
        );
        assert_eq!(r.status, 200);
        assert_eq!(r.body.pointer("/data/createCurrency/id"), Some(&json!("c1")));
        let r = run(
            &mut st, &tg,
            "mutation createWallet($currencyId: ID!) { createWallet(currencyId: $currencyId) { id } }",
            json!({"currencyId": "c1"}),
        );
        assert_eq!(r.body.pointer("/data/createWallet/id"), Some(&json!("w1")));
        let r = run(
            &mut st, &tg,
            "query getWallet($walletId: ID!) { getWallet(walletId: $walletId) { id currency { abbreviation } } }",
            json!({"walletId": "w1"}),
        );
        assert_eq!(
            r.body.pointer("/data/getWallet/currency/abbreviation"),
            Some(&json!("USD"))
        );
    }

    #[test]
    fn missing_wallet_is_null_without_errors() {
        let mut st = MockState::new();
        let r = run(
            &mut st, &secure(),
            "query getWallet($walletId: ID!) { getWallet(walletId: $walletId) { id } }",
            json!({"walletId": "nope"}),
        );
        assert_eq!(r.body.pointer("/data/getWallet"), Some(&Value::Null));
        assert!(r.body.get("errors").is_none());
    }

    #[test]
    fn delete_wallet_is_idempotent() {
        let mut st = MockState::new();
        let tg = secure();
        run(&mut st, &tg,
            "mutation createCurrency($a: String!, $s: String!) { createCurrency(abbreviation: $a, symbol: $s) { id } }",
            json!({"a": "EUR", "s": "e"}));
        run(&mut st, &tg,
            "mutation createWallet($c: ID!) { createWallet(currencyId: $c) { id } }",
            json!({"c": "c1"}));
        let del = "mutation deleteWallet($walletId: ID!) { deleteWallet(walletId: $walletId) }";
        let r = run(&mut st, &tg, del, json!({"walletId": "w1"}));
        assert_eq!(r.body.pointer("/data/deleteWallet"), Some(&json!(true)));
        let r = run(&mut st, &tg, del, json!({"walletId": "w1"}));
        assert_eq!(r.body.pointer("/data/deleteWallet"), Some(&json!(false)));
        assert!(r.body.get("errors").is_none());
    }

    #[test]
    fn reset_restarts_id_counters() {
        let mut st = MockState::new();
        let tg = secure();
        let q = "mutation createCurrency($a: String!, $s: String!) { createCurrency(abbreviation: $a, symbol: $s) { id } }";
        run(&mut st, &tg, q, json!({"a": "EUR", "s": "e"}));
        st.reset();
        st.reset(); // idempotent
        let r = run(&mut st, &tg, q, json!({"a": "EUR", "s": "e"}));
        assert_eq!(r.body.pointer("/data/createCurrency/id"), Some(&json!("c1")));
    }

    #[test]
    fn depth_limit_enforced_when_secure() {
        let mut st = MockState::new();
        let mut q = String::from("query d { getUser(userId: \"u1\") ");
        for _ in 0..12 {
            q.push_str("{ wallets { user ");
        }
        q.push_str("{ id }");
        for _ in 0..12 {
            q.push_str(" } }");
        }
        q.push_str(" }");
        let r = run(&mut st, &secure(), &q, json!({}));
        let msg = r.body.pointer("/errors/0/message").unwrap().as_str().unwrap();
        assert!(msg.contains("depth"), "{msg}");
        assert_eq!(r.delay, Duration::ZERO);
        let vulnerable = VulnToggles { deep_recursion: true, ..secure() };
        let r = run(&mut st, &vulnerable, &q, json!({}));
        assert_eq!(r.delay, DOS_SLEEP);
    }

    #[test]
    fn alias_limit_enforced_when_secure() {
        let mut st = MockState::new();
        let aliases: String = (0..20).map(|i| format!("a{i}: listCurrencies {{ id }} ")).collect();
        let q = format!("query a {{ {aliases} }}");
        let r = run(&mut st, &secure(), &q, json!({}));
        let msg = r.body.pointer("/errors/0/message").unwrap().as_str().unwrap();
        assert!(msg.contains("alias"), "{msg}");
    }

    #[test]
    fn batch_rejected_when_secure_accepted_when_vulnerable() {
        let mut st = MockState::new();
        let op = json!({"query": "query q { listCurrencies { id } }", "variables": {}});
        let body = Value::Array(vec![op; 10]).to_string();
        let r = handle_request(&mut st, &secure(), &body);
        assert_eq!(r.status, 400);
        let vulnerable = VulnToggles { batch_query: true, ..secure() };
        let r = handle_request(&mut st, &vulnerable, &body);
        assert_eq!(r.status, 200);
        assert_eq!(r.delay, DOS_SLEEP);
        assert_eq!(r.body.as_array().unwrap().len(), 10);
    }

    #[test]
    fn fragment_cycle_detected() {
        let mut st = MockState::new();
        let q = "query loop { ...F0 } fragment F0 on User { ...F1 } fragment F1 on User { ...F0 }";
        let r = run(&mut st, &secure(), q, json!({}));
        let msg = r.body.pointer("/errors/0/message").unwrap().as_str().unwrap();
        assert!(msg.contains("fragment cycle"), "{msg}");
    }

    #[test]
    fn introspection_gated_by_toggle() {
        let mut st = MockState::new();
        let r = run(&mut st, &secure(), crate::schema::INTROSPECTION_QUERY, json!({}));
        assert!(r.body.pointer("/errors/0/message").is_some());
        let open = VulnToggles { info_disclosure: true, ..secure() };
        let r = run(&mut st, &open, crate::schema::INTROSPECTION_QUERY, json!({}));
        assert!(crate::schema::parse_schema(&r.body).is_ok());
    }

    #[test]
    fn denylist_blocks_plain_but_not_commented() {
        let mut st = MockState::new();
        let tg = VulnToggles { denylist_bypass: true, ..secure() };
        let plain = "query listCurrencies { listCurrencies { id } }";
        let r = run(&mut st, &tg, plain, json!({}));
        assert_eq!(r.status, 403);
        let bypass = "query listCurrencies {\n# probe\nlistCurrencies { id } }";
        let r = run(&mut st, &tg, bypass, json!({}));
        assert_eq!(r.status, 200);
        assert!(r.body.get("errors").is_none());
        // No deny list at all when secure.
        let r = run(&mut st, &secure(), plain, json!({}));
        assert_eq!(r.status, 200);
    }

    #[test]
    fn hidden_field_emits_cannot_query_error() {
        let mut st = MockState::new();
        let tg = VulnToggles { hidden_field_enabled: true, ..secure() };
        run(&mut st, &tg,
            "mutation c($a: String!, $s: String!) { createCurrency(abbreviation: $a, symbol: $s) { id } }",
            json!({"a": "EUR", "s": "e"}));
        let r = run(&mut st, &tg, "query l { listCurrencies { id country } }", json!({}));
        let msg = r.body.pointer("/errors/0/message").unwrap().as_str().unwrap();
        assert_eq!(msg, "Cannot query field \"country\" on type \"Currency\"");
        // Dropping the selector recovers.
        let r = run(&mut st, &tg, "query l { listCurrencies { id } }", json!({}));
        assert!(r.body.get("errors").is_none());
    }

    #[test]
    fn sql_sink_leaks_error_only_when_vulnerable() {
        let q = "mutation c($a: String!, $s: String!) { createCurrency(abbreviation: $a, symbol: $s) { id abbreviation } }";
        let vars = json!({"a": "' OR '1'='1' --", "s": "x"});
        let mut st = MockState::new();
        let r = run(&mut st, &secure(), q, vars.clone());
        assert!(!r.body.to_string().contains("SQL syntax error"));
        let tg = VulnToggles { sql_injection: true, ..secure() };
        let r = run(&mut st, &tg, q, vars);
        assert!(r.body.to_string().contains("SQL syntax error"));
    }

    #[test]
    fn xss_sink_escapes_only_when_secure() {
        let q = "mutation c($name: String!) { createUser(name: $name) { id name } }";
        let canary = "<script>alert('qlx_xss_canary')</script>";
        let vars = json!({"name": canary});
        let mut st = MockState::new();
        let r = run(&mut st, &secure(), q, vars.clone());
        assert!(!r.body.to_string().contains(canary));
        assert!(r.body.to_string().contains("&lt;script&gt;"));
        let tg = VulnToggles { stored_xss: true, ..secure() };
        let r = run(&mut st, &tg, q, vars.clone());
        assert!(r.body.to_string().contains(canary));
        // The HTML flaw alone must not leak the script canary.
        let tg = VulnToggles { html_injection: true, ..secure() };
        let r = run(&mut st, &tg, q, vars);
        assert!(!r.body.to_string().contains(canary));
    }

    #[test]
    fn command_sink_expands_substitution_when_vulnerable() {
        let q = "mutation c($name: String!) { createUser(name: $name) { id name } }";
        let vars = json!({"name": "$(echo qlx_cmd_canary)"});
        let mut st = MockState::new();
        let tg = VulnToggles { os_command_injection: true, ..secure() };
        let r = run(&mut st, &tg, q, vars.clone());
        let text = r.body.to_string();
        assert!(text.contains("qlx_cmd_canary"));
        assert!(!text.contains("$(echo"));
        let r = run(&mut st, &secure(), q, vars);
        assert!(r.body.to_string().contains("$(echo"));
    }

    #[test]
    fn ssrf_and_path_sinks() {
        let q = "mutation c($name: String!) { createUser(name: $name) { id name } }";
        let mut st = MockState::new();
        let tg = VulnToggles { ssrf: true, ..secure() };
        let r = run(&mut st, &tg, q, json!({"name": "http://169.254.169.254/latest/meta-data/"}));
        assert!(r.body.to_string().contains("instance-identity"));
        let tg = VulnToggles { path_traversal: true, ..secure() };
        let r = run(&mut st, &tg, q, json!({"name": "../../../../etc/passwd"}));
        assert!(r.body.to_string().contains("root:x:0:0:"));
        let r = run(&mut st, &secure(), q, json!({"name": "../../../../etc/passwd"}));
        assert!(!r.body.to_string().contains("root:x:0:0:"));
    }
}
