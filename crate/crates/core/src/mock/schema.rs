//! The wallet fixture schema served by the mock target: User, Wallet,
//! Currency, Role plus the eight operations the acceptance suite exercises.

use crate::schema::{serialize_schema, ArgDef, FieldDef, SchemaDocument, TypeKind, TypeRef};
use serde_json::Value;

fn scalar(name: &str) -> TypeRef {
    TypeRef::named(TypeKind::Scalar, name)
}

fn object(name: &str) -> TypeRef {
    TypeRef::named(TypeKind::Object, name)
}

fn req(inner: TypeRef) -> TypeRef {
    TypeRef::non_null(inner)
}

fn arg(name: &str, ty: TypeRef) -> ArgDef {
    ArgDef { name: name.to_string(), ty, default_value: None, description: None }
}

fn field(name: &str, args: Vec<ArgDef>, ty: TypeRef) -> FieldDef {
    FieldDef { name: name.to_string(), args, ty, description: None, is_deprecated: false }
}

/// The fixture schema as a parsed document.
pub fn fixture_schema() -> SchemaDocument {
    let mut doc = SchemaDocument::default();

    doc.query_fields = vec![
        field("getUser", vec![arg("userId", req(scalar("ID")))], object("User")),
        field("getWallet", vec![arg("walletId", req(scalar("ID")))], object("Wallet")),
        field("listCurrencies", vec![], TypeRef::list(object("Currency"))),
    ];
    doc.mutation_fields = vec![
        field(
            "createUser",
            vec![arg("name", req(scalar("String"))), arg("roleTitle", scalar("String"))],
            object("User"),
        ),
        field(
            "createCurrency",
            vec![
                arg("abbreviation", req(scalar("String"))),
                arg("symbol", req(scalar("String"))),
                arg("country", scalar("String")),
            ],
            object("Currency"),
        ),
        field(
            "createWallet",
            vec![
                arg("currencyId", req(scalar("ID"))),
                arg("userId", scalar("ID")),
                arg("balance", scalar("Float")),
            ],
            object("Wallet"),
        ),
        field(
            "updateWallet",
            vec![arg("walletId", req(scalar("ID"))), arg("balance", req(scalar("Float")))],
            object("Wallet"),
        ),
        field("deleteWallet", vec![arg("walletId", req(scalar("ID")))], scalar("Boolean")),
    ];

    doc.object_types.insert(
        "User".to_string(),
        vec![
            field("id", vec![], req(scalar("ID"))),
            field("name", vec![], scalar("String")),
            field("role", vec![], object("Role")),
            field("wallets", vec![], TypeRef::list(req(object("Wallet")))),
        ],
    );
    doc.object_types.insert(
        "Wallet".to_string(),
        vec![
            field("id", vec![], req(scalar("ID"))),
            field("balance", vec![], scalar("Float")),
            field("user", vec![], object("User")),
            field("currency", vec![], req(object("Currency"))),
        ],
    );
    doc.object_types.insert(
        "Currency".to_string(),
        vec![
            field("id", vec![], req(scalar("ID"))),
            field("abbreviation", vec![], scalar("String")),
            field("symbol", vec![], scalar("String")),
            field("country", vec![], scalar("String")),
        ],
    );
    doc.object_types.insert(
        "Role".to_string(),
        vec![
            field("id", vec![], req(scalar("ID"))),
            field("title", vec![], scalar("String")),
        ],
    );
    for s in ["ID", "String", "Float", "Boolean"] {
        doc.scalar_names.insert(s.to_string());
    }
    doc
}

/// The fixture schema as a full introspection response, as served to clients
/// and writable to a schema file.
pub fn fixture_schema_document() -> Value {
    serialize_schema(&fixture_schema())
}
