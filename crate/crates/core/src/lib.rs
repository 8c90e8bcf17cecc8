//! Context-aware GraphQL API security testing.
//!
//! The pipeline has two phases. The compile phase fetches a schema over
//! introspection (or loads it from a file), annotates mutations with their
//! actions, infers hard/soft dependencies between objects and operations, and
//! builds a directed dependency graph. The test phase traverses that graph
//! with a multi-source DFS, materializes valid and fuzzed payloads using an
//! objects bucket of IDs and scalars harvested from live responses, and
//! classifies responses into findings and coverage metrics.

pub mod bucket;
pub mod compiler;
pub mod config;
pub mod depgraph;
pub mod detect;
pub mod engine;
pub mod introspect;
pub mod materializer;
pub mod mock;
pub mod report;
pub mod schema;

/// Stable 64-bit FNV-1a hash, hex encoded. Used to key stored payload bodies.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
