//! The objects bucket: IDs and interesting scalars harvested from live
//! responses, keyed by object name, with bounded capacity and deterministic
//! lookup strategies.

use indexmap::{IndexMap, IndexSet};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_CAPACITY: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LookupStrategy {
    Latest,
    Random,
}

/// Per-object store of harvested IDs plus a side table of scalar values keyed
/// by bare field name and scalar kind. Insertion order is preserved; each
/// object's ID set evicts oldest-first past `capacity`.
#[derive(Debug, Clone)]
pub struct ObjectsBucket {
    ids: IndexMap<String, IndexSet<String>>,
    scalars: IndexMap<(String, ScalarKind), IndexSet<String>>,
    capacity: usize,
    strategy: LookupStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarKind {
    String,
    Int,
    Float,
    Boolean,
}

impl ObjectsBucket {
    pub fn new(capacity: usize, strategy: LookupStrategy) -> Self {
        ObjectsBucket {
            ids: IndexMap::new(),
            scalars: IndexMap::new(),
            capacity,
            strategy,
        }
    }

    /// Records one harvested ID for an object, evicting the oldest entry when
    /// the per-object set exceeds capacity. Re-inserting an existing ID does
    /// not change its position.
    pub fn put_id(&mut self, object: &str, id: &str) {
        let set = self.ids.entry(object.to_string()).or_default();
        set.insert(id.to_string());
        while set.len() > self.capacity {
            set.shift_remove_index(0);
        }
    }

    /// Records one scalar field value seen in a response.
    pub fn put_scalar(&mut self, field: &str, value: &Value) {
        let (kind, text) = match value {
            Value::String(s) => (ScalarKind::String, s.clone()),
            Value::Bool(b) => (ScalarKind::Boolean, b.to_string()),
            Value::Number(n) if n.is_i64() || n.is_u64() => (ScalarKind::Int, n.to_string()),
            Value::Number(n) => (ScalarKind::Float, n.to_string()),
            _ => return,
        };
        let set = self.scalars.entry((field.to_string(), kind)).or_default();
        set.insert(text);
        while set.len() > self.capacity {
            set.shift_remove_index(0);
        }
    }

    /// Picks an ID for an object by the configured strategy; None when the
    /// object has never been harvested.
    pub fn lookup_id(&self, object: &str, rng: &mut impl Rng) -> Option<String> {
        let set = self.ids.get(object)?;
        if set.is_empty() {
            return None;
        }
        let idx = match self.strategy {
            LookupStrategy::Latest => set.len() - 1,
            LookupStrategy::Random => rng.gen_range(0..set.len()),
        };
        set.get_index(idx).cloned()
    }

    /// Picks a previously seen scalar for the bare field name and kind.
    pub fn lookup_scalar(
        &self,
        field: &str,
        kind: ScalarKind,
        rng: &mut impl Rng,
    ) -> Option<String> {
        let set = self.scalars.get(&(field.to_string(), kind))?;
        if set.is_empty() {
            return None;
        }
        let idx = match self.strategy {
            LookupStrategy::Latest => set.len() - 1,
            LookupStrategy::Random => rng.gen_range(0..set.len()),
        };
        set.get_index(idx).cloned()
    }

    pub fn has_object(&self, object: &str) -> bool {
        self.ids.get(object).map(|s| !s.is_empty()).unwrap_or(false)
    }

    pub fn id_count(&self, object: &str) -> usize {
        self.ids.get(object).map(|s| s.len()).unwrap_or(0)
    }

    pub fn objects(&self) -> impl Iterator<Item = &String> {
        self.ids.keys()
    }
}

impl Default for ObjectsBucket {
    fn default() -> Self {
        ObjectsBucket::new(DEFAULT_CAPACITY, LookupStrategy::Latest)
    }
}
