//! Interning store for closure environments.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::engine::value::{Structural, Value};

/// Key `γ` of a stored environment tuple; always positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EnvKey(u32);

impl EnvKey {
    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for EnvKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "γ{}", self.0)
    }
}

/// Environment tuples interned up to structural equality.
///
/// Interning works on two levels: each distinct slot value is stored once, and each
/// distinct tuple is stored once as a list of slot references. A tuple therefore costs
/// one item per slot plus the items of slot values not seen before, which is what lets
/// many closures over the same large sequence share a single copy of it.
#[derive(Debug, Default)]
pub struct EnvStore {
    slot_ids: HashMap<Structural, u32>,
    slots: Vec<Value>,
    tuple_ids: HashMap<Vec<u32>, EnvKey>,
    tuples: Vec<Arc<[Value]>>,
    total_items: usize,
}

impl EnvStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot_id(&mut self, v: &Value) -> u32 {
        if let Some(&id) = self.slot_ids.get(&Structural(v.clone())) {
            return id;
        }
        let id = self.slots.len() as u32;
        self.total_items += v.len();
        self.slots.push(v.clone());
        self.slot_ids.insert(Structural(v.clone()), id);
        id
    }

    /// Returns the key of `env`, storing it first if no structurally equal tuple exists.
    pub fn intern(&mut self, env: &[Value]) -> EnvKey {
        self.intern_shared(env).0
    }

    /// Like [`EnvStore::intern`], also returning the stored (shared) tuple.
    pub fn intern_shared(&mut self, env: &[Value]) -> (EnvKey, Arc<[Value]>) {
        let ids: Vec<u32> = env.iter().map(|v| self.slot_id(v)).collect();
        if let Some(&key) = self.tuple_ids.get(&ids) {
            return (key, self.tuples[key.0 as usize - 1].clone());
        }
        let key = EnvKey(self.tuples.len() as u32 + 1);
        let tuple: Arc<[Value]> = ids.iter().map(|&i| self.slots[i as usize].clone()).collect();
        self.total_items += ids.len();
        self.tuples.push(tuple.clone());
        self.tuple_ids.insert(ids, key);
        (key, tuple)
    }

    pub fn get(&self, key: EnvKey) -> Option<&[Value]> {
        self.tuples.get((key.0 as usize).checked_sub(1)?).map(|t| &**t)
    }

    /// Number of stored tuples.
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Items held by the store: distinct slot values plus one reference per tuple slot.
    pub fn total_stored_items(&self) -> usize {
        self.total_items
    }
}
