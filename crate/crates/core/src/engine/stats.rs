use serde::Serialize;

/// Counters collected during one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunStats {
    /// Calls through a dispatcher (target, lowered) or dynamic calls (source).
    pub dispatched_calls: u64,
    pub static_calls: u64,
    pub closures_built: u64,
    /// Element and text nodes constructed, copies included.
    pub nodes_built: u64,
    pub env_items_stored: u64,
    pub max_closure_depth: u64,
}

impl RunStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
