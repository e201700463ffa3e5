//! Batch front end: job configs, the on-disk series cache and JSON emission.

pub mod cache;
pub mod commands;
pub mod config;

/// Pretty JSON with sorted keys (serde_json maps are ordered by key).
pub fn render(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}
