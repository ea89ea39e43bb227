//! Canonical serialization and digests used to bind logs and reports to
//! their exact inputs.
//!
//! Canonical form: JSON with object keys sorted, no insignificant
//! whitespace, and every non-integer number rendered with 9 significant
//! digits in scientific notation. The digest is SHA-256 over those bytes.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Render a JSON value in canonical form.
pub fn canonical_json(value: &Value) -> String {
    match value {
        Value::Object(map) => {
            let mut pairs: Vec<(&String, &Value)> = map.iter().collect();
            pairs.sort_by_key(|(k, _)| k.as_str());
            let body: Vec<String> = pairs
                .iter()
                .map(|(k, v)| format!("{}:{}", serde_json::to_string(k).unwrap(), canonical_json(v)))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            let body: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", body.join(","))
        }
        Value::Number(n) => {
            if n.is_f64() && n.as_i64().is_none() && n.as_u64().is_none() {
                // 9 significant digits, stable across platforms
                format!("{:.8e}", n.as_f64().unwrap())
            } else {
                n.to_string()
            }
        }
        other => serde_json::to_string(other).unwrap(),
    }
}

/// SHA-256 hex digest over canonicalized bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Canonical digest of any serializable value.
pub fn hash_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_value(value).expect("serializable value");
    config_hash(canonical_json(&json).as_bytes())
}
