use std::fs;
use std::path::Path;

use serde_json::Value;

use super::SessionState;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 2;

/// v1 stored the unmirrored duel list as `preferences` and had no
/// `last_feedback`.
fn migrate_v1(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        if let Some(p) = obj.remove("preferences") {
            obj.entry("duels").or_insert(p);
        }
        obj.entry("last_feedback").or_insert(Value::Null);
        obj.insert("schema_version".into(), Value::from(2));
    }
    v
}

pub fn session_to_json(state: &SessionState) -> Result<String> {
    serde_json::to_string(state).map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn session_from_json(text: &str) -> Result<SessionState> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Corrupt(e.to_string()))?;
    let version = v
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Corrupt("missing schema_version".into()))? as u32;
    let v = match version {
        1 => migrate_v1(v),
        SCHEMA_VERSION => v,
        found if found > SCHEMA_VERSION => return Err(Error::SchemaVersion { found, current: SCHEMA_VERSION }),
        found => return Err(Error::Corrupt(format!("unknown schema version {found}"))),
    };
    let state: SessionState = serde_json::from_value(v).map_err(|e| Error::Corrupt(e.to_string()))?;
    if state.data.x.len() != state.data.y.len() || state.data.x.len() != state.gp.data.len() {
        return Err(Error::Corrupt("dataset and GP are out of sync".into()));
    }
    Ok(state)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_session(state: &SessionState, path: &Path) -> Result<()> {
    let text = session_to_json(state)?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_session(path: &Path) -> Result<SessionState> {
    session_from_json(&fs::read_to_string(path)?)
}
