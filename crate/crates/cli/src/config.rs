//! Optional JSON config file support.
//!
//! A config file holds the same keys as the long flags of a subcommand
//! (`{"total": 500, "seed": 3}`), or a section per subcommand
//! (`{"sample": {"total": 500}}`). Positional inputs use their value name
//! as the key. Values given on the command line win.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::CliError;

/// Reads `path` and returns the object that applies to `command`.
pub fn load_section(path: &Path, command: &str) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage(format!(
            "config {}: expected a JSON object",
            path.display()
        )));
    };
    match map.get(command) {
        Some(Value::Object(section)) => Ok(Value::Object(section.clone())),
        _ => Ok(Value::Object(map)),
    }
}

pub fn parse_section<T: DeserializeOwned>(value: Value, path: &Path) -> Result<T, CliError> {
    serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Fills every `None` field of `self` from another instance.
pub trait Merge {
    fn merge(self, fallback: Self) -> Self;
}

macro_rules! impl_merge {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::config::Merge for $ty {
            fn merge(self, fallback: Self) -> Self {
                Self { $($field: $crate::config::pick(self.$field, fallback.$field)),* }
            }
        }
    };
}
pub(crate) use impl_merge;

/// Option fields take the first present value; vectors take the first
/// non-empty one.
pub trait Pick {
    fn pick(first: Self, second: Self) -> Self;
}

impl<T> Pick for Option<T> {
    fn pick(first: Self, second: Self) -> Self {
        first.or(second)
    }
}

impl<T> Pick for Vec<T> {
    fn pick(first: Self, second: Self) -> Self {
        if first.is_empty() {
            second
        } else {
            first
        }
    }
}

pub fn pick<T: Pick>(first: T, second: T) -> T {
    T::pick(first, second)
}
