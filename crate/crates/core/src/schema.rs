//! Helpers for validating JSON input files with errors that name the
//! offending location as a JSON pointer.

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pointer}: {message}")]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> SchemaError {
        let pointer = pointer.into();
        SchemaError {
            pointer: if pointer.is_empty() { "/".into() } else { pointer },
            message: message.into(),
        }
    }
}

pub(crate) fn parse_json(text: &str) -> Result<Value, SchemaError> {
    serde_json::from_str(text).map_err(|e| SchemaError::new("", format!("invalid JSON: {e}")))
}

pub(crate) fn object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, SchemaError> {
    v.as_object()
        .ok_or_else(|| SchemaError::new(at, "expected an object"))
}

pub(crate) fn array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array()
        .ok_or_else(|| SchemaError::new(at, "expected an array"))
}

pub(crate) fn string<'a>(v: &'a Value, at: &str) -> Result<&'a str, SchemaError> {
    v.as_str()
        .ok_or_else(|| SchemaError::new(at, "expected a string"))
}

pub(crate) fn field<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    at: &str,
) -> Result<&'a Value, SchemaError> {
    obj.get(key)
        .ok_or_else(|| SchemaError::new(at, format!("missing field `{key}`")))
}

pub(crate) fn child(at: &str, key: impl std::fmt::Display) -> String {
    let key = key.to_string().replace('~', "~0").replace('/', "~1");
    format!("{at}/{key}")
}
