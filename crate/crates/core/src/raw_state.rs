//! The untyped bundle an interrupting agent hands out of the simulator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Absent,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<RawValue>),
}

impl RawValue {
    pub fn as_int(&self) -> Option<i64> {
        match *self {
            RawValue::Int(v) => Some(v),
            _ => None,
        }
    }

    /// Integers widen to floats; absent stays absent.
    pub fn as_float(&self) -> Option<f64> {
        match *self {
            RawValue::Float(v) => Some(v),
            RawValue::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[RawValue]> {
        match self {
            RawValue::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, RawValue::Absent)
    }
}

impl From<i64> for RawValue {
    fn from(v: i64) -> Self {
        RawValue::Int(v)
    }
}

impl From<f64> for RawValue {
    fn from(v: f64) -> Self {
        RawValue::Float(v)
    }
}

impl From<bool> for RawValue {
    fn from(v: bool) -> Self {
        RawValue::Bool(v)
    }
}

impl<T: Into<RawValue>> From<Option<T>> for RawValue {
    fn from(v: Option<T>) -> Self {
        v.map_or(RawValue::Absent, Into::into)
    }
}

impl<T: Into<RawValue>> From<Vec<T>> for RawValue {
    fn from(v: Vec<T>) -> Self {
        RawValue::List(v.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RawStateError {
    #[error("raw state is missing field `{0}`")]
    Missing(String),
    #[error("raw state field `{field}` is not {expected}")]
    WrongType { field: String, expected: &'static str },
}

/// Named values keyed by field name. Ordered so dumps are reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawState {
    fields: BTreeMap<String, RawValue>,
}

impl RawState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<RawValue>) -> &mut Self {
        self.fields.insert(key.into(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&RawValue> {
        self.fields.get(key)
    }

    pub fn require(&self, key: &str) -> Result<&RawValue, RawStateError> {
        self.get(key).ok_or_else(|| RawStateError::Missing(key.to_owned()))
    }

    pub fn int(&self, key: &str) -> Result<i64, RawStateError> {
        self.require(key)?.as_int().ok_or_else(|| wrong(key, "an integer"))
    }

    /// `Ok(None)` when the field is present but `Absent`.
    pub fn opt_int(&self, key: &str) -> Result<Option<i64>, RawStateError> {
        match self.require(key)? {
            RawValue::Absent => Ok(None),
            v => v.as_int().map(Some).ok_or_else(|| wrong(key, "an integer")),
        }
    }

    pub fn float(&self, key: &str) -> Result<f64, RawStateError> {
        self.require(key)?.as_float().ok_or_else(|| wrong(key, "a number"))
    }

    pub fn bool(&self, key: &str) -> Result<bool, RawStateError> {
        match self.require(key)? {
            RawValue::Bool(b) => Ok(*b),
            _ => Err(wrong(key, "a boolean")),
        }
    }

    pub fn list(&self, key: &str) -> Result<&[RawValue], RawStateError> {
        self.require(key)?.as_list().ok_or_else(|| wrong(key, "a list"))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.fields.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

fn wrong(field: &str, expected: &'static str) -> RawStateError {
    RawStateError::WrongType {
        field: field.to_owned(),
        expected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typed_access() {
        let mut raw = RawState::new();
        raw.insert("cash", 100i64)
            .insert("mid", 100.5)
            .insert("last", None::<i64>)
            .insert("mids", vec![Some(1.0), None]);
        assert_eq!(raw.int("cash"), Ok(100));
        assert_eq!(raw.float("cash"), Ok(100.0));
        assert_eq!(raw.float("mid"), Ok(100.5));
        assert_eq!(raw.opt_int("last"), Ok(None));
        assert_eq!(raw.list("mids").unwrap()[1], RawValue::Absent);
        assert_eq!(raw.int("nope"), Err(RawStateError::Missing("nope".into())));
        assert!(matches!(raw.int("mid"), Err(RawStateError::WrongType { .. })));
    }
}
