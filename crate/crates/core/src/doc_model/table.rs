//! Relational table ingestion from a JSON array of flat objects.
//!
//! The schema is the lexicographically sorted union of all row keys. `null`
//! maps to a missing value, arrays to multi-valued attributes, scalars to
//! single values. Tuple ids come from an `id` key when present, else the row
//! index.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{AttrValue, Schema, Table, Tuple};
use crate::error::{Error, Result};

fn scalar_to_string(v: &Value, context: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(Error::Table(format!("{context}: expected scalar, got {v}"))),
    }
}

fn convert_value(v: &Value, context: &str) -> Result<AttrValue> {
    match v {
        Value::Null => Ok(AttrValue::Missing),
        Value::Array(items) => {
            if items.is_empty() {
                return Ok(AttrValue::Missing);
            }
            let vals = items
                .iter()
                .map(|item| scalar_to_string(item, context))
                .collect::<Result<Vec<_>>>()?;
            Ok(AttrValue::Multi(vals))
        }
        Value::Object(_) => Err(Error::Table(format!("{context}: nested objects not supported"))),
        scalar => Ok(AttrValue::Single(scalar_to_string(scalar, context)?)),
    }
}

/// Load a table from JSON bytes. See module docs for the mapping rules.
pub fn load_table(json_bytes: &[u8]) -> Result<Table> {
    let root: Value = serde_json::from_slice(json_bytes)?;
    let rows = match root {
        Value::Array(rows) => rows,
        other => {
            return Err(Error::Table(format!(
                "table root must be a JSON array, got {}",
                type_name(&other)
            )))
        }
    };
    if rows.is_empty() {
        return Err(Error::Table("empty table: cannot infer a schema from zero rows".into()));
    }

    let mut keys = BTreeSet::new();
    let mut objects = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        let obj = row
            .as_object()
            .ok_or_else(|| Error::Table(format!("row {idx} is not a JSON object")))?;
        keys.extend(obj.keys().cloned());
        objects.push(obj);
    }
    let schema = Schema::new(keys.into_iter().collect())?;

    let mut seen_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut tuples = Vec::with_capacity(objects.len());
    for (idx, obj) in objects.iter().enumerate() {
        let id = match obj.get("id") {
            Some(v) => scalar_to_string(v, &format!("row {idx} field \"id\""))?,
            None => idx.to_string(),
        };
        if let Some(prev) = seen_ids.insert(id.clone(), idx) {
            return Err(Error::Table(format!(
                "duplicate tuple id {id:?} (rows {prev} and {idx})"
            )));
        }
        let values = schema
            .attributes()
            .iter()
            .map(|attr| match obj.get(attr) {
                Some(v) => convert_value(v, &format!("row {idx} field {attr:?}")),
                None => Ok(AttrValue::Missing),
            })
            .collect::<Result<Vec<_>>>()?;
        tuples.push(Tuple { id, values });
    }
    Table::new(schema, tuples)
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
