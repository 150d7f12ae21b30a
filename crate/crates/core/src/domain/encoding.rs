//! Byte-exact encodings used as hash inputs.
//!
//! Two encodings exist. [`canonical_encode`] is a length-prefixed field list
//! used for identifier derivation, where plain concatenation would let
//! `("loanA", "001")` and `("loan", "A001")` collide. [`canonical_json`] is
//! the wire and storage form of every record: object keys sorted, no
//! insignificant whitespace, UTF-8.

use serde::Serialize;
use serde_json::Value;

/// Encodes `fields` behind the domain-separation `tag`.
///
/// Layout: `tag`, then per field `len(name)` (8-byte big-endian), `name`,
/// `len(value)` (8-byte big-endian), `value`.
pub fn canonical_encode(tag: &str, fields: &[(&str, &[u8])]) -> Vec<u8> {
    let cap = tag.len() + fields.iter().map(|(n, v)| 16 + n.len() + v.len()).sum::<usize>();
    let mut out = Vec::with_capacity(cap);
    out.extend_from_slice(tag.as_bytes());
    for (name, value) in fields {
        out.extend_from_slice(&(name.len() as u64).to_be_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.len() as u64).to_be_bytes());
        out.extend_from_slice(value);
    }
    out
}

/// Serializes `value` to canonical JSON bytes.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let tree = serde_json::to_value(value).expect("record types always serialize to JSON");
    canonical_json_value(&tree)
}

/// Canonical bytes of an already-built JSON tree.
pub fn canonical_json_value(value: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(128);
    write_value(value, &mut out);
    out
}

/// Canonical JSON as a `String`.
pub fn canonical_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(canonical_json(value)).expect("serde_json emits UTF-8")
}

fn write_value(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push(b'{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_scalar(&Value::String(key.clone()), out);
                out.push(b':');
                write_value(&map[key], out);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out);
            }
            out.push(b']');
        }
        scalar => write_scalar(scalar, out),
    }
}

fn write_scalar(value: &Value, out: &mut Vec<u8>) {
    serde_json::to_writer(&mut *out, value).expect("writing to a Vec cannot fail");
}
