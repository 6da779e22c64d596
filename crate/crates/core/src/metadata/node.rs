use std::fmt;

use indexmap::IndexMap;
use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};

use super::MetadataError;

/// One node of a metadata tree. Mappings keep their source field order.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Null,
    Bool(bool),
    Integer(i64),
    Real(f64),
    String(String),
    List(Vec<Node>),
    Map(IndexMap<String, Node>),
}

impl Node {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Node::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&IndexMap<String, Node>> {
        match self {
            Node::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Node]> {
        match self {
            Node::List(l) => Some(l),
            _ => None,
        }
    }

    /// Numeric value of an integer or real node.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Node::Integer(i) => Some(*i as f64),
            Node::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// True when a mapping appears anywhere below (or at) this node.
    pub fn contains_map(&self) -> bool {
        match self {
            Node::Map(_) => true,
            Node::List(items) => items.iter().any(Node::contains_map),
            _ => false,
        }
    }

    /// Integral reals become integers so that `44100` stays `44100`.
    pub fn number(v: f64) -> Node {
        if v.fract() == 0.0 && v.abs() < 9.0e15 {
            Node::Integer(v as i64)
        } else {
            Node::Real(v)
        }
    }

    pub fn strings<I, S>(items: I) -> Node
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Node::List(items.into_iter().map(|s| Node::String(s.into())).collect())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            Node::Null => Value::Null,
            Node::Bool(b) => Value::Bool(*b),
            Node::Integer(i) => Value::from(*i),
            Node::Real(r) => serde_json::Number::from_f64(*r).map_or(Value::Null, Value::Number),
            Node::String(s) => Value::String(s.clone()),
            Node::List(l) => Value::Array(l.iter().map(Node::to_json_value).collect()),
            Node::Map(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), v.to_json_value())).collect()),
        }
    }

    /// Compact single-line JSON text.
    pub fn to_compact_json(&self) -> String {
        let mut out = String::new();
        write_compact(self, &mut out);
        out
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_compact_json())
    }
}

struct NodeVisitor;

impl<'de> Visitor<'de> for NodeVisitor {
    type Value = Node;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<Node, E> {
        Ok(Node::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<Node, E> {
        Ok(Node::Integer(v))
    }

    fn visit_u64<E>(self, v: u64) -> Result<Node, E> {
        Ok(i64::try_from(v).map_or(Node::Real(v as f64), Node::Integer))
    }

    fn visit_f64<E>(self, v: f64) -> Result<Node, E> {
        Ok(Node::Real(v))
    }

    fn visit_str<E>(self, v: &str) -> Result<Node, E> {
        Ok(Node::String(v.to_string()))
    }

    fn visit_string<E>(self, v: String) -> Result<Node, E> {
        Ok(Node::String(v))
    }

    fn visit_unit<E>(self) -> Result<Node, E> {
        Ok(Node::Null)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Node, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element()? {
            items.push(item);
        }
        Ok(Node::List(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Node, A::Error> {
        let mut map = IndexMap::new();
        while let Some(key) = access.next_key::<String>()? {
            if map.contains_key(&key) {
                return Err(de::Error::custom(format!("duplicate field {key:?}")));
            }
            let value = access.next_value()?;
            map.insert(key, value);
        }
        Ok(Node::Map(map))
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(NodeVisitor)
    }
}

/// A parsed metadata file. The root is always a mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataDocument {
    root: IndexMap<String, Node>,
}

impl MetadataDocument {
    pub fn new(root: IndexMap<String, Node>) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &IndexMap<String, Node> {
        &self.root
    }

    pub fn into_root(self) -> IndexMap<String, Node> {
        self.root
    }

    pub fn to_json_text(&self) -> String {
        emit(&Node::Map(self.root.clone()), DEFAULT_INDENT)
    }
}

/// Parses UTF-8 JSON text. Duplicate field names inside one mapping are
/// rejected; integers stay integers.
pub fn parse_metadata(bytes: &[u8]) -> Result<MetadataDocument, MetadataError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MetadataError::Encoding { offset: e.valid_up_to() })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let node: Node =
        serde_json::from_str(text).map_err(|e| MetadataError::Syntax { line: e.line(), column: e.column(), message: e.to_string() })?;
    match node {
        Node::Map(root) => Ok(MetadataDocument { root }),
        _ => Err(MetadataError::RootNotMapping),
    }
}

pub const DEFAULT_INDENT: usize = 3;

fn write_scalar(node: &Node, out: &mut String) {
    match node {
        Node::Null => out.push_str("null"),
        Node::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Node::Integer(i) => out.push_str(&i.to_string()),
        // Non-finite reals are rejected before emission.
        Node::Real(r) => out.push_str(&serde_json::to_string(r).unwrap_or_else(|_| "null".into())),
        Node::String(s) => out.push_str(&serde_json::to_string(s).expect("string serialization")),
        Node::List(_) | Node::Map(_) => unreachable!(),
    }
}

fn write_compact(node: &Node, out: &mut String) {
    match node {
        Node::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_compact(item, out);
            }
            out.push(']');
        }
        Node::Map(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&serde_json::to_string(k).expect("string serialization"));
                out.push_str(": ");
                write_compact(v, out);
            }
            out.push('}');
        }
        scalar => write_scalar(scalar, out),
    }
}

fn write_pretty(node: &Node, indent: usize, depth: usize, out: &mut String) {
    let pad = |d: usize, out: &mut String| out.extend(std::iter::repeat_n(' ', indent * d));
    match node {
        Node::Map(map) if map.is_empty() => out.push_str("{}"),
        Node::Map(map) => {
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                pad(depth + 1, out);
                out.push_str(&serde_json::to_string(k).expect("string serialization"));
                out.push_str(": ");
                write_pretty(v, indent, depth + 1, out);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(depth, out);
            out.push('}');
        }
        // lists of scalars stay on one line, like ["X", "Y", "Z"]
        Node::List(_) if !node.contains_map() => write_compact(node, out),
        Node::List(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(depth + 1, out);
                write_pretty(item, indent, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(depth, out);
            out.push(']');
        }
        scalar => write_scalar(scalar, out),
    }
}

/// Pretty JSON text with `indent` spaces per level and a trailing newline.
pub fn emit(node: &Node, indent: usize) -> String {
    let mut out = String::new();
    write_pretty(node, indent, 0, &mut out);
    out.push('\n');
    out
}
