//! The nested JSON document describing a parsing.
//!
//! Leaves are `{"option": <label>}` and internal nodes are
//! `{"left": <subtree>, "right": <subtree>}`. A `"children": [a, b]` array is
//! accepted as an alternative spelling of an internal node.

use std::fmt;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Label attached to an option leaf.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OptionLabel {
    Index(u64),
    Name(String),
}

impl fmt::Display for OptionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptionLabel::Index(i) => write!(f, "{i}"),
            OptionLabel::Name(s) => f.write_str(s),
        }
    }
}

impl From<&str> for OptionLabel {
    fn from(s: &str) -> Self {
        OptionLabel::Name(s.to_owned())
    }
}

impl From<u64> for OptionLabel {
    fn from(i: u64) -> Self {
        OptionLabel::Index(i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeSpec {
    Leaf(OptionLabel),
    Node(Box<TreeSpec>, Box<TreeSpec>),
}

impl TreeSpec {
    pub fn leaf(label: impl Into<OptionLabel>) -> Self {
        TreeSpec::Leaf(label.into())
    }

    pub fn node(left: TreeSpec, right: TreeSpec) -> Self {
        TreeSpec::Node(Box::new(left), Box::new(right))
    }

    /// Balanced parsing of `n` options labelled `1..=n`, splitting each
    /// option range into a left half of size `ceil(k/2)`.
    pub fn balanced(n: usize) -> Self {
        fn build(lo: u64, hi: u64) -> TreeSpec {
            if hi - lo == 1 {
                return TreeSpec::leaf(lo);
            }
            let mid = lo + (hi - lo).div_ceil(2);
            TreeSpec::node(build(lo, mid), build(mid, hi))
        }
        assert!(n >= 1);
        build(1, n as u64 + 1)
    }

    /// Left-leaning caterpillar `(((1,2),3),…,n)`.
    pub fn caterpillar(n: usize) -> Self {
        assert!(n >= 1);
        let mut acc = TreeSpec::leaf(1u64);
        for i in 2..=n as u64 {
            acc = TreeSpec::node(acc, TreeSpec::leaf(i));
        }
        acc
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeSpec::Leaf(_) => 1,
            TreeSpec::Node(l, r) => l.n_leaves() + r.n_leaves(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        parse_value(value, "root")
    }

    pub fn to_value(&self) -> Value {
        match self {
            TreeSpec::Leaf(OptionLabel::Index(i)) => json!({ "option": i }),
            TreeSpec::Leaf(OptionLabel::Name(s)) => json!({ "option": s }),
            TreeSpec::Node(l, r) => json!({ "left": l.to_value(), "right": r.to_value() }),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("tree documents always serialize")
    }
}

fn parse_value(value: &Value, path: &str) -> Result<TreeSpec> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::MalformedTree(format!("{path}: expected a JSON object")))?;
    if let Some(label) = obj.get("option") {
        if obj.contains_key("left") || obj.contains_key("right") || obj.contains_key("children") {
            return Err(Error::MalformedTree(format!(
                "{path}: a node cannot be both a leaf and internal"
            )));
        }
        return parse_label(label, path).map(TreeSpec::Leaf);
    }
    if let Some(children) = obj.get("children") {
        let arr = children
            .as_array()
            .ok_or_else(|| Error::MalformedTree(format!("{path}.children: expected an array")))?;
        if arr.len() != 2 {
            return Err(Error::NotProperBinary { path: path.to_owned(), found: arr.len() });
        }
        let left = parse_value(&arr[0], &format!("{path}.children[0]"))?;
        let right = parse_value(&arr[1], &format!("{path}.children[1]"))?;
        return Ok(TreeSpec::node(left, right));
    }
    internal_from_map(obj, path)
}

fn internal_from_map(obj: &Map<String, Value>, path: &str) -> Result<TreeSpec> {
    match (obj.get("left"), obj.get("right")) {
        (Some(l), Some(r)) => {
            let left = parse_value(l, &format!("{path}.left"))?;
            let right = parse_value(r, &format!("{path}.right"))?;
            Ok(TreeSpec::node(left, right))
        }
        (None, None) => Err(Error::MalformedTree(format!(
            "{path}: expected either `option` or `left`/`right`"
        ))),
        _ => Err(Error::NotProperBinary { path: path.to_owned(), found: 1 }),
    }
}

fn parse_label(value: &Value, path: &str) -> Result<OptionLabel> {
    match value {
        Value::String(s) => Ok(OptionLabel::Name(s.clone())),
        Value::Number(n) => n.as_u64().map(OptionLabel::Index).ok_or_else(|| {
            Error::MalformedTree(format!("{path}: numeric labels must be non-negative integers"))
        }),
        _ => Err(Error::MalformedTree(format!("{path}: option label must be a string or integer"))),
    }
}
