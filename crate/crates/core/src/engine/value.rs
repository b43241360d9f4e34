//! Runtime items, flat item sequences, structural equality and the canonical text form.

use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::ops::Deref;
use std::sync::Arc;

use crate::represent::EnvKey;
use crate::syntax::{Expr, Label, Name};

use super::env::Env;

#[derive(Debug)]
pub struct Node {
    /// Fresh for every constructed node, copies included.
    pub id: u64,
    pub kind: NodeKind,
    /// Nesting depth of label-tagged elements in this subtree.
    pub label_depth: usize,
}

#[derive(Debug)]
pub enum NodeKind {
    Element { tag: Name, children: Vec<Arc<Node>> },
    Text(Arc<str>),
}

impl Node {
    pub fn tag(&self) -> Option<&Name> {
        match &self.kind {
            NodeKind::Element { tag, .. } => Some(tag),
            NodeKind::Text(_) => None,
        }
    }

    pub fn children(&self) -> &[Arc<Node>] {
        match &self.kind {
            NodeKind::Element { children, .. } => children,
            NodeKind::Text(_) => &[],
        }
    }

    /// Concatenated text of all descendant text nodes.
    pub fn string_value(&self) -> String {
        let mut out = String::new();
        self.push_text(&mut out);
        out
    }

    fn push_text(&self, out: &mut String) {
        match &self.kind {
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Element { children, .. } => children.iter().for_each(|c| c.push_text(out)),
        }
    }

    /// Number of element and text nodes in this subtree.
    pub fn count(&self) -> usize {
        1 + self.children().iter().map(|c| c.count()).sum::<usize>()
    }
}

/// Environment of a target-engine closure.
#[derive(Debug, Clone)]
pub enum ClosureEnv {
    /// Contents kept directly with the closure.
    Inline(Arc<[Value]>),
    /// Contents interned in the environment store under `key`; `slots` is the shared stored tuple.
    Stored { key: EnvKey, slots: Arc<[Value]> },
}

impl ClosureEnv {
    pub fn slots(&self) -> &[Value] {
        match self {
            ClosureEnv::Inline(s) => s,
            ClosureEnv::Stored { slots, .. } => slots,
        }
    }
}

#[derive(Debug)]
pub struct ClosureVal {
    pub label: Label,
    pub env: ClosureEnv,
    /// Nesting depth: 1 plus the deepest closure held in the environment.
    pub depth: usize,
}

/// A first-class function value of the source engine.
pub enum FunctionVal {
    Literal { params: Vec<Name>, body: Arc<Expr>, env: Env },
    Named { name: Name, arity: usize },
}

impl FunctionVal {
    pub fn arity(&self) -> usize {
        match self {
            FunctionVal::Literal { params, .. } => params.len(),
            FunctionVal::Named { arity, .. } => *arity,
        }
    }
}

impl fmt::Debug for FunctionVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionVal::Literal { params, .. } => write!(f, "function#{}", params.len()),
            FunctionVal::Named { name, arity } => write!(f, "{name}#{arity}"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Item {
    Int(i64),
    Str(Arc<str>),
    Bool(bool),
    Node(Arc<Node>),
    Closure(Arc<ClosureVal>),
    Function(Arc<FunctionVal>),
}

impl Item {
    pub fn str(s: &str) -> Item {
        Item::Str(Arc::from(s))
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Item::Int(_) | Item::Str(_) | Item::Bool(_))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Item::Int(_) => "integer",
            Item::Str(_) => "string",
            Item::Bool(_) => "boolean",
            Item::Node(n) if n.tag().is_some() => "element",
            Item::Node(_) => "text",
            Item::Closure(_) => "closure",
            Item::Function(_) => "function",
        }
    }
}

/// A flat sequence of items.
#[derive(Debug, Clone)]
pub struct Value(Arc<[Item]>);

impl Value {
    pub fn empty() -> Value {
        Value(Arc::from(Vec::new()))
    }

    pub fn one(item: Item) -> Value {
        Value(Arc::from(vec![item]))
    }

    pub fn int(n: i64) -> Value {
        Value::one(Item::Int(n))
    }

    pub fn bool(b: bool) -> Value {
        Value::one(Item::Bool(b))
    }

    pub fn str(s: &str) -> Value {
        Value::one(Item::str(s))
    }

    pub fn items(&self) -> &[Item] {
        &self.0
    }

    /// Concatenation; sequences never nest.
    pub fn concat(parts: Vec<Value>) -> Value {
        match parts.len() {
            0 => Value::empty(),
            1 => parts.into_iter().next().unwrap(),
            _ => parts.iter().flat_map(|p| p.iter().cloned()).collect(),
        }
    }
}

impl Deref for Value {
    type Target = [Item];

    fn deref(&self) -> &[Item] {
        &self.0
    }
}

impl From<Vec<Item>> for Value {
    fn from(items: Vec<Item>) -> Value {
        Value(Arc::from(items))
    }
}

impl FromIterator<Item> for Value {
    fn from_iter<I: IntoIterator<Item = Item>>(iter: I) -> Value {
        Value(iter.into_iter().collect())
    }
}

pub fn nodes_equal(a: &Node, b: &Node) -> bool {
    match (&a.kind, &b.kind) {
        (NodeKind::Text(x), NodeKind::Text(y)) => x == y,
        (NodeKind::Element { tag: t1, children: c1 }, NodeKind::Element { tag: t2, children: c2 }) => {
            t1 == t2 && c1.len() == c2.len() && c1.iter().zip(c2.iter()).all(|(x, y)| nodes_equal(x, y))
        }
        _ => false,
    }
}

pub fn items_equal(a: &Item, b: &Item) -> bool {
    match (a, b) {
        (Item::Int(x), Item::Int(y)) => x == y,
        (Item::Str(x), Item::Str(y)) => x == y,
        (Item::Bool(x), Item::Bool(y)) => x == y,
        (Item::Node(x), Item::Node(y)) => nodes_equal(x, y),
        (Item::Closure(x), Item::Closure(y)) => {
            x.label == y.label && {
                let (s, t) = (x.env.slots(), y.env.slots());
                s.len() == t.len() && s.iter().zip(t.iter()).all(|(u, v)| values_equal(u, v))
            }
        }
        (Item::Function(x), Item::Function(y)) => match (&**x, &**y) {
            (FunctionVal::Named { name: n1, arity: a1 }, FunctionVal::Named { name: n2, arity: a2 }) => {
                n1 == n2 && a1 == a2
            }
            _ => Arc::ptr_eq(x, y),
        },
        _ => false,
    }
}

/// Structural equality: node identity is ignored, atoms compare by type and value.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| items_equal(x, y))
}

fn hash_node<H: Hasher>(n: &Node, h: &mut H) {
    match &n.kind {
        NodeKind::Text(t) => {
            0u8.hash(h);
            t.hash(h);
        }
        NodeKind::Element { tag, children } => {
            1u8.hash(h);
            tag.hash(h);
            children.len().hash(h);
            children.iter().for_each(|c| hash_node(c, h));
        }
    }
}

fn hash_item<H: Hasher>(i: &Item, h: &mut H) {
    match i {
        Item::Int(n) => (0u8, n).hash(h),
        Item::Str(s) => (1u8, s).hash(h),
        Item::Bool(b) => (2u8, b).hash(h),
        Item::Node(n) => {
            3u8.hash(h);
            hash_node(n, h);
        }
        Item::Closure(c) => {
            4u8.hash(h);
            c.label.hash(h);
            let slots = c.env.slots();
            slots.len().hash(h);
            slots.iter().for_each(|v| hash_value(v, h));
        }
        Item::Function(f) => {
            5u8.hash(h);
            if let FunctionVal::Named { name, arity } = &**f {
                (name, arity).hash(h);
            }
        }
    }
}

/// Hash consistent with [`values_equal`].
pub fn hash_value<H: Hasher>(v: &Value, h: &mut H) {
    v.len().hash(h);
    v.iter().for_each(|i| hash_item(i, h));
}

/// Wrapper giving a value structural `Eq`/`Hash`.
#[derive(Clone, Debug)]
pub struct Structural(pub Value);

impl PartialEq for Structural {
    fn eq(&self, other: &Self) -> bool {
        values_equal(&self.0, &other.0)
    }
}

impl Eq for Structural {}

impl Hash for Structural {
    fn hash<H: Hasher>(&self, h: &mut H) {
        hash_value(&self.0, h)
    }
}

/// Element and text nodes reachable from the value's items.
pub fn node_count(v: &Value) -> usize {
    v.iter()
        .map(|i| match i {
            Item::Node(n) => n.count(),
            _ => 0,
        })
        .sum()
}

fn escape(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            c => out.push(c),
        }
    }
}

fn write_node(n: &Node, out: &mut String) {
    match &n.kind {
        NodeKind::Text(t) => escape(t, out),
        NodeKind::Element { tag, children } if children.is_empty() => {
            let _ = write!(out, "<{tag}/>");
        }
        NodeKind::Element { tag, children } => {
            let _ = write!(out, "<{tag}>");
            children.iter().for_each(|c| write_node(c, out));
            let _ = write!(out, "</{tag}>");
        }
    }
}

fn write_item(i: &Item, out: &mut String) {
    match i {
        Item::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Item::Str(s) => out.push_str(s),
        Item::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Item::Node(n) => write_node(n, out),
        Item::Closure(c) => {
            let _ = write!(out, "closure {} [", c.label);
            for (k, slot) in c.env.slots().iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push('(');
                for (j, item) in slot.iter().enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    write_item(item, out);
                }
                out.push(')');
            }
            out.push(']');
        }
        Item::Function(f) => {
            let _ = write!(out, "{f:?}");
        }
    }
}

/// Canonical text form: one item per line, `()` for the empty sequence.
pub fn serialize(v: &Value) -> String {
    if v.is_empty() {
        return "()".into();
    }
    let mut out = String::new();
    for (k, i) in v.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        write_item(i, &mut out);
    }
    out
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}
