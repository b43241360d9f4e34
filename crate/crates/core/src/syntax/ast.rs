//! Abstract syntax shared by source programs (with first-class functions)
//! and target programs (with explicit closure construction/elimination).

use std::fmt;
use std::sync::Arc;

/// Identifier for functions, element tags and variables.
///
/// Always matches `[A-Za-z_][A-Za-z0-9_-]*`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(text: &str) -> Option<Name> {
        is_valid_name(text).then(|| Name(Arc::from(text)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_valid_name(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl From<&str> for Name {
    /// Panics on an invalid identifier; use [`Name::new`] for untrusted input.
    fn from(text: &str) -> Name {
        Name::new(text).unwrap_or_else(|| panic!("invalid identifier `{text}`"))
    }
}

impl From<String> for Name {
    fn from(text: String) -> Name {
        Name::from(text.as_str())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Code label of a closure, rendered as `ell_<index>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u32);

pub const LABEL_PREFIX: &str = "ell_";

impl Label {
    pub fn new(index: u32) -> Label {
        assert!(index > 0, "labels are positive");
        Label(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Parses the `ell_<k>` rendering back into a label.
    pub fn parse(text: &str) -> Option<Label> {
        let digits = text.strip_prefix(LABEL_PREFIX)?;
        if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok().map(Label)
    }

    /// The label rendered as an identifier (surrogate function / element tag).
    pub fn name(self) -> Name {
        Name::from(self.to_string())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{LABEL_PREFIX}{}", self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{LABEL_PREFIX}{}", self.0)
    }
}

pub const DISPATCH_PREFIX: &str = "dispatch_";

/// Name of the generated dispatcher for `arity`-ary functional values.
pub fn dispatch_name(arity: usize) -> Name {
    Name::from(format!("{DISPATCH_PREFIX}{arity}"))
}

/// Inverse of [`dispatch_name`].
pub fn dispatch_arity(name: &Name) -> Option<usize> {
    let digits = name.as_str().strip_prefix(DISPATCH_PREFIX)?;
    if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NodeTest {
    Tag(Name),
    AnyNode,
    Text,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeTest {
    Element(Name),
    Integer,
    String,
    Boolean,
}

/// Built-in operators and functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    // infix operators
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    To,
    Add,
    Sub,
    Mul,
    IDiv,
    Mod,
    // functions
    DistinctValues,
    Head,
    Tail,
    Empty,
    Exists,
    Count,
    Concat,
    Pow,
    Greatest,
    Least,
    Not,
    Integer,
    String,
    Boolean,
    Error,
}

/// Binding strength of infix operators, loosest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpClass {
    Or,
    And,
    Comparison,
    Range,
    Additive,
    Multiplicative,
}

impl Builtin {
    pub const FUNCTIONS: [Builtin; 15] = [
        Builtin::DistinctValues,
        Builtin::Head,
        Builtin::Tail,
        Builtin::Empty,
        Builtin::Exists,
        Builtin::Count,
        Builtin::Concat,
        Builtin::Pow,
        Builtin::Greatest,
        Builtin::Least,
        Builtin::Not,
        Builtin::Integer,
        Builtin::String,
        Builtin::Boolean,
        Builtin::Error,
    ];

    /// Looks up a builtin by its function-call name.
    pub fn from_function_name(name: &str) -> Option<Builtin> {
        Builtin::FUNCTIONS.into_iter().find(|b| b.function_name() == Some(name))
    }

    pub fn function_name(self) -> Option<&'static str> {
        Some(match self {
            Builtin::DistinctValues => "distinct-values",
            Builtin::Head => "head",
            Builtin::Tail => "tail",
            Builtin::Empty => "empty",
            Builtin::Exists => "exists",
            Builtin::Count => "count",
            Builtin::Concat => "concat",
            Builtin::Pow => "pow",
            Builtin::Greatest => "greatest",
            Builtin::Least => "least",
            Builtin::Not => "not",
            Builtin::Integer => "integer",
            Builtin::String => "string",
            Builtin::Boolean => "boolean",
            Builtin::Error => "error",
            _ => return None,
        })
    }

    pub fn operator(self) -> Option<(&'static str, OpClass)> {
        Some(match self {
            Builtin::Or => ("or", OpClass::Or),
            Builtin::And => ("and", OpClass::And),
            Builtin::Eq => ("=", OpClass::Comparison),
            Builtin::Ne => ("!=", OpClass::Comparison),
            Builtin::Lt => ("<", OpClass::Comparison),
            Builtin::Le => ("<=", OpClass::Comparison),
            Builtin::Gt => (">", OpClass::Comparison),
            Builtin::Ge => (">=", OpClass::Comparison),
            Builtin::To => ("to", OpClass::Range),
            Builtin::Add => ("+", OpClass::Additive),
            Builtin::Sub => ("-", OpClass::Additive),
            Builtin::Mul => ("*", OpClass::Multiplicative),
            Builtin::IDiv => ("idiv", OpClass::Multiplicative),
            Builtin::Mod => ("mod", OpClass::Multiplicative),
            _ => return None,
        })
    }

    pub fn is_operator(self) -> bool {
        self.operator().is_some()
    }

    pub fn accepts_arity(self, n: usize) -> bool {
        match self {
            b if b.is_operator() => n == 2,
            Builtin::Concat => n >= 2,
            Builtin::Pow | Builtin::Greatest | Builtin::Least => n == 2,
            Builtin::Error => n == 0,
            _ => n == 1,
        }
    }

    pub fn display_name(self) -> &'static str {
        self.function_name().or(self.operator().map(|(s, _)| s)).unwrap_or("?")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeCase {
    pub test: TypeTest,
    pub var: Name,
    pub body: Expr,
}

/// One arm of a closure elimination: `ell_k [$v1, ..., $vn] => body`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Branch {
    pub label: Label,
    pub vars: Vec<Name>,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Str(String),
    Bool(bool),
    Var(Name),
    For {
        var: Name,
        source: Box<Expr>,
        body: Box<Expr>,
    },
    Let {
        var: Name,
        def: Box<Expr>,
        body: Box<Expr>,
    },
    If {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Seq(Vec<Expr>),
    Child {
        input: Box<Expr>,
        test: NodeTest,
    },
    Element {
        tag: Name,
        content: Box<Expr>,
    },
    Filter {
        input: Box<Expr>,
        predicate: Box<Expr>,
    },
    Context,
    /// Static call of a declared function.
    Call {
        name: Name,
        args: Vec<Expr>,
    },
    Builtin {
        op: Builtin,
        args: Vec<Expr>,
    },
    Function {
        params: Vec<Name>,
        body: Box<Expr>,
    },
    NamedRef {
        name: Name,
        arity: usize,
    },
    DynCall {
        fun: Box<Expr>,
        args: Vec<Expr>,
    },
    TypeSwitch {
        scrutinee: Box<Expr>,
        cases: Vec<TypeCase>,
        default_var: Name,
        default: Box<Expr>,
    },
    /// Target only: `closure ell_k [e1, ..., en]`.
    Closure {
        label: Label,
        env: Vec<Expr>,
    },
    /// Target only: `case e of { branches }`.
    CaseOf {
        scrutinee: Box<Expr>,
        branches: Vec<Branch>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunDecl {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub decls: Vec<FunDecl>,
    pub main: Expr,
}

impl Program {
    pub fn decl(&self, name: &Name) -> Option<&FunDecl> {
        self.decls.iter().find(|d| &d.name == name)
    }
}

// Constructors used throughout the transformations.
impl Expr {
    /// Sequence constructor that never produces a singleton `Seq`.
    pub fn seq(mut items: Vec<Expr>) -> Expr {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expr::Seq(items)
        }
    }

    pub fn empty() -> Expr {
        Expr::Seq(Vec::new())
    }

    pub fn var(name: &Name) -> Expr {
        Expr::Var(name.clone())
    }

    pub fn let_in(var: Name, def: Expr, body: Expr) -> Expr {
        Expr::Let { var, def: Box::new(def), body: Box::new(body) }
    }

    pub fn for_in(var: Name, source: Expr, body: Expr) -> Expr {
        Expr::For { var, source: Box::new(source), body: Box::new(body) }
    }

    pub fn if_then(cond: Expr, then: Expr, els: Expr) -> Expr {
        Expr::If { cond: Box::new(cond), then: Box::new(then), els: Box::new(els) }
    }

    pub fn call(name: Name, args: Vec<Expr>) -> Expr {
        Expr::Call { name, args }
    }

    pub fn builtin(op: Builtin, args: Vec<Expr>) -> Expr {
        Expr::Builtin { op, args }
    }

    pub fn binary(op: Builtin, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Builtin { op, args: vec![lhs, rhs] }
    }

    pub fn element(tag: Name, content: Expr) -> Expr {
        Expr::Element { tag, content: Box::new(content) }
    }

    pub fn child(input: Expr, test: NodeTest) -> Expr {
        Expr::Child { input: Box::new(input), test }
    }

    pub fn filter(input: Expr, predicate: Expr) -> Expr {
        Expr::Filter { input: Box::new(input), predicate: Box::new(predicate) }
    }

    /// The bare label atom standing in for an empty-environment closure.
    pub fn label_atom(label: Label) -> Expr {
        Expr::Str(label.to_string())
    }

    /// Statically known label of a closure-valued expression, if any.
    pub fn static_label(&self) -> Option<Label> {
        match self {
            Expr::Closure { label, .. } => Some(*label),
            Expr::Str(s) => Label::parse(s),
            _ => None,
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Pre-order traversal over this expression and all subexpressions.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }

    /// Direct subexpressions in source order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Context | Expr::NamedRef { .. } => {
                vec![]
            }
            Expr::For { source, body, .. } => vec![source, body],
            Expr::Let { def, body, .. } => vec![def, body],
            Expr::If { cond, then, els } => vec![cond, then, els],
            Expr::Seq(items) => items.iter().collect(),
            Expr::Child { input, .. } => vec![input],
            Expr::Element { content, .. } => vec![content],
            Expr::Filter { input, predicate } => vec![input, predicate],
            Expr::Call { args, .. } | Expr::Builtin { args, .. } => args.iter().collect(),
            Expr::Function { body, .. } => vec![body],
            Expr::DynCall { fun, args } => std::iter::once(&**fun).chain(args.iter()).collect(),
            Expr::TypeSwitch { scrutinee, cases, default, .. } => std::iter::once(&**scrutinee)
                .chain(cases.iter().map(|c| &c.body))
                .chain(std::iter::once(&**default))
                .collect(),
            Expr::Closure { env, .. } => env.iter().collect(),
            Expr::CaseOf { scrutinee, branches } => {
                std::iter::once(&**scrutinee).chain(branches.iter().map(|b| &b.body)).collect()
            }
        }
    }

    /// Rebuilds this node with every direct subexpression mapped through `f`.
    pub fn map_children(self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let mut bx = |e: Box<Expr>| Box::new(f(*e));
        match self {
            e @ (Expr::Int(_)
            | Expr::Str(_)
            | Expr::Bool(_)
            | Expr::Var(_)
            | Expr::Context
            | Expr::NamedRef { .. }) => e,
            Expr::For { var, source, body } => Expr::For { var, source: bx(source), body: bx(body) },
            Expr::Let { var, def, body } => Expr::Let { var, def: bx(def), body: bx(body) },
            Expr::If { cond, then, els } => Expr::If { cond: bx(cond), then: bx(then), els: bx(els) },
            Expr::Seq(items) => Expr::Seq(items.into_iter().map(&mut *f).collect()),
            Expr::Child { input, test } => Expr::Child { input: bx(input), test },
            Expr::Element { tag, content } => Expr::Element { tag, content: bx(content) },
            Expr::Filter { input, predicate } => Expr::Filter { input: bx(input), predicate: bx(predicate) },
            Expr::Call { name, args } => Expr::Call { name, args: args.into_iter().map(&mut *f).collect() },
            Expr::Builtin { op, args } => Expr::Builtin { op, args: args.into_iter().map(&mut *f).collect() },
            Expr::Function { params, body } => Expr::Function { params, body: bx(body) },
            Expr::DynCall { fun, args } => {
                let fun = bx(fun);
                Expr::DynCall { fun, args: args.into_iter().map(&mut *f).collect() }
            }
            Expr::TypeSwitch { scrutinee, cases, default_var, default } => {
                let scrutinee = bx(scrutinee);
                let cases = cases
                    .into_iter()
                    .map(|c| TypeCase { test: c.test, var: c.var, body: f(c.body) })
                    .collect();
                Expr::TypeSwitch { scrutinee, cases, default_var, default: Box::new(f(*default)) }
            }
            Expr::Closure { label, env } => Expr::Closure { label, env: env.into_iter().map(&mut *f).collect() },
            Expr::CaseOf { scrutinee, branches } => {
                let scrutinee = bx(scrutinee);
                let branches = branches
                    .into_iter()
                    .map(|b| Branch { label: b.label, vars: b.vars, body: f(b.body) })
                    .collect();
                Expr::CaseOf { scrutinee, branches }
            }
        }
    }

    /// Bottom-up rewrite: children first, then `f` on the rebuilt node.
    pub fn transform_up(self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = self.map_children(&mut |c| c.transform_up(f));
        f(rebuilt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_follow_identifier_syntax() {
        assert!(Name::new("fold-right").is_some());
        assert!(Name::new("_x1").is_some());
        assert!(Name::new("1x").is_none());
        assert!(Name::new("").is_none());
        assert!(Name::new("a:b").is_none());
    }

    #[test]
    fn label_rendering_round_trips() {
        let l = Label::new(12);
        assert_eq!(l.to_string(), "ell_12");
        assert_eq!(Label::parse("ell_12"), Some(l));
        assert_eq!(Label::parse("ell_0"), None);
        assert_eq!(Label::parse("ell_01"), None);
        assert_eq!(Label::parse("ell_"), None);
        assert_eq!(Label::parse("dispatch_1"), None);
    }

    #[test]
    fn dispatcher_names() {
        assert_eq!(dispatch_name(2).as_str(), "dispatch_2");
        assert_eq!(dispatch_arity(&Name::from("dispatch_0")), Some(0));
        assert_eq!(dispatch_arity(&Name::from("dispatch_")), None);
        assert_eq!(dispatch_arity(&Name::from("ell_1")), None);
    }

    #[test]
    fn seq_constructor_collapses_singletons() {
        assert_eq!(Expr::seq(vec![Expr::Int(1)]), Expr::Int(1));
        assert_eq!(Expr::seq(vec![]), Expr::Seq(vec![]));
    }

    #[test]
    fn builtin_lookup() {
        assert_eq!(Builtin::from_function_name("distinct-values"), Some(Builtin::DistinctValues));
        assert_eq!(Builtin::from_function_name("mod"), None);
        assert!(Builtin::Concat.accepts_arity(3));
        assert!(!Builtin::Pow.accepts_arity(1));
    }
}
