//! The tree-walking evaluator shared by the source, target and lowered engines.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::represent::{analyze_inlining, EnvStore, Inlining};
use crate::syntax::{dispatch_arity, Builtin, Expr, FunDecl, Label, Name, NodeTest, Program, TypeTest};

use super::builtins::{apply, ebv};
use super::env::Env;
use super::error::{type_error, EvalError};
use super::stats::RunStats;
use super::value::{ClosureEnv, ClosureVal, FunctionVal, Item, Node, NodeKind, Value};

/// Which constructs an evaluation accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    /// First-class functions: literals, named references, dynamic calls.
    Source,
    /// First-order plus closure construction and case-of elimination.
    Target,
    /// Strictly first-order.
    Lowered,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Source, EngineKind::Target, EngineKind::Lowered];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Source => "source",
            EngineKind::Target => "target",
            EngineKind::Lowered => "lowered",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EngineKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown engine `{s}`"))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Intern environments of cyclic-label closures in an [`EnvStore`] (target engine).
    pub share_env: bool,
    pub max_call_depth: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { share_env: false, max_call_depth: 2_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: Value,
    pub stats: RunStats,
}

const STACK_BYTES: usize = 1 << 30;

/// Evaluates `p` with the given engine on a dedicated thread with a large stack.
pub fn eval(p: &Program, kind: EngineKind, opts: EvalOptions) -> Result<Evaluation, EvalError> {
    std::thread::scope(|s| {
        let handle = std::thread::Builder::new()
            .name("defuncq-eval".into())
            .stack_size(STACK_BYTES)
            .spawn_scoped(s, || eval_here(p, kind, opts))
            .expect("spawn evaluator thread");
        handle.join().unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })
}

/// Evaluates on the current thread.
pub fn eval_here(p: &Program, kind: EngineKind, opts: EvalOptions) -> Result<Evaluation, EvalError> {
    let mut it = Interp::new(p, kind, opts);
    let value = it.eval(&p.main, &Env::default(), None)?;
    Ok(Evaluation { value, stats: it.stats })
}

struct Interp<'p> {
    kind: EngineKind,
    opts: EvalOptions,
    decls: HashMap<&'p Name, &'p FunDecl>,
    stats: RunStats,
    next_id: u64,
    store: EnvStore,
    stored_labels: HashSet<Label>,
    inline_items: u64,
    /// Shared copies of function-literal bodies, keyed by their address.
    bodies: HashMap<*const Expr, Arc<Expr>>,
    depth: usize,
}

fn type_matches(test: &TypeTest, v: &Value) -> bool {
    match (test, v.items()) {
        (TypeTest::Element(tag), [Item::Node(n)]) => n.tag() == Some(tag),
        (TypeTest::Integer, [Item::Int(_)]) => true,
        (TypeTest::String, [Item::Str(_)]) => true,
        (TypeTest::Boolean, [Item::Bool(_)]) => true,
        _ => false,
    }
}

fn test_matches(test: &NodeTest, n: &Node) -> bool {
    match (test, &n.kind) {
        (NodeTest::Tag(t), NodeKind::Element { tag, .. }) => t == tag,
        (NodeTest::AnyNode, _) => true,
        (NodeTest::Text, NodeKind::Text(_)) => true,
        _ => false,
    }
}

fn atom_text(item: &Item) -> String {
    match item {
        Item::Int(n) => n.to_string(),
        Item::Str(s) => s.to_string(),
        Item::Bool(b) => b.to_string(),
        _ => unreachable!("not an atom"),
    }
}

impl<'p> Interp<'p> {
    fn new(p: &'p Program, kind: EngineKind, opts: EvalOptions) -> Self {
        let stored_labels = if kind == EngineKind::Target && opts.share_env {
            analyze_inlining(p).into_iter().filter(|(_, d)| *d == Inlining::Store).map(|(l, _)| l).collect()
        } else {
            HashSet::new()
        };
        Interp {
            kind,
            opts,
            decls: p.decls.iter().map(|d| (&d.name, d)).collect(),
            stats: RunStats::default(),
            next_id: 0,
            store: EnvStore::new(),
            stored_labels,
            inline_items: 0,
            bodies: HashMap::new(),
            depth: 0,
        }
    }

    fn reject(&self, form: &str) -> EvalError {
        match self.kind {
            EngineKind::Source => EvalError::Unsupported(format!("{form} in the source engine")),
            _ => EvalError::NotFirstOrder(format!("{form} in the {} engine", self.kind)),
        }
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn enter(&mut self) -> Result<(), EvalError> {
        if self.depth >= self.opts.max_call_depth {
            return Err(EvalError::RecursionLimit(self.opts.max_call_depth));
        }
        self.depth += 1;
        Ok(())
    }

    fn eval_all(&mut self, es: &[Expr], env: &Env, ctx: Option<&Item>) -> Result<Vec<Value>, EvalError> {
        es.iter().map(|e| self.eval(e, env, ctx)).collect()
    }

    fn eval(&mut self, e: &Expr, env: &Env, ctx: Option<&Item>) -> Result<Value, EvalError> {
        match e {
            Expr::Int(n) => Ok(Value::int(*n)),
            Expr::Str(s) => Ok(Value::str(s)),
            Expr::Bool(b) => Ok(Value::bool(*b)),
            Expr::Var(v) => env.lookup(v).cloned().ok_or_else(|| EvalError::UnboundVariable(v.clone())),
            Expr::For { var, source, body } => {
                let src = self.eval(source, env, ctx)?;
                let mut parts = Vec::with_capacity(src.len());
                for item in src.iter() {
                    let inner = env.bind(var, Value::one(item.clone()));
                    parts.push(self.eval(body, &inner, ctx)?);
                }
                Ok(Value::concat(parts))
            }
            Expr::Let { var, def, body } => {
                let v = self.eval(def, env, ctx)?;
                self.eval(body, &env.bind(var, v), ctx)
            }
            Expr::If { cond, then, els } => {
                let c = self.eval(cond, env, ctx)?;
                if ebv(&c)? {
                    self.eval(then, env, ctx)
                } else {
                    self.eval(els, env, ctx)
                }
            }
            Expr::Seq(items) => Ok(Value::concat(self.eval_all(items, env, ctx)?)),
            Expr::Child { input, test } => {
                let v = self.eval(input, env, ctx)?;
                let mut out = Vec::new();
                for item in v.iter() {
                    match item {
                        Item::Node(n) => {
                            out.extend(n.children().iter().filter(|c| test_matches(test, c)).cloned().map(Item::Node))
                        }
                        other => return Err(type_error(format!("child step applied to a {}", other.type_name()))),
                    }
                }
                Ok(out.into())
            }
            Expr::Element { tag, content } => {
                let v = self.eval(content, env, ctx)?;
                Ok(Value::one(Item::Node(self.construct(tag, &v)?)))
            }
            Expr::Filter { input, predicate } => {
                let v = self.eval(input, env, ctx)?;
                let mut out = Vec::new();
                for (i, item) in v.iter().enumerate() {
                    let p = self.eval(predicate, env, Some(item))?;
                    let keep = match p.items() {
                        [Item::Int(n)] => *n == i as i64 + 1,
                        _ => ebv(&p)?,
                    };
                    if keep {
                        out.push(item.clone());
                    }
                }
                Ok(out.into())
            }
            Expr::Context => ctx.cloned().map(Value::one).ok_or_else(|| type_error("the context item is undefined")),
            Expr::Call { name, args } => {
                let vals = self.eval_all(args, env, ctx)?;
                self.call_declared(name, vals)
            }
            Expr::Builtin { op: op @ (Builtin::And | Builtin::Or), args } if args.len() == 2 => {
                let lhs = ebv(&self.eval(&args[0], env, ctx)?)?;
                if lhs == (*op == Builtin::Or) {
                    return Ok(Value::bool(lhs));
                }
                Ok(Value::bool(ebv(&self.eval(&args[1], env, ctx)?)?))
            }
            Expr::Builtin { op, args } => {
                let vals = self.eval_all(args, env, ctx)?;
                apply(*op, &vals)
            }
            Expr::Function { params, body } => {
                if self.kind != EngineKind::Source {
                    return Err(self.reject("function literal"));
                }
                let key = &**body as *const Expr;
                let body = self.bodies.entry(key).or_insert_with(|| Arc::new((**body).clone())).clone();
                self.stats.closures_built += 1;
                let f = FunctionVal::Literal { params: params.clone(), body, env: env.clone() };
                Ok(Value::one(Item::Function(Arc::new(f))))
            }
            Expr::NamedRef { name, arity } => {
                if self.kind != EngineKind::Source {
                    return Err(self.reject("named function reference"));
                }
                let known = match self.decls.get(name) {
                    Some(d) => d.params.len() == *arity,
                    None => Builtin::from_function_name(name.as_str()).is_some_and(|b| b.accepts_arity(*arity)),
                };
                if !known {
                    return Err(EvalError::ArityMismatch(format!("no function {name}#{arity}")));
                }
                self.stats.closures_built += 1;
                Ok(Value::one(Item::Function(Arc::new(FunctionVal::Named { name: name.clone(), arity: *arity }))))
            }
            Expr::DynCall { fun, args } => {
                if self.kind != EngineKind::Source {
                    return Err(self.reject("dynamic function call"));
                }
                let f = self.eval(fun, env, ctx)?;
                let vals = self.eval_all(args, env, ctx)?;
                let f = match f.items() {
                    [Item::Function(f)] => f.clone(),
                    _ => return Err(type_error("dynamic call target is not a single function")),
                };
                if f.arity() != vals.len() {
                    return Err(EvalError::ArityMismatch(format!(
                        "function of arity {} applied to {} argument(s)",
                        f.arity(),
                        vals.len()
                    )));
                }
                self.stats.dispatched_calls += 1;
                self.apply_function(&f, vals)
            }
            Expr::TypeSwitch { scrutinee, cases, default_var, default } => {
                let v = self.eval(scrutinee, env, ctx)?;
                for c in cases {
                    if type_matches(&c.test, &v) {
                        return self.eval(&c.body, &env.bind(&c.var, v), ctx);
                    }
                }
                self.eval(default, &env.bind(default_var, v), ctx)
            }
            Expr::Closure { label, env: slots } => {
                if self.kind != EngineKind::Target {
                    return Err(self.reject("closure constructor"));
                }
                let slots = self.eval_all(slots, env, ctx)?;
                Ok(Value::one(Item::Closure(self.build_closure(*label, slots))))
            }
            Expr::CaseOf { scrutinee, branches } => {
                if self.kind != EngineKind::Target {
                    return Err(self.reject("case-of"));
                }
                let v = self.eval(scrutinee, env, ctx)?;
                let (label, slots): (Label, &[Value]) = match v.items() {
                    [Item::Closure(c)] => (c.label, c.env.slots()),
                    [Item::Str(s)] => match Label::parse(s) {
                        Some(l) => (l, &[]),
                        None => return Err(EvalError::UnknownLabel(format!("\"{s}\" is not a closure"))),
                    },
                    _ => return Err(EvalError::UnknownLabel("case-of scrutinee is not a closure".into())),
                };
                let Some(b) = branches.iter().find(|b| b.label == label) else {
                    return Err(EvalError::UnknownLabel(format!("no branch for {label}")));
                };
                if b.vars.len() != slots.len() {
                    return Err(EvalError::ArityMismatch(format!(
                        "branch {label} binds {} variable(s), closure holds {}",
                        b.vars.len(),
                        slots.len()
                    )));
                }
                let mut inner = env.clone();
                for (var, slot) in b.vars.iter().zip(slots) {
                    inner = inner.bind(var, slot.clone());
                }
                self.eval(&b.body, &inner, ctx)
            }
        }
    }

    fn call_declared(&mut self, name: &Name, args: Vec<Value>) -> Result<Value, EvalError> {
        let Some(&d) = self.decls.get(name) else {
            return Err(type_error(format!("call to undeclared function {name}#{}", args.len())));
        };
        if d.params.len() != args.len() {
            return Err(EvalError::ArityMismatch(format!(
                "{name} expects {} argument(s), given {}",
                d.params.len(),
                args.len()
            )));
        }
        if self.kind != EngineKind::Source && dispatch_arity(name).is_some() {
            self.stats.dispatched_calls += 1;
        } else {
            self.stats.static_calls += 1;
        }
        self.invoke(d, args)
    }

    fn invoke(&mut self, d: &FunDecl, args: Vec<Value>) -> Result<Value, EvalError> {
        self.enter()?;
        let mut env = Env::default();
        for (p, a) in d.params.iter().zip(args) {
            env = env.bind(p, a);
        }
        let r = self.eval(&d.body, &env, None);
        self.depth -= 1;
        r
    }

    fn apply_function(&mut self, f: &FunctionVal, args: Vec<Value>) -> Result<Value, EvalError> {
        match f {
            FunctionVal::Literal { params, body, env } => {
                self.enter()?;
                let mut inner = env.clone();
                for (p, a) in params.iter().zip(args) {
                    inner = inner.bind(p, a);
                }
                let body = body.clone();
                let r = self.eval(&body, &inner, None);
                self.depth -= 1;
                r
            }
            FunctionVal::Named { name, .. } => match self.decls.get(name) {
                Some(&d) => self.invoke(d, args),
                None => {
                    let op = Builtin::from_function_name(name.as_str())
                        .ok_or_else(|| type_error(format!("unknown function {name}")))?;
                    apply(op, &args)
                }
            },
        }
    }

    fn build_closure(&mut self, label: Label, slots: Vec<Value>) -> Arc<ClosureVal> {
        let nested = slots
            .iter()
            .flat_map(|s| s.iter())
            .map(|i| match i {
                Item::Closure(c) => c.depth,
                _ => 0,
            })
            .max()
            .unwrap_or(0);
        let depth = nested + 1;
        self.stats.closures_built += 1;
        self.stats.max_closure_depth = self.stats.max_closure_depth.max(depth as u64);
        let env = if self.opts.share_env && !slots.is_empty() && self.stored_labels.contains(&label) {
            let (key, slots) = self.store.intern_shared(&slots);
            ClosureEnv::Stored { key, slots }
        } else {
            self.inline_items += slots.iter().map(|s| s.len() as u64).sum::<u64>();
            ClosureEnv::Inline(slots.into())
        };
        self.stats.env_items_stored = self.store.total_stored_items() as u64 + self.inline_items;
        Arc::new(ClosureVal { label, env, depth })
    }

    fn text_node(&mut self, text: String) -> Arc<Node> {
        self.stats.nodes_built += 1;
        Arc::new(Node { id: self.fresh_id(), kind: NodeKind::Text(text.into()), label_depth: 0 })
    }

    fn copy(&mut self, n: &Node) -> Arc<Node> {
        let kind = match &n.kind {
            NodeKind::Text(t) => NodeKind::Text(t.clone()),
            NodeKind::Element { tag, children } => {
                NodeKind::Element { tag: tag.clone(), children: children.iter().map(|c| self.copy(c)).collect() }
            }
        };
        self.stats.nodes_built += 1;
        Arc::new(Node { id: self.fresh_id(), kind, label_depth: n.label_depth })
    }

    /// Element construction with copy semantics; atoms become space-separated text.
    fn construct(&mut self, tag: &Name, content: &Value) -> Result<Arc<Node>, EvalError> {
        let mut children = Vec::new();
        let mut text: Option<String> = None;
        let mut after_atom = false;
        for item in content.iter() {
            match item {
                Item::Int(_) | Item::Str(_) | Item::Bool(_) => {
                    let t = text.get_or_insert_with(String::new);
                    if after_atom {
                        t.push(' ');
                    }
                    t.push_str(&atom_text(item));
                    after_atom = true;
                }
                Item::Node(n) => {
                    after_atom = false;
                    match &n.kind {
                        NodeKind::Text(t) => text.get_or_insert_with(String::new).push_str(t),
                        NodeKind::Element { .. } => {
                            if let Some(t) = text.take().filter(|t| !t.is_empty()) {
                                children.push(self.text_node(t));
                            }
                            children.push(self.copy(n));
                        }
                    }
                }
                other => {
                    return Err(type_error(format!("a {} cannot be element content", other.type_name())));
                }
            }
        }
        if let Some(t) = text.take().filter(|t| !t.is_empty()) {
            children.push(self.text_node(t));
        }
        let is_label = Label::parse(tag.as_str()).is_some();
        let label_depth = children.iter().map(|c| c.label_depth).max().unwrap_or(0) + is_label as usize;
        if is_label && self.kind == EngineKind::Lowered {
            self.stats.closures_built += 1;
            self.stats.max_closure_depth = self.stats.max_closure_depth.max(label_depth as u64);
        }
        self.stats.nodes_built += 1;
        Ok(Arc::new(Node {
            id: self.fresh_id(),
            kind: NodeKind::Element { tag: tag.clone(), children },
            label_depth,
        }))
    }
}
