//! Conservative shape analysis of closure environment slots.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;

use crate::syntax::{Builtin, Expr, Label, Name, Program};

/// Labels of closures (or label atoms) an expression may evaluate to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Labels {
    None,
    Some(BTreeSet<Label>),
    All,
}

impl Labels {
    fn one(l: Label) -> Labels {
        Labels::Some(BTreeSet::from([l]))
    }

    fn join(&self, other: &Labels) -> Labels {
        match (self, other) {
            (Labels::All, _) | (_, Labels::All) => Labels::All,
            (Labels::None, x) | (x, Labels::None) => x.clone(),
            (Labels::Some(a), Labels::Some(b)) => Labels::Some(a.union(b).copied().collect()),
        }
    }

    pub fn is_none(&self) -> bool {
        *self == Labels::None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    /// Statically exactly one item.
    pub single: bool,
    pub labels: Labels,
}

impl Shape {
    const UNKNOWN: Shape = Shape { single: false, labels: Labels::All };

    fn atom() -> Shape {
        Shape { single: true, labels: Labels::None }
    }

    /// No value at all; the unit of `join`.
    fn bottom() -> Shape {
        Shape { single: true, labels: Labels::None }
    }

    fn join(&self, other: &Shape) -> Shape {
        Shape { single: self.single && other.single, labels: self.labels.join(&other.labels) }
    }

    fn many(labels: Labels) -> Shape {
        Shape { single: false, labels }
    }
}

type Scope = Vec<(Name, Shape)>;

fn lookup(scope: &Scope, n: &Name) -> Shape {
    scope.iter().rev().find(|(m, _)| m == n).map_or(Shape::UNKNOWN, |(_, s)| s.clone())
}

/// Facts gathered while computing shapes.
#[derive(Debug, Default)]
struct Findings {
    /// Slot shapes of every closure constructor.
    slots: Vec<(Label, Vec<Shape>)>,
    /// Labels reaching positions that observe item boundaries: iteration, concatenation,
    /// predicates, builtin arguments, element content and type tests.
    consumed: Vec<Labels>,
    /// Context item shapes of the enclosing predicates.
    ctx: Vec<Shape>,
    /// Assumed slot shapes per label, used for case-of branch variables.
    assumed: BTreeMap<Label, Vec<Shape>>,
}

impl Findings {
    fn consume(&mut self, s: &Shape) {
        if !s.labels.is_none() {
            self.consumed.push(s.labels.clone());
        }
    }
}

/// Shape of `e`; records constructor slots and boundary-observing uses in `out`.
fn shape(e: &Expr, scope: &mut Scope, out: &mut Findings) -> Shape {
    match e {
        Expr::Int(_) | Expr::Bool(_) => Shape::atom(),
        Expr::Str(s) => Shape { single: true, labels: Label::parse(s).map_or(Labels::None, Labels::one) },
        Expr::Var(v) => lookup(scope, v),
        Expr::For { var, source, body } => {
            let src = shape(source, scope, out);
            out.consume(&src);
            scope.push((var.clone(), Shape { single: true, labels: src.labels.clone() }));
            let b = shape(body, scope, out);
            scope.pop();
            Shape { single: src.single && b.single, labels: b.labels }
        }
        Expr::Let { var, def, body } => {
            let d = shape(def, scope, out);
            scope.push((var.clone(), d));
            let b = shape(body, scope, out);
            scope.pop();
            b
        }
        Expr::If { cond, then, els } => {
            let c = shape(cond, scope, out);
            out.consume(&c);
            let t = shape(then, scope, out);
            t.join(&shape(els, scope, out))
        }
        Expr::Seq(items) => {
            let shapes: Vec<Shape> = items.iter().map(|i| shape(i, scope, out)).collect();
            if shapes.len() > 1 {
                shapes.iter().for_each(|s| out.consume(s));
            }
            let labels = shapes.iter().fold(Labels::None, |acc, s| acc.join(&s.labels));
            Shape { single: shapes.len() == 1 && shapes[0].single, labels }
        }
        Expr::Child { input, .. } => {
            let i = shape(input, scope, out);
            out.consume(&i);
            Shape::many(Labels::None)
        }
        Expr::Element { content, .. } => {
            let c = shape(content, scope, out);
            out.consume(&c);
            Shape::atom()
        }
        Expr::Filter { input, predicate } => {
            let i = shape(input, scope, out);
            out.consume(&i);
            out.ctx.push(Shape { single: true, labels: i.labels.clone() });
            let pr = shape(predicate, scope, out);
            out.ctx.pop();
            out.consume(&pr);
            Shape::many(i.labels)
        }
        Expr::Context => Shape { single: true, labels: out.ctx.last().map_or(Labels::All, |s| s.labels.clone()) },
        Expr::Call { args, .. } => {
            for a in args {
                shape(a, scope, out);
            }
            Shape::UNKNOWN
        }
        Expr::Builtin { op, args } => {
            let shapes: Vec<Shape> = args.iter().map(|a| shape(a, scope, out)).collect();
            shapes.iter().for_each(|s| out.consume(s));
            let all_single = shapes.iter().all(|s| s.single);
            let labels = shapes.iter().fold(Labels::None, |acc, s| acc.join(&s.labels));
            match op {
                b if b.operator().is_some_and(|(_, c)| c <= crate::syntax::OpClass::Comparison) => Shape::atom(),
                Builtin::Empty | Builtin::Exists | Builtin::Count | Builtin::Not | Builtin::Concat => Shape::atom(),
                Builtin::Add | Builtin::Sub | Builtin::Mul | Builtin::IDiv | Builtin::Mod | Builtin::Pow => {
                    Shape { single: all_single, labels: Labels::None }
                }
                Builtin::To | Builtin::Error => Shape::many(Labels::None),
                Builtin::Integer | Builtin::Boolean => Shape { single: all_single, labels: Labels::None },
                // strings may carry label atoms through
                Builtin::String | Builtin::Greatest | Builtin::Least => Shape { single: all_single, labels },
                _ => Shape::many(labels),
            }
        }
        Expr::Function { body, .. } => {
            shape(body, &mut Vec::new(), out);
            Shape::UNKNOWN
        }
        Expr::NamedRef { .. } => Shape::UNKNOWN,
        Expr::DynCall { fun, args } => {
            shape(fun, scope, out);
            for a in args {
                shape(a, scope, out);
            }
            Shape::UNKNOWN
        }
        Expr::TypeSwitch { scrutinee, cases, default_var, default } => {
            let s = shape(scrutinee, scope, out);
            out.consume(&s);
            let mut res: Option<Shape> = None;
            for c in cases {
                scope.push((c.var.clone(), s.clone()));
                let b = shape(&c.body, scope, out);
                scope.pop();
                res = Some(res.map_or(b.clone(), |o| o.join(&b)));
            }
            scope.push((default_var.clone(), s));
            let d = shape(default, scope, out);
            scope.pop();
            res.map_or(d.clone(), |o| o.join(&d))
        }
        Expr::Closure { label, env } => {
            let slots: Vec<Shape> = env.iter().map(|s| shape(s, scope, out)).collect();
            out.slots.push((*label, slots));
            Shape { single: true, labels: Labels::one(*label) }
        }
        Expr::CaseOf { scrutinee, branches } => {
            shape(scrutinee, scope, out);
            let mut res: Option<Shape> = None;
            for b in branches {
                let mark = scope.len();
                let assumed = out.assumed.get(&b.label);
                let var_shapes: Vec<(Name, Shape)> = b
                    .vars
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let sh = assumed.map_or(Shape::bottom(), |a| a.get(j).cloned().unwrap_or(Shape::UNKNOWN));
                        (v.clone(), sh)
                    })
                    .collect();
                scope.extend(var_shapes);
                let s = shape(&b.body, scope, out);
                scope.truncate(mark);
                res = Some(res.map_or(s.clone(), |o| o.join(&s)));
            }
            res.unwrap_or(Shape::many(Labels::None))
        }
    }
}

/// Label occurrences, slot shapes and boundary-observing uses across `p`.
#[derive(Debug, Default)]
struct Survey {
    labels: BTreeSet<Label>,
    found: Findings,
}

fn survey(p: &Program) -> Survey {
    let note_labels = |e: &Expr, found: &mut BTreeSet<Label>| {
        e.walk(&mut |n| match n {
            Expr::Closure { label, .. } => {
                found.insert(*label);
            }
            Expr::CaseOf { branches, .. } => found.extend(branches.iter().map(|b| b.label)),
            Expr::Str(t) => found.extend(Label::parse(t)),
            _ => {}
        });
    };
    let mut labels = BTreeSet::new();
    for d in &p.decls {
        note_labels(&d.body, &mut labels);
    }
    note_labels(&p.main, &mut labels);
    // branch variables take the joined slot shapes of their label; iterate to a fixpoint
    let mut assumed: BTreeMap<Label, Vec<Shape>> = BTreeMap::new();
    for round in 0.. {
        let mut found = Findings { assumed: assumed.clone(), ..Findings::default() };
        if round == MAX_ROUNDS {
            found.assumed.clear();
            found.assumed.extend(labels.iter().map(|l| (*l, Vec::new())));
        }
        for d in &p.decls {
            let mut scope: Scope = d.params.iter().map(|n| (n.clone(), Shape::UNKNOWN)).collect();
            shape(&d.body, &mut scope, &mut found);
        }
        shape(&p.main, &mut Vec::new(), &mut found);
        let mut next: BTreeMap<Label, Vec<Shape>> = BTreeMap::new();
        for (l, slots) in &found.slots {
            match next.get_mut(l) {
                None => {
                    next.insert(*l, slots.clone());
                }
                Some(acc) if acc.len() == slots.len() => {
                    acc.iter_mut().zip(slots).for_each(|(a, s)| *a = a.join(s));
                }
                Some(acc) => *acc = vec![Shape::UNKNOWN; acc.len().max(slots.len())],
            }
        }
        if next == assumed || round == MAX_ROUNDS {
            return Survey { labels, found };
        }
        assumed = next;
    }
    unreachable!()
}

/// Fixpoint rounds before branch variables fall back to unknown shapes.
const MAX_ROUNDS: usize = 32;

/// Edge `l -> m` when an environment slot of a closure labelled `l` may hold a closure labelled `m`.
#[derive(Debug, Clone)]
pub struct LabelDepGraph {
    pub graph: DiGraphMap<Label, ()>,
}

impl LabelDepGraph {
    pub fn build(p: &Program) -> Self {
        let s = survey(p);
        let mut graph = DiGraphMap::new();
        for l in &s.labels {
            graph.add_node(*l);
        }
        for (l, slots) in &s.found.slots {
            graph.add_node(*l);
            for slot in slots {
                let targets: Vec<Label> = match &slot.labels {
                    Labels::None => vec![],
                    Labels::Some(ls) => ls.iter().copied().collect(),
                    Labels::All => s.labels.iter().copied().collect(),
                };
                for t in targets {
                    graph.add_edge(*l, t, ());
                }
            }
        }
        LabelDepGraph { graph }
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut ls: Vec<Label> = self.graph.nodes().collect();
        ls.sort();
        ls
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Labels lying on a cycle, self-loops included.
    pub fn cyclic_labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        for scc in tarjan_scc(&self.graph) {
            if scc.len() > 1 || self.graph.contains_edge(scc[0], scc[0]) {
                out.extend(scc);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Inlining {
    /// Environment kept directly inside the closure.
    Inline,
    /// Environment interned in the store; the closure holds `(label, key)`.
    Store,
}

/// Per-label decision: labels on a dependency cycle are stored, all others inlined.
pub fn analyze_inlining(p: &Program) -> BTreeMap<Label, Inlining> {
    let g = LabelDepGraph::build(p);
    let cyclic = g.cyclic_labels();
    g.labels()
        .into_iter()
        .map(|l| (l, if cyclic.contains(&l) { Inlining::Store } else { Inlining::Inline }))
        .collect()
}

/// Whether closures may be represented as flat `(label, x1, ..., xn)` sequences:
/// every slot must be exactly one item that is not a closure, and no closure with a
/// non-empty environment may reach a position that observes item boundaries.
pub fn applicability_seq(p: &Program) -> bool {
    let s = survey(p);
    let slots_ok = s.found.slots.iter().all(|(_, slots)| slots.iter().all(|sh| sh.single && sh.labels.is_none()));
    let wide: BTreeSet<Label> =
        s.found.slots.iter().filter(|(_, slots)| !slots.is_empty()).map(|(l, _)| *l).collect();
    let uses_ok = s.found.consumed.iter().all(|ls| match ls {
        Labels::None => true,
        Labels::Some(ls) => ls.is_disjoint(&wide),
        Labels::All => wide.is_empty(),
    });
    slots_ok && uses_ok && LabelDepGraph::build(p).edge_count() == 0
}

/// Slot shapes per constructor site, for diagnostics.
pub fn slot_shapes(p: &Program) -> HashMap<Label, Vec<Vec<Shape>>> {
    let mut out: HashMap<Label, Vec<Vec<Shape>>> = HashMap::new();
    for (l, shapes) in survey(p).found.slots {
        out.entry(l).or_default().push(shapes);
    }
    out
}
