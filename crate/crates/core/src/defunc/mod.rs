//! Whole-program defunctionalization: function values become closures, dynamic
//! calls become calls of generated per-arity dispatchers.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::syntax::analysis::free_vars;
use crate::syntax::{dispatch_name, Branch, Builtin, Expr, FreshNames, FunDecl, Label, Name, Program};

/// Where a dispatcher branch forwards its call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Forward {
    /// The lambda-lifted surrogate named after the label.
    Surrogate,
    /// A declared function referenced by name.
    Declared(Name),
    /// A builtin referenced by name.
    Builtin(Builtin),
}

/// One arm of `dispatch_n`: `label [vars] => target($b1..$bn, vars)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DispatchBranch {
    pub label: Label,
    pub vars: Vec<Name>,
    pub target: Forward,
}

/// Branches collected per arity, in traversal order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DispatchRegistry {
    pub by_arity: BTreeMap<usize, Vec<DispatchBranch>>,
}

impl DispatchRegistry {
    pub fn add(&mut self, arity: usize, branch: DispatchBranch) {
        let bucket = self.by_arity.entry(arity).or_default();
        debug_assert!(bucket.iter().all(|b| b.label != branch.label));
        bucket.push(branch);
    }

    pub fn branches(&self, arity: usize) -> &[DispatchBranch] {
        self.by_arity.get(&arity).map_or(&[], |v| v)
    }

    pub fn is_empty(&self) -> bool {
        self.by_arity.values().all(|v| v.is_empty())
    }
}

/// Surrogate functions produced by lambda lifting.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LiftedSet {
    pub decls: Vec<FunDecl>,
}

/// Issues `ell_1`, `ell_2`, ... in traversal order.
#[derive(Clone, Debug)]
pub struct LabelGen {
    next: u32,
}

impl Default for LabelGen {
    fn default() -> Self {
        LabelGen { next: 1 }
    }
}

impl LabelGen {
    pub fn next_label(&mut self) -> Label {
        let l = Label::new(self.next);
        self.next += 1;
        l
    }
}

/// Mutable state of one defunctionalization pass.
struct Pass<'p> {
    declared: HashSet<&'p Name>,
    reg: DispatchRegistry,
    lifted: LiftedSet,
    gen: LabelGen,
}

/// Defunctionalizes a valid source program.
///
/// Output order: dispatchers by ascending arity, surrogates by label, the original
/// declarations, then the main expression. First-order input is returned unchanged.
pub fn defunctionalize(p: &Program) -> Program {
    let mut pass = Pass {
        declared: p.decls.iter().map(|d| &d.name).collect(),
        reg: DispatchRegistry::default(),
        lifted: LiftedSet::default(),
        gen: LabelGen::default(),
    };
    let decls: Vec<FunDecl> = p
        .decls
        .iter()
        .map(|d| FunDecl { name: d.name.clone(), params: d.params.clone(), body: pass.expr(&d.body) })
        .collect();
    let main = pass.expr(&p.main);
    let mut lifted = pass.lifted.decls;
    lifted.sort_by_key(|d| Label::parse(d.name.as_str()));
    let dispatchers =
        pass.reg.by_arity.iter().filter_map(|(n, branches)| declare_dispatch(*n, branches));
    Program { decls: dispatchers.chain(lifted).chain(decls).collect(), main }
}

/// The E traversal with explicit state, for callers assembling their own pass.
pub fn transform_expr(
    e: &Expr,
    declared: &[Name],
    reg: &mut DispatchRegistry,
    lifted: &mut LiftedSet,
    gen: &mut LabelGen,
) -> Expr {
    let mut pass = Pass {
        declared: declared.iter().collect(),
        reg: std::mem::take(reg),
        lifted: std::mem::take(lifted),
        gen: gen.clone(),
    };
    let out = pass.expr(e);
    *reg = pass.reg;
    *lifted = pass.lifted;
    *gen = pass.gen;
    out
}

impl Pass<'_> {
    fn expr(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Function { params, body } => {
                let label = self.gen.next_label();
                let fv = free_vars(e);
                self.reg.add(params.len(), DispatchBranch { label, vars: fv.clone(), target: Forward::Surrogate });
                let body = self.expr(body);
                self.lifted.decls.push(lambda_lift(params, body, &fv, label));
                Expr::Closure { label, env: fv.iter().map(Expr::var).collect() }
            }
            Expr::NamedRef { name, arity } => {
                let label = self.gen.next_label();
                let target = match Builtin::from_function_name(name.as_str()) {
                    Some(op) if !self.declared.contains(name) => Forward::Builtin(op),
                    _ => Forward::Declared(name.clone()),
                };
                self.reg.add(*arity, DispatchBranch { label, vars: vec![], target });
                Expr::Closure { label, env: vec![] }
            }
            Expr::DynCall { fun, args } => {
                let mut all = vec![self.expr(fun)];
                all.extend(args.iter().map(|a| self.expr(a)));
                Expr::call(dispatch_name(args.len()), all)
            }
            other => other.clone().map_children(&mut |c| self.expr(&c)),
        }
    }
}

/// Closed surrogate `label(params ++ fv) { body }`; `body` is already transformed.
pub fn lambda_lift(params: &[Name], body: Expr, fv: &[Name], label: Label) -> FunDecl {
    FunDecl { name: label.name(), params: params.iter().chain(fv).cloned().collect(), body }
}

/// `dispatch_n($clos, $b1..$bn) { case $clos of { branches } }`, or `None` without branches.
/// Branch variables that would shadow a dispatcher parameter are renamed.
pub fn declare_dispatch(n: usize, branches: &[DispatchBranch]) -> Option<FunDecl> {
    if branches.is_empty() {
        return None;
    }
    let clos = Name::from("clos");
    let params: Vec<Name> = (1..=n).map(|i| Name::from(format!("b{i}"))).collect();
    let reserved: BTreeSet<&Name> = params.iter().chain([&clos]).collect();
    let arms = branches
        .iter()
        .map(|b| {
            let mut fresh = FreshNames::default();
            reserved.iter().for_each(|r| fresh.reserve(r));
            b.vars.iter().for_each(|v| fresh.reserve(v));
            let vars: Vec<Name> =
                b.vars.iter().map(|v| if reserved.contains(v) { fresh.fresh(v.as_str()) } else { v.clone() }).collect();
            let args: Vec<Expr> = params.iter().chain(&vars).map(Expr::var).collect();
            let body = match &b.target {
                Forward::Surrogate => Expr::call(b.label.name(), args),
                Forward::Declared(name) => Expr::call(name.clone(), args),
                Forward::Builtin(op) => Expr::builtin(*op, args),
            };
            Branch { label: b.label, vars, body }
        })
        .collect();
    let body = Expr::CaseOf { scrutinee: Box::new(Expr::var(&clos)), branches: arms };
    Some(FunDecl { name: dispatch_name(n), params: std::iter::once(clos).chain(params).collect(), body })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{check_first_order, parse, print_program, validate};

    #[test]
    fn named_reference_and_dynamic_call() {
        let p = parse("let $exp := pow#2 return $exp(2, 3)").unwrap();
        let q = defunctionalize(&p);
        let expected = parse(
            "declare function dispatch_2($clos, $b1, $b2) { case $clos of { ell_1 [] => pow($b1, $b2) } }; \
             let $exp := closure ell_1 [] return dispatch_2($exp, 2, 3)",
        )
        .unwrap();
        assert_eq!(q, expected, "{}", print_program(&q));
    }

    #[test]
    fn literal_becomes_closure_and_surrogate() {
        let p = parse("let $k := 1 let $key := function($x) { $x } let $seq := (1, 2) return function() { $seq[$key(.) = $k] }")
            .unwrap();
        let q = defunctionalize(&p);
        assert_eq!(q.decl(&Name::from("ell_2")).unwrap().params.len(), 3);
        let text = print_program(&q);
        assert!(text.contains("closure ell_2 [$k, $key, $seq]"), "{text}");
        assert!(text.contains("$seq[dispatch_1($key, .) = $k]"), "{text}");
        assert!(check_first_order(&q).is_empty());
        assert!(validate(&q).is_empty(), "{:?}", validate(&q));
    }

    #[test]
    fn first_order_programs_are_unchanged() {
        let p = parse("declare function f($x) { if ($x = 0) then 0 else f($x - 1) }; f(3)").unwrap();
        assert_eq!(defunctionalize(&p), p);
    }

    #[test]
    fn colliding_branch_variables_are_renamed() {
        let p = parse("let $b1 := 1 return function($y) { $y + $b1 }").unwrap();
        let q = defunctionalize(&p);
        let d = q.decl(&Name::from("dispatch_1")).unwrap();
        let text = crate::syntax::printer::print_decl(d);
        assert!(text.contains("ell_1 [$b1_1] => ell_1($b1, $b1_1)"), "{text}");
    }

    #[test]
    fn builtin_references_call_the_builtin() {
        let q = defunctionalize(&parse("count#1").unwrap());
        let d = q.decl(&Name::from("dispatch_1")).unwrap();
        assert!(matches!(&d.body, Expr::CaseOf { branches, .. }
            if branches[0].body == Expr::builtin(Builtin::Count, vec![Expr::var(&Name::from("b1"))])));
    }

    #[test]
    fn no_branches_no_dispatcher() {
        assert!(declare_dispatch(2, &[]).is_none());
    }
}
