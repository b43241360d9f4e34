//! Unfolding: let-inlining of simple definitions, inlining of non-recursive
//! functions, and the let/for normalizations that expose closures to cancellation.

use std::collections::HashMap;

use crate::syntax::analysis::{free_var_set, uses_free_context};
use crate::syntax::{Expr, FreshNames, FunDecl, Name, Program};

use super::callgraph::{drop_unreachable, CallGraph};
use super::subst::{fresh_like, freshen, rename, subst};

/// Bodies up to this size are inlined at every call site; larger ones only at a unique site.
/// Kept small so multi-site inlining cannot outgrow what cancellation removes.
pub const INLINE_SIZE: usize = 10;

/// Literals, variables, `()` and closures whose slots are all simple.
pub fn is_simple(e: &Expr) -> bool {
    match e {
        Expr::Int(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Var(_) => true,
        Expr::Seq(items) => items.is_empty(),
        Expr::Closure { env, .. } => env.iter().all(is_simple),
        _ => false,
    }
}

/// Statically exactly one item.
fn single_item(e: &Expr) -> bool {
    matches!(e, Expr::Int(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Closure { .. } | Expr::Element { .. })
}

/// `let $p1 := a1 ... return body` with parameters and binders of `d` renamed apart.
pub fn inline_call(d: &FunDecl, args: Vec<Expr>, fresh: &mut FreshNames) -> Expr {
    let mut body = d.body.clone();
    let mut params = Vec::with_capacity(d.params.len());
    for p in &d.params {
        let np = fresh_like(p, fresh);
        body = rename(body, p, &np, fresh);
        params.push(np);
    }
    let body = freshen(body, fresh);
    params.into_iter().zip(args).rev().fold(body, |acc, (p, a)| Expr::let_in(p, a, acc))
}

/// Renames `$v` in `inner` when it would capture a free variable of `outer`.
fn apart(v: Name, inner: Expr, outer: &Expr, fresh: &mut FreshNames) -> (Name, Expr) {
    if free_var_set(outer).contains(&v) {
        let nv = fresh_like(&v, fresh);
        let inner = rename(inner, &v, &nv, fresh);
        (nv, inner)
    } else {
        (v, inner)
    }
}

fn step(e: Expr, inlinable: &HashMap<Name, &FunDecl>, fresh: &mut FreshNames) -> Expr {
    match e {
        Expr::Call { name, args } => match inlinable.get(&name) {
            Some(d) => inline_call(d, args, fresh),
            None => Expr::Call { name, args },
        },
        Expr::Let { var, def, body } => {
            if is_simple(&def) {
                return subst(*body, &var, &def, fresh);
            }
            if matches!(&*body, Expr::Var(v) if *v == var) {
                return *def;
            }
            match *def {
                // let $x := (let $y := d return e) return b  ~>  let $y := d return let $x := e return b
                Expr::Let { var: y, def: d, body: e } => {
                    let (y, e) = apart(y, *e, &body, fresh);
                    Expr::let_in(y, *d, Expr::let_in(var, e, *body))
                }
                def => Expr::let_in(var, def, *body),
            }
        }
        Expr::For { var, source, body } => match *source {
            // for $a in (for $b in s return e) return b  ~>  for $b in s return for $a in e return b
            Expr::For { var: b, source: s, body: e } => {
                let (b, e) = apart(b, *e, &body, fresh);
                Expr::for_in(b, *s, Expr::for_in(var, e, *body))
            }
            Expr::Let { var: v, def: d, body: e } => {
                let (v, e) = apart(v, *e, &body, fresh);
                Expr::let_in(v, *d, Expr::for_in(var, e, *body))
            }
            s if single_item(&s) => Expr::let_in(var, s, *body),
            s => Expr::for_in(var, s, *body),
        },
        Expr::CaseOf { scrutinee, branches } => match *scrutinee {
            Expr::Let { var: v, def: d, body: e } => {
                let rest = Expr::CaseOf { scrutinee: Box::new(Expr::empty()), branches };
                let (v, e) = apart(v, *e, &rest, fresh);
                let Expr::CaseOf { branches, .. } = rest else { unreachable!() };
                Expr::let_in(v, *d, Expr::CaseOf { scrutinee: Box::new(e), branches })
            }
            s => Expr::CaseOf { scrutinee: Box::new(s), branches },
        },
        other => other,
    }
}

/// One bottom-up unfolding sweep over all bodies, then removal of unreachable declarations.
pub fn unfold(p: &Program) -> Program {
    let graph = CallGraph::build(p);
    let inlinable: HashMap<Name, &FunDecl> = p
        .decls
        .iter()
        .filter(|d| {
            !graph.is_recursive(&d.name)
                && !uses_free_context(&d.body)
                && (graph.call_sites(&d.name) <= 1 || d.body.size() <= INLINE_SIZE)
        })
        .map(|d| (d.name.clone(), d))
        .collect();
    let mut fresh = FreshNames::for_program(p);
    let mut f = |e: Expr| step(e, &inlinable, &mut fresh);
    let decls: Vec<FunDecl> =
        p.decls.iter().map(|d| FunDecl { body: d.body.clone().transform_up(&mut f), ..d.clone() }).collect();
    let main = p.main.clone().transform_up(&mut f);
    drop_unreachable(Program { decls, main })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_expr, print_expr};

    fn unfold_main(src: &str) -> String {
        print_expr(&unfold(&parse(src).unwrap()).main)
    }

    #[test]
    fn literal_lets_are_inlined() {
        assert_eq!(unfold_main("let $x := 1 return $x + $x"), "1 + 1");
    }

    #[test]
    fn empty_closures_are_simple() {
        assert_eq!(
            unfold_main("let $c := closure ell_2 [] return dispatch_1($c, 5)"),
            "dispatch_1(closure ell_2 [], 5)"
        );
        assert_eq!(unfold_main("let $c := closure ell_1 [$c0, 1] return ($c, $c)"), "(closure ell_1 [$c0, 1], closure ell_1 [$c0, 1])");
    }

    #[test]
    fn recursive_functions_are_kept() {
        let src = "declare function fold-right($f, $z, $seq) { if (empty($seq)) then $z else \
                   dispatch_2($f, head($seq), fold-right($f, $z, tail($seq))) }; \
                   declare function dispatch_2($clos, $b1, $b2) { case $clos of { ell_1 [] => pow($b1, $b2) } }; \
                   fold-right(closure ell_1 [], 1, (2, 3))";
        let p = unfold(&parse(src).unwrap());
        assert_eq!(print_expr(&p.main), "fold-right(closure ell_1 [], 1, (2, 3))");
        assert!(p.decl(&Name::from("fold-right")).is_some());
    }

    #[test]
    fn for_over_a_closure_becomes_let() {
        assert_eq!(unfold_main("for $g in closure ell_1 [1] return $g"), "let $g := closure ell_1 [1] return $g");
    }

    #[test]
    fn nested_iteration_is_reassociated() {
        let p = unfold(&parse("for $a in (for $b in (1, 2) return $b * 2) return $a + $b").unwrap());
        assert_eq!(p.main, parse_expr("for $b_1 in (1, 2) for $a in $b_1 * 2 return $a + $b").unwrap());
    }

    #[test]
    fn context_dependent_functions_are_not_inlined() {
        let src = "declare function f() { . }; (1, 2)[f() = 1]";
        assert_eq!(unfold(&parse(src).unwrap()).decls.len(), 1);
    }
}
