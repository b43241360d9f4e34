//! Closure-specific simplifications: label atoms for empty environments,
//! removal of single-branch dispatchers, and dead declaration removal.

use std::collections::HashMap;

use crate::syntax::analysis::uses_free_context;
use crate::syntax::{dispatch_arity, Expr, FreshNames, FunDecl, Name, Program};

use super::callgraph::drop_unreachable;
use super::unfold::inline_call;

/// The decl a call site expands into when `d` is a dispatcher with exactly one branch.
fn singleton_expansion(d: &FunDecl) -> Option<FunDecl> {
    let n = dispatch_arity(&d.name)?;
    if d.params.len() != n + 1 {
        return None;
    }
    let Expr::CaseOf { scrutinee, branches } = &d.body else { return None };
    if !matches!(&**scrutinee, Expr::Var(v) if *v == d.params[0]) || branches.len() != 1 {
        return None;
    }
    let b = &branches[0];
    // without an environment the branch taken needs no inspection of the closure
    let body = if b.vars.is_empty() { b.body.clone() } else { d.body.clone() };
    (!uses_free_context(&body)).then(|| FunDecl { body, ..d.clone() })
}

pub fn simplify(p: &Program) -> Program {
    let singles: HashMap<Name, FunDecl> =
        p.decls.iter().filter_map(|d| singleton_expansion(d).map(|e| (d.name.clone(), e))).collect();
    let mut fresh = FreshNames::for_program(p);
    let mut f = |e: Expr| match e {
        Expr::Closure { label, env } if env.is_empty() => Expr::label_atom(label),
        Expr::Call { name, args } => match singles.get(&name) {
            Some(d) => inline_call(d, args, &mut fresh),
            None => Expr::Call { name, args },
        },
        other => other,
    };
    let decls: Vec<FunDecl> =
        p.decls.iter().map(|d| FunDecl { body: d.body.clone().transform_up(&mut f), ..d.clone() }).collect();
    let main = p.main.clone().transform_up(&mut f);
    drop_unreachable(Program { decls, main })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_expr, print_expr};

    #[test]
    fn empty_closures_become_atoms() {
        assert_eq!(print_expr(&simplify(&parse("closure ell_2 []").unwrap()).main), "\"ell_2\"");
    }

    #[test]
    fn singleton_dispatchers_disappear() {
        let src = "declare function dispatch_1($clos, $b1) { case $clos of { ell_2 [] => ell_2($b1) } }; \
                   declare function ell_2($x) { $x mod 2 }; \
                   for $y in (1, 2, 3) return dispatch_1($f, $y)";
        let q = simplify(&parse(src).unwrap());
        assert!(q.decl(&Name::from("dispatch_1")).is_none());
        assert_eq!(q.main, parse_expr("for $y in (1, 2, 3) let $clos_1 := $f let $b1_1 := $y return ell_2($b1_1)").unwrap());
    }

    #[test]
    fn shared_dispatchers_stay() {
        let src = "declare function dispatch_1($clos, $b1) { case $clos of { ell_1 [] => $b1 ; ell_2 [] => 0 } }; \
                   dispatch_1(closure ell_1 [], 4)";
        let q = simplify(&parse(src).unwrap());
        assert!(q.decl(&Name::from("dispatch_1")).is_some());
    }
}
