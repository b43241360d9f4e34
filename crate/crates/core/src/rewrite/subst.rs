//! Capture-avoiding substitution and binder freshening.

use std::collections::BTreeSet;

use crate::syntax::analysis::free_var_set;
use crate::syntax::{Branch, Expr, FreshNames, Name, TypeCase};

/// Fresh variant of `n`, reusing its base when it already carries a `_k` suffix.
pub(crate) fn fresh_like(n: &Name, fresh: &mut FreshNames) -> Name {
    let s = n.as_str();
    let base = match s.rsplit_once('_') {
        Some((b, k)) if !b.is_empty() && !k.is_empty() && k.bytes().all(|c| c.is_ascii_digit()) => b,
        _ => s,
    };
    fresh.fresh(base)
}

/// Replaces free occurrences of `$x` in `e` by `d`, renaming binders that would capture
/// free variables of `d`.
pub fn subst(e: Expr, x: &Name, d: &Expr, fresh: &mut FreshNames) -> Expr {
    let fv = free_var_set(d);
    go(e, x, d, &fv, fresh)
}

/// Renames free occurrences of `$from` to `$to`.
pub fn rename(e: Expr, from: &Name, to: &Name, fresh: &mut FreshNames) -> Expr {
    subst(e, from, &Expr::var(to), fresh)
}

fn go(e: Expr, x: &Name, d: &Expr, fv: &BTreeSet<Name>, fresh: &mut FreshNames) -> Expr {
    match e {
        Expr::Var(v) if &v == x => d.clone(),
        Expr::For { var, source, body } => {
            let source = go(*source, x, d, fv, fresh);
            let (mut vars, body) = under(vec![var], *body, x, d, fv, fresh);
            Expr::for_in(vars.remove(0), source, body)
        }
        Expr::Let { var, def, body } => {
            let def = go(*def, x, d, fv, fresh);
            let (mut vars, body) = under(vec![var], *body, x, d, fv, fresh);
            Expr::let_in(vars.remove(0), def, body)
        }
        Expr::Function { params, body } => {
            let (params, body) = under(params, *body, x, d, fv, fresh);
            Expr::Function { params, body: Box::new(body) }
        }
        Expr::TypeSwitch { scrutinee, cases, default_var, default } => {
            let scrutinee = Box::new(go(*scrutinee, x, d, fv, fresh));
            let cases = cases
                .into_iter()
                .map(|c| {
                    let (mut vars, body) = under(vec![c.var], c.body, x, d, fv, fresh);
                    TypeCase { test: c.test, var: vars.remove(0), body }
                })
                .collect();
            let (mut vars, default) = under(vec![default_var], *default, x, d, fv, fresh);
            Expr::TypeSwitch { scrutinee, cases, default_var: vars.remove(0), default: Box::new(default) }
        }
        Expr::CaseOf { scrutinee, branches } => {
            let scrutinee = Box::new(go(*scrutinee, x, d, fv, fresh));
            let branches = branches
                .into_iter()
                .map(|b| {
                    let (vars, body) = under(b.vars, b.body, x, d, fv, fresh);
                    Branch { label: b.label, vars, body }
                })
                .collect();
            Expr::CaseOf { scrutinee, branches }
        }
        other => other.map_children(&mut |c| go(c, x, d, fv, fresh)),
    }
}

fn under(
    binders: Vec<Name>,
    body: Expr,
    x: &Name,
    d: &Expr,
    fv: &BTreeSet<Name>,
    fresh: &mut FreshNames,
) -> (Vec<Name>, Expr) {
    if binders.contains(x) || !free_var_set(&body).contains(x) {
        return (binders, body);
    }
    let mut body = body;
    let mut out = Vec::with_capacity(binders.len());
    for b in binders {
        if fv.contains(&b) {
            let nb = fresh_like(&b, fresh);
            body = rename(body, &b, &nb, fresh);
            out.push(nb);
        } else {
            out.push(b);
        }
    }
    (out, go(body, x, d, fv, fresh))
}

/// Renames every binder in `e` to a fresh name.
pub fn freshen(e: Expr, fresh: &mut FreshNames) -> Expr {
    let rebind = |v: Name, body: Expr, fresh: &mut FreshNames| {
        let nv = fresh_like(&v, fresh);
        let body = rename(body, &v, &nv, fresh);
        (nv, body)
    };
    match e {
        Expr::For { var, source, body } => {
            let (var, body) = rebind(var, *body, fresh);
            Expr::for_in(var, freshen(*source, fresh), freshen(body, fresh))
        }
        Expr::Let { var, def, body } => {
            let (var, body) = rebind(var, *body, fresh);
            Expr::let_in(var, freshen(*def, fresh), freshen(body, fresh))
        }
        Expr::Function { params, body } => {
            let (params, body) = rebind_all(params, *body, fresh);
            Expr::Function { params, body: Box::new(freshen(body, fresh)) }
        }
        Expr::TypeSwitch { scrutinee, cases, default_var, default } => {
            let scrutinee = Box::new(freshen(*scrutinee, fresh));
            let cases = cases
                .into_iter()
                .map(|c| {
                    let (var, body) = rebind(c.var, c.body, fresh);
                    TypeCase { test: c.test, var, body: freshen(body, fresh) }
                })
                .collect();
            let (default_var, default) = rebind(default_var, *default, fresh);
            Expr::TypeSwitch { scrutinee, cases, default_var, default: Box::new(freshen(default, fresh)) }
        }
        Expr::CaseOf { scrutinee, branches } => {
            let scrutinee = Box::new(freshen(*scrutinee, fresh));
            let branches = branches
                .into_iter()
                .map(|b| {
                    let (vars, body) = rebind_all(b.vars, b.body, fresh);
                    Branch { label: b.label, vars, body: freshen(body, fresh) }
                })
                .collect();
            Expr::CaseOf { scrutinee, branches }
        }
        other => other.map_children(&mut |c| freshen(c, fresh)),
    }
}

fn rebind_all(vars: Vec<Name>, mut body: Expr, fresh: &mut FreshNames) -> (Vec<Name>, Expr) {
    let mut out = Vec::with_capacity(vars.len());
    for v in vars {
        let nv = fresh_like(&v, fresh);
        body = rename(body, &v, &nv, fresh);
        out.push(nv);
    }
    (out, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_expr, print_expr};

    fn fresh_for(e: &Expr) -> FreshNames {
        let mut f = FreshNames::default();
        f.reserve_expr(e);
        f
    }

    #[test]
    fn substitution_avoids_capture() {
        let e = parse_expr("for $y in (1, 2) return $x + $y").unwrap();
        let d = parse_expr("$y").unwrap();
        let mut f = fresh_for(&e);
        let out = subst(e, &Name::from("x"), &d, &mut f);
        assert_eq!(print_expr(&out), "for $y_1 in (1, 2) return $y + $y_1");
    }

    #[test]
    fn shadowed_occurrences_stay() {
        let e = parse_expr("let $x := $x return $x").unwrap();
        let mut f = fresh_for(&e);
        let out = subst(e, &Name::from("x"), &Expr::Int(3), &mut f);
        assert_eq!(print_expr(&out), "let $x := 3 return $x");
    }

    #[test]
    fn freshen_renames_all_binders() {
        let e = parse_expr("let $a := 1 return for $b in $a return $b + $c").unwrap();
        let mut f = fresh_for(&e);
        let out = freshen(e, &mut f);
        assert_eq!(out, parse_expr("let $a_1 := 1 for $b_1 in $a_1 return $b_1 + $c").unwrap());
    }
}
