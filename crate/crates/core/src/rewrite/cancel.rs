//! Cancellation of closure construction against immediate elimination.

use thiserror::Error;

use crate::syntax::analysis::free_var_set;
use crate::syntax::{Expr, FreshNames, FunDecl, Label, Program};

use super::subst::{fresh_like, rename};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("case-of over {label} has no branch for it")]
    MissingBranch { label: Label },
    #[error("branch for {label} binds {vars} variable(s) but the closure carries {slots}")]
    BranchShape { label: Label, vars: usize, slots: usize },
}

/// `case closure l[e1..en] of { l[$v1..$vn] => e }` becomes `let $v1 := e1 ... return e`.
pub fn cancel_case_of(p: &Program) -> Result<Program, RewriteError> {
    let mut fresh = FreshNames::for_program(p);
    let mut err = None;
    let mut f = |e: Expr| match e {
        Expr::CaseOf { scrutinee, branches } if scrutinee.static_label().is_some() && err.is_none() => {
            match cancel(*scrutinee, branches, &mut fresh) {
                Ok(e) => e,
                Err(e) => {
                    err = Some(e);
                    Expr::empty()
                }
            }
        }
        other => other,
    };
    let decls: Vec<FunDecl> =
        p.decls.iter().map(|d| FunDecl { body: d.body.clone().transform_up(&mut f), ..d.clone() }).collect();
    let main = p.main.clone().transform_up(&mut f);
    match err {
        Some(e) => Err(e),
        None => Ok(Program { decls, main }),
    }
}

fn cancel(scrutinee: Expr, branches: Vec<crate::syntax::Branch>, fresh: &mut FreshNames) -> Result<Expr, RewriteError> {
    let (label, slots) = match scrutinee {
        Expr::Closure { label, env } => (label, env),
        other => (other.static_label().expect("static label"), Vec::new()),
    };
    let b = branches.into_iter().find(|b| b.label == label).ok_or(RewriteError::MissingBranch { label })?;
    if b.vars.len() != slots.len() {
        return Err(RewriteError::BranchShape { label, vars: b.vars.len(), slots: slots.len() });
    }
    let captured = free_var_set(&Expr::Seq(slots.clone()));
    let mut body = b.body;
    let mut vars = Vec::with_capacity(b.vars.len());
    for v in b.vars {
        if captured.contains(&v) {
            let nv = fresh_like(&v, fresh);
            body = rename(body, &v, &nv, fresh);
            vars.push(nv);
        } else {
            vars.push(v);
        }
    }
    Ok(vars.into_iter().zip(slots).rev().fold(body, |acc, (v, s)| Expr::let_in(v, s, acc)))
}
