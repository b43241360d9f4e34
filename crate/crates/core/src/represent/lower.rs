//! Lowering of closure constructors and case-of into first-order data.

use thiserror::Error;

use crate::syntax::analysis::has_closure_forms;
use crate::syntax::{
    parse, Branch, Builtin, Expr, FreshNames, FunDecl, Label, Name, NodeTest, Program, TypeCase, TypeTest,
};

use super::shape::applicability_seq;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReprChoice {
    Node,
    Seq,
    Auto,
}

impl std::str::FromStr for ReprChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "node" => Ok(ReprChoice::Node),
            "seq" => Ok(ReprChoice::Seq),
            "auto" => Ok(ReprChoice::Auto),
            _ => Err(format!("unknown representation `{s}`")),
        }
    }
}

/// The representation a lowering actually used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Repr {
    Node,
    Seq,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReprError {
    #[error("the sequence representation is not applicable: some environment slot may hold a sequence or a closure")]
    NotApplicable,
}

/// Lowers with the requested representation; `Auto` prefers sequences when applicable.
pub fn lower(p: &Program, choice: ReprChoice) -> Result<(Program, Repr), ReprError> {
    match choice {
        ReprChoice::Node => Ok((lower_node(p), Repr::Node)),
        ReprChoice::Seq => lower_seq(p).map(|q| (q, Repr::Seq)),
        ReprChoice::Auto if applicability_seq(p) => lower_seq(p).map(|q| (q, Repr::Seq)),
        ReprChoice::Auto => Ok((lower_node(p), Repr::Node)),
    }
}

const HELPERS: &str = r#"
declare function wrap($xs) {
  for $x in $xs return
    typeswitch ($x)
      case $i as integer return wrap-atom($i)
      case $s as string return wrap-atom($s)
      case $b as boolean return wrap-atom($b)
      default $n return $n
};
declare function wrap-atom($a) {
  element atom {
    typeswitch ($a)
      case $i as integer return element integer { $i }
      case $s as string return element string { $s }
      default $b return element boolean { $b }
  }
};
declare function unwrap($xs) {
  for $x in $xs return
    typeswitch ($x)
      case $a as element(atom) return unwrap-atom($a/child::node())
      default $n return $n
};
declare function unwrap-atom($t) {
  typeswitch ($t)
    case $i as element(integer) return integer($i)
    case $s as element(string) return string($s)
    default $b return boolean($b)
};
()
"#;

/// Helper declarations, renamed away from the names in `fresh`.
fn helpers(fresh: &mut FreshNames) -> (Vec<FunDecl>, Name, Name) {
    let mut decls = parse(HELPERS).expect("helper declarations parse").decls;
    let renames: Vec<(Name, Name)> =
        decls.iter().map(|d| (d.name.clone(), fresh.fresh(d.name.as_str()))).collect();
    let rename = |n: &Name| renames.iter().find(|(a, _)| a == n).map_or(n.clone(), |(_, b)| b.clone());
    for d in &mut decls {
        d.name = rename(&d.name);
        d.body = std::mem::replace(&mut d.body, Expr::empty()).transform_up(&mut |e| match e {
            Expr::Call { name, args } => Expr::Call { name: rename(&name), args },
            other => other,
        });
    }
    let wrap = rename(&Name::from("wrap"));
    let unwrap = rename(&Name::from("unwrap"));
    (decls, wrap, unwrap)
}

fn map_bodies(p: &Program, f: &mut impl FnMut(Expr) -> Expr) -> Program {
    Program {
        decls: p.decls.iter().map(|d| FunDecl { body: d.body.clone().transform_up(f), ..d.clone() }).collect(),
        main: p.main.clone().transform_up(f),
    }
}

fn str_eq(lhs: Expr, label: Label) -> Expr {
    Expr::binary(Builtin::Eq, lhs, Expr::label_atom(label))
}

fn error() -> Expr {
    Expr::builtin(Builtin::Error, vec![])
}

/// Closures as `element ell_k { element env { wrap(x1) }, ... }`, eliminated by `typeswitch`.
pub fn lower_node(p: &Program) -> Program {
    if !has_closure_forms(p) {
        return p.clone();
    }
    let mut fresh = FreshNames::for_program(p);
    let (helper_decls, wrap, unwrap) = helpers(&mut fresh);
    let env_tag = Name::from("env");
    let mut rewrite = |e: Expr| match e {
        Expr::Closure { label, env } => {
            let slots = env
                .into_iter()
                .map(|x| Expr::element(env_tag.clone(), Expr::call(wrap.clone(), vec![x])))
                .collect();
            Expr::element(label.name(), Expr::seq(slots))
        }
        Expr::CaseOf { scrutinee, branches } => {
            let clos = fresh.fresh("clos");
            let envv = fresh.fresh("env");
            let other = fresh.fresh("other");
            let s = fresh.fresh("s");
            let e = fresh.fresh("e");
            node_case(*scrutinee, branches, &unwrap, [clos, envv, other, s, e])
        }
        other => other,
    };
    let lowered = map_bodies(p, &mut rewrite);
    Program { decls: helper_decls.into_iter().chain(lowered.decls).collect(), main: lowered.main }
}

fn node_case(scrutinee: Expr, branches: Vec<Branch>, unwrap: &Name, names: [Name; 5]) -> Expr {
    let [clos, envv, other, s, e] = names;
    let mut atom_arms = Vec::new();
    let cases = branches
        .into_iter()
        .map(|b| {
            if b.vars.is_empty() {
                atom_arms.push((b.label, b.body.clone()));
            }
            let slots = Expr::child(Expr::var(&clos), NodeTest::Tag(Name::from("env")));
            let mut body = b.body;
            for (j, v) in b.vars.iter().enumerate().rev() {
                let content = Expr::child(Expr::filter(Expr::var(&envv), Expr::Int(j as i64 + 1)), NodeTest::AnyNode);
                body = Expr::let_in(v.clone(), Expr::call(unwrap.clone(), vec![content]), body);
            }
            if !b.vars.is_empty() {
                body = Expr::let_in(envv.clone(), slots, body);
            }
            TypeCase { test: TypeTest::Element(b.label.name()), var: clos.clone(), body }
        })
        .collect::<Vec<_>>();
    // label atoms stand for closures with empty environments
    let mut atoms = error();
    for (label, body) in atom_arms.into_iter().rev() {
        atoms = Expr::if_then(str_eq(Expr::var(&s), label), body, atoms);
    }
    let default = Expr::TypeSwitch {
        scrutinee: Box::new(Expr::var(&other)),
        cases: vec![TypeCase { test: TypeTest::String, var: s, body: atoms }],
        default_var: e,
        default: Box::new(error()),
    };
    if cases.is_empty() {
        return Expr::let_in(other, scrutinee, default);
    }
    Expr::TypeSwitch { scrutinee: Box::new(scrutinee), cases, default_var: other, default: Box::new(default) }
}

/// Closures as flat sequences `("ell_k", x1, ..., xn)`, eliminated by positional lookup.
pub fn lower_seq(p: &Program) -> Result<Program, ReprError> {
    if !applicability_seq(p) {
        return Err(ReprError::NotApplicable);
    }
    if !has_closure_forms(p) {
        return Ok(p.clone());
    }
    let mut fresh = FreshNames::for_program(p);
    let mut rewrite = |e: Expr| match e {
        Expr::Closure { label, env } => {
            Expr::seq(std::iter::once(Expr::label_atom(label)).chain(env).collect())
        }
        Expr::CaseOf { scrutinee, branches } => {
            let clos = fresh.fresh("clos");
            let mut chain = error();
            for b in branches.into_iter().rev() {
                let mut body = b.body;
                for (j, v) in b.vars.iter().enumerate().rev() {
                    body = Expr::let_in(v.clone(), Expr::filter(Expr::var(&clos), Expr::Int(j as i64 + 2)), body);
                }
                let head = Expr::filter(Expr::var(&clos), Expr::Int(1));
                chain = Expr::if_then(str_eq(head, b.label), body, chain);
            }
            Expr::let_in(clos, *scrutinee, chain)
        }
        other => other,
    };
    Ok(map_bodies(p, &mut rewrite))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{eval, serialize, EngineKind, EvalOptions};
    use crate::syntax::{check_first_order, print_program};

    fn run(p: &Program, kind: EngineKind) -> String {
        serialize(&eval(p, kind, EvalOptions::default()).unwrap().value)
    }

    #[test]
    fn empty_closure_is_an_empty_element() {
        let p = parse("closure ell_2 []").unwrap();
        let q = lower_node(&p);
        assert_eq!(q.main, Expr::element(Name::from("ell_2"), Expr::empty()));
        assert_eq!(run(&q, EngineKind::Lowered), "<ell_2/>");
    }

    #[test]
    fn atoms_are_wrapped_with_their_type() {
        let q = lower_node(&parse("closure ell_1 [1]").unwrap());
        assert_eq!(run(&q, EngineKind::Lowered), "<ell_1><env><atom><integer>1</integer></atom></env></ell_1>");
    }

    #[test]
    fn node_lowering_round_trips_values() {
        let src = "let $c := closure ell_1 [1, \"\", true(), (2, 3), element a { 4 }, ()] \
                   return case $c of { ell_1 [$a, $b, $t, $s, $n, $z] => ($a, $b, $t, $s, $n, count($z)) }";
        let p = parse(src).unwrap();
        let q = lower_node(&p);
        assert!(check_first_order(&q).is_empty());
        assert!(!has_closure_forms(&q), "{}", print_program(&q));
        assert_eq!(run(&p, EngineKind::Target), run(&q, EngineKind::Lowered));
    }

    #[test]
    fn label_atoms_are_dispatched_in_both_representations() {
        let p = parse("for $c in (\"ell_1\", closure ell_2 [5]) return case $c of { ell_1 [] => 0 ; ell_2 [$x] => $x }")
            .unwrap();
        assert_eq!(run(&p, EngineKind::Target), "0\n5");
        assert_eq!(run(&lower_node(&p), EngineKind::Lowered), "0\n5");
        // a sequence of closures would flatten
        assert_eq!(lower_seq(&p), Err(ReprError::NotApplicable));
        let q = parse("let $a := \"ell_1\" let $b := closure ell_2 [5] \
                       return (case $a of { ell_1 [] => 0 ; ell_2 [$x] => $x }, case $b of { ell_1 [] => 0 ; ell_2 [$x] => $x })")
            .unwrap();
        assert_eq!(run(&lower_seq(&q).unwrap(), EngineKind::Lowered), "0\n5");
    }

    #[test]
    fn sequence_layout() {
        let p = parse("let $k := 0 return closure ell_1 [$k]").unwrap();
        let q = lower_seq(&p).unwrap();
        assert_eq!(run(&q, EngineKind::Lowered), "ell_1\n0");
        assert_eq!(lower_seq(&parse("closure ell_2 []").unwrap()).unwrap().main, Expr::Str("ell_2".into()));
    }

    #[test]
    fn sequence_lowering_requires_applicability() {
        let p = parse("let $s := (1, 2) return closure ell_1 [$s]").unwrap();
        assert_eq!(lower_seq(&p), Err(ReprError::NotApplicable));
        assert_eq!(lower(&p, ReprChoice::Auto).unwrap().1, Repr::Node);
    }

    #[test]
    fn helper_names_avoid_user_declarations() {
        let p = parse("declare function wrap($x) { $x }; closure ell_1 [wrap(1)]").unwrap();
        let q = lower_node(&p);
        assert!(crate::syntax::validate(&q).is_empty());
        assert_eq!(q.decls.iter().filter(|d| d.name.as_str() == "wrap").count(), 1);
        assert!(q.decls.iter().any(|d| d.name.as_str() == "wrap_1"));
    }

    #[test]
    fn first_order_programs_are_untouched() {
        let p = parse("declare function f($x) { $x }; f(1)").unwrap();
        assert_eq!(lower_node(&p), p);
        assert_eq!(lower_seq(&p).unwrap(), p);
    }
}
