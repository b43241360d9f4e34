//! Static analyses: free variables, first-order conformance and validation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::ast::*;
use super::parser::is_reserved;

/// Variables bound by `e` for each of its direct children, in `children()` order.
pub(crate) fn child_binders(e: &Expr) -> Vec<Vec<&Name>> {
    match e {
        Expr::For { var, .. } | Expr::Let { var, .. } => vec![vec![], vec![var]],
        Expr::Function { params, .. } => vec![params.iter().collect()],
        Expr::TypeSwitch { cases, default_var, .. } => std::iter::once(vec![])
            .chain(cases.iter().map(|c| vec![&c.var]))
            .chain(std::iter::once(vec![default_var]))
            .collect(),
        Expr::CaseOf { branches, .. } => {
            std::iter::once(vec![]).chain(branches.iter().map(|b| b.vars.iter().collect())).collect()
        }
        other => vec![vec![]; other.children().len()],
    }
}

fn collect_free<'a>(e: &'a Expr, bound: &mut Vec<&'a Name>, out: &mut BTreeSet<Name>) {
    if let Expr::Var(v) = e {
        if !bound.contains(&v) {
            out.insert(v.clone());
        }
        return;
    }
    for (child, binders) in e.children().into_iter().zip(child_binders(e)) {
        let mark = bound.len();
        bound.extend(binders);
        collect_free(child, bound, out);
        bound.truncate(mark);
    }
}

/// Free variables of `e` as an ordered set.
pub fn free_var_set(e: &Expr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut Vec::new(), &mut out);
    out
}

/// Free variables of `e`, sorted lexicographically by name.
pub fn free_vars(e: &Expr) -> Vec<Name> {
    free_var_set(e).into_iter().collect()
}

/// Whether `e` mentions the context item outside any predicate or step that rebinds it.
pub fn uses_free_context(e: &Expr) -> bool {
    match e {
        Expr::Context => true,
        Expr::Filter { input, .. } => uses_free_context(input),
        Expr::Child { input, .. } => uses_free_context(input),
        // function bodies do not see the caller's context item
        Expr::Function { .. } => false,
        other => other.children().into_iter().any(uses_free_context),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HigherOrderForm {
    FunctionLiteral,
    NamedFunRef,
    DynamicCall,
}

impl fmt::Display for HigherOrderForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HigherOrderForm::FunctionLiteral => "function literal",
            HigherOrderForm::NamedFunRef => "named function reference",
            HigherOrderForm::DynamicCall => "dynamic function call",
        })
    }
}

/// A higher-order construct found in a program that should be first-order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub form: HigherOrderForm,
    /// `main` or `decl <name>`, followed by child indices from the root.
    pub path: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.form, self.path)
    }
}

fn find_higher_order(e: &Expr, path: &mut Vec<usize>, root: &str, out: &mut Vec<Violation>) {
    let form = match e {
        Expr::Function { .. } => Some(HigherOrderForm::FunctionLiteral),
        Expr::NamedRef { .. } => Some(HigherOrderForm::NamedFunRef),
        Expr::DynCall { .. } => Some(HigherOrderForm::DynamicCall),
        _ => None,
    };
    if let Some(form) = form {
        let mut p = root.to_string();
        for i in path.iter() {
            p.push_str(&format!("/{i}"));
        }
        out.push(Violation { form, path: p });
    }
    for (i, c) in e.children().into_iter().enumerate() {
        path.push(i);
        find_higher_order(c, path, root, out);
        path.pop();
    }
}

pub fn check_first_order(p: &Program) -> Vec<Violation> {
    let mut out = Vec::new();
    for d in &p.decls {
        find_higher_order(&d.body, &mut Vec::new(), &format!("decl {}", d.name), &mut out);
    }
    find_higher_order(&p.main, &mut Vec::new(), "main", &mut out);
    out
}

/// Whether `p` contains closure constructors or case-of eliminations.
pub fn has_closure_forms(p: &Program) -> bool {
    let mut found = false;
    let mut visit = |e: &Expr| found |= matches!(e, Expr::Closure { .. } | Expr::CaseOf { .. });
    for d in &p.decls {
        d.body.walk(&mut visit);
    }
    p.main.walk(&mut visit);
    found
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Diagnostic {
    #[error("{at}: unbound variable `${name}`")]
    UnboundVariable { at: String, name: Name },
    #[error("function `{name}` is declared more than once")]
    DuplicateDeclaration { name: Name },
    #[error("{at}: duplicate variable `${name}` in one binding list")]
    DuplicateBinder { at: String, name: Name },
    #[error("{at}: duplicate branch for `{label}`")]
    DuplicateBranch { at: String, label: Label },
    #[error("{at}: call to undeclared function `{name}#{arity}`")]
    UnknownFunction { at: String, name: Name, arity: usize },
    #[error("{at}: `{name}` expects {expected} argument(s) but is given {found}")]
    ArityMismatch { at: String, name: Name, expected: usize, found: usize },
    #[error("{at}: builtin `{name}` does not accept {found} argument(s)")]
    BuiltinArity { at: String, name: &'static str, found: usize },
    #[error("{at}: {form} is not allowed in a source program")]
    TargetForm { at: String, form: &'static str },
    #[error("declaration `{name}` uses a name reserved for {reason}")]
    ReservedName { name: Name, reason: &'static str },
    #[error("{at}: string literal \"{text}\" has the shape of a closure label")]
    ReservedString { at: String, text: String },
}

struct Validator<'p> {
    arities: HashMap<&'p Name, usize>,
    out: Vec<Diagnostic>,
}

impl<'p> Validator<'p> {
    fn binders(&mut self, at: &str, names: &[Name]) {
        let mut seen = HashSet::new();
        for n in names {
            if !seen.insert(n) {
                self.out.push(Diagnostic::DuplicateBinder { at: at.into(), name: n.clone() });
            }
        }
    }

    fn check_call(&mut self, at: &str, name: &Name, found: usize) {
        match self.arities.get(name) {
            Some(&expected) if expected != found => {
                self.out.push(Diagnostic::ArityMismatch { at: at.into(), name: name.clone(), expected, found })
            }
            Some(_) => {}
            None => self.out.push(Diagnostic::UnknownFunction { at: at.into(), name: name.clone(), arity: found }),
        }
    }

    fn expr<'a>(&mut self, at: &str, e: &'a Expr, scope: &mut Vec<&'a Name>) {
        match e {
            Expr::Var(v) if !scope.contains(&v) => {
                self.out.push(Diagnostic::UnboundVariable { at: at.into(), name: v.clone() })
            }
            Expr::Call { name, args } => self.check_call(at, name, args.len()),
            Expr::Builtin { op, args } if !op.accepts_arity(args.len()) => {
                self.out.push(Diagnostic::BuiltinArity { at: at.into(), name: op.display_name(), found: args.len() })
            }
            Expr::NamedRef { name, arity } => match Builtin::from_function_name(name.as_str()) {
                Some(op) if !self.arities.contains_key(name) => {
                    if !op.accepts_arity(*arity) {
                        self.out.push(Diagnostic::BuiltinArity { at: at.into(), name: op.display_name(), found: *arity })
                    }
                }
                _ => self.check_call(at, name, *arity),
            },
            Expr::Function { params, .. } => self.binders(at, params),
            Expr::CaseOf { branches, .. } => {
                let mut seen = HashSet::new();
                for b in branches {
                    if !seen.insert(b.label) {
                        self.out.push(Diagnostic::DuplicateBranch { at: at.into(), label: b.label });
                    }
                    self.binders(at, &b.vars);
                }
            }
            _ => {}
        }
        for (child, binders) in e.children().into_iter().zip(child_binders(e)) {
            let mark = scope.len();
            scope.extend(binders);
            self.expr(at, child, scope);
            scope.truncate(mark);
        }
    }
}

/// Well-formedness checks shared by source and target programs.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut v = Validator { arities: HashMap::new(), out: Vec::new() };
    for d in &p.decls {
        if v.arities.insert(&d.name, d.params.len()).is_some() {
            v.out.push(Diagnostic::DuplicateDeclaration { name: d.name.clone() });
        }
    }
    for d in &p.decls {
        let at = format!("function {}", d.name);
        v.binders(&at, &d.params);
        let mut scope: Vec<&Name> = d.params.iter().collect();
        v.expr(&at, &d.body, &mut scope);
    }
    v.expr("main", &p.main, &mut Vec::new());
    v.out
}

/// [`validate`] plus the restrictions on programs given to the compiler as input:
/// no closure forms, no declarations that collide with generated or builtin names,
/// and no string literals that could be mistaken for label atoms.
pub fn validate_source(p: &Program) -> Vec<Diagnostic> {
    let mut out = validate(p);
    for d in &p.decls {
        let reason = if Label::parse(d.name.as_str()).is_some() {
            Some("closure labels")
        } else if dispatch_arity(&d.name).is_some() {
            Some("dispatchers")
        } else if Builtin::from_function_name(d.name.as_str()).is_some() {
            Some("a builtin function")
        } else if is_reserved(d.name.as_str()) {
            Some("keywords")
        } else {
            None
        };
        if let Some(reason) = reason {
            out.push(Diagnostic::ReservedName { name: d.name.clone(), reason });
        }
    }
    let mut scan = |at: String, e: &Expr| {
        e.walk(&mut |n| match n {
            Expr::Closure { .. } => out.push(Diagnostic::TargetForm { at: at.clone(), form: "closure constructor" }),
            Expr::CaseOf { .. } => out.push(Diagnostic::TargetForm { at: at.clone(), form: "case-of" }),
            Expr::Str(s) if Label::parse(s).is_some() => {
                out.push(Diagnostic::ReservedString { at: at.clone(), text: s.clone() })
            }
            _ => {}
        });
    };
    for d in &p.decls {
        scan(format!("function {}", d.name), &d.body);
    }
    scan("main".into(), &p.main);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse, parse_expr};

    fn names(ns: &[&str]) -> Vec<Name> {
        ns.iter().map(|n| Name::from(*n)).collect()
    }

    #[test]
    fn free_vars_are_sorted() {
        let e = parse_expr("function() { $seq[$key(.) = $k] }").unwrap();
        assert_eq!(free_vars(&e), names(&["k", "key", "seq"]));
    }

    #[test]
    fn closed_literal_has_no_free_vars() {
        assert!(free_vars(&parse_expr("function($x) { $x mod 2 }").unwrap()).is_empty());
    }

    #[test]
    fn let_binds_only_its_variable() {
        assert_eq!(free_vars(&parse_expr("let $y := $x return $y").unwrap()), names(&["x"]));
        // the definition is outside the binder's scope
        assert_eq!(free_vars(&parse_expr("let $y := $y return $y").unwrap()), names(&["y"]));
    }

    #[test]
    fn case_and_typeswitch_binders() {
        let e = parse_expr("case $c of { ell_1 [$a] => $a + $b }").unwrap();
        assert_eq!(free_vars(&e), names(&["b", "c"]));
        let t = parse_expr("typeswitch ($s) case $i as integer return $i default $d return $z").unwrap();
        assert_eq!(free_vars(&t), names(&["s", "z"]));
    }

    #[test]
    fn first_order_violations_carry_paths() {
        let p = parse("declare function f($x) { $x }; let $e := pow#2 return f(1)").unwrap();
        let v = check_first_order(&p);
        assert_eq!(v, vec![Violation { form: HigherOrderForm::NamedFunRef, path: "main/0".into() }]);
        assert!(check_first_order(&parse("declare function f($x) { $x }; f(1)").unwrap()).is_empty());
    }

    #[test]
    fn validation_reports_problems() {
        assert!(validate(&parse("declare function f($a) { $a }; f(1)").unwrap()).is_empty());
        let unbound = validate(&parse("$undefined").unwrap());
        assert!(matches!(&unbound[..], [Diagnostic::UnboundVariable { .. }]));
        let arity = validate(&parse("declare function f($a, $b) { $a }; f(1)").unwrap());
        assert!(matches!(&arity[..], [Diagnostic::ArityMismatch { expected: 2, found: 1, .. }]));
        let dup = validate(&parse("declare function f() { 1 }; declare function f() { 2 }; f()").unwrap());
        assert!(matches!(&dup[..], [Diagnostic::DuplicateDeclaration { .. }]));
        let unknown = validate(&parse("g#1").unwrap());
        assert!(matches!(&unknown[..], [Diagnostic::UnknownFunction { .. }]));
        assert!(validate(&parse("pow#2").unwrap()).is_empty());
        assert!(!validate(&parse("pow#3").unwrap()).is_empty());
    }

    #[test]
    fn source_validation_rejects_reserved_shapes() {
        assert!(validate_source(&parse("\"ell_1\"").unwrap()).len() == 1);
        assert!(validate_source(&parse("\"ell_x\"").unwrap()).is_empty());
        assert!(validate_source(&parse("declare function dispatch_1($c) { 1 }; 1").unwrap()).len() == 1);
        assert!(validate_source(&parse("declare function ell_3() { 1 }; 1").unwrap()).len() == 1);
        assert!(validate_source(&parse("closure ell_1 []").unwrap()).len() == 1);
        // plain validation accepts target forms and label atoms
        assert!(validate(&parse("case \"ell_1\" of { ell_1 [] => 1 }").unwrap()).is_empty());
    }

    #[test]
    fn context_use() {
        assert!(uses_free_context(&parse_expr(". + 1").unwrap()));
        assert!(!uses_free_context(&parse_expr("$s[. = 1]").unwrap()));
        assert!(uses_free_context(&parse_expr(".[1]").unwrap()));
        assert!(!uses_free_context(&parse_expr("function() { . }").unwrap()));
    }
}
