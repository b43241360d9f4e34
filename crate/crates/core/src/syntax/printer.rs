//! Pretty printer producing text that parses back to the same tree.

use std::fmt;

use super::ast::*;

const WIDTH: usize = 80;

/// Binding strength of printed forms, loosest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Expr,
    Single,
    Or,
    And,
    Comparison,
    Range,
    Additive,
    Multiplicative,
    Unary,
    Postfix,
    Primary,
}

impl From<OpClass> for Prec {
    fn from(c: OpClass) -> Prec {
        match c {
            OpClass::Or => Prec::Or,
            OpClass::And => Prec::And,
            OpClass::Comparison => Prec::Comparison,
            OpClass::Range => Prec::Range,
            OpClass::Additive => Prec::Additive,
            OpClass::Multiplicative => Prec::Multiplicative,
        }
    }
}

fn prec(e: &Expr) -> Prec {
    match e {
        Expr::Int(n) if *n < 0 => Prec::Unary,
        Expr::For { .. } | Expr::Let { .. } | Expr::If { .. } | Expr::TypeSwitch { .. } | Expr::CaseOf { .. } => {
            Prec::Single
        }
        Expr::Builtin { op, .. } => op.operator().map_or(Prec::Primary, |(_, c)| c.into()),
        Expr::Child { input, .. } if **input == Expr::Context => Prec::Primary,
        Expr::Child { .. } | Expr::Filter { .. } | Expr::DynCall { .. } => Prec::Postfix,
        _ => Prec::Primary,
    }
}

fn indent(s: &str) -> String {
    s.replace('\n', "\n  ")
}

fn multiline(parts: &[&str]) -> bool {
    parts.iter().any(|p| p.contains('\n')) || parts.iter().map(|p| p.len()).sum::<usize>() > WIDTH
}

fn string_literal(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn params(ps: &[Name]) -> String {
    ps.iter().map(|p| format!("${p}")).collect::<Vec<_>>().join(", ")
}

fn list(items: &[Expr]) -> String {
    items.iter().map(|e| render(e, Prec::Single)).collect::<Vec<_>>().join(", ")
}

fn node_test(t: &NodeTest) -> String {
    match t {
        NodeTest::Tag(n) => n.to_string(),
        NodeTest::AnyNode => "node()".into(),
        NodeTest::Text => "text()".into(),
    }
}

fn type_test(t: &TypeTest) -> String {
    match t {
        TypeTest::Element(n) => format!("element({n})"),
        TypeTest::Integer => "integer".into(),
        TypeTest::String => "string".into(),
        TypeTest::Boolean => "boolean".into(),
    }
}

/// Content of a `{ ... }` block; a top-level sequence needs no parentheses.
fn block(e: &Expr) -> String {
    let inner = match e {
        Expr::Seq(items) if items.is_empty() => return "{}".into(),
        Expr::Seq(items) if items.len() > 1 => {
            let parts: Vec<String> = items.iter().map(|i| render(i, Prec::Single)).collect();
            let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
            if multiline(&refs) {
                parts.join(",\n")
            } else {
                parts.join(", ")
            }
        }
        e => render(e, Prec::Expr),
    };
    if multiline(&[&inner]) {
        format!("{{\n  {}\n}}", indent(&inner))
    } else {
        format!("{{ {inner} }}")
    }
}

fn render(e: &Expr, min: Prec) -> String {
    let s = render_bare(e);
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn render_bare(e: &Expr) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Str(s) => string_literal(s),
        Expr::Bool(b) => format!("{b}()"),
        Expr::Var(v) => format!("${v}"),
        Expr::Context => ".".into(),
        Expr::For { .. } | Expr::Let { .. } => flwor(e),
        Expr::If { cond, then, els } => {
            let c = render(cond, Prec::Expr);
            let t = render(then, Prec::Single);
            let f = render(els, Prec::Single);
            if multiline(&[&c, &t, &f]) {
                format!("if ({c})\nthen {}\nelse {}", indent(&t), indent_else(&f, els))
            } else {
                format!("if ({c}) then {t} else {f}")
            }
        }
        Expr::Seq(items) => {
            let parts: Vec<String> = items.iter().map(|i| render(i, Prec::Single)).collect();
            let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
            if multiline(&refs) {
                format!("(\n  {}\n)", indent(&parts.join(",\n")))
            } else {
                format!("({})", parts.join(", "))
            }
        }
        Expr::Child { input, test } => {
            if **input == Expr::Context {
                format!("child::{}", node_test(test))
            } else {
                format!("{}/child::{}", render(input, Prec::Postfix), node_test(test))
            }
        }
        Expr::Element { tag, content } => format!("element {tag} {}", block(content)),
        Expr::Filter { input, predicate } => {
            format!("{}[{}]", render(input, Prec::Postfix), render(predicate, Prec::Expr))
        }
        Expr::Call { name, args } => format!("{name}({})", list(args)),
        Expr::Builtin { op, args } => match op.operator() {
            Some((sym, class)) if args.len() == 2 => {
                let p: Prec = class.into();
                let (lp, rp) = match class {
                    OpClass::Comparison => (Prec::Range, Prec::Range),
                    OpClass::Range => (Prec::Additive, Prec::Additive),
                    _ => (p, next(p)),
                };
                format!("{} {sym} {}", render(&args[0], lp), render(&args[1], rp))
            }
            _ => format!("{}({})", op.display_name(), list(args)),
        },
        Expr::Function { params: ps, body } => format!("function({}) {}", params(ps), block(body)),
        Expr::NamedRef { name, arity } => format!("{name}#{arity}"),
        Expr::DynCall { fun, args } => format!("{}({})", render(fun, Prec::Postfix), list(args)),
        Expr::TypeSwitch { scrutinee, cases, default_var, default } => {
            let mut out = format!("typeswitch ({})", render(scrutinee, Prec::Expr));
            for c in cases {
                let body = render(&c.body, Prec::Single);
                out.push_str(&format!("\n  case ${} as {} return {}", c.var, type_test(&c.test), indent(&indent(&body))));
            }
            let body = render(default, Prec::Single);
            out.push_str(&format!("\n  default ${default_var} return {}", indent(&indent(&body))));
            out
        }
        Expr::Closure { label, env } => format!("closure {label} [{}]", list(env)),
        Expr::CaseOf { scrutinee, branches } => {
            let s = render(scrutinee, Prec::Or);
            if branches.is_empty() {
                return format!("case {s} of {{ }}");
            }
            let arms: Vec<String> = branches
                .iter()
                .map(|b| format!("{} [{}] => {}", b.label, params(&b.vars), indent(&render(&b.body, Prec::Expr))))
                .collect();
            format!("case {s} of {{\n  {}\n}}", indent(&arms.join(" ;\n")))
        }
    }
}

/// `else if` chains stay flat.
fn indent_else(rendered: &str, els: &Expr) -> String {
    if matches!(els, Expr::If { .. }) {
        rendered.to_string()
    } else {
        indent(rendered)
    }
}

fn next(p: Prec) -> Prec {
    match p {
        Prec::Or => Prec::And,
        Prec::And => Prec::Comparison,
        Prec::Comparison => Prec::Range,
        Prec::Range => Prec::Additive,
        Prec::Additive => Prec::Multiplicative,
        Prec::Multiplicative => Prec::Unary,
        other => other,
    }
}

fn flwor(mut e: &Expr) -> String {
    let mut lines = Vec::new();
    loop {
        match e {
            Expr::For { var, source, body } => {
                lines.push(format!("for ${var} in {}", indent(&render(source, Prec::Single))));
                e = body;
            }
            Expr::Let { var, def, body } => {
                lines.push(format!("let ${var} := {}", indent(&render(def, Prec::Single))));
                e = body;
            }
            _ => break,
        }
    }
    let body = render(e, Prec::Single);
    let short = lines.len() == 1 && !multiline(&[&lines[0], &body]);
    lines.push(format!("return {}", indent(&body)));
    lines.join(if short { " " } else { "\n" })
}

pub fn print_expr(e: &Expr) -> String {
    render(e, Prec::Expr)
}

pub fn print_decl(d: &FunDecl) -> String {
    format!("declare function {}({}) {};", d.name, params(&d.params), block(&d.body))
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.decls {
        out.push_str(&print_decl(d));
        out.push_str("\n\n");
    }
    out.push_str(&print_expr(&p.main));
    out.push('\n');
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse, parse_expr};

    fn round_trip(src: &str) {
        let e = parse_expr(src).unwrap();
        let printed = print_expr(&e);
        assert_eq!(parse_expr(&printed).unwrap(), e, "printed as:\n{printed}");
    }

    #[test]
    fn empty_sequence() {
        assert_eq!(print_expr(&Expr::empty()), "()");
    }

    #[test]
    fn closure_constructor() {
        let e = Expr::Closure { label: Label::new(1), env: vec![Expr::Var(Name::from("k"))] };
        assert_eq!(print_expr(&e), "closure ell_1 [$k]");
    }

    #[test]
    fn parenthesization() {
        let e = Expr::binary(
            Builtin::Mul,
            Expr::binary(Builtin::Add, Expr::Int(1), Expr::Int(2)),
            Expr::binary(Builtin::Sub, Expr::Int(3), Expr::Int(-4)),
        );
        assert_eq!(print_expr(&e), "(1 + 2) * (3 - -4)");
        let f = Expr::filter(Expr::Int(-1), Expr::Int(1));
        assert_eq!(print_expr(&f), "(-1)[1]");
        let nested = Expr::binary(Builtin::Sub, Expr::Int(1), Expr::binary(Builtin::Sub, Expr::Int(2), Expr::Int(3)));
        assert_eq!(print_expr(&nested), "1 - (2 - 3)");
    }

    #[test]
    fn single_forms_are_parenthesized_as_operands() {
        let e = Expr::binary(Builtin::Add, Expr::let_in(Name::from("x"), Expr::Int(1), Expr::Int(2)), Expr::Int(3));
        assert_eq!(print_expr(&e), "(let $x := 1 return 2) + 3");
    }

    #[test]
    fn round_trips() {
        for src in [
            "let $exp := pow#2 return $exp(2, 3)",
            "for $k in distinct-values($keys) let $g := function() { $seq[$key(.) = $k] } return element group { $g() }",
            "$m/child::entry[child::key = 1][1]/child::node()",
            "typeswitch ($x) case $i as integer return $i + 1 case $e as element(atom) return () default $d return error()",
            "case $c of { ell_1 [$a, $b] => ($a, $b) ; ell_2 [] => closure ell_3 [1, \"q\"\"uote\"] }",
            "if (empty($s)) then () else if ($s[1] > 2) then 1 else 2",
            "((1, 2), (), 3)",
            "1 = (2 = 3)",
            "(1 to 3) to 4",
            "-(3)[1]",
            "0 - $x",
            "function($a) { $a }(1)",
            ".[. mod 2 = 0]",
            "element a {}",
            "case (let $x := 1 return $x) of { }",
        ] {
            round_trip(src);
        }
    }

    #[test]
    fn program_layout() {
        let p = parse("declare function f($a) { $a + 1 }; f(1)").unwrap();
        assert_eq!(print_program(&p), "declare function f($a) { $a + 1 };\n\nf(1)\n");
    }

    #[test]
    fn long_flwor_breaks_lines() {
        let p = parse_expr("for $x in 1 to 3 let $y := $x * 2 return $y").unwrap();
        assert_eq!(print_expr(&p), "for $x in 1 to 3\nlet $y := $x * 2\nreturn $y");
    }
}
