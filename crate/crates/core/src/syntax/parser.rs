//! Recursive-descent parser for `.fq` programs (source and target dialects).

use super::ast::*;
use super::error::ParseError;
use super::lexer::{tokenize, Pos, Tok, Token};

const RESERVED: &[&str] = &[
    "for", "let", "return", "if", "then", "else", "function", "declare", "typeswitch", "case", "default", "of",
    "closure", "element", "true", "false",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

/// Parses a complete program: function declarations followed by the main expression.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser { toks: tokenize(text)?, at: 0 };
    let prog = p.program()?;
    p.expect_eof()?;
    Ok(prog)
}

/// Parses a single expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: tokenize(text)?, at: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.at + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let pos = self.pos();
        ParseError::Unexpected {
            line: pos.line,
            col: pos.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn invalid(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError::Invalid { line: pos.line, col: pos.col, message: message.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[what]))
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Result<(), ParseError> {
        if self.is_ident(word) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{word}`")]))
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input", "`,`", "operator"]))
        }
    }

    fn var(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Name::from(v))
            }
            _ => Err(self.unexpected(&["variable"])),
        }
    }

    /// A name in a position where reserved words are not allowed.
    fn name(&mut self, role: &'static str) -> Result<Name, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if is_reserved(&s) => {
                Err(ParseError::ReservedWord { line: pos.line, col: pos.col, word: s, role })
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Name::from(s))
            }
            _ => Err(self.unexpected(&[role])),
        }
    }

    fn label(&mut self) -> Result<Label, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => match Label::parse(&s) {
                Some(l) => {
                    self.bump();
                    Ok(l)
                }
                None => Err(self.invalid(pos, format!("`{s}` is not a closure label (expected `ell_<k>`)"))),
            },
            _ => Err(self.unexpected(&["closure label"])),
        }
    }

    fn comma_separated<T>(
        &mut self,
        close: Tok,
        what: &str,
        mut item: impl FnMut(&mut Self) -> Result<T, ParseError>,
    ) -> Result<Vec<T>, ParseError> {
        let mut out = Vec::new();
        if *self.peek() == close {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                t if *t == close => {
                    self.bump();
                    return Ok(out);
                }
                _ => return Err(self.unexpected(&["`,`", what])),
            }
        }
    }

    fn params(&mut self) -> Result<Vec<Name>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let start = self.pos();
        let params = self.comma_separated(Tok::RParen, "`)`", |p| p.var())?;
        check_distinct(&params).map_err(|dup| self.invalid(start, format!("duplicate parameter `${dup}`")))?;
        Ok(params)
    }

    fn braced_body(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        if *self.peek() == Tok::RBrace {
            self.bump();
            return Ok(Expr::empty());
        }
        let body = self.expr()?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(body)
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut decls = Vec::new();
        while self.is_ident("declare") {
            self.bump();
            self.expect_keyword("function")?;
            let name = self.name("a function name")?;
            let params = self.params()?;
            let body = self.braced_body()?;
            self.expect(Tok::Semi, "`;`")?;
            decls.push(FunDecl { name, params, body });
        }
        let main = self.expr()?;
        Ok(Program { decls, main })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let first = self.expr_single()?;
        if *self.peek() != Tok::Comma {
            return Ok(first);
        }
        let mut items = vec![first];
        while *self.peek() == Tok::Comma {
            self.bump();
            items.push(self.expr_single()?);
        }
        Ok(Expr::Seq(items))
    }

    fn expr_single(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Ident(w) if (w == "for" || w == "let") && matches!(self.peek_at(1), Tok::Var(_)) => self.flwor(),
            Tok::Ident(w) if w == "if" && *self.peek_at(1) == Tok::LParen => self.if_expr(),
            Tok::Ident(w) if w == "typeswitch" && *self.peek_at(1) == Tok::LParen => self.typeswitch(),
            Tok::Ident(w) if w == "case" => self.case_of(),
            _ => self.or_expr(),
        }
    }

    fn flwor(&mut self) -> Result<Expr, ParseError> {
        enum Clause {
            For(Name, Expr),
            Let(Name, Expr),
        }
        let mut clauses = Vec::new();
        loop {
            if self.is_ident("for") {
                self.bump();
                let v = self.var()?;
                self.expect_keyword("in")?;
                clauses.push(Clause::For(v, self.expr_single()?));
            } else if self.is_ident("let") {
                self.bump();
                let v = self.var()?;
                self.expect(Tok::Assign, "`:=`")?;
                clauses.push(Clause::Let(v, self.expr_single()?));
            } else if self.is_ident("return") {
                self.bump();
                break;
            } else {
                return Err(self.unexpected(&["`for`", "`let`", "`return`"]));
            }
        }
        let mut body = self.expr_single()?;
        for clause in clauses.into_iter().rev() {
            body = match clause {
                Clause::For(v, src) => Expr::for_in(v, src, body),
                Clause::Let(v, def) => Expr::let_in(v, def, body),
            };
        }
        Ok(body)
    }

    fn if_expr(&mut self) -> Result<Expr, ParseError> {
        self.bump();
        self.expect(Tok::LParen, "`(`")?;
        let cond = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect_keyword("then")?;
        let then = self.expr_single()?;
        self.expect_keyword("else")?;
        let els = self.expr_single()?;
        Ok(Expr::if_then(cond, then, els))
    }

    fn type_test(&mut self) -> Result<TypeTest, ParseError> {
        let t = match self.peek() {
            Tok::Ident(w) if w == "integer" => TypeTest::Integer,
            Tok::Ident(w) if w == "string" => TypeTest::String,
            Tok::Ident(w) if w == "boolean" => TypeTest::Boolean,
            Tok::Ident(w) if w == "element" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let tag = self.name("an element name")?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(TypeTest::Element(tag));
            }
            _ => return Err(self.unexpected(&["`integer`", "`string`", "`boolean`", "`element(...)`"])),
        };
        self.bump();
        Ok(t)
    }

    fn typeswitch(&mut self) -> Result<Expr, ParseError> {
        self.bump();
        self.expect(Tok::LParen, "`(`")?;
        let scrutinee = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        let mut cases = Vec::new();
        while self.is_ident("case") {
            self.bump();
            let var = self.var()?;
            self.expect_keyword("as")?;
            let test = self.type_test()?;
            self.expect_keyword("return")?;
            let body = self.expr_single()?;
            cases.push(TypeCase { test, var, body });
        }
        if cases.is_empty() {
            return Err(self.unexpected(&["`case`"]));
        }
        self.expect_keyword("default")?;
        let default_var = self.var()?;
        self.expect_keyword("return")?;
        let default = self.expr_single()?;
        Ok(Expr::TypeSwitch { scrutinee: Box::new(scrutinee), cases, default_var, default: Box::new(default) })
    }

    fn case_of(&mut self) -> Result<Expr, ParseError> {
        self.bump();
        let scrutinee = self.expr()?;
        self.expect_keyword("of")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut branches: Vec<Branch> = Vec::new();
        while *self.peek() != Tok::RBrace {
            let pos = self.pos();
            let label = self.label()?;
            if branches.iter().any(|b| b.label == label) {
                return Err(self.invalid(pos, format!("duplicate branch for `{label}`")));
            }
            self.expect(Tok::LBracket, "`[`")?;
            let vars = self.comma_separated(Tok::RBracket, "`]`", |p| p.var())?;
            check_distinct(&vars).map_err(|dup| self.invalid(pos, format!("duplicate branch variable `${dup}`")))?;
            self.expect(Tok::Arrow, "`=>`")?;
            let body = self.expr()?;
            branches.push(Branch { label, vars, body });
            match self.peek() {
                Tok::Semi => {
                    self.bump();
                }
                Tok::RBrace => {}
                _ => return Err(self.unexpected(&["`;`", "`}`"])),
            }
        }
        self.bump();
        Ok(Expr::CaseOf { scrutinee: Box::new(scrutinee), branches })
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.is_ident("or") {
            self.bump();
            lhs = Expr::binary(Builtin::Or, lhs, self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.comparison()?;
        while self.is_ident("and") {
            self.bump();
            lhs = Expr::binary(Builtin::And, lhs, self.comparison()?);
        }
        Ok(lhs)
    }

    fn comparison_op(&self) -> Option<Builtin> {
        Some(match self.peek() {
            Tok::Eq => Builtin::Eq,
            Tok::Ne => Builtin::Ne,
            Tok::Lt => Builtin::Lt,
            Tok::Le => Builtin::Le,
            Tok::Gt => Builtin::Gt,
            Tok::Ge => Builtin::Ge,
            _ => return None,
        })
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.range()?;
        let Some(op) = self.comparison_op() else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.range()?;
        if self.comparison_op().is_some() {
            return Err(self.invalid(self.pos(), "comparisons are not associative; add parentheses"));
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn range(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        if self.is_ident("to") {
            self.bump();
            let rhs = self.additive()?;
            return Ok(Expr::binary(Builtin::To, lhs, rhs));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => Builtin::Add,
                Tok::Minus => Builtin::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => Builtin::Mul,
                Tok::Ident(w) if w == "idiv" => Builtin::IDiv,
                Tok::Ident(w) if w == "mod" => Builtin::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() != Tok::Minus {
            return self.postfix();
        }
        let pos = self.pos();
        self.bump();
        // A minus directly applied to an integer literal is a negative literal.
        if let Tok::Int(n) = *self.peek() {
            if !matches!(self.peek_at(1), Tok::LBracket | Tok::Slash | Tok::LParen) {
                self.bump();
                return match n {
                    n if n <= i64::MAX as u64 => Ok(Expr::Int(-(n as i64))),
                    n if n == i64::MAX as u64 + 1 => Ok(Expr::Int(i64::MIN)),
                    _ => Err(self.invalid(pos, "integer literal out of range")),
                };
            }
        }
        let operand = self.unary()?;
        Ok(Expr::binary(Builtin::Sub, Expr::Int(0), operand))
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::LBracket => {
                    self.bump();
                    let pred = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    e = Expr::filter(e, pred);
                }
                Tok::Slash => {
                    self.bump();
                    let test = self.step()?;
                    e = Expr::child(e, test);
                }
                Tok::LParen => {
                    self.bump();
                    let args = self.comma_separated(Tok::RParen, "`)`", |p| p.expr_single())?;
                    e = Expr::DynCall { fun: Box::new(e), args };
                }
                _ => return Ok(e),
            }
        }
    }

    /// `child::NodeTest`
    fn step(&mut self) -> Result<NodeTest, ParseError> {
        self.expect_keyword("child")?;
        self.expect(Tok::ColonColon, "`::`")?;
        let kind = match self.peek() {
            Tok::Ident(w) if (w == "node" || w == "text") && *self.peek_at(1) == Tok::LParen => w.clone(),
            _ => return Ok(NodeTest::Tag(self.name("an element name")?)),
        };
        self.bump();
        self.expect(Tok::LParen, "`(`")?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(if kind == "node" { NodeTest::AnyNode } else { NodeTest::Text })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                i64::try_from(n).map(Expr::Int).map_err(|_| self.invalid(pos, "integer literal out of range"))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Expr::Var(Name::from(v)))
            }
            Tok::Dot => {
                self.bump();
                Ok(Expr::Context)
            }
            Tok::LParen => {
                self.bump();
                if *self.peek() == Tok::RParen {
                    self.bump();
                    return Ok(Expr::empty());
                }
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(w) => self.primary_ident(&w, pos),
            _ => Err(self.unexpected(&["expression"])),
        }
    }

    fn primary_ident(&mut self, word: &str, pos: Pos) -> Result<Expr, ParseError> {
        let next = self.peek_at(1).clone();
        match word {
            "function" if next == Tok::LParen => {
                self.bump();
                let params = self.params()?;
                let body = self.braced_body()?;
                Ok(Expr::Function { params, body: Box::new(body) })
            }
            "element" => {
                self.bump();
                let tag = self.name("an element name")?;
                let content = self.braced_body()?;
                Ok(Expr::element(tag, content))
            }
            "closure" => {
                self.bump();
                let label = self.label()?;
                self.expect(Tok::LBracket, "`[`")?;
                let env = self.comma_separated(Tok::RBracket, "`]`", |p| p.expr_single())?;
                Ok(Expr::Closure { label, env })
            }
            "true" | "false" if next == Tok::LParen => {
                self.bump();
                self.bump();
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Bool(word == "true"))
            }
            "child" if next == Tok::ColonColon => {
                let test = self.step()?;
                Ok(Expr::child(Expr::Context, test))
            }
            _ if next == Tok::Hash => {
                let name = self.name("a function name")?;
                self.bump();
                match self.bump() {
                    Tok::Int(n) => Ok(Expr::NamedRef { name, arity: n as usize }),
                    _ => Err(self.invalid(pos, "expected an arity after `#`")),
                }
            }
            _ if next == Tok::LParen => {
                let name = self.name("a function name")?;
                self.bump();
                let args = self.comma_separated(Tok::RParen, "`)`", |p| p.expr_single())?;
                Ok(match Builtin::from_function_name(name.as_str()) {
                    Some(op) => Expr::Builtin { op, args },
                    None => Expr::Call { name, args },
                })
            }
            w if is_reserved(w) => {
                Err(ParseError::ReservedWord { line: pos.line, col: pos.col, word: w.to_string(), role: "an expression" })
            }
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}

fn check_distinct(names: &[Name]) -> Result<(), Name> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(n.clone());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Expr {
        Expr::Var(Name::from(s))
    }

    #[test]
    fn named_reference_and_dynamic_call() {
        let e = parse_expr("let $exp := pow#2 return $exp(2,3)").unwrap();
        assert_eq!(
            e,
            Expr::let_in(
                Name::from("exp"),
                Expr::NamedRef { name: Name::from("pow"), arity: 2 },
                Expr::DynCall { fun: Box::new(v("exp")), args: vec![Expr::Int(2), Expr::Int(3)] }
            )
        );
        // the qualified spelling flattens to the same tree
        assert_eq!(parse_expr("let $exp := math:pow#2 return $exp(2,3)").unwrap(), e);
    }

    #[test]
    fn empty_sequence() {
        assert_eq!(parse_expr("()").unwrap(), Expr::Seq(vec![]));
    }

    #[test]
    fn function_literal() {
        let e = parse_expr("function($x) { $x mod 2 }").unwrap();
        assert_eq!(
            e,
            Expr::Function {
                params: vec![Name::from("x")],
                body: Box::new(Expr::binary(Builtin::Mod, v("x"), Expr::Int(2))),
            }
        );
    }

    #[test]
    fn flwor_clauses_nest() {
        let e = parse_expr("for $k in $ks let $g := $k return $g").unwrap();
        assert_eq!(
            e,
            Expr::for_in(Name::from("k"), v("ks"), Expr::let_in(Name::from("g"), v("k"), v("g")))
        );
    }

    #[test]
    fn predicate_with_context_and_dynamic_call() {
        let e = parse_expr("$seq[$key(.) = $k]").unwrap();
        assert_eq!(
            e,
            Expr::filter(
                v("seq"),
                Expr::binary(
                    Builtin::Eq,
                    Expr::DynCall { fun: Box::new(v("key")), args: vec![Expr::Context] },
                    v("k")
                )
            )
        );
    }

    #[test]
    fn relative_steps_use_the_context_item() {
        let e = parse_expr("$m/child::entry[child::key = 1][1]/child::node()").unwrap();
        let entries = Expr::child(v("m"), NodeTest::Tag(Name::from("entry")));
        let keyed = Expr::filter(
            entries,
            Expr::binary(Builtin::Eq, Expr::child(Expr::Context, NodeTest::Tag(Name::from("key"))), Expr::Int(1)),
        );
        assert_eq!(e, Expr::child(Expr::filter(keyed, Expr::Int(1)), NodeTest::AnyNode));
    }

    #[test]
    fn target_forms() {
        let e = parse_expr("case $c of { ell_1 [$a, $b] => $a + $b ; ell_2 [] => closure ell_3 [1, $x] }").unwrap();
        let Expr::CaseOf { branches, .. } = e else { panic!() };
        assert_eq!(branches.len(), 2);
        assert_eq!(branches[0].label, Label::new(1));
        assert_eq!(branches[1].body, Expr::Closure { label: Label::new(3), env: vec![Expr::Int(1), v("x")] });
    }

    #[test]
    fn typeswitch_cases() {
        let e = parse_expr(
            "typeswitch ($x) case $i as integer return $i case $e as element(atom) return 1 default $d return ()",
        )
        .unwrap();
        let Expr::TypeSwitch { cases, default_var, .. } = e else { panic!() };
        assert_eq!(cases[1].test, TypeTest::Element(Name::from("atom")));
        assert_eq!(default_var, Name::from("d"));
    }

    #[test]
    fn negative_literals_and_unary_minus() {
        assert_eq!(parse_expr("-3").unwrap(), Expr::Int(-3));
        assert_eq!(parse_expr("1 - -3").unwrap(), Expr::binary(Builtin::Sub, Expr::Int(1), Expr::Int(-3)));
        assert_eq!(parse_expr("-$x").unwrap(), Expr::binary(Builtin::Sub, Expr::Int(0), v("x")));
        assert_eq!(parse_expr("-9223372036854775808").unwrap(), Expr::Int(i64::MIN));
    }

    #[test]
    fn operator_precedence() {
        let e = parse_expr("1 + 2 * 3 = 7 and true()").unwrap();
        let sum = Expr::binary(Builtin::Add, Expr::Int(1), Expr::binary(Builtin::Mul, Expr::Int(2), Expr::Int(3)));
        assert_eq!(
            e,
            Expr::binary(Builtin::And, Expr::binary(Builtin::Eq, sum, Expr::Int(7)), Expr::Bool(true))
        );
    }

    #[test]
    fn declarations() {
        let p = parse("declare function f($a, $b) { $a }; declare function g() {}; f(1, 2)").unwrap();
        assert_eq!(p.decls.len(), 2);
        assert_eq!(p.decls[1].body, Expr::empty());
        assert_eq!(p.main, Expr::call(Name::from("f"), vec![Expr::Int(1), Expr::Int(2)]));
    }

    #[test]
    fn syntax_errors_carry_position_and_expectation() {
        let err = parse("let $x := 1\n  retrun $x").unwrap_err();
        let ParseError::Unexpected { line, col, expected, .. } = err else { panic!("{err:?}") };
        assert_eq!((line, col), (2, 3));
        assert!(expected.iter().any(|e| e.contains("return")));
    }

    #[test]
    fn reserved_words_are_rejected_as_names() {
        let err = parse("declare function return($x) { $x }; 1").unwrap_err();
        assert!(matches!(err, ParseError::ReservedWord { ref word, .. } if word == "return"));
        assert!(matches!(parse_expr("then").unwrap_err(), ParseError::ReservedWord { .. }));
    }

    #[test]
    fn duplicate_parameters_are_rejected() {
        assert!(parse("declare function f($a, $a) { $a }; 1").is_err());
        assert!(parse_expr("case $c of { ell_1 [] => 1; ell_1 [] => 2 }").is_err());
    }

    #[test]
    fn comparisons_do_not_chain() {
        assert!(parse_expr("1 = 1 = 1").is_err());
    }
}
