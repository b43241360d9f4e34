use std::collections::HashSet;

use super::analysis::child_binders;
use super::ast::{Expr, Name, NodeTest, Program, TypeTest};

/// Supplies identifiers that do not clash with any name already in use.
#[derive(Clone, Debug, Default)]
pub struct FreshNames {
    used: HashSet<Name>,
}

impl FreshNames {
    /// Reserves every variable, function and tag name occurring in `p`.
    pub fn for_program(p: &Program) -> Self {
        let mut f = FreshNames::default();
        for d in &p.decls {
            f.reserve(&d.name);
            d.params.iter().for_each(|n| f.reserve(n));
            f.reserve_expr(&d.body);
        }
        f.reserve_expr(&p.main);
        f
    }

    pub fn reserve(&mut self, n: &Name) {
        self.used.insert(n.clone());
    }

    pub fn reserve_expr(&mut self, e: &Expr) {
        e.walk(&mut |n| {
            for bs in child_binders(n) {
                for b in bs {
                    self.used.insert(b.clone());
                }
            }
            match n {
                Expr::Var(v) => {
                    self.used.insert(v.clone());
                }
                Expr::Call { name, .. } | Expr::NamedRef { name, .. } | Expr::Element { tag: name, .. } => {
                    self.used.insert(name.clone());
                }
                Expr::Child { test: NodeTest::Tag(t), .. } => {
                    self.used.insert(t.clone());
                }
                Expr::TypeSwitch { cases, .. } => {
                    for c in cases {
                        if let TypeTest::Element(t) = &c.test {
                            self.used.insert(t.clone());
                        }
                    }
                }
                _ => {}
            }
        });
    }

    pub fn is_used(&self, n: &Name) -> bool {
        self.used.contains(n)
    }

    /// `base` if unused, else `base_1`, `base_2`, ...; the result is reserved.
    pub fn fresh(&mut self, base: &str) -> Name {
        let mut candidate = Name::from(base);
        let mut k = 0;
        while self.used.contains(&candidate) {
            k += 1;
            candidate = Name::from(format!("{base}_{k}"));
        }
        self.used.insert(candidate.clone());
        candidate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn fresh_names_avoid_program_names() {
        let p = parse("declare function f($x) { let $x_1 := 1 return $x }; f(2)").unwrap();
        let mut fresh = FreshNames::for_program(&p);
        assert_eq!(fresh.fresh("x").as_str(), "x_2");
        assert_eq!(fresh.fresh("y").as_str(), "y");
        assert_eq!(fresh.fresh("y").as_str(), "y_1");
        assert_eq!(fresh.fresh("f").as_str(), "f_1");
    }
}
