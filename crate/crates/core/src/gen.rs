//! Seeded generator of closed, well-typed, terminating source programs.
//!
//! Programs are built type-directed so that every dynamic call receives a function of
//! the right arity, no evaluation raises an error by construction, and the result is
//! never functional. User recursion is never generated.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{parse, Builtin, Expr, FunDecl, Name, Program, TypeCase, TypeTest};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub max_depth: usize,
    /// At most 2.
    pub max_arity: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 1, max_depth: 4, max_arity: 2 }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig { seed, ..GenConfig::default() }
    }
}

pub const INT_POOL: [i64; 7] = [-2, 0, 1, 2, 3, 5, 8];
pub const STR_POOL: [&str; 4] = ["a", "b", "xy", ""];

const PRELUDE: &str = r#"
declare function apply1($f, $x) { $f($x) };
declare function compose($f, $g) { function($x) { $f($g($x)) } };
declare function twice($f) { compose($f, $f) };
declare function map-seq($f, $xs) { for $x in $xs return $f($x) };
declare function make-adder($n) { function($x) { $x + $n } };
declare function inc($x) { $x + 1 };
declare function shout($s) { concat($s, "!") };
declare function is-pos($x) { $x > 0 };
()
"#;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Str,
    Bool,
    /// Any number of integers.
    Ints,
    Fun(Vec<Ty>, Box<Ty>),
}

fn int_to_int() -> Ty {
    Ty::Fun(vec![Ty::Int], Box::new(Ty::Int))
}

struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    next_var: usize,
    scope: Vec<(Name, Ty)>,
    /// Type of the context item inside a predicate.
    ctx: Option<Ty>,
}

fn n(s: &str) -> Name {
    Name::from(s)
}

impl Gen {
    fn fresh(&mut self) -> Name {
        self.next_var += 1;
        Name::from(format!("v{}", self.next_var))
    }

    fn pick<T: Clone>(&mut self, xs: &[T]) -> T {
        xs.choose(&mut self.rng).expect("nonempty choice").clone()
    }

    fn vars_of(&self, ty: &Ty) -> Vec<Name> {
        self.scope.iter().filter(|(_, t)| t == ty).map(|(v, _)| v.clone()).collect()
    }

    fn base_ty(&mut self) -> Ty {
        self.pick(&[Ty::Int, Ty::Int, Ty::Str, Ty::Bool, Ty::Ints])
    }

    fn fun_ty(&mut self, ret: Ty) -> Ty {
        let arity = self.rng.gen_range(0..=self.cfg.max_arity.min(2));
        let params = (0..arity).map(|_| self.pick(&[Ty::Int, Ty::Int, Ty::Str])).collect();
        Ty::Fun(params, Box::new(ret))
    }

    fn any_ty(&mut self) -> Ty {
        if self.rng.gen_bool(0.3) {
            let r = self.pick(&[Ty::Int, Ty::Str, Ty::Bool]);
            self.fun_ty(r)
        } else {
            self.base_ty()
        }
    }

    fn bind<T>(&mut self, v: Name, ty: Ty, f: impl FnOnce(&mut Self) -> T) -> T {
        self.scope.push((v, ty));
        let out = f(self);
        self.scope.pop();
        out
    }

    fn leaf(&mut self, ty: &Ty) -> Expr {
        let vars = self.vars_of(ty);
        if !vars.is_empty() && self.rng.gen_bool(0.5) {
            return Expr::var(&self.pick(&vars));
        }
        if self.ctx.as_ref() == Some(ty) && self.rng.gen_bool(0.5) {
            return Expr::Context;
        }
        match ty {
            Ty::Int => Expr::Int(self.pick(&INT_POOL)),
            Ty::Str => Expr::Str(self.pick(&STR_POOL).to_string()),
            Ty::Bool => Expr::builtin(if self.rng.gen() { Builtin::Boolean } else { Builtin::Not }, vec![Expr::Int(0)]),
            Ty::Ints => match self.rng.gen_range(0..3) {
                0 => Expr::empty(),
                1 => Expr::binary(Builtin::To, Expr::Int(1), Expr::Int(self.rng.gen_range(1..5))),
                _ => Expr::Seq(vec![Expr::Int(self.pick(&INT_POOL)), Expr::Int(self.pick(&INT_POOL))]),
            },
            Ty::Fun(params, ret) => self.fun_leaf(params, ret),
        }
    }

    fn named_refs(params: &[Ty], ret: &Ty) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        match (params, ret) {
            ([Ty::Int], Ty::Int) => out.push(("inc", 1)),
            ([Ty::Str], Ty::Str) => out.push(("shout", 1)),
            ([Ty::Int], Ty::Bool) => out.push(("is-pos", 1)),
            ([Ty::Int], Ty::Str) => out.push(("string", 1)),
            ([Ty::Str, Ty::Str], Ty::Str) => out.push(("concat", 2)),
            ([Ty::Int, Ty::Int], Ty::Int) => out.push(("greatest", 2)),
            _ => {}
        }
        out
    }

    fn fun_leaf(&mut self, params: &[Ty], ret: &Ty) -> Expr {
        let refs = Self::named_refs(params, ret);
        if !refs.is_empty() && self.rng.gen_bool(0.5) {
            let (name, arity) = self.pick(&refs);
            return Expr::NamedRef { name: n(name), arity };
        }
        self.literal(params, ret, 0)
    }

    fn literal(&mut self, params: &[Ty], ret: &Ty, depth: usize) -> Expr {
        let names: Vec<Name> = params.iter().map(|_| self.fresh()).collect();
        let saved_ctx = self.ctx.take();
        let mark = self.scope.len();
        self.scope.extend(names.iter().cloned().zip(params.iter().cloned()));
        let body = self.expr(ret, depth);
        self.scope.truncate(mark);
        self.ctx = saved_ctx;
        Expr::Function { params: names, body: Box::new(body) }
    }

    fn expr(&mut self, ty: &Ty, depth: usize) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.15) {
            return self.leaf(ty);
        }
        let d = depth - 1;
        let dynamic = self.cfg.max_depth > 1;
        // shared forms
        match self.rng.gen_range(0..10) {
            0 => {
                let c = self.expr(&Ty::Bool, d);
                let t = self.expr(ty, d);
                let e = self.expr(ty, d);
                return Expr::if_then(c, t, e);
            }
            1 => {
                let vt = self.any_ty();
                let def = self.expr(&vt, d);
                let v = self.fresh();
                let body = self.bind(v.clone(), vt, |g| g.expr(ty, d));
                return Expr::let_in(v, def, body);
            }
            2 if dynamic => {
                let fty = self.fun_ty(ty.clone());
                let Ty::Fun(params, _) = &fty else { unreachable!() };
                let args = params.clone().iter().map(|p| self.expr(p, d)).collect();
                let f = self.expr(&fty, d);
                return Expr::DynCall { fun: Box::new(f), args };
            }
            3 if dynamic && !matches!(ty, Ty::Fun(..)) => {
                let f = self.expr(&Ty::Fun(vec![Ty::Int], Box::new(ty.clone())), d);
                let x = self.expr(&Ty::Int, d);
                return Expr::call(n("apply1"), vec![f, x]);
            }
            _ => {}
        }
        match ty {
            Ty::Int => match self.rng.gen_range(0..7) {
                0 => Expr::binary(Builtin::Add, self.expr(ty, d), self.expr(ty, d)),
                1 => Expr::binary(Builtin::Sub, self.expr(ty, d), self.expr(ty, d)),
                2 => Expr::binary(Builtin::Mul, self.expr(ty, d), Expr::Int(self.rng.gen_range(-2..4))),
                3 => Expr::binary(Builtin::Mod, self.expr(ty, d), Expr::Int(self.rng.gen_range(2..5))),
                4 => Expr::builtin(Builtin::Count, vec![self.expr(&Ty::Ints, d)]),
                5 => Expr::builtin(Builtin::Greatest, vec![self.expr(ty, d), self.expr(ty, d)]),
                _ => Expr::call(n("inc"), vec![self.expr(ty, d)]),
            },
            Ty::Str => match self.rng.gen_range(0..4) {
                0 => Expr::builtin(Builtin::Concat, vec![self.expr(ty, d), self.expr(ty, d)]),
                1 => Expr::builtin(Builtin::String, vec![self.expr(&Ty::Int, d)]),
                2 => Expr::call(n("shout"), vec![self.expr(ty, d)]),
                _ => {
                    let scrut_ty = self.pick(&[Ty::Int, Ty::Str]);
                    let scrutinee = Box::new(self.expr(&scrut_ty, d));
                    let (i, s, o) = (self.fresh(), self.fresh(), self.fresh());
                    let ib = Expr::builtin(Builtin::String, vec![Expr::var(&i)]);
                    let sb = self.bind(s.clone(), Ty::Str, |g| g.expr(&Ty::Str, d));
                    Expr::TypeSwitch {
                        scrutinee,
                        cases: vec![
                            TypeCase { test: TypeTest::Integer, var: i, body: ib },
                            TypeCase { test: TypeTest::String, var: s, body: sb },
                        ],
                        default_var: o,
                        default: Box::new(Expr::Str("?".into())),
                    }
                }
            },
            Ty::Bool => match self.rng.gen_range(0..6) {
                0 => Expr::binary(Builtin::Eq, self.expr(&Ty::Int, d), self.expr(&Ty::Int, d)),
                1 => Expr::binary(Builtin::Lt, self.expr(&Ty::Int, d), self.expr(&Ty::Int, d)),
                2 => Expr::builtin(Builtin::Not, vec![self.expr(ty, d)]),
                3 => Expr::builtin(
                    if self.rng.gen() { Builtin::Empty } else { Builtin::Exists },
                    vec![self.expr(&Ty::Ints, d)],
                ),
                4 => Expr::binary(Builtin::And, self.expr(ty, d), self.expr(ty, d)),
                _ => Expr::call(n("is-pos"), vec![self.expr(&Ty::Int, d)]),
            },
            Ty::Ints => match self.rng.gen_range(0..8) {
                0 => Expr::Seq(vec![self.expr(&Ty::Int, d), self.expr(&Ty::Ints, d)]),
                1 => {
                    let v = self.fresh();
                    let src = self.expr(ty, d);
                    let body = self.bind(v.clone(), Ty::Int, |g| g.expr(&Ty::Int, d));
                    Expr::for_in(v, src, body)
                }
                2 => {
                    let input = self.expr(ty, d);
                    let saved = self.ctx.replace(Ty::Int);
                    let pred = self.expr(&Ty::Bool, d);
                    self.ctx = saved;
                    Expr::filter(input, pred)
                }
                3 => Expr::builtin(
                    if self.rng.gen() { Builtin::Tail } else { Builtin::DistinctValues },
                    vec![self.expr(ty, d)],
                ),
                4 if dynamic => Expr::call(n("map-seq"), vec![self.expr(&int_to_int(), d), self.expr(ty, d)]),
                5 if dynamic => {
                    // iterate over a sequence of functions
                    let k = self.rng.gen_range(1..=3);
                    let funs = (0..k).map(|_| self.expr(&int_to_int(), d)).collect();
                    let v = self.fresh();
                    let arg = self.expr(&Ty::Int, d);
                    let call = Expr::DynCall { fun: Box::new(Expr::var(&v)), args: vec![arg] };
                    Expr::for_in(v, Expr::seq(funs), call)
                }
                _ => self.expr(&Ty::Int, d),
            },
            Ty::Fun(params, ret) => {
                let is_int_fun = *ty == int_to_int();
                match self.rng.gen_range(0..6) {
                    0 if is_int_fun => Expr::call(n("compose"), vec![self.expr(ty, d), self.expr(ty, d)]),
                    1 if is_int_fun => Expr::call(n("twice"), vec![self.expr(ty, d)]),
                    2 if is_int_fun => Expr::call(n("make-adder"), vec![self.expr(&Ty::Int, d)]),
                    3 => self.fun_leaf(params, ret),
                    _ => self.literal(params, ret, d),
                }
            }
        }
    }
}

/// Names of declared functions referenced (statically or by `name#n`) in `e`.
fn referenced(e: &Expr, out: &mut BTreeSet<Name>) {
    e.walk(&mut |x| match x {
        Expr::Call { name, .. } | Expr::NamedRef { name, .. } => {
            out.insert(name.clone());
        }
        _ => {}
    });
}

/// A closed, valid source program, deterministic in `cfg.seed`.
pub fn gen_program(cfg: &GenConfig) -> Program {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg: cfg.clone(),
        next_var: 0,
        scope: Vec::new(),
        ctx: None,
    };
    let depth = cfg.max_depth;
    let main = match g.rng.gen_range(0..6) {
        0 => Expr::element(
            n("out"),
            Expr::Seq(vec![g.expr(&Ty::Ints, depth.saturating_sub(1)), g.expr(&Ty::Str, depth.saturating_sub(1))]),
        ),
        _ => {
            let ty = g.base_ty();
            g.expr(&ty, depth)
        }
    };
    let prelude = parse(PRELUDE).expect("prelude parses").decls;
    let mut used = BTreeSet::new();
    referenced(&main, &mut used);
    // close over the prelude's own references
    loop {
        let before = used.len();
        for d in prelude.iter().filter(|d| used.contains(&d.name)).cloned().collect::<Vec<FunDecl>>() {
            referenced(&d.body, &mut used);
        }
        if used.len() == before {
            break;
        }
    }
    Program { decls: prelude.into_iter().filter(|d| used.contains(&d.name)).collect(), main }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{check_first_order, parse, print_program, validate_source};

    #[test]
    fn deterministic_in_seed() {
        let a = gen_program(&GenConfig::with_seed(1));
        let b = gen_program(&GenConfig::with_seed(1));
        assert_eq!(print_program(&a), print_program(&b));
    }

    #[test]
    fn programs_validate_and_round_trip() {
        let mut higher_order = 0;
        for seed in 1..=200 {
            let p = gen_program(&GenConfig::with_seed(seed));
            assert!(validate_source(&p).is_empty(), "seed {seed}: {:?}\n{}", validate_source(&p), print_program(&p));
            let text = print_program(&p);
            assert_eq!(parse(&text).unwrap(), p, "seed {seed}:\n{text}");
            higher_order += usize::from(!check_first_order(&p).is_empty());
        }
        assert!(higher_order > 100, "only {higher_order} higher-order programs");
    }

    #[test]
    fn shallow_programs_validate() {
        for seed in 1..=50 {
            let p = gen_program(&GenConfig { seed, max_depth: 1, max_arity: 2 });
            assert!(validate_source(&p).is_empty());
        }
    }
}
