use std::collections::BTreeSet;

use proptest::prelude::*;

use defuncq::defunc::defunctionalize;
use defuncq::engine::{eval, values_equal, EngineKind, EvalOptions, Item, Value};
use defuncq::gen::{gen_program, GenConfig};
use defuncq::pipeline::compile_target;
use defuncq::represent::{lower_node, lower_seq, EnvStore};
use defuncq::rewrite::OptLevel;
use defuncq::syntax::{free_vars, parse, print_program, Label};

fn config() -> impl Strategy<Value = GenConfig> {
    (any::<u64>(), 1usize..=5).prop_map(|(seed, max_depth)| GenConfig { max_depth, ..GenConfig::with_seed(seed) })
}

fn atom() -> impl Strategy<Value = Item> {
    prop_oneof![
        (-5i64..5).prop_map(Item::Int),
        "[a-c]{0,2}".prop_map(|s| Item::str(&s)),
        any::<bool>().prop_map(Item::Bool),
    ]
}

fn env() -> impl Strategy<Value = Vec<Value>> {
    prop::collection::vec(prop::collection::vec(atom(), 0..3).prop_map(Value::from), 0..3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_programs_parse_back(cfg in config()) {
        let p = gen_program(&cfg);
        let text = print_program(&p);
        prop_assert_eq!(parse(&text).unwrap(), p);
    }

    #[test]
    fn defunctionalization_is_deterministic(cfg in config()) {
        let p = gen_program(&cfg);
        prop_assert_eq!(defunctionalize(&p), defunctionalize(&p));
    }

    #[test]
    fn surrogates_are_closed(cfg in config()) {
        let q = defunctionalize(&gen_program(&cfg));
        for d in q.decls.iter().filter(|d| Label::parse(d.name.as_str()).is_some()) {
            let params: BTreeSet<_> = d.params.iter().collect();
            for v in free_vars(&d.body) {
                prop_assert!(params.contains(&v), "{} mentions free ${}", d.name, v);
            }
        }
    }

    #[test]
    fn compilation_preserves_values(cfg in config(), level in 0usize..3) {
        let p = gen_program(&cfg);
        let opts = EvalOptions::default();
        let expected = eval(&p, EngineKind::Source, opts);
        let (q, _) = compile_target(&p, OptLevel::ALL[level]).unwrap();
        let mut runs = vec![eval(&q, EngineKind::Target, opts), eval(&lower_node(&q), EngineKind::Lowered, opts)];
        if let Ok(s) = lower_seq(&q) {
            runs.push(eval(&s, EngineKind::Lowered, opts));
        }
        for r in runs {
            match (&expected, &r) {
                (Ok(a), Ok(b)) => prop_assert!(values_equal(&a.value, &b.value), "{} vs {}", a.value, b.value),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "{:?} vs {:?}", expected.as_ref().map(|e| e.value.to_string()), r.as_ref().map(|e| e.value.to_string())),
            }
        }
    }

    #[test]
    fn env_store_keys_are_injective(a in env(), b in env()) {
        let mut store = EnvStore::new();
        let ka = store.intern(&a);
        let kb = store.intern(&b);
        let same = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| values_equal(x, y));
        prop_assert_eq!(ka == kb, same);
        prop_assert_eq!(store.intern(&a), ka);
        prop_assert!(store.get(ka).unwrap().iter().zip(&a).all(|(x, y)| values_equal(x, y)));
    }
}

fn program_size(p: &defuncq::syntax::Program) -> usize {
    p.decls.iter().map(|d| d.body.size() + d.params.len() + 1).sum::<usize>() + p.main.size()
}

#[test]
fn optimization_never_grows_corpus_programs() {
    for e in defuncq::corpus::embedded() {
        let p = defuncq::pipeline::load(&e.source).unwrap();
        for level in [OptLevel::O1, OptLevel::O2] {
            let mut cur = defunctionalize(&p);
            let mut sizes = vec![program_size(&cur)];
            for _ in 0..defuncq::rewrite::MAX_ROUNDS {
                let next = defuncq::rewrite::round(&cur, level).unwrap();
                if next == cur {
                    break;
                }
                sizes.push(program_size(&next));
                cur = next;
            }
            let (first, last) = (sizes[0], *sizes.last().unwrap());
            assert!(last <= first, "{} at {level}: sizes {sizes:?}", e.name);
        }
    }
}
