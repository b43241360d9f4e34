//! One pass/fail line per acceptance criterion.

use std::time::{Duration, Instant};

use defuncq::corpus;
use defuncq::defunc::defunctionalize;
use defuncq::engine::{eval, node_count, serialize, values_equal, EngineKind, EvalOptions, Value};
use defuncq::gen::{gen_program, GenConfig};
use defuncq::pipeline::{bench, compile_target, diff, fuzz, load, DiffOptions};
use defuncq::represent::{lower_node, lower_seq};
use defuncq::rewrite::{cancel_case_of, optimize, simplify, unfold, OptLevel};
use defuncq::syntax::{check_first_order, dispatch_arity, Expr, Program};

const GROUPS: &str = "<group>0 2 8 34</group>\n<group>1 1 3 5 13 21</group>";
const FUZZ_SEEDS: std::ops::RangeInclusive<u64> = 1..=500;
const NODES_PER_FUNCTIONAL_ENTRY: i64 = 10;
const NODES_PER_FIRST_ORDER_ENTRY: i64 = 9;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
}

fn report(c: Criterion, check: impl FnOnce() -> Result<String, String>) -> bool {
    let start = Instant::now();
    let r = check();
    let took = start.elapsed();
    let (ok, detail) = match r {
        Ok(d) if took <= c.budget => (true, d),
        Ok(d) => (false, format!("{d}; took {took:?}, budget {:?}", c.budget)),
        Err(e) => (false, e),
    };
    println!("criterion {} [{}] {}: {} ({:.0?})", c.id, c.name, if ok { "PASS" } else { "FAIL" }, detail, took);
    ok
}

fn corpus_program(name: &str) -> Program {
    load(&corpus::find(name).expect("corpus entry").source).expect("corpus program loads")
}

fn run(p: &Program, kind: EngineKind) -> Result<Value, String> {
    eval(p, kind, EvalOptions::default()).map(|e| e.value).map_err(|e| e.to_string())
}

/// Every engine, level and applicable representation, serialized.
fn all_outputs(p: &Program) -> Result<Vec<(String, String)>, String> {
    let mut out = vec![("source".to_string(), serialize(&run(p, EngineKind::Source)?))];
    for opt in OptLevel::ALL {
        let (q, _) = compile_target(p, opt).map_err(|e| e.to_string())?;
        out.push((format!("target -O{opt}"), serialize(&run(&q, EngineKind::Target)?)));
        out.push((format!("lowered node -O{opt}"), serialize(&run(&lower_node(&q), EngineKind::Lowered)?)));
        if let Ok(s) = lower_seq(&q) {
            out.push((format!("lowered seq -O{opt}"), serialize(&run(&s, EngineKind::Lowered)?)));
        }
    }
    Ok(out)
}

fn all_equal_to(p: &Program, expected: &str) -> Result<String, String> {
    let outs = all_outputs(p)?;
    match outs.iter().find(|(_, v)| v != expected) {
        Some((cfg, v)) => Err(format!("{cfg} gave {v:?}, expected {expected:?}")),
        None => Ok(format!("{} configurations agree", outs.len())),
    }
}

fn closure_forms(p: &Program) -> (usize, usize, usize) {
    let (mut ctors, mut cases) = (0, 0);
    let mut visit = |e: &Expr| match e {
        Expr::Closure { .. } => ctors += 1,
        Expr::CaseOf { .. } => cases += 1,
        _ => {}
    };
    p.decls.iter().for_each(|d| d.body.walk(&mut visit));
    p.main.walk(&mut visit);
    let dispatchers = p.decls.iter().filter(|d| dispatch_arity(&d.name).is_some()).count();
    (ctors, cases, dispatchers)
}

fn map_nodes(first_order: bool, n: usize) -> Result<i64, String> {
    let name = if first_order { "map-first-order" } else { "map" };
    let src = corpus::find(name).unwrap().source;
    let decls = &src[..src.rfind("};").unwrap() + 2];
    let entries: Vec<String> = (1..=n).map(|k| format!("map-entry({k}, \"v{k}\")")).collect();
    let p = load(&format!("{decls}\nmap-new(({}))", entries.join(", "))).map_err(|e| e.to_string())?;
    let q = lower_node(&defunctionalize(&p));
    let v = eval(&q, EngineKind::Lowered, EvalOptions::default()).map_err(|e| e.to_string())?.value;
    Ok(node_count(&v) as i64)
}

fn slope(first_order: bool, expected: i64) -> Result<Vec<i64>, String> {
    let counts: Vec<i64> = (1..=6).map(|n| map_nodes(first_order, n)).collect::<Result<_, _>>()?;
    let diffs: Vec<i64> = counts.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|d| *d == expected) {
        Ok(counts)
    } else {
        Err(format!("node counts {counts:?}, differences {diffs:?}, expected {expected}"))
    }
}

fn group_by_env_items(share_env: bool) -> Result<u64, String> {
    let src = corpus::find("group-by").unwrap().source
        .replace("(0, 1, 1, 2, 3, 5, 8, 13, 21, 34)", "1 to 100")
        .replace("$x mod 2", "$x mod 10");
    let p = load(&src).map_err(|e| e.to_string())?;
    let q = defunctionalize(&p);
    let r = eval(&q, EngineKind::Target, EvalOptions { share_env, ..EvalOptions::default() }).map_err(|e| e.to_string())?;
    if r.value.len() != 10 {
        return Err(format!("expected 10 groups, got {}", r.value.len()));
    }
    Ok(r.stats.env_items_stored)
}

fn dispatched_calls(p: &Program, opt: OptLevel) -> Result<u64, String> {
    let (q, _) = compile_target(p, opt).map_err(|e| e.to_string())?;
    Ok(eval(&q, EngineKind::Target, EvalOptions::default()).map_err(|e| e.to_string())?.stats.dispatched_calls)
}

fn main() {
    let mut ok = true;

    ok &= report(Criterion { id: 1, name: "exponentiation", budget: Duration::from_secs(1) }, || {
        all_equal_to(&corpus_program("pow"), "8")
    });

    ok &= report(Criterion { id: 2, name: "group-by agreement", budget: Duration::from_secs(1) }, || {
        all_equal_to(&corpus_program("group-by"), GROUPS)
    });

    ok &= report(Criterion { id: 3, name: "map lookup and closure size", budget: Duration::from_secs(1) }, || {
        let v = serialize(&run(&corpus_program("map"), EngineKind::Source)?);
        if v != "two" {
            return Err(format!("m(2) gave {v:?}"));
        }
        all_equal_to(&corpus_program("map"), "two")?;
        let functional = slope(false, NODES_PER_FUNCTIONAL_ENTRY)?;
        let first_order = slope(true, NODES_PER_FIRST_ORDER_ENTRY)?;
        Ok(format!("m(2) = two; functional nodes {functional:?}; first-order nodes {first_order:?}"))
    });

    ok &= report(Criterion { id: 4, name: "closure-less eager group-by", budget: Duration::from_secs(1) }, || {
        let p = corpus_program("group-by-eager");
        let q = optimize(&defunctionalize(&p), OptLevel::O2).map_err(|e| e.to_string())?;
        let forms = closure_forms(&q);
        if forms != (0, 0, 0) {
            return Err(format!("closure constructors, case-ofs, dispatchers = {forms:?}"));
        }
        let v = serialize(&run(&q, EngineKind::Target)?);
        let l = serialize(&run(&lower_node(&q), EngineKind::Lowered)?);
        if v != GROUPS || l != GROUPS {
            return Err(format!("value {v:?} / lowered {l:?}"));
        }
        Ok("0 constructors, 0 case-ofs, 0 dispatchers; groups preserved".into())
    });

    ok &= report(Criterion { id: 5, name: "differential fuzzing", budget: Duration::from_secs(60) }, || {
        let r = fuzz(FUZZ_SEEDS, &GenConfig::default(), &DiffOptions::default());
        match r.failures.first() {
            Some(f) => Err(format!("{} of {} mismatched; first seed {}:\n{}\n{}", r.failures.len(), r.programs, f.seed, f.program, f.report)),
            None => Ok(format!("{} programs, 0 mismatches ({} fail on every engine)", r.programs, r.source_errors)),
        }
    });

    ok &= report(Criterion { id: 6, name: "environment sharing", budget: Duration::from_secs(1) }, || {
        let (s, g) = (100u64, 10u64);
        let shared = group_by_env_items(true)?;
        let unshared = group_by_env_items(false)?;
        let bound_shared = s + 5 * g;
        let bound_unshared = 9 * g * s / 10;
        if shared <= bound_shared && unshared >= bound_unshared {
            Ok(format!("shared {shared} <= {bound_shared}, unshared {unshared} >= {bound_unshared}"))
        } else {
            Err(format!("shared {shared} (bound {bound_shared}), unshared {unshared} (bound {bound_unshared})"))
        }
    });

    ok &= report(Criterion { id: 7, name: "dispatch overhead", budget: Duration::from_secs(30) }, || {
        let b = bench(100_000).map_err(|e| e.to_string())?;
        let ratio = b.ratio(OptLevel::O0).ok_or("no ratio")?;
        if !ratio.is_finite() || ratio <= 0.0 {
            return Err(format!("ratio {ratio}"));
        }
        for e in corpus::embedded() {
            let p = load(&e.source).map_err(|e| e.to_string())?;
            let counts: Vec<u64> = OptLevel::ALL.iter().map(|o| dispatched_calls(&p, *o)).collect::<Result<_, _>>()?;
            if counts.windows(2).any(|w| w[1] > w[0]) {
                return Err(format!("{}: dispatched calls {counts:?} increase", e.name));
            }
        }
        let eager = dispatched_calls(&corpus_program("group-by-eager"), OptLevel::O2)?;
        if eager != 0 {
            return Err(format!("eager group-by at opt 2 dispatches {eager} calls"));
        }
        Ok(format!("dispatched/native = {ratio:.2} at opt 0; corpus dispatch counts non-increasing; eager group-by 0"))
    });

    ok &= report(Criterion { id: 8, name: "identity and pass preservation", budget: Duration::from_secs(5) }, || {
        let mut first_order = vec![corpus_program("map-first-order")];
        first_order.extend(
            (1..=300).map(|s| gen_program(&GenConfig::with_seed(s))).filter(|p| check_first_order(p).is_empty()),
        );
        if let Some(p) = first_order.iter().find(|p| defunctionalize(p) != **p) {
            return Err(format!("defunctionalize changed a first-order program:\n{}", defuncq::syntax::print_program(p)));
        }
        let mut passes = 0;
        for e in corpus::embedded() {
            let p = load(&e.source).map_err(|e| e.to_string())?;
            let q = defunctionalize(&p);
            if optimize(&q, OptLevel::O0).map_err(|e| e.to_string())? != q {
                return Err(format!("{}: level 0 is not the identity", e.name));
            }
            let expected = run(&q, EngineKind::Target)?;
            let mut cur = q;
            for round in 0..3 {
                let candidates = [
                    ("unfold", unfold(&cur)),
                    ("cancel", cancel_case_of(&cur).map_err(|e| e.to_string())?),
                    ("simplify", simplify(&cur)),
                ];
                for (name, r) in &candidates {
                    let v = run(r, EngineKind::Target)?;
                    if !values_equal(&v, &expected) {
                        return Err(format!("{}: {name} in round {round} changed the value", e.name));
                    }
                    passes += 1;
                }
                cur = simplify(&cancel_case_of(&unfold(&cur)).map_err(|e| e.to_string())?);
            }
        }
        Ok(format!("{} first-order programs unchanged; {passes} pass applications preserve values", first_order.len()))
    });

    fault_injection_is_caught();
    if !ok {
        eprintln!("some acceptance criteria failed");
        std::process::exit(1);
    }
}

fn fault_injection_is_caught() {
    let p = corpus_program("pow");
    let r = diff(&p, &DiffOptions { fault: Some(defuncq::pipeline::Fault::Dispatch), ..DiffOptions::default() }).unwrap();
    assert!(!r.agrees(), "injected dispatcher fault went unnoticed");
}
