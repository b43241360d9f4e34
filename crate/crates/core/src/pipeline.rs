//! End-to-end pipeline: load, compile, run, differential checks, fuzzing and benchmarks.

use std::fmt;
use std::ops::RangeInclusive;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::CorpusEntry;
use crate::defunc::defunctionalize;
use crate::engine::{eval, serialize, values_equal, EngineKind, EvalError, EvalOptions, Item, RunStats, Value};
use crate::gen::{gen_program, GenConfig};
use crate::represent::{lower, lower_node, lower_seq, Repr, ReprChoice, ReprError};
use crate::rewrite::{optimize_with_report, OptLevel, OptReport, RewriteError};
use crate::syntax::{dispatch_arity, parse, print_program, validate_source, Diagnostic, Expr, Label, ParseError, Program};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid program:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("rewrite error: {0}")]
    Rewrite(#[from] RewriteError),
    #[error("{0}")]
    Repr(#[from] ReprError),
    #[error("{0}")]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// 2 for problems with the input program, 4 for failures while running it.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Parse(_) | PipelineError::Invalid(_) | PipelineError::Repr(_) => 2,
            PipelineError::Rewrite(_) | PipelineError::Eval(_) => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    pub engine: EngineKind,
    pub repr: ReprChoice,
    pub opt: OptLevel,
    pub share_env: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            engine: EngineKind::Lowered,
            repr: ReprChoice::Auto,
            opt: OptLevel::O0,
            share_env: false,
            seed: 1,
        }
    }
}

impl PipelineConfig {
    fn eval_options(&self) -> EvalOptions {
        EvalOptions { share_env: self.share_env, ..EvalOptions::default() }
    }
}

/// Parses and validates a source program.
pub fn load(src: &str) -> Result<Program, PipelineError> {
    let p = parse(src)?;
    let diags = validate_source(&p);
    if diags.is_empty() {
        Ok(p)
    } else {
        Err(PipelineError::Invalid(diags))
    }
}

#[derive(Clone, Debug)]
pub struct Compiled {
    /// Defunctionalized and optimized, still with closure forms.
    pub target: Program,
    pub report: OptReport,
    /// Strictly first-order.
    pub lowered: Program,
    pub repr: Repr,
}

pub fn compile_target(p: &Program, opt: OptLevel) -> Result<(Program, OptReport), PipelineError> {
    Ok(optimize_with_report(&defunctionalize(p), opt)?)
}

pub fn compile(p: &Program, opt: OptLevel, repr: ReprChoice) -> Result<Compiled, PipelineError> {
    let (target, report) = compile_target(p, opt)?;
    let (lowered, repr) = lower(&target, repr)?;
    Ok(Compiled { target, report, lowered, repr })
}

/// The program the configured engine evaluates.
pub fn prepare(p: &Program, cfg: &PipelineConfig) -> Result<Program, PipelineError> {
    Ok(match cfg.engine {
        EngineKind::Source => p.clone(),
        EngineKind::Target => compile_target(p, cfg.opt)?.0,
        EngineKind::Lowered => compile(p, cfg.opt, cfg.repr)?.lowered,
    })
}

pub fn run(p: &Program, cfg: &PipelineConfig) -> Result<crate::engine::Evaluation, PipelineError> {
    let q = prepare(p, cfg)?;
    Ok(eval(&q, cfg.engine, cfg.eval_options())?)
}

/// One engine configuration in a differential run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Source,
    Target { opt: OptLevel, share_env: bool },
    Lowered { opt: OptLevel, repr: Repr },
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Source => f.write_str("source"),
            Variant::Target { opt, share_env } => {
                write!(f, "target --opt {opt} --share-env {}", if *share_env { "on" } else { "off" })
            }
            Variant::Lowered { opt, repr } => {
                write!(f, "lowered --opt {opt} --repr {}", if *repr == Repr::Node { "node" } else { "seq" })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub variant: Variant,
    pub result: Result<Value, EvalError>,
    pub stats: Option<RunStats>,
}

impl Outcome {
    fn describe(&self) -> String {
        match &self.result {
            Ok(v) => serialize(v),
            Err(e) => format!("error {e}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiffReport {
    /// The source engine's outcome comes first.
    pub outcomes: Vec<Outcome>,
    /// Whether the reference result is free of function items and thus comparable.
    pub comparable: bool,
}

fn has_functions(v: &Value) -> bool {
    v.iter().any(|i| matches!(i, Item::Function(_)))
}

fn agree(a: &Result<Value, EvalError>, b: &Result<Value, EvalError>, comparable: bool) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => !comparable || values_equal(x, y),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

impl DiffReport {
    pub fn reference(&self) -> &Outcome {
        &self.outcomes[0]
    }

    pub fn mismatches(&self) -> Vec<&Outcome> {
        let r = &self.reference().result;
        self.outcomes[1..].iter().filter(|o| !agree(r, &o.result, self.comparable)).collect()
    }

    pub fn agrees(&self) -> bool {
        self.mismatches().is_empty()
    }

    /// Reference value and the first mismatching configuration, if any.
    pub fn summary(&self) -> String {
        let mut out = format!("{}: {}\n", self.reference().variant, self.reference().describe());
        match self.mismatches().first() {
            None if self.comparable => out.push_str(&format!("all {} configurations agree\n", self.outcomes.len())),
            None => out.push_str("result holds function items; only success/failure compared\n"),
            Some(m) => {
                out.push_str(&format!("MISMATCH {}: {}\n", m.variant, m.describe()));
                let n = self.mismatches().len();
                if n > 1 {
                    out.push_str(&format!("({} more mismatching configurations)\n", n - 1));
                }
            }
        }
        out
    }
}

/// Deliberate corruptions used as negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Relabel the first branch of the first dispatcher.
    Dispatch,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dispatch" => Ok(Fault::Dispatch),
            _ => Err(format!("unknown fault `{s}`")),
        }
    }
}

fn inject(p: &mut Program, fault: Fault) {
    match fault {
        Fault::Dispatch => {
            let mut max = 0;
            let mut note = |e: &Expr| {
                if let Some(l) = e.static_label() {
                    max = max.max(l.index());
                }
                if let Expr::CaseOf { branches, .. } = e {
                    max = branches.iter().map(|b| b.label.index()).fold(max, u32::max);
                }
            };
            p.decls.iter().for_each(|d| d.body.walk(&mut note));
            p.main.walk(&mut note);
            let target = p.decls.iter_mut().find(|d| {
                dispatch_arity(&d.name).is_some() && matches!(&d.body, Expr::CaseOf { branches, .. } if !branches.is_empty())
            });
            if let Some(d) = target {
                if let Expr::CaseOf { branches, .. } = &mut d.body {
                    branches[0].label = Label::new(max + 1);
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiffOptions {
    pub levels: Vec<OptLevel>,
    pub fault: Option<Fault>,
}

impl Default for DiffOptions {
    fn default() -> Self {
        DiffOptions { levels: OptLevel::ALL.to_vec(), fault: None }
    }
}

fn outcome(variant: Variant, p: &Program, kind: EngineKind, opts: EvalOptions) -> Outcome {
    let r = eval(p, kind, opts);
    Outcome {
        variant,
        stats: r.as_ref().ok().map(|e| e.stats.clone()),
        result: r.map(|e| e.value),
    }
}

/// Runs the source engine against the target engine (with and without environment sharing)
/// and both lowerings, at each requested optimization level.
pub fn diff(p: &Program, opts: &DiffOptions) -> Result<DiffReport, PipelineError> {
    let base = EvalOptions::default();
    let reference = outcome(Variant::Source, p, EngineKind::Source, base);
    let comparable = reference.result.as_ref().map_or(true, |v| !has_functions(v));
    let mut outcomes = vec![reference];
    for &opt in &opts.levels {
        let (mut q, _) = compile_target(p, opt)?;
        if let Some(f) = opts.fault {
            inject(&mut q, f);
        }
        for share_env in [false, true] {
            let o = EvalOptions { share_env, ..base };
            outcomes.push(outcome(Variant::Target { opt, share_env }, &q, EngineKind::Target, o));
        }
        outcomes.push(outcome(Variant::Lowered { opt, repr: Repr::Node }, &lower_node(&q), EngineKind::Lowered, base));
        if let Ok(s) = lower_seq(&q) {
            outcomes.push(outcome(Variant::Lowered { opt, repr: Repr::Seq }, &s, EngineKind::Lowered, base));
        }
    }
    Ok(DiffReport { outcomes, comparable })
}

#[derive(Clone, Debug)]
pub struct FuzzFailure {
    pub seed: u64,
    pub program: String,
    pub report: String,
}

#[derive(Clone, Debug, Default)]
pub struct FuzzReport {
    pub programs: usize,
    /// Programs whose source run failed; compared on failure only.
    pub source_errors: usize,
    pub failures: Vec<FuzzFailure>,
}

/// Generates one program per seed and checks each differentially, in parallel.
pub fn fuzz(seeds: RangeInclusive<u64>, template: &GenConfig, opts: &DiffOptions) -> FuzzReport {
    let results: Vec<(bool, Option<FuzzFailure>)> = seeds
        .into_par_iter()
        .map(|seed| {
            let p = gen_program(&GenConfig { seed, ..template.clone() });
            let fail = |report: String| FuzzFailure { seed, program: print_program(&p), report };
            match diff(&p, opts) {
                Ok(r) => (r.reference().result.is_err(), (!r.agrees()).then(|| fail(r.summary()))),
                Err(e) => (false, Some(fail(format!("pipeline error: {e}")))),
            }
        })
        .collect();
    FuzzReport {
        programs: results.len(),
        source_errors: results.iter().filter(|(e, _)| *e).count(),
        failures: results.into_iter().filter_map(|(_, f)| f).collect(),
    }
}

#[derive(Debug)]
pub struct CorpusCheck {
    pub name: String,
    /// Source engine output, serialized.
    pub actual: Result<String, String>,
    pub golden_ok: bool,
    pub diff: Result<DiffReport, PipelineError>,
}

impl CorpusCheck {
    pub fn passed(&self) -> bool {
        self.golden_ok && self.diff.as_ref().is_ok_and(|d| d.agrees())
    }
}

pub fn check_corpus(entries: &[CorpusEntry], opts: &DiffOptions) -> Vec<CorpusCheck> {
    entries
        .par_iter()
        .map(|e| match load(&e.source) {
            Err(err) => CorpusCheck { name: e.name.clone(), actual: Err(err.to_string()), golden_ok: false, diff: Err(err) },
            Ok(p) => {
                let diff = diff(&p, opts);
                let actual = match &diff {
                    Ok(d) => d.reference().result.as_ref().map(serialize).map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                let golden_ok = actual.as_deref() == Ok(e.expected.as_str());
                CorpusCheck { name: e.name.clone(), actual, golden_ok, diff }
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub opt: OptLevel,
    pub variant: &'static str,
    pub millis: f64,
    pub stats: RunStats,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub calls: u64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Dispatched time over native time at `opt`.
    pub fn ratio(&self, opt: OptLevel) -> Option<f64> {
        let t = |v: &str| self.rows.iter().find(|r| r.opt == opt && r.variant == v).map(|r| r.millis);
        Some(t("dispatched")? / t("native")?.max(1e-6))
    }

    pub fn render(&self) -> String {
        if self.rows.is_empty() {
            return "no iterations requested\n".into();
        }
        let mut out = format!("{} calls per variant\n", self.calls);
        for r in &self.rows {
            out.push_str(&format!(
                "opt {} {:<10} {:>10.3} ms  dispatched={} static={}\n",
                r.opt, r.variant, r.millis, r.stats.dispatched_calls, r.stats.static_calls
            ));
        }
        for opt in OptLevel::ALL {
            if let Some(x) = self.ratio(opt) {
                out.push_str(&format!("opt {opt} ratio dispatched/native = {x:.3}\n"));
            }
        }
        out
    }
}

fn native_program(calls: u64) -> String {
    format!("declare function f($x) {{ $x + 1 }}; count(for $i in 1 to {calls} return f($i))")
}

fn dispatched_program(calls: u64) -> String {
    format!(
        "let $fs := (function($x) {{ $x + 1 }}, function($x) {{ $x + 2 }}) let $f := $fs[1] \
         return count(for $i in 1 to {calls} return $f($i))"
    )
}

/// Times `calls` native static calls against `calls` dispatched calls at every level,
/// both on the target engine.
pub fn bench(calls: u64) -> Result<BenchReport, PipelineError> {
    if calls == 0 {
        return Ok(BenchReport::default());
    }
    let variants = [("native", load(&native_program(calls))?), ("dispatched", load(&dispatched_program(calls))?)];
    let mut rows = Vec::new();
    for opt in OptLevel::ALL {
        for (name, p) in &variants {
            let (q, _) = compile_target(p, opt)?;
            let start = Instant::now();
            let r = eval(&q, EngineKind::Target, EvalOptions::default())?;
            rows.push(BenchRow { opt, variant: name, millis: start.elapsed().as_secs_f64() * 1e3, stats: r.stats });
        }
    }
    Ok(BenchReport { calls, rows })
}

/// Times `iterations` runs of `p` on the target engine at every level.
pub fn bench_program(p: &Program, iterations: u64) -> Result<BenchReport, PipelineError> {
    let mut rows = Vec::new();
    if iterations == 0 {
        return Ok(BenchReport::default());
    }
    for opt in OptLevel::ALL {
        let (q, _) = compile_target(p, opt)?;
        let start = Instant::now();
        let mut stats = RunStats::default();
        for _ in 0..iterations {
            stats = eval(&q, EngineKind::Target, EvalOptions::default())?.stats;
        }
        rows.push(BenchRow { opt, variant: "program", millis: start.elapsed().as_secs_f64() * 1e3, stats });
    }
    Ok(BenchReport { calls: iterations, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_passes() {
        for c in check_corpus(&crate::corpus::embedded(), &DiffOptions::default()) {
            assert!(c.golden_ok, "{}: {:?}", c.name, c.actual);
            let d = c.diff.as_ref().unwrap();
            assert!(d.agrees(), "{}:\n{}", c.name, d.summary());
        }
    }

    #[test]
    fn injected_fault_is_detected() {
        let p = load(&crate::corpus::find("pow").unwrap().source).unwrap();
        let r = diff(&p, &DiffOptions { fault: Some(Fault::Dispatch), ..DiffOptions::default() }).unwrap();
        assert!(!r.agrees());
        assert!(r.summary().contains("MISMATCH"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(load("1 +").unwrap_err().exit_code(), 2);
        assert_eq!(load("$x").unwrap_err().exit_code(), 2);
        let p = load("1 idiv 0").unwrap();
        assert_eq!(run(&p, &PipelineConfig::default()).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn zero_iterations_bench_is_empty() {
        assert!(bench(0).unwrap().rows.is_empty());
    }
}
