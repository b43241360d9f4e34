use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(format!("{name}.fq"))
}

fn defuncq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_defuncq")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_pow_on_every_engine() {
    for engine in ["source", "target", "lowered"] {
        for opt in ["0", "1", "2"] {
            let o = defuncq(&["run", "--engine", engine, "--opt", opt, path(&corpus("pow"))]);
            assert_eq!(code(&o), 0, "{engine} {opt}");
            assert_eq!(stdout(&o), "8\n");
        }
    }
}

#[test]
fn run_group_by_lowered() {
    let o = defuncq(&["run", "--engine", "lowered", path(&corpus("group-by"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "<group>0 2 8 34</group>\n<group>1 1 3 5 13 21</group>\n");
}

#[test]
fn run_map_lookup() {
    let o = defuncq(&["run", path(&corpus("map"))]);
    assert_eq!(stdout(&o), "two\n");
}

#[test]
fn run_writes_stats() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    let o = defuncq(&["run", "--engine", "target", "--stats", path(&stats), path(&corpus("pow"))]);
    assert_eq!(code(&o), 0);
    let json = std::fs::read_to_string(&stats).unwrap();
    for key in ["dispatchedCalls", "staticCalls", "closuresBuilt", "nodesBuilt", "envItemsStored", "maxClosureDepth"] {
        assert!(json.contains(key), "missing {key} in {json}");
    }
}

#[test]
fn compile_first_order_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let src = "declare function local:double($x) { $x * 2 };\nlocal:double(21)\n";
    let input = dir.path().join("first.fq");
    std::fs::write(&input, src).unwrap();
    let printed = stdout(&defuncq(&["compile", path(&input)]));
    let again = dir.path().join("printed.fq");
    std::fs::write(&again, &printed).unwrap();
    let out = dir.path().join("out.fq");
    let o = defuncq(&["compile", path(&again), "-o", path(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), printed);
}

#[test]
fn compile_eager_group_by_is_closure_less() {
    let o = defuncq(&["compile", "--opt", "2", path(&corpus("group-by-eager"))]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for token in ["closure", "case", "dispatch_"] {
        assert!(!text.contains(token), "found {token} in\n{text}");
    }
}

#[test]
fn compile_group_by_node_repr_has_dispatcher() {
    let o = defuncq(&["compile", "--opt", "0", "--repr", "node", path(&corpus("group-by"))]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("dispatch_"));
    assert!(!text.contains("closure "));
}

#[test]
fn diff_agrees_on_corpus() {
    for name in ["pow", "group-by", "map", "fold-concat"] {
        let o = defuncq(&["diff", path(&corpus(name))]);
        assert_eq!(code(&o), 0, "{name}: {}", stdout(&o));
    }
}

#[test]
fn diff_catches_corrupted_dispatcher() {
    let o = defuncq(&["diff", "--inject-fault", "dispatch", path(&corpus("pow"))]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("MISMATCH"));
}

#[test]
fn bad_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.fq");
    std::fs::write(&input, "let $x := return").unwrap();
    assert_eq!(code(&defuncq(&["run", path(&input)])), 2);
    std::fs::write(&input, "$undefined + 1").unwrap();
    assert_eq!(code(&defuncq(&["compile", path(&input)])), 2);
}

#[test]
fn missing_file_exits_3() {
    let o = defuncq(&["run", "/nonexistent/nowhere.fq"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn runtime_error_exits_4_with_tag() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("err.fq");
    std::fs::write(&input, "1 + \"a\"").unwrap();
    let o = defuncq(&["run", path(&input)]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("TypeError"));
}

#[test]
fn bench_with_zero_iterations_is_empty() {
    let o = defuncq(&["bench", "--iterations", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "no iterations requested\n");
}

#[test]
fn bench_reports_ratio() {
    let o = defuncq(&["bench", "--iterations", "2000"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("ratio dispatched/native"));
}

#[test]
fn fuzz_small_run() {
    let o = defuncq(&["fuzz", "--seed", "7", "--count", "25"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).starts_with("25 programs, 0 mismatches"));
}

#[test]
fn corpus_honours_override_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("pow"), dir.path().join("pow.fq")).unwrap();
    std::fs::write(dir.path().join("pow.out"), "8\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_defuncq"))
        .arg("corpus")
        .env("DEFUNCQ_CORPUS", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("1 programs, 0 failed"));

    std::fs::write(dir.path().join("pow.out"), "9\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_defuncq")).arg("corpus").env("DEFUNCQ_CORPUS", dir.path()).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn output_is_deterministic() {
    let a = defuncq(&["compile", "--opt", "1", path(&corpus("map-ops"))]);
    let b = defuncq(&["compile", "--opt", "1", path(&corpus("map-ops"))]);
    assert_eq!(a.stdout, b.stdout);
}
