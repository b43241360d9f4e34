use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use defuncq::corpus;
use defuncq::engine::{serialize, EngineKind};
use defuncq::gen::GenConfig;
use defuncq::pipeline::{
    bench, bench_program, check_corpus, compile, diff, fuzz, load, run, DiffOptions, Fault, PipelineConfig,
    PipelineError,
};
use defuncq::represent::ReprChoice;
use defuncq::rewrite::OptLevel;
use defuncq::syntax::{print_program, Program};

const EXIT_MISMATCH: u8 = 1;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "defuncq", version, about = "Defunctionalizing compiler for a small XQuery dialect")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Defunctionalize, optimize and lower a program; print the result.
    Compile {
        input: PathBuf,
        #[command(flatten)]
        flags: Flags,
        /// Write the program here instead of stdout.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Evaluate a program on one engine and print its value.
    Run {
        input: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Compare every engine, level and representation against the source engine.
    Diff {
        input: PathBuf,
        /// Check only this level; all levels by default.
        #[arg(long, value_parser = parse_with::<OptLevel>)]
        opt: Option<OptLevel>,
        #[command(flatten)]
        faults: FaultFlag,
    },
    /// Time native against dispatched calls, or a given program, at each level.
    Bench {
        input: Option<PathBuf>,
        /// Calls per variant, or runs of the given program.
        #[arg(long, default_value_t = 100_000)]
        iterations: u64,
    },
    /// Differentially test generated programs.
    Fuzz {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        count: u64,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        #[command(flatten)]
        faults: FaultFlag,
    },
    /// Check the corpus against its goldens and across all configurations.
    Corpus {
        #[command(flatten)]
        faults: FaultFlag,
    },
}

#[derive(Args)]
struct Flags {
    #[arg(long, default_value = "lowered", value_parser = parse_with::<EngineKind>)]
    engine: EngineKind,
    #[arg(long, default_value = "auto", value_parser = parse_with::<ReprChoice>)]
    repr: ReprChoice,
    #[arg(long, default_value = "0", value_parser = parse_with::<OptLevel>)]
    opt: OptLevel,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    share_env: Switch,
    /// Write run statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct FaultFlag {
    #[arg(long, hide = true, value_parser = parse_with::<Fault>)]
    inject_fault: Option<Fault>,
}

impl FaultFlag {
    fn options(&self, levels: Vec<OptLevel>) -> DiffOptions {
        DiffOptions { levels, fault: self.inject_fault }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

fn parse_with<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

impl Flags {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            engine: self.engine,
            repr: self.repr,
            opt: self.opt,
            share_env: self.share_env == Switch::On,
            seed: self.seed,
        }
    }
}

/// A failure that ends the command with a specific exit code.
struct Exit(u8);

fn io_fail(path: &Path, e: impl Display) -> Exit {
    eprintln!("error: {}: {e}", path.display());
    Exit(EXIT_IO)
}

fn pipeline_fail(e: PipelineError) -> Exit {
    eprintln!("error: {e}");
    Exit(e.exit_code() as u8)
}

fn read_program(path: &Path) -> Result<Program, Exit> {
    let src = std::fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    load(&src).map_err(pipeline_fail)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Exit> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_fail(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<(), Exit> {
    match cmd {
        Command::Compile { input, flags, output } => {
            let p = read_program(&input)?;
            let c = compile(&p, flags.opt, flags.repr).map_err(pipeline_fail)?;
            if let Some(note) = c.report.diagnostic() {
                eprintln!("warning: {note}");
            }
            write_or_print(output.as_deref(), &print_program(&c.lowered))
        }
        Command::Run { input, flags } => {
            let p = read_program(&input)?;
            let r = run(&p, &flags.config()).map_err(pipeline_fail)?;
            println!("{}", serialize(&r.value));
            if let Some(path) = &flags.stats {
                std::fs::write(path, r.stats.to_json() + "\n").map_err(|e| io_fail(path, e))?;
            }
            Ok(())
        }
        Command::Diff { input, opt, faults } => {
            let p = read_program(&input)?;
            let levels = opt.map_or_else(|| OptLevel::ALL.to_vec(), |o| vec![o]);
            let report = diff(&p, &faults.options(levels)).map_err(pipeline_fail)?;
            print!("{}", report.summary());
            if report.agrees() {
                Ok(())
            } else {
                Err(Exit(EXIT_MISMATCH))
            }
        }
        Command::Bench { input, iterations } => {
            let report = match input {
                Some(path) => bench_program(&read_program(&path)?, iterations),
                None => bench(iterations),
            }
            .map_err(pipeline_fail)?;
            print!("{}", report.render());
            Ok(())
        }
        Command::Fuzz { seed, count, max_depth, faults } => {
            if count == 0 {
                println!("0 programs");
                return Ok(());
            }
            let template = GenConfig { max_depth, ..GenConfig::with_seed(seed) };
            let report = fuzz(seed..=seed + (count - 1), &template, &faults.options(OptLevel::ALL.to_vec()));
            for f in &report.failures {
                println!("seed {} mismatch\n{}\n{}", f.seed, f.program, f.report);
            }
            println!(
                "{} programs, {} mismatches, {} failing on every engine",
                report.programs,
                report.failures.len(),
                report.source_errors
            );
            if report.failures.is_empty() {
                Ok(())
            } else {
                Err(Exit(EXIT_MISMATCH))
            }
        }
        Command::Corpus { faults } => {
            let entries = corpus::load().map_err(|e| {
                eprintln!("error: reading corpus: {e}");
                Exit(EXIT_IO)
            })?;
            let checks = check_corpus(&entries, &faults.options(OptLevel::ALL.to_vec()));
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed() { "ok" } else { "FAIL" };
                println!("{status:<4} {}", c.name);
                if !c.golden_ok {
                    println!("     golden mismatch: {:?}", c.actual);
                }
                match &c.diff {
                    Ok(d) if !d.agrees() => print!("{}", d.summary()),
                    Err(e) => println!("     {e}"),
                    _ => {}
                }
                failed += usize::from(!c.passed());
            }
            println!("{} programs, {failed} failed", checks.len());
            if failed == 0 {
                Ok(())
            } else {
                Err(Exit(EXIT_MISMATCH))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code)) => ExitCode::from(code),
    }
}
