mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use ownir::harness::bench::{run_bench, BenchSpec, Family, Mode};
use ownir::harness::check::model_oracle;
use ownir::harness::corpus::{check_program, reproducer, run_corpus, CorpusOptions, Finding};
use ownir::harness::CheckConfig;
use ownir::ir::{flatten, nondet_sites, validate, FlattenError, Level, Program};
use ownir::machine::m1::{self, Fault, M1Config};
use ownir::machine::{m0, Oracle, RunConfig, RunError, Status, DEFAULT_STEP_LIMIT};
use ownir::smt::{solve, to_smtlib, SatResult, SolveError, SolverConfig};
use ownir::text::{parse, print};
use ownir::vcgen::{encode, Encoding};

const EXIT_FAIL: u8 = 1;
const EXIT_UB: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_UNKNOWN: u8 = 4;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NOINPUT: u8 = 66;
const EXIT_SOFTWARE: u8 = 70;
const EXIT_IO: u8 = 74;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {0}: {1}")]
    Input(String, std::io::Error),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot write {0}: {1}")]
    Output(String, std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(..) => EXIT_NOINPUT,
            CliError::Data(_) => EXIT_DATA,
            CliError::Solver(SolveError::Timeout(_)) => EXIT_UNKNOWN,
            CliError::Solver(_) | CliError::Run(_) => EXIT_SOFTWARE,
            CliError::Output(..) => EXIT_IO,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ownir", version, about = "Ownership-aware IR: run, verify, cross-check and benchmark programs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Configuration file (default: ./ownir.toml when present).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Solver command (overrides the config file and OWNIR_SOLVER).
    #[arg(long, global = true, value_name = "CMD")]
    solver: Option<String>,
    /// Solver timeout in seconds.
    #[arg(long, global = true, value_name = "SECS")]
    timeout: Option<u64>,
    /// Worker threads for corpus and benchmark runs.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a program on one of the machines.
    Run(RunArgs),
    /// Generate and solve the verification condition of an acyclic program.
    Verify(VerifyArgs),
    /// Compare the uncached and cached machines on a program or a generated corpus.
    Diff(DiffArgs),
    /// Time the encodings on the typestate benchmark families.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MachineArg {
    M0,
    M1,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EncoderArg {
    Ownsem,
    Baseline,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum LevelArg {
    M1,
    M2,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FaultArg {
    SkipStoreSync,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FamilyArg {
    #[value(name = "many_buffers")]
    ManyBuffers,
    #[value(name = "file_typestate")]
    FileTypestate,
    #[value(name = "file_typestate_noclose")]
    FileTypestateNoclose,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Ownsem,
    BaselineShadow,
    BaselineMain,
}

#[derive(Args, Debug)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "m0")]
    machine: MachineArg,
    /// Nondet values in site order, e.g. 42,1,50.
    #[arg(long, value_delimiter = ',', value_name = "V,...")]
    oracle: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
    step_limit: usize,
    /// Print only the status and final registers.
    #[arg(long)]
    no_trace: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "ownsem")]
    encoder: EncoderArg,
    /// Write the SMT-LIB script to PATH ("-" for stdout) before solving.
    #[arg(long, value_name = "PATH")]
    emit_smt: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["file", "corpus"]))]
struct DiffArgs {
    file: Option<PathBuf>,
    /// Generated corpus: first seed and number of programs.
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "SEED,COUNT", conflicts_with = "file")]
    corpus: Option<Vec<u64>>,
    /// Also compare the exhaustive verdict with both solver verdicts.
    #[arg(long)]
    full: bool,
    /// Level of generated programs (default: alternate m1 and m2).
    #[arg(long, value_enum, requires = "corpus")]
    level: Option<LevelArg>,
    #[arg(long, default_value_t = 4, requires = "corpus")]
    width: u32,
    /// Run the cached machine with a deliberate defect (harness self-test).
    #[arg(long, value_enum)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8", value_name = "N,...")]
    n: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ownsem,baseline-shadow")]
    modes: Vec<ModeArg>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Write the JSON report here.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    let solver = || config::solver(cli.global.config.as_deref(), cli.global.solver.as_deref(), cli.global.timeout);
    match &cli.command {
        Command::Run(a) => cmd_run(a, cli.global.json),
        Command::Verify(a) => cmd_verify(a, &solver()?, cli.global.json),
        Command::Diff(a) => cmd_diff(a, &solver()?, cli.global.json),
        Command::Bench(a) => cmd_bench(a, &solver()?, cli.global.json),
    }
}

fn load(path: &Path) -> Result<Program, CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::Input(path.display().to_string(), e))?;
    let program = parse(&src).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let report = validate(&program);
    if !report.is_ok() {
        return Err(CliError::Data(format!("{}: invalid program\n{}", path.display(), report.render(&program))));
    }
    Ok(program)
}

fn status_line(status: &Status, program: &Program) -> String {
    match status {
        Status::Running => "running".into(),
        Status::Halted => "halted".into(),
        Status::AssertFailed(loc) => format!("assertion failed at {}", loc.display(program)),
        Status::AssumeInfeasible(loc) => format!("assumption infeasible at {}", loc.display(program)),
        Status::Ub { rule, loc } => format!("undefined behavior: {rule} at {}", loc.display(program)),
    }
}

fn status_code(status: &Status) -> u8 {
    match status {
        Status::Running | Status::Halted => 0,
        Status::AssertFailed(_) => EXIT_FAIL,
        Status::Ub { .. } => EXIT_UB,
        Status::AssumeInfeasible(_) => EXIT_INFEASIBLE,
    }
}

fn cmd_run(a: &RunArgs, json: bool) -> Result<u8, CliError> {
    let program = load(&a.file)?;
    let cfg = RunConfig { step_limit: a.step_limit, record_trace: !a.no_trace };
    let oracle = Oracle::new(a.oracle.clone());
    let out = match a.machine {
        MachineArg::M0 => m0::run(&program, oracle, cfg)?,
        MachineArg::M1 => m1::run(&program, oracle, M1Config::default(), cfg)?,
    };
    if json {
        let v = json!({
            "machine": format!("{:?}", a.machine).to_lowercase(),
            "status": status_line(&out.status, &program),
            "verdict": out.verdict().to_string(),
            "registers": out.registers.iter().map(|(n, v)| json!([n, v.to_string()])).collect::<Vec<_>>(),
            "trace": out.trace,
            "stats": out.stats,
        });
        println!("{v:#}");
    } else {
        for t in &out.trace {
            println!("{t}");
        }
        println!("status: {}", status_line(&out.status, &program));
        for (name, value) in &out.registers {
            println!("{name} = {value}");
        }
    }
    Ok(status_code(&out.status))
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Output("stdout".into(), e))
    } else {
        std::fs::write(path, text).map_err(|e| CliError::Output(path.display().to_string(), e))
    }
}

fn cmd_verify(a: &VerifyArgs, solver: &SolverConfig, json: bool) -> Result<u8, CliError> {
    let program = load(&a.file)?;
    let flat = flatten(&program).map_err(|e| match e {
        FlattenError::CyclicCfg { .. } => CliError::Data(format!("{}: {e}", a.file.display())),
        FlattenError::Invalid(r) => CliError::Data(r.render(&program)),
    })?;
    let encoding = match a.encoder {
        EncoderArg::Ownsem => Encoding::Ownsem,
        EncoderArg::Baseline => Encoding::Baseline,
    };
    let script = encode(&flat, encoding).map_err(|e| CliError::Data(e.to_string()))?;
    let text = to_smtlib(&script).map_err(|e| CliError::Data(format!("ill-sorted verification condition: {e}")))?;
    if let Some(path) = &a.emit_smt {
        write_out(path, &text)?;
    }
    let reply = solve(&text, solver)?;
    let (reads, writes) = script.count_array_ops();
    let sites = nondet_sites(&program).len();
    let (code, verdict) = match &reply.result {
        SatResult::Unsat => (0, "valid"),
        SatResult::Sat(_) => (EXIT_FAIL, "counterexample"),
        SatResult::Unknown(_) => (EXIT_UNKNOWN, "unknown"),
    };
    let replay = match &reply.result {
        SatResult::Sat(model) => {
            let oracle = model_oracle(model, sites);
            let out = m0::run(&program, oracle.clone(), RunConfig::default())?;
            Some((oracle, status_line(&out.status, &program)))
        }
        _ => None,
    };
    if json {
        let v = json!({
            "encoder": encoding.name(),
            "result": reply.result.name(),
            "verdict": verdict,
            "array_reads": reads,
            "array_writes": writes,
            "model": match &reply.result { SatResult::Sat(m) => json!(m), _ => json!(null) },
            "oracle": replay.as_ref().map(|(o, _)| o.values.clone()),
            "replay": replay.as_ref().map(|(_, s)| s.clone()),
            "wall_ms": reply.stats.wall_ms,
            "solver_stats": reply.stats.counters,
        });
        println!("{v:#}");
    } else {
        println!("{}: {verdict} ({}, {} array reads, {} array writes)", a.file.display(), encoding.name(), reads, writes);
        if let SatResult::Unknown(why) = &reply.result {
            println!("solver: {why}");
        }
        if let SatResult::Sat(model) = &reply.result {
            for (name, value) in model {
                println!("  {name} = {value}");
            }
        }
        if let Some((oracle, status)) = &replay {
            let vals: Vec<String> = oracle.values.iter().map(u64::to_string).collect();
            println!("oracle: {}", vals.join(","));
            println!("replay on m0: {status}");
        }
    }
    Ok(code)
}

fn print_finding(f: &Finding, label: &str) {
    println!("{label}: {}", f.summary);
    println!("reproducer ({} instructions):", f.reproducer_instrs);
    print!("{}", f.reproducer);
}

fn cmd_diff(a: &DiffArgs, solver: &SolverConfig, json: bool) -> Result<u8, CliError> {
    let mut check = CheckConfig { solver: solver.clone(), ..CheckConfig::default() };
    if a.inject_fault.is_some() {
        check.m1 = M1Config { fault: Some(Fault::SkipStoreCacheSync), ..M1Config::default() };
    }
    if let Some(file) = &a.file {
        let program = load(file)?;
        let failure = check_program(&program, &check, a.full);
        let finding = failure.map(|failure| {
            let small = reproducer(&program, &failure, &check);
            Finding {
                seed: 0,
                summary: failure.summary(),
                failure,
                reproducer: print(&small),
                reproducer_instrs: small.instr_count(),
            }
        });
        if json {
            println!("{:#}", json!({ "file": file.display().to_string(), "finding": finding }));
        } else {
            match &finding {
                None => println!("{}: no divergence", file.display()),
                Some(f) => print_finding(f, &file.display().to_string()),
            }
        }
        return Ok(if finding.is_some() { EXIT_FAIL } else { 0 });
    }
    let corpus = a.corpus.as_deref().unwrap_or_default();
    let [start, count] = corpus else {
        return Err(CliError::Usage("--corpus takes SEED,COUNT".into()));
    };
    let opts = CorpusOptions {
        level: a.level.map(|l| match l {
            LevelArg::M1 => Level::M1,
            LevelArg::M2 => Level::M2,
        }),
        width: a.width,
        full: a.full,
        check,
        ..CorpusOptions::default()
    };
    let report = run_corpus(*start, *count, &opts);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for f in report.findings.iter().take(opts.shrink_limit) {
            print_finding(f, &format!("seed {}", f.seed));
        }
        println!("{} programs checked, {} with findings", report.checked, report.findings.len());
    }
    Ok(if report.findings.is_empty() { 0 } else { EXIT_FAIL })
}

fn cmd_bench(a: &BenchArgs, solver: &SolverConfig, json: bool) -> Result<u8, CliError> {
    if a.n.contains(&0) {
        return Err(CliError::Usage("--n values must be at least 1".into()));
    }
    let family = match a.family {
        FamilyArg::ManyBuffers => Family::ManyBuffers,
        FamilyArg::FileTypestate => Family::FileTypestate,
        FamilyArg::FileTypestateNoclose => Family::FileTypestateNoClose,
    };
    let specs: Vec<BenchSpec> = a
        .n
        .iter()
        .flat_map(|&n| {
            a.modes.iter().map(move |m| BenchSpec {
                family,
                n,
                mode: match m {
                    ModeArg::Ownsem => Mode::Ownsem,
                    ModeArg::BaselineShadow => Mode::BaselineShadow,
                    ModeArg::BaselineMain => Mode::BaselineMain,
                },
            })
        })
        .collect();
    let report = run_bench(&specs, a.reps, solver);
    let text = report.to_json();
    if let Some(out) = &a.out {
        write_out(out, &text)?;
    }
    if json {
        println!("{text}");
    } else {
        println!("{:<24} {:>3} {:<16} {:<8} {:>6} {:>6} {:>10}", "spec", "n", "mode", "verdict", "reads", "writes", "ms");
        for r in &report.records {
            println!(
                "{:<24} {:>3} {:<16} {:<8} {:>6} {:>6} {:>10.1}",
                r.spec, r.n, r.mode, r.verdict, r.reads, r.writes, r.wall_ms
            );
            if let Some(e) = &r.error {
                println!("  error: {e}");
            }
        }
        for s in &report.speedups {
            println!("speedup {} n={} over {}: {:.2}x", s.spec, s.n, s.baseline, s.speedup);
        }
        let (lo, hi) = report.reference_speedup;
        println!("reference speedup range: {lo}x to {hi}x");
        for note in &report.notes {
            println!("note: {note}");
        }
    }
    Ok(if report.agree() { 0 } else { EXIT_FAIL })
}
