use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::sexp::{parse_all, Sexp};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(100);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub cmd: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cmd: "z3".into(),
            args: vec!["-in".into(), "-smt2".into(), "-st".into()],
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl SolverConfig {
    /// Defaults, with the command taken from `OWNIR_SOLVER` when set.
    pub fn from_env() -> SolverConfig {
        let mut c = SolverConfig::default();
        if let Ok(cmd) = std::env::var("OWNIR_SOLVER") {
            if !cmd.trim().is_empty() {
                c.cmd = cmd.trim().to_string();
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ModelValue {
    Bv { value: u64, width: u32 },
    Bool(bool),
    /// Anything else (arrays, functions) as raw text.
    Other(String),
}

impl std::fmt::Display for ModelValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelValue::Bv { value, .. } => write!(f, "{value}"),
            ModelValue::Bool(b) => write!(f, "{b}"),
            ModelValue::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SatResult {
    Sat(BTreeMap<String, ModelValue>),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn name(&self) -> &'static str {
        match self {
            SatResult::Sat(_) => "sat",
            SatResult::Unsat => "unsat",
            SatResult::Unknown(_) => "unknown",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub wall_ms: f64,
    /// Numeric statistics the solver reported (e.g. `conflicts`), if any.
    pub counters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReply {
    pub result: SatResult,
    pub stats: SolverStats,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("could not start solver `{cmd}`: {source}")]
    Spawn { cmd: String, source: std::io::Error },
    #[error("solver exited with {code:?} without a status line: {output}")]
    SolverCrash { code: Option<i32>, output: String },
    #[error("solver did not answer within {0:?}")]
    Timeout(Duration),
    #[error("i/o with solver failed: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_value(v: &Sexp) -> ModelValue {
    match v {
        Sexp::Atom(a) if a == "true" => ModelValue::Bool(true),
        Sexp::Atom(a) if a == "false" => ModelValue::Bool(false),
        Sexp::Atom(a) if a.starts_with("#x") => match u64::from_str_radix(&a[2..], 16) {
            Ok(value) => ModelValue::Bv { value, width: 4 * (a.len() as u32 - 2) },
            Err(_) => ModelValue::Other(a.clone()),
        },
        Sexp::Atom(a) if a.starts_with("#b") => match u64::from_str_radix(&a[2..], 2) {
            Ok(value) => ModelValue::Bv { value, width: a.len() as u32 - 2 },
            Err(_) => ModelValue::Other(a.clone()),
        },
        Sexp::List(items) => {
            // (_ bvN W)
            if let [Sexp::Atom(u), Sexp::Atom(n), Sexp::Atom(w)] = items.as_slice() {
                if u == "_" && n.starts_with("bv") {
                    if let (Ok(value), Ok(width)) = (n[2..].parse(), w.parse()) {
                        return ModelValue::Bv { value, width };
                    }
                }
            }
            ModelValue::Other(v.to_string())
        }
        Sexp::Atom(a) => ModelValue::Other(a.clone()),
    }
}

fn collect_defines(e: &Sexp, out: &mut BTreeMap<String, ModelValue>) {
    let Some(items) = e.list() else { return };
    if let [Sexp::Atom(head), Sexp::Atom(name), Sexp::List(params), _sort, value] = items {
        if head == "define-fun" && params.is_empty() {
            out.insert(name.trim_matches('|').to_string(), parse_value(value));
            return;
        }
    }
    for it in items {
        collect_defines(it, out);
    }
}

/// Extracts constant definitions from a `(get-model)` response.
pub fn parse_model(text: &str) -> BTreeMap<String, ModelValue> {
    let mut out = BTreeMap::new();
    if let Ok(exprs) = parse_all(text) {
        for e in &exprs {
            collect_defines(e, &mut out);
        }
    }
    out
}

fn parse_stats(exprs: &[Sexp]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for e in exprs {
        let Some(items) = e.list() else { continue };
        if !items.first().and_then(Sexp::atom).is_some_and(|a| a.starts_with(':')) {
            continue;
        }
        for pair in items.chunks(2) {
            if let [Sexp::Atom(k), Sexp::Atom(v)] = pair {
                if let (Some(key), Ok(val)) = (k.strip_prefix(':'), v.parse::<f64>()) {
                    out.insert(key.to_string(), val);
                }
            }
        }
    }
    out
}

/// Runs the solver on `text` and parses its answer.
pub fn solve(text: &str, config: &SolverConfig) -> Result<SolverReply, SolveError> {
    let start = Instant::now();
    let mut child = Command::new(&config.cmd)
        .args(&config.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SolveError::Spawn { cmd: config.cmd.clone(), source })?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = text.to_string();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let mut stderr = child.stderr.take().expect("piped stderr");
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break st;
        }
        if start.elapsed() > config.timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SolveError::Timeout(config.timeout));
        }
        std::thread::sleep(Duration::from_millis(2));
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;

    let first = out.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let exprs = parse_all(&out).unwrap_or_default();
    let result = match first {
        "sat" => SatResult::Sat(parse_model(&out)),
        "unsat" => SatResult::Unsat,
        "unknown" => {
            let reason = exprs
                .iter()
                .find_map(|e| match e.list() {
                    Some([Sexp::Atom(k), v]) if k == ":reason-unknown" => Some(v.to_string()),
                    _ => None,
                })
                .unwrap_or_else(|| "unknown".into());
            SatResult::Unknown(reason)
        }
        _ => {
            return Err(SolveError::SolverCrash {
                code: status.code(),
                output: format!("{out}{err}").trim().to_string(),
            })
        }
    };
    Ok(SolverReply { result, stats: SolverStats { wall_ms, counters: parse_stats(&exprs) } })
}
