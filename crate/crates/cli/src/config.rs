//! `ownir.toml` loading. Precedence: built-in defaults, then the file, then
//! `OWNIR_SOLVER`, then command-line flags.

use std::path::Path;
use std::time::Duration;

use ownir::smt::SolverConfig;

use crate::CliError;

pub const DEFAULT_CONFIG: &str = "ownir.toml";

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {msg}", path.display()))
}

/// Solver settings from `path`. Only the `[solver]` table is recognized.
pub fn load(path: &Path) -> Result<SolverConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(path.display().to_string(), e))?;
    from_str(&text).map_err(|e| bad(path, e))
}

pub fn from_str(text: &str) -> Result<SolverConfig, String> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
    let mut cfg = SolverConfig::default();
    for (key, value) in &table {
        if key != "solver" {
            return Err(format!("unknown section `{key}`"));
        }
        let solver = value.as_table().ok_or("`solver` must be a table")?;
        for (k, v) in solver {
            match k.as_str() {
                "cmd" => cfg.cmd = v.as_str().ok_or("solver.cmd must be a string")?.to_string(),
                "args" => {
                    let items = v.as_array().ok_or("solver.args must be an array of strings")?;
                    cfg.args = items
                        .iter()
                        .map(|a| a.as_str().map(str::to_string).ok_or("solver.args must be an array of strings"))
                        .collect::<Result<_, _>>()?;
                }
                "timeout_secs" => {
                    let secs = v.as_integer().filter(|s| *s > 0).ok_or("solver.timeout_secs must be a positive integer")?;
                    cfg.timeout = Duration::from_secs(secs as u64);
                }
                other => return Err(format!("unknown key `solver.{other}`")),
            }
        }
    }
    Ok(cfg)
}

/// Resolves the solver configuration for this invocation.
pub fn solver(config: Option<&Path>, cmd: Option<&str>, timeout_secs: Option<u64>) -> Result<SolverConfig, CliError> {
    let mut cfg = match config {
        Some(p) => load(p)?,
        None if Path::new(DEFAULT_CONFIG).exists() => load(Path::new(DEFAULT_CONFIG))?,
        None => SolverConfig::default(),
    };
    if let Ok(env) = std::env::var("OWNIR_SOLVER") {
        if !env.trim().is_empty() {
            cfg.cmd = env.trim().to_string();
        }
    }
    if let Some(c) = cmd {
        cfg.cmd = c.to_string();
    }
    if let Some(t) = timeout_secs {
        cfg.timeout = Duration::from_secs(t);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_solver_table() {
        let c = from_str("[solver]\ncmd = \"cvc5\"\nargs = [\"--lang\", \"smt2\"]\ntimeout_secs = 7\n").unwrap();
        assert_eq!(c.cmd, "cvc5");
        assert_eq!(c.args, vec!["--lang", "smt2"]);
        assert_eq!(c.timeout, Duration::from_secs(7));
    }

    #[test]
    fn empty_file_keeps_defaults() {
        assert_eq!(from_str("").unwrap(), SolverConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_types() {
        assert!(from_str("[solver]\nbinary = \"z3\"\n").is_err());
        assert!(from_str("[other]\n").is_err());
        assert!(from_str("[solver]\ntimeout_secs = \"ten\"\n").is_err());
        assert!(from_str("[solver]\nargs = [1]\n").is_err());
    }
}
