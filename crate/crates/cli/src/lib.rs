//! Experiment runner for the `pap-core` library.
//!
//! A run reads a `key = value` config, validates every key, executes one
//! experiment and writes `<outdir>/<experiment>.csv` plus
//! `<outdir>/summary.txt`. Exit codes: 0 all checks pass, 1 some check
//! fails, 2 configuration or input error (nothing written), 3 a hypothesis
//! of the theory fails (summary names it).

use std::fs;
use std::io::Write;
use std::path::Path;

pub mod config;
pub mod experiments;
pub mod report;
pub mod selftest;

use config::Config;
use experiments::{execute, validate, RunError};
use report::{hypothesis_summary, Outcome};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "PAP_EVOLVE_THREADS";

/// Sizes the global worker pool from [`THREADS_VAR`]; all cores when unset.
pub fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Validates and runs config text; returns the outcome and the exit code.
pub fn run_text(text: &str, diag: &mut dyn Write) -> (Option<Outcome>, i32) {
    let cfg = match Config::parse(text) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(diag, "config error: {e}");
            return (None, 2);
        }
    };
    let plan = match validate(&cfg) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(diag, "config error: {e}");
            return (None, 2);
        }
    };
    let name = plan.experiment.name();
    let write = |file: &str, body: &str| -> Result<(), RunError> {
        fs::create_dir_all(&plan.outdir)
            .map_err(|e| RunError::Io(format!("{}: {e}", plan.outdir.display())))?;
        let path = plan.outdir.join(file);
        fs::write(&path, body).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
    };
    match execute(&plan.experiment) {
        Ok(outcome) => {
            let written = write(&format!("{name}.csv"), &outcome.csv)
                .and_then(|_| write("summary.txt", &outcome.summary()));
            if let Err(e) = written {
                let _ = writeln!(diag, "{e}");
                return (Some(outcome), 2);
            }
            for c in outcome.checks.iter().filter(|c| !c.passed) {
                let _ = writeln!(
                    diag,
                    "FAIL {}: measured {} threshold {}",
                    c.name, c.measured, c.threshold
                );
            }
            let code = if outcome.passed() { 0 } else { 1 };
            (Some(outcome), code)
        }
        Err(e) => {
            let _ = writeln!(diag, "{e}");
            if let RunError::Hypothesis(msg) = &e {
                if let Err(w) = write("summary.txt", &hypothesis_summary(name, msg)) {
                    let _ = writeln!(diag, "{w}");
                }
            }
            (None, e.exit_code())
        }
    }
}

/// [`run_text`] on a config file.
pub fn run_path(path: &Path, diag: &mut dyn Write) -> i32 {
    match fs::read_to_string(path) {
        Ok(text) => run_text(&text, diag).1,
        Err(e) => {
            let _ = writeln!(diag, "cannot read {}: {e}", path.display());
            2
        }
    }
}
