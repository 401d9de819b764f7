//! Acceptance checks and the `summary.txt` layout.

use pap_core::io::format_g17;

/// One acceptance check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Human-readable threshold, e.g. `<= 0.15`.
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        measured: f64,
        threshold: impl Into<String>,
        passed: bool,
    ) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold: threshold.into(),
            passed,
        }
    }

    /// `measured <= limit`.
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self::new(
            name,
            measured,
            format!("<= {}", num(limit)),
            measured <= limit,
        )
    }

    /// `|measured - target| <= tol`.
    pub fn near(name: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Self::new(
            name,
            measured,
            format!("{} +- {}", num(target), num(tol)),
            (measured - target).abs() <= tol,
        )
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: String,
    pub csv: String,
    pub checks: Vec<Check>,
    /// Extra `key=value` lines for the summary.
    pub info: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("experiment={}\n", self.experiment);
        for (k, v) in &self.info {
            s.push_str(&format!("{k}={v}\n"));
        }
        s.push_str("check\tmeasured\tthreshold\tresult\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                c.name,
                format_g17(c.measured),
                c.threshold,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        s.push_str(if self.passed() {
            "overall\tPASS\n"
        } else {
            "overall\tFAIL\n"
        });
        s
    }
}

/// Summary written when a hypothesis of the theory does not hold.
pub fn hypothesis_summary(experiment: &str, msg: &str) -> String {
    format!("experiment={experiment}\ncheck\tmeasured\tthreshold\tresult\nhypothesis\tnan\t{msg}\tFAIL\noverall\tFAIL\n")
}

/// Five decimals without trailing zeros, for summary listings.
pub fn short(x: f64) -> String {
    trim(format!("{x:.5}"))
}

/// Threshold formatting: twelve decimals, trailing zeros trimmed.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        x.to_string()
    } else if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        trim(format!("{x:.12}"))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_layout() {
        let o = Outcome {
            experiment: "demo".into(),
            csv: String::new(),
            checks: vec![
                Check::at_most("a", 0.5, 1.0),
                Check::near("b", 1.3, 1.25, 0.01),
            ],
            info: vec![("gamma".into(), short(1.0 / 6.0))],
        };
        assert_eq!(
            o.summary(),
            "experiment=demo\ngamma=0.16667\ncheck\tmeasured\tthreshold\tresult\n\
             a\t0.5\t<= 1\tPASS\nb\t1.3\t1.25 +- 0.01\tFAIL\noverall\tFAIL\n"
        );
        assert_eq!(short(1.25), "1.25");
        assert_eq!(short(3.0), "3");
    }
}
