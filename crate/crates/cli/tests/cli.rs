use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pap-evolve");

fn run_config(dir: &Path, body: &str) -> Output {
    let path = dir.join("run.conf");
    fs::write(&path, body).unwrap();
    Command::new(BIN)
        .arg("run")
        .arg(&path)
        .env("PAP_EVOLVE_THREADS", "1")
        .output()
        .unwrap()
}

#[test]
fn passing_run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_config(
        dir.path(),
        &format!(
            "experiment = exponents\noutdir = {}\nd = 3\nm = 4\nr = 9\n",
            out.display()
        ),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(out.join("exponents.csv")).unwrap();
    assert!(csv.starts_with("key,value\n"));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.ends_with("overall\tPASS\n"));
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // sin t + sin(sqrt2 t) has no 0.2-almost period within every window of length 1
    let body = format!(
        "experiment = pap-test\noutdir = {}\nepsilon = 0.2\nl_max = 1\nsteps = 800\n",
        out.display()
    );
    let o = run_config(dir.path(), &body);
    assert_eq!(o.status.code(), Some(1));
    assert!(fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .ends_with("overall\tFAIL\n"));
}

#[test]
fn config_errors_exit_two_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        format!(
            "experiment = exponents\noutdir = {}\nd = 3\nm = 4\n",
            out.display()
        ),
        format!(
            "experiment = exponents\noutdir = {}\nd = 3\nm = 4\nr = 9\ncolour = red\n",
            out.display()
        ),
        format!(
            "experiment = exponents\noutdir = {}\nd = 3\nd = 3\nm = 4\nr = 9\n",
            out.display()
        ),
        format!("experiment = nonsense\noutdir = {}\n", out.display()),
        "not a config line\n".to_string(),
    ];
    for body in &cases {
        let o = run_config(dir.path(), body);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
        assert!(!out.exists(), "{body}");
    }
    let o = Command::new(BIN)
        .args(["run", "/nonexistent/run.conf"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn violated_hypothesis_exits_three_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        "experiment = picard\noutdir = {}\nd = 3\nm = 4\nr = 9\nn = 8\nhalf_width = 4\nb = 1\n\
         H = 2\ndt = 0.25\nt_min = 0\nt_max = 2\nrho = 50\n",
        out.display()
    );
    let o = run_config(dir.path(), &body);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("L̃C < 0.9"), "{summary}");
    assert!(!out.join("picard.csv").exists());
}

#[test]
fn stability_rejects_subcritical_r() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        "experiment = stability\noutdir = {}\nd = 3\nm = 4\nr = 4\nn = 8\nhalf_width = 4\nb = 1\nH = 2\ndt = 0.25\nreference = zero\n",
        out.display()
    );
    let o = run_config(dir.path(), &body);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn selftest_passes() {
    let o = Command::new(BIN).arg("selftest").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(
        text.starts_with("experiment=selftest\n") && text.ends_with("overall\tPASS\n"),
        "{text}"
    );
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(BIN)
        .arg("selftest")
        .env("PAP_EVOLVE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PAP_EVOLVE_THREADS"));
}

#[test]
fn config_seeds_parse_or_fail_cleanly() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/parse_config");
    let mut valid = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        if let Ok(cfg) = pap_evolve::config::Config::parse(&text) {
            valid += usize::from(pap_evolve::experiments::validate(&cfg).is_ok());
        }
    }
    // every shipped config is a seed and must validate
    assert!(
        valid
            >= fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs"))
                .unwrap()
                .count()
    );
}
