//! Replays the checked-in fuzz seeds through the same checks as the fuzz targets.

use std::fs;
use std::path::Path;

use pap_core::io::{read_field, read_trajectory, write_field, write_trajectory};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn trajectory_seeds_round_trip() {
    let mut parsed = 0;
    for (name, text) in seeds("parse_trajectory") {
        if let Ok(f) = read_trajectory(&text) {
            let again =
                read_trajectory(&write_trajectory(&f)).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(again.data(), f.data(), "{name}");
            parsed += 1;
        }
    }
    assert!(parsed >= 2);
}

#[test]
fn field_seeds_round_trip() {
    let mut parsed = 0;
    for (name, text) in seeds("parse_field") {
        if let Ok(f) = read_field(&text) {
            let again = read_field(&write_field(&f)).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(again.values(), f.values(), "{name}");
            parsed += 1;
        }
    }
    assert!(parsed >= 1);
}
