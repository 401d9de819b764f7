#![no_main]

use libfuzzer_sys::fuzz_target;
use pap_core::io::{read_trajectory, write_trajectory};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = read_trajectory(text) {
        let again = read_trajectory(&write_trajectory(&f)).expect("written trajectories parse");
        assert_eq!(again.data(), f.data());
    }
});
