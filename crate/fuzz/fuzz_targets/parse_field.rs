#![no_main]

use libfuzzer_sys::fuzz_target;
use pap_core::io::{read_field, write_field};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = read_field(text) {
        let again = read_field(&write_field(&f)).expect("written fields parse");
        assert_eq!(again.values(), f.values());
    }
});
