#![no_main]

use libfuzzer_sys::fuzz_target;
use pap_evolve::config::Config;
use pap_evolve::experiments::validate;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::parse(text) {
        // validation only; experiments are never executed here
        let _ = validate(&cfg);
    }
});
