#![no_main]

use irqbench::units::{parse_duration, parse_seeds};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_duration(text);
    if let Ok(seeds) = parse_seeds(text) {
        assert!(!seeds.is_empty());
    }
});
