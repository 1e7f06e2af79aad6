#![no_main]

use irqbench::scenarios::{ScenarioId, DEFAULT_BLMAX_T6_CORES};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(id) = text.parse::<ScenarioId>() {
        if let Ok(config) = id.resolve(DEFAULT_BLMAX_T6_CORES) {
            config.validate().expect("resolved scenarios are valid");
        }
    }
});
