#![no_main]

use irqbench::timing::TimingModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = TimingModel::from_config_str(text) {
        model.validate().expect("parsed models are valid");
        let back = TimingModel::from_config_str(&model.to_config_string()).expect("round trip");
        assert_eq!(back, model);
    }
});
