#![no_main]

use dynamix_core::training::TrainConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = TrainConfig::from_toml_str(text) {
        let back = TrainConfig::from_toml_str(&config.to_toml_string()).expect("serialized config parses");
        assert_eq!(back.hash(), config.hash());
    }
});
