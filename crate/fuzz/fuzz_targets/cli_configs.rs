#![no_main]

use dynamix_cli::config::{GenerateConfig, SystemsConfig, TrainFile};
use libfuzzer_sys::fuzz_target;

// One input, all three config parsers.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = GenerateConfig::parse(text);
    let _ = TrainFile::parse(text);
    let _ = SystemsConfig::parse(text);
});
