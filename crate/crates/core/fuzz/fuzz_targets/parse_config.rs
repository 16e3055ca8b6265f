#![no_main]

use libfuzzer_sys::fuzz_target;
use radial_blowup::experiments::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::parse(text) {
            let again = ScenarioConfig::parse(&cfg.to_toml()).expect("echo parses");
            assert_eq!(again, cfg);
        }
    }
});
