#![no_main]

use libfuzzer_sys::fuzz_target;
use radial_blowup::experiments::output::parse_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = parse_manifest(text) {
            assert!(m.files.iter().all(|f| !f.path.starts_with('/')));
        }
    }
});
