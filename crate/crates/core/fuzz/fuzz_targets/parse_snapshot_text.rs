#![no_main]

use libfuzzer_sys::fuzz_target;
use radial_blowup::experiments::output::parse_snapshot_text;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(snap) = parse_snapshot_text(text) {
            let again = parse_snapshot_text(&snap.encode_text()).expect("encoded snapshot parses");
            assert_eq!(again.values.len(), snap.values.len());
        }
    }
});
