#![no_main]

use libfuzzer_sys::fuzz_target;
use radial_blowup::experiments::output::decode_snapshot_binary;

// input: header text, a NUL byte, then the payload
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let (header, payload) = data.split_at(split);
    let payload = payload.get(1..).unwrap_or(&[]);
    if let Ok(header) = std::str::from_utf8(header) {
        let _ = decode_snapshot_binary(header, payload);
    }
});
