#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    // Vocabulary files are untrusted input; parsing must never panic.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = morphembed::corpus::Vocabulary::parse(text, Path::new("fuzz"));
    }
});
