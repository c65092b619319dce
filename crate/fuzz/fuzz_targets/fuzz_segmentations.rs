#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // first byte toggles the permissive flag, the rest is the file body
    let permissive = data.first().map(|b| b & 1 == 1).unwrap_or(false);
    let vocab = morphembed::corpus::build_vocab(&["walked", "walking", "cat", "a"], 100).unwrap();
    let _ = morphembed::segment::parse_segmentations(text, &vocab, permissive, Path::new("fuzz"));
});
