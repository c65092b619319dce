#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // the binary checkpoint decoder must reject arbitrary bytes gracefully
    let _ = morphembed::model::Checkpoint::from_bytes(data);
});
