#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(tokens) = morphembed::corpus::corpus_tokens_from_str(text) {
            for t in &tokens {
                // normalization is idempotent on its own output
                assert_eq!(morphembed::corpus::normalize_token(t).unwrap(), *t);
            }
        }
    }
});
