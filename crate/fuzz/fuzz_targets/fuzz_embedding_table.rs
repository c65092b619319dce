#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = morphembed::table::EmbeddingTable::parse(text, Path::new("fuzz")) {
            // a parsed table must be internally consistent
            assert_eq!(table.words().len(), table.matrix().rows());
        }
    }
});
