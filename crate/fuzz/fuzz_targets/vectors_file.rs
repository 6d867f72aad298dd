#![no_main]
use libfuzzer_sys::fuzz_target;
use storystream_core::embedding::{read_vectors, usable_norm};

fuzz_target!(|data: &[u8]| {
    if let Ok(vectors) = read_vectors(data, 4) {
        for v in vectors.values() {
            assert_eq!(v.dim(), 4);
            assert!(usable_norm(v));
        }
    }
});
