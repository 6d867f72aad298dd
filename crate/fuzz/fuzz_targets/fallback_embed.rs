#![no_main]
use libfuzzer_sys::fuzz_target;
use storystream_core::embedding::embed_fallback;

// The first two bytes pick the dimension, the rest is the text.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let dim = usize::from(u16::from_le_bytes([data[0], data[1]]) % 1024);
    let text = String::from_utf8_lossy(&data[2..]);
    if let Ok(v) = embed_fallback(&text, dim, 7) {
        assert_eq!(v.dim(), dim);
        assert!((v.norm() - 1.0).abs() <= 1e-9);
    }
});
