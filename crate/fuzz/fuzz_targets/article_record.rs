#![no_main]
use libfuzzer_sys::fuzz_target;
use storystream_core::io::ArticleReader;

fuzz_target!(|data: &[u8]| {
    let mut last = 0;
    for a in ArticleReader::new(data).flatten() {
        assert!(!a.id.is_empty());
        assert!(a.line > last);
        last = a.line;
    }
});
