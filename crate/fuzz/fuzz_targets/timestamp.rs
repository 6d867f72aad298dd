#![no_main]
use libfuzzer_sys::fuzz_target;
use storystream_core::io::{format_timestamp, parse_timestamp};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Some(ms) = parse_timestamp(s) {
        assert_eq!(parse_timestamp(&format_timestamp(ms)), Some(ms));
    }
});
