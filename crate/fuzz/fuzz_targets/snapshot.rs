#![no_main]
use libfuzzer_sys::fuzz_target;
use storystream_core::snapshot::Snapshot;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(snap) = Snapshot::from_json(text) else {
        return;
    };
    let dot = snap.to_dot();
    assert!(dot.starts_with("graph stories {\n") && dot.ends_with("}\n"));
    let again = Snapshot::from_json(&snap.to_json()).expect("re-parse");
    assert_eq!(again.to_dot(), dot);
});
