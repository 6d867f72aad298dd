#![no_main]
use libfuzzer_sys::fuzz_target;
use storystream_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            RunConfig::from_json(&echoed).expect("echoed config parses"),
            cfg
        );
        let w = cfg.window_config();
        assert!(w.interval_ms > 0 && w.interval_ms <= w.span_ms);
    }
});
