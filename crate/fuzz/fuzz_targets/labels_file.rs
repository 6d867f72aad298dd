#![no_main]
use std::collections::BTreeSet;

use libfuzzer_sys::fuzz_target;
use storystream_core::evalmetrics::{nmi, pairwise_f1, read_labels};

// A labeling scores perfectly against itself, except that pairwise F1 is 0
// when no label is shared by two articles (no pairs to agree on).
fuzz_target!(|data: &[u8]| {
    let Ok(labels) = read_labels(data) else {
        return;
    };
    if labels.is_empty() {
        return;
    }
    let distinct: BTreeSet<_> = labels.values().collect();
    let expect = if distinct.len() < labels.len() {
        1.0
    } else {
        0.0
    };
    assert_eq!(pairwise_f1(&labels, &labels).unwrap(), expect);
    let m = nmi(&labels, &labels).unwrap();
    assert!((m - 1.0).abs() <= 1e-9, "{m}");
});
