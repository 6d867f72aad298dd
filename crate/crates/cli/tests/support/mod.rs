//! Helpers shared by the CLI integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use storystream_core::io::format_timestamp;

pub const DAY_MS: i64 = 86_400_000;
/// 2016-07-01T00:00:00Z
pub const BASE_MS: i64 = 1_467_331_200_000;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_storystream")
}

pub fn storystream(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn storystream")
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini-corpus")
}

pub fn run_cli(config: &Path, input: &Path, out: &Path) -> Output {
    storystream(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

pub struct SyntheticArticle {
    pub id: String,
    pub timestamp: i64,
    pub story: usize,
    pub vector: Vec<f64>,
}

/// Active day ranges `[from, to)` of the four planted stories. Story 1
/// pauses for 30 days.
pub const SCHEDULE: [&[(i64, i64)]; 4] =
    [&[(0, 60)], &[(0, 15), (45, 60)], &[(10, 40)], &[(25, 60)]];

pub const DIM: usize = 64;

/// 400 articles, 100 per story, with vectors drawn around near-orthogonal
/// story centers. Sorted by time.
pub fn synthetic_stream(seed: u64) -> Vec<SyntheticArticle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.04).unwrap();
    // unit axis plus a shared component: center cosines are 0.0625 / 1.0625
    let centers: Vec<Vec<f64>> = (0..4)
        .map(|k| {
            let mut c = vec![0.0; DIM];
            c[k] = 1.0;
            c[DIM - 1] = 0.25;
            c
        })
        .collect();
    let mut out = Vec::new();
    for (story, ranges) in SCHEDULE.iter().enumerate() {
        let total_days: i64 = ranges.iter().map(|(a, b)| b - a).sum();
        for _ in 0..100 {
            let mut offset = rng.gen_range(0..total_days * DAY_MS);
            let mut ts = 0;
            for &(a, b) in ranges.iter() {
                let len = (b - a) * DAY_MS;
                if offset < len {
                    ts = BASE_MS + a * DAY_MS + offset;
                    break;
                }
                offset -= len;
            }
            let vector = centers[story]
                .iter()
                .map(|c| c + noise.sample(&mut rng))
                .collect();
            out.push(SyntheticArticle {
                id: String::new(),
                timestamp: ts,
                story,
                vector,
            });
        }
    }
    // shuffle before the stable sort so equal timestamps do not group by story
    out.shuffle(&mut rng);
    out.sort_by_key(|a| a.timestamp);
    for (i, a) in out.iter_mut().enumerate() {
        a.id = format!("s{i:03}");
    }
    out
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Smallest same-story cosine and largest cross-story cosine.
pub fn cosine_bounds(articles: &[SyntheticArticle]) -> (f64, f64) {
    let (mut min_intra, mut max_inter) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, a) in articles.iter().enumerate() {
        for b in &articles[i + 1..] {
            let c = cosine(&a.vector, &b.vector);
            if a.story == b.story {
                min_intra = min_intra.min(c);
            } else {
                max_inter = max_inter.max(c);
            }
        }
    }
    (min_intra, max_inter)
}

/// Writes the stream as inline-vector JSON Lines plus matching gold labels.
pub fn write_stream(articles: &[SyntheticArticle], dir: &Path) -> (PathBuf, PathBuf) {
    let mut input = String::new();
    let mut gold = String::new();
    for a in articles {
        let rec = serde_json::json!({ "id": a.id, "timestamp": format_timestamp(a.timestamp), "vector": a.vector });
        input.push_str(&rec.to_string());
        input.push('\n');
        let rec = serde_json::json!({ "id": a.id, "label": format!("story-{}", a.story) });
        gold.push_str(&rec.to_string());
        gold.push('\n');
    }
    let (ip, gp) = (dir.join("stream.jsonl"), dir.join("gold.jsonl"));
    std::fs::write(&ip, input).unwrap();
    std::fs::write(&gp, gold).unwrap();
    (ip, gp)
}

pub fn write_config(dir: &Path, json: &serde_json::Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(json).unwrap()).unwrap();
    p
}

pub fn inline_config(span_days: i64, interval_days: i64) -> serde_json::Value {
    serde_json::json!({
        "vectors": { "kind": "inline", "dimension": DIM },
        "window": { "unit": "days", "span": span_days, "interval": interval_days }
    })
}

/// Every file under `dir`, by relative path, with its bytes.
pub fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn snapshot_files(out: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(out.join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}
