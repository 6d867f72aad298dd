//! Pairwise F1 and NMI between a predicted and a gold labeling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("labelings cover different ids (only in prediction: {only_pred:?}; only in gold: {only_gold:?})")]
    IdSetMismatch {
        only_pred: Vec<String>,
        only_gold: Vec<String>,
    },
    #[error("labeling is empty")]
    Empty,
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Article id to cluster label.
pub type Labeling = BTreeMap<String, String>;

#[derive(Deserialize)]
struct LabelRecord {
    id: String,
    label: String,
}

/// Parses `{"id": ..., "label": ...}` JSON Lines. Extra fields are ignored
/// and blank lines skipped.
pub fn read_labels<R: BufRead>(reader: R) -> Result<Labeling, EvalError> {
    let mut out = Labeling::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EvalError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if out.contains_key(&rec.id) {
            return Err(EvalError::DuplicateId {
                id: rec.id,
                line: line_no,
            });
        }
        out.insert(rec.id, rec.label);
    }
    Ok(out)
}

/// Counts of co-occurring labels, after checking both labelings cover the
/// same non-empty id set.
struct Contingency {
    n: u64,
    joint: BTreeMap<(usize, usize), u64>,
    pred: BTreeMap<usize, u64>,
    gold: BTreeMap<usize, u64>,
}

fn contingency(pred: &Labeling, gold: &Labeling) -> Result<Contingency, EvalError> {
    let only_pred: Vec<String> = pred
        .keys()
        .filter(|k| !gold.contains_key(*k))
        .cloned()
        .collect();
    let only_gold: Vec<String> = gold
        .keys()
        .filter(|k| !pred.contains_key(*k))
        .cloned()
        .collect();
    if !only_pred.is_empty() || !only_gold.is_empty() {
        return Err(EvalError::IdSetMismatch {
            only_pred,
            only_gold,
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let intern = |l: &Labeling| -> BTreeMap<String, usize> {
        let labels: BTreeSet<&String> = l.values().collect();
        labels
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect()
    };
    let (pi, gi) = (intern(pred), intern(gold));
    let mut c = Contingency {
        n: 0,
        joint: BTreeMap::new(),
        pred: BTreeMap::new(),
        gold: BTreeMap::new(),
    };
    for (id, pl) in pred {
        let (p, g) = (pi[pl], gi[&gold[id]]);
        c.n += 1;
        *c.joint.entry((p, g)).or_default() += 1;
        *c.pred.entry(p).or_default() += 1;
        *c.gold.entry(g).or_default() += 1;
    }
    Ok(c)
}

fn pairs(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Pair-counting F1: precision and recall over unordered article pairs
/// placed together. Any 0/0 ratio counts as 0.
pub fn pairwise_f1(pred: &Labeling, gold: &Labeling) -> Result<f64, EvalError> {
    let c = contingency(pred, gold)?;
    let tp: u64 = c.joint.values().map(|&k| pairs(k)).sum();
    let pred_pairs: u64 = c.pred.values().map(|&k| pairs(k)).sum();
    let gold_pairs: u64 = c.gold.values().map(|&k| pairs(k)).sum();
    // 2PR / (P + R) reduces to 2TP / (pred_pairs + gold_pairs); one rounding
    // keeps the result exact for exact inputs. Zero pairs on either side
    // forces TP = 0, which matches the 0/0 -> 0 convention.
    if tp == 0 {
        return Ok(0.0);
    }
    Ok((2 * tp) as f64 / (pred_pairs + gold_pairs) as f64)
}

/// Normalized mutual information, `I / ((H_pred + H_gold) / 2)` with natural
/// logs. Two single-cluster labelings score 1; exactly one single-cluster
/// labeling scores 0.
pub fn nmi(pred: &Labeling, gold: &Labeling) -> Result<f64, EvalError> {
    let c = contingency(pred, gold)?;
    let n = c.n as f64;
    let entropy = |counts: &BTreeMap<usize, u64>| {
        -counts
            .values()
            .map(|&k| {
                let p = k as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let (hp, hg) = (entropy(&c.pred), entropy(&c.gold));
    // single-cluster labelings have entropy exactly 0 (p = 1, ln 1 = 0)
    match (hp == 0.0, hg == 0.0) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mi: f64 = c
        .joint
        .iter()
        .map(|(&(p, g), &k)| {
            let k = k as f64;
            k / n * (k * n / (c.pred[&p] as f64 * c.gold[&g] as f64)).ln()
        })
        .sum();
    Ok((mi / ((hp + hg) / 2.0)).clamp(0.0, 1.0))
}

/// Summary written by the `eval` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f1: f64,
    pub nmi: f64,
    pub n_articles: usize,
    pub n_pred_stories: usize,
    pub n_gold_stories: usize,
    pub f1_variant: String,
    pub nmi_normalization: String,
}

pub fn evaluate(pred: &Labeling, gold: &Labeling) -> Result<EvalReport, EvalError> {
    let distinct = |l: &Labeling| l.values().collect::<BTreeSet<_>>().len();
    Ok(EvalReport {
        f1: pairwise_f1(pred, gold)?,
        nmi: nmi(pred, gold)?,
        n_articles: pred.len(),
        n_pred_stories: distinct(pred),
        n_gold_stories: distinct(gold),
        f1_variant: "pairwise".into(),
        nmi_normalization: "arithmetic".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(pairs: &[(&str, &str)]) -> Labeling {
        pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn identical_labelings_score_one() {
        let l = lab(&[("a", "x"), ("b", "x"), ("c", "y")]);
        assert_eq!(pairwise_f1(&l, &l).unwrap(), 1.0);
        assert!((nmi(&l, &l).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn singletons_against_one_cluster() {
        let pred = lab(&[("a", "1"), ("b", "2"), ("c", "3")]);
        let gold = lab(&[("a", "g"), ("b", "g"), ("c", "g")]);
        assert_eq!(pairwise_f1(&pred, &gold).unwrap(), 0.0);
        assert_eq!(nmi(&pred, &gold).unwrap(), 0.0);
    }

    #[test]
    fn worked_five_article_example() {
        // gold {a,b,c},{d,e}; pred {a,b},{c,d,e}: TP = ab, de; P = R = 2/4
        let gold = lab(&[
            ("a", "G1"),
            ("b", "G1"),
            ("c", "G1"),
            ("d", "G2"),
            ("e", "G2"),
        ]);
        let pred = lab(&[
            ("a", "P1"),
            ("b", "P1"),
            ("c", "P2"),
            ("d", "P2"),
            ("e", "P2"),
        ]);
        assert!((pairwise_f1(&pred, &gold).unwrap() - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn crossed_two_by_two_has_zero_nmi() {
        let gold = lab(&[("a", "1"), ("b", "1"), ("c", "2"), ("d", "2")]);
        let pred = lab(&[("a", "x"), ("c", "x"), ("b", "y"), ("d", "y")]);
        assert!(nmi(&pred, &gold).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn renamed_labels_score_one() {
        let gold = lab(&[("a", "1"), ("b", "1"), ("c", "2"), ("d", "3")]);
        let pred = lab(&[("a", "q"), ("b", "q"), ("c", "r"), ("d", "s")]);
        assert!((nmi(&pred, &gold).unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(pairwise_f1(&pred, &gold).unwrap(), 1.0);
    }

    #[test]
    fn both_single_cluster_nmi_is_one() {
        let l = lab(&[("a", "1"), ("b", "1")]);
        assert_eq!(nmi(&l, &l).unwrap(), 1.0);
    }

    #[test]
    fn mismatch_lists_offending_ids() {
        let pred = lab(&[("a", "1"), ("b", "1")]);
        let gold = lab(&[("a", "1"), ("c", "1")]);
        assert_eq!(
            pairwise_f1(&pred, &gold),
            Err(EvalError::IdSetMismatch {
                only_pred: vec!["b".into()],
                only_gold: vec!["c".into()],
            })
        );
    }

    #[test]
    fn reads_label_file() {
        let data = "{\"id\":\"a\",\"label\":\"x\",\"story\":3}\n\n{\"id\":\"b\",\"label\":\"y\"}\n";
        let l = read_labels(data.as_bytes()).unwrap();
        assert_eq!(l.len(), 2);
        let dup = "{\"id\":\"a\",\"label\":\"x\"}\n{\"id\":\"a\",\"label\":\"y\"}\n";
        assert!(matches!(
            read_labels(dup.as_bytes()),
            Err(EvalError::DuplicateId { line: 2, .. })
        ));
    }
}
