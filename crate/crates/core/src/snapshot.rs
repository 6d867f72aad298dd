//! Serializable views of the story network and their DOT rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::io::parse_timestamp;
use crate::storynet::{ArticleId, MergeEvent, StoryId};
use crate::window::ClusterCause;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot parse snapshot: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported snapshot schema {0}")]
    Schema(u32),
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorySummary {
    pub id: StoryId,
    pub created: String,
    pub last_active: String,
    pub member_count: usize,
    pub members: Vec<ArticleId>,
}

/// A topic from the latest clustering and the story it ended up in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub members: Vec<ArticleId>,
    pub story: Option<StoryId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryEdge {
    pub source: StoryId,
    pub target: StoryId,
    pub weight: f64,
}

/// Window activity, with topic payloads reduced to counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WindowLogEntry {
    TopicsEmitted {
        at: String,
        cause: ClusterCause,
        topic_count: usize,
    },
    TemporaryAssignment {
        at: String,
        article: ArticleId,
        community: u64,
    },
    WindowSlid {
        at: String,
        new_start: String,
        evicted: Vec<ArticleId>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema: u32,
    pub sequence: u64,
    pub timestamp: String,
    #[serde(rename = "final")]
    pub is_final: bool,
    pub stories: Vec<StorySummary>,
    pub topics: Vec<TopicSummary>,
    pub edges: Vec<StoryEdge>,
    pub merge_events: Vec<MergeEvent>,
    pub window_events: Vec<WindowLogEntry>,
    pub config: RunConfig,
}

impl Snapshot {
    /// Parses a snapshot and checks it with [`Snapshot::validate`].
    pub fn from_json(text: &str) -> Result<Self, SnapshotError> {
        let snap: Snapshot = serde_json::from_str(text)?;
        snap.validate()?;
        Ok(snap)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serializes");
        s.push('\n');
        s
    }

    /// Schema version, disjoint member sets, matching counts and edge
    /// endpoints that name existing stories.
    pub fn validate(&self) -> Result<(), SnapshotError> {
        let bad = |m: String| Err(SnapshotError::Inconsistent(m));
        if self.schema != SCHEMA_VERSION {
            return Err(SnapshotError::Schema(self.schema));
        }
        if parse_timestamp(&self.timestamp).is_none() {
            return bad(format!("bad timestamp {:?}", self.timestamp));
        }
        let mut ids = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for s in &self.stories {
            if !ids.insert(s.id) {
                return bad(format!("story {} listed twice", s.id));
            }
            if s.member_count != s.members.len() {
                return bad(format!("story {} member count mismatch", s.id));
            }
            for m in &s.members {
                if !seen.insert(m.as_str()) {
                    return bad(format!("article {m:?} in two stories"));
                }
            }
        }
        for e in &self.edges {
            if !ids.contains(&e.source) || !ids.contains(&e.target) {
                return bad(format!(
                    "edge {} -- {} names a missing story",
                    e.source, e.target
                ));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return bad(format!(
                    "edge {} -- {} has weight {}",
                    e.source, e.target, e.weight
                ));
            }
        }
        Ok(())
    }

    /// Graphviz rendering. Nodes and edges are sorted by id so the bytes
    /// depend only on the snapshot's content.
    pub fn to_dot(&self) -> String {
        let counts: BTreeMap<StoryId, usize> = self
            .stories
            .iter()
            .map(|s| (s.id, s.member_count))
            .collect();
        let mut edges: Vec<(StoryId, StoryId, f64)> = self
            .edges
            .iter()
            .map(|e| (e.source.min(e.target), e.source.max(e.target), e.weight))
            .collect();
        edges.sort_by_key(|e| (e.0, e.1));

        let mut out = String::from("graph stories {\n");
        for (id, count) in &counts {
            let _ = writeln!(out, "  s{id} [label=\"{id} ({count})\"];");
        }
        for (a, b, w) in edges {
            let _ = writeln!(out, "  s{a} -- s{b} [label=\"{w:.3}\"];");
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn story(id: u64, members: &[&str]) -> StorySummary {
        StorySummary {
            id: StoryId(id),
            created: "2016-06-24T00:00:00.000Z".into(),
            last_active: "2016-06-25T00:00:00.000Z".into(),
            member_count: members.len(),
            members: members.iter().map(|m| m.to_string()).collect(),
        }
    }

    fn snapshot(stories: Vec<StorySummary>, edges: Vec<StoryEdge>) -> Snapshot {
        Snapshot {
            schema: SCHEMA_VERSION,
            sequence: 0,
            timestamp: "2016-06-25T00:00:00.000Z".into(),
            is_final: true,
            stories,
            topics: Vec::new(),
            edges,
            merge_events: Vec::new(),
            window_events: Vec::new(),
            config: RunConfig::default(),
        }
    }

    #[test]
    fn single_story_has_one_node_statement() {
        let dot = snapshot(vec![story(3, &["a", "b"])], vec![]).to_dot();
        assert_eq!(dot, "graph stories {\n  s3 [label=\"3 (2)\"];\n}\n");
    }

    #[test]
    fn edge_label_rounds_to_three_decimals() {
        let snap = snapshot(
            vec![story(2, &["b"]), story(1, &["a"])],
            vec![StoryEdge {
                source: StoryId(2),
                target: StoryId(1),
                weight: 0.87654,
            }],
        );
        let dot = snap.to_dot();
        assert!(dot.contains("  s1 -- s2 [label=\"0.877\"];\n"), "{dot}");
        assert!(dot.find("s1 [").unwrap() < dot.find("s2 [").unwrap());
        assert_eq!(dot, snap.to_dot());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let snap = snapshot(vec![story(1, &["a"]), story(2, &["b"])], vec![]);
        assert_eq!(Snapshot::from_json(&snap.to_json()).unwrap(), snap);

        let overlapping = snapshot(vec![story(1, &["a"]), story(2, &["a"])], vec![]);
        assert!(Snapshot::from_json(&overlapping.to_json()).is_err());

        let dangling = snapshot(
            vec![story(1, &["a"])],
            vec![StoryEdge {
                source: StoryId(1),
                target: StoryId(9),
                weight: 0.5,
            }],
        );
        assert!(Snapshot::from_json(&dangling.to_json()).is_err());

        let mut future = snap.clone();
        future.schema = 2;
        assert!(matches!(
            Snapshot::from_json(&future.to_json()),
            Err(SnapshotError::Schema(2))
        ));
    }
}
