//! Inching window stream driver.
//!
//! The window first fills for one span `W`, buffering articles. The first
//! article at or past the end of that span triggers a full Louvain
//! clustering of the buffer. From then on each article inside the window is
//! placed on the fly and its community is marked temporary. An article past
//! the window end triggers a slide: full re-clustering (which overrides all
//! temporary assignments), then the start advances by `S` and older
//! articles are evicted.
//!
//! Window boundaries are aligned to multiples of `S` since the epoch, so
//! with `S` of one day windows start at UTC midnight.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::DocVector;
use crate::louvain::{
    assign_on_the_fly, louvain, CommunityId, LouvainConfig, LouvainError, Partition,
};
use crate::simgraph::{GraphError, NodeId, WeightTransform, WeightedGraph};
use crate::storynet::{ArticleId, Topic};

pub const MS_PER_DAY: i64 = 86_400_000;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("article {id:?} at {timestamp} arrives before {limit}")]
    OutOfOrder {
        id: ArticleId,
        timestamp: i64,
        limit: i64,
    },
    #[error("article {0:?} is already in the window")]
    DuplicateArticle(ArticleId),
    #[error("window is still filling")]
    NotInInchingPhase,
    #[error("window holds no articles")]
    EmptyWindow,
    #[error("invalid window configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Louvain(#[from] LouvainError),
}

/// Span `W`, inch interval `S` and lateness tolerance `L`, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub span_ms: i64,
    pub interval_ms: i64,
    #[serde(default)]
    pub lateness_ms: i64,
}

impl WindowConfig {
    pub fn days(span: i64, interval: i64) -> Self {
        Self {
            span_ms: span * MS_PER_DAY,
            interval_ms: interval * MS_PER_DAY,
            lateness_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.interval_ms <= 0 || self.interval_ms > self.span_ms {
            return Err(WindowError::BadConfig(format!(
                "need 0 < interval ({}) <= span ({})",
                self.interval_ms, self.span_ms
            )));
        }
        if self.lateness_ms < 0 {
            return Err(WindowError::BadConfig("lateness must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Filling,
    Inching,
}

/// Why a full clustering ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterCause {
    /// First complete window span.
    Batch,
    /// Interval boundary; `overridden` temporary assignments were replaced.
    Slide { overridden: usize },
    /// End of stream.
    Flush { overridden: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WindowEvent {
    TopicsEmitted {
        at: i64,
        cause: ClusterCause,
        topics: Vec<Topic>,
    },
    TemporaryAssignment {
        at: i64,
        article: ArticleId,
        community: CommunityId,
    },
    WindowSlid {
        at: i64,
        new_start: i64,
        evicted: Vec<ArticleId>,
    },
}

impl WindowEvent {
    pub fn at(&self) -> i64 {
        match self {
            WindowEvent::TopicsEmitted { at, .. }
            | WindowEvent::TemporaryAssignment { at, .. }
            | WindowEvent::WindowSlid { at, .. } => *at,
        }
    }
}

#[derive(Debug, Clone)]
struct LiveArticle {
    id: ArticleId,
    timestamp: i64,
}

#[derive(Debug, Clone)]
pub struct InchingWindow {
    config: WindowConfig,
    transform: WeightTransform,
    louvain: LouvainConfig,
    phase: Phase,
    start: Option<i64>,
    high_water: Option<i64>,
    dim: Option<usize>,
    next_node: NodeId,
    live: BTreeMap<NodeId, LiveArticle>,
    by_id: BTreeMap<ArticleId, NodeId>,
    vectors: BTreeMap<NodeId, DocVector>,
    graph: WeightedGraph,
    partition: Partition,
    temporary: BTreeSet<NodeId>,
}

impl InchingWindow {
    pub fn new(
        config: WindowConfig,
        transform: WeightTransform,
        louvain: LouvainConfig,
    ) -> Result<Self, WindowError> {
        config.validate()?;
        transform.validate()?;
        louvain.validate()?;
        Ok(Self {
            config,
            transform,
            louvain,
            phase: Phase::Filling,
            start: None,
            high_water: None,
            dim: None,
            next_node: 0,
            live: BTreeMap::new(),
            by_id: BTreeMap::new(),
            vectors: BTreeMap::new(),
            graph: WeightedGraph::new(),
            partition: Partition::new(),
            temporary: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Window start; `None` until the first article.
    pub fn start(&self) -> Option<i64> {
        self.start
    }

    pub fn end(&self) -> Option<i64> {
        self.start.map(|s| s + self.config.span_ms)
    }

    pub fn high_water(&self) -> Option<i64> {
        self.high_water
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    /// Live article ids with their timestamps, oldest first.
    pub fn live_articles(&self) -> impl Iterator<Item = (&str, i64)> {
        self.live.values().map(|a| (a.id.as_str(), a.timestamp))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Current community of a live article and whether it is temporary.
    pub fn assignment(&self, id: &str) -> Option<(CommunityId, bool)> {
        let node = *self.by_id.get(id)?;
        let c = self.partition.get(node)?;
        Some((c, self.temporary.contains(&node)))
    }

    pub fn temporary_count(&self) -> usize {
        self.temporary.len()
    }

    fn align(&self, ts: i64) -> i64 {
        ts.div_euclid(self.config.interval_ms) * self.config.interval_ms
    }

    /// Feeds one article and returns the events it caused, in time order.
    pub fn ingest(
        &mut self,
        id: impl Into<ArticleId>,
        timestamp: i64,
        vector: DocVector,
    ) -> Result<Vec<WindowEvent>, WindowError> {
        let id = id.into();
        if self.by_id.contains_key(&id) {
            return Err(WindowError::DuplicateArticle(id));
        }
        if let Some(hw) = self.high_water {
            let limit = (hw - self.config.lateness_ms).max(self.start.unwrap_or(i64::MIN));
            if timestamp < limit {
                return Err(WindowError::OutOfOrder {
                    id,
                    timestamp,
                    limit,
                });
            }
        }
        match self.dim {
            Some(d) if d != vector.dim() => {
                return Err(GraphError::DimensionMismatch(d, vector.dim()).into());
            }
            _ => self.dim = Some(vector.dim()),
        }
        let start = match self.start {
            Some(s) => s,
            None => {
                let s = self.align(timestamp);
                self.start = Some(s);
                s
            }
        };

        let mut events = Vec::new();
        if self.phase == Phase::Filling {
            let end = start + self.config.span_ms;
            if timestamp < end {
                self.insert(id, timestamp, vector)?;
                self.bump_high_water(timestamp);
                return Ok(events);
            }
            events.push(self.cluster(end, ClusterCause::Batch)?);
            self.phase = Phase::Inching;
        }

        while timestamp >= self.end().expect("started") {
            events.extend(self.slide()?);
        }
        let node = self.insert(id.clone(), timestamp, vector)?;
        let community =
            assign_on_the_fly(&self.graph, &self.partition, node, self.louvain.resolution)?;
        self.partition.insert(node, community);
        self.temporary.insert(node);
        self.bump_high_water(timestamp);
        events.push(WindowEvent::TemporaryAssignment {
            at: timestamp,
            article: id,
            community,
        });
        Ok(events)
    }

    /// Re-clusters the whole window, then advances the start by one
    /// interval and evicts articles older than the new start.
    pub fn slide(&mut self) -> Result<Vec<WindowEvent>, WindowError> {
        if self.phase != Phase::Inching {
            return Err(WindowError::NotInInchingPhase);
        }
        let start = self.start.expect("inching implies started");
        let boundary = start + self.config.span_ms;
        let mut events = Vec::new();
        if !self.graph.is_empty() {
            let overridden = self.temporary.len();
            events.push(self.cluster(boundary, ClusterCause::Slide { overridden })?);
        }
        let new_start = start + self.config.interval_ms;
        let evict: BTreeSet<NodeId> = self
            .live
            .iter()
            .filter(|(_, a)| a.timestamp < new_start)
            .map(|(&n, _)| n)
            .collect();
        self.graph.remove_nodes(&evict)?;
        let mut evicted = Vec::with_capacity(evict.len());
        for node in &evict {
            let article = self.live.remove(node).expect("live node");
            self.by_id.remove(&article.id);
            self.vectors.remove(node);
            self.partition.remove(*node);
            evicted.push(article.id);
        }
        self.start = Some(new_start);
        events.push(WindowEvent::WindowSlid {
            at: boundary,
            new_start,
            evicted,
        });
        Ok(events)
    }

    /// End of stream: re-clusters the window without moving it.
    pub fn flush(&mut self) -> Result<Vec<WindowEvent>, WindowError> {
        if self.live.is_empty() {
            return Err(WindowError::EmptyWindow);
        }
        let overridden = self.temporary.len();
        let at = self
            .high_water
            .expect("live articles imply a high-water mark");
        let event = self.cluster(at, ClusterCause::Flush { overridden })?;
        self.phase = Phase::Inching;
        Ok(vec![event])
    }

    fn bump_high_water(&mut self, ts: i64) {
        self.high_water = Some(self.high_water.map_or(ts, |h| h.max(ts)));
    }

    fn insert(
        &mut self,
        id: ArticleId,
        timestamp: i64,
        vector: DocVector,
    ) -> Result<NodeId, WindowError> {
        let node = self.next_node;
        self.graph
            .add_node(node, &vector, &self.vectors, &self.transform)?;
        self.next_node += 1;
        self.vectors.insert(node, vector);
        self.by_id.insert(id.clone(), node);
        self.live.insert(node, LiveArticle { id, timestamp });
        Ok(node)
    }

    /// Full Louvain over the current graph; clears every temporary flag.
    fn cluster(&mut self, at: i64, cause: ClusterCause) -> Result<WindowEvent, WindowError> {
        let top = louvain(&self.graph, &self.louvain)?.into_top();
        self.partition = top.partition.normalized();
        self.temporary.clear();
        Ok(WindowEvent::TopicsEmitted {
            at,
            cause,
            topics: self.topics(at),
        })
    }

    fn topics(&self, at: i64) -> Vec<Topic> {
        self.partition
            .communities()
            .into_values()
            .map(|nodes| Topic {
                members: nodes.iter().map(|n| self.live[n].id.clone()).collect(),
                vector: DocVector::sum(nodes.iter().map(|n| &self.vectors[n]))
                    .expect("communities are non-empty"),
                timestamp: at,
            })
            .collect()
    }
}
