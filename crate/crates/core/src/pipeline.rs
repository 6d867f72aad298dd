//! Drives the window and the story network over an article stream.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::config::{Cadence, RunConfig};
use crate::embedding::{embed_fallback, usable_norm, DocVector, EmbeddingError, VectorSource};
use crate::io::{format_timestamp, Article};
use crate::snapshot::{
    Snapshot, StoryEdge, StorySummary, TopicSummary, WindowLogEntry, SCHEMA_VERSION,
};
use crate::storynet::{ArticleId, MergeEvent, StoryError, StoryId, StoryNetwork, Topic};
use crate::window::{InchingWindow, WindowError, WindowEvent};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no articles")]
    NoArticles,
    #[error("line {line}: article {id:?}: {message}")]
    Vector {
        line: usize,
        id: String,
        message: String,
    },
    #[error("line {line}: duplicate article id {id:?}")]
    Duplicate { line: usize, id: String },
    #[error("line {line}: {source}")]
    Window { line: usize, source: WindowError },
    #[error(transparent)]
    Story(#[from] StoryError),
    #[error(transparent)]
    FinalWindow(WindowError),
}

impl PipelineError {
    /// True for arrivals that break the stream's time order.
    pub fn is_order_violation(&self) -> bool {
        matches!(
            self,
            PipelineError::Window {
                source: WindowError::OutOfOrder { .. },
                ..
            }
        )
    }
}

/// One assignment line of the final output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub id: ArticleId,
    pub story: StoryId,
}

#[derive(Debug)]
pub struct RunOutput {
    pub final_snapshot: Snapshot,
    /// In input order.
    pub assignments: Vec<Assignment>,
}

pub struct Pipeline {
    config: RunConfig,
    precomputed: BTreeMap<String, DocVector>,
    window: InchingWindow,
    net: StoryNetwork,
    span_ms: i64,
    order: Vec<ArticleId>,
    seen: BTreeSet<ArticleId>,
    sequence: u64,
    merge_log_mark: usize,
    window_log: Vec<WindowLogEntry>,
    last_topics: Vec<TopicSummary>,
    last_time: Option<i64>,
}

impl Pipeline {
    /// `precomputed` supplies vectors when the source is a vector file and
    /// is ignored otherwise.
    pub fn new(
        config: RunConfig,
        precomputed: BTreeMap<String, DocVector>,
    ) -> Result<Self, WindowError> {
        let window_cfg = config.window_config();
        let window = InchingWindow::new(window_cfg, config.article_graph, config.louvain)?;
        Ok(Self {
            span_ms: window_cfg.span_ms,
            config,
            precomputed,
            window,
            net: StoryNetwork::new(),
            order: Vec::new(),
            seen: BTreeSet::new(),
            sequence: 0,
            merge_log_mark: 0,
            window_log: Vec::new(),
            last_topics: Vec::new(),
            last_time: None,
        })
    }

    pub fn network(&self) -> &StoryNetwork {
        &self.net
    }

    pub fn window(&self) -> &InchingWindow {
        &self.window
    }

    fn vector_for(&self, article: &Article) -> Result<DocVector, PipelineError> {
        let fail = |message: String| PipelineError::Vector {
            line: article.line,
            id: article.id.clone(),
            message,
        };
        let vector = match &self.config.vectors {
            VectorSource::FallbackEmbedder { dimension, seed } => {
                let text = article
                    .text
                    .as_deref()
                    .ok_or_else(|| fail("record has no text for the fallback embedder".into()))?;
                embed_fallback(text, *dimension, *seed).map_err(|e| fail(e.to_string()))?
            }
            VectorSource::Inline { dimension } => {
                let values = article
                    .vector
                    .clone()
                    .ok_or_else(|| fail("record has no inline vector".into()))?;
                if values.len() != *dimension {
                    let e = EmbeddingError::DimensionMismatch {
                        id: article.id.clone(),
                        expected: *dimension,
                        found: values.len(),
                    };
                    return Err(fail(e.to_string()));
                }
                DocVector::new(values).map_err(|e| fail(e.to_string()))?
            }
            VectorSource::PrecomputedFile { .. } => self
                .precomputed
                .get(&article.id)
                .cloned()
                .ok_or_else(|| fail("id missing from the vector file".into()))?,
        };
        if !usable_norm(&vector) {
            return Err(fail("vector has zero or non-finite norm".into()));
        }
        Ok(vector)
    }

    /// Feeds one article. Returns the snapshots that became due, which is
    /// one per window slide under the per-slide cadence.
    pub fn push(&mut self, article: Article) -> Result<Vec<Snapshot>, PipelineError> {
        if self.seen.contains(&article.id) {
            return Err(PipelineError::Duplicate {
                line: article.line,
                id: article.id,
            });
        }
        let vector = self.vector_for(&article)?;
        let events = self
            .window
            .ingest(article.id.clone(), article.timestamp, vector.clone())
            .map_err(|source| PipelineError::Window {
                line: article.line,
                source,
            })?;
        self.net
            .retain(article.id.clone(), article.timestamp, vector);
        self.seen.insert(article.id.clone());
        self.order.push(article.id);
        let mut due = Vec::new();
        for event in events {
            if let Some(at) = self.handle(event)? {
                if self.config.snapshots.cadence == Cadence::PerSlide {
                    due.push(self.snapshot(at, false)?);
                }
            }
        }
        if let Some(hw) = self.window.high_water() {
            self.net.prune(hw.saturating_sub(self.span_ms));
        }
        Ok(due)
    }

    /// Applies one window event; returns the slide time when it was a slide.
    fn handle(&mut self, event: WindowEvent) -> Result<Option<i64>, PipelineError> {
        self.last_time = Some(self.last_time.map_or(event.at(), |t| t.max(event.at())));
        match event {
            WindowEvent::TopicsEmitted { at, cause, topics } => {
                self.window_log.push(WindowLogEntry::TopicsEmitted {
                    at: format_timestamp(at),
                    cause,
                    topic_count: topics.len(),
                });
                self.integrate(&topics)?;
                Ok(None)
            }
            WindowEvent::TemporaryAssignment {
                at,
                article,
                community,
            } => {
                self.window_log.push(WindowLogEntry::TemporaryAssignment {
                    at: format_timestamp(at),
                    article,
                    community,
                });
                Ok(None)
            }
            WindowEvent::WindowSlid {
                at,
                new_start,
                evicted,
            } => {
                self.window_log.push(WindowLogEntry::WindowSlid {
                    at: format_timestamp(at),
                    new_start: format_timestamp(new_start),
                    evicted,
                });
                Ok(Some(at))
            }
        }
    }

    fn integrate(&mut self, topics: &[Topic]) -> Result<(), PipelineError> {
        self.net
            .integrate(topics, &self.config.story_graph, &self.config.louvain)?;
        // every member of a topic ends up in one story
        self.last_topics = topics
            .iter()
            .map(|t| TopicSummary {
                members: t.members.iter().cloned().collect(),
                story: t.members.iter().next().and_then(|m| self.net.owner(m)),
            })
            .collect();
        Ok(())
    }

    fn snapshot(&mut self, at: i64, is_final: bool) -> Result<Snapshot, PipelineError> {
        let stories = self
            .net
            .stories()
            .map(|s| StorySummary {
                id: s.id,
                created: format_timestamp(s.created),
                last_active: format_timestamp(s.last_active),
                member_count: s.members.len(),
                members: s.members.iter().cloned().collect(),
            })
            .collect();
        let edges = self
            .net
            .story_edges(&self.config.story_graph)?
            .into_iter()
            .map(|(source, target, weight)| StoryEdge {
                source,
                target,
                weight,
            })
            .collect();
        let log = self.net.log();
        let merge_events: Vec<MergeEvent> = log[self.merge_log_mark..].to_vec();
        self.merge_log_mark = log.len();
        let snap = Snapshot {
            schema: SCHEMA_VERSION,
            sequence: self.sequence,
            timestamp: format_timestamp(at),
            is_final,
            stories,
            topics: self.last_topics.clone(),
            edges,
            merge_events,
            window_events: std::mem::take(&mut self.window_log),
            config: self.config.clone(),
        };
        self.sequence += 1;
        Ok(snap)
    }

    /// Flushes the window and returns the final snapshot and assignments.
    pub fn finish(mut self) -> Result<RunOutput, PipelineError> {
        if self.order.is_empty() {
            return Err(PipelineError::NoArticles);
        }
        for event in self.window.flush().map_err(PipelineError::FinalWindow)? {
            self.handle(event)?;
        }
        let at = self.last_time.expect("flush emitted an event");
        let final_snapshot = self.snapshot(at, true)?;
        let assignments = self
            .order
            .iter()
            .map(|id| Assignment {
                id: id.clone(),
                story: self
                    .net
                    .owner(id)
                    .expect("every clustered article belongs to a story"),
            })
            .collect();
        Ok(RunOutput {
            final_snapshot,
            assignments,
        })
    }
}
