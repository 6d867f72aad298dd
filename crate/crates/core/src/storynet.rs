//! Persistent story network.
//!
//! A story keeps only its member article ids and the sum of their vectors.
//! Individual article vectors are retained for a bounded horizon so that
//! articles can migrate between stories while windows overlap; after that
//! they are dropped.
//!
//! Each batch of topics is integrated by running Louvain over a graph whose
//! nodes are the current stories and the incoming topics, then resolving
//! every community in four fixed phases:
//!
//! 1. topics that share a community with stories merge into the oldest one,
//! 2. topics sharing a community with no story merge with each other,
//! 3. the remaining (possibly combined) topics become new stories,
//! 4. stories sharing a community merge into the oldest one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::DocVector;
use crate::louvain::{louvain, LouvainConfig, LouvainError};
use crate::simgraph::{cosine, GraphError, NodeId, WeightTransform, WeightedGraph};

pub type ArticleId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StoryId(pub u64);

impl std::fmt::Display for StoryId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StoryError {
    #[error("no retained vector for article {0:?}")]
    MissingVector(ArticleId),
    #[error("vector for article {0:?} is no longer retained")]
    VectorUnavailable(ArticleId),
    #[error("unknown story {0}")]
    UnknownStory(StoryId),
    #[error("article {article:?} is not a member of story {story}")]
    NotAMember { article: ArticleId, story: StoryId },
    #[error("topic has no members")]
    EmptyTopic,
    #[error("cannot merge story {0} with itself")]
    SameStory(StoryId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Louvain(#[from] LouvainError),
}

/// A community found within one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub members: BTreeSet<ArticleId>,
    /// Sum of the member vectors.
    pub vector: DocVector,
    /// Emission time, in milliseconds since the epoch.
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Story {
    pub id: StoryId,
    pub created: i64,
    pub last_active: i64,
    pub members: BTreeSet<ArticleId>,
    pub vector: DocVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum MigrationTarget {
    Story(StoryId),
    Topic,
}

/// One step of story-network maintenance. Topic indices refer to the
/// position of the topic in the batch passed to [`StoryNetwork::integrate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MergeEvent {
    DocumentMigrated {
        article: ArticleId,
        from: StoryId,
        to: MigrationTarget,
    },
    StoryEmptied {
        story: StoryId,
    },
    TopicMerged {
        topic: usize,
        story: StoryId,
    },
    TopicsCombined {
        into: usize,
        absorbed: usize,
    },
    TopicCast {
        topic: usize,
        story: StoryId,
    },
    StoriesMerged {
        survivor: StoryId,
        absorbed: StoryId,
    },
}

/// Where a migrating article goes.
pub enum Destination<'a> {
    Story(StoryId),
    Topic(&'a mut Topic),
}

#[derive(Debug, Clone, Default)]
pub struct StoryNetwork {
    stories: BTreeMap<StoryId, Story>,
    owner: BTreeMap<ArticleId, StoryId>,
    retained: BTreeMap<ArticleId, (i64, DocVector)>,
    next_id: u64,
    log: Vec<MergeEvent>,
}

impl StoryNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stories(&self) -> impl Iterator<Item = &Story> {
        self.stories.values()
    }

    pub fn story(&self, id: StoryId) -> Option<&Story> {
        self.stories.get(&id)
    }

    pub fn story_count(&self) -> usize {
        self.stories.len()
    }

    pub fn owner(&self, article: &str) -> Option<StoryId> {
        self.owner.get(article).copied()
    }

    /// Every event since the network was created.
    pub fn log(&self) -> &[MergeEvent] {
        &self.log
    }

    /// Remembers an article's vector so it can later be moved between
    /// stories.
    pub fn retain(&mut self, article: impl Into<ArticleId>, timestamp: i64, vector: DocVector) {
        self.retained.insert(article.into(), (timestamp, vector));
    }

    pub fn retained_vector(&self, article: &str) -> Option<&DocVector> {
        self.retained.get(article).map(|(_, v)| v)
    }

    pub fn retained_count(&self) -> usize {
        self.retained.len()
    }

    /// Drops retained vectors of articles older than `cutoff`.
    pub fn prune(&mut self, cutoff: i64) {
        self.retained.retain(|_, (ts, _)| *ts >= cutoff);
    }

    /// Stories whose members all still have retained vectors.
    pub fn fully_retained(&self) -> impl Iterator<Item = &Story> {
        self.stories
            .values()
            .filter(|s| s.members.iter().all(|m| self.retained.contains_key(m)))
    }

    /// Moves `article` out of story `from` into `to`, keeping both vector
    /// sums exact. A story left without members is deleted.
    pub fn migrate_document(
        &mut self,
        article: &str,
        from: StoryId,
        to: Destination<'_>,
    ) -> Result<(), StoryError> {
        let source = self
            .stories
            .get(&from)
            .ok_or(StoryError::UnknownStory(from))?;
        if !source.members.contains(article) {
            return Err(StoryError::NotAMember {
                article: article.to_string(),
                story: from,
            });
        }
        if let Destination::Story(target) = to {
            if target == from {
                return Ok(());
            }
            if !self.stories.contains_key(&target) {
                return Err(StoryError::UnknownStory(target));
            }
        }
        let vector = self
            .retained
            .get(article)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| StoryError::VectorUnavailable(article.to_string()))?;

        let source = self.stories.get_mut(&from).expect("checked above");
        source.members.remove(article);
        source.vector.sub_assign(&vector);
        self.owner.remove(article);

        let logged_target = match to {
            Destination::Story(target) => {
                let dest = self.stories.get_mut(&target).expect("checked above");
                dest.members.insert(article.to_string());
                dest.vector.add_assign(&vector);
                self.owner.insert(article.to_string(), target);
                MigrationTarget::Story(target)
            }
            Destination::Topic(topic) => {
                if topic.members.insert(article.to_string()) {
                    topic.vector.add_assign(&vector);
                }
                MigrationTarget::Topic
            }
        };
        self.log.push(MergeEvent::DocumentMigrated {
            article: article.to_string(),
            from,
            to: logged_target,
        });
        if self.stories[&from].members.is_empty() {
            self.stories.remove(&from);
            self.log.push(MergeEvent::StoryEmptied { story: from });
        }
        Ok(())
    }

    /// Pulls every member of `topic` that belongs to a story other than
    /// `keep` out of that story.
    fn release_members(
        &mut self,
        topic: &mut Topic,
        keep: Option<StoryId>,
    ) -> Result<(), StoryError> {
        let members: Vec<ArticleId> = topic.members.iter().cloned().collect();
        for article in members {
            match self.owner.get(&article).copied() {
                Some(owner) if Some(owner) != keep => {
                    self.migrate_document(&article, owner, Destination::Topic(topic))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Merges `topic` into `story`. Members owned by other stories migrate
    /// first; members already in `story` are not counted twice.
    pub fn merge_topic_into_story(
        &mut self,
        topic: &Topic,
        story: StoryId,
    ) -> Result<(), StoryError> {
        if !self.stories.contains_key(&story) {
            return Err(StoryError::UnknownStory(story));
        }
        let mut topic = topic.clone();
        self.release_members(&mut topic, Some(story))?;

        let target = &self.stories[&story];
        let fresh: Vec<&ArticleId> = topic
            .members
            .iter()
            .filter(|m| !target.members.contains(*m))
            .collect();
        let increment = if fresh.len() == topic.members.len() {
            Some(topic.vector.clone())
        } else {
            let mut vs = Vec::with_capacity(fresh.len());
            for m in &fresh {
                let v = self
                    .retained_vector(m)
                    .ok_or_else(|| StoryError::MissingVector((*m).clone()))?;
                vs.push(v);
            }
            DocVector::sum(vs)
        };
        let fresh: Vec<ArticleId> = fresh.into_iter().cloned().collect();

        let target = self.stories.get_mut(&story).expect("checked above");
        if let Some(inc) = increment {
            target.vector.add_assign(&inc);
        }
        for m in fresh {
            self.owner.insert(m.clone(), story);
            target.members.insert(m);
        }
        target.last_active = target.last_active.max(topic.timestamp);
        Ok(())
    }

    /// Turns `topic` into a new story, migrating members out of any story
    /// that currently owns them.
    pub fn cast_topic_to_story(&mut self, topic: &Topic) -> Result<StoryId, StoryError> {
        if topic.members.is_empty() {
            return Err(StoryError::EmptyTopic);
        }
        let mut topic = topic.clone();
        self.release_members(&mut topic, None)?;
        let id = StoryId(self.next_id);
        self.next_id += 1;
        for m in &topic.members {
            self.owner.insert(m.clone(), id);
        }
        self.stories.insert(
            id,
            Story {
                id,
                created: topic.timestamp,
                last_active: topic.timestamp,
                members: topic.members,
                vector: topic.vector,
            },
        );
        Ok(id)
    }

    /// Union of two topics from the same batch; vectors are summed, shared
    /// members counted once.
    pub fn merge_topic_with_topic(&self, a: &Topic, b: &Topic) -> Result<Topic, StoryError> {
        let mut vector = a.vector.clone();
        if a.members.is_disjoint(&b.members) {
            vector.add_assign(&b.vector);
        } else {
            for m in b.members.difference(&a.members) {
                let v = self
                    .retained_vector(m)
                    .ok_or_else(|| StoryError::MissingVector(m.clone()))?;
                vector.add_assign(v);
            }
        }
        Ok(Topic {
            members: a.members.union(&b.members).cloned().collect(),
            vector,
            timestamp: a.timestamp.max(b.timestamp),
        })
    }

    /// Merges two stories onto the older one (lower id on equal creation
    /// time) and returns the survivor.
    pub fn merge_story_with_story(
        &mut self,
        a: StoryId,
        b: StoryId,
    ) -> Result<StoryId, StoryError> {
        if a == b {
            return Err(StoryError::SameStory(a));
        }
        for id in [a, b] {
            if !self.stories.contains_key(&id) {
                return Err(StoryError::UnknownStory(id));
            }
        }
        let key = |id: StoryId| (self.stories[&id].created, id);
        let (survivor, absorbed) = if key(a) <= key(b) { (a, b) } else { (b, a) };
        let gone = self.stories.remove(&absorbed).expect("checked above");
        for m in &gone.members {
            self.owner.insert(m.clone(), survivor);
        }
        let keep = self.stories.get_mut(&survivor).expect("checked above");
        keep.members.extend(gone.members);
        keep.vector.add_assign(&gone.vector);
        keep.last_active = keep.last_active.max(gone.last_active);
        Ok(survivor)
    }

    /// Story-network graph over the given vectors. Zero vectors stay
    /// isolated.
    fn similarity_graph(
        vectors: &[&DocVector],
        transform: &WeightTransform,
    ) -> Result<WeightedGraph, StoryError> {
        let mut g = WeightedGraph::new();
        for i in 0..vectors.len() {
            g.insert_node(i as NodeId)?;
        }
        for i in 0..vectors.len() {
            for j in i + 1..vectors.len() {
                let cos = match cosine(vectors[i], vectors[j]) {
                    Ok(c) => c,
                    Err(GraphError::ZeroVector) => continue,
                    Err(e) => return Err(e.into()),
                };
                if let Some(w) = transform.weight(cos) {
                    g.set_edge(i as NodeId, j as NodeId, w)?;
                }
            }
        }
        Ok(g)
    }

    /// Weighted edges between current stories, for display.
    pub fn story_edges(
        &self,
        transform: &WeightTransform,
    ) -> Result<Vec<(StoryId, StoryId, f64)>, StoryError> {
        let ids: Vec<StoryId> = self.stories.keys().copied().collect();
        let vectors: Vec<&DocVector> = self.stories.values().map(|s| &s.vector).collect();
        let g = Self::similarity_graph(&vectors, transform)?;
        Ok(g.edges()
            .map(|(a, b, w)| (ids[a as usize], ids[b as usize], w))
            .collect())
    }

    /// Integrates one batch of topics and returns the events it produced.
    pub fn integrate(
        &mut self,
        topics: &[Topic],
        transform: &WeightTransform,
        cfg: &LouvainConfig,
    ) -> Result<Vec<MergeEvent>, StoryError> {
        for topic in topics {
            if let Some(m) = topic
                .members
                .iter()
                .find(|m| !self.retained.contains_key(*m))
            {
                return Err(StoryError::MissingVector(m.clone()));
            }
        }
        let log_start = self.log.len();
        let topic_idx: Vec<usize> = (0..topics.len())
            .filter(|&i| !topics[i].members.is_empty())
            .collect();
        if topic_idx.is_empty() {
            return Ok(Vec::new());
        }

        // stories occupy nodes 0..ns in id order, topics follow
        let story_ids: Vec<StoryId> = self.stories.keys().copied().collect();
        let mut vectors: Vec<&DocVector> = self.stories.values().map(|s| &s.vector).collect();
        vectors.extend(topic_idx.iter().map(|&i| &topics[i].vector));
        let g = Self::similarity_graph(&vectors, transform)?;
        let partition = louvain(&g, cfg)?.into_top().partition.normalized();

        let ns = story_ids.len();
        let mut groups: Vec<(Vec<StoryId>, Vec<usize>)> = Vec::new();
        for members in partition.communities().into_values() {
            let mut stories = Vec::new();
            let mut tops = Vec::new();
            for node in members {
                let node = node as usize;
                if node < ns {
                    stories.push(story_ids[node]);
                } else {
                    tops.push(topic_idx[node - ns]);
                }
            }
            let created = |id: &StoryId| (self.stories[id].created, *id);
            stories.sort_by_key(created);
            groups.push((stories, tops));
        }

        // 1. topic into story
        let mut castable: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        for (g_idx, (stories, tops)) in groups.iter().enumerate() {
            for &t in tops {
                let target = stories
                    .iter()
                    .copied()
                    .find(|s| self.stories.contains_key(s));
                match target {
                    Some(story) => {
                        self.merge_topic_into_story(&topics[t], story)?;
                        self.log.push(MergeEvent::TopicMerged { topic: t, story });
                    }
                    None => castable[g_idx].push(t),
                }
            }
        }
        // 2. topic with topic
        let mut combined: Vec<(usize, Topic)> = Vec::new();
        for tops in castable.iter().filter(|t| !t.is_empty()) {
            let first = tops[0];
            let mut acc = topics[first].clone();
            for &t in &tops[1..] {
                acc = self.merge_topic_with_topic(&acc, &topics[t])?;
                self.log.push(MergeEvent::TopicsCombined {
                    into: first,
                    absorbed: t,
                });
            }
            combined.push((first, acc));
        }
        // 3. topic to new story
        for (first, topic) in combined {
            let story = self.cast_topic_to_story(&topic)?;
            self.log.push(MergeEvent::TopicCast {
                topic: first,
                story,
            });
        }
        // 4. story with story
        for (stories, _) in &groups {
            let alive: Vec<StoryId> = stories
                .iter()
                .copied()
                .filter(|s| self.stories.contains_key(s))
                .collect();
            let Some((&first, rest)) = alive.split_first() else {
                continue;
            };
            let mut survivor = first;
            for &other in rest {
                let keep = self.merge_story_with_story(survivor, other)?;
                let absorbed = if keep == survivor { other } else { survivor };
                survivor = keep;
                self.log
                    .push(MergeEvent::StoriesMerged { survivor, absorbed });
            }
        }
        Ok(self.log[log_start..].to_vec())
    }

    /// Checks that member sets are disjoint and agree with the ownership
    /// index, and that each fully retained story's vector matches the sum of
    /// its members within `tol` per coordinate.
    pub fn check_integrity(&self, tol: f64) -> Result<(), String> {
        let mut seen: BTreeMap<&str, StoryId> = BTreeMap::new();
        for story in self.stories.values() {
            if story.members.is_empty() {
                return Err(format!("story {} is empty", story.id));
            }
            if story.created > story.last_active {
                return Err(format!("story {} active before creation", story.id));
            }
            for m in &story.members {
                if let Some(other) = seen.insert(m, story.id) {
                    return Err(format!("{m:?} in stories {other} and {}", story.id));
                }
                if self.owner.get(m) != Some(&story.id) {
                    return Err(format!("owner index wrong for {m:?}"));
                }
            }
        }
        if seen.len() != self.owner.len() {
            return Err("owner index has stale entries".into());
        }
        for story in self.fully_retained() {
            let sum = DocVector::sum(story.members.iter().map(|m| &self.retained[m].1))
                .expect("non-empty story");
            for (a, b) in story.vector.as_slice().iter().zip(sum.as_slice()) {
                if (a - b).abs() > tol {
                    return Err(format!("story {} vector drift {}", story.id, (a - b).abs()));
                }
            }
        }
        Ok(())
    }
}
