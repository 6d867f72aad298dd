//! Streaming story construction over a chronological stream of embedded
//! news articles.
//!
//! Articles are clustered into topics by Louvain community detection over an
//! inching window, newcomers are placed on the fly by modularity comparison,
//! and topics are merged into persistent stories summarized by the sum of
//! their member vectors.

pub mod config;
pub mod embedding;
pub mod evalmetrics;
pub mod io;
pub mod louvain;
pub mod pipeline;
pub mod simgraph;
pub mod snapshot;
pub mod storynet;
pub mod window;
