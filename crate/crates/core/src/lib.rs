//! Structural distances, clustering, and layout for neural architecture
//! search spaces.
//!
//! The pipeline: enumerate a [`Space`], build its one-edit [`ArchGraph`],
//! compute sampled pairwise distances with one bucketed Dijkstra per source,
//! cluster them into a [`ClusterTree`], and lay each cluster out on a
//! hexagonal grid. [`principles`] turns structural design rules into
//! predicates and filters for search strategies.

pub mod assignment;
pub mod cluster;
pub mod distance;
pub mod error;
pub mod ged;
pub mod graph;
pub mod layout;
pub mod metrics;
pub mod persist;
pub mod principles;
pub mod search;
pub mod space;
pub mod sssp;
pub mod surrogate;

pub use cluster::{ClusterNode, ClusterTree, SampleSet};
pub use distance::{apsp_sampled, Backend, DistanceMatrix};
pub use error::{Error, Result};
pub use graph::ArchGraph;
pub use layout::{HexGrid, LayoutResult};
pub use metrics::MetricTable;
pub use principles::Principle;
pub use search::SearchTrace;
pub use space::{Architecture, Family, OpKind, OpType, Space, SpaceSpec};
pub use surrogate::SurrogateModel;
