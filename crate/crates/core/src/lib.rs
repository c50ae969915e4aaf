//! Map equation similarity (MapSim): node similarities from the modular
//! coding of random-walk flows, with map equation community detection and an
//! unsupervised link-prediction harness.

pub mod cli;
pub mod codingtree;
pub mod error;
pub mod flow;
pub mod graph;
pub mod linkpred;
pub mod mapeq;
pub mod optimizer;
pub mod rng;

pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowNetwork};
pub use graph::{Graph, NodeId};
pub use codingtree::{Address, CodingTree};
pub use mapeq::Partition;
