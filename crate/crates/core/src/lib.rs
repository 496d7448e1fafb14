//! Evolutionary neural-architecture search over multi-stream spatio-temporal CNNs.
//!
//! Architectures are level-ordered DAGs of residual convolutional blocks
//! ([`graph::ArchitectureGraph`]). Candidates are compiled into trainable networks
//! ([`net::ExecutableNetwork`]) on top of a small reverse-mode tensor engine
//! ([`tensor`]), scored on a synthetic two-modality video task ([`proxy`]), and
//! evolved with tournament selection ([`search`]) whose edge mutation keeps
//! strongly gated parental connections ([`mutation`]).

pub mod cli;
pub mod config;
pub mod error;
pub mod graph;
pub mod mutation;
pub mod net;
pub mod proxy;
pub mod schedule;
pub mod search;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{ArchitectureGraph, BlockNode, NodeId, NodeKind};
pub use schedule::LayerSchedule;
