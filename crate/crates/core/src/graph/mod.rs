//! Heterogeneous transaction graph: construction, neighborhood sampling and input encoding.

mod build;
mod sample;

pub use build::{build_graph, Edge, FeatureStats, HeteroGraph, Node};
pub use sample::{encode_inputs, sample_neighborhood, EncodedInputs, SamplerConfig, Subgraph};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of raw transaction features: `usd_amount`, `d_amount`, `d_time`.
pub const FEATURE_DIM: usize = 3;
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = ["usd_amount", "d_amount", "d_time"];
/// Features followed by the node-type one-hot.
pub const INPUT_DIM: usize = FEATURE_DIM + NodeType::COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    Transaction,
    Account,
    User,
    Country,
}

impl NodeType {
    pub const COUNT: usize = 4;
    pub const ALL: [NodeType; 4] = [NodeType::Transaction, NodeType::Account, NodeType::User, NodeType::Country];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Transaction => "Transaction",
            NodeType::Account => "Account",
            NodeType::User => "User",
            NodeType::Country => "Country",
        }
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeType {
    #[serde(rename = "Executed_In")]
    ExecutedIn,
    #[serde(rename = "Sent_To")]
    SentTo,
    #[serde(rename = "Sent_By")]
    SentBy,
    #[serde(rename = "Transferred_By")]
    TransferredBy,
    #[serde(rename = "Received_By")]
    ReceivedBy,
}

impl EdgeType {
    pub const COUNT: usize = 5;
    pub const ALL: [EdgeType; 5] =
        [EdgeType::ExecutedIn, EdgeType::SentTo, EdgeType::SentBy, EdgeType::TransferredBy, EdgeType::ReceivedBy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::ExecutedIn => "Executed_In",
            EdgeType::SentTo => "Sent_To",
            EdgeType::SentBy => "Sent_By",
            EdgeType::TransferredBy => "Transferred_By",
            EdgeType::ReceivedBy => "Received_By",
        }
    }

    /// Node type at the non-transaction end.
    pub fn target_type(self) -> NodeType {
        match self {
            EdgeType::ExecutedIn => NodeType::Country,
            EdgeType::SentTo | EdgeType::SentBy => NodeType::Account,
            EdgeType::TransferredBy | EdgeType::ReceivedBy => NodeType::User,
        }
    }

    pub fn one_hot(self) -> [f64; 5] {
        let mut v = [0.0; 5];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("row {row} (`{id}`) references no sender or beneficiary")]
    NoParties { row: usize, id: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("`{0}` is not a transaction node")]
    NotTransaction(String),
}
