use crate::energymodel::ServerMode;
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no path between {from} and {to}")]
    NoPath { from: NodeId, to: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("server in state {mode:?} cannot serve at slot {slot}")]
    IllegalTransition { mode: ServerMode, slot: u32 },
    #[error("invalid graph: {0}")]
    InvalidGraph(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
