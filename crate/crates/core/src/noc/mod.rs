//! Broadcast network-on-chip: message formats, topologies, credit-based
//! routers and the idle-detection tree.

mod idle;
pub mod message;
mod network;
mod topology;

pub use idle::IdleTree;
pub use message::{decode, encode, ClauseAddr, Flit, Message, MessageError, MessageKind, Routing};
pub use network::{Endpoint, NetFlit, NetStats, Network};
pub use topology::{route_broadcast, Arrival, Link, NodeId, Topology, TopologyKind};
