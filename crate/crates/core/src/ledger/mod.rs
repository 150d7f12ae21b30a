//! Hash-chained block ledger, ordering, commit and audit.

pub mod audit;
pub mod block;
pub mod clock;
pub mod exec;
pub mod lifecycle;
pub mod log;
pub mod node;
pub mod ordering;
pub mod state;
pub mod tx;

pub use audit::{audit_image, AuditReport, Violation};
pub use block::{merkle_root, Block, TxResult, WriteDigest};
pub use clock::{Clock, SimClock, WallClock};
pub use exec::{GenesisArgs, TxRejection};
pub use lifecycle::{ChaincodeMeta, Lifecycle, LifecycleError};
pub use node::{CommitError, Node, NodeConfig, NodeError, SubmitError, Topology};
pub use ordering::{OrderingMode, Orderer};
pub use tx::{Transaction, GENESIS_OP};
