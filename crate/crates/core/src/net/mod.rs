pub mod frame;
pub mod node;
pub mod payload;
pub mod pool;
pub mod relay;
pub mod session;
pub mod topology;
pub mod transport;

pub use node::{Network, PeerState};
pub use pool::{KeyPool, PoolBlock, PoolError};
pub use session::{run_session, BlockOutcome, BlockRecord, PipelineConfig, Session, SessionError, SessionStats};
pub use topology::{NodeRole, Topology, TopologyError};
