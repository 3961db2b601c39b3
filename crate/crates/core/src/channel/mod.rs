//! Link states, path loss, clustered channels and beamforming.

pub mod beam;
pub mod link;
pub mod state;

use thiserror::Error;

pub use beam::{array_factor, array_response, direction, steering_vector, BeamVector};
pub use link::{beamformed_gain, realize_link, serving_beams, Cluster, LinkRealization, LinkTable};
pub use state::{link_state_probs, pathloss_db, sample_state, LinkState, StateProbs};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("link is in outage")]
    OutageLink,
    #[error("element count {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("beam has {got} elements, carrier expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}
