//! Age-of-information scheduling over Markov fading channels.
//!
//! Sensors share a limited number of channels and each has its own average
//! power budget. The crate computes the Lagrangian lower bound on network
//! AoI, the per-sensor randomized policies that attain it, and simulates the
//! resulting truncated scheduler against simple baselines.

pub mod channel;
pub mod cmdp;
pub mod dual;
pub mod lp;
pub mod oracle;
pub mod sim;

pub use channel::{ChannelError, ChannelModel};
pub use cmdp::{
    extract_policy, policy_metrics, solve_decoupled, CmdpError, OccupancyMeasure, PolicyMetrics,
    SensorSpec, StationaryPolicy,
};
