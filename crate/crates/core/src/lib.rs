//! Decentralized multi-agent navigation: a disk-agent crowd simulator, an
//! ORCA baseline, behavior-cloned expert policies learned from pedestrian
//! trajectories, and PPO whose reward is shaped by distance to those experts.

pub mod bc;
pub mod cli;
pub mod data;
pub mod eval;
pub mod geom;
pub mod nn;
pub mod orca;
pub mod rl;
pub mod sim;

pub use geom::{clamp_speed, LocalFrame, Vec2};
