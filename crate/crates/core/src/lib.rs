//! Desk-scale multi-agent reinforcement learning workbench.
//!
//! Implements agent-time reward redistribution: a causally masked attention
//! model that turns sparse, delayed, global team rewards into dense
//! per-agent, per-timestep rewards, together with the cooperative gridworld
//! environments, policy-gradient learners, and training harness needed to
//! study it.

pub mod checkpoint;
pub mod config;
pub mod agents;
pub mod envs;
pub mod episode;
pub mod nn;
pub mod redistribution;
pub mod rng;
pub mod trainer;

pub use episode::Episode;

pub use nn::{NnError, Tensor};
