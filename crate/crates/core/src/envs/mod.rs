//! Cooperative multi-agent environments with partial observability and
//! end-of-episode delayed global rewards.
//!
//! All three environments share the same contract: agents act
//! simultaneously, the team reward accumulates silently inside the state,
//! every non-terminal step emits exactly 0, and the final step of the
//! fixed-length episode emits the accumulated total.

mod coinline;
mod doorkey;
mod grid;
mod multiroom;

pub use coinline::CoinLine;
pub use doorkey::DoorKey;
pub use grid::{Direction, GridState, KeyLocation, Terrain};
pub use multiroom::MultiRoom;

use std::fmt;

/// Observation channels, one-hot per visible cell.
pub const CHANNELS: usize = 8;
pub const CH_EMPTY: usize = 0;
pub const CH_WALL: usize = 1;
pub const CH_DOOR_LOCKED: usize = 2;
pub const CH_DOOR_OPEN: usize = 3;
pub const CH_KEY: usize = 4;
pub const CH_COIN: usize = 5;
pub const CH_OTHER_AGENT: usize = 6;
pub const CH_SELF: usize = 7;

/// Default episode length.
pub const DEFAULT_HORIZON: usize = 200;

/// Flattened egocentric view plus the agent's own last action one-hot.
/// Values are all 0/1.
pub type AgentObservation = Vec<u8>;

/// Discrete agent actions across all environments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// Move one cell left (1-D coin line).
    Left,
    /// Move one cell right (1-D coin line).
    Right,
    /// Rotate 90 degrees counter-clockwise.
    TurnLeft,
    /// Rotate 90 degrees clockwise.
    TurnRight,
    /// Move one cell in the faced direction.
    Forward,
    /// Acquire the key in the faced cell.
    Pickup,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Left => "left",
            Action::Right => "right",
            Action::TurnLeft => "turn-left",
            Action::TurnRight => "turn-right",
            Action::Forward => "forward",
            Action::Pickup => "pickup",
        };
        write!(f, "{s}")
    }
}

/// Static description of an environment instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub n_agents: usize,
    pub action_set: Vec<Action>,
    pub obs_len: usize,
    pub gamma: f64,
    pub horizon: usize,
}

impl EnvSpec {
    pub fn n_actions(&self) -> usize {
        self.action_set.len()
    }
}

/// Result of one joint step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub observations: Vec<AgentObservation>,
    /// Global team reward emitted this step: 0 before the horizon, the
    /// accumulated total at the final step.
    pub reward: f64,
    pub done: bool,
}

/// Environment errors.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvError {
    /// `step` called after the episode finished.
    EpisodeDone,
    /// Action not in this environment's action set.
    InvalidAction(String),
    /// Layout generation failed after bounded retries.
    Generation(String),
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::EpisodeDone => write!(f, "state error: step after episode done"),
            EnvError::InvalidAction(m) => write!(f, "invalid action: {m}"),
            EnvError::Generation(m) => write!(f, "generation error: {m}"),
        }
    }
}

impl std::error::Error for EnvError {}

/// Common interface over the three environments.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode using the internal random stream.
    fn reset(&mut self) -> Vec<AgentObservation>;

    /// Reseeds the internal stream, then starts a new episode.
    fn reset_with_seed(&mut self, seed: u64) -> Vec<AgentObservation>;

    /// Advances one joint step.
    fn step(&mut self, actions: &[Action]) -> Result<StepResult, EnvError>;

    /// Current state snapshot.
    fn state(&self) -> &GridState;

    /// Per-agent attributed reward totals for the running episode.
    ///
    /// Training-time-only information: simultaneous collectors split the
    /// collection reward equally, so the totals sum to the team total.
    fn attributed_totals(&self) -> Vec<f64>;

    /// ASCII snapshot of the current state.
    fn render_ascii(&self) -> String {
        self.state().render_ascii()
    }
}

pub(crate) fn validate_actions(
    actions: &[Action],
    spec: &EnvSpec,
) -> Result<(), EnvError> {
    if actions.len() != spec.n_agents {
        return Err(EnvError::InvalidAction(format!(
            "{} actions for {} agents",
            actions.len(),
            spec.n_agents
        )));
    }
    for a in actions {
        if !spec.action_set.contains(a) {
            return Err(EnvError::InvalidAction(format!(
                "{a} not available in this environment"
            )));
        }
    }
    Ok(())
}
