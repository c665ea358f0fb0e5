//! Agents that act in the recognition environment.

use rand::Rng as _;

use crate::automaton::MoveTrace;
use crate::env::{AgentAction, EnvState, EpisodeConfig, Observation};
use crate::seed::Rng;

pub trait Policy {
    /// Clears per-episode memory.
    fn reset(&mut self);

    /// Picks the next action. The first call of an episode receives the
    /// reset observation; later calls receive the observation produced by
    /// the previous move.
    fn act(&mut self, obs: &Observation, rng: &mut Rng) -> AgentAction;
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn reset(&mut self) {
        (**self).reset()
    }

    fn act(&mut self, obs: &Observation, rng: &mut Rng) -> AgentAction {
        (**self).act(obs, rng)
    }
}

/// Uniform over all actions, blind to observations.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    config: EpisodeConfig,
}

impl RandomPolicy {
    pub fn new(config: &EpisodeConfig) -> Self {
        Self {
            config: config.clone(),
        }
    }
}

impl Policy for RandomPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, _obs: &Observation, rng: &mut Rng) -> AgentAction {
        let profile = &self.config.profile;
        let index = rng.gen_range(0..profile.action_count());
        AgentAction::from_index(index, profile.heads, profile.way).expect("index in range")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    /// Undiscounted reward sum.
    pub reward: f64,
    pub length: usize,
    pub correct: bool,
    pub label: bool,
    pub moves: MoveTrace,
}

/// Plays one episode to termination from an already reset environment.
pub fn play_episode<P: Policy + ?Sized>(
    policy: &mut P,
    state: &mut EnvState,
    first: Observation,
    rng: &mut Rng,
) -> EpisodeSummary {
    policy.reset();
    let mut moves = MoveTrace::new(state.heads().len());
    let mut obs = first;
    let mut reward = 0.0;
    loop {
        let action = policy.act(&obs, rng);
        if let AgentAction::Move { head, direction } = action {
            moves.record(crate::automaton::HeadMove { direction, head });
        }
        let t = state.step(action).expect("policy emitted a valid action");
        reward += t.reward;
        if t.done {
            break;
        }
        obs = t.observation.expect("non-terminal steps observe");
    }
    EpisodeSummary {
        reward,
        length: state.actions_taken(),
        correct: state.is_correct().expect("episode finished"),
        label: state.label(),
        moves,
    }
}
