//! Episodic recognition environment.
//!
//! Each episode places one word on a marked tape and lets an agent move heads
//! one cell at a time. The agent sees only the symbol under the head it just
//! moved, and ends the episode by accepting or rejecting. Rewards are paid
//! on the terminal transition only.

use std::fmt;

use rand::Rng;

use crate::automaton::{Direction, Symbol, Tape, Way};
use crate::error::{Error, Result};
use crate::languages::LanguageProfile;

/// Terminal reward constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardSpec {
    pub correct: f64,
    pub wrong: f64,
    /// Wrong verdict given before any observation showed the end marker.
    pub wrong_before_end: f64,
    /// Correct rejection delivered on the very last allowed action.
    pub late_reject: f64,
    pub step: f64,
}

pub const REWARDS: RewardSpec = RewardSpec {
    correct: 1.0,
    wrong: -1.0,
    wrong_before_end: -10.0,
    late_reject: 0.1,
    step: 0.0,
};

/// Maximum actions per episode, `(2M + 1)·k + 1`.
pub fn step_limit(max_len: usize, heads: usize) -> usize {
    (2 * max_len + 1) * heads + 1
}

/// Number of agent actions, `2 + d·k`.
pub fn action_space_size(heads: usize, way: Way) -> usize {
    2 + way.direction_count() * heads
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentAction {
    AcceptHalt,
    RejectHalt,
    Move { head: usize, direction: Direction },
}

impl AgentAction {
    /// Maps an action index to an action: `0` accepts, `1` rejects, and
    /// `2 + head·d + j` moves `head` in the `j`-th direction of `way`.
    pub fn from_index(index: usize, heads: usize, way: Way) -> Option<Self> {
        let d = way.direction_count();
        match index {
            0 => Some(AgentAction::AcceptHalt),
            1 => Some(AgentAction::RejectHalt),
            i if i < 2 + d * heads => Some(AgentAction::Move {
                head: (i - 2) / d,
                direction: way.directions()[(i - 2) % d],
            }),
            _ => None,
        }
    }

    pub fn index(self, way: Way) -> usize {
        match self {
            AgentAction::AcceptHalt => 0,
            AgentAction::RejectHalt => 1,
            AgentAction::Move { head, direction } => {
                let j = way
                    .directions()
                    .iter()
                    .position(|&d| d == direction)
                    .expect("direction allowed by way");
                2 + head * way.direction_count() + j
            }
        }
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentAction::AcceptHalt => f.write_str("accept"),
            AgentAction::RejectHalt => f.write_str("reject"),
            AgentAction::Move { head, direction } => write!(f, "move h{head} {direction}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    pub symbol: Symbol,
    pub head: usize,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeConfig {
    pub profile: LanguageProfile,
    pub max_len: usize,
    pub limit: usize,
}

impl EpisodeConfig {
    pub fn new(profile: LanguageProfile, max_len: usize) -> Self {
        let limit = step_limit(max_len, profile.heads);
        Self {
            profile,
            max_len,
            limit,
        }
    }

    pub fn action_count(&self) -> usize {
        self.profile.action_count()
    }
}

/// Result of one environment step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    /// Present for moves, including a move that exhausts the action budget.
    pub observation: Option<Observation>,
    pub reward: f64,
    pub done: bool,
}

/// State of one running episode.
#[derive(Clone, Debug)]
pub struct EnvState {
    tape: Tape,
    label: bool,
    heads: Vec<usize>,
    way: Way,
    limit: usize,
    end_marker: Symbol,
    actions_taken: usize,
    end_seen: bool,
    done: bool,
    accepted: Option<bool>,
}

impl EnvState {
    /// Starts an episode on a freshly sampled input.
    pub fn reset<R: Rng + ?Sized>(config: &EpisodeConfig, rng: &mut R) -> (Self, Observation) {
        let (word, label) = config.profile.sample_episode_input(config.max_len, rng);
        Self::with_input(config, &word, label).expect("sampled words are over the alphabet")
    }

    /// Starts an episode on a given input. All heads sit on index 1; the
    /// initial observation reads that cell under head 0.
    pub fn with_input(config: &EpisodeConfig, word: &[Symbol], label: bool) -> Result<(Self, Observation)> {
        let tape = Tape::new(word, &config.profile.alphabet)?;
        let end_marker = config.profile.alphabet.end_marker();
        let symbol = tape.read(1);
        let state = Self {
            tape,
            label,
            heads: vec![1; config.profile.heads],
            way: config.profile.way,
            limit: config.limit,
            end_marker,
            actions_taken: 0,
            end_seen: symbol == end_marker,
            done: false,
            accepted: None,
        };
        let obs = Observation {
            symbol,
            head: 0,
            direction: Direction::Stay,
        };
        Ok((state, obs))
    }

    pub fn step(&mut self, action: AgentAction) -> Result<Transition> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        match action {
            AgentAction::Move { head, direction } => {
                if head >= self.heads.len() || !self.way.allows(direction) {
                    return Err(Error::InvalidAction(action));
                }
                self.actions_taken += 1;
                let position = self.tape.shift(self.heads[head], direction);
                self.heads[head] = position;
                let symbol = self.tape.read(position);
                if symbol == self.end_marker {
                    self.end_seen = true;
                }
                let observation = Some(Observation {
                    symbol,
                    head,
                    direction,
                });
                if self.actions_taken == self.limit {
                    // out of actions: an implicit rejection
                    let reward = self.finish(false);
                    return Ok(Transition {
                        observation,
                        reward,
                        done: true,
                    });
                }
                Ok(Transition {
                    observation,
                    reward: REWARDS.step,
                    done: false,
                })
            }
            AgentAction::AcceptHalt | AgentAction::RejectHalt => {
                self.actions_taken += 1;
                let reward = self.finish(action == AgentAction::AcceptHalt);
                Ok(Transition {
                    observation: None,
                    reward,
                    done: true,
                })
            }
        }
    }

    fn finish(&mut self, accept: bool) -> f64 {
        self.done = true;
        self.accepted = Some(accept);
        if accept == self.label {
            if !accept && self.actions_taken == self.limit {
                REWARDS.late_reject
            } else {
                REWARDS.correct
            }
        } else if self.end_seen {
            REWARDS.wrong
        } else {
            REWARDS.wrong_before_end
        }
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn label(&self) -> bool {
        self.label
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn actions_taken(&self) -> usize {
        self.actions_taken
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn end_seen(&self) -> bool {
        self.end_seen
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// The agent's verdict once the episode is over; a timeout counts as a
    /// rejection.
    pub fn accepted(&self) -> Option<bool> {
        self.accepted
    }

    pub fn is_correct(&self) -> Option<bool> {
        self.accepted.map(|a| a == self.label)
    }
}
