use std::collections::VecDeque;

use rand::Rng as _;

use crate::seed::Rng;

/// One complete episode. Entry `t` holds the observation the agent acted
/// on, the action it took, and the reward it got; the transition tuple
/// `(s_t, a_t, r_t, s_{t+1}, done_t)` reads `s_{t+1}` from entry `t + 1`.
/// Only the last transition is terminal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeExperience {
    pub inputs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl EpisodeExperience {
    pub fn push(&mut self, input: Vec<f64>, action: usize, reward: f64) {
        self.inputs.push(input);
        self.actions.push(action);
        self.rewards.push(reward);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn done(&self, t: usize) -> bool {
        t + 1 == self.len()
    }
}

/// Episode queue bounded by a total transition count. The oldest episodes
/// are evicted first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    episodes: VecDeque<EpisodeExperience>,
    capacity: usize,
    transitions: usize,
    received: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            episodes: VecDeque::new(),
            capacity,
            transitions: 0,
            received: 0,
        }
    }

    pub fn push(&mut self, episode: EpisodeExperience) {
        assert!(episode.len() <= self.capacity, "episode longer than the buffer");
        self.transitions += episode.len();
        self.received += episode.len();
        self.episodes.push_back(episode);
        while self.transitions > self.capacity {
            let old = self.episodes.pop_front().expect("non-empty while over capacity");
            self.transitions -= old.len();
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stored transitions.
    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    /// True once at least `capacity` transitions have been pushed.
    pub fn is_full(&self) -> bool {
        self.received >= self.capacity
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeExperience> {
        self.episodes.iter()
    }

    /// Draws `count` episodes uniformly with replacement.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Vec<&EpisodeExperience> {
        (0..count)
            .map(|_| &self.episodes[rng.gen_range(0..self.episodes.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(len: usize, tag: f64) -> EpisodeExperience {
        let mut e = EpisodeExperience::default();
        for t in 0..len {
            e.push(vec![tag], 0, if t + 1 == len { 1.0 } else { 0.0 });
        }
        e
    }

    #[test]
    fn eviction_is_fifo_by_episode() {
        let mut buffer = ReplayBuffer::new(10);
        buffer.push(episode(4, 0.0));
        buffer.push(episode(4, 1.0));
        assert!(!buffer.is_full());
        buffer.push(episode(4, 2.0));
        assert_eq!(buffer.transitions(), 8);
        assert!(buffer.is_full());
        let tags: Vec<f64> = buffer.episodes().map(|e| e.inputs[0][0]).collect();
        assert_eq!(tags, vec![1.0, 2.0]);
    }

    #[test]
    fn never_exceeds_capacity() {
        let mut buffer = ReplayBuffer::new(25_000);
        for i in 0..20_000 {
            buffer.push(episode(1 + i % 42, 0.0));
            assert!(buffer.transitions() <= 25_000);
        }
    }

    #[test]
    fn only_the_last_transition_is_terminal() {
        let e = episode(3, 0.0);
        assert_eq!((0..3).map(|t| e.done(t)).collect::<Vec<_>>(), vec![false, false, true]);
    }
}
