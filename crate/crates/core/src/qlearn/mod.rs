//! Deep recurrent Q-learning.
//!
//! The agent folds each observation into a GRU hidden state and scores the
//! `2 + d·k` actions with a one-hidden-layer arctan network on top of it.
//! Whole episodes are replayed from a bounded buffer and unrolled from a zero
//! hidden state; TD targets use a periodically synchronized copy of the
//! Q-head evaluated on the online unroll.

mod adam;
mod network;
mod replay;

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use network::{GruCache, GruParams, HeadCache, Matrix, QHeadParams, QNetwork};
pub use replay::{EpisodeExperience, ReplayBuffer};

use crate::env::{AgentAction, EnvState, EpisodeConfig, Observation, REWARDS};
use crate::error::{Error, Result};
use crate::languages::{LanguageId, LanguageProfile};
use crate::policy::Policy;
use crate::seed::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    /// Episodes per gradient update.
    pub batch_episodes: usize,
    /// Gradient updates between target synchronizations.
    pub target_sync_period: usize,
    pub max_env_steps: usize,
    /// Replay capacity in transitions.
    pub buffer_capacity: usize,
    /// GRU output size.
    pub hidden: usize,
    /// Width of the arctan layer.
    pub head_width: usize,
    /// Episodes in the moving averages of the training history.
    pub average_window: usize,
    /// Environment steps between history rows.
    pub history_interval: usize,
    /// Environment steps between greedy evaluations; 0 disables them.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Stop once a greedy evaluation reaches this prediction rate.
    pub stop_prediction_rate: Option<f64>,
    /// With `stop_prediction_rate`, also require at most this mean length.
    pub stop_max_length: Option<f64>,
    /// Rescale gradients whose global norm exceeds this value.
    pub grad_clip: Option<f64>,
    /// Clamp bootstrapped values to the range of achievable returns.
    pub clamp_targets: bool,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            gamma: 0.999,
            epsilon: 0.05,
            learning_rate: 3e-4,
            batch_episodes: 8,
            target_sync_period: 1000,
            max_env_steps: 2_000_000,
            buffer_capacity: 25_000,
            hidden: 32,
            head_width: 32,
            average_window: 1000,
            history_interval: 5000,
            eval_interval: 100_000,
            eval_episodes: 1000,
            stop_prediction_rate: None,
            stop_max_length: None,
            grad_clip: None,
            clamp_targets: true,
        }
    }
}

impl QConfig {
    /// Clamp range for bootstrapped values, if enabled.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.clamp_targets.then_some(RETURN_BOUNDS)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail(format!("q.epsilon must be in [0, 1], got {}", self.epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("q.gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("q.learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, value) in [
            ("q.batch_episodes", self.batch_episodes),
            ("q.target_sync_period", self.target_sync_period),
            ("q.buffer_capacity", self.buffer_capacity),
            ("q.hidden", self.hidden),
            ("q.head_width", self.head_width),
            ("q.average_window", self.average_window),
            ("q.history_interval", self.history_interval),
            ("q.eval_episodes", self.eval_episodes),
        ] {
            if value == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if let Some(rate) = self.stop_prediction_rate {
            if !(0.0..=1.0).contains(&rate) {
                return fail(format!("q.stop_prediction_rate must be in [0, 1], got {rate}"));
            }
        }
        if let Some(length) = self.stop_max_length {
            if !(length > 0.0) {
                return fail(format!("q.stop_max_length must be positive, got {length}"));
            }
        }
        if let Some(clip) = self.grad_clip {
            if !(clip > 0.0) {
                return fail(format!("q.grad_clip must be positive, got {clip}"));
            }
        }
        Ok(())
    }
}

/// Width of the observation encoding, `m + k + d`.
pub fn encoding_width(profile: &LanguageProfile) -> usize {
    profile.alphabet.size() + profile.heads + profile.way.direction_count()
}

/// One-hot symbol, then one-hot head, then one-hot direction.
pub fn encode_observation(obs: &Observation, profile: &LanguageProfile) -> Vec<f64> {
    let m = profile.alphabet.size();
    let k = profile.heads;
    let mut v = vec![0.0; encoding_width(profile)];
    v[obs.symbol] = 1.0;
    v[m + obs.head] = 1.0;
    let j = profile
        .way
        .directions()
        .iter()
        .position(|&d| d == obs.direction)
        .expect("observed direction is allowed");
    v[m + k + j] = 1.0;
    v
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice over Q-values.
pub fn select_action(q: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}

pub fn sync_target(online: &QNetwork, target: &mut QNetwork) {
    target.clone_from(online);
}

/// Recurrent Q-agent acting ε-greedily. With `epsilon = 0` it is greedy and
/// deterministic.
#[derive(Clone, Debug)]
pub struct QAgent<'a> {
    net: &'a QNetwork,
    profile: LanguageProfile,
    epsilon: f64,
    hidden: Vec<f64>,
    last_input: Vec<f64>,
}

impl<'a> QAgent<'a> {
    pub fn new(net: &'a QNetwork, profile: &LanguageProfile, epsilon: f64) -> Self {
        Self {
            net,
            profile: profile.clone(),
            epsilon,
            hidden: vec![0.0; net.gru.hidden_dim()],
            last_input: Vec::new(),
        }
    }

    /// Encoding of the observation consumed by the latest `act`.
    pub fn last_input(&self) -> &[f64] {
        &self.last_input
    }

    /// Consumes an observation and returns the chosen action index.
    pub fn act_index(&mut self, obs: &Observation, rng: &mut Rng) -> usize {
        self.last_input = encode_observation(obs, &self.profile);
        self.hidden = self.net.gru.forward(&self.hidden, &self.last_input);
        let q = self.net.head.q_values(&self.hidden);
        select_action(&q, self.epsilon, rng)
    }
}

impl Policy for QAgent<'_> {
    fn reset(&mut self) {
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
    }

    fn act(&mut self, obs: &Observation, rng: &mut Rng) -> AgentAction {
        let index = self.act_index(obs, rng);
        AgentAction::from_index(index, self.profile.heads, self.profile.way).expect("network width matches actions")
    }
}

/// Forward pass of one episode through the online network.
struct Unrolled {
    gru: Vec<GruCache>,
    head: Vec<HeadCache>,
}

fn unroll(net: &QNetwork, episode: &EpisodeExperience) -> Unrolled {
    let mut h = vec![0.0; net.gru.hidden_dim()];
    let mut gru = Vec::with_capacity(episode.len());
    let mut head = Vec::with_capacity(episode.len());
    for x in &episode.inputs {
        let cache = net.gru.forward_cached(&h, x);
        h.clone_from(&cache.h);
        head.push(net.head.forward_cached(&cache.h));
        gru.push(cache);
    }
    Unrolled { gru, head }
}

/// Every return lies in `[−10, 1]`: one nonzero reward per episode, discounted.
pub const RETURN_BOUNDS: (f64, f64) = (REWARDS.wrong_before_end, REWARDS.correct);

/// `y_t = r_t + γ·max_a Q_target(h_{t+1}, a)` for non-terminal `t`, where
/// `h_{t+1}` comes from the online unroll. With `bounds`, the bootstrapped max
/// is clamped first; otherwise the max over noisy estimates drifts above any
/// reachable return wherever the hidden state stops changing.
fn targets_from(
    unrolled: &Unrolled,
    episode: &EpisodeExperience,
    target_head: &QHeadParams,
    gamma: f64,
    bounds: Option<(f64, f64)>,
) -> Vec<f64> {
    (0..episode.len())
        .map(|t| {
            if episode.done(t) {
                episode.rewards[t]
            } else {
                let q = target_head.q_values(&unrolled.gru[t + 1].h);
                let mut best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if let Some((lo, hi)) = bounds {
                    best = best.clamp(lo, hi);
                }
                episode.rewards[t] + gamma * best
            }
        })
        .collect()
}

/// TD targets for a batch, treated as constants by the gradient.
pub fn td_targets(
    online: &QNetwork,
    target: &QNetwork,
    episodes: &[&EpisodeExperience],
    gamma: f64,
    bounds: Option<(f64, f64)>,
) -> Vec<Vec<f64>> {
    episodes
        .iter()
        .map(|e| targets_from(&unroll(online, e), e, &target.head, gamma, bounds))
        .collect()
}

fn backprop(net: &QNetwork, unrolled: &Unrolled, episode: &EpisodeExperience, targets: &[f64], scale: f64, grad: &mut QNetwork) -> f64 {
    let mut sq = 0.0;
    let mut dh_next = vec![0.0; net.gru.hidden_dim()];
    for t in (0..episode.len()).rev() {
        let action = episode.actions[t];
        let err = unrolled.head[t].q[action] - targets[t];
        sq += err * err;
        let mut dq = vec![0.0; net.head.action_count()];
        dq[action] = 2.0 * err * scale;
        let dh_head = net.head.backward(&unrolled.head[t], &dq, &mut grad.head);
        for (d, h) in dh_next.iter_mut().zip(&dh_head) {
            *d += h;
        }
        dh_next = net.gru.backward(&unrolled.gru[t], &dh_next, &mut grad.gru);
    }
    sq
}

/// Mean squared TD error over all transitions of the batch and its gradient
/// with respect to the online parameters, for fixed targets.
pub fn loss_and_grad(net: &QNetwork, episodes: &[&EpisodeExperience], targets: &[Vec<f64>]) -> (f64, QNetwork) {
    let total: usize = episodes.iter().map(|e| e.len()).sum();
    let scale = 1.0 / total as f64;
    let mut grad = net.zeros_like();
    let mut sq = 0.0;
    for (episode, y) in episodes.iter().zip(targets) {
        sq += backprop(net, &unroll(net, episode), episode, y, scale, &mut grad);
    }
    (sq * scale, grad)
}

/// Loss only, for fixed targets.
pub fn loss(net: &QNetwork, episodes: &[&EpisodeExperience], targets: &[Vec<f64>]) -> f64 {
    let total: usize = episodes.iter().map(|e| e.len()).sum();
    let mut sq = 0.0;
    for (episode, y) in episodes.iter().zip(targets) {
        let unrolled = unroll(net, episode);
        for t in 0..episode.len() {
            let err = unrolled.head[t].q[episode.actions[t]] - y[t];
            sq += err * err;
        }
    }
    sq / total as f64
}

fn clip_gradient(grad: &mut QNetwork, max_norm: f64) {
    let norm = grad
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for t in grad.tensors_mut() {
            t.data.iter_mut().for_each(|g| *g *= s);
        }
    }
}

/// One gradient update on a uniformly sampled batch of episodes. Returns the
/// pre-update loss, or `None` while the buffer holds too few episodes.
pub fn train_step(
    buffer: &ReplayBuffer,
    online: &mut QNetwork,
    target: &QNetwork,
    optimizer: &mut Adam,
    config: &QConfig,
    rng: &mut Rng,
) -> Option<f64> {
    if buffer.episode_count() < config.batch_episodes {
        return None;
    }
    let batch = buffer.sample(config.batch_episodes, rng);
    let total: usize = batch.iter().map(|e| e.len()).sum();
    let scale = 1.0 / total as f64;
    let mut grad = online.zeros_like();
    let mut sq = 0.0;
    for episode in batch {
        let unrolled = unroll(online, episode);
        let y = targets_from(&unrolled, episode, &target.head, config.gamma, config.bounds());
        sq += backprop(online, &unrolled, episode, &y, scale, &mut grad);
    }
    if let Some(clip) = config.grad_clip {
        clip_gradient(&mut grad, clip);
    }
    optimizer.step(online, &grad);
    Some(sq * scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QHistoryRow {
    pub timesteps: u64,
    pub avg_prediction_rate: f64,
    pub avg_episode_length: f64,
}

pub fn write_history(history: &[QHistoryRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in history {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct QOutcome {
    pub network: QNetwork,
    pub history: Vec<QHistoryRow>,
    pub env_steps: u64,
    pub episodes: u64,
    pub train_steps: u64,
    /// Best greedy prediction rate seen by the periodic evaluations.
    pub best_eval: Option<f64>,
}

/// Greedy prediction rate and mean length over fresh episodes.
pub fn greedy_rate(net: &QNetwork, episode: &EpisodeConfig, episodes: usize, rng: &mut Rng) -> (f64, f64) {
    let mut agent = QAgent::new(net, &episode.profile, 0.0);
    let mut correct = 0usize;
    let mut length = 0usize;
    for _ in 0..episodes {
        let (mut state, obs) = EnvState::reset(episode, rng);
        let s = crate::policy::play_episode(&mut agent, &mut state, obs, rng);
        correct += s.correct as usize;
        length += s.length;
    }
    (correct as f64 / episodes as f64, length as f64 / episodes as f64)
}

/// Rates within this margin count as equal when picking snapshots.
const RATE_TIE: f64 = 0.005;

/// Whether a `(rate, length)` evaluation beats the current best: a clearly
/// higher rate, or an equal rate with shorter episodes.
fn improves(candidate: (f64, f64), best: (f64, f64)) -> bool {
    candidate.0 > best.0 + RATE_TIE || (candidate.0 >= best.0 - RATE_TIE && candidate.1 < best.1)
}

/// Trains a recurrent Q-agent by ε-greedy play and episode replay.
pub fn train_q(profile: &LanguageProfile, max_len: usize, config: &QConfig, master_seed: u64) -> Result<QOutcome> {
    config.validate()?;
    let episode = EpisodeConfig::new(profile.clone(), max_len);
    if episode.limit > config.buffer_capacity {
        return Err(Error::Config(format!(
            "q.buffer_capacity {} cannot hold one {}-step episode",
            config.buffer_capacity, episode.limit
        )));
    }
    let mut env_rng = seed::stream(master_seed, "q-env", 0);
    let mut explore_rng = seed::stream(master_seed, "q-explore", 0);
    let mut batch_rng = seed::stream(master_seed, "q-batch", 0);
    let mut online = QNetwork::init(
        encoding_width(profile),
        config.hidden,
        config.head_width,
        profile.action_count(),
        &mut seed::stream(master_seed, "q-init", 0),
    );
    let mut target = online.clone();
    let mut optimizer = Adam::new(&online, config.learning_rate);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);

    let mut window: VecDeque<(bool, usize)> = VecDeque::with_capacity(config.average_window);
    let mut window_correct = 0usize;
    let mut window_length = 0usize;
    let mut history = Vec::new();
    let mut next_history = config.history_interval as u64;
    let mut next_eval = config.eval_interval as u64;
    let mut best: Option<(f64, f64, QNetwork)> = None;
    let (mut env_steps, mut episodes, mut train_steps) = (0u64, 0u64, 0u64);

    while env_steps < config.max_env_steps as u64 {
        let mut agent = QAgent::new(&online, profile, config.epsilon);
        let (mut state, mut obs) = EnvState::reset(&episode, &mut env_rng);
        let mut experience = EpisodeExperience::default();
        loop {
            let action = agent.act_index(&obs, &mut explore_rng);
            let t = state
                .step(AgentAction::from_index(action, profile.heads, profile.way).expect("valid index"))
                .expect("episode running");
            experience.push(agent.last_input().to_vec(), action, t.reward);
            if t.done {
                break;
            }
            obs = t.observation.expect("moves observe");
        }
        let length = experience.len();
        let correct = state.is_correct().expect("finished");
        env_steps += length as u64;
        episodes += 1;
        buffer.push(experience);

        window.push_back((correct, length));
        window_correct += correct as usize;
        window_length += length;
        if window.len() > config.average_window {
            let (c, l) = window.pop_front().expect("non-empty");
            window_correct -= c as usize;
            window_length -= l;
        }

        if buffer.is_full() {
            if train_step(&buffer, &mut online, &target, &mut optimizer, config, &mut batch_rng).is_some() {
                train_steps += 1;
                if train_steps % config.target_sync_period as u64 == 0 {
                    sync_target(&online, &mut target);
                }
            }
        }

        if env_steps >= next_history {
            next_history += config.history_interval as u64;
            let row = QHistoryRow {
                timesteps: env_steps,
                avg_prediction_rate: window_correct as f64 / window.len() as f64,
                avg_episode_length: window_length as f64 / window.len() as f64,
            };
            log::debug!(
                "{} steps: prediction {:.3}, length {:.2}",
                row.timesteps,
                row.avg_prediction_rate,
                row.avg_episode_length
            );
            history.push(row);
        }

        if config.eval_interval > 0 && env_steps >= next_eval {
            next_eval += config.eval_interval as u64;
            let mut eval_rng = seed::stream(master_seed, "q-eval", env_steps);
            let (rate, length) = greedy_rate(&online, &episode, config.eval_episodes, &mut eval_rng);
            log::info!("{env_steps} steps: greedy prediction rate {rate:.4}, length {length:.2}");
            if best.as_ref().map_or(true, |(r, l, _)| improves((rate, length), (*r, *l))) {
                best = Some((rate, length, online.clone()));
            }
            let short_enough = config.stop_max_length.map_or(true, |max| length <= max);
            if config.stop_prediction_rate.is_some_and(|stop| rate >= stop) && short_enough {
                break;
            }
        }
    }

    let (best_eval, network) = match best {
        Some((rate, _, net)) => (Some(rate), net),
        None => (None, online),
    };
    Ok(QOutcome {
        network,
        history,
        env_steps,
        episodes,
        train_steps,
        best_eval,
    })
}

/// Saved Q-network with the shapes needed to rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QCheckpoint {
    pub version: u32,
    pub language: LanguageId,
    pub max_len: usize,
    pub network: QNetwork,
}

impl QCheckpoint {
    pub const VERSION: u32 = 1;

    pub fn new(language: LanguageId, max_len: usize, network: QNetwork) -> Self {
        Self {
            version: Self::VERSION,
            language,
            max_len,
            network,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let checkpoint: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if checkpoint.version != Self::VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported checkpoint version {}",
                path.display(),
                checkpoint.version
            )));
        }
        checkpoint.validate()?;
        Ok(checkpoint)
    }

    fn validate(&self) -> Result<()> {
        let profile = self.language.profile();
        let net = &self.network;
        let hidden = net.gru.hidden_dim();
        let input = net.gru.input_dim();
        let width = net.head.w1.rows;
        let shapes_ok = input == encoding_width(&profile)
            && net.head.action_count() == profile.action_count()
            && net.gru.tensors().iter().enumerate().all(|(i, t)| {
                let cols = [input, hidden, 1][i % 3];
                t.rows == hidden && t.cols == cols && t.data.len() == hidden * cols
            })
            && net.head.w1.cols == hidden
            && net.head.b1.rows == width
            && net.head.w2.cols == width
            && net.head.b2.rows == net.head.action_count()
            && net.head.tensors().iter().all(|t| t.data.len() == t.rows * t.cols);
        if !shapes_ok {
            return Err(Error::Config("checkpoint tensor shapes do not match the language".into()));
        }
        Ok(())
    }
}
