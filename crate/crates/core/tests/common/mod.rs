//! Oracles shared by the integration test targets. Nothing here calls the
//! code under test except to feed it inputs.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::Rng as _;
use sma_core::automaton::Way;
use sma_core::env::{AgentAction, EnvState, EpisodeConfig};
use sma_core::languages::LanguageId;
use sma_core::qlearn::{self, EpisodeExperience, QNetwork};
use sma_core::seed;

pub fn all_words(symbols: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut words = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|w: &Vec<usize>| {
                (0..symbols).map(move |s| {
                    let mut w = w.clone();
                    w.push(s);
                    w
                })
            })
            .collect();
        words.extend(frontier.iter().cloned());
    }
    words
}

/// Members of length ≤ `max_len`, built from the set-builder definitions.
pub fn members_by_construction(id: LanguageId, max_len: usize) -> HashSet<Vec<usize>> {
    let binary = all_words(2, max_len);
    let mut set = HashSet::new();
    match id {
        LanguageId::L1 => {
            for w in binary.iter().filter(|w| w.len() + 2 <= max_len) {
                set.insert([vec![0], w.clone(), vec![1]].concat());
            }
        }
        LanguageId::L2 => {
            set.extend(binary.into_iter().filter(|w| w.len() % 2 == 0));
        }
        LanguageId::L3 => {
            for n in 0..=max_len / 2 {
                set.insert([vec![0; n], vec![1; n]].concat());
            }
        }
        LanguageId::L4 => {
            for u in binary.iter().filter(|u| 2 * u.len() <= max_len) {
                let rev: Vec<usize> = u.iter().rev().copied().collect();
                set.insert([u.clone(), rev.clone()].concat());
                if 2 * u.len() < max_len {
                    for c in 0..2 {
                        set.insert([u.clone(), vec![c], rev.clone()].concat());
                    }
                }
            }
        }
        LanguageId::L5 => {
            for n in 0..=max_len / 3 {
                set.insert([vec![0; n], vec![1; n], vec![2; n]].concat());
            }
        }
        LanguageId::L6 => {
            for w in binary.iter().filter(|w| 2 * w.len() <= max_len) {
                set.insert([w.clone(), w.clone()].concat());
            }
        }
    }
    set
}

/// Number of words of length ≤ `max_len` on which `membership` disagrees with
/// the constructive definition.
pub fn membership_disagreements(id: LanguageId, max_len: usize) -> usize {
    let members = members_by_construction(id, max_len);
    all_words(id.alphabet().input_len(), max_len)
        .iter()
        .filter(|w| id.membership(w).unwrap() != members.contains(*w))
        .count()
}

/// Short random L4 episodes: a few moves, then a halt.
pub fn random_episodes(net_seed: u64, count: usize) -> Vec<EpisodeExperience> {
    let profile = LanguageId::L4.profile();
    let config = EpisodeConfig::new(profile.clone(), 6);
    let mut rng = seed::stream(net_seed, "episodes", 0);
    (0..count)
        .map(|_| {
            let (mut state, mut obs) = EnvState::reset(&config, &mut rng);
            let mut e = EpisodeExperience::default();
            loop {
                let index = if e.len() < 4 { rng.gen_range(2..profile.action_count()) } else { rng.gen_range(0..2) };
                let action = AgentAction::from_index(index, profile.heads, profile.way).unwrap();
                let t = state.step(action).unwrap();
                e.push(qlearn::encode_observation(&obs, &profile), index, t.reward);
                if t.done {
                    break e;
                }
                obs = t.observation.unwrap();
            }
        })
        .collect()
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Worst relative error between backpropagated and central-difference
/// gradients of the TD loss, H = 4.
pub fn worst_gradient_error(trial: u64) -> f64 {
    let mut rng = seed::stream(trial, "gradcheck", 0);
    let profile = LanguageId::L4.profile();
    let net = QNetwork::init(qlearn::encoding_width(&profile), 4, 5, profile.action_count(), &mut rng);
    let target = QNetwork::init(qlearn::encoding_width(&profile), 4, 5, profile.action_count(), &mut rng);
    let episodes = random_episodes(trial, 3);
    let batch: Vec<&EpisodeExperience> = episodes.iter().collect();
    let targets = qlearn::td_targets(&net, &target, &batch, 0.999, None);
    let (loss, grad) = qlearn::loss_and_grad(&net, &batch, &targets);
    assert!((loss - qlearn::loss(&net, &batch, &targets)).abs() < 1e-12);

    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for (ti, g) in grad.tensors().iter().enumerate() {
        for i in 0..g.data.len() {
            let mut plus = net.clone();
            plus.tensors_mut()[ti].data[i] += step;
            let mut minus = net.clone();
            minus.tensors_mut()[ti].data[i] -= step;
            let numeric = (qlearn::loss(&plus, &batch, &targets) - qlearn::loss(&minus, &batch, &targets)) / (2.0 * step);
            worst = worst.max(relative_error(g.data[i], numeric));
        }
    }
    worst
}

/// Updates needed to push the TD loss of a frozen two-episode L1 buffer below
/// `threshold`, or `None` within `budget`.
pub fn overfit_updates(threshold: f64, budget: usize) -> Option<usize> {
    let profile = LanguageId::L1.profile();
    let episodes = {
        let config = EpisodeConfig::new(profile.clone(), 20);
        let mut rng = seed::stream(5, "overfit", 0);
        let mut out = Vec::new();
        while out.len() < 2 {
            let (mut state, mut obs) = EnvState::reset(&config, &mut rng);
            let mut e = EpisodeExperience::default();
            loop {
                let index = if e.len() < 3 { 3 } else { rng.gen_range(0..2) };
                let t = state.step(AgentAction::from_index(index, 1, Way::OneWay).unwrap()).unwrap();
                e.push(qlearn::encode_observation(&obs, &profile), index, t.reward);
                if t.done {
                    break;
                }
                obs = t.observation.unwrap();
            }
            out.push(e);
        }
        out
    };
    let mut buffer = qlearn::ReplayBuffer::new(100);
    for e in &episodes {
        buffer.push(e.clone());
    }
    let config = qlearn::QConfig {
        batch_episodes: 2,
        learning_rate: 1e-3,
        ..qlearn::QConfig::default()
    };
    let mut rng = seed::stream(5, "overfit-batch", 0);
    let mut online = QNetwork::init(qlearn::encoding_width(&profile), 32, 32, 4, &mut seed::stream(5, "net", 0));
    let mut target = online.clone();
    let mut adam = qlearn::Adam::new(&online, config.learning_rate);
    let batch: Vec<&EpisodeExperience> = episodes.iter().collect();
    for update in 1..=budget {
        qlearn::train_step(&buffer, &mut online, &target, &mut adam, &config, &mut rng).unwrap();
        if update % config.target_sync_period == 0 {
            qlearn::sync_target(&online, &mut target);
        }
        let targets = qlearn::td_targets(&online, &target, &batch, config.gamma, config.bounds());
        let loss = qlearn::loss(&online, &batch, &targets);
        assert!(loss.is_finite() && loss >= 0.0);
        if loss < threshold {
            return Some(update);
        }
    }
    None
}
