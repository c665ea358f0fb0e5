//! Implementation-independent checks: generative language definitions,
//! classical DFAs, and finite-difference gradients.

mod common;

use common::{all_words, members_by_construction};
use sma_core::automaton::{Alphabet, Direction, HeadMove, SmaSpec, Tape, Verdict, Way};
use sma_core::languages::LanguageId;

#[test]
fn membership_matches_constructive_definitions_up_to_length_12() {
    for id in LanguageId::ALL {
        let members = members_by_construction(id, 12);
        let words = all_words(id.alphabet().input_len(), 12);
        let mut count = 0;
        for word in &words {
            let expected = members.contains(word);
            assert_eq!(id.membership(word).unwrap(), expected, "{id} {word:?}");
            count += expected as usize;
        }
        assert_eq!(count, members.len());
    }
}

/// Classical DFA over input symbols only.
struct Dfa {
    start: usize,
    accept: Vec<bool>,
    next: Vec<[usize; 2]>,
}

impl Dfa {
    fn accepts(&self, word: &[usize]) -> bool {
        self.accept[word.iter().fold(self.start, |q, &s| self.next[q][s])]
    }
}

fn parity_dfa() -> Dfa {
    Dfa {
        start: 0,
        accept: vec![true, false],
        next: vec![[1, 1], [0, 0]],
    }
}

/// 0w1: 0 start, 1 dead, 2 "seen 0, last 0", 3 "last 1"
fn zero_w_one_dfa() -> Dfa {
    Dfa {
        start: 0,
        accept: vec![false, false, false, true],
        next: vec![[2, 1], [1, 1], [2, 3], [2, 3]],
    }
}

fn one_head(states: Vec<(bool, Vec<Option<usize>>, Direction)>) -> SmaSpec {
    let accept = states.iter().map(|s| s.0).collect();
    let delta = states.iter().map(|s| s.1.clone()).collect();
    let heads = states.iter().map(|s| HeadMove::new(s.2, 0)).collect();
    SmaSpec::new(1, Way::OneWay, accept, delta, heads).unwrap()
}

fn sma_even_length() -> SmaSpec {
    let walk = |to| vec![Some(to), Some(to), None, None];
    one_head(vec![
        (true, walk(1), Direction::Stay),
        (false, walk(2), Direction::Right),
        (true, walk(1), Direction::Right),
    ])
}

fn sma_zero_w_one() -> SmaSpec {
    let walk = vec![Some(2), Some(3), None, None];
    one_head(vec![
        (false, vec![Some(1), None, None, None], Direction::Stay),
        (false, walk.clone(), Direction::Right),
        (false, walk.clone(), Direction::Right),
        (true, walk, Direction::Right),
    ])
}

#[test]
fn one_head_machines_match_classical_dfas() {
    let ab = Alphabet::binary();
    for (sma, dfa) in [(sma_even_length(), parity_dfa()), (sma_zero_w_one(), zero_w_one_dfa())] {
        for word in all_words(2, 10) {
            let tape = Tape::new(&word, &ab).unwrap();
            let out = sma.run(&tape, 1000);
            assert_ne!(out.verdict, Verdict::Timeout);
            // one transition per symbol at most, the end marker never fires one
            assert!(out.steps_used <= word.len());
            assert_eq!(out.verdict == Verdict::Accepted, dfa.accepts(&word), "{word:?}");
        }
    }
}

#[test]
fn all_right_machine_is_a_dfa_on_the_tail() {
    // every state moves right, so cell 1 is never read
    let ab = Alphabet::binary();
    let dfa = parity_dfa();
    let walk = |to| vec![Some(to), Some(to), None, None];
    let sma = one_head(vec![(true, walk(1), Direction::Right), (false, walk(0), Direction::Right)]);
    for word in all_words(2, 10) {
        let out = sma.run(&Tape::new(&word, &ab).unwrap(), 1000);
        let reads = out.steps_used + 1;
        assert!(reads <= word.len() + 1);
        let tail = if word.is_empty() { &word[..] } else { &word[1..] };
        assert_eq!(out.verdict == Verdict::Accepted, dfa.accepts(tail), "{word:?}");
    }
}

#[test]
fn gradients_match_central_differences() {
    for trial in 0..3u64 {
        let worst = common::worst_gradient_error(trial);
        assert!(worst < 1e-4, "trial {trial}: relative error {worst}");
    }
}

#[test]
fn overfits_a_frozen_two_episode_buffer() {
    assert!(common::overfit_updates(1e-3, 5000).is_some(), "TD loss stayed above 1e-3 for 5000 updates");
}
