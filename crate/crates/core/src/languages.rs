//! The six benchmark languages: membership oracles and word samplers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{Alphabet, Symbol, Way};
use crate::error::{Error, Result};

/// Default maximum word length for episodes.
pub const DEFAULT_MAX_LEN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LanguageId {
    /// `0w1` over {0,1}
    L1,
    /// even-length words over {0,1}
    L2,
    /// `aⁿbⁿ`
    L3,
    /// palindromes over {0,1}
    L4,
    /// `aⁿbⁿcⁿ`
    L5,
    /// `ww` over {0,1}
    L6,
}

impl LanguageId {
    pub const ALL: [LanguageId; 6] = [
        LanguageId::L1,
        LanguageId::L2,
        LanguageId::L3,
        LanguageId::L4,
        LanguageId::L5,
        LanguageId::L6,
    ];

    pub fn alphabet(self) -> Alphabet {
        match self {
            LanguageId::L3 => Alphabet::new(&['a', 'b']).unwrap(),
            LanguageId::L5 => Alphabet::new(&['a', 'b', 'c']).unwrap(),
            _ => Alphabet::binary(),
        }
    }

    pub fn is_regular(self) -> bool {
        matches!(self, LanguageId::L1 | LanguageId::L2)
    }

    /// Head count and direction set the language is trained with.
    pub fn profile(self) -> LanguageProfile {
        let (heads, way) = match self {
            LanguageId::L1 | LanguageId::L2 => (1, Way::OneWay),
            LanguageId::L3 => (2, Way::OneWay),
            LanguageId::L4 => (2, Way::TwoWay),
            LanguageId::L5 | LanguageId::L6 => (3, Way::OneWay),
        };
        LanguageProfile {
            id: self,
            alphabet: self.alphabet(),
            heads,
            way,
        }
    }

    /// Length of the shortest member.
    pub fn min_member_len(self) -> usize {
        match self {
            LanguageId::L1 => 2,
            _ => 0,
        }
    }

    /// Exact membership test. Fails if the word uses symbols outside the
    /// language's alphabet.
    pub fn membership(self, word: &[Symbol]) -> Result<bool> {
        self.alphabet().check_word(word)?;
        Ok(self.contains(word))
    }

    /// Membership for a word already known to be over the alphabet.
    pub(crate) fn contains(self, word: &[Symbol]) -> bool {
        let n = word.len();
        match self {
            LanguageId::L1 => n >= 2 && word[0] == 0 && word[n - 1] == 1,
            LanguageId::L2 => n % 2 == 0,
            LanguageId::L3 => {
                let half = n / 2;
                n % 2 == 0 && word[..half].iter().all(|&s| s == 0) && word[half..].iter().all(|&s| s == 1)
            }
            LanguageId::L4 => word.iter().eq(word.iter().rev()),
            LanguageId::L5 => {
                let third = n / 3;
                n % 3 == 0
                    && word
                        .iter()
                        .enumerate()
                        .all(|(i, &s)| s == i / third.max(1))
            }
            LanguageId::L6 => n % 2 == 0 && word[..n / 2] == word[n / 2..],
        }
    }

    /// Lengths `≤ max_len` at which the language has members.
    pub fn member_lengths(self, max_len: usize) -> Vec<usize> {
        (0..=max_len)
            .filter(|&len| match self {
                LanguageId::L1 => len >= 2,
                LanguageId::L2 | LanguageId::L3 | LanguageId::L6 => len % 2 == 0,
                LanguageId::L4 => true,
                LanguageId::L5 => len % 3 == 0,
            })
            .collect()
    }

    /// Draws a member: a feasible length uniformly, then a member of that
    /// length uniformly.
    ///
    /// Panics if `max_len` is shorter than the shortest member.
    pub fn generate_member<R: Rng + ?Sized>(self, max_len: usize, rng: &mut R) -> Vec<Symbol> {
        let lengths = self.member_lengths(max_len);
        assert!(
            !lengths.is_empty(),
            "{self} has no members of length <= {max_len}"
        );
        let len = lengths[rng.gen_range(0..lengths.len())];
        let mut bits = |count: usize| -> Vec<Symbol> { (0..count).map(|_| rng.gen_range(0..2)).collect() };
        match self {
            LanguageId::L1 => {
                let mut word = vec![0];
                word.extend(bits(len - 2));
                word.push(1);
                word
            }
            LanguageId::L2 => bits(len),
            LanguageId::L3 => [vec![0; len / 2], vec![1; len / 2]].concat(),
            LanguageId::L4 => {
                let mut word = bits(len.div_ceil(2));
                let mirror: Vec<Symbol> = word[..len / 2].iter().rev().copied().collect();
                word.extend(mirror);
                word
            }
            LanguageId::L5 => [vec![0; len / 3], vec![1; len / 3], vec![2; len / 3]].concat(),
            LanguageId::L6 => {
                let half = bits(len / 2);
                [half.clone(), half].concat()
            }
        }
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for LanguageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LanguageId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown language {s:?} (expected L1..L6)")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageProfile {
    pub id: LanguageId,
    pub alphabet: Alphabet,
    pub heads: usize,
    pub way: Way,
}

impl LanguageProfile {
    /// Number of agent actions, `2 + d·k`.
    pub fn action_count(&self) -> usize {
        crate::env::action_space_size(self.heads, self.way)
    }

    /// Draws an episode input: a member with probability 1/2, otherwise a
    /// uniformly random word. The label always comes from the oracle.
    pub fn sample_episode_input<R: Rng + ?Sized>(&self, max_len: usize, rng: &mut R) -> (Vec<Symbol>, bool) {
        let word = if rng.gen_bool(0.5) {
            self.id.generate_member(max_len, rng)
        } else {
            generate_random(&self.alphabet, max_len, rng)
        };
        let label = self.id.contains(&word);
        (word, label)
    }
}

/// A word with length uniform in `[0, max_len]` and uniform symbols.
pub fn generate_random<R: Rng + ?Sized>(alphabet: &Alphabet, max_len: usize, rng: &mut R) -> Vec<Symbol> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| rng.gen_range(0..alphabet.input_len())).collect()
}
