//! Grammatical inference with simple multi-head automata.
//!
//! The crate simulates simple multi-head automata, wraps language recognition
//! in an episodic environment, and trains recognizers with a genetic search
//! over integer-encoded automata or with recurrent deep Q-learning.

pub mod automaton;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod genetic;
pub mod languages;
pub mod policy;
pub mod qlearn;
pub mod seed;

pub use error::{Error, Result};
