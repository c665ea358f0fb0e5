//! Simple multi-head automata (SMA).
//!
//! An SMA is a deterministic finite automaton reading a single marked tape
//! through `k` heads. Every state names exactly one head and one direction:
//! on each step that head is moved (clamped to the markers), the symbol under
//! it is read, and the transition table picks the next state. A missing
//! transition halts the machine, and the word is accepted iff the halting
//! state is accepting.
//!
//! Tape layout for a word of length `n`: index `0` holds the start marker,
//! indices `1..=n` the word, index `n + 1` the end marker. All heads start at
//! index `1`, which is the end marker when the word is empty.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symbol id. Input symbols are `0..|Σ|`, followed by the two markers.
pub type Symbol = usize;

pub const START_MARKER_CHAR: char = '$';
pub const END_MARKER_CHAR: char = '#';

/// Input alphabet plus the start and end markers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<char>,
}

impl Alphabet {
    pub fn new(chars: &[char]) -> Result<Self> {
        if chars.is_empty() {
            return Err(Error::InvalidSpec("alphabet needs at least one input symbol".into()));
        }
        for (i, c) in chars.iter().enumerate() {
            if *c == START_MARKER_CHAR || *c == END_MARKER_CHAR || chars[..i].contains(c) {
                return Err(Error::InvalidSpec(format!("bad alphabet character {c:?}")));
            }
        }
        Ok(Self {
            chars: chars.to_vec(),
        })
    }

    pub fn binary() -> Self {
        Self { chars: vec!['0', '1'] }
    }

    /// Number of input symbols, `|Σ|`.
    pub fn input_len(&self) -> usize {
        self.chars.len()
    }

    /// Total symbol count including markers, `m = |Σ| + 2`.
    pub fn size(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn start_marker(&self) -> Symbol {
        self.chars.len()
    }

    pub fn end_marker(&self) -> Symbol {
        self.chars.len() + 1
    }

    pub fn is_input(&self, symbol: Symbol) -> bool {
        symbol < self.chars.len()
    }

    pub fn char_of(&self, symbol: Symbol) -> char {
        match symbol {
            s if s < self.chars.len() => self.chars[s],
            s if s == self.start_marker() => START_MARKER_CHAR,
            s if s == self.end_marker() => END_MARKER_CHAR,
            _ => '?',
        }
    }

    pub fn check_word(&self, word: &[Symbol]) -> Result<()> {
        match word.iter().find(|&&s| !self.is_input(s)) {
            Some(&symbol) => Err(Error::SymbolOutOfAlphabet {
                symbol,
                size: self.input_len(),
            }),
            None => Ok(()),
        }
    }

    /// Parses a word written with the alphabet's characters. Surrounding
    /// whitespace is ignored, so an empty line is the empty word.
    pub fn parse_word(&self, text: &str) -> Result<Vec<Symbol>> {
        text.trim()
            .chars()
            .map(|c| {
                self.chars
                    .iter()
                    .position(|&x| x == c)
                    .ok_or(Error::UnknownCharacter(c))
            })
            .collect()
    }

    pub fn format_word(&self, word: &[Symbol]) -> String {
        word.iter().map(|&s| self.char_of(s)).collect()
    }
}

/// A word bracketed by the start and end markers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tape {
    cells: Vec<Symbol>,
}

impl Tape {
    pub fn new(word: &[Symbol], alphabet: &Alphabet) -> Result<Self> {
        alphabet.check_word(word)?;
        let mut cells = Vec::with_capacity(word.len() + 2);
        cells.push(alphabet.start_marker());
        cells.extend_from_slice(word);
        cells.push(alphabet.end_marker());
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[Symbol] {
        &self.cells
    }

    /// Length of the word on the tape (without markers).
    pub fn word_len(&self) -> usize {
        self.cells.len() - 2
    }

    pub fn word(&self) -> &[Symbol] {
        &self.cells[1..self.cells.len() - 1]
    }

    /// Index of the end marker, `n + 1`.
    pub fn end_index(&self) -> usize {
        self.cells.len() - 1
    }

    #[inline]
    pub fn read(&self, index: usize) -> Symbol {
        self.cells[index]
    }

    /// Moves a head one cell, staying inside `[0, n + 1]`.
    #[inline]
    pub fn shift(&self, position: usize, direction: Direction) -> usize {
        match direction {
            Direction::Left => position.saturating_sub(1),
            Direction::Stay => position,
            Direction::Right => (position + 1).min(self.end_index()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Stay,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Left, Direction::Stay, Direction::Right];

    /// Position in `[Left, Stay, Right]`, used for statistics.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Left => "left",
            Direction::Stay => "stay",
            Direction::Right => "right",
        })
    }
}

/// Whether heads may move left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Way {
    #[serde(rename = "one-way")]
    OneWay,
    #[serde(rename = "two-way")]
    TwoWay,
}

impl Way {
    /// Directions available to the heads, in gene/action order.
    pub fn directions(self) -> &'static [Direction] {
        match self {
            Way::OneWay => &[Direction::Stay, Direction::Right],
            Way::TwoWay => &[Direction::Left, Direction::Stay, Direction::Right],
        }
    }

    /// Number of directions `d`.
    pub fn direction_count(self) -> usize {
        self.directions().len()
    }

    pub fn allows(self, direction: Direction) -> bool {
        self == Way::TwoWay || direction != Direction::Left
    }
}

impl fmt::Display for Way {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Way::OneWay => "one-way",
            Way::TwoWay => "two-way",
        })
    }
}

/// The (direction, head) pair a state assigns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HeadMove {
    pub direction: Direction,
    pub head: usize,
}

impl HeadMove {
    pub fn new(direction: Direction, head: usize) -> Self {
        Self { direction, head }
    }
}

/// A discrete simple multi-head automaton. State `0` is the initial state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmaSpec {
    symbols: usize,
    heads: usize,
    way: Way,
    accept: Vec<bool>,
    /// Row-major `states × symbols`.
    delta: Vec<Option<u32>>,
    head_assign: Vec<HeadMove>,
}

impl SmaSpec {
    pub fn new(
        heads: usize,
        way: Way,
        accept: Vec<bool>,
        delta: Vec<Vec<Option<usize>>>,
        head_assign: Vec<HeadMove>,
    ) -> Result<Self> {
        let states = accept.len();
        if states == 0 {
            return Err(Error::InvalidSpec("automaton needs at least one state".into()));
        }
        if heads == 0 {
            return Err(Error::InvalidSpec("automaton needs at least one head".into()));
        }
        if delta.len() != states || head_assign.len() != states {
            return Err(Error::InvalidSpec(format!(
                "{states} states but {} delta rows and {} head assignments",
                delta.len(),
                head_assign.len()
            )));
        }
        let symbols = delta[0].len();
        if symbols < 3 {
            return Err(Error::InvalidSpec(format!(
                "transition rows have {symbols} columns, need at least 3"
            )));
        }
        let mut flat = Vec::with_capacity(states * symbols);
        for (q, row) in delta.iter().enumerate() {
            if row.len() != symbols {
                return Err(Error::InvalidSpec(format!(
                    "delta row {q} has {} columns, expected {symbols}",
                    row.len()
                )));
            }
            for target in row {
                match *target {
                    Some(t) if t >= states => {
                        return Err(Error::InvalidSpec(format!(
                            "delta row {q} targets state {t}, only {states} states"
                        )))
                    }
                    t => flat.push(t.map(|t| t as u32)),
                }
            }
        }
        for (q, mv) in head_assign.iter().enumerate() {
            if mv.head >= heads {
                return Err(Error::InvalidSpec(format!(
                    "state {q} assigns head {} but only {heads} heads",
                    mv.head
                )));
            }
            if !way.allows(mv.direction) {
                return Err(Error::InvalidSpec(format!(
                    "state {q} moves left in a one-way automaton"
                )));
            }
        }
        Ok(Self {
            symbols,
            heads,
            way,
            accept,
            delta: flat,
            head_assign,
        })
    }

    pub fn state_count(&self) -> usize {
        self.accept.len()
    }

    /// Symbol count `m`, markers included.
    pub fn symbol_count(&self) -> usize {
        self.symbols
    }

    pub fn head_count(&self) -> usize {
        self.heads
    }

    pub fn way(&self) -> Way {
        self.way
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accept[state]
    }

    #[inline]
    pub fn transition(&self, state: usize, symbol: Symbol) -> Option<usize> {
        self.delta[state * self.symbols + symbol].map(|t| t as usize)
    }

    #[inline]
    pub fn head_move(&self, state: usize) -> HeadMove {
        self.head_assign[state]
    }

    pub fn initial_config(&self) -> MachineConfig {
        MachineConfig {
            state: 0,
            heads: vec![1; self.heads],
            steps: 0,
        }
    }

    /// One move-then-read step. The config is updated in place; on `Halt` only
    /// the moved head differs from before.
    pub fn step(&self, config: &mut MachineConfig, tape: &Tape) -> Step {
        let mv = self.head_move(config.state);
        let position = tape.shift(config.heads[mv.head], mv.direction);
        config.heads[mv.head] = position;
        match self.transition(config.state, tape.read(position)) {
            Some(next) => {
                config.state = next;
                config.steps += 1;
                Step::Continue(mv)
            }
            None => Step::Halt,
        }
    }

    /// Runs from the initial configuration until the machine halts or has
    /// taken `limit` transitions.
    pub fn run(&self, tape: &Tape, limit: usize) -> RunOutcome {
        let mut config = self.initial_config();
        let mut trace = MoveTrace::new(self.heads);
        loop {
            if config.steps >= limit {
                return RunOutcome {
                    verdict: Verdict::Timeout,
                    trace,
                    steps_used: config.steps,
                    final_config: config,
                };
            }
            match self.step(&mut config, tape) {
                Step::Continue(mv) => trace.record(mv),
                Step::Halt => {
                    let verdict = if self.is_accepting(config.state) {
                        Verdict::Accepted
                    } else {
                        Verdict::Rejected
                    };
                    return RunOutcome {
                        verdict,
                        trace,
                        steps_used: config.steps,
                        final_config: config,
                    };
                }
            }
        }
    }

    pub fn accepts(&self, tape: &Tape, limit: usize) -> bool {
        self.run(tape, limit).verdict == Verdict::Accepted
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpecDocument::from(self)).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDocument = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("malformed automaton document: {e}")))?;
        doc.try_into()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Serialized layout of an automaton.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    n: usize,
    k: usize,
    way: Way,
    accept: Vec<u8>,
    delta: Vec<Vec<Option<usize>>>,
    head_assign: Vec<(Direction, usize)>,
}

impl From<&SmaSpec> for SpecDocument {
    fn from(spec: &SmaSpec) -> Self {
        let n = spec.state_count();
        Self {
            n,
            k: spec.heads,
            way: spec.way,
            accept: spec.accept.iter().map(|&a| a as u8).collect(),
            delta: (0..n)
                .map(|q| (0..spec.symbols).map(|s| spec.transition(q, s)).collect())
                .collect(),
            head_assign: spec
                .head_assign
                .iter()
                .map(|mv| (mv.direction, mv.head))
                .collect(),
        }
    }
}

impl TryFrom<SpecDocument> for SmaSpec {
    type Error = Error;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        if doc.accept.len() != doc.n {
            return Err(Error::InvalidSpec(format!(
                "n = {} but accept has {} entries",
                doc.n,
                doc.accept.len()
            )));
        }
        let accept = doc
            .accept
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidSpec(format!("accept entry {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let head_assign = doc
            .head_assign
            .into_iter()
            .map(|(direction, head)| HeadMove { direction, head })
            .collect();
        SmaSpec::new(doc.k, doc.way, accept, doc.delta, head_assign)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineConfig {
    pub state: usize,
    pub heads: Vec<usize>,
    /// Transitions taken so far.
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// A transition fired after the given move.
    Continue(HeadMove),
    Halt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected,
    Timeout,
}

/// Move counts of the transitions taken during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MoveTrace {
    /// Moves per head.
    pub head_moves: Vec<u64>,
    /// Moves per direction, indexed by [`Direction::index`].
    pub direction_moves: [u64; 3],
}

impl MoveTrace {
    pub fn new(heads: usize) -> Self {
        Self {
            head_moves: vec![0; heads],
            direction_moves: [0; 3],
        }
    }

    pub fn record(&mut self, mv: HeadMove) {
        self.head_moves[mv.head] += 1;
        self.direction_moves[mv.direction.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.direction_moves.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub trace: MoveTrace,
    pub steps_used: usize,
    pub final_config: MachineConfig,
}
