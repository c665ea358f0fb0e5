//! Genetic search over integer-encoded automata.
//!
//! A chromosome for an automaton with `n` states over `m` symbols holds
//! `(m + 2)·n` genes laid out as
//!
//! ```text
//! [ transitions: n·m, state-major ][ head genes: n ][ accept genes: n ]
//! ```
//!
//! Transition gene `v` is `0` for "no transition" and `v - 1` otherwise. A
//! head gene `g ∈ [0, d·k)` selects head `g / d` and direction `g % d`, with
//! directions ordered as in [`Way::directions`]. Accept genes are `0` or `1`.

use std::path::Path;

use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::automaton::{HeadMove, SmaSpec, Symbol, Way};
use crate::env::{AgentAction, EnvState, EpisodeConfig, Observation};
use crate::error::{Error, Result};
use crate::languages::{LanguageId, LanguageProfile, DEFAULT_MAX_LEN};
use crate::policy::{play_episode, Policy};
use crate::seed::{self, Rng};

/// Shape of the chromosomes for one automaton family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub states: usize,
    pub symbols: usize,
    pub heads: usize,
    pub way: Way,
}

impl Layout {
    pub fn for_profile(profile: &LanguageProfile, states: usize) -> Self {
        Self {
            states,
            symbols: profile.alphabet.size(),
            heads: profile.heads,
            way: profile.way,
        }
    }

    /// Chromosome length `C = (m + 2)·n`.
    pub fn len(&self) -> usize {
        (self.symbols + 2) * self.states
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn head_offset(&self) -> usize {
        self.states * self.symbols
    }

    fn accept_offset(&self) -> usize {
        self.head_offset() + self.states
    }

    /// Exclusive upper bound of the gene at `index`.
    pub fn bound(&self, index: usize) -> u32 {
        if index < self.head_offset() {
            self.states as u32 + 1
        } else if index < self.accept_offset() {
            (self.way.direction_count() * self.heads) as u32
        } else {
            2
        }
    }

    pub fn random_gene(&self, index: usize, rng: &mut Rng) -> u32 {
        rng.gen_range(0..self.bound(index))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome {
    pub genes: Vec<u32>,
}

impl Chromosome {
    pub fn random(layout: &Layout, rng: &mut Rng) -> Self {
        Self {
            genes: (0..layout.len()).map(|i| layout.random_gene(i, rng)).collect(),
        }
    }

    pub fn validate(&self, layout: &Layout) -> Result<()> {
        if self.genes.len() != layout.len() {
            return Err(Error::ChromosomeLength {
                expected: layout.len(),
                actual: self.genes.len(),
            });
        }
        for (index, &value) in self.genes.iter().enumerate() {
            let bound = layout.bound(index);
            if value >= bound {
                return Err(Error::GeneOutOfRange { index, value, bound });
            }
        }
        Ok(())
    }

    pub fn decode(&self, layout: &Layout) -> Result<SmaSpec> {
        self.validate(layout)?;
        let (n, m, d) = (layout.states, layout.symbols, layout.way.direction_count());
        let delta = self.genes[..n * m]
            .chunks(m)
            .map(|row| row.iter().map(|&v| v.checked_sub(1).map(|t| t as usize)).collect())
            .collect();
        let head_assign = self.genes[layout.head_offset()..layout.accept_offset()]
            .iter()
            .map(|&g| {
                let g = g as usize;
                HeadMove::new(layout.way.directions()[g % d], g / d)
            })
            .collect();
        let accept = self.genes[layout.accept_offset()..].iter().map(|&a| a == 1).collect();
        SmaSpec::new(layout.heads, layout.way, accept, delta, head_assign)
    }

    pub fn encode(spec: &SmaSpec) -> Self {
        let (n, m) = (spec.state_count(), spec.symbol_count());
        let way = spec.way();
        let d = way.direction_count();
        let mut genes = Vec::with_capacity((m + 2) * n);
        for q in 0..n {
            genes.extend((0..m).map(|s| spec.transition(q, s).map_or(0, |t| t as u32 + 1)));
        }
        for q in 0..n {
            let mv = spec.head_move(q);
            let j = way.directions().iter().position(|&x| x == mv.direction).unwrap();
            genes.push((mv.head * d + j) as u32);
        }
        genes.extend((0..n).map(|q| spec.is_accepting(q) as u32));
        Self { genes }
    }

    /// Single-point crossover: `self[..cut] ++ other[cut..]`.
    pub fn crossover(&self, other: &Chromosome, cut: usize) -> Chromosome {
        let mut genes = self.genes[..cut].to_vec();
        genes.extend_from_slice(&other.genes[cut..]);
        Chromosome { genes }
    }

    /// Resets `count` uniformly chosen genes to uniform valid values.
    pub fn mutate(&mut self, layout: &Layout, count: usize, rng: &mut Rng) {
        for _ in 0..count {
            let index = rng.gen_range(0..self.genes.len());
            self.genes[index] = layout.random_gene(index, rng);
        }
    }
}

/// Drives the environment with an automaton: each state moves its assigned
/// head, the observed symbol selects the transition, and a missing
/// transition halts with the state's verdict.
#[derive(Clone, Debug)]
pub struct SmaAgent<'a> {
    spec: &'a SmaSpec,
    state: usize,
    started: bool,
}

impl<'a> SmaAgent<'a> {
    pub fn new(spec: &'a SmaSpec) -> Self {
        Self {
            spec,
            state: 0,
            started: false,
        }
    }

    fn move_for(&self, state: usize) -> AgentAction {
        let mv = self.spec.head_move(state);
        AgentAction::Move {
            head: mv.head,
            direction: mv.direction,
        }
    }
}

impl Policy for SmaAgent<'_> {
    fn reset(&mut self) {
        self.state = 0;
        self.started = false;
    }

    fn act(&mut self, obs: &Observation, _rng: &mut Rng) -> AgentAction {
        if !self.started {
            self.started = true;
            return self.move_for(self.state);
        }
        match self.spec.transition(self.state, obs.symbol) {
            Some(next) => {
                self.state = next;
                self.move_for(next)
            }
            None if self.spec.is_accepting(self.state) => AgentAction::AcceptHalt,
            None => AgentAction::RejectHalt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingSet {
    pub seed: u64,
    pub samples: Vec<(Vec<Symbol>, bool)>,
}

impl TrainingSet {
    pub fn generate(profile: &LanguageProfile, max_len: usize, size: usize, seed: u64) -> Self {
        let mut rng = Rng::seed_from_u64(seed);
        let samples = (0..size)
            .map(|_| profile.sample_episode_input(max_len, &mut rng))
            .collect();
        Self { seed, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fitness {
    /// Sum over episodes of the discounted episode reward.
    pub fitness: f64,
    pub prediction_rate: f64,
}

/// Scores an automaton over a training set. An episode ending on action
/// `T` (1-based) with reward `r` scores `γ^(T-1)·r`.
pub fn evaluate_spec(spec: &SmaSpec, set: &TrainingSet, episode: &EpisodeConfig, gamma: f64) -> Fitness {
    let mut agent = SmaAgent::new(spec);
    // the automaton agent never draws randomness
    let mut rng = Rng::seed_from_u64(0);
    let mut fitness = 0.0;
    let mut correct = 0usize;
    for (word, label) in &set.samples {
        let (mut state, obs) = EnvState::with_input(episode, word, *label).expect("training words are valid");
        let summary = play_episode(&mut agent, &mut state, obs, &mut rng);
        fitness += gamma.powi(summary.length as i32 - 1) * summary.reward;
        correct += summary.correct as usize;
    }
    Fitness {
        fitness,
        prediction_rate: if set.is_empty() {
            0.0
        } else {
            correct as f64 / set.len() as f64
        },
    }
}

pub fn fitness(
    chromosome: &Chromosome,
    layout: &Layout,
    set: &TrainingSet,
    episode: &EpisodeConfig,
    gamma: f64,
) -> Result<Fitness> {
    Ok(evaluate_spec(&chromosome.decode(layout)?, set, episode, gamma))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub fitness: f64,
    pub prediction_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population_size: usize,
    /// Automaton state count `n`.
    pub states: usize,
    pub gamma: f64,
    pub training_set_size: usize,
    /// `None` picks 3 for regular languages and `⌊C/20⌋` otherwise.
    pub max_mutations: Option<usize>,
    pub max_generations: usize,
    /// Stop once the best individual also scores 1.0 on a fresh set.
    pub stop_on_validation: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            states: 32,
            gamma: 0.999,
            training_set_size: 1000,
            max_mutations: None,
            max_generations: 2000,
            stop_on_validation: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || self.population_size % 2 != 0 {
            return Err(Error::Config(format!(
                "ga.population_size must be even and at least 4, got {}",
                self.population_size
            )));
        }
        if self.states == 0 {
            return Err(Error::Config("ga.states must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("ga.gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.training_set_size == 0 {
            return Err(Error::Config("ga.training_set_size must be positive".into()));
        }
        Ok(())
    }

    pub fn max_mutations_for(&self, id: LanguageId, layout: &Layout) -> usize {
        self.max_mutations
            .unwrap_or(if id.is_regular() { 3 } else { layout.len() / 20 })
    }
}

/// Everything one GA run needs besides the population.
#[derive(Clone, Debug)]
pub struct GaContext {
    pub layout: Layout,
    pub episode: EpisodeConfig,
    pub gamma: f64,
    pub max_mutations: usize,
    pub master_seed: u64,
}

impl GaContext {
    pub fn new(profile: &LanguageProfile, max_len: usize, config: &GaConfig, master_seed: u64) -> Self {
        let layout = Layout::for_profile(profile, config.states);
        Self {
            layout,
            episode: EpisodeConfig::new(profile.clone(), max_len),
            gamma: config.gamma,
            max_mutations: config.max_mutations_for(profile.id, &layout),
            master_seed,
        }
    }

    pub fn evaluate(&self, chromosome: Chromosome, set: &TrainingSet) -> Individual {
        let score = fitness(&chromosome, &self.layout, set, &self.episode, self.gamma)
            .expect("population chromosomes are valid");
        Individual {
            chromosome,
            fitness: score.fitness,
            prediction_rate: score.prediction_rate,
        }
    }

    /// Builds one child from two distinct parents of the surviving half.
    pub fn breed(&self, survivors: &[Individual], rng: &mut Rng) -> Chromosome {
        let a = rng.gen_range(0..survivors.len());
        let mut b = rng.gen_range(0..survivors.len() - 1);
        if b >= a {
            b += 1;
        }
        let cut = rng.gen_range(1..self.layout.len());
        let mut child = survivors[a].chromosome.crossover(&survivors[b].chromosome, cut);
        let count = rng.gen_range(0..=self.max_mutations);
        child.mutate(&self.layout, count, rng);
        child
    }
}

fn sort_by_fitness(population: &mut [Individual]) {
    population.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
}

/// Keeps the better half and refills the rest with evaluated children.
/// Returns the population sorted best-first.
pub fn evolve_generation(
    mut population: Vec<Individual>,
    set: &TrainingSet,
    ctx: &GaContext,
    generation: u64,
) -> Vec<Individual> {
    sort_by_fitness(&mut population);
    let size = population.len();
    population.truncate(size / 2);
    let children: Vec<Individual> = (0..size - size / 2)
        .map(|slot| {
            let mut rng = seed::stream(ctx.master_seed, "ga-child", generation * size as u64 + slot as u64);
            let child = ctx.breed(&population, &mut rng);
            ctx.evaluate(child, set)
        })
        .collect();
    population.extend(children);
    sort_by_fitness(&mut population);
    population
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaHistoryRow {
    pub generation: u64,
    pub best_fitness: f64,
    pub best_prediction_rate: f64,
}

/// Resumable GA state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaCheckpoint {
    pub language: LanguageId,
    pub generation: u64,
    pub master_seed: u64,
    /// How many times the training set has been replaced.
    pub refreshes: u64,
    pub training_set_seed: u64,
    pub population: Vec<Chromosome>,
}

impl GaCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct GaOutcome {
    pub best: SmaSpec,
    pub best_individual: Individual,
    pub history: Vec<GaHistoryRow>,
    /// Set when the run ended because the best machine was perfect on a
    /// fresh validation set.
    pub validated_at: Option<u64>,
    pub checkpoint: GaCheckpoint,
}

pub fn training_set_seed(master: u64, refresh: u64) -> u64 {
    seed::derive_seed(master, "ga-training-set", refresh)
}

/// Runs the genetic search from a random population.
pub fn train_ga(profile: &LanguageProfile, max_len: usize, config: &GaConfig, master_seed: u64) -> Result<GaOutcome> {
    config.validate()?;
    let ctx = GaContext::new(profile, max_len, config, master_seed);
    let population = (0..config.population_size)
        .map(|i| Chromosome::random(&ctx.layout, &mut seed::stream(master_seed, "ga-init", i as u64)))
        .collect();
    let checkpoint = GaCheckpoint {
        language: profile.id,
        generation: 0,
        master_seed,
        refreshes: 0,
        training_set_seed: training_set_seed(master_seed, 0),
        population,
    };
    resume_ga(profile, max_len, config, checkpoint)
}

/// Continues a run from a checkpoint. `config.max_generations` is the total
/// generation budget, counting generations already done.
pub fn resume_ga(
    profile: &LanguageProfile,
    max_len: usize,
    config: &GaConfig,
    checkpoint: GaCheckpoint,
) -> Result<GaOutcome> {
    config.validate()?;
    if checkpoint.language != profile.id {
        return Err(Error::Config(format!(
            "checkpoint is for {} but the run is for {}",
            checkpoint.language, profile.id
        )));
    }
    if checkpoint.population.len() != config.population_size {
        return Err(Error::Config(format!(
            "checkpoint holds {} individuals, population_size is {}",
            checkpoint.population.len(),
            config.population_size
        )));
    }
    let master_seed = checkpoint.master_seed;
    let ctx = GaContext::new(profile, max_len, config, master_seed);
    for chromosome in &checkpoint.population {
        chromosome.validate(&ctx.layout)?;
    }
    let mut refreshes = checkpoint.refreshes;
    let mut set = TrainingSet::generate(profile, max_len, config.training_set_size, checkpoint.training_set_seed);
    let mut population: Vec<Individual> = checkpoint
        .population
        .into_iter()
        .map(|c| ctx.evaluate(c, &set))
        .collect();
    sort_by_fitness(&mut population);

    let mut generation = checkpoint.generation;
    let mut history = vec![history_row(generation, &population[0])];
    let mut validated_at = None;
    while generation < config.max_generations as u64 {
        if population[0].prediction_rate >= 1.0 {
            refreshes += 1;
            set = TrainingSet::generate(
                profile,
                max_len,
                config.training_set_size,
                training_set_seed(master_seed, refreshes),
            );
            let best = ctx.evaluate(population[0].chromosome.clone(), &set);
            log::debug!(
                "generation {generation}: training set refreshed, best scores {:.3} on it",
                best.prediction_rate
            );
            if config.stop_on_validation && best.prediction_rate >= 1.0 {
                validated_at = Some(generation);
                population[0] = best;
                break;
            }
            population = population.into_iter().map(|ind| ctx.evaluate(ind.chromosome, &set)).collect();
            sort_by_fitness(&mut population);
        }
        generation += 1;
        population = evolve_generation(population, &set, &ctx, generation);
        history.push(history_row(generation, &population[0]));
        if generation % 100 == 0 {
            log::info!(
                "generation {generation}: best fitness {:.3}, prediction rate {:.3}",
                population[0].fitness,
                population[0].prediction_rate
            );
        }
    }

    let best_individual = population[0].clone();
    let best = best_individual.chromosome.decode(&ctx.layout)?;
    Ok(GaOutcome {
        best,
        best_individual,
        history,
        validated_at,
        checkpoint: GaCheckpoint {
            language: profile.id,
            generation,
            master_seed,
            refreshes,
            training_set_seed: set.seed,
            population: population.into_iter().map(|i| i.chromosome).collect(),
        },
    })
}

fn history_row(generation: u64, best: &Individual) -> GaHistoryRow {
    GaHistoryRow {
        generation,
        best_fitness: best.fitness,
        best_prediction_rate: best.prediction_rate,
    }
}

pub fn write_history(history: &[GaHistoryRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in history {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Default settings for a language at the standard word length.
pub fn default_context(id: LanguageId) -> GaContext {
    GaContext::new(&id.profile(), DEFAULT_MAX_LEN, &GaConfig::default(), 0)
}
