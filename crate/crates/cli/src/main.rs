use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sma_core::automaton::{SmaSpec, Way};
use sma_core::config::{load_config, Algorithm, Overrides, RunConfig};
use sma_core::env::{EnvState, EpisodeConfig};
use sma_core::eval::{evaluate, export_report, write_curve, ModelResult, ReportFormat};
use sma_core::genetic::{self, GaCheckpoint, Layout, SmaAgent};
use sma_core::languages::LanguageId;
use sma_core::policy::{Policy, RandomPolicy};
use sma_core::qlearn::{self, QAgent, QCheckpoint};
use sma_core::{seed, Error, Result};

#[derive(Parser)]
#[command(name = "sma", version, about = "Learn multi-head automata for formal languages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a machine with the genetic algorithm.
    TrainGa {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a GA checkpoint instead of a random population.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Train a recurrent Q-learning agent.
    TrainQ {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a stored machine, GA checkpoint or Q checkpoint.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Report file; `.json` selects JSON, anything else CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate the uniform random policy.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print one episode step by step.
    Demo {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input word; sampled from the episode distribution when omitted.
        #[arg(long)]
        word: Option<String>,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON config file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    language: Option<LanguageId>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, env = "SMA_OUT_DIR")]
    out: Option<PathBuf>,
    /// Evaluation episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Override the language's head count.
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long, value_parser = parse_way)]
    way: Option<Way>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    population_size: Option<usize>,
    #[arg(long)]
    max_mutations: Option<usize>,
    #[arg(long)]
    max_generations: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_episodes: Option<usize>,
    #[arg(long)]
    target_sync_period: Option<usize>,
    #[arg(long)]
    max_env_steps: Option<usize>,
}

fn parse_way(text: &str) -> std::result::Result<Way, String> {
    match text {
        "one-way" | "1" => Ok(Way::OneWay),
        "two-way" | "2" => Ok(Way::TwoWay),
        other => Err(format!("expected one-way or two-way, got {other:?}")),
    }
}

impl RunArgs {
    fn resolve(&self, algorithm: Algorithm, language: Option<LanguageId>) -> Result<RunConfig> {
        let overrides = Overrides {
            language: self.language.or(language),
            algorithm: Some(algorithm),
            max_len: self.max_len,
            seed: self.seed,
            out_dir: self.out.clone(),
            episodes: self.episodes,
            heads: self.heads,
            way: self.way,
            states: self.states,
            population_size: self.population_size,
            max_mutations: self.max_mutations,
            max_generations: self.max_generations,
            epsilon: self.epsilon,
            learning_rate: self.learning_rate,
            batch_episodes: self.batch_episodes,
            target_sync_period: self.target_sync_period,
            max_env_steps: self.max_env_steps,
        };
        let config = load_config(self.config.as_deref(), overrides)?;
        let d = config.derived();
        log::info!(
            "{} {}: N = {}, A = {}, C = {}, max mutations = {}, seed = {}",
            config.language,
            config.algorithm,
            d.step_limit,
            d.actions,
            d.chromosome_len,
            d.max_mutations,
            config.seed
        );
        Ok(config)
    }
}

fn output_dir(config: &RunConfig) -> Result<&Path> {
    let dir = config.out_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn model_name(language: LanguageId, algorithm: Algorithm) -> String {
    let tag = match algorithm {
        Algorithm::Ga => "G",
        Algorithm::Q => "Q",
        Algorithm::Random => "R",
    };
    format!("{language}{tag}")
}

fn evaluate_policy(policy: &mut dyn Policy, config: &RunConfig) -> ModelResult {
    let episode = EpisodeConfig::new(config.profile(), config.max_len);
    let mut rng = seed::stream(config.seed, "eval", 0);
    let (report, stats) = evaluate(policy, &episode, config.episodes, &mut rng);
    println!(
        "{}: avg reward {:.3}, prediction rate {:.4}, avg episode length {:.2} over {} episodes",
        model_name(config.language, config.algorithm),
        report.avg_reward,
        report.prediction_rate,
        report.avg_episode_length,
        report.episodes
    );
    ModelResult {
        model: model_name(config.language, config.algorithm),
        report,
        stats,
    }
}

fn write_report(result: ModelResult, path: &Path) -> Result<()> {
    export_report(&[result], path, ReportFormat::from_path(path))?;
    println!("report written to {}", path.display());
    Ok(())
}

fn train_ga(run: &RunArgs, resume: Option<&Path>) -> Result<()> {
    let checkpoint = resume.map(GaCheckpoint::load).transpose()?;
    let config = run.resolve(Algorithm::Ga, checkpoint.as_ref().map(|c| c.language))?;
    let profile = config.profile();
    let outcome = match checkpoint {
        Some(checkpoint) => genetic::resume_ga(&profile, config.max_len, &config.ga, checkpoint)?,
        None => genetic::train_ga(&profile, config.max_len, &config.ga, config.seed)?,
    };
    let dir = output_dir(&config)?;
    let stem = format!("{}_ga", config.language);
    genetic::write_history(&outcome.history, &dir.join(format!("{stem}_history.csv")))?;
    write_curve(
        outcome.history.iter().map(|r| (r.generation as f64, r.best_prediction_rate)),
        &dir.join(format!("{stem}_curve.txt")),
    )?;
    outcome.checkpoint.save(&dir.join(format!("{stem}_checkpoint.json")))?;
    outcome.best.save(&dir.join(format!("{stem}_machine.json")))?;
    match outcome.validated_at {
        Some(generation) => println!("validated at generation {generation}"),
        None => println!("stopped after generation {}", outcome.checkpoint.generation),
    }
    let result = evaluate_policy(&mut SmaAgent::new(&outcome.best), &config);
    write_report(result, &dir.join(format!("{stem}_report.csv")))
}

fn train_q(run: &RunArgs) -> Result<()> {
    let config = run.resolve(Algorithm::Q, None)?;
    let profile = config.profile();
    let outcome = qlearn::train_q(&profile, config.max_len, &config.q, config.seed)?;
    println!(
        "{} environment steps, {} episodes, {} updates",
        outcome.env_steps, outcome.episodes, outcome.train_steps
    );
    let dir = output_dir(&config)?;
    let stem = format!("{}_q", config.language);
    qlearn::write_history(&outcome.history, &dir.join(format!("{stem}_history.csv")))?;
    let steps = |r: &qlearn::QHistoryRow| r.timesteps as f64 / 1000.0;
    write_curve(
        outcome.history.iter().map(|r| (steps(r), r.avg_prediction_rate)),
        &dir.join(format!("{stem}_rate.txt")),
    )?;
    write_curve(
        outcome.history.iter().map(|r| (steps(r), r.avg_episode_length)),
        &dir.join(format!("{stem}_length.txt")),
    )?;
    QCheckpoint::new(config.language, config.max_len, outcome.network.clone())
        .save(&dir.join(format!("{stem}_checkpoint.json")))?;
    let result = evaluate_policy(&mut QAgent::new(&outcome.network, &profile, 0.0), &config);
    write_report(result, &dir.join(format!("{stem}_report.csv")))
}

/// Anything `eval` and `demo` can run.
enum Stored {
    Machine(SmaSpec),
    Q(QCheckpoint),
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Loads a machine file, a GA checkpoint (its best individual), or a Q
/// checkpoint, telling them apart by their keys.
fn load_stored(path: &Path, run: &RunArgs) -> Result<(Stored, RunConfig)> {
    let value = read_json(path)?;
    if value.get("network").is_some() {
        let checkpoint = QCheckpoint::load(path)?;
        let config = run.resolve(Algorithm::Q, Some(checkpoint.language))?;
        if checkpoint.network.head.action_count() != config.profile().action_count()
            || checkpoint.network.gru.input_dim() != qlearn::encoding_width(&config.profile())
        {
            return Err(Error::Config(format!(
                "{}: network shape does not fit the {} profile",
                path.display(),
                config.language
            )));
        }
        return Ok((Stored::Q(checkpoint), config));
    }
    if value.get("population").is_some() {
        let checkpoint = GaCheckpoint::load(path)?;
        let config = run.resolve(Algorithm::Ga, Some(checkpoint.language))?;
        let layout = Layout::for_profile(&config.profile(), config.ga.states);
        let best = checkpoint
            .population
            .first()
            .ok_or_else(|| Error::Config(format!("{}: empty population", path.display())))?;
        return Ok((Stored::Machine(best.decode(&layout)?), config));
    }
    let spec = SmaSpec::load(path)?;
    let mut config = run.resolve(Algorithm::Ga, None)?;
    if spec.symbol_count() != config.language.alphabet().size() {
        return Err(Error::Config(format!(
            "{}: machine reads {} symbols, {} has {}",
            path.display(),
            spec.symbol_count(),
            config.language,
            config.language.alphabet().size()
        )));
    }
    // the machine's own head layout wins over the language default
    config.heads = Some(spec.head_count());
    config.way = Some(spec.way());
    Ok((Stored::Machine(spec), config))
}

fn eval(run: &RunArgs, checkpoint: &Path, report: Option<&Path>) -> Result<()> {
    let (stored, config) = load_stored(checkpoint, run)?;
    let result = match &stored {
        Stored::Machine(spec) => evaluate_policy(&mut SmaAgent::new(spec), &config),
        Stored::Q(q) => evaluate_policy(&mut QAgent::new(&q.network, &config.profile(), 0.0), &config),
    };
    let path = match report {
        Some(path) => path.to_path_buf(),
        None => output_dir(&config)?.join(format!("{}_report.csv", result.model)),
    };
    write_report(result, &path)
}

fn baseline(run: &RunArgs, report: Option<&Path>) -> Result<()> {
    let config = run.resolve(Algorithm::Random, None)?;
    let episode = EpisodeConfig::new(config.profile(), config.max_len);
    let result = evaluate_policy(&mut RandomPolicy::new(&episode), &config);
    let path = match report {
        Some(path) => path.to_path_buf(),
        None => output_dir(&config)?.join(format!("{}_report.csv", result.model)),
    };
    write_report(result, &path)
}

fn demo(run: &RunArgs, checkpoint: &Path, word: Option<&str>) -> Result<()> {
    let (stored, config) = load_stored(checkpoint, run)?;
    let profile = config.profile();
    let episode = EpisodeConfig::new(profile.clone(), config.max_len);
    let mut rng = seed::stream(config.seed, "demo", 0);
    let (mut state, mut obs) = match word {
        Some(text) => {
            let word = profile.alphabet.parse_word(text)?;
            let label = config.language.membership(&word)?;
            EnvState::with_input(&episode, &word, label)?
        }
        None => EnvState::reset(&episode, &mut rng),
    };
    let alphabet = &profile.alphabet;
    println!(
        "input {:?} ({}member), step limit {}",
        alphabet.format_word(state.tape().word()),
        if state.label() { "" } else { "non-" },
        state.limit()
    );
    let mut policy: Box<dyn Policy + '_> = match &stored {
        Stored::Machine(spec) => Box::new(SmaAgent::new(spec)),
        Stored::Q(q) => Box::new(QAgent::new(&q.network, &profile, 0.0)),
    };
    policy.reset();
    let mut total = 0.0;
    loop {
        let action = policy.act(&obs, &mut rng);
        let t = state.step(action)?;
        total += t.reward;
        let seen = match &t.observation {
            Some(o) => format!("h{} reads {}", o.head, alphabet.char_of(o.symbol)),
            None => "halted".to_string(),
        };
        println!("{:>3}  {:<14} {seen:<12} reward {}", state.actions_taken(), action.to_string(), t.reward);
        if t.done {
            break;
        }
        obs = t.observation.expect("running episodes observe");
    }
    let verdict = if state.accepted() == Some(true) { "accept" } else { "reject" };
    let outcome = if state.is_correct() == Some(true) { "correct" } else { "wrong" };
    println!("{verdict} ({outcome}), total reward {total}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::TrainGa { run, resume } => train_ga(run, resume.as_deref()),
        Command::TrainQ { run } => train_q(run),
        Command::Eval { run, checkpoint, report } => eval(run, checkpoint, report.as_deref()),
        Command::Baseline { run, report } => baseline(run, report.as_deref()),
        Command::Demo { run, checkpoint, word } => demo(run, checkpoint, word.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
