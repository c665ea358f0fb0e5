//! Run configuration: built-in defaults, then a JSON file, then flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::automaton::Way;
use crate::env::{action_space_size, step_limit};
use crate::error::{Error, Result};
use crate::genetic::{GaConfig, Layout};
use crate::languages::{LanguageId, LanguageProfile, DEFAULT_MAX_LEN};
use crate::qlearn::QConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ga,
    Q,
    Random,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ga" => Ok(Algorithm::Ga),
            "q" => Ok(Algorithm::Q),
            "random" => Ok(Algorithm::Random),
            other => Err(Error::Config(format!("unknown algorithm {other:?} (expected ga, q or random)"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ga => "ga",
            Algorithm::Q => "q",
            Algorithm::Random => "random",
        })
    }
}

/// On-disk layout of a config file. Every key is optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub language: Option<LanguageId>,
    pub algorithm: Option<Algorithm>,
    pub max_len: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub heads: Option<usize>,
    pub way: Option<Way>,
    pub ga: Option<GaConfig>,
    pub q: Option<QConfig>,
}

/// Command-line overrides; `None` leaves the file or default value alone.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub language: Option<LanguageId>,
    pub algorithm: Option<Algorithm>,
    pub max_len: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub heads: Option<usize>,
    pub way: Option<Way>,
    pub states: Option<usize>,
    pub population_size: Option<usize>,
    pub max_mutations: Option<usize>,
    pub max_generations: Option<usize>,
    pub epsilon: Option<f64>,
    pub learning_rate: Option<f64>,
    pub batch_episodes: Option<usize>,
    pub target_sync_period: Option<usize>,
    pub max_env_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub language: LanguageId,
    pub algorithm: Algorithm,
    pub max_len: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Evaluation episodes.
    pub episodes: usize,
    /// Head-count override for experiments; normally taken from the language.
    pub heads: Option<usize>,
    pub way: Option<Way>,
    pub ga: GaConfig,
    pub q: QConfig,
}

/// Quantities fixed by the other settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Derived {
    /// Episode action budget `N`.
    pub step_limit: usize,
    /// Action count `A`.
    pub actions: usize,
    /// Chromosome length `C`.
    pub chromosome_len: usize,
    pub max_mutations: usize,
}

impl RunConfig {
    pub fn new(language: LanguageId) -> Self {
        Self {
            language,
            algorithm: Algorithm::Ga,
            max_len: DEFAULT_MAX_LEN,
            seed: 0,
            out_dir: PathBuf::from("runs"),
            episodes: 10_000,
            heads: None,
            way: None,
            ga: GaConfig::default(),
            q: QConfig::default(),
        }
    }

    pub fn profile(&self) -> LanguageProfile {
        let mut profile = self.language.profile();
        if let Some(heads) = self.heads {
            profile.heads = heads;
        }
        if let Some(way) = self.way {
            profile.way = way;
        }
        profile
    }

    pub fn derived(&self) -> Derived {
        let profile = self.profile();
        let layout = Layout::for_profile(&profile, self.ga.states);
        Derived {
            step_limit: step_limit(self.max_len, profile.heads),
            actions: action_space_size(profile.heads, profile.way),
            chromosome_len: layout.len(),
            max_mutations: self.ga.max_mutations_for(self.language, &layout),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min = self.language.min_member_len();
        if self.max_len < min {
            return Err(Error::Config(format!(
                "max_len {} is shorter than the shortest {} member ({min})",
                self.max_len, self.language
            )));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        if let Some(heads) = self.heads {
            if !(1..=8).contains(&heads) {
                return Err(Error::Config(format!("heads must be in 1..=8, got {heads}")));
            }
        }
        self.ga.validate()?;
        self.q.validate()
    }
}

impl Overrides {
    fn apply(self, config: &mut RunConfig) {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { config.$($dst).+ = v; })*
            };
        }
        set!(
            language => language,
            algorithm => algorithm,
            max_len => max_len,
            seed => seed,
            out_dir => out_dir,
            episodes => episodes,
            states => ga.states,
            population_size => ga.population_size,
            max_generations => ga.max_generations,
            epsilon => q.epsilon,
            learning_rate => q.learning_rate,
            batch_episodes => q.batch_episodes,
            target_sync_period => q.target_sync_period,
            max_env_steps => q.max_env_steps,
        );
        if self.heads.is_some() {
            config.heads = self.heads;
        }
        if self.way.is_some() {
            config.way = self.way;
        }
        if self.max_mutations.is_some() {
            config.ga.max_mutations = self.max_mutations;
        }
    }
}

fn parse_file(text: &str, origin: &Path) -> Result<ConfigFile> {
    if text.trim().is_empty() {
        return Ok(ConfigFile::default());
    }
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
}

/// Resolves defaults ← file ← overrides and validates the result.
pub fn load_config(path: Option<&Path>, overrides: Overrides) -> Result<RunConfig> {
    let file = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_file(&text, path)?
        }
        None => ConfigFile::default(),
    };
    let language = overrides
        .language
        .or(file.language)
        .ok_or_else(|| Error::Config("language: no language given (set it in the file or pass --language)".into()))?;
    let mut config = RunConfig::new(language);
    if let Some(v) = file.algorithm {
        config.algorithm = v;
    }
    if let Some(v) = file.max_len {
        config.max_len = v;
    }
    if let Some(v) = file.seed {
        config.seed = v;
    }
    if let Some(v) = file.out_dir {
        config.out_dir = v;
    }
    if let Some(v) = file.episodes {
        config.episodes = v;
    }
    config.heads = file.heads;
    config.way = file.way;
    if let Some(v) = file.ga {
        config.ga = v;
    }
    if let Some(v) = file.q {
        config.q = v;
    }
    overrides.apply(&mut config);
    if config.heads.is_some() || config.way.is_some() {
        let natural = config.language.profile();
        log::warn!(
            "overriding {} profile ({} heads, {}) with ({} heads, {})",
            config.language,
            natural.heads,
            natural.way,
            config.profile().heads,
            config.profile().way
        );
    }
    config.validate()?;
    Ok(config)
}
