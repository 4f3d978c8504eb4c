//! Declarative experiment configuration.
//!
//! A config file is TOML with sections `bandit`, `oracle`, `generation`,
//! `pretrain`, `run` and `paths`. Values missing from the file come from the
//! preset of the selected scenario.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::MaskKind;
use crate::env::{Feedback, DEFAULT_HORIZON, DEFAULT_REPETITIONS};
use crate::error::{Error, Result};
use crate::generate::{GenerationMode, DEFAULT_PAIRS_PER_USER, DEFAULT_REPEATS};
use crate::oracle::LlmConfig;
use crate::scenario::{DONATION_STEPS_PER_USER, DONATION_USERS, VACCINE_STEPS_PER_USER, VACCINE_USERS};

pub const DEFAULT_ALPHA: f64 = 10.0;
pub const DEFAULT_RIDGE: f64 = 1.0;
/// Trials of the rank-order simulation.
pub const DEFAULT_RANK_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Donation,
    Vaccine,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Donation => "donation",
            ScenarioKind::Vaccine => "vaccine",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "donation" => Ok(ScenarioKind::Donation),
            "vaccine" => Ok(ScenarioKind::Vaccine),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Llm,
    #[default]
    Bernoulli,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    pub alpha: f64,
    pub ridge: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    /// Seed of the scenario's hidden utilities (simulated oracle and
    /// evaluation environment).
    pub truth_seed: u64,
    /// Bernoulli oracle: weight of the uninformative p = 1/2 answer.
    /// 0 answers with the true utilities, 1 is a fair coin.
    pub noise: f64,
    pub llm: LlmConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Bernoulli,
            truth_seed: 0,
            noise: 0.0,
            llm: LlmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub users: usize,
    pub mode: GenerationMode,
    pub repeats: u32,
    pub pairs_per_user: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            users: DONATION_USERS,
            mode: GenerationMode::Dense,
            repeats: DEFAULT_REPEATS,
            pairs_per_user: DEFAULT_PAIRS_PER_USER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    /// Total steps; `steps_per_user` times the dataset size when absent.
    pub steps: Option<usize>,
    pub steps_per_user: usize,
    pub all_arms: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            steps: None,
            steps_per_user: DONATION_STEPS_PER_USER,
            all_arms: false,
        }
    }
}

impl PretrainConfig {
    pub fn steps_for(&self, dataset_users: usize) -> usize {
        self.steps.unwrap_or(self.steps_per_user * dataset_users)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Horizon T.
    pub steps: usize,
    pub repetitions: usize,
    pub mask: MaskKind,
    /// Personal columns kept by the partial_personal mask; the schema's
    /// choice when absent.
    pub partial_personal: Option<Vec<String>>,
    pub feedback: Feedback,
    /// Size of the evaluation population of the standard environment.
    pub eval_users: usize,
    /// Fine-tune during replay.
    pub update: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_HORIZON,
            repetitions: DEFAULT_REPETITIONS,
            mask: MaskKind::Full,
            partial_personal: None,
            feedback: Feedback::Expected,
            eval_users: DONATION_USERS,
            update: true,
        }
    }
}

/// File locations. Relative paths of generated files (users, dataset,
/// model, runs, cache) resolve against `output`; the inputs `template`, `log`
/// and `schema` are used as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub output: PathBuf,
    pub users: PathBuf,
    pub dataset: PathBuf,
    pub model: PathBuf,
    pub runs: PathBuf,
    /// Pairwise prompt template; the scenario's bundled one when absent.
    pub template: Option<PathBuf>,
    /// Response cache of the LLM oracle.
    pub cache: PathBuf,
    /// Conjoint log for replay.
    pub log: Option<PathBuf>,
    /// Conjoint schema; the scenario's when absent.
    pub schema: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("out"),
            users: PathBuf::from("users.jsonl"),
            dataset: PathBuf::from("prefs.jsonl"),
            model: PathBuf::from("model.txt"),
            runs: PathBuf::from("runs"),
            template: None,
            cache: PathBuf::from("cache"),
            log: None,
            schema: None,
        }
    }
}

impl PathsConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.output.join(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub bandit: BanditConfig,
    pub oracle: OracleConfig,
    pub generation: GenerationConfig,
    pub pretrain: PretrainConfig,
    pub run: RunConfig,
    pub paths: PathsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(ScenarioKind::Donation)
    }
}

impl ExperimentConfig {
    /// Defaults of a scenario.
    pub fn preset(scenario: ScenarioKind) -> Self {
        let mut config = Self {
            seed: 0,
            scenario,
            bandit: BanditConfig::default(),
            oracle: OracleConfig::default(),
            generation: GenerationConfig::default(),
            pretrain: PretrainConfig::default(),
            run: RunConfig::default(),
            paths: PathsConfig::default(),
        };
        if scenario == ScenarioKind::Vaccine {
            config.generation.users = VACCINE_USERS;
            config.generation.mode = GenerationMode::Sparse;
            config.pretrain.steps_per_user = VACCINE_STEPS_PER_USER;
        }
        config
    }

    /// Parses a config; the scenario preset fills whatever the text omits.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let scenario = match table.get("scenario") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::Config(format!("config: scenario must be a string, got {other}"))),
            None => ScenarioKind::default(),
        };
        Self::preset(scenario).merged(table)
    }

    /// Reads `path` (or nothing) with `scenario` overriding the file's.
    pub fn load_with(path: Option<&Path>, scenario: Option<ScenarioKind>) -> Result<Self> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => toml::Table::new(),
        };
        if let Some(s) = scenario {
            table.insert("scenario".into(), toml::Value::String(s.as_str().into()));
        }
        Self::from_table(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn merged(&self, overlay: toml::Table) -> Result<Self> {
        let mut base = toml::Table::try_from(self).expect("config serializes");
        merge(&mut base, overlay);
        let config: Self = base
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Sets one dotted key, e.g. `run.steps=500`. The value is read as TOML,
    /// falling back to a bare string.
    pub fn set(&self, assignment: &str) -> Result<Self> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("expected key=value, got `{assignment}`")))?;
        let value = value.trim();
        let value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_owned()));
        let mut overlay = toml::Table::new();
        let parts: Vec<&str> = key.trim().split('.').collect();
        let mut slot = &mut overlay;
        for part in &parts[..parts.len() - 1] {
            slot = slot
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .expect("fresh table");
        }
        slot.insert(parts[parts.len() - 1].to_owned(), value);
        self.merged(overlay)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.bandit.alpha.is_finite() && self.bandit.alpha >= 0.0) {
            return bad(format!("bandit.alpha must be finite and >= 0, got {}", self.bandit.alpha));
        }
        if !(self.bandit.ridge.is_finite() && self.bandit.ridge > 0.0) {
            return bad(format!("bandit.ridge must be > 0, got {}", self.bandit.ridge));
        }
        if !(0.0..=1.0).contains(&self.oracle.noise) {
            return bad(format!("oracle.noise must be in [0, 1], got {}", self.oracle.noise));
        }
        if self.generation.repeats == 0 {
            return bad("generation.repeats must be at least 1".into());
        }
        if self.generation.pairs_per_user == 0 {
            return bad("generation.pairs_per_user must be at least 1".into());
        }
        if self.run.repetitions == 0 {
            return bad("run.repetitions must be at least 1".into());
        }
        if self.run.eval_users == 0 {
            return bad("run.eval_users must be at least 1".into());
        }
        Ok(())
    }

    /// Digest of everything that influences results. File locations are
    /// left out so the same experiment hashes alike wherever it runs.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsConfig::default();
        c.oracle.llm.cache_dir = None;
        let digest = Sha256::digest(c.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
