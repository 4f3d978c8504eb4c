use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cbli_core::config::{ExperimentConfig, OracleKind, ScenarioKind};
use cbli_core::data::{
    load_conjoint_log, load_model, load_preference_dataset, load_users, save_model,
    save_preference_dataset, save_users, write_conjoint_log, ConjointLog, ConjointSchema,
    ContextEncoder, ContextMask, DataError, ItemCatalog, UserFeatureSpec, UsersHeader,
    FORMAT_VERSION,
};
use cbli_core::env::{
    pretrain, rank_order_check, Pretraining, RegretTrace, SleepingReplayEnvironment, StandardEnvironment,
    StandardUser,
};
use cbli_core::experiment::{compare_replay, compare_standard, Comparison};
use cbli_core::generate::{
    generate_dense, generate_sparse, generate_sparse_on_pairs, render_persona, sample_users,
    GenerationMode, GenerationOptions,
};
use cbli_core::oracle::{LlmClient, LlmOracle, PreferenceOracle, PromptTemplate, ReplayOracle, TemplateMode};
use cbli_core::scenario::{DonationScenario, VaccineScenario};
use cbli_core::{Error, LinUcbModel, Result, SyntheticUser};
use serde::{Deserialize, Serialize};

/// Seed offsets of the user populations, so training and evaluation users
/// never coincide.
const TRAIN_USERS_OFFSET: u64 = 1000;
const EVAL_USERS_OFFSET: u64 = 5000;
const LOG_OFFSET: u64 = 100;

pub struct Context {
    config: ExperimentConfig,
    hash: String,
}

/// Per-run outcome written next to the traces.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: String,
    pub steps: usize,
    pub repetitions: usize,
    pub seeds: Vec<u64>,
    pub reduction_percent: Option<f64>,
    pub per_run_reduction: Vec<Option<f64>>,
    pub pretrained_mean: f64,
    pub pretrained_variance: f64,
    pub cold_mean: f64,
    pub cold_variance: f64,
    pub provenance: BTreeMap<String, String>,
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    DataError::Io {
        path: path.display().to_string(),
        source: e,
    }
    .into()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?))
}

fn ensure_parent(path: &Path) -> Result<()> {
    drop(create(path)?);
    Ok(())
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Self {
        let hash = config.hash();
        Self { config, hash }
    }

    fn out(&self, p: &Path) -> PathBuf {
        self.config.paths.resolve(p)
    }

    fn provenance(&self, command: &str) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("cbli_version".to_owned(), env!("CARGO_PKG_VERSION").to_owned()),
            ("command".to_owned(), command.to_owned()),
            ("config_hash".to_owned(), self.hash.clone()),
            ("format_version".to_owned(), FORMAT_VERSION.to_string()),
            ("scenario".to_owned(), self.config.scenario.to_string()),
            ("seed".to_owned(), self.config.seed.to_string()),
        ])
    }

    fn schema(&self) -> Result<ConjointSchema> {
        match &self.config.paths.schema {
            Some(p) => Ok(ConjointSchema::load(p)?),
            None => Ok(VaccineScenario::default_schema()),
        }
    }

    fn user_spec(&self) -> Result<UserFeatureSpec> {
        match self.config.scenario {
            ScenarioKind::Donation => Ok(DonationScenario::user_spec()),
            ScenarioKind::Vaccine => Ok(self.schema()?.user_spec()?),
        }
    }

    /// Encoder of the configured context mask.
    fn encoder(&self, spec: &UserFeatureSpec) -> Result<ContextEncoder> {
        let partial = match &self.config.run.partial_personal {
            Some(cols) => cols.clone(),
            None => self.schema()?.partial_personal(),
        };
        let mask = ContextMask::resolve(self.config.run.mask, spec, &partial)?;
        Ok(ContextEncoder::new(spec, &mask)?)
    }

    fn log(&self) -> Result<ConjointLog> {
        let path = self
            .config
            .paths
            .log
            .as_ref()
            .ok_or_else(|| Error::Config("no conjoint log configured (paths.log or --log)".into()))?;
        Ok(load_conjoint_log(path, &self.schema()?)?)
    }

    pub fn gen_users(&self) -> Result<()> {
        let spec = self.user_spec()?;
        let n = self.config.generation.users;
        let seed = self.config.seed.wrapping_add(TRAIN_USERS_OFFSET);
        let users = sample_users(&spec, n, seed)?;
        let path = self.out(&self.config.paths.users);
        ensure_parent(&path)?;
        let header = UsersHeader {
            seed,
            provenance: self.provenance("gen-users"),
        };
        save_users(&users, &header, &path)?;
        println!("wrote {} users to {}", users.len(), path.display());
        Ok(())
    }

    fn llm_oracle(&self) -> Result<LlmOracle> {
        let mut llm = self.config.oracle.llm.clone();
        llm.cache_dir = Some(self.out(&self.config.paths.cache));
        let template = match (&self.config.paths.template, self.config.scenario) {
            (Some(p), _) => PromptTemplate::load(p, TemplateMode::Pairwise)?,
            (None, ScenarioKind::Donation) => PromptTemplate::donation_pairwise(),
            (None, ScenarioKind::Vaccine) => PromptTemplate::vaccine_pairwise(),
        };
        Ok(LlmOracle::new(Arc::new(LlmClient::new(llm)?), template)?)
    }

    pub fn gen_prefs(&self) -> Result<()> {
        let c = &self.config;
        let options = GenerationOptions {
            repeats: c.generation.repeats,
            seed: c.seed,
            pairs_per_user: c.generation.pairs_per_user,
        };
        let mut dataset = if c.oracle.kind == OracleKind::Replay {
            self.replay_prefs(options)?
        } else {
            let (_, users) = load_users(&self.out(&c.paths.users))?;
            match (c.scenario, c.generation.mode) {
                (ScenarioKind::Donation, GenerationMode::Dense) => {
                    let scenario = DonationScenario::new(c.oracle.truth_seed);
                    let oracle: Box<dyn PreferenceOracle> = match c.oracle.kind {
                        OracleKind::Llm => Box::new(self.llm_oracle()?),
                        _ => Box::new(scenario.oracle(&users, c.oracle.noise)?),
                    };
                    generate_dense(&users, &scenario.arms, oracle.as_ref(), options)?
                }
                (ScenarioKind::Vaccine, GenerationMode::Sparse) => {
                    let scenario = VaccineScenario::new(c.oracle.truth_seed);
                    let oracle: Box<dyn PreferenceOracle> = match c.oracle.kind {
                        OracleKind::Llm => Box::new(self.llm_oracle()?),
                        _ => Box::new(scenario.oracle(&users, c.oracle.noise)?),
                    };
                    generate_sparse(&users, &scenario.catalog, oracle.as_ref(), options)?
                }
                (s, m) => {
                    return Err(Error::Config(format!("the {s} scenario does not support {m} generation")));
                }
            }
        };
        dataset.header.provenance = self.provenance("gen-prefs");
        let path = self.out(&c.paths.dataset);
        ensure_parent(&path)?;
        save_preference_dataset(&dataset, &path)?;
        println!(
            "wrote {} users ({} dropped, {} failed queries) to {}",
            dataset.len(),
            dataset.header.dropped_users,
            dataset.header.failed_queries,
            path.display()
        );
        Ok(())
    }

    /// Recorded survey choices as the oracle, asked about the pairs each
    /// respondent saw.
    fn replay_prefs(&self, options: GenerationOptions) -> Result<cbli_core::PreferenceDataset> {
        let log = self.log()?;
        let spec = self.schema()?.user_spec()?;
        let encoder = ContextEncoder::full(&spec);
        let users = log
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                Ok(SyntheticUser {
                    id: i as u64,
                    features: u.features.clone(),
                    persona: render_persona(&u.features)?,
                    context: encoder.encode(&u.features)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = vec![Vec::new(); users.len()];
        for t in &log.tasks {
            pairs[t.user].push((t.first, t.second));
        }
        let oracle: ReplayOracle = log
            .tasks
            .iter()
            .map(|t| (t.user as u64, t.first, t.second, t.choice))
            .collect();
        generate_sparse_on_pairs(&users, &log.catalog, &oracle, &pairs, options)
    }

    pub fn pretrain(&self) -> Result<()> {
        let c = &self.config;
        let dataset = load_preference_dataset(&self.out(&c.paths.dataset))?;
        let steps = c.pretrain.steps_for(dataset.len());
        let spec = self.user_spec()?;
        let encoder = self.encoder(&spec)?;
        let mut model;
        match dataset.mode() {
            GenerationMode::Dense => {
                let dim = dataset.header.arms * encoder.dim();
                model = LinUcbModel::new(dim, c.bandit.alpha, c.bandit.ridge)?;
                let phase = Pretraining {
                    steps,
                    seed: c.seed,
                    all_arms: c.pretrain.all_arms,
                    catalog: None,
                    encoder: Some(&encoder),
                };
                pretrain(&mut model, &dataset, phase)?;
            }
            GenerationMode::Sparse => {
                let catalog = self.catalog_for(dataset.header.catalog_id.as_deref())?;
                let dim = encoder.dim() * catalog.feature_dim();
                model = LinUcbModel::new(dim, c.bandit.alpha, c.bandit.ridge)?;
                let phase = Pretraining {
                    steps,
                    seed: c.seed,
                    all_arms: c.pretrain.all_arms,
                    catalog: Some(&catalog),
                    encoder: Some(&encoder),
                };
                pretrain(&mut model, &dataset, phase)?;
            }
        }
        let mut provenance = self.provenance("pretrain");
        provenance.insert("mask".into(), c.run.mask.to_string());
        provenance.insert("steps".into(), steps.to_string());
        provenance.insert("dataset_oracle".into(), dataset.header.oracle.clone());
        let path = self.out(&c.paths.model);
        ensure_parent(&path)?;
        save_model(&model, &provenance, &path)?;
        println!("pre-trained {steps} steps (dim {}) into {}", model.dim(), path.display());
        Ok(())
    }

    /// The scenario catalog, or the catalog of the configured log, whichever
    /// the dataset was generated over.
    fn catalog_for(&self, id: Option<&str>) -> Result<ItemCatalog> {
        let scenario = VaccineScenario::new(self.config.oracle.truth_seed).catalog;
        if id.is_none() || id == Some(scenario.id().as_str()) {
            return Ok(scenario);
        }
        if self.config.paths.log.is_some() {
            let catalog = self.log()?.catalog;
            if id == Some(catalog.id().as_str()) {
                return Ok(catalog);
            }
        }
        Err(Error::Config(
            "dataset was generated over a catalog that is neither the scenario's nor the configured log's".into(),
        ))
    }

    fn seeds(&self) -> Vec<u64> {
        (0..self.config.run.repetitions as u64)
            .map(|r| self.config.seed.wrapping_add(r))
            .collect()
    }

    fn model(&self) -> Result<LinUcbModel> {
        let path = self.out(&self.config.paths.model);
        let (mut model, _) = load_model(&path)?;
        model.set_alpha(self.config.bandit.alpha)?;
        Ok(model)
    }

    pub fn run(&self) -> Result<()> {
        let c = &self.config;
        if c.scenario != ScenarioKind::Donation {
            return Err(Error::Config(format!(
                "the {} scenario is evaluated on a recorded log; use `replay`",
                c.scenario
            )));
        }
        let model = self.model()?;
        let scenario = DonationScenario::new(c.oracle.truth_seed);
        let eval = sample_users(&scenario.spec, c.run.eval_users, c.seed.wrapping_add(EVAL_USERS_OFFSET))?;
        let env = scenario.environment(&eval, c.run.feedback)?;
        // Rewards follow the full profile; the learner sees the masked one.
        let encoder = self.encoder(&scenario.spec)?;
        let users = env
            .users()
            .iter()
            .zip(&eval)
            .map(|(u, e)| {
                Ok(StandardUser {
                    context: encoder.encode(&e.features)?,
                    rewards: u.rewards.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let env = StandardEnvironment::new(users, c.run.feedback)?;
        let seeds = self.seeds();
        let comparison = compare_standard(&model, &env, c.run.steps, &seeds)?;
        self.write_runs("standard", &comparison, &seeds)
    }

    pub fn replay(&self) -> Result<()> {
        let c = &self.config;
        let log = self.log()?;
        let spec = self.schema()?.user_spec()?;
        let encoder = self.encoder(&spec)?;
        let env = SleepingReplayEnvironment::from_log(&log, &encoder)?;
        let model = self.model()?;
        let seeds = self.seeds();
        let comparison = compare_replay(&model, &env, c.run.steps, c.run.update, &seeds)?;
        self.write_runs("replay", &comparison, &seeds)
    }

    fn write_runs(&self, kind: &str, comparison: &Comparison, seeds: &[u64]) -> Result<()> {
        let dir = self.out(&self.config.paths.runs);
        let mut provenance = self.provenance(kind);
        provenance.insert("mask".into(), self.config.run.mask.to_string());
        let write_trace = |name: String, trace: &RegretTrace| -> Result<()> {
            let path = dir.join(name);
            let mut w = create(&path)?;
            let mut trace = trace.clone();
            for (k, v) in &provenance {
                trace = trace.with_meta(k, v);
            }
            trace.write_tsv(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(&path, e))
        };
        for (r, (p, cold)) in comparison.pretrained.iter().zip(&comparison.cold).enumerate() {
            write_trace(format!("pretrained_{r}.tsv"), p)?;
            write_trace(format!("cold_{r}.tsv"), cold)?;
        }
        let (p, cold) = comparison.summaries()?;
        for (name, s) in [("summary_pretrained.tsv", &p), ("summary_cold.tsv", &cold)] {
            let path = dir.join(name);
            let mut w = create(&path)?;
            s.write_tsv(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(&path, e))?;
        }
        let last = comparison.steps.saturating_sub(1);
        let at = |v: &[f64]| v.get(last).copied().unwrap_or(0.0);
        let summary = RunSummary {
            kind: kind.to_owned(),
            steps: comparison.steps,
            repetitions: seeds.len(),
            seeds: seeds.to_vec(),
            reduction_percent: comparison.mean_reduction()?,
            per_run_reduction: comparison.per_run()?,
            pretrained_mean: at(&p.mean),
            pretrained_variance: at(&p.variance),
            cold_mean: at(&cold.mean),
            cold_variance: at(&cold.variance),
            provenance,
        };
        let path = dir.join("summary.json");
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &summary)
            .map_err(std::io::Error::from)
            .and_then(|_| writeln!(w))
            .and_then(|_| w.flush())
            .map_err(|e| io_error(&path, e))?;
        println!(
            "{kind}: T = {}, {} runs, cumulative regret {:.2} (pre-trained) vs {:.2} (cold start), reduction {}",
            summary.steps,
            summary.repetitions,
            summary.pretrained_mean,
            summary.cold_mean,
            fmt_reduction(summary.reduction_percent)
        );
        Ok(())
    }

    pub fn check_rank(&self, p: &[f64], trials: u64, json: bool) -> Result<()> {
        let report = rank_order_check(p, trials, self.config.seed)?;
        if json {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            return Ok(());
        }
        println!("item\tp\ttheoretical\tempirical");
        for (i, ((u, t), e)) in report
            .utilities
            .iter()
            .zip(&report.theoretical)
            .zip(&report.empirical)
            .enumerate()
        {
            println!("{i}\t{u}\t{t:.4}\t{e:.4}");
        }
        println!("band\t{:.4}", report.band);
        println!("within_band\t{}", report.within_band);
        println!("order_preserved\t{}", report.order_preserved);
        Ok(())
    }

    pub fn report(&self, paths: &[PathBuf]) -> Result<()> {
        let default = [self.out(&self.config.paths.runs)];
        let paths = if paths.is_empty() { &default[..] } else { paths };
        println!("| source | kind | T | runs | cold start | pre-trained | reduction |");
        println!("|---|---|---|---|---|---|---|");
        for p in paths {
            let file = if p.is_dir() { p.join("summary.json") } else { p.clone() };
            let text = std::fs::read_to_string(&file).map_err(|e| io_error(&file, e))?;
            let s: RunSummary = serde_json::from_str(&text)
                .map_err(|e| DataError::Format(format!("{}: {e}", file.display())))?;
            println!(
                "| {} | {} | {} | {} | {:.2} ± {:.2} | {:.2} ± {:.2} | {} |",
                p.display(),
                s.kind,
                s.steps,
                s.repetitions,
                s.cold_mean,
                s.cold_variance.sqrt(),
                s.pretrained_mean,
                s.pretrained_variance.sqrt(),
                fmt_reduction(s.reduction_percent)
            );
        }
        Ok(())
    }

    pub fn synth_log(&self, participants: usize, tasks: usize) -> Result<()> {
        let c = &self.config;
        let scenario = VaccineScenario::new(c.oracle.truth_seed);
        let rows = scenario.synthetic_log(participants, tasks, c.seed.wrapping_add(LOG_OFFSET))?;
        let log_path = match &c.paths.log {
            Some(p) => p.clone(),
            None => self.out(Path::new("conjoint.csv")),
        };
        let w = create(&log_path)?;
        write_conjoint_log(w, &scenario.schema, &rows)?;
        let schema_path = match &c.paths.schema {
            Some(p) => p.clone(),
            None => self.out(Path::new("schema.toml")),
        };
        let mut w = create(&schema_path)?;
        w.write_all(scenario.schema.to_toml().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| io_error(&schema_path, e))?;
        println!(
            "wrote {} tasks from {participants} participants to {} (schema {})",
            rows.len(),
            log_path.display(),
            schema_path.display()
        );
        Ok(())
    }
}

fn fmt_reduction(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.2}%"))
}
