//! End-to-end runs: resolved run configuration, problem generation,
//! training loops with CSV logs and checkpoints, evaluation, and report
//! merging.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::environment::{ProblemSpec, Rollout, SyntheticPolicy};
use crate::error::{Error, Result};
use crate::io::{write_json, write_jsonl};
use crate::metrics::{compute_metrics, csv_header, MetricsReport};
use crate::offline::{
    build_offline_dataset, offline_train_limited, BaselineMode, BinManifest, FilterRange, OfflineConfig, OfflineMode,
    StoreRecord,
};
use crate::online::{sample_groups, OnlineConfig, StepReport, TrainerState};
use crate::process::process_train_step;
use crate::rloo::rloo_train_step;
use crate::rng::RandomSource;
use crate::sft::{build_sft_dataset, sft_loss, BucketSpec, SftBuildConfig, SftDataset, SftExample, SftRecord, SkipReason};
use crate::trajectory::{AnswerToken, DEFAULT_MAX_ACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Sft,
    Rloo,
    Process,
    OfflineOrl,
    OfflinePrl,
}

impl TrainMode {
    pub const ALL: [TrainMode; 5] = [
        TrainMode::Sft,
        TrainMode::Rloo,
        TrainMode::Process,
        TrainMode::OfflineOrl,
        TrainMode::OfflinePrl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Sft => "sft",
            TrainMode::Rloo => "rloo",
            TrainMode::Process => "process",
            TrainMode::OfflineOrl => "offline-orl",
            TrainMode::OfflinePrl => "offline-prl",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown training mode {s:?}")))
    }
}

/// Every parameter of a run, flat. Mode-dependent defaults are filled in by
/// [`RunConfig::resolve`], so a written config fully determines the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: TrainMode,
    pub problems: Option<PathBuf>,
    /// Starting policy; a mid-strength policy over `num_bins` when absent.
    pub init_checkpoint: Option<PathBuf>,
    /// SFT data from `gen-sft`; built from the starting policy when absent.
    pub sft_data: Option<PathBuf>,
    pub num_bins: usize,
    pub steps: u64,
    pub checkpoint_every: u64,
    pub lr: f64,
    pub beta: f64,
    pub clip: f64,
    pub samples_per_prompt: usize,
    pub batch_size: usize,
    pub max_rounds: usize,
    pub updates_per_batch: usize,
    pub sft_samples_per_problem: usize,
    pub buckets: BucketSpec,
    pub retry_budget: usize,
    pub filter_range: FilterRange,
    pub max_actions: usize,
    pub warmup_steps: u64,
    pub bin_width: f64,
    pub epochs: usize,
    pub baseline_mode: BaselineMode,
    /// Write the per-step reward-context group dump in process mode.
    pub dump_groups: bool,
}

impl RunConfig {
    pub fn defaults(mode: TrainMode) -> Self {
        let online = OnlineConfig::default();
        let offline = OfflineConfig::default();
        let sft = SftBuildConfig::default();
        let is_offline = matches!(mode, TrainMode::OfflineOrl | TrainMode::OfflinePrl);
        RunConfig {
            seed: 0,
            mode,
            problems: None,
            init_checkpoint: None,
            sft_data: None,
            num_bins: 4,
            steps: 500,
            checkpoint_every: 100,
            lr: match mode {
                TrainMode::Sft => 5e-6,
                _ if is_offline => offline.learning_rate,
                _ => online.learning_rate,
            },
            beta: if is_offline { offline.kl_coef } else { online.beta },
            clip: online.clip_epsilon,
            samples_per_prompt: if is_offline {
                offline.samples_per_prompt
            } else {
                online.samples_per_prompt
            },
            batch_size: if mode == TrainMode::Sft { 32 } else { online.batch_size },
            max_rounds: online.max_rounds,
            updates_per_batch: online.updates_per_batch,
            sft_samples_per_problem: sft.samples_per_problem,
            buckets: sft.buckets,
            retry_budget: sft.retry_budget,
            filter_range: offline.filter_range,
            max_actions: DEFAULT_MAX_ACTIONS,
            warmup_steps: offline.warmup_steps,
            bin_width: offline.bin_width,
            epochs: offline.epochs,
            baseline_mode: offline.baseline_mode,
            dump_groups: false,
        }
    }

    /// Layers `overrides` over `file` over the defaults of the resulting
    /// mode. Both layers are flat JSON objects with the field names above.
    pub fn resolve(file: Option<&Value>, overrides: &Map<String, Value>) -> Result<Self> {
        let mut merged = match file {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(Error::config("config file must hold a flat JSON object")),
        };
        for (k, v) in overrides {
            merged.insert(k.clone(), v.clone());
        }
        let mode = match merged.get("mode") {
            None => TrainMode::Rloo,
            Some(v) => serde_json::from_value(v.clone()).map_err(|_| Error::config(format!("unknown training mode {v}")))?,
        };
        let Value::Object(mut base) = serde_json::to_value(RunConfig::defaults(mode))? else {
            unreachable!("a struct serializes to an object")
        };
        for (k, v) in merged {
            if !base.contains_key(&k) {
                return Err(Error::config(format!("unknown config key {k:?}")));
            }
            base.insert(k, v);
        }
        let config: RunConfig = serde_json::from_value(Value::Object(base)).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bins == 0 {
            return Err(Error::config("num_bins must be positive"));
        }
        match self.mode {
            TrainMode::Sft => {
                if self.batch_size == 0 || self.sft_samples_per_problem == 0 {
                    return Err(Error::config("batch_size and sft_samples_per_problem must be positive"));
                }
                if !(self.lr.is_finite() && self.lr >= 0.0) {
                    return Err(Error::config("learning rate must be finite and non-negative"));
                }
                Ok(())
            }
            TrainMode::Rloo | TrainMode::Process => self.online().validate(),
            TrainMode::OfflineOrl | TrainMode::OfflinePrl => self.offline().validate(),
        }
    }

    pub fn online(&self) -> OnlineConfig {
        OnlineConfig {
            samples_per_prompt: self.samples_per_prompt,
            learning_rate: self.lr,
            beta: self.beta,
            clip_epsilon: self.clip,
            batch_size: self.batch_size,
            max_rounds: self.max_rounds,
            updates_per_batch: self.updates_per_batch,
        }
    }

    pub fn offline(&self) -> OfflineConfig {
        OfflineConfig {
            filter_range: self.filter_range,
            samples_per_prompt: self.samples_per_prompt,
            max_actions: self.max_actions,
            max_rounds: self.max_rounds,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            kl_coef: self.beta,
            clip_epsilon: self.clip,
            warmup_steps: self.warmup_steps,
            bin_width: self.bin_width,
            epochs: self.epochs,
            baseline_mode: self.baseline_mode,
        }
    }

    pub fn sft_build(&self) -> SftBuildConfig {
        SftBuildConfig {
            samples_per_problem: self.sft_samples_per_problem,
            buckets: self.buckets.clone(),
            retry_budget: self.retry_budget,
        }
    }
}

/// Manifest written next to a generated problem set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub count: usize,
    pub num_bins: usize,
    pub alphabet_size: usize,
    pub seed: u64,
    pub per_bin: Vec<usize>,
}

/// `count` problems, bins assigned round-robin so every bin gets
/// `count / num_bins` problems (the first `count % num_bins` bins one
/// more); golden answers uniform over the alphabet.
pub fn generate_problems(count: usize, num_bins: usize, alphabet_size: usize, seed: u64) -> Result<(Vec<ProblemSpec>, ProblemManifest)> {
    if num_bins == 0 {
        return Err(Error::config("num_bins must be positive"));
    }
    let mut rng = RandomSource::new(seed);
    let width = count.max(1).to_string().len().max(5);
    let problems = (0..count)
        .map(|i| {
            let golden = AnswerToken::new(rng.below(alphabet_size.max(1)))?;
            ProblemSpec::new(format!("p{i:0width$}"), i % num_bins, golden, alphabet_size)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut per_bin = vec![0; num_bins];
    problems.iter().for_each(|p| per_bin[p.difficulty_bin] += 1);
    Ok((
        problems,
        ProblemManifest {
            count,
            num_bins,
            alphabet_size,
            seed,
            per_bin,
        },
    ))
}

/// Manifest of a persisted SFT dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftManifest {
    pub seed: u64,
    pub samples_per_problem: usize,
    pub retry_budget: usize,
    pub buckets: BucketSpec,
    pub examples: usize,
    pub skipped: usize,
    pub skipped_by_reason: BTreeMap<SkipReason, usize>,
    /// Round count to number of examples.
    pub rounds: BTreeMap<usize, usize>,
    /// Estimated single-attempt accuracy per problem id.
    pub accuracies: BTreeMap<String, f64>,
}

pub fn sft_manifest(dataset: &SftDataset, problems: &[ProblemSpec], config: &SftBuildConfig, seed: u64) -> SftManifest {
    let mut skipped_by_reason = BTreeMap::new();
    for s in &dataset.skipped {
        *skipped_by_reason.entry(s.reason).or_default() += 1;
    }
    let mut rounds = BTreeMap::new();
    for e in &dataset.examples {
        *rounds.entry(e.rounds()).or_default() += 1;
    }
    SftManifest {
        seed,
        samples_per_problem: config.samples_per_problem,
        retry_budget: config.retry_budget,
        buckets: config.buckets.clone(),
        examples: dataset.examples.len(),
        skipped: dataset.skipped.len(),
        skipped_by_reason,
        rounds,
        accuracies: problems.iter().map(|p| p.id.clone()).zip(dataset.accuracies.iter().copied()).collect(),
    }
}

/// Writes `sft.jsonl` and `sft_manifest.json` into `dir`.
pub fn write_sft_dataset(
    dir: &Path,
    dataset: &SftDataset,
    problems: &[ProblemSpec],
    config: &SftBuildConfig,
    seed: u64,
) -> Result<SftManifest> {
    let records = dataset
        .examples
        .iter()
        .map(SftRecord::from_example)
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(&dir.join("sft.jsonl"), &records)?;
    let manifest = sft_manifest(dataset, problems, config, seed);
    write_json(&dir.join("sft_manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Pairs SFT records with their problems.
pub fn load_sft_examples(records: Vec<SftRecord>, problems: &[ProblemSpec]) -> Result<Vec<SftExample>> {
    let by_id: BTreeMap<&str, &ProblemSpec> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    records
        .into_iter()
        .map(|r| {
            let p = by_id
                .get(r.problem_id.as_str())
                .ok_or_else(|| Error::config(format!("SFT record for unknown problem {}", r.problem_id)))?;
            r.into_example(p)
        })
        .collect()
}

/// The checkpoint named by `init_checkpoint`, else a mid-strength policy.
pub fn initial_policy(config: &RunConfig) -> Result<SyntheticPolicy> {
    match &config.init_checkpoint {
        Some(path) => load_policy(path),
        None => SyntheticPolicy::mid_strength(config.num_bins),
    }
}

/// Rejects problems whose difficulty bin the policy has no parameters for.
pub fn check_problem_bins(policy: &SyntheticPolicy, problems: &[ProblemSpec]) -> Result<()> {
    match problems.iter().find(|p| p.difficulty_bin >= policy.num_bins()) {
        Some(p) => Err(Error::config(format!(
            "problem {} is in bin {} but the policy has {} bins",
            p.id,
            p.difficulty_bin,
            policy.num_bins()
        ))),
        None => Ok(()),
    }
}

pub fn load_policy(path: &Path) -> Result<SyntheticPolicy> {
    let map: BTreeMap<String, f64> = crate::io::read_json(path)?;
    SyntheticPolicy::from_checkpoint(&map)
}

pub fn save_policy(path: &Path, policy: &SyntheticPolicy) -> Result<()> {
    write_json(path, &policy.to_checkpoint())
}

/// CSV training log with a fixed header taken from the first row.
struct TrainLog {
    writer: csv::Writer<fs::File>,
    header: Option<Vec<String>>,
}

impl TrainLog {
    fn create(path: &Path) -> Result<Self> {
        Ok(TrainLog {
            writer: csv::Writer::from_path(path).map_err(csv_error)?,
            header: None,
        })
    }

    fn write(&mut self, row: &[(String, String)]) -> Result<()> {
        let names: Vec<String> = row.iter().map(|(k, _)| k.clone()).collect();
        match &self.header {
            None => {
                self.writer.write_record(&names).map_err(csv_error)?;
                self.header = Some(names);
            }
            Some(h) if *h != names => return Err(Error::config("training log columns changed mid-run")),
            Some(_) => {}
        }
        self.writer
            .write_record(row.iter().map(|(_, v)| v.as_str()))
            .map_err(csv_error)?;
        self.writer.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::config(format!("{other:?}")),
    }
}

fn report_row(r: &StepReport, baseline_mode: Option<BaselineMode>) -> Vec<(String, String)> {
    let mut row = vec![
        ("step".to_string(), r.step.to_string()),
        ("mean_reward".to_string(), r.mean_reward.to_string()),
        ("mean_advantage".to_string(), r.mean_advantage.to_string()),
        ("clip_fraction".to_string(), r.clip_fraction.to_string()),
        ("kl".to_string(), r.kl.to_string()),
        ("accuracy".to_string(), r.accuracy.to_string()),
    ];
    row.extend(r.extras.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    if let Some(m) = baseline_mode {
        row.push(("baseline_mode".to_string(), m.as_str().to_string()));
    }
    row
}

/// Up to `k` problems for `step`, drawn without replacement from a stream
/// derived from the run seed; all problems when there are at most `k`.
pub fn select_batch(problems: &[ProblemSpec], k: usize, seed: u64, step: u64) -> Vec<ProblemSpec> {
    if problems.len() <= k {
        return problems.to_vec();
    }
    let mut rng = RandomSource::derived(seed, &[BATCH_STREAM, step]);
    let mut picked = index::sample(&mut rng, problems.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| problems[i].clone()).collect()
}

const BATCH_STREAM: u64 = 0xba7c;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_policy: SyntheticPolicy,
    pub log_lines: usize,
}

/// Runs `config.steps` training steps from `init`, writing `train_log.csv`,
/// `checkpoints/step_<n>.json` and `policy.json` into `out`.
///
/// For the offline modes a step is one gradient update; sampling passes
/// repeat until the step budget is spent.
pub fn run_training(
    config: &RunConfig,
    problems: &[ProblemSpec],
    init: SyntheticPolicy,
    sft_examples: Option<Vec<SftExample>>,
    out: &Path,
) -> Result<RunSummary> {
    config.validate()?;
    if problems.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_problem_bins(&init, problems)?;
    fs::create_dir_all(out.join("checkpoints"))?;
    let mut log = TrainLog::create(&out.join("train_log.csv"))?;
    let mut state = TrainerState::new(init, config.seed);
    let mut lines = 0usize;
    let checkpoint = |state: &TrainerState, step: u64| -> Result<()> {
        if config.checkpoint_every > 0 && step > 0 && step.is_multiple_of(config.checkpoint_every) {
            save_policy(&out.join("checkpoints").join(format!("step_{step}.json")), &state.policy)?;
        }
        Ok(())
    };

    match config.mode {
        TrainMode::Sft => {
            let examples = match sft_examples {
                Some(e) => e,
                None => build_sft_dataset(&state.policy, problems, &config.sft_build(), config.seed)?.examples,
            };
            if examples.is_empty() {
                return Err(Error::EmptyDataset);
            }
            for step in 0..config.steps {
                let (dataset_loss, _) = sft_loss(&state.policy, &examples)?;
                let batch = select_examples(&examples, config.batch_size, config.seed, step);
                let (loss, grad) = sft_loss(&state.policy, &batch)?;
                state.policy.apply_gradient(&grad, config.lr)?;
                log.write(&[
                    ("step".into(), step.to_string()),
                    ("loss".into(), loss.to_string()),
                    ("dataset_loss".into(), dataset_loss.to_string()),
                ])?;
                lines += 1;
                checkpoint(&state, step + 1)?;
            }
        }
        TrainMode::Rloo | TrainMode::Process => {
            let online = config.online();
            let mut dump = match (config.mode, config.dump_groups) {
                (TrainMode::Process, true) => Some(Vec::new()),
                _ => None,
            };
            for step in 0..config.steps {
                let batch = select_batch(problems, online.batch_size, config.seed, step);
                let report = if config.mode == TrainMode::Rloo {
                    rloo_train_step(&mut state, &batch, &online)?
                } else {
                    let out = process_train_step(&mut state, &batch, &online)?;
                    if let Some(d) = dump.as_mut() {
                        d.extend(out.groups.into_iter().map(|g| GroupDumpLine {
                            step,
                            context_key: g.context_key.to_string(),
                            group_size: g.group_size,
                            baseline: g.baseline,
                        }));
                    }
                    out.report
                };
                log.write(&report_row(&report, None))?;
                lines += 1;
                checkpoint(&state, step + 1)?;
            }
            if let Some(d) = dump {
                write_jsonl(&out.join("groups.jsonl"), &d)?;
            }
        }
        TrainMode::OfflineOrl | TrainMode::OfflinePrl => {
            let offline = config.offline();
            let mode = if config.mode == TrainMode::OfflineOrl {
                OfflineMode::Outcome
            } else {
                OfflineMode::Process
            };
            let mut iterations = Vec::new();
            let mut iteration = 0u64;
            while state.step < config.steps {
                let dataset = build_offline_dataset(&state.policy, problems, &offline, config.seed, iteration)?;
                if dataset.trajectory_count() == 0 {
                    return Err(Error::NoTrainingData);
                }
                let records = dataset
                    .bins
                    .iter()
                    .flat_map(|b| &b.trajectories)
                    .map(StoreRecord::from_rollout)
                    .collect::<Result<Vec<_>>>()?;
                write_jsonl(&out.join("offline_store.jsonl"), &records)?;
                let manifest: Vec<BinManifest> = dataset.bins.iter().map(BinManifest::from).collect();
                write_json(&out.join("bins.json"), &manifest)?;

                let remaining = (config.steps - state.step) as usize;
                let start = state.step;
                let report = offline_train_limited(
                    &mut state,
                    &dataset.bins,
                    &offline,
                    mode,
                    dataset.sample_accuracy,
                    remaining,
                )?;
                for r in &report.updates {
                    log.write(&report_row(r, Some(offline.baseline_mode)))?;
                    lines += 1;
                }
                for s in start + 1..=state.step {
                    checkpoint(&state, s)?;
                }
                iterations.push(IterationLine {
                    iteration,
                    retained_prompts: dataset.retained.len(),
                    rejection: dataset.rejection,
                    bin_returns: report.bin_returns,
                    updates: report.updates.len(),
                });
                iteration += 1;
            }
            write_jsonl(&out.join("offline_iterations.jsonl"), &iterations)?;
        }
    }
    save_policy(&out.join("policy.json"), &state.policy)?;
    Ok(RunSummary {
        final_policy: state.policy,
        log_lines: lines,
    })
}

#[derive(Serialize)]
struct GroupDumpLine {
    step: u64,
    context_key: String,
    group_size: usize,
    baseline: f64,
}

#[derive(Serialize)]
struct IterationLine {
    iteration: u64,
    retained_prompts: usize,
    rejection: crate::offline::RejectionReport,
    bin_returns: Vec<crate::offline::BinReturn>,
    updates: usize,
}

fn select_examples(examples: &[SftExample], k: usize, seed: u64, step: u64) -> Vec<SftExample> {
    if examples.len() <= k {
        return examples.to_vec();
    }
    let mut rng = RandomSource::derived(seed, &[BATCH_STREAM, step]);
    let mut picked = index::sample(&mut rng, examples.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| examples[i].clone()).collect()
}

/// Samples `n_samples` trajectories per problem and computes the metrics.
pub fn evaluate(
    policy: &SyntheticPolicy,
    problems: &[ProblemSpec],
    n_samples: usize,
    max_rounds: usize,
    seed: u64,
) -> Result<(MetricsReport, Vec<Rollout>)> {
    if n_samples == 0 || max_rounds == 0 {
        return Err(Error::config("n_samples and max_rounds must be positive"));
    }
    check_problem_bins(policy, problems)?;
    let rollouts: Vec<Rollout> = sample_groups(policy, problems, n_samples, max_rounds, seed ^ EVAL_STREAM, 0)?
        .into_iter()
        .flatten()
        .collect();
    Ok((compute_metrics(&rollouts)?, rollouts))
}

const EVAL_STREAM: u64 = 0xe7a1;

/// Writes `metrics.json` and a one-row `metrics.csv`.
pub fn write_metrics(dir: &Path, report: &MetricsReport, num_bins: usize) -> Result<()> {
    write_json(&dir.join("metrics.json"), report)?;
    let bins: Vec<usize> = (0..num_bins).collect();
    let mut w = csv::Writer::from_path(dir.join("metrics.csv")).map_err(csv_error)?;
    w.write_record(csv_header(&bins)).map_err(csv_error)?;
    w.write_record(report.csv_row(&bins)).map_err(csv_error)?;
    w.flush()?;
    Ok(())
}

/// One run's single-row metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub run: String,
    pub header: Vec<String>,
    pub row: Vec<String>,
}

pub fn read_metrics_table(run: &str, csv_text: &str) -> Result<MetricsTable> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let mut rows = reader.records();
    let row: Vec<String> = rows
        .next()
        .ok_or_else(|| Error::Data {
            line: 2,
            message: format!("{run}: metrics table has no data row"),
        })?
        .map_err(csv_error)?
        .iter()
        .map(String::from)
        .collect();
    Ok(MetricsTable {
        run: run.to_string(),
        header,
        row,
    })
}

/// Stacks tables with identical columns under a leading `run` column.
pub fn merge_metric_tables(tables: &[MetricsTable]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let first = tables.first().ok_or_else(|| Error::config("no runs to report"))?;
    for t in &tables[1..] {
        let n = first.header.len().max(t.header.len());
        for i in 0..n {
            let (a, b) = (first.header.get(i), t.header.get(i));
            if a != b {
                let column = b.or(a).expect("one side has the column");
                return Err(Error::config(format!(
                    "run {} does not match run {} at column {column:?}",
                    t.run, first.run
                )));
            }
        }
    }
    let mut header = vec!["run".to_string()];
    header.extend(first.header.iter().cloned());
    let rows = tables
        .iter()
        .map(|t| std::iter::once(t.run.clone()).chain(t.row.iter().cloned()).collect())
        .collect();
    Ok((header, rows))
}

/// Writes `comparison.csv` (wide) and `comparison_long.csv`
/// (`run,metric,value`).
pub fn write_comparison(dir: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut wide = csv::Writer::from_path(dir.join("comparison.csv")).map_err(csv_error)?;
    wide.write_record(header).map_err(csv_error)?;
    for r in rows {
        wide.write_record(r).map_err(csv_error)?;
    }
    wide.flush()?;
    let mut long = csv::Writer::from_path(dir.join("comparison_long.csv")).map_err(csv_error)?;
    long.write_record(["run", "metric", "value"]).map_err(csv_error)?;
    for r in rows {
        for (name, value) in header.iter().zip(r).skip(1) {
            long.write_record([r[0].as_str(), name.as_str(), value.as_str()]).map_err(csv_error)?;
        }
    }
    long.flush()?;
    Ok(())
}
