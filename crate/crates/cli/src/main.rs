use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use trialrl_core::io::{read_json, read_jsonl, write_json, write_jsonl};
use trialrl_core::runner::{
    check_problem_bins, evaluate, generate_problems, initial_policy, load_policy, load_sft_examples, merge_metric_tables,
    read_metrics_table, run_training, write_comparison, write_metrics, write_sft_dataset, RunConfig, TrainMode,
};
use trialrl_core::sft::{build_sft_dataset, SftRecord};
use trialrl_core::{Error, ProblemSpec};

#[derive(Parser)]
#[command(name = "trialrl", version, about = "Trial-and-error reasoning RL on a synthetic policy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic problem set.
    GenProblems {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        num_bins: usize,
        #[arg(long, default_value_t = 8)]
        alphabet_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build difficulty-adaptive SFT data from a policy.
    GenSft(RunArgs),
    /// Train a policy.
    Train(RunArgs),
    /// Evaluate a policy checkpoint.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        problems: PathBuf,
        #[arg(long, default_value_t = 4)]
        n_samples: usize,
        #[arg(long, default_value_t = 4)]
        max_rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge the metrics of several run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    problems: Option<PathBuf>,
    /// sft, rloo, process, offline-orl or offline-prl
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    samples_per_prompt: Option<usize>,
    /// Accuracy window `lo:hi` for offline prompt filtering.
    #[arg(long)]
    filter_range: Option<String>,
    #[arg(long)]
    baseline_mode: Option<String>,
    /// Starting policy checkpoint.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// SFT data written by gen-sft: its output directory or the sft.jsonl inside.
    #[arg(long)]
    sft_data: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("seed", self.seed.map(|v| json!(v)));
        put("problems", self.problems.as_ref().map(|v| json!(v)));
        put("mode", self.mode.as_ref().map(|v| json!(v)));
        put("steps", self.steps.map(|v| json!(v)));
        put("lr", self.lr.map(|v| json!(v)));
        put("beta", self.beta.map(|v| json!(v)));
        put("clip", self.clip.map(|v| json!(v)));
        put("samples_per_prompt", self.samples_per_prompt.map(|v| json!(v)));
        put("filter_range", self.filter_range.as_ref().map(|v| json!(v)));
        put("baseline_mode", self.baseline_mode.as_ref().map(|v| json!(v)));
        put("init_checkpoint", self.policy.as_ref().map(|v| json!(v)));
        put("sft_data", self.sft_data.as_ref().map(|v| json!(v)));
        m
    }

    fn resolve(&self, forced_mode: Option<TrainMode>) -> Result<RunConfig, Error> {
        let file: Option<Value> = self.config.as_deref().map(|p| at(p, read_json(p))).transpose()?;
        let mut overrides = self.overrides();
        if let Some(mode) = forced_mode {
            overrides.insert("mode".into(), json!(mode));
        }
        RunConfig::resolve(file.as_ref(), &overrides)
    }
}

fn load_problems(config: &RunConfig) -> Result<Vec<ProblemSpec>, Error> {
    let path = config
        .problems
        .as_deref()
        .ok_or_else(|| Error::Config("no problem set given (--problems)".into()))?;
    at(path, read_jsonl(path))
}

/// Prefixes I/O failures with the offending path.
fn at<T>(path: &Path, r: Result<T, Error>) -> Result<T, Error> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn at_policy(config: &RunConfig) -> Result<trialrl_core::SyntheticPolicy, Error> {
    match &config.init_checkpoint {
        Some(p) => at(p, initial_policy(config)),
        None => initial_policy(config),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::NonFinite(_) => 3,
        _ => 2,
    }
}

#[derive(Serialize)]
struct EvalConfig<'a> {
    policy: &'a Path,
    problems: &'a Path,
    n_samples: usize,
    max_rounds: usize,
    seed: u64,
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::GenProblems {
            count,
            num_bins,
            alphabet_size,
            seed,
            out,
        } => {
            fs::create_dir_all(&out)?;
            let (problems, manifest) = generate_problems(count, num_bins, alphabet_size, seed)?;
            write_jsonl(&out.join("problems.jsonl"), &problems)?;
            write_json(&out.join("problems_manifest.json"), &manifest)?;
            eprintln!("wrote {count} problems to {}", out.display());
        }
        Command::GenSft(args) => {
            let config = args.resolve(Some(TrainMode::Sft))?;
            let problems = load_problems(&config)?;
            let policy = at_policy(&config)?;
            check_problem_bins(&policy, &problems)?;
            fs::create_dir_all(&args.out)?;
            write_json(&args.out.join("config.json"), &config)?;
            let build = config.sft_build();
            let dataset = build_sft_dataset(&policy, &problems, &build, config.seed)?;
            let manifest = write_sft_dataset(&args.out, &dataset, &problems, &build, config.seed)?;
            eprintln!(
                "wrote {} SFT examples ({} problems skipped) to {}",
                manifest.examples,
                manifest.skipped,
                args.out.display()
            );
        }
        Command::Train(args) => {
            let config = args.resolve(None)?;
            let problems = load_problems(&config)?;
            let policy = at_policy(&config)?;
            let sft = match (&config.sft_data, config.mode) {
                (Some(path), TrainMode::Sft) => {
                    let path = if path.is_dir() { path.join("sft.jsonl") } else { path.clone() };
                    Some(load_sft_examples(at(&path, read_jsonl::<SftRecord>(&path))?, &problems)?)
                }
                _ => None,
            };
            fs::create_dir_all(&args.out)?;
            write_json(&args.out.join("config.json"), &config)?;
            let summary = run_training(&config, &problems, policy, sft, &args.out)?;
            eprintln!("{} mode: {} log rows in {}", config.mode, summary.log_lines, args.out.display());
        }
        Command::Eval {
            policy,
            problems,
            n_samples,
            max_rounds,
            seed,
            out,
        } => {
            let model = at(&policy, load_policy(&policy))?;
            let set: Vec<ProblemSpec> = at(&problems, read_jsonl(&problems))?;
            let (report, _) = evaluate(&model, &set, n_samples, max_rounds, seed)?;
            fs::create_dir_all(&out)?;
            write_json(
                &out.join("config.json"),
                &EvalConfig {
                    policy: &policy,
                    problems: &problems,
                    n_samples,
                    max_rounds,
                    seed,
                },
            )?;
            write_metrics(&out, &report, model.num_bins())?;
            eprintln!("final accuracy {:?} over {} trajectories", report.final_accuracy.value(), report.trajectories);
        }
        Command::Report { runs, out } => {
            let tables = runs
                .iter()
                .map(|dir| {
                    let path = dir.join("metrics.csv");
                    let text = at(&path, fs::read_to_string(&path).map_err(Error::from))?;
                    let name = dir
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_else(|| dir.display().to_string());
                    read_metrics_table(&name, &text)
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let (header, rows) = merge_metric_tables(&tables)?;
            fs::create_dir_all(&out)?;
            write_comparison(&out, &header, &rows)?;
            eprintln!("merged {} runs into {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
