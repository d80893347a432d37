//! Offline RL: one sampling pass per iteration, then prompt filtering by
//! accuracy, rejection sampling, accuracy binning, and clipped updates
//! against a fixed reference policy with accuracy-grouped baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::{ProblemSpec, Rollout, SyntheticPolicy};
use crate::error::{Error, Result};
use crate::online::{check_common, mean, sample_groups, StepReport, TrainerState};
use crate::process::{advantage_means_by_kind, per_action_surrogate_loss};
use crate::rewards::{action_rewards, outcome_reward, Reward, RewardContext};
use crate::rloo::trajectory_surrogate_loss;
use crate::trajectory::{validate_trajectory, RejectReason, Trajectory, ValidationResult, DEFAULT_MAX_ACTIONS};

/// Closed accuracy interval `[lo, hi]`, written `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FilterRange {
    pub lo: f64,
    pub hi: f64,
}

impl FilterRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::config(format!("filter range must satisfy 0 <= lo < hi <= 1, got {lo}:{hi}")));
        }
        Ok(FilterRange { lo, hi })
    }

    pub fn contains(&self, accuracy: f64) -> bool {
        self.lo <= accuracy && accuracy <= self.hi
    }
}

impl Default for FilterRange {
    fn default() -> Self {
        FilterRange { lo: 0.1, hi: 0.7 }
    }
}

impl FromStr for FilterRange {
    type Err = Error;

    /// Parses `lo:hi`.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("filter range {s:?} is not of the form lo:hi")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("filter range bound {v:?} is not a number")))
        };
        FilterRange::new(parse(lo)?, parse(hi)?)
    }
}

impl TryFrom<String> for FilterRange {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FilterRange> for String {
    fn from(r: FilterRange) -> Self {
        r.to_string()
    }
}

impl fmt::Display for FilterRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Mean reward at the same action index within the accuracy bin.
    PositionGroup,
    /// Mean reward of actions sharing the reward context within the bin.
    RewardContextGroup,
    /// Mean reward of actions sharing the reward context across all bins.
    PlainRewardContext,
}

impl BaselineMode {
    pub const ALL: [BaselineMode; 3] = [
        BaselineMode::PositionGroup,
        BaselineMode::RewardContextGroup,
        BaselineMode::PlainRewardContext,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMode::PositionGroup => "position_group",
            BaselineMode::RewardContextGroup => "reward_context_group",
            BaselineMode::PlainRewardContext => "plain_reward_context",
        }
    }
}

impl FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown baseline mode {s:?}")))
    }
}

/// Whether offline updates credit whole trajectories or single actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfflineMode {
    Outcome,
    Process,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineConfig {
    pub filter_range: FilterRange,
    pub samples_per_prompt: usize,
    pub max_actions: usize,
    /// Round cap used while sampling; unterminated samples are rejected.
    pub max_rounds: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kl_coef: f64,
    pub clip_epsilon: f64,
    pub warmup_steps: u64,
    pub bin_width: f64,
    pub epochs: usize,
    pub baseline_mode: BaselineMode,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig {
            filter_range: FilterRange::default(),
            samples_per_prompt: 8,
            max_actions: DEFAULT_MAX_ACTIONS,
            max_rounds: 4,
            batch_size: 64,
            learning_rate: 5e-7,
            kl_coef: 0.1,
            clip_epsilon: 0.2,
            warmup_steps: 5,
            bin_width: 0.1,
            epochs: 1,
            baseline_mode: BaselineMode::PositionGroup,
        }
    }
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<()> {
        FilterRange::new(self.filter_range.lo, self.filter_range.hi)?;
        check_common(self.learning_rate, self.kl_coef, self.clip_epsilon)?;
        bin_count(self.bin_width)?;
        if self.samples_per_prompt == 0 || self.batch_size == 0 || self.max_rounds == 0 || self.epochs == 0 {
            return Err(Error::config(
                "samples_per_prompt, batch_size, max_rounds and epochs must be positive",
            ));
        }
        Ok(())
    }

    /// Linear warmup from zero: `lr * min(1, (t + 1) / warmup)`.
    pub fn learning_rate_at(&self, update: u64) -> f64 {
        if self.warmup_steps == 0 {
            self.learning_rate
        } else {
            self.learning_rate * ((update + 1) as f64 / self.warmup_steps as f64).min(1.0)
        }
    }
}

/// Ids whose accuracy lies in the closed `range`, in id order.
pub fn filter_prompts(accuracies: &BTreeMap<String, f64>, range: FilterRange) -> Vec<String> {
    accuracies
        .iter()
        .filter(|(_, a)| range.contains(**a))
        .map(|(id, _)| id.clone())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub accepted: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl RejectionReport {
    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejected.get(&reason).copied().unwrap_or(0)
    }

    pub fn total_rejected(&self) -> usize {
        self.rejected.values().sum()
    }
}

/// Keeps the rollouts that pass [`validate_trajectory`], in order.
pub fn reject_offline(batch: Vec<Rollout>, max_actions: usize) -> (Vec<Rollout>, RejectionReport) {
    let mut report = RejectionReport::default();
    let kept = batch
        .into_iter()
        .filter(|r| match validate_trajectory(&r.trajectory, &r.problem, max_actions) {
            ValidationResult::Accepted => {
                report.accepted += 1;
                true
            }
            ValidationResult::Rejected(reason) => {
                *report.rejected.entry(reason).or_default() += 1;
                false
            }
        })
        .collect();
    (kept, report)
}

fn bin_count(width: f64) -> Result<usize> {
    let n = (1.0 / width).round();
    if !(width > 0.0 && width <= 1.0) || (n * width - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("bin width {width} does not divide 1")));
    }
    Ok(n as usize)
}

/// Bin index of `accuracy`: `floor(accuracy / width)`, with 1.0 in the top bin.
pub fn bin_index(accuracy: f64, width: f64) -> Result<usize> {
    let n = bin_count(width)?;
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::config(format!("accuracy {accuracy} outside [0, 1]")));
    }
    Ok(((accuracy / width + 1e-9).floor() as usize).min(n - 1))
}

/// Problems of similar estimated accuracy and their trajectories. The
/// range is `[lo, hi)`, closed above for the top bin.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyBin {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub problem_ids: Vec<String>,
    pub trajectories: Vec<Rollout>,
}

/// Assigns every problem with an accuracy to one bin and attaches its
/// rollouts. Only non-empty bins are returned, in index order.
pub fn bin_by_accuracy(
    rollouts: Vec<Rollout>,
    accuracies: &BTreeMap<String, f64>,
    width: f64,
) -> Result<Vec<AccuracyBin>> {
    let n = bin_count(width)?;
    let mut bins: BTreeMap<usize, AccuracyBin> = BTreeMap::new();
    let mut bin_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (id, &acc) in accuracies {
        let index = bin_index(acc, width)?;
        bin_of.insert(id, index);
        bins.entry(index)
            .or_insert_with(|| AccuracyBin {
                index,
                lo: index as f64 / n as f64,
                hi: (index + 1) as f64 / n as f64,
                problem_ids: Vec::new(),
                trajectories: Vec::new(),
            })
            .problem_ids
            .push(id.clone());
    }
    for r in rollouts {
        let index = *bin_of
            .get(r.problem.id.as_str())
            .ok_or_else(|| Error::config(format!("no accuracy for problem {}", r.problem.id)))?;
        bins.get_mut(&index).expect("bin created above").trajectories.push(r);
    }
    Ok(bins.into_values().collect())
}

/// Mean action reward at `step_index` (0-based) over the bin's trajectories.
pub fn baseline_position(bin: &AccuracyBin, step_index: usize) -> Result<f64> {
    let mut rewards = Vec::new();
    for r in &bin.trajectories {
        if let Some(Some(reward)) = action_rewards(&r.trajectory, &r.problem)?.get(step_index) {
            rewards.push(reward.value());
        }
    }
    if rewards.is_empty() {
        return Err(Error::EmptyPositionGroup);
    }
    Ok(mean(rewards))
}

/// Mean reward of the bin's actions whose reward context equals `context`.
pub fn baseline_accuracy_context(bin: &AccuracyBin, context: &RewardContext) -> Result<f64> {
    let mut rewards = Vec::new();
    for r in &bin.trajectories {
        let all = action_rewards(&r.trajectory, &r.problem)?;
        let i = context.len();
        if i < all.len() && all[..i].iter().map(|x| x.as_ref()).eq(context.0.iter().map(Some)) {
            if let Some(reward) = all[i] {
                rewards.push(reward.value());
            }
        }
    }
    if rewards.is_empty() {
        return Err(Error::EmptyGroup);
    }
    Ok(mean(rewards))
}

#[derive(Default)]
struct Tally {
    sum: f64,
    count: usize,
}

impl Tally {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.count += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Precomputed group means for one dataset, so every baseline is a lookup.
struct BaselineTables {
    position: BTreeMap<(usize, usize), Tally>,
    bin_context: BTreeMap<(usize, RewardContext), Tally>,
    context: BTreeMap<RewardContext, Tally>,
    bin_outcome: BTreeMap<usize, Tally>,
    outcome: Tally,
}

impl BaselineTables {
    fn build(bins: &[AccuracyBin]) -> Result<Self> {
        let mut t = BaselineTables {
            position: BTreeMap::new(),
            bin_context: BTreeMap::new(),
            context: BTreeMap::new(),
            bin_outcome: BTreeMap::new(),
            outcome: Tally::default(),
        };
        for bin in bins {
            for r in &bin.trajectories {
                let ro = outcome_reward(&r.trajectory, &r.problem)?.value();
                t.bin_outcome.entry(bin.index).or_default().add(ro);
                t.outcome.add(ro);
                let mut ctx = Vec::new();
                for (i, reward) in action_rewards(&r.trajectory, &r.problem)?.into_iter().enumerate() {
                    let Some(reward) = reward else { break };
                    let key = RewardContext(ctx.clone());
                    t.position.entry((bin.index, i)).or_default().add(reward.value());
                    t.bin_context.entry((bin.index, key.clone())).or_default().add(reward.value());
                    t.context.entry(key).or_default().add(reward.value());
                    ctx.push(reward);
                }
            }
        }
        Ok(t)
    }

    /// Baseline for one action, or `None` when every applicable group is
    /// empty (the advantage is then zero).
    fn action(&self, mode: BaselineMode, bin: usize, index: usize, context: &RewardContext) -> Option<f64> {
        let position = || self.position.get(&(bin, index)).and_then(Tally::mean);
        match mode {
            BaselineMode::PositionGroup => position(),
            BaselineMode::RewardContextGroup => self
                .bin_context
                .get(&(bin, context.clone()))
                .and_then(Tally::mean)
                .or_else(position),
            BaselineMode::PlainRewardContext => self.context.get(context).and_then(Tally::mean).or_else(position),
        }
    }

    fn trajectory(&self, mode: BaselineMode, bin: usize) -> Option<f64> {
        match mode {
            BaselineMode::PlainRewardContext => self.outcome.mean(),
            _ => self.bin_outcome.get(&bin).and_then(Tally::mean),
        }
    }
}

/// One stored trajectory with its bin and advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineItem {
    pub bin: usize,
    pub rollout: Rollout,
    /// Whole-trajectory advantage (outcome mode).
    pub trajectory_advantage: f64,
    /// Per-action advantages, `None` for end actions (process mode).
    pub action_advantages: Vec<Option<f64>>,
}

/// Computes outcome- and action-level advantages for every binned
/// trajectory against the fixed `reference`. Items are ordered by bin, then
/// problem id, then sampling order.
pub fn offline_advantages(
    bins: &[AccuracyBin],
    reference: &SyntheticPolicy,
    mode: BaselineMode,
    kl_coef: f64,
) -> Result<Vec<OfflineItem>> {
    let tables = BaselineTables::build(bins)?;
    let mut items = Vec::new();
    for bin in bins {
        let mut order: Vec<usize> = (0..bin.trajectories.len()).collect();
        order.sort_by(|&a, &b| bin.trajectories[a].problem.id.cmp(&bin.trajectories[b].problem.id));
        for i in order {
            let r = &bin.trajectories[i];
            let ref_lp = reference.action_log_probs(&r.trajectory, &r.problem)?;
            if r.log_probs.len() != ref_lp.len() {
                return Err(Error::config(format!(
                    "stored log-probabilities of {} do not match its trajectory",
                    r.problem.id
                )));
            }
            let ro = outcome_reward(&r.trajectory, &r.problem)?;
            let traj_kl = r.log_prob() - ref_lp.iter().sum::<f64>();
            let trajectory_advantage = match tables.trajectory(mode, bin.index) {
                Some(b) => ro.value() - b - kl_coef * traj_kl,
                None => 0.0,
            };
            if !trajectory_advantage.is_finite() {
                return Err(Error::NonFinite("offline advantage"));
            }
            let mut ctx = Vec::new();
            let mut action_advantages = Vec::with_capacity(r.log_probs.len());
            for (t, reward) in action_rewards(&r.trajectory, &r.problem)?.into_iter().enumerate() {
                let Some(reward) = reward else {
                    action_advantages.push(None);
                    continue;
                };
                let key = RewardContext(ctx.clone());
                let a = match tables.action(mode, bin.index, t, &key) {
                    Some(b) => crate::process::action_advantage(reward, b, kl_coef, r.log_probs[t], ref_lp[t])?,
                    None => 0.0,
                };
                action_advantages.push(Some(a));
                ctx.push(reward);
            }
            items.push(OfflineItem {
                bin: bin.index,
                rollout: r.clone(),
                trajectory_advantage,
                action_advantages,
            });
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinReturn {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub trajectories: usize,
    pub mean_return: f64,
}

/// Mean outcome reward per bin.
pub fn bin_returns(bins: &[AccuracyBin]) -> Result<Vec<BinReturn>> {
    bins.iter()
        .map(|b| {
            let returns = b
                .trajectories
                .iter()
                .map(|r| outcome_reward(&r.trajectory, &r.problem).map(Reward::value))
                .collect::<Result<Vec<_>>>()?;
            Ok(BinReturn {
                bin: b.index,
                lo: b.lo,
                hi: b.hi,
                trajectories: b.trajectories.len(),
                mean_return: mean(returns),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineStepReport {
    /// One line per gradient update.
    pub updates: Vec<StepReport>,
    pub bin_returns: Vec<BinReturn>,
}

/// `epochs` passes over the dataset in minibatches of `batch_size`
/// trajectories, one clipped update per minibatch. `state.step` counts
/// updates and drives the warmup; `state.reference` is never modified.
pub fn offline_train_step(
    state: &mut TrainerState,
    bins: &[AccuracyBin],
    config: &OfflineConfig,
    mode: OfflineMode,
    sample_accuracy: f64,
) -> Result<OfflineStepReport> {
    offline_train_limited(state, bins, config, mode, sample_accuracy, usize::MAX)
}

/// [`offline_train_step`] stopping after at most `max_updates` updates.
pub fn offline_train_limited(
    state: &mut TrainerState,
    bins: &[AccuracyBin],
    config: &OfflineConfig,
    mode: OfflineMode,
    sample_accuracy: f64,
    max_updates: usize,
) -> Result<OfflineStepReport> {
    config.validate()?;
    let items = offline_advantages(bins, &state.reference, config.baseline_mode, config.kl_coef)?;
    if items.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let mut updates = Vec::new();
    'epochs: for _ in 0..config.epochs {
        for chunk in items.chunks(config.batch_size) {
            if updates.len() >= max_updates {
                break 'epochs;
            }
            let rollouts: Vec<&Rollout> = chunk.iter().map(|i| &i.rollout).collect();
            let logp_old: Vec<f64> = rollouts.iter().map(|r| r.log_prob()).collect();
            let value = |policy: &SyntheticPolicy| match mode {
                OfflineMode::Outcome => {
                    let adv: Vec<f64> = chunk.iter().map(|i| i.trajectory_advantage).collect();
                    trajectory_surrogate_loss(&rollouts, &logp_old, &adv, policy, config.clip_epsilon)
                }
                OfflineMode::Process => {
                    let owned: Vec<Rollout> = chunk.iter().map(|i| i.rollout.clone()).collect();
                    let adv: Vec<Vec<Option<f64>>> = chunk.iter().map(|i| i.action_advantages.clone()).collect();
                    per_action_surrogate_loss(&owned, &adv, policy, config.clip_epsilon)
                }
            };
            let lr = config.learning_rate_at(state.step);
            let before = value(&state.policy)?;
            state.policy.apply_gradient(&before.grad, lr)?;
            let after = value(&state.policy)?;

            let mean_advantage = match mode {
                OfflineMode::Outcome => mean(chunk.iter().map(|i| i.trajectory_advantage)),
                OfflineMode::Process => mean(chunk.iter().flat_map(|i| i.action_advantages.iter().flatten().copied())),
            };
            let kl = mean(
                chunk
                    .iter()
                    .map(|i| {
                        state
                            .reference
                            .trajectory_log_prob(&i.rollout.trajectory, &i.rollout.problem)
                            .map(|lr| i.rollout.log_prob() - lr)
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
            let mean_reward = mean(
                chunk
                    .iter()
                    .map(|i| outcome_reward(&i.rollout.trajectory, &i.rollout.problem).map(Reward::value))
                    .collect::<Result<Vec<_>>>()?,
            );
            let mut extras = vec![("learning_rate", lr), ("loss", before.loss)];
            if mode == OfflineMode::Process {
                let owned: Vec<Rollout> = chunk.iter().map(|i| i.rollout.clone()).collect();
                let adv: Vec<Vec<Option<f64>>> = chunk.iter().map(|i| i.action_advantages.clone()).collect();
                let (s, v) = advantage_means_by_kind(&owned, &adv);
                extras.push(("solve_advantage", s));
                extras.push(("verify_advantage", v));
            }
            updates.push(StepReport {
                step: state.step,
                mean_reward,
                mean_advantage,
                clip_fraction: after.clip_fraction,
                kl,
                accuracy: sample_accuracy,
                extras,
            });
            state.step += 1;
        }
    }
    Ok(OfflineStepReport {
        updates,
        bin_returns: bin_returns(bins)?,
    })
}

/// The data side of one offline iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub accuracies: BTreeMap<String, f64>,
    pub retained: Vec<String>,
    pub rejection: RejectionReport,
    pub bins: Vec<AccuracyBin>,
    /// Fraction of all sampled trajectories with a golden final answer.
    pub sample_accuracy: f64,
}

impl OfflineDataset {
    pub fn trajectory_count(&self) -> usize {
        self.bins.iter().map(|b| b.trajectories.len()).sum()
    }
}

pub(crate) const OFFLINE_STREAM: u64 = 0x0ff1;

/// Samples `samples_per_prompt` trajectories per problem from `policy`,
/// estimates each problem's accuracy from them, filters prompts, rejects
/// malformed trajectories and bins the rest.
pub fn build_offline_dataset(
    policy: &SyntheticPolicy,
    problems: &[ProblemSpec],
    config: &OfflineConfig,
    seed: u64,
    iteration: u64,
) -> Result<OfflineDataset> {
    config.validate()?;
    let mut ids: Vec<&str> = problems.iter().map(|p| p.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("problem ids must be unique"));
    }
    let groups = sample_groups(
        policy,
        problems,
        config.samples_per_prompt,
        config.max_rounds,
        seed ^ OFFLINE_STREAM,
        iteration,
    )?;
    let sample_accuracy = mean(groups.iter().flatten().map(|r| r.final_correct() as u8 as f64));
    let accuracies: BTreeMap<String, f64> = problems
        .iter()
        .zip(&groups)
        .map(|(p, g)| (p.id.clone(), mean(g.iter().map(|r| r.final_correct() as u8 as f64))))
        .collect();
    let retained = filter_prompts(&accuracies, config.filter_range);
    let keep: std::collections::BTreeSet<&str> = retained.iter().map(String::as_str).collect();
    let candidates: Vec<Rollout> = groups
        .into_iter()
        .flatten()
        .filter(|r| keep.contains(r.problem.id.as_str()))
        .collect();
    let (kept, rejection) = reject_offline(candidates, config.max_actions);
    let retained_acc: BTreeMap<String, f64> = retained.iter().map(|id| (id.clone(), accuracies[id])).collect();
    let bins = bin_by_accuracy(kept, &retained_acc, config.bin_width)?
        .into_iter()
        .filter(|b| !b.trajectories.is_empty())
        .collect();
    Ok(OfflineDataset {
        accuracies,
        retained,
        rejection,
        bins,
        sample_accuracy,
    })
}

/// Sample, filter, reject, bin, then train.
pub fn offline_iteration(
    state: &mut TrainerState,
    problems: &[ProblemSpec],
    config: &OfflineConfig,
    mode: OfflineMode,
    iteration: u64,
) -> Result<(OfflineDataset, OfflineStepReport)> {
    let dataset = build_offline_dataset(&state.policy, problems, config, state.seed, iteration)?;
    if dataset.trajectory_count() == 0 {
        return Err(Error::NoTrainingData);
    }
    let report = offline_train_step(state, &dataset.bins, config, mode, dataset.sample_accuracy)?;
    Ok((dataset, report))
}

/// One line of the persisted offline store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreRecord {
    pub problem_id: String,
    pub trajectory: Trajectory,
    pub rewards: Vec<Option<Reward>>,
    pub log_probs: Vec<f64>,
}

impl StoreRecord {
    pub fn from_rollout(r: &Rollout) -> Result<Self> {
        Ok(StoreRecord {
            problem_id: r.problem.id.clone(),
            trajectory: r.trajectory.clone(),
            rewards: action_rewards(&r.trajectory, &r.problem)?,
            log_probs: r.log_probs.clone(),
        })
    }

    /// Rebuilds the rollout, checking rewards and lengths against `problem`.
    pub fn into_rollout(self, problem: &ProblemSpec) -> Result<Rollout> {
        if problem.id != self.problem_id || self.trajectory.problem_id != self.problem_id {
            return Err(Error::config(format!("store record {} paired with problem {}", self.problem_id, problem.id)));
        }
        if self.log_probs.len() != self.trajectory.actions.len() || self.log_probs.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(format!("log-probabilities of {} are malformed", self.problem_id)));
        }
        if action_rewards(&self.trajectory, problem)? != self.rewards {
            return Err(Error::config(format!("stored rewards of {} are inconsistent", self.problem_id)));
        }
        Ok(Rollout {
            problem: problem.clone(),
            truncated: !self.trajectory.is_terminated(),
            trajectory: self.trajectory,
            log_probs: self.log_probs,
        })
    }
}

/// Bin manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinManifest {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub problem_ids: Vec<String>,
    pub trajectories: usize,
}

impl From<&AccuracyBin> for BinManifest {
    fn from(b: &AccuracyBin) -> Self {
        BinManifest {
            index: b.index,
            lo: b.lo,
            hi: b.hi,
            problem_ids: b.problem_ids.clone(),
            trajectories: b.trajectories.len(),
        }
    }
}
