//! Process-level RL: actions are grouped by reward context, each group's
//! mean reward is the baseline, and the surrogate is clipped per action.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::environment::{ProblemSpec, Rollout, SyntheticPolicy};
use crate::error::{Error, Result};
use crate::online::{mean, sample_groups, OnlineConfig, StepReport, TrainerState};
use crate::rewards::{action_rewards, outcome_reward, Reward, RewardContext};
use crate::surrogate::clipped_objective;
use crate::trajectory::ActionType;

/// One solve or verify action of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupMember {
    /// Index of the rollout within the batch.
    pub trajectory: usize,
    pub action: usize,
    pub reward: Reward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextGroup {
    pub key: RewardContext,
    pub members: Vec<GroupMember>,
}

/// Partitions every solve/verify action of the batch by exact reward
/// context. Groups come out in key order; members in batch order.
pub fn group_by_reward_context(batch: &[Rollout]) -> Result<Vec<ContextGroup>> {
    let mut groups: BTreeMap<RewardContext, Vec<GroupMember>> = BTreeMap::new();
    for (t, rollout) in batch.iter().enumerate() {
        let rewards = action_rewards(&rollout.trajectory, &rollout.problem)?;
        let mut context = Vec::with_capacity(rewards.len());
        for (i, reward) in rewards.into_iter().enumerate() {
            let Some(reward) = reward else { break };
            groups.entry(RewardContext(context.clone())).or_default().push(GroupMember {
                trajectory: t,
                action: i,
                reward,
            });
            context.push(reward);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(key, members)| ContextGroup { key, members })
        .collect())
}

/// Mean member reward.
pub fn group_baseline(group: &ContextGroup) -> Result<f64> {
    if group.members.is_empty() {
        return Err(Error::EmptyGroup);
    }
    Ok(mean(group.members.iter().map(|m| m.reward.value())))
}

/// `reward - baseline - beta * (logp_old - logp_ref)` for one action.
pub fn action_advantage(reward: Reward, baseline: f64, beta: f64, logp_old: f64, logp_ref: f64) -> Result<f64> {
    if !(baseline.is_finite() && beta.is_finite() && logp_old.is_finite() && logp_ref.is_finite()) {
        return Err(Error::NonFinite("action advantage input"));
    }
    Ok(reward.value() - baseline - beta * (logp_old - logp_ref))
}

/// Rollouts with a per-action advantage for every solve/verify action
/// (`None` for end actions) and the sampling policy's per-action
/// log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessBatch {
    pub rollouts: Vec<Rollout>,
    pub advantages: Vec<Vec<Option<f64>>>,
}

impl ProcessBatch {
    /// Groups the batch by reward context and computes advantages against
    /// `reference`.
    pub fn new(rollouts: Vec<Rollout>, reference: &SyntheticPolicy, beta: f64) -> Result<(Self, Vec<GroupSummary>)> {
        let groups = group_by_reward_context(&rollouts)?;
        let baselines = groups.iter().map(group_baseline).collect::<Result<Vec<_>>>()?;
        let ref_logps = rollouts
            .iter()
            .map(|r| reference.action_log_probs(&r.trajectory, &r.problem))
            .collect::<Result<Vec<_>>>()?;
        let mut advantages: Vec<Vec<Option<f64>>> =
            rollouts.iter().map(|r| vec![None; r.trajectory.actions.len()]).collect();
        for (group, &baseline) in groups.iter().zip(&baselines) {
            for m in &group.members {
                let old = rollouts[m.trajectory].log_probs[m.action];
                let reference = ref_logps[m.trajectory][m.action];
                advantages[m.trajectory][m.action] = Some(action_advantage(m.reward, baseline, beta, old, reference)?);
            }
        }
        let summary = groups
            .iter()
            .zip(&baselines)
            .map(|(g, &b)| GroupSummary {
                context_key: g.key.clone(),
                group_size: g.members.len(),
                baseline: b,
            })
            .collect();
        Ok((ProcessBatch { rollouts, advantages }, summary))
    }
}

/// One line of the optional per-step group dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub context_key: RewardContext,
    pub group_size: usize,
    pub baseline: f64,
}

pub use crate::rloo::SurrogateValue;

/// Negative mean over trajectories of the per-action clipped objective,
/// averaged within each trajectory over its solve/verify actions. Actions
/// whose advantage is `None` are skipped and not counted.
pub fn per_action_surrogate_loss(
    rollouts: &[Rollout],
    advantages: &[Vec<Option<f64>>],
    theta: &SyntheticPolicy,
    epsilon: f64,
) -> Result<SurrogateValue> {
    if rollouts.len() != advantages.len() {
        return Err(Error::config("advantages do not line up with the batch"));
    }
    let mut grad = vec![0.0; theta.num_params()];
    let mut total = 0.0;
    let mut clipped = 0usize;
    let mut actions = 0usize;
    let mut trajectories = 0usize;
    for (rollout, adv) in rollouts.iter().zip(advantages) {
        let outcomes = theta.action_outcomes(&rollout.trajectory, &rollout.problem)?;
        if adv.len() != outcomes.len() || rollout.log_probs.len() != outcomes.len() {
            return Err(Error::config("per-action data does not match the trajectory"));
        }
        let counted: Vec<(usize, f64)> = adv
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|a| (i, a)))
            .filter(|(i, _)| outcomes[*i].is_some())
            .collect();
        if counted.is_empty() {
            continue;
        }
        let norm = 1.0 / counted.len() as f64;
        let mut sum = 0.0;
        for (i, a) in counted {
            let o = outcomes[i].expect("filtered above");
            let term = clipped_objective(o.log_prob(theta) - rollout.log_probs[i], a, epsilon);
            sum += term.value;
            clipped += term.clipped as usize;
            actions += 1;
            grad[o.param] -= norm * term.d_log_ratio * o.grad_log_prob(theta);
        }
        total += norm * sum;
        trajectories += 1;
    }
    if trajectories == 0 {
        return Err(Error::EmptyGroup);
    }
    let scale = 1.0 / trajectories as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    let loss = -total * scale;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("process surrogate"));
    }
    Ok(SurrogateValue {
        loss,
        grad,
        clip_fraction: clipped as f64 / actions as f64,
    })
}

pub fn process_surrogate_loss(batch: &ProcessBatch, theta: &SyntheticPolicy, epsilon: f64) -> Result<SurrogateValue> {
    per_action_surrogate_loss(&batch.rollouts, &batch.advantages, theta, epsilon)
}

/// Mean advantage of solve actions and of verify actions.
pub(crate) fn advantage_means_by_kind(rollouts: &[Rollout], advantages: &[Vec<Option<f64>>]) -> (f64, f64) {
    let mut solve = Vec::new();
    let mut verify = Vec::new();
    for (r, adv) in rollouts.iter().zip(advantages) {
        for (a, v) in r.trajectory.actions.iter().zip(adv) {
            match (a.kind(), v) {
                (ActionType::Solve, Some(v)) => solve.push(*v),
                (ActionType::Verify, Some(v)) => verify.push(*v),
                _ => {}
            }
        }
    }
    (mean(solve), mean(verify))
}

/// Output of [`process_train_step`]: the log line and the group dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessStep {
    pub report: StepReport,
    pub groups: Vec<GroupSummary>,
}

pub fn process_train_step(
    state: &mut TrainerState,
    problems: &[ProblemSpec],
    config: &OnlineConfig,
) -> Result<ProcessStep> {
    config.validate()?;
    let rollouts: Vec<Rollout> = sample_groups(
        &state.policy,
        problems,
        config.samples_per_prompt,
        config.max_rounds,
        state.seed,
        state.step,
    )?
    .into_iter()
    .flatten()
    .collect();
    let accuracy = mean(rollouts.iter().map(|r| r.final_correct() as u8 as f64));
    let mean_reward = mean(
        rollouts
            .iter()
            .map(|r| outcome_reward(&r.trajectory, &r.problem).map(Reward::value))
            .collect::<Result<Vec<_>>>()?,
    );
    let kl = mean(
        rollouts
            .iter()
            .map(|r| {
                state
                    .reference
                    .trajectory_log_prob(&r.trajectory, &r.problem)
                    .map(|lr| r.log_prob() - lr)
            })
            .collect::<Result<Vec<_>>>()?,
    );
    let (batch, groups) = ProcessBatch::new(rollouts, &state.reference, config.beta)?;
    let mean_advantage = mean(batch.advantages.iter().flatten().flatten().copied());
    let (solve_adv, verify_adv) = advantage_means_by_kind(&batch.rollouts, &batch.advantages);

    let mut clip_fraction = 0.0;
    if !batch.rollouts.is_empty() {
        for _ in 0..config.updates_per_batch {
            let value = process_surrogate_loss(&batch, &state.policy, config.clip_epsilon)?;
            state.policy.apply_gradient(&value.grad, config.learning_rate)?;
        }
        clip_fraction = process_surrogate_loss(&batch, &state.policy, config.clip_epsilon)?.clip_fraction;
    }

    let report = StepReport {
        step: state.step,
        mean_reward,
        mean_advantage,
        clip_fraction,
        kl,
        accuracy,
        extras: vec![("solve_advantage", solve_adv), ("verify_advantage", verify_adv)],
    };
    state.step += 1;
    Ok(ProcessStep { report, groups })
}
