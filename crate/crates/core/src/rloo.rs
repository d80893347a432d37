//! Outcome-level REINFORCE leave-one-out with a KL-shaped advantage and the
//! whole-trajectory clipped surrogate.

use serde::Serialize;

use crate::environment::{ProblemSpec, Rollout, SyntheticPolicy};
use crate::error::{Error, Result};
use crate::online::{mean, sample_groups, OnlineConfig, StepReport, TrainerState};
use crate::rewards::{outcome_reward, Reward};
use crate::surrogate::clipped_objective;

/// `b[m]` = mean of every reward except `rewards[m]`.
pub fn loo_baselines(rewards: &[f64]) -> Result<Vec<f64>> {
    let m = rewards.len();
    if m < 2 {
        return Err(Error::TooFewSamples);
    }
    let total: f64 = rewards.iter().sum();
    let denom = (m - 1) as f64;
    Ok(rewards.iter().map(|r| (total - r) / denom).collect())
}

/// `M >= 2` rollouts of one problem with their outcome rewards and their
/// log-probabilities under the sampling and reference policies.
#[derive(Debug, Clone, PartialEq)]
pub struct RlooGroup {
    pub problem: ProblemSpec,
    pub rollouts: Vec<Rollout>,
    pub rewards: Vec<Reward>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl RlooGroup {
    /// `logp_old` is taken from the rollouts' recorded log-probabilities.
    pub fn new(rollouts: Vec<Rollout>, reference: &SyntheticPolicy) -> Result<Self> {
        if rollouts.len() < 2 {
            return Err(Error::TooFewSamples);
        }
        let problem = rollouts[0].problem.clone();
        if rollouts.iter().any(|r| r.problem != problem) {
            return Err(Error::config("an outcome group must share one problem"));
        }
        let rewards = rollouts
            .iter()
            .map(|r| outcome_reward(&r.trajectory, &problem))
            .collect::<Result<_>>()?;
        let logp_old = rollouts.iter().map(Rollout::log_prob).collect();
        let logp_ref = rollouts
            .iter()
            .map(|r| reference.trajectory_log_prob(&r.trajectory, &problem))
            .collect::<Result<_>>()?;
        Ok(RlooGroup {
            problem,
            rollouts,
            rewards,
            logp_old,
            logp_ref,
        })
    }

    pub fn len(&self) -> usize {
        self.rollouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rollouts.is_empty()
    }
}

/// `advantage = reward - baseline - kl_term` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvantageRecord {
    pub index: usize,
    pub reward: f64,
    pub baseline: f64,
    pub kl_term: f64,
    pub advantage: f64,
}

pub fn outcome_advantages(group: &RlooGroup, beta: f64) -> Result<Vec<AdvantageRecord>> {
    let rewards: Vec<f64> = group.rewards.iter().map(|r| r.value()).collect();
    let baselines = loo_baselines(&rewards)?;
    if group.logp_old.len() != rewards.len() || group.logp_ref.len() != rewards.len() {
        return Err(Error::config("log-probabilities do not line up with the group"));
    }
    (0..rewards.len())
        .map(|i| {
            let (old, reference) = (group.logp_old[i], group.logp_ref[i]);
            if !old.is_finite() || !reference.is_finite() {
                return Err(Error::NonFinite("trajectory log-probability"));
            }
            let kl_term = beta * (old - reference);
            let advantage = rewards[i] - baselines[i] - kl_term;
            Ok(AdvantageRecord {
                index: i,
                reward: rewards[i],
                baseline: baselines[i],
                kl_term,
                advantage,
            })
        })
        .collect()
}

/// Loss value, gradient in the logits, and the fraction of samples whose
/// clipped branch was active.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateValue {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub clip_fraction: f64,
}

/// Negative batch mean of `min(r A, clip(r) A)` with the whole-trajectory
/// ratio `r = pi_theta(y) / pi_old(y)`; `pi_old` is each group's stored
/// `logp_old`.
pub fn rloo_surrogate_loss(
    groups: &[RlooGroup],
    theta: &SyntheticPolicy,
    epsilon: f64,
    beta: f64,
) -> Result<SurrogateValue> {
    let mut rollouts = Vec::new();
    let mut logp_old = Vec::new();
    let mut advantages = Vec::new();
    for group in groups {
        for adv in outcome_advantages(group, beta)? {
            rollouts.push(&group.rollouts[adv.index]);
            logp_old.push(group.logp_old[adv.index]);
            advantages.push(adv.advantage);
        }
    }
    trajectory_surrogate_loss(&rollouts, &logp_old, &advantages, theta, epsilon)
}

/// Whole-trajectory clipped surrogate over arbitrary `(rollout, logp_old,
/// advantage)` triples.
pub fn trajectory_surrogate_loss(
    rollouts: &[&Rollout],
    logp_old: &[f64],
    advantages: &[f64],
    theta: &SyntheticPolicy,
    epsilon: f64,
) -> Result<SurrogateValue> {
    let n = rollouts.len();
    if n == 0 {
        return Err(Error::EmptyGroup);
    }
    if logp_old.len() != n || advantages.len() != n {
        return Err(Error::config("advantages do not line up with the batch"));
    }
    let mut grad = vec![0.0; theta.num_params()];
    let mut total = 0.0;
    let mut clipped = 0usize;
    for ((rollout, &old), &advantage) in rollouts.iter().zip(logp_old).zip(advantages) {
        let (logp, g) = theta.trajectory_log_prob_grad(&rollout.trajectory, &rollout.problem)?;
        let term = clipped_objective(logp - old, advantage, epsilon);
        total += term.value;
        clipped += term.clipped as usize;
        if term.d_log_ratio != 0.0 {
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc -= term.d_log_ratio * gi;
            }
        }
    }
    let scale = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    let loss = -total * scale;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("outcome surrogate"));
    }
    Ok(SurrogateValue {
        loss,
        grad,
        clip_fraction: clipped as f64 / n as f64,
    })
}

/// Samples `M` rollouts per problem from the current policy, computes
/// leave-one-out advantages and takes `updates_per_batch` gradient steps.
pub fn rloo_train_step(state: &mut TrainerState, problems: &[ProblemSpec], config: &OnlineConfig) -> Result<StepReport> {
    config.validate()?;
    let sampled = sample_groups(
        &state.policy,
        problems,
        config.samples_per_prompt,
        config.max_rounds,
        state.seed,
        state.step,
    )?;
    let accuracy = mean(sampled.iter().flatten().map(|r| r.final_correct() as u8 as f64));
    let groups = sampled
        .into_iter()
        .filter(|g| g.len() >= 2)
        .map(|g| RlooGroup::new(g, &state.reference))
        .collect::<Result<Vec<_>>>()?;

    let records: Vec<AdvantageRecord> = groups
        .iter()
        .map(|g| outcome_advantages(g, config.beta))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let kl = mean(groups.iter().flat_map(|g| g.logp_old.iter().zip(&g.logp_ref).map(|(o, r)| o - r)));

    let mut clip_fraction = 0.0;
    if !groups.is_empty() {
        for _ in 0..config.updates_per_batch {
            let value = rloo_surrogate_loss(&groups, &state.policy, config.clip_epsilon, config.beta)?;
            state.policy.apply_gradient(&value.grad, config.learning_rate)?;
        }
        clip_fraction = rloo_surrogate_loss(&groups, &state.policy, config.clip_epsilon, config.beta)?.clip_fraction;
    }

    let report = StepReport {
        step: state.step,
        mean_reward: mean(records.iter().map(|r| r.reward)),
        mean_advantage: mean(records.iter().map(|r| r.advantage)),
        clip_fraction,
        kl,
        accuracy,
        extras: Vec::new(),
    };
    state.step += 1;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Action, AnswerToken, Trajectory, Verdict};

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn leave_one_out_means() {
        assert!(close(
            &loo_baselines(&[1.0, -1.0, -1.0, 1.0]).unwrap(),
            &[-1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0]
        ));
        assert!(close(&loo_baselines(&[1.0; 4]).unwrap(), &[1.0; 4]));
        assert!(close(&loo_baselines(&[1.0, -1.0]).unwrap(), &[-1.0, 1.0]));
        assert!(matches!(loo_baselines(&[1.0]), Err(Error::TooFewSamples)));
    }

    fn problem() -> ProblemSpec {
        ProblemSpec::new("p", 0, AnswerToken::new(0).unwrap(), 3).unwrap()
    }

    fn rollout(correct: bool) -> Rollout {
        let p = problem();
        let answer = if correct { p.golden_answer } else { AnswerToken::new(1).unwrap() };
        let traj = Trajectory::new(
            "p",
            vec![Action::solve(answer), Action::verify_with(Verdict::Correct), Action::End],
        );
        let policy = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        let log_probs = policy.action_log_probs(&traj, &p).unwrap();
        Rollout {
            problem: p,
            trajectory: traj,
            log_probs,
            truncated: false,
        }
    }

    fn group(pattern: &[bool], reference: &SyntheticPolicy) -> RlooGroup {
        RlooGroup::new(pattern.iter().map(|c| rollout(*c)).collect(), reference).unwrap()
    }

    #[test]
    fn advantages_without_kl() {
        let reference = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        let g = group(&[true, false, false, true], &reference);
        let adv: Vec<f64> = outcome_advantages(&g, 0.3).unwrap().iter().map(|a| a.advantage).collect();
        let f = 4.0 / 3.0;
        assert!(close(&adv, &[f, -f, -f, f]));
    }

    #[test]
    fn kl_term_shifts_advantage() {
        let reference = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        let mut g = group(&[true, false], &reference);
        g.logp_old[0] = g.logp_ref[0] + 2.0;
        let recs = outcome_advantages(&g, 0.05).unwrap();
        assert!((recs[0].kl_term - 0.1).abs() < 1e-12);
        assert!((recs[0].advantage - (2.0 - 0.1)).abs() < 1e-12);
        for r in &recs {
            assert_eq!(r.advantage, r.reward - r.baseline - r.kl_term);
        }
        g.logp_ref[1] = f64::NEG_INFINITY;
        assert!(outcome_advantages(&g, 0.05).is_err());
    }

    #[test]
    fn ratio_one_loss_is_negative_mean_advantage() {
        let theta = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        let g = group(&[true, false, false], &theta);
        let v = rloo_surrogate_loss(std::slice::from_ref(&g), &theta, 0.2, 0.0).unwrap();
        let adv = outcome_advantages(&g, 0.0).unwrap();
        let m = adv.iter().map(|a| a.advantage).sum::<f64>() / 3.0;
        assert!((v.loss + m).abs() < 1e-12);
        assert_eq!(v.clip_fraction, 0.0);

        let flat = group(&[true, true], &theta);
        let v = rloo_surrogate_loss(&[flat], &theta, 0.2, 0.0).unwrap();
        assert_eq!(v.loss, 0.0);
        assert!(v.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn positive_advantage_raises_its_outcome() {
        let theta = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        let g = group(&[true, false], &theta);
        let v = rloo_surrogate_loss(&[g], &theta, 0.2, 0.0).unwrap();
        let mut next = theta.clone();
        next.apply_gradient(&v.grad, 0.1).unwrap();
        assert!(next.params()[0] > theta.params()[0]);
    }
}
