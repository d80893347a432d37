use std::collections::BTreeMap;

use proptest::prelude::*;

use trialrl_core::process::{group_baseline, group_by_reward_context, ProcessBatch};
use trialrl_core::rewards::{action_reward, outcome_reward, reward_context, Reward};
use trialrl_core::rloo::{loo_baselines, outcome_advantages, RlooGroup};
use trialrl_core::{Action, ActionType, AnswerToken, ProblemSpec, RandomSource, Rollout, SyntheticPolicy, Trajectory, Verdict};

/// Every valid trajectory with at most `max_k` rounds over a ternary
/// alphabet, golden answer 0.
fn all_valid(max_k: u32) -> Vec<Trajectory> {
    let mut out = Vec::new();
    for k in 1..=max_k {
        for code in 0..3usize.pow(k) {
            let mut actions = Vec::new();
            for i in 0..k {
                actions.push(Action::solve(AnswerToken::new(code / 3usize.pow(i) % 3).unwrap()));
                actions.push(Action::verify_with(if i + 1 == k { Verdict::Correct } else { Verdict::Incorrect }));
            }
            actions.push(Action::End);
            out.push(Trajectory::new("p", actions));
        }
    }
    out
}

fn problem() -> ProblemSpec {
    ProblemSpec::new("p", 0, AnswerToken::new(0).unwrap(), 3).unwrap()
}

#[test]
fn outcome_reward_is_last_solve_reward() {
    let p = problem();
    for traj in all_valid(4) {
        let last = traj.actions.iter().rposition(|a| a.kind() == ActionType::Solve).unwrap();
        assert_eq!(outcome_reward(&traj, &p).unwrap(), action_reward(&traj, last, &p).unwrap());

        let final_verify = traj.actions.len() - 2;
        let verify_reward = action_reward(&traj, final_verify, &p).unwrap();
        let confirmed = traj.actions[final_verify].verdict() == Some(Verdict::Correct);
        let solved = outcome_reward(&traj, &p).unwrap() == Reward::Positive;
        assert_eq!(verify_reward == Reward::Positive, solved == confirmed);
    }
}

#[test]
fn contexts_are_prefix_monotone() {
    let p = problem();
    for traj in all_valid(4) {
        let n = traj.actions.len() - 1;
        for t in 0..n - 1 {
            let a = reward_context(&traj, t, &p).unwrap();
            let b = reward_context(&traj, t + 1, &p).unwrap();
            assert!(a.is_prefix_of(&b));
            assert_eq!(b.len(), a.len() + 1);
        }
    }
}

fn rollout(traj: Trajectory) -> Rollout {
    Rollout {
        problem: problem(),
        log_probs: vec![0.0; traj.actions.len()],
        trajectory: traj,
        truncated: false,
    }
}

#[test]
fn groups_partition_every_action_by_context() {
    let batch: Vec<Rollout> = all_valid(3).into_iter().map(rollout).collect();
    let groups = group_by_reward_context(&batch).unwrap();
    let keys: Vec<_> = groups.iter().map(|g| &g.key).collect();
    let mut dedup = keys.clone();
    dedup.dedup();
    assert_eq!(keys.len(), dedup.len());

    let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for g in &groups {
        for m in &g.members {
            *seen.entry((m.trajectory, m.action)).or_default() += 1;
            let r = &batch[m.trajectory];
            assert_eq!(reward_context(&r.trajectory, m.action, &r.problem).unwrap(), g.key);
        }
    }
    let actions: usize = batch.iter().map(|r| r.trajectory.actions.len() - 1).sum();
    assert_eq!(seen.len(), actions);
    assert!(seen.values().all(|&n| n == 1));
}

#[test]
fn equal_contexts_share_a_baseline() {
    let mut rng = RandomSource::new(8);
    let policy = SyntheticPolicy::new(vec![0.3, -0.5], vec![0.4, 0.1], vec![-0.2, 0.6]).unwrap();
    let problems: Vec<ProblemSpec> = (0..12)
        .map(|i| ProblemSpec::new(format!("p{i}"), i % 2, AnswerToken::new(i % 3).unwrap(), 3 + i % 2).unwrap())
        .collect();
    let rollouts: Vec<Rollout> = problems
        .iter()
        .flat_map(|p| (0..4).map(|_| policy.sample_trajectory(p, &mut rng, 4)).collect::<Vec<_>>())
        .collect();
    let (batch, _) = ProcessBatch::new(rollouts, &policy, 0.0).unwrap();
    let mut baselines: BTreeMap<_, f64> = BTreeMap::new();
    for (r, advs) in batch.rollouts.iter().zip(&batch.advantages) {
        for (t, adv) in advs.iter().enumerate() {
            let Some(adv) = adv else { continue };
            let reward = action_reward(&r.trajectory, t, &r.problem).unwrap().value();
            let ctx = reward_context(&r.trajectory, t, &r.problem).unwrap();
            let b = reward - adv;
            let known = *baselines.entry(ctx).or_insert(b);
            assert!((known - b).abs() < 1e-12);
        }
    }
    for g in group_by_reward_context(&batch.rollouts).unwrap() {
        assert!((baselines[&g.key] - group_baseline(&g).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn loo_residuals_sum_to_zero(rewards in prop::collection::vec(-5.0f64..5.0, 2..16)) {
        let b = loo_baselines(&rewards).unwrap();
        let sum: f64 = rewards.iter().zip(&b).map(|(r, b)| r - b).sum();
        prop_assert!(sum.abs() <= 1e-12);
    }

    #[test]
    fn shifting_rewards_leaves_residuals_alone(rewards in prop::collection::vec(-5.0f64..5.0, 2..16), c in -10.0f64..10.0) {
        let shifted: Vec<f64> = rewards.iter().map(|r| r + c).collect();
        let a = loo_baselines(&rewards).unwrap();
        let b = loo_baselines(&shifted).unwrap();
        for i in 0..rewards.len() {
            prop_assert!(((rewards[i] - a[i]) - (shifted[i] - b[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn outcome_advantages_sum_to_zero_without_kl(seed in any::<u64>(), m in 2usize..8) {
        let mut rng = RandomSource::new(seed);
        let policy = SyntheticPolicy::uniform(1, 0.2, -0.3, 0.5).unwrap();
        let p = ProblemSpec::new("p", 0, AnswerToken::new(1).unwrap(), 4).unwrap();
        let rollouts = (0..m).map(|_| policy.sample_trajectory(&p, &mut rng, 3)).collect();
        let group = RlooGroup::new(rollouts, &policy).unwrap();
        let sum: f64 = outcome_advantages(&group, 0.0).unwrap().iter().map(|a| a.advantage).sum();
        prop_assert!(sum.abs() <= 1e-12);
    }
}
