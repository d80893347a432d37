//! Rule-based rewards: outcome level (last answer) and action level (each
//! solve and verify), plus the reward context that keys process baselines.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::environment::{ProblemSpec, Rollout};
use crate::error::{Error, Result};
use crate::trajectory::{Action, Trajectory};

/// A reward of exactly `-1` or `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reward {
    Negative,
    Positive,
}

impl Reward {
    pub fn from_bool(good: bool) -> Self {
        if good {
            Reward::Positive
        } else {
            Reward::Negative
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Reward::Negative => -1.0,
            Reward::Positive => 1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Reward::Positive
    }
}

impl Serialize for Reward {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value() as i8)
    }
}

impl<'de> Deserialize<'de> for Reward {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Reward::Positive),
            -1 => Ok(Reward::Negative),
            v => Err(serde::de::Error::custom(format!("reward must be -1 or 1, got {v}"))),
        }
    }
}

/// Rewards of every action strictly before some action, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardContext(pub Vec<Reward>);

impl RewardContext {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_of(&self, other: &RewardContext) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for RewardContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", r.value() as i8)?;
        }
        f.write_str(")")
    }
}

/// `+1` iff the last solve action emits the golden answer. Unterminated
/// trajectories are scored the same way.
pub fn outcome_reward(traj: &Trajectory, problem: &ProblemSpec) -> Result<Reward> {
    let last = traj.last_answer().ok_or(Error::NoSolveAction)?;
    Ok(Reward::from_bool(problem.is_golden(last)))
}

/// Reward of the action at `index`: a solve earns `+1` iff golden-correct; a
/// verify earns `+1` iff its verdict agrees with the golden check of the
/// nearest preceding solve.
pub fn action_reward(traj: &Trajectory, index: usize, problem: &ProblemSpec) -> Result<Reward> {
    let len = traj.actions.len();
    let action = traj.actions.get(index).ok_or(Error::IndexOutOfRange { index, len })?;
    match action {
        Action::Solve { answer } => Ok(Reward::from_bool(problem.is_golden(*answer))),
        Action::Verify { verdict, .. } => {
            let verdict = verdict.ok_or(Error::UnparsedVerdict)?;
            let solve = traj.preceding_solve(index).ok_or(Error::Grammar {
                index,
                reason: "verification without a preceding solve",
            })?;
            let truth = crate::environment::v_golden(&traj.actions[solve], problem)?;
            Ok(Reward::from_bool(verdict == truth))
        }
        Action::End => Err(Error::WrongActionKind {
            index,
            expected: "solve or verify",
        }),
    }
}

/// Rewards of all actions, `None` for end actions.
pub fn action_rewards(traj: &Trajectory, problem: &ProblemSpec) -> Result<Vec<Option<Reward>>> {
    traj.actions
        .iter()
        .enumerate()
        .map(|(i, a)| match a {
            Action::End => Ok(None),
            _ => action_reward(traj, i, problem).map(Some),
        })
        .collect()
}

/// Rewards of actions `0..index`. `index` may equal the action count.
pub fn reward_context(traj: &Trajectory, index: usize, problem: &ProblemSpec) -> Result<RewardContext> {
    let len = traj.actions.len();
    if index > len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    (0..index)
        .map(|i| match traj.actions[i] {
            Action::End => Err(Error::Grammar {
                index: i,
                reason: "end action inside a reward context",
            }),
            _ => action_reward(traj, i, problem),
        })
        .collect::<Result<Vec<_>>>()
        .map(RewardContext)
}

/// One line of a batch reward dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub problem_id: String,
    pub action_index: usize,
    pub reward: Reward,
    pub context: RewardContext,
}

/// Reward and context of every solve/verify action in the batch.
pub fn reward_records(batch: &[Rollout]) -> Result<Vec<RewardRecord>> {
    let mut out = Vec::new();
    for r in batch {
        let rewards = action_rewards(&r.trajectory, &r.problem)?;
        let mut context = Vec::new();
        for (i, reward) in rewards.into_iter().enumerate() {
            let Some(reward) = reward else { break };
            out.push(RewardRecord {
                problem_id: r.problem.id.clone(),
                action_index: i,
                reward,
                context: RewardContext(context.clone()),
            });
            context.push(reward);
        }
    }
    Ok(out)
}
