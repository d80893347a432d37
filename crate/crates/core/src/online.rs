//! State and configuration shared by the two on-policy trainers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{ProblemSpec, Rollout, SyntheticPolicy};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    pub samples_per_prompt: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub clip_epsilon: f64,
    pub batch_size: usize,
    pub max_rounds: usize,
    /// Gradient steps taken on each sampled batch.
    pub updates_per_batch: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            samples_per_prompt: 4,
            learning_rate: 5e-7,
            beta: 0.05,
            clip_epsilon: 0.2,
            batch_size: 64,
            max_rounds: 4,
            updates_per_batch: 1,
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_prompt < 2 {
            return Err(Error::config("samples_per_prompt must be at least 2"));
        }
        check_common(self.learning_rate, self.beta, self.clip_epsilon)?;
        if self.batch_size == 0 || self.max_rounds == 0 || self.updates_per_batch == 0 {
            return Err(Error::config("batch_size, max_rounds and updates_per_batch must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn check_common(learning_rate: f64, beta: f64, epsilon: f64) -> Result<()> {
    if !(learning_rate.is_finite() && learning_rate >= 0.0) {
        return Err(Error::config("learning rate must be finite and non-negative"));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::config("beta must be finite and non-negative"));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::config("clip epsilon must be positive"));
    }
    Ok(())
}

/// The trained policy, its frozen reference, and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub policy: SyntheticPolicy,
    pub reference: SyntheticPolicy,
    pub step: u64,
    pub seed: u64,
}

impl TrainerState {
    /// Starts from `policy`, which also becomes the reference.
    pub fn new(policy: SyntheticPolicy, seed: u64) -> Self {
        TrainerState {
            reference: policy.clone(),
            policy,
            step: 0,
            seed,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub step: u64,
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub clip_fraction: f64,
    pub kl: f64,
    pub accuracy: f64,
    /// Mode-specific columns, in log order.
    #[serde(skip)]
    pub extras: Vec<(&'static str, f64)>,
}

pub(crate) const SAMPLE_STREAM: u64 = 0x5a4d;

/// `m` rollouts per problem from `policy`. Problem `i` at `step` draws from
/// its own derived stream, so results do not depend on scheduling.
pub fn sample_groups(
    policy: &SyntheticPolicy,
    problems: &[ProblemSpec],
    m: usize,
    max_rounds: usize,
    seed: u64,
    step: u64,
) -> Result<Vec<Vec<Rollout>>> {
    if let Some(p) = problems.iter().find(|p| p.difficulty_bin >= policy.num_bins()) {
        return Err(Error::config(format!("problem {} lies outside the policy's bins", p.id)));
    }
    Ok(problems
        .par_iter()
        .enumerate()
        .map(|(i, problem)| {
            let mut rng = RandomSource::derived(seed, &[SAMPLE_STREAM, step, i as u64]);
            (0..m).map(|_| policy.sample_trajectory(problem, &mut rng, max_rounds)).collect()
        })
        .collect())
}

pub(crate) fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
