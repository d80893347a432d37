//! Behavior initialization: difficulty-adaptive trial-and-error trajectories
//! and the masked supervised loss.
//!
//! Each problem's accuracy is estimated from a handful of single attempts.
//! Lower accuracy buys more rounds: the example strings together `k - 1`
//! distinct wrong answers, each refuted by its verification, and one golden
//! answer that is confirmed. The loss then trains only on verifications,
//! the final answer and the end marker; earlier wrong answers are context.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{ProblemSpec, SyntheticPolicy};
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::trajectory::{deserialize_trajectory, serialize_trajectory, Action, ActionType, AnswerToken, Trajectory, Verdict};

/// Attempts drawn per problem to find a golden answer before giving up.
pub const DEFAULT_RETRY_BUDGET: usize = 50;
pub const DEFAULT_SAMPLES_PER_PROBLEM: usize = 5;

/// Accuracy interval `[lo, hi)` mapped to a round count; the bucket whose
/// `hi` is 1 also contains 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyBucket {
    pub lo: f64,
    pub hi: f64,
    pub rounds: usize,
}

/// Buckets that partition `[0, 1]`, sorted by ascending accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DifficultyBucket>", into = "Vec<DifficultyBucket>")]
pub struct BucketSpec(Vec<DifficultyBucket>);

impl BucketSpec {
    pub fn new(mut buckets: Vec<DifficultyBucket>) -> Result<Self> {
        if buckets.is_empty() {
            return Err(Error::config("no difficulty buckets"));
        }
        buckets.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if buckets[0].lo != 0.0 || buckets.last().unwrap().hi != 1.0 {
            return Err(Error::config("difficulty buckets must cover [0, 1]"));
        }
        for w in buckets.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::config(format!(
                    "difficulty buckets leave a gap or overlap at {} / {}",
                    w[0].hi, w[1].lo
                )));
            }
            if w[1].rounds > w[0].rounds {
                return Err(Error::config("rounds must not increase with accuracy"));
            }
        }
        if buckets.iter().any(|b| b.lo >= b.hi || b.rounds == 0) {
            return Err(Error::config("difficulty bucket is empty or has zero rounds"));
        }
        Ok(BucketSpec(buckets))
    }

    /// `[0.75, 1] -> 1`, `[0.5, 0.75) -> 2`, `[0.25, 0.5) -> 3`, `[0, 0.25) -> 4`.
    pub fn quartiles() -> Self {
        let b = |lo, hi, rounds| DifficultyBucket { lo, hi, rounds };
        BucketSpec::new(vec![b(0.75, 1.0, 1), b(0.5, 0.75, 2), b(0.25, 0.5, 3), b(0.0, 0.25, 4)])
            .expect("quartile buckets partition [0, 1]")
    }

    pub fn buckets(&self) -> &[DifficultyBucket] {
        &self.0
    }

    pub fn max_rounds(&self) -> usize {
        self.0.iter().map(|b| b.rounds).max().unwrap_or(1)
    }
}

impl Default for BucketSpec {
    fn default() -> Self {
        BucketSpec::quartiles()
    }
}

impl TryFrom<Vec<DifficultyBucket>> for BucketSpec {
    type Error = Error;

    fn try_from(v: Vec<DifficultyBucket>) -> Result<Self> {
        BucketSpec::new(v)
    }
}

impl From<BucketSpec> for Vec<DifficultyBucket> {
    fn from(b: BucketSpec) -> Self {
        b.0
    }
}

/// Round count of the bucket containing `accuracy`.
pub fn bucket_rounds(accuracy: f64, buckets: &BucketSpec) -> Result<usize> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::config(format!("accuracy {accuracy} outside [0, 1]")));
    }
    buckets
        .0
        .iter()
        .find(|b| (b.lo <= accuracy && accuracy < b.hi) || (b.hi == 1.0 && accuracy == 1.0))
        .map(|b| b.rounds)
        .ok_or_else(|| Error::config("accuracy not covered by buckets"))
}

/// A behavior-initialization trajectory and its loss mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SftExample {
    pub problem: ProblemSpec,
    pub trajectory: Trajectory,
    pub mask: Vec<bool>,
}

impl SftExample {
    pub fn rounds(&self) -> usize {
        self.trajectory.solve_count()
    }
}

/// Loss mask: every verification, the last solve and the end marker.
pub fn sft_mask(traj: &Trajectory) -> Vec<bool> {
    let last_solve = traj.actions.iter().rposition(|a| a.kind() == ActionType::Solve);
    traj.actions
        .iter()
        .enumerate()
        .map(|(i, a)| match a.kind() {
            ActionType::Verify | ActionType::End => true,
            ActionType::Solve => Some(i) == last_solve,
        })
        .collect()
}

/// Interleaves failed attempts, the final golden attempt and their
/// verifications into `(s1, v1, ..., sk, vk, <end>)`.
pub fn assemble_sft_example(
    failed_solves: &[Action],
    final_solve: Action,
    verifications: &[Action],
    problem: &ProblemSpec,
) -> Result<SftExample> {
    let k = failed_solves.len() + 1;
    if verifications.len() != k {
        return Err(Error::config(format!(
            "{k} rounds need {k} verifications, got {}",
            verifications.len()
        )));
    }
    let mut solves: Vec<&Action> = failed_solves.iter().collect();
    solves.push(&final_solve);

    let mut answers: Vec<AnswerToken> = Vec::with_capacity(k);
    for (round, (solve, verify)) in solves.iter().zip(verifications).enumerate() {
        let answer = solve.answer().ok_or(Error::WrongActionKind {
            index: 2 * round,
            expected: "solve",
        })?;
        if verify.kind() != ActionType::Verify {
            return Err(Error::WrongActionKind {
                index: 2 * round + 1,
                expected: "verify",
            });
        }
        let is_final = round + 1 == k;
        let expected = if is_final { Verdict::Correct } else { Verdict::Incorrect };
        if problem.is_golden(answer) != is_final || verify.verdict() != Some(expected) {
            return Err(Error::LabelMismatch { round: round + 1 });
        }
        answers.push(answer);
    }
    let mut sorted = answers.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != answers.len() {
        return Err(Error::AnswersNotDistinct);
    }

    let mut actions = Vec::with_capacity(2 * k + 1);
    for (solve, verify) in solves.into_iter().zip(verifications) {
        actions.push(solve.clone());
        actions.push(verify.clone());
    }
    actions.push(Action::End);
    let trajectory = Trajectory::new(problem.id.clone(), actions);
    let mask = sft_mask(&trajectory);
    Ok(SftExample {
        problem: problem.clone(),
        trajectory,
        mask,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftBuildConfig {
    pub samples_per_problem: usize,
    pub buckets: BucketSpec,
    pub retry_budget: usize,
}

impl Default for SftBuildConfig {
    fn default() -> Self {
        SftBuildConfig {
            samples_per_problem: DEFAULT_SAMPLES_PER_PROBLEM,
            buckets: BucketSpec::quartiles(),
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// No golden answer within the sample set and the retry budget.
    NoCorrectAttempt,
    /// Fewer wrong answers exist than the round count needs.
    AlphabetTooSmall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedProblem {
    pub problem_id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftDataset {
    pub examples: Vec<SftExample>,
    pub skipped: Vec<SkippedProblem>,
    /// Estimated single-attempt accuracy per problem, in input order.
    pub accuracies: Vec<f64>,
}

/// Builds one example per problem. Each problem draws from its own stream
/// derived from `seed` and its position, so the result is independent of
/// thread scheduling.
pub fn build_sft_dataset(
    policy: &SyntheticPolicy,
    problems: &[ProblemSpec],
    config: &SftBuildConfig,
    seed: u64,
) -> Result<SftDataset> {
    if config.samples_per_problem == 0 {
        return Err(Error::config("samples_per_problem must be at least 1"));
    }
    if let Some(p) = problems.iter().find(|p| p.difficulty_bin >= policy.num_bins()) {
        return Err(Error::config(format!("problem {} lies outside the policy's bins", p.id)));
    }
    let built: Vec<(f64, Result<SftExample, SkipReason>)> = problems
        .par_iter()
        .enumerate()
        .map(|(i, problem)| {
            let mut rng = RandomSource::derived(seed, &[i as u64]);
            build_one(policy, problem, config, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut dataset = SftDataset {
        examples: Vec::new(),
        skipped: Vec::new(),
        accuracies: Vec::with_capacity(problems.len()),
    };
    for (problem, (accuracy, outcome)) in problems.iter().zip(built) {
        dataset.accuracies.push(accuracy);
        match outcome {
            Ok(example) => dataset.examples.push(example),
            Err(reason) => dataset.skipped.push(SkippedProblem {
                problem_id: problem.id.clone(),
                reason,
            }),
        }
    }
    Ok(dataset)
}

type BuildOutcome = (f64, std::result::Result<SftExample, SkipReason>);

fn build_one(
    policy: &SyntheticPolicy,
    problem: &ProblemSpec,
    config: &SftBuildConfig,
    rng: &mut RandomSource,
) -> Result<BuildOutcome> {
    use crate::environment::ParamKind;
    let p_solve = policy.prob(ParamKind::Solve, problem.difficulty_bin);
    let attempt = |rng: &mut RandomSource| {
        if rng.bernoulli(p_solve) {
            problem.golden_answer
        } else {
            problem.wrong_answer(rng.below(problem.alphabet_size - 1))
        }
    };

    let samples: Vec<AnswerToken> = (0..config.samples_per_problem).map(|_| attempt(rng)).collect();
    let hits = samples.iter().filter(|a| problem.is_golden(**a)).count();
    let accuracy = hits as f64 / samples.len() as f64;
    let k = bucket_rounds(accuracy, &config.buckets)?;

    let found = hits > 0 || (0..config.retry_budget).any(|_| problem.is_golden(attempt(rng)));
    if !found {
        return Ok((accuracy, Err(SkipReason::NoCorrectAttempt)));
    }
    if problem.alphabet_size - 1 < k - 1 {
        return Ok((accuracy, Err(SkipReason::AlphabetTooSmall)));
    }

    // The policy's own wrong answers first; the rest drawn from the wrong
    // answers not yet used, which is the policy's wrong-answer law
    // conditioned on distinctness.
    let mut wrong: Vec<AnswerToken> = Vec::with_capacity(k - 1);
    for a in samples.iter().filter(|a| !problem.is_golden(**a)) {
        if wrong.len() < k - 1 && !wrong.contains(a) {
            wrong.push(*a);
        }
    }
    while wrong.len() < k - 1 {
        let unused: Vec<AnswerToken> = (0..problem.alphabet_size - 1)
            .map(|j| problem.wrong_answer(j))
            .filter(|a| !wrong.contains(a))
            .collect();
        wrong.push(unused[rng.below(unused.len())]);
    }

    let failed: Vec<Action> = wrong.into_iter().map(Action::solve).collect();
    let mut verifications = vec![Action::verify_with(Verdict::Incorrect); k - 1];
    verifications.push(Action::verify_with(Verdict::Correct));
    let example = assemble_sft_example(&failed, Action::solve(problem.golden_answer), &verifications, problem)?;
    Ok((accuracy, Ok(example)))
}

/// Mean over examples of the negative masked log-likelihood, and its
/// gradient in the policy logits.
pub fn sft_loss(policy: &SyntheticPolicy, dataset: &[SftExample]) -> Result<(f64, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.num_params()];
    for ex in dataset {
        if ex.mask.len() != ex.trajectory.actions.len() {
            return Err(Error::config("mask length differs from action count"));
        }
        let outcomes = policy.action_outcomes(&ex.trajectory, &ex.problem)?;
        for (outcome, &masked) in outcomes.iter().zip(&ex.mask) {
            if let (Some(o), true) = (outcome, masked) {
                loss -= o.log_prob(policy);
                grad[o.param] -= o.grad_log_prob(policy);
            }
        }
    }
    let n = dataset.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("sft loss"));
    }
    Ok((loss, grad))
}

/// One line of a persisted SFT dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftRecord {
    pub problem_id: String,
    pub rounds: usize,
    pub text: String,
    pub mask: Vec<bool>,
}

impl SftRecord {
    pub fn from_example(ex: &SftExample) -> Result<Self> {
        Ok(SftRecord {
            problem_id: ex.problem.id.clone(),
            rounds: ex.rounds(),
            text: serialize_trajectory(&ex.trajectory)?,
            mask: ex.mask.clone(),
        })
    }

    /// Rebuilds the example, checking the text and mask against each other.
    pub fn into_example(self, problem: &ProblemSpec) -> Result<SftExample> {
        if problem.id != self.problem_id {
            return Err(Error::config(format!(
                "record for {} paired with problem {}",
                self.problem_id, problem.id
            )));
        }
        let trajectory = deserialize_trajectory(&self.text, &self.problem_id)?;
        if self.mask != sft_mask(&trajectory) || self.rounds != trajectory.solve_count() {
            return Err(Error::config(format!(
                "mask or round count of {} does not match its trajectory",
                self.problem_id
            )));
        }
        Ok(SftExample {
            problem: problem.clone(),
            trajectory,
            mask: self.mask,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> ProblemSpec {
        ProblemSpec::new("p", 0, AnswerToken::new(0).unwrap(), 6).unwrap()
    }
    fn s(i: usize) -> Action {
        Action::solve(AnswerToken::new(i).unwrap())
    }
    fn no() -> Action {
        Action::verify_with(Verdict::Incorrect)
    }
    fn yes() -> Action {
        Action::verify_with(Verdict::Correct)
    }

    #[test]
    fn quartile_buckets() {
        let b = BucketSpec::quartiles();
        assert_eq!(bucket_rounds(1.0, &b).unwrap(), 1);
        assert_eq!(bucket_rounds(0.75, &b).unwrap(), 1);
        assert_eq!(bucket_rounds(0.6, &b).unwrap(), 2);
        assert_eq!(bucket_rounds(0.25, &b).unwrap(), 3);
        assert_eq!(bucket_rounds(0.0, &b).unwrap(), 4);
        assert!(bucket_rounds(1.2, &b).is_err());
    }

    #[test]
    fn non_partitioning_buckets_are_rejected() {
        let b = |lo, hi, rounds| DifficultyBucket { lo, hi, rounds };
        assert!(BucketSpec::new(vec![b(0.0, 0.5, 2), b(0.6, 1.0, 1)]).is_err());
        assert!(BucketSpec::new(vec![b(0.0, 0.6, 2), b(0.5, 1.0, 1)]).is_err());
        assert!(BucketSpec::new(vec![b(0.1, 1.0, 1)]).is_err());
        assert!(BucketSpec::new(vec![b(0.0, 0.5, 1), b(0.5, 1.0, 2)]).is_err());
        assert!(BucketSpec::new(vec![b(0.0, 1.0, 3)]).is_ok());
        assert!(serde_json::from_str::<BucketSpec>(r#"[{"lo":0.0,"hi":0.4,"rounds":2}]"#).is_err());
    }

    #[test]
    fn single_round_example_masks_everything() {
        let ex = assemble_sft_example(&[], s(0), &[yes()], &problem()).unwrap();
        assert_eq!(ex.trajectory.actions, vec![s(0), yes(), Action::End]);
        assert_eq!(ex.mask, vec![true, true, true]);
    }

    #[test]
    fn two_round_mask() {
        let ex = assemble_sft_example(&[s(3)], s(0), &[no(), yes()], &problem()).unwrap();
        assert_eq!(ex.mask, vec![false, true, true, true, true]);
    }

    #[test]
    fn mask_cardinality_is_k_plus_two() {
        for k in 1..=4 {
            let failed: Vec<Action> = (1..k).map(s).collect();
            let mut ver = vec![no(); k - 1];
            ver.push(yes());
            let ex = assemble_sft_example(&failed, s(0), &ver, &problem()).unwrap();
            assert_eq!(ex.mask.iter().filter(|m| **m).count(), k + 2);
        }
    }

    #[test]
    fn assembly_errors() {
        let p = problem();
        assert!(matches!(
            assemble_sft_example(&[s(2), s(2)], s(0), &[no(), no(), yes()], &p),
            Err(Error::AnswersNotDistinct)
        ));
        assert!(matches!(
            assemble_sft_example(&[s(2)], s(0), &[yes(), yes()], &p),
            Err(Error::LabelMismatch { round: 1 })
        ));
        assert!(matches!(
            assemble_sft_example(&[s(2)], s(3), &[no(), yes()], &p),
            Err(Error::LabelMismatch { round: 2 })
        ));
        assert!(matches!(
            assemble_sft_example(&[s(0)], s(0), &[no(), yes()], &p),
            Err(Error::LabelMismatch { round: 1 })
        ));
        assert!(assemble_sft_example(&[s(2)], s(0), &[no()], &p).is_err());
    }

    #[test]
    fn single_example_loss_is_two_log_two() {
        let policy = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        let ex = assemble_sft_example(&[], s(0), &[yes()], &problem()).unwrap();
        let (loss, _) = sft_loss(&policy, std::slice::from_ref(&ex)).unwrap();
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-14);

        let mut unmasked = ex;
        unmasked.mask = vec![false; 3];
        let (loss, grad) = sft_loss(&policy, &[unmasked]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
        assert!(matches!(sft_loss(&policy, &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn saturated_solver_builds_single_round_examples() {
        let policy = SyntheticPolicy::uniform(2, 40.0, 0.0, 0.0).unwrap();
        let problems: Vec<ProblemSpec> = (0..20)
            .map(|i| ProblemSpec::new(format!("p{i}"), i % 2, AnswerToken::new(i % 4).unwrap(), 4).unwrap())
            .collect();
        let ds = build_sft_dataset(&policy, &problems, &SftBuildConfig::default(), 3).unwrap();
        assert_eq!(ds.examples.len(), 20);
        assert!(ds.examples.iter().all(|e| e.rounds() == 1));
    }

    #[test]
    fn hopeless_solver_skips_everything() {
        let policy = SyntheticPolicy::uniform(1, -40.0, 0.0, 0.0).unwrap();
        let problems: Vec<ProblemSpec> = (0..10)
            .map(|i| ProblemSpec::new(format!("p{i}"), 0, AnswerToken::new(1).unwrap(), 8).unwrap())
            .collect();
        let ds = build_sft_dataset(&policy, &problems, &SftBuildConfig::default(), 3).unwrap();
        assert!(ds.examples.is_empty());
        assert_eq!(ds.skipped.len(), 10);
        assert!(ds.skipped.iter().all(|s| s.reason == SkipReason::NoCorrectAttempt));
    }

    #[test]
    fn small_alphabets_cannot_host_long_examples() {
        // accuracy 0 with a binary alphabet would need three distinct wrong answers
        let policy = SyntheticPolicy::uniform(1, -3.0, 0.0, 0.0).unwrap();
        let problems = vec![ProblemSpec::new("b", 0, AnswerToken::new(0).unwrap(), 2).unwrap()];
        let config = SftBuildConfig {
            retry_budget: 10_000,
            ..SftBuildConfig::default()
        };
        let ds = build_sft_dataset(&policy, &problems, &config, 11).unwrap();
        if let Some(ex) = ds.examples.first() {
            assert!(ex.rounds() <= 2);
        } else {
            assert_eq!(ds.skipped[0].reason, SkipReason::AlphabetTooSmall);
        }
    }

    #[test]
    fn record_round_trip_and_tamper_detection() {
        let ex = assemble_sft_example(&[s(3), s(1)], s(0), &[no(), no(), yes()], &problem()).unwrap();
        let rec = SftRecord::from_example(&ex).unwrap();
        assert_eq!(rec.rounds, 3);
        assert_eq!(rec.clone().into_example(&problem()).unwrap(), ex);
        let mut bad = rec;
        bad.mask[0] = true;
        assert!(bad.into_example(&problem()).is_err());
    }
}
