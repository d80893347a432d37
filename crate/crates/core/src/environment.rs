//! Synthetic problems and the tabular stand-in for the language-model policy.
//!
//! Each problem sits in a difficulty bin. The policy holds three logits per
//! bin:
//!
//! * `solve[d]`: a solve action emits the golden answer with probability
//!   `sigmoid(solve[d])`, otherwise a uniformly drawn wrong answer;
//! * `verify_tp[d]`: a verification of a correct answer concludes
//!   "correct" with probability `sigmoid(verify_tp[d])`;
//! * `verify_tn[d]`: a verification of a wrong answer concludes
//!   "incorrect" with probability `sigmoid(verify_tn[d])`.
//!
//! Every non-end action therefore reduces to one Bernoulli outcome on one
//! logit (plus a constant `-ln(alphabet - 1)` for the choice among wrong
//! answers), which makes log-probabilities and their gradients exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::trajectory::{next_action_type, Action, ActionType, AnswerToken, Trajectory, Verdict, MAX_ALPHABET};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow or cancellation.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ProblemRecord")]
pub struct ProblemSpec {
    pub id: String,
    pub difficulty_bin: usize,
    pub golden_answer: AnswerToken,
    pub alphabet_size: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRecord {
    id: String,
    difficulty_bin: usize,
    golden_answer: AnswerToken,
    alphabet_size: usize,
}

impl TryFrom<ProblemRecord> for ProblemSpec {
    type Error = Error;

    fn try_from(r: ProblemRecord) -> Result<Self> {
        ProblemSpec::new(r.id, r.difficulty_bin, r.golden_answer, r.alphabet_size)
    }
}

impl ProblemSpec {
    pub fn new(
        id: impl Into<String>,
        difficulty_bin: usize,
        golden_answer: AnswerToken,
        alphabet_size: usize,
    ) -> Result<Self> {
        if !(2..=MAX_ALPHABET).contains(&alphabet_size) {
            return Err(Error::config(format!(
                "alphabet size {alphabet_size} outside 2..={MAX_ALPHABET}"
            )));
        }
        if golden_answer.index() >= alphabet_size {
            return Err(Error::config(format!(
                "golden answer {golden_answer} outside an alphabet of size {alphabet_size}"
            )));
        }
        Ok(ProblemSpec {
            id: id.into(),
            difficulty_bin,
            golden_answer,
            alphabet_size,
        })
    }

    pub fn is_golden(&self, answer: AnswerToken) -> bool {
        answer == self.golden_answer
    }

    /// Wrong answer number `j` in `0..alphabet_size - 1`, skipping the golden one.
    pub(crate) fn wrong_answer(&self, j: usize) -> AnswerToken {
        let g = self.golden_answer.index();
        let idx = if j >= g { j + 1 } else { j };
        AnswerToken::new(idx).expect("index below alphabet size")
    }
}

/// Ground-truth check of a solve action against the golden answer.
pub fn v_golden(solution: &Action, problem: &ProblemSpec) -> Result<Verdict> {
    match solution {
        Action::Solve { answer } if problem.is_golden(*answer) => Ok(Verdict::Correct),
        Action::Solve { .. } => Ok(Verdict::Incorrect),
        _ => Err(Error::ExpectedSolve),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Solve,
    VerifyTp,
    VerifyTn,
}

impl ParamKind {
    pub const ALL: [ParamKind; 3] = [ParamKind::Solve, ParamKind::VerifyTp, ParamKind::VerifyTn];

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Solve => "solve",
            ParamKind::VerifyTp => "verify_tp",
            ParamKind::VerifyTn => "verify_tn",
        }
    }
}

/// Tabular logit policy; see the module docs for the outcome model.
///
/// Parameters are stored flat, kind-major: index `kind * num_bins + bin`.
/// Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPolicy {
    num_bins: usize,
    params: Vec<f64>,
}

impl SyntheticPolicy {
    pub fn new(solve: Vec<f64>, verify_tp: Vec<f64>, verify_tn: Vec<f64>) -> Result<Self> {
        let num_bins = solve.len();
        if num_bins == 0 || verify_tp.len() != num_bins || verify_tn.len() != num_bins {
            return Err(Error::config("policy needs the same non-zero number of logits per kind"));
        }
        let params: Vec<f64> = solve.into_iter().chain(verify_tp).chain(verify_tn).collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("policy logits"));
        }
        Ok(SyntheticPolicy { num_bins, params })
    }

    /// Same three logits in every bin.
    pub fn uniform(num_bins: usize, solve: f64, verify_tp: f64, verify_tn: f64) -> Result<Self> {
        SyntheticPolicy::new(vec![solve; num_bins], vec![verify_tp; num_bins], vec![verify_tn; num_bins])
    }

    /// Solver whose strength falls linearly from `+1.5` in the easiest bin to
    /// `-1.5` in the hardest, paired with a coin-flip verifier.
    pub fn mid_strength(num_bins: usize) -> Result<Self> {
        let solve = (0..num_bins)
            .map(|d| {
                if num_bins == 1 {
                    0.0
                } else {
                    1.5 - 3.0 * d as f64 / (num_bins - 1) as f64
                }
            })
            .collect();
        SyntheticPolicy::new(solve, vec![0.0; num_bins], vec![0.0; num_bins])
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn param_index(&self, kind: ParamKind, bin: usize) -> usize {
        debug_assert!(bin < self.num_bins);
        kind as usize * self.num_bins + bin
    }

    pub fn logit(&self, kind: ParamKind, bin: usize) -> f64 {
        self.params[self.param_index(kind, bin)]
    }

    pub fn prob(&self, kind: ParamKind, bin: usize) -> f64 {
        sigmoid(self.logit(kind, bin))
    }

    pub fn set_logit(&mut self, kind: ParamKind, bin: usize, value: f64) {
        let i = self.param_index(kind, bin);
        self.params[i] = value;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_name(&self, index: usize) -> String {
        let kind = ParamKind::ALL[index / self.num_bins];
        format!("{}.{}", kind.name(), index % self.num_bins)
    }

    /// Gradient-descent step `theta -= lr * grad`.
    pub fn apply_gradient(&mut self, grad: &[f64], learning_rate: f64) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(Error::config("gradient length does not match the policy"));
        }
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= learning_rate * g;
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("policy update"));
        }
        Ok(())
    }

    /// Checkpoint form: parameter name to logit, e.g. `"verify_tn.2"`.
    pub fn to_checkpoint(&self) -> BTreeMap<String, f64> {
        (0..self.params.len())
            .map(|i| (self.param_name(i), self.params[i]))
            .collect()
    }

    pub fn from_checkpoint(map: &BTreeMap<String, f64>) -> Result<Self> {
        if map.is_empty() || !map.len().is_multiple_of(3) {
            return Err(Error::config("checkpoint must hold three logits per difficulty bin"));
        }
        let num_bins = map.len() / 3;
        let mut params = vec![0.0; map.len()];
        for kind in ParamKind::ALL {
            for bin in 0..num_bins {
                let name = format!("{}.{}", kind.name(), bin);
                let v = map
                    .get(&name)
                    .ok_or_else(|| Error::config(format!("checkpoint is missing {name}")))?;
                params[kind as usize * num_bins + bin] = *v;
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("checkpoint logits"));
        }
        Ok(SyntheticPolicy { num_bins, params })
    }

    fn check_problem(&self, problem: &ProblemSpec) -> Result<()> {
        if problem.difficulty_bin >= self.num_bins {
            return Err(Error::config(format!(
                "problem {} has difficulty bin {} but the policy has {} bins",
                problem.id, problem.difficulty_bin, self.num_bins
            )));
        }
        Ok(())
    }

    /// Decomposes a trajectory into one Bernoulli outcome per non-end action.
    ///
    /// Fails when the action order is impossible under the transition rule.
    pub fn action_outcomes(&self, traj: &Trajectory, problem: &ProblemSpec) -> Result<Vec<Option<BinaryOutcome>>> {
        self.check_problem(problem)?;
        let bin = problem.difficulty_bin;
        let wrong_choice = -((problem.alphabet_size - 1) as f64).ln();
        let mut out = Vec::with_capacity(traj.actions.len());
        let mut last_solve_correct = false;
        for (i, action) in traj.actions.iter().enumerate() {
            let expected = match i {
                0 => ActionType::Solve,
                _ => next_action_type(&traj.actions[i - 1]).map_err(|_| Error::Grammar {
                    index: i,
                    reason: "no action may follow its predecessor",
                })?,
            };
            if action.kind() != expected {
                return Err(Error::Grammar {
                    index: i,
                    reason: "action type contradicts the transition rule",
                });
            }
            out.push(match action {
                Action::Solve { answer } => {
                    if answer.index() >= problem.alphabet_size {
                        return Err(Error::Grammar {
                            index: i,
                            reason: "answer outside the problem's alphabet",
                        });
                    }
                    last_solve_correct = problem.is_golden(*answer);
                    Some(BinaryOutcome {
                        param: self.param_index(ParamKind::Solve, bin),
                        success: last_solve_correct,
                        offset: if last_solve_correct { 0.0 } else { wrong_choice },
                    })
                }
                Action::Verify { verdict, .. } => {
                    let verdict = verdict.ok_or(Error::UnparsedVerdict)?;
                    let (kind, success) = if last_solve_correct {
                        (ParamKind::VerifyTp, verdict == Verdict::Correct)
                    } else {
                        (ParamKind::VerifyTn, verdict == Verdict::Incorrect)
                    };
                    Some(BinaryOutcome {
                        param: self.param_index(kind, bin),
                        success,
                        offset: 0.0,
                    })
                }
                Action::End => None,
            });
        }
        Ok(out)
    }

    /// Per-action `log pi(a_t | x, y_{:a_t})`; end actions are deterministic
    /// and contribute zero.
    pub fn action_log_probs(&self, traj: &Trajectory, problem: &ProblemSpec) -> Result<Vec<f64>> {
        Ok(self
            .action_outcomes(traj, problem)?
            .iter()
            .map(|o| o.map_or(0.0, |o| o.log_prob(self)))
            .collect())
    }

    pub fn trajectory_log_prob(&self, traj: &Trajectory, problem: &ProblemSpec) -> Result<f64> {
        Ok(self.action_log_probs(traj, problem)?.iter().sum())
    }

    /// Trajectory log-probability and its gradient in the logits.
    pub fn trajectory_log_prob_grad(&self, traj: &Trajectory, problem: &ProblemSpec) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for o in self.action_outcomes(traj, problem)?.into_iter().flatten() {
            total += o.log_prob(self);
            grad[o.param] += o.grad_log_prob(self);
        }
        Ok((total, grad))
    }

    /// Samples one trajectory under the transition rule, recording each
    /// action's log-probability. Stops after `max_rounds` solve/verify pairs
    /// without an end marker if no verification confirmed an answer.
    pub fn sample_trajectory(&self, problem: &ProblemSpec, rng: &mut RandomSource, max_rounds: usize) -> Rollout {
        let bin = problem.difficulty_bin;
        assert!(bin < self.num_bins, "problem bin outside the policy");
        let solve = self.logit(ParamKind::Solve, bin);
        let tp = self.logit(ParamKind::VerifyTp, bin);
        let tn = self.logit(ParamKind::VerifyTn, bin);
        let wrong_choice = -((problem.alphabet_size - 1) as f64).ln();

        let mut actions = Vec::with_capacity(2 * max_rounds + 1);
        let mut log_probs = Vec::with_capacity(2 * max_rounds + 1);
        let mut terminated = false;
        for _ in 0..max_rounds {
            let correct = rng.bernoulli(sigmoid(solve));
            if correct {
                actions.push(Action::solve(problem.golden_answer));
                log_probs.push(log_sigmoid(solve));
            } else {
                let j = rng.below(problem.alphabet_size - 1);
                actions.push(Action::solve(problem.wrong_answer(j)));
                log_probs.push(log_sigmoid(-solve) + wrong_choice);
            }
            let (logit, hit_verdict, miss_verdict) = if correct {
                (tp, Verdict::Correct, Verdict::Incorrect)
            } else {
                (tn, Verdict::Incorrect, Verdict::Correct)
            };
            let hit = rng.bernoulli(sigmoid(logit));
            let verdict = if hit { hit_verdict } else { miss_verdict };
            actions.push(Action::verify_with(verdict));
            log_probs.push(if hit { log_sigmoid(logit) } else { log_sigmoid(-logit) });
            if verdict == Verdict::Correct {
                actions.push(Action::End);
                log_probs.push(0.0);
                terminated = true;
                break;
            }
        }
        Rollout {
            problem: problem.clone(),
            trajectory: Trajectory::new(problem.id.clone(), actions),
            log_probs,
            truncated: !terminated,
        }
    }

    /// Monte Carlo estimate of the probability that the final answer is golden.
    pub fn estimate_problem_accuracy(
        &self,
        problem: &ProblemSpec,
        n_samples: usize,
        rng: &mut RandomSource,
        max_rounds: usize,
    ) -> f64 {
        assert!(n_samples >= 1, "need at least one sample");
        let hits = (0..n_samples)
            .filter(|_| self.sample_trajectory(problem, rng, max_rounds).final_correct())
            .count();
        hits as f64 / n_samples as f64
    }

    /// Exact probability that the final answer is golden within `max_rounds`.
    pub fn expected_accuracy(&self, problem: &ProblemSpec, max_rounds: usize) -> f64 {
        let bin = problem.difficulty_bin;
        let p = self.prob(ParamKind::Solve, bin);
        let tp = self.prob(ParamKind::VerifyTp, bin);
        let tn = self.prob(ParamKind::VerifyTn, bin);
        // f(r): success probability with r rounds left; the last round's
        // answer stands whatever its verdict.
        let mut f = if max_rounds == 0 { 0.0 } else { p };
        for _ in 1..max_rounds {
            f = p * (tp + (1.0 - tp) * f) + (1.0 - p) * tn * f;
        }
        f
    }
}

/// One action's stochastic outcome: success or failure on one logit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryOutcome {
    pub param: usize,
    pub success: bool,
    /// Constant log-probability term independent of the logits.
    pub offset: f64,
}

impl BinaryOutcome {
    pub fn log_prob(&self, policy: &SyntheticPolicy) -> f64 {
        let theta = policy.params[self.param];
        self.offset + if self.success { log_sigmoid(theta) } else { log_sigmoid(-theta) }
    }

    /// Derivative of [`Self::log_prob`] with respect to its logit.
    pub fn grad_log_prob(&self, policy: &SyntheticPolicy) -> f64 {
        let theta = policy.params[self.param];
        if self.success {
            sigmoid(-theta)
        } else {
            -sigmoid(theta)
        }
    }
}

/// A sampled trajectory with the problem it answers and the per-action
/// log-probabilities under the sampling policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub problem: ProblemSpec,
    pub trajectory: Trajectory,
    pub log_probs: Vec<f64>,
    pub truncated: bool,
}

impl Rollout {
    pub fn final_correct(&self) -> bool {
        self.trajectory
            .last_answer()
            .is_some_and(|a| self.problem.is_golden(a))
    }

    pub fn log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(bin: usize) -> ProblemSpec {
        ProblemSpec::new(format!("p{bin}"), bin, AnswerToken::new(1).unwrap(), 4).unwrap()
    }

    #[test]
    fn golden_validator() {
        let p = problem(0);
        assert_eq!(v_golden(&Action::solve(AnswerToken::new(1).unwrap()), &p).unwrap(), Verdict::Correct);
        assert_eq!(v_golden(&Action::solve(AnswerToken::new(0).unwrap()), &p).unwrap(), Verdict::Incorrect);
        assert!(v_golden(&Action::End, &p).is_err());
        let binary = ProblemSpec::new("b", 0, "A".parse().unwrap(), 2).unwrap();
        assert_eq!(v_golden(&Action::solve("B".parse().unwrap()), &binary).unwrap(), Verdict::Incorrect);
    }

    #[test]
    fn problem_validation() {
        assert!(ProblemSpec::new("x", 0, AnswerToken::new(3).unwrap(), 3).is_err());
        assert!(ProblemSpec::new("x", 0, AnswerToken::new(0).unwrap(), 1).is_err());
        assert!(serde_json::from_str::<ProblemSpec>(
            r#"{"id":"a","difficulty_bin":0,"golden_answer":"E","alphabet_size":4}"#
        )
        .is_err());
    }

    #[test]
    fn stable_logistics() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-12);
        assert!(log_sigmoid(800.0) <= 0.0 && log_sigmoid(800.0) > -1e-300);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn saturated_policy_takes_the_one_round_path() {
        let policy = SyntheticPolicy::uniform(1, 20.0, 20.0, 20.0).unwrap();
        let mut rng = RandomSource::new(1);
        let r = policy.sample_trajectory(&problem(0), &mut rng, 4);
        assert_eq!(r.trajectory.actions.len(), 3);
        assert_eq!(r.trajectory.actions[1].verdict(), Some(Verdict::Correct));
        assert!(r.trajectory.is_terminated() && !r.truncated);
    }

    #[test]
    fn single_round_log_prob_is_product_of_two_bernoullis() {
        let policy = SyntheticPolicy::uniform(2, 0.0, 0.0, 0.0).unwrap();
        let p = problem(0);
        let t = Trajectory::new(
            "p0",
            vec![Action::solve(p.golden_answer), Action::verify_with(Verdict::Correct), Action::End],
        );
        let lp = policy.trajectory_log_prob(&t, &p).unwrap();
        assert!((lp - 2.0 * 0.5f64.ln()).abs() < 1e-15);

        // the unused bin does not matter
        let mut other = policy.clone();
        other.set_logit(ParamKind::Solve, 1, 3.0);
        other.set_logit(ParamKind::VerifyTn, 1, -2.0);
        assert_eq!(other.trajectory_log_prob(&t, &p).unwrap(), lp);
    }

    #[test]
    fn recorded_log_probs_match_evaluation() {
        let policy = SyntheticPolicy::new(vec![0.3, -1.0], vec![0.5, 1.0], vec![-0.2, 0.7]).unwrap();
        let mut rng = RandomSource::new(9);
        for i in 0..200 {
            let p = problem(i % 2);
            let r = policy.sample_trajectory(&p, &mut rng, 4);
            let eval = policy.action_log_probs(&r.trajectory, &p).unwrap();
            for (a, b) in eval.iter().zip(&r.log_probs) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impossible_trajectories_have_no_log_prob() {
        let policy = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        let p = problem(0);
        let bad = Trajectory::new("p0", vec![Action::solve(p.golden_answer), Action::End]);
        assert!(matches!(
            policy.trajectory_log_prob(&bad, &p),
            Err(Error::Grammar { index: 1, .. })
        ));
        let after_confirm = Trajectory::new(
            "p0",
            vec![
                Action::solve(p.golden_answer),
                Action::verify_with(Verdict::Correct),
                Action::solve(p.golden_answer),
            ],
        );
        assert!(policy.trajectory_log_prob(&after_confirm, &p).is_err());
        assert!(policy.trajectory_log_prob(&bad, &problem(3)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let policy = SyntheticPolicy::new(vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]).unwrap();
        let map = policy.to_checkpoint();
        assert_eq!(map["verify_tn.1"], 0.6);
        assert_eq!(SyntheticPolicy::from_checkpoint(&map).unwrap(), policy);
        let mut missing = map.clone();
        missing.remove("solve.0");
        missing.insert("solve.7".into(), 0.0);
        assert!(SyntheticPolicy::from_checkpoint(&missing).is_err());
    }

    #[test]
    fn exact_accuracy_two_rounds_perfect_verifier() {
        let policy = SyntheticPolicy::uniform(1, 0.0, 40.0, 40.0).unwrap();
        assert!((policy.expected_accuracy(&problem(0), 2) - 0.75).abs() < 1e-12);
        assert!((policy.expected_accuracy(&problem(0), 4) - 0.9375).abs() < 1e-12);
    }

    #[test]
    fn apply_gradient_rejects_divergence() {
        let mut policy = SyntheticPolicy::uniform(1, 0.0, 0.0, 0.0).unwrap();
        assert!(policy.apply_gradient(&[f64::NAN, 0.0, 0.0], 1.0).is_err());
        assert!(policy.apply_gradient(&[1.0], 1.0).is_err());
    }
}
