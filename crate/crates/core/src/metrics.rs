//! Self-verification and self-correction metrics over an evaluation set.
//!
//! Verification metrics count every complete (solve, verify) pair. The
//! correction rates compare each trajectory's first and last solve; a
//! truncated trajectory's last emitted solve counts as its final answer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::environment::{ParamKind, ProblemSpec, Rollout, SyntheticPolicy};
use crate::error::{Error, Result};
use crate::trajectory::{Action, Verdict};

/// A fraction with its raw counts; `value` is absent when nothing was counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub numerator: u64,
    pub denominator: u64,
}

impl Rate {
    pub fn value(&self) -> Option<f64> {
        (self.denominator > 0).then(|| self.numerator as f64 / self.denominator as f64)
    }

    fn add(&mut self, hit: bool) {
        self.denominator += 1;
        self.numerator += hit as u64;
    }
}

#[derive(Serialize)]
struct RateOut {
    value: Option<f64>,
    numerator: u64,
    denominator: u64,
}

fn serialize_rate<S: serde::Serializer>(r: &Rate, s: S) -> std::result::Result<S::Ok, S::Error> {
    RateOut {
        value: r.value(),
        numerator: r.numerator,
        denominator: r.denominator,
    }
    .serialize(s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(serialize_with = "serialize_rate")]
    pub verification_accuracy: Rate,
    #[serde(serialize_with = "serialize_rate")]
    pub error_recall: Rate,
    #[serde(serialize_with = "serialize_rate")]
    pub correct_precision: Rate,
    #[serde(serialize_with = "serialize_rate")]
    pub incorrect_to_correct_rate: Rate,
    #[serde(serialize_with = "serialize_rate")]
    pub correct_to_incorrect_rate: Rate,
    #[serde(serialize_with = "serialize_rate")]
    pub final_accuracy: Rate,
    /// Difficulty bin to mean solve count; bins without trajectories are absent.
    pub avg_trials_by_difficulty: BTreeMap<usize, f64>,
    pub trajectories: u64,
}

/// (solve correct, verdict) for every verify action with a preceding solve.
fn pairs(r: &Rollout) -> Result<Vec<(bool, Verdict)>> {
    let mut out = Vec::new();
    let mut last_solve: Option<bool> = None;
    for a in &r.trajectory.actions {
        match a {
            Action::Solve { answer } => last_solve = Some(r.problem.is_golden(*answer)),
            Action::Verify { verdict, .. } => {
                let verdict = verdict.ok_or(Error::UnparsedVerdict)?;
                if let Some(correct) = last_solve.take() {
                    out.push((correct, verdict));
                }
            }
            Action::End => {}
        }
    }
    Ok(out)
}

pub fn verification_accuracy(evalset: &[Rollout]) -> Result<Rate> {
    let mut rate = Rate::default();
    for r in evalset {
        for (correct, verdict) in pairs(r)? {
            rate.add((verdict == Verdict::Correct) == correct);
        }
    }
    Ok(rate)
}

pub fn error_recall(evalset: &[Rollout]) -> Result<Rate> {
    let mut rate = Rate::default();
    for r in evalset {
        for (correct, verdict) in pairs(r)? {
            if !correct {
                rate.add(verdict == Verdict::Incorrect);
            }
        }
    }
    Ok(rate)
}

pub fn correct_precision(evalset: &[Rollout]) -> Result<Rate> {
    let mut rate = Rate::default();
    for r in evalset {
        for (correct, verdict) in pairs(r)? {
            if verdict == Verdict::Correct {
                rate.add(correct);
            }
        }
    }
    Ok(rate)
}

fn first_last(r: &Rollout) -> Result<(bool, bool)> {
    let first = r.trajectory.first_answer().ok_or(Error::NoSolveAction)?;
    let last = r.trajectory.last_answer().ok_or(Error::NoSolveAction)?;
    Ok((r.problem.is_golden(first), r.problem.is_golden(last)))
}

pub fn incorrect_to_correct_rate(evalset: &[Rollout]) -> Result<Rate> {
    let mut rate = Rate::default();
    for r in evalset {
        let (first, last) = first_last(r)?;
        if !first {
            rate.add(last);
        }
    }
    Ok(rate)
}

pub fn correct_to_incorrect_rate(evalset: &[Rollout]) -> Result<Rate> {
    let mut rate = Rate::default();
    for r in evalset {
        let (first, last) = first_last(r)?;
        if first {
            rate.add(!last);
        }
    }
    Ok(rate)
}

/// Mean number of solve actions per trajectory, by difficulty bin.
pub fn avg_trials_by_difficulty(evalset: &[Rollout]) -> BTreeMap<usize, f64> {
    let mut sums: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in evalset {
        let e = sums.entry(r.problem.difficulty_bin).or_default();
        e.0 += r.trajectory.solve_count();
        e.1 += 1;
    }
    sums.into_iter().map(|(b, (s, n))| (b, s as f64 / n as f64)).collect()
}

pub fn compute_metrics(evalset: &[Rollout]) -> Result<MetricsReport> {
    let mut final_accuracy = Rate::default();
    for r in evalset {
        final_accuracy.add(first_last(r)?.1);
    }
    Ok(MetricsReport {
        verification_accuracy: verification_accuracy(evalset)?,
        error_recall: error_recall(evalset)?,
        correct_precision: correct_precision(evalset)?,
        incorrect_to_correct_rate: incorrect_to_correct_rate(evalset)?,
        correct_to_incorrect_rate: correct_to_incorrect_rate(evalset)?,
        final_accuracy,
        avg_trials_by_difficulty: avg_trials_by_difficulty(evalset),
        trajectories: evalset.len() as u64,
    })
}

/// Column names of [`MetricsReport::csv_row`].
pub fn csv_header(bins: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = ["trajectories"].iter().map(|s| s.to_string()).collect();
    for name in RATE_NAMES {
        h.push(name.to_string());
        h.push(format!("{name}_num"));
        h.push(format!("{name}_den"));
    }
    h.extend(bins.iter().map(|b| format!("avg_trials_bin{b}")));
    h
}

const RATE_NAMES: [&str; 6] = [
    "verification_accuracy",
    "error_recall",
    "correct_precision",
    "incorrect_to_correct_rate",
    "correct_to_incorrect_rate",
    "final_accuracy",
];

impl MetricsReport {
    fn rates(&self) -> [&Rate; 6] {
        [
            &self.verification_accuracy,
            &self.error_recall,
            &self.correct_precision,
            &self.incorrect_to_correct_rate,
            &self.correct_to_incorrect_rate,
            &self.final_accuracy,
        ]
    }

    /// Flat row matching [`csv_header`] for `bins`; absent values are empty.
    pub fn csv_row(&self, bins: &[usize]) -> Vec<String> {
        let mut row = vec![self.trajectories.to_string()];
        for r in self.rates() {
            row.push(r.value().map(|v| v.to_string()).unwrap_or_default());
            row.push(r.numerator.to_string());
            row.push(r.denominator.to_string());
        }
        for b in bins {
            row.push(
                self.avg_trials_by_difficulty
                    .get(b)
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        row
    }
}

/// Metric values in the limit of infinitely many samples per problem:
/// ratios of expected counts, computed by enumerating every outcome path.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExpectedMetrics {
    pub verification_accuracy: Option<f64>,
    pub error_recall: Option<f64>,
    pub correct_precision: Option<f64>,
    pub incorrect_to_correct_rate: Option<f64>,
    pub correct_to_incorrect_rate: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub avg_trials_by_difficulty: BTreeMap<usize, f64>,
}

#[derive(Default, Clone, Copy)]
struct Expect {
    verifications: f64,
    truthful: f64,
    wrong: f64,
    caught: f64,
    said_correct: f64,
    said_correct_right: f64,
    first_wrong: f64,
    first_wrong_last_right: f64,
    first_right: f64,
    first_right_last_wrong: f64,
    solves: f64,
    final_right: f64,
}

impl Expect {
    fn scaled_add(&mut self, o: &Expect, w: f64) {
        self.verifications += w * o.verifications;
        self.truthful += w * o.truthful;
        self.wrong += w * o.wrong;
        self.caught += w * o.caught;
        self.said_correct += w * o.said_correct;
        self.said_correct_right += w * o.said_correct_right;
        self.first_wrong += w * o.first_wrong;
        self.first_wrong_last_right += w * o.first_wrong_last_right;
        self.first_right += w * o.first_right;
        self.first_right_last_wrong += w * o.first_right_last_wrong;
        self.solves += w * o.solves;
        self.final_right += w * o.final_right;
    }
}

fn ratio(n: f64, d: f64) -> Option<f64> {
    (d > 0.0).then(|| n / d)
}

/// Expected counts for one problem of a bin with solve/tp/tn probabilities.
fn expect_bin(p: f64, tp: f64, tn: f64, max_rounds: usize) -> Expect {
    let mut e = Expect::default();
    walk(p, tp, tn, max_rounds, 1, None, 1.0, &mut e);
    e
}

#[allow(clippy::too_many_arguments)]
fn walk(p: f64, tp: f64, tn: f64, max_rounds: usize, round: usize, first: Option<bool>, prob: f64, e: &mut Expect) {
    if prob == 0.0 {
        return;
    }
    for (correct, pc) in [(true, p), (false, 1.0 - p)] {
        let first = first.unwrap_or(correct);
        let p_yes = if correct { tp } else { 1.0 - tn };
        for (says_correct, pv) in [(true, p_yes), (false, 1.0 - p_yes)] {
            let w = prob * pc * pv;
            if w == 0.0 {
                continue;
            }
            e.solves += w;
            e.verifications += w;
            e.truthful += w * ((says_correct == correct) as u8 as f64);
            if !correct {
                e.wrong += w;
                e.caught += w * (!says_correct as u8 as f64);
            }
            if says_correct {
                e.said_correct += w;
                e.said_correct_right += w * (correct as u8 as f64);
            }
            if says_correct || round == max_rounds {
                if first {
                    e.first_right += w;
                    e.first_right_last_wrong += w * (!correct as u8 as f64);
                } else {
                    e.first_wrong += w;
                    e.first_wrong_last_right += w * (correct as u8 as f64);
                }
                e.final_right += w * (correct as u8 as f64);
            } else {
                walk(p, tp, tn, max_rounds, round + 1, Some(first), w, e);
            }
        }
    }
}

/// Exact expectation of [`compute_metrics`] when every problem is sampled
/// equally often under `policy` with `max_rounds`.
pub fn expected_metrics(policy: &SyntheticPolicy, problems: &[ProblemSpec], max_rounds: usize) -> Result<ExpectedMetrics> {
    if max_rounds == 0 {
        return Err(Error::config("max_rounds must be at least 1"));
    }
    let mut per_bin: BTreeMap<usize, usize> = BTreeMap::new();
    for p in problems {
        if p.difficulty_bin >= policy.num_bins() {
            return Err(Error::config(format!("problem {} lies outside the policy's bins", p.id)));
        }
        *per_bin.entry(p.difficulty_bin).or_default() += 1;
    }
    let mut total = Expect::default();
    let mut trials = BTreeMap::new();
    for (&bin, &count) in &per_bin {
        let e = expect_bin(
            policy.prob(ParamKind::Solve, bin),
            policy.prob(ParamKind::VerifyTp, bin),
            policy.prob(ParamKind::VerifyTn, bin),
            max_rounds,
        );
        trials.insert(bin, e.solves);
        total.scaled_add(&e, count as f64);
    }
    Ok(ExpectedMetrics {
        verification_accuracy: ratio(total.truthful, total.verifications),
        error_recall: ratio(total.caught, total.wrong),
        correct_precision: ratio(total.said_correct_right, total.said_correct),
        incorrect_to_correct_rate: ratio(total.first_wrong_last_right, total.first_wrong),
        correct_to_incorrect_rate: ratio(total.first_right_last_wrong, total.first_right),
        final_accuracy: ratio(total.final_right, problems.len() as f64),
        avg_trials_by_difficulty: trials,
    })
}
