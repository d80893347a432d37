use serde::{Deserialize, Serialize};

use super::{Action, Trajectory, Verdict};
use crate::environment::ProblemSpec;

/// Action cap used by rejection sampling.
pub const DEFAULT_MAX_ACTIONS: usize = 20;

/// Why a trajectory was rejected. The first violation found scanning left to
/// right determines the reason; the length cap is checked before anything
/// else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Solve and verify actions do not alternate, e.g. `(s1, s2, v1)`, or an
    /// action follows `<end>`.
    Alternation,
    /// More actions than the cap.
    TooLong,
    /// A golden-correct solve was confirmed, yet the trajectory kept going.
    ContinuedAfterConfirmation,
    /// The next action contradicts the verdict: a retry after a (wrong)
    /// confirmation, or `<end>` after a refutation.
    TransitionViolation,
    /// The trajectory stops before reaching `<end>`.
    MissingTermination,
    /// A verification has no recognizable conclusion.
    UnparsedVerdict,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::Alternation,
        RejectReason::TooLong,
        RejectReason::ContinuedAfterConfirmation,
        RejectReason::TransitionViolation,
        RejectReason::MissingTermination,
        RejectReason::UnparsedVerdict,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Alternation => "alternation",
            RejectReason::TooLong => "too_long",
            RejectReason::ContinuedAfterConfirmation => "continued_after_confirmation",
            RejectReason::TransitionViolation => "transition_violation",
            RejectReason::MissingTermination => "missing_termination",
            RejectReason::UnparsedVerdict => "unparsed_verdict",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationResult {
    Accepted,
    Rejected(RejectReason),
}

impl ValidationResult {
    pub fn is_accepted(self) -> bool {
        self == ValidationResult::Accepted
    }
}

#[derive(Clone, Copy)]
enum State {
    ExpectSolve,
    ExpectVerify { solve_correct: bool },
    AfterConfirm { solve_correct: bool },
    AfterRefute,
    Ended,
}

/// Rejection-sampling check of one trajectory against the action grammar.
pub fn validate_trajectory(
    traj: &Trajectory,
    problem: &ProblemSpec,
    max_actions: usize,
) -> ValidationResult {
    use RejectReason::*;
    use ValidationResult::Rejected;

    if traj.actions.len() > max_actions {
        return Rejected(TooLong);
    }
    let mut state = State::ExpectSolve;
    for action in &traj.actions {
        state = match (state, action) {
            (State::ExpectSolve | State::AfterRefute, Action::Solve { answer }) => State::ExpectVerify {
                solve_correct: *answer == problem.golden_answer,
            },
            (State::ExpectSolve, _) => return Rejected(Alternation),
            (State::ExpectVerify { .. }, Action::Verify { verdict: None, .. }) => return Rejected(UnparsedVerdict),
            (State::ExpectVerify { solve_correct }, Action::Verify { verdict: Some(v), .. }) => match v {
                Verdict::Correct => State::AfterConfirm { solve_correct },
                Verdict::Incorrect => State::AfterRefute,
            },
            (State::ExpectVerify { .. }, _) => return Rejected(Alternation),
            (State::AfterConfirm { .. }, Action::End) => State::Ended,
            (State::AfterConfirm { solve_correct: true }, _) => return Rejected(ContinuedAfterConfirmation),
            (State::AfterConfirm { solve_correct: false }, Action::Solve { .. }) => {
                return Rejected(TransitionViolation)
            }
            (State::AfterConfirm { .. }, _) => return Rejected(Alternation),
            (State::AfterRefute, Action::End) => return Rejected(TransitionViolation),
            (State::AfterRefute, _) => return Rejected(Alternation),
            (State::Ended, _) => return Rejected(Alternation),
        };
    }
    match state {
        State::Ended => ValidationResult::Accepted,
        _ => Rejected(MissingTermination),
    }
}
