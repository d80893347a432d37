//! Action grammar for solve/verify trajectories.
//!
//! A trajectory is an interleaving of solve and verify actions, closed by an
//! end marker once a verification confirms the preceding answer:
//!
//! ```text
//! s1 v1 s2 v2 ... sk vk <end>
//! ```
//!
//! The type of every action after the first is fixed by its predecessor (see
//! [`next_action_type`]), so the only free choices a policy makes are which
//! answer a solve emits and which verdict a verify reaches.

mod text;
mod validate;

pub use text::{deserialize_trajectory, serialize_trajectory, END_LINE, RECHECK_LINE, RETRY_LINE};
pub use validate::{validate_trajectory, RejectReason, ValidationResult, DEFAULT_MAX_ACTIONS};

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported answer alphabet; tokens render as `A`..=`Z`.
pub const MAX_ALPHABET: usize = 26;

pub const CORRECT_CONCLUSION: &str = "Therefore, the answer is correct.";
pub const INCORRECT_CONCLUSION: &str = "Therefore, the answer is incorrect.";
pub const UNVERIFIABLE_CONCLUSION: &str = "Therefore, the answer cannot be verified.";

const CONFIRM_TEXT: &str =
    "Substituting the answer back into the problem, every condition holds. Therefore, the answer is correct.";
const REFUTE_TEXT: &str =
    "Substituting the answer back into the problem, one of the conditions fails. Therefore, the answer is incorrect.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionType {
    Solve,
    Verify,
    End,
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionType::Solve => "solve",
            ActionType::Verify => "verify",
            ActionType::End => "end",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

/// A symbol from the finite answer alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnswerToken(u8);

impl AnswerToken {
    pub fn new(index: usize) -> Result<Self> {
        if index >= MAX_ALPHABET {
            return Err(Error::config(format!(
                "answer index {index} exceeds the maximum alphabet size {MAX_ALPHABET}"
            )));
        }
        Ok(AnswerToken(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AnswerToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", (b'A' + self.0) as char)
    }
}

impl FromStr for AnswerToken {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.as_bytes() {
            [c @ b'A'..=b'Z'] => Ok(AnswerToken(c - b'A')),
            _ => Err(Error::config(format!("invalid answer token {s:?}"))),
        }
    }
}

impl Serialize for AnswerToken {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AnswerToken {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = <Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One step of a trajectory.
///
/// The variant carries exactly the payload its kind allows: solve actions
/// carry an answer, verify actions carry their text and the verdict parsed
/// from it, end carries nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ActionRecord", into = "ActionRecord")]
pub enum Action {
    Solve {
        answer: AnswerToken,
    },
    Verify {
        text: Cow<'static, str>,
        /// `None` when the text has no recognizable conclusion.
        verdict: Option<Verdict>,
    },
    End,
}

impl Action {
    pub fn solve(answer: AnswerToken) -> Self {
        Action::Solve { answer }
    }

    /// Verify action from free-form text; the verdict is parsed from it.
    pub fn verify(text: impl Into<Cow<'static, str>>) -> Self {
        let text = text.into();
        let verdict = parse_verdict(&text).ok();
        Action::Verify { text, verdict }
    }

    /// Verify action whose text is rendered from the standard conclusion
    /// templates.
    pub fn verify_with(verdict: Verdict) -> Self {
        Action::Verify {
            text: Cow::Borrowed(render_verdict(verdict)),
            verdict: Some(verdict),
        }
    }

    pub fn kind(&self) -> ActionType {
        match self {
            Action::Solve { .. } => ActionType::Solve,
            Action::Verify { .. } => ActionType::Verify,
            Action::End => ActionType::End,
        }
    }

    pub fn answer(&self) -> Option<AnswerToken> {
        match self {
            Action::Solve { answer } => Some(*answer),
            _ => None,
        }
    }

    pub fn verdict(&self) -> Option<Verdict> {
        match self {
            Action::Verify { verdict, .. } => *verdict,
            _ => None,
        }
    }

    pub fn verdict_text(&self) -> Option<&str> {
        match self {
            Action::Verify { text, .. } => Some(text),
            _ => None,
        }
    }
}

/// Wire form of an action in the JSONL container.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRecord {
    kind: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer_token: Option<AnswerToken>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verdict_text: Option<String>,
}

impl TryFrom<ActionRecord> for Action {
    type Error = String;

    fn try_from(r: ActionRecord) -> std::result::Result<Self, String> {
        match (r.kind, r.answer_token, r.verdict_text) {
            (ActionType::Solve, Some(a), None) => Ok(Action::solve(a)),
            (ActionType::Verify, None, Some(t)) => Ok(Action::verify(t)),
            (ActionType::End, None, None) => Ok(Action::End),
            (kind, _, _) => Err(format!("fields do not match action kind {kind}")),
        }
    }
}

impl From<Action> for ActionRecord {
    fn from(a: Action) -> Self {
        match a {
            Action::Solve { answer } => ActionRecord {
                kind: ActionType::Solve,
                answer_token: Some(answer),
                verdict_text: None,
            },
            Action::Verify { text, .. } => ActionRecord {
                kind: ActionType::Verify,
                answer_token: None,
                verdict_text: Some(text.into_owned()),
            },
            Action::End => ActionRecord {
                kind: ActionType::End,
                answer_token: None,
                verdict_text: None,
            },
        }
    }
}

/// Ordered actions produced for one problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub problem_id: String,
    pub actions: Vec<Action>,
}

impl Trajectory {
    pub fn new(problem_id: impl Into<String>, actions: Vec<Action>) -> Self {
        Trajectory {
            problem_id: problem_id.into(),
            actions,
        }
    }

    /// Action count, `|y|_a`.
    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    /// Token count, `|y|`. One action is one token in the synthetic setting.
    pub fn token_count(&self) -> usize {
        self.actions.len()
    }

    pub fn is_terminated(&self) -> bool {
        matches!(self.actions.last(), Some(Action::End))
    }

    pub fn solve_count(&self) -> usize {
        self.actions.iter().filter(|a| a.kind() == ActionType::Solve).count()
    }

    /// Answers of the solve actions, in order.
    pub fn answers(&self) -> impl Iterator<Item = AnswerToken> + '_ {
        self.actions.iter().filter_map(Action::answer)
    }

    pub fn first_answer(&self) -> Option<AnswerToken> {
        self.answers().next()
    }

    pub fn last_answer(&self) -> Option<AnswerToken> {
        self.actions.iter().rev().find_map(Action::answer)
    }

    /// Index of the nearest solve action strictly before `index`.
    pub fn preceding_solve(&self, index: usize) -> Option<usize> {
        self.actions[..index.min(self.actions.len())]
            .iter()
            .rposition(|a| a.kind() == ActionType::Solve)
    }
}

/// Type of the action that must follow `prev`.
pub fn next_action_type(prev: &Action) -> Result<ActionType> {
    match prev {
        Action::Solve { .. } => Ok(ActionType::Verify),
        Action::Verify { verdict: Some(Verdict::Incorrect), .. } => Ok(ActionType::Solve),
        Action::Verify { verdict: Some(Verdict::Correct), .. } => Ok(ActionType::End),
        Action::Verify { verdict: None, .. } => Err(Error::UnparsedVerdict),
        Action::End => Err(Error::AlreadyTerminated),
    }
}

/// Binary verdict of a verification text, read from its concluding sentence.
///
/// An answer that "cannot be verified" counts as incorrect, so the grammar
/// schedules another attempt.
pub fn parse_verdict(text: &str) -> Result<Verdict> {
    let t = text.trim_end();
    let t = t.strip_suffix('.').unwrap_or(t).trim_end();
    let stem = |s: &'static str| s.strip_suffix('.').unwrap_or(s);
    if t.ends_with(stem(CORRECT_CONCLUSION)) {
        Ok(Verdict::Correct)
    } else if t.ends_with(stem(INCORRECT_CONCLUSION))
        || t.ends_with(stem(UNVERIFIABLE_CONCLUSION))
        || t.ends_with("Therefore, the answer cannot verify")
    {
        Ok(Verdict::Incorrect)
    } else {
        Err(Error::UnparseableVerification(tail(text, 48)))
    }
}

/// Template verification text for a verdict.
pub fn render_verdict(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Correct => CONFIRM_TEXT,
        Verdict::Incorrect => REFUTE_TEXT,
    }
}

fn tail(s: &str, max: usize) -> String {
    let start = s
        .char_indices()
        .rev()
        .nth(max.saturating_sub(1))
        .map_or(0, |(i, _)| i);
    s[start..].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(c: char) -> AnswerToken {
        c.to_string().parse().unwrap()
    }

    #[test]
    fn transition_rule() {
        assert_eq!(next_action_type(&Action::solve(tok('A'))).unwrap(), ActionType::Verify);
        assert_eq!(
            next_action_type(&Action::verify_with(Verdict::Correct)).unwrap(),
            ActionType::End
        );
        assert_eq!(
            next_action_type(&Action::verify_with(Verdict::Incorrect)).unwrap(),
            ActionType::Solve
        );
    }

    #[test]
    fn transition_errors() {
        assert!(matches!(next_action_type(&Action::End), Err(Error::AlreadyTerminated)));
        let garbled = Action::verify("I am not sure about this one");
        assert!(matches!(next_action_type(&garbled), Err(Error::UnparsedVerdict)));
    }

    #[test]
    fn conclusion_templates() {
        assert_eq!(parse_verdict("Looks fine. Therefore, the answer is correct.").unwrap(), Verdict::Correct);
        assert_eq!(parse_verdict("Off by one. Therefore, the answer is incorrect.").unwrap(), Verdict::Incorrect);
        assert_eq!(
            parse_verdict("Not enough info. Therefore, the answer cannot be verified.").unwrap(),
            Verdict::Incorrect
        );
        // trailing whitespace and a missing period are tolerated
        assert_eq!(parse_verdict("Therefore, the answer is correct  \n").unwrap(), Verdict::Correct);
        assert!(matches!(
            parse_verdict("Therefore, the answer is probably fine."),
            Err(Error::UnparseableVerification(_))
        ));
        assert!(parse_verdict("").is_err());
        assert!(parse_verdict("Therefore, the answer is correct. Actually no.").is_err());
    }

    #[test]
    fn rendered_verdicts_parse_back() {
        for v in [Verdict::Correct, Verdict::Incorrect] {
            assert_eq!(parse_verdict(render_verdict(v)).unwrap(), v);
            assert_eq!(Action::verify(render_verdict(v)), Action::verify_with(v));
        }
    }

    #[test]
    fn answer_tokens() {
        assert_eq!(tok('C').index(), 2);
        assert_eq!(AnswerToken::new(25).unwrap().to_string(), "Z");
        assert!(AnswerToken::new(26).is_err());
        assert!("a".parse::<AnswerToken>().is_err());
        assert!("AB".parse::<AnswerToken>().is_err());
    }

    #[test]
    fn action_json_shape() {
        let s = serde_json::to_string(&Action::solve(tok('B'))).unwrap();
        assert_eq!(s, r#"{"kind":"solve","answer_token":"B"}"#);
        assert_eq!(serde_json::to_string(&Action::End).unwrap(), r#"{"kind":"end"}"#);
        let v: Action =
            serde_json::from_str(r#"{"kind":"verify","verdict_text":"Therefore, the answer is incorrect."}"#).unwrap();
        assert_eq!(v.verdict(), Some(Verdict::Incorrect));
        assert!(serde_json::from_str::<Action>(r#"{"kind":"solve"}"#).is_err());
        assert!(serde_json::from_str::<Action>(r#"{"kind":"end","answer_token":"A"}"#).is_err());
    }

    #[test]
    fn tail_respects_char_boundaries() {
        assert_eq!(tail("héllo", 3), "llo");
        assert_eq!(tail("ab", 10), "ab");
    }
}
