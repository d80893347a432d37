//! Plain-text rendering of trajectories.
//!
//! ```text
//! [[answer: B]]
//! Wait, let me recheck my solution
//! ... Therefore, the answer is incorrect.
//! Let me try again.
//! [[answer: A]]
//! Wait, let me recheck my solution
//! ... Therefore, the answer is correct.
//! <end>
//! ```
//!
//! A solve block may hold free-form reasoning lines before its answer line;
//! they are not modeled and are dropped on parse.

use std::fmt::Write as _;

use super::{parse_verdict, Action, AnswerToken, Trajectory};
use crate::error::{Error, Result};

pub const RECHECK_LINE: &str = "Wait, let me recheck my solution";
pub const RETRY_LINE: &str = "Let me try again.";
pub const END_LINE: &str = "<end>";

const MARKER_OPEN: &str = "[[answer: ";
const MARKER_CLOSE: &str = "]]";

fn is_reserved(line: &str) -> bool {
    line == RECHECK_LINE || line == RETRY_LINE || line == END_LINE
}

fn unserializable(index: usize, reason: &'static str) -> Error {
    Error::Grammar { index, reason }
}

/// Renders a trajectory in the text format.
///
/// Fails when the action order cannot be expressed (e.g. two solves in a
/// row) or a verification text would be ambiguous on parse: empty, multi-line
/// with a reserved separator line, or without a recognizable conclusion.
pub fn serialize_trajectory(traj: &Trajectory) -> Result<String> {
    let mut out = String::new();
    let mut prev: Option<&Action> = None;
    for (i, action) in traj.actions.iter().enumerate() {
        match (prev, action) {
            (None | Some(Action::Verify { .. }), Action::Solve { answer }) => {
                if prev.is_some() {
                    out.push_str(RETRY_LINE);
                    out.push('\n');
                }
                let _ = writeln!(out, "{MARKER_OPEN}{answer}{MARKER_CLOSE}");
            }
            (Some(Action::Solve { .. }), Action::Verify { text, verdict }) => {
                if verdict.is_none()
                    || text.is_empty()
                    || text.starts_with('\n')
                    || text.ends_with('\n')
                    || text.split('\n').any(is_reserved)
                {
                    return Err(unserializable(i, "verification text cannot be represented in the text format"));
                }
                out.push_str(RECHECK_LINE);
                out.push('\n');
                out.push_str(text);
                out.push('\n');
            }
            (Some(Action::Verify { .. }), Action::End) => {
                out.push_str(END_LINE);
                out.push('\n');
            }
            (_, Action::Verify { .. }) => return Err(unserializable(i, "verification must follow a solve")),
            (_, Action::End) => return Err(unserializable(i, "end must follow a verification")),
            (_, Action::Solve { .. }) => return Err(unserializable(i, "solve must start the trajectory or follow a verification")),
        }
        prev = Some(action);
    }
    Ok(out)
}

/// Parses text produced by [`serialize_trajectory`] (or following the same
/// grammar). Errors carry the byte offset of the first violation.
pub fn deserialize_trajectory(text: &str, problem_id: &str) -> Result<Trajectory> {
    let mut lines: Vec<(usize, &str)> = Vec::new();
    let mut offset = 0;
    for line in text.split('\n') {
        lines.push((offset, line));
        offset += line.len() + 1;
    }
    if text.is_empty() || text.ends_with('\n') {
        lines.pop();
    }
    let eof = text.len();
    let fail = |offset: usize, message: &str| Error::Format {
        offset,
        message: message.to_string(),
    };

    let mut actions = Vec::new();
    let mut i = 0;
    let n = lines.len();
    if n == 0 {
        return Ok(Trajectory::new(problem_id, actions));
    }
    loop {
        // solve block: optional reasoning lines, then the answer line
        loop {
            let Some(&(off, line)) = lines.get(i) else {
                return Err(fail(eof, "expected an answer line"));
            };
            if is_reserved(line) {
                return Err(fail(off, "expected an answer line"));
            }
            i += 1;
            if let Some(answer) = parse_marker(line).map_err(|m| fail(off, m))? {
                actions.push(Action::solve(answer));
                break;
            }
        }
        let Some(&(off, line)) = lines.get(i) else {
            break;
        };
        if line != RECHECK_LINE {
            return Err(fail(off, "expected the recheck line"));
        }
        i += 1;

        let start = i;
        while i < n && lines[i].1 != RETRY_LINE && lines[i].1 != END_LINE {
            if lines[i].1 == RECHECK_LINE {
                return Err(fail(lines[i].0, "unexpected recheck line inside a verification"));
            }
            i += 1;
        }
        if start == i {
            let at = lines.get(i).map_or(eof, |l| l.0);
            return Err(fail(at, "empty verification"));
        }
        let (from, first) = lines[start];
        let (last_off, last) = lines[i - 1];
        if first.is_empty() || last.is_empty() {
            return Err(fail(if first.is_empty() { from } else { last_off }, "blank line at a verification boundary"));
        }
        let body = &text[from..last_off + last.len()];
        if parse_verdict(body).is_err() {
            return Err(fail(from, "verification has no recognizable conclusion"));
        }
        actions.push(Action::verify(body.to_string()));

        let Some(&(off, line)) = lines.get(i) else {
            break;
        };
        i += 1;
        if line == END_LINE {
            actions.push(Action::End);
            if let Some(&(off, _)) = lines.get(i) {
                return Err(fail(off, "content after end marker"));
            }
            break;
        }
        // retry line
        if i == n {
            return Err(fail(off + line.len(), "expected a solve block after the retry line"));
        }
    }
    Ok(Trajectory::new(problem_id, actions))
}

/// `Ok(None)` for a line without a marker, `Err` for a malformed one.
fn parse_marker(line: &str) -> std::result::Result<Option<AnswerToken>, &'static str> {
    let Some(pos) = line.rfind(MARKER_OPEN) else {
        return Ok(None);
    };
    let rest = &line[pos + MARKER_OPEN.len()..];
    let token = rest
        .strip_suffix(MARKER_CLOSE)
        .ok_or("answer marker must end the line")?;
    token.parse().map(Some).map_err(|_| "invalid answer token")
}
