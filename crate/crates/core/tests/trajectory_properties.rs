use proptest::prelude::*;

use trialrl_core::trajectory::{
    deserialize_trajectory, next_action_type, parse_verdict, render_verdict, serialize_trajectory, validate_trajectory,
    ValidationResult, DEFAULT_MAX_ACTIONS,
};
use trialrl_core::{Action, ActionType, AnswerToken, ProblemSpec, Trajectory, Verdict};

/// Grows a trajectory from its first solve using only `next_action_type`,
/// consuming one answer per solve and one verdict per verification.
fn grow(answers: &[usize], verdicts: &[Verdict]) -> Trajectory {
    let mut actions = vec![Action::solve(AnswerToken::new(answers[0]).unwrap())];
    let (mut a, mut v) = (1, 0);
    loop {
        match next_action_type(actions.last().unwrap()).unwrap() {
            ActionType::Verify => {
                actions.push(Action::verify_with(verdicts[v]));
                v += 1;
            }
            ActionType::Solve => {
                actions.push(Action::solve(AnswerToken::new(answers[a]).unwrap()));
                a += 1;
            }
            ActionType::End => {
                actions.push(Action::End);
                break;
            }
        }
    }
    Trajectory::new("p", actions)
}

#[test]
fn grammar_closure_is_exhaustive_up_to_five_rounds() {
    let problem = ProblemSpec::new("p", 0, AnswerToken::new(0).unwrap(), 2).unwrap();
    let mut checked = 0;
    for k in 1..=5usize {
        let mut verdicts = vec![Verdict::Incorrect; k - 1];
        verdicts.push(Verdict::Correct);
        for mask in 0..(1usize << k) {
            let answers: Vec<usize> = (0..k).map(|i| (mask >> i) & 1).collect();
            let traj = grow(&answers, &verdicts);
            assert_eq!(traj.action_count(), 2 * k + 1);
            assert_eq!(
                validate_trajectory(&traj, &problem, DEFAULT_MAX_ACTIONS),
                ValidationResult::Accepted,
                "{traj:?}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 2 + 4 + 8 + 16 + 32);
}

#[test]
fn verdict_templates_parse_back() {
    for v in [Verdict::Correct, Verdict::Incorrect] {
        assert_eq!(parse_verdict(render_verdict(v)).unwrap(), v);
    }
}

fn valid(answers: &[usize]) -> Trajectory {
    let k = answers.len();
    let mut actions = Vec::new();
    for (i, &a) in answers.iter().enumerate() {
        actions.push(Action::solve(AnswerToken::new(a).unwrap()));
        actions.push(Action::verify_with(if i + 1 == k { Verdict::Correct } else { Verdict::Incorrect }));
    }
    actions.push(Action::End);
    Trajectory::new("p", actions)
}

#[test]
fn text_round_trip_is_exhaustive_for_small_alphabets() {
    for alphabet in 2..=4usize {
        for k in 1..=4u32 {
            for code in 0..alphabet.pow(k) {
                let answers: Vec<usize> = (0..k).map(|i| code / alphabet.pow(i) % alphabet).collect();
                let traj = valid(&answers);
                let text = serialize_trajectory(&traj).unwrap();
                assert_eq!(deserialize_trajectory(&text, "p").unwrap(), traj, "{text}");
            }
        }
    }
}

proptest! {
    #[test]
    fn text_round_trip_up_to_eight_answers(answers in prop::collection::vec(0usize..8, 1..=4)) {
        let traj = valid(&answers);
        let text = serialize_trajectory(&traj).unwrap();
        prop_assert_eq!(deserialize_trajectory(&text, "p").unwrap(), traj.clone());
        let json = serde_json::to_string(&traj).unwrap();
        prop_assert_eq!(serde_json::from_str::<Trajectory>(&json).unwrap(), traj);
    }

    #[test]
    fn deserializer_never_panics(text in "(\\[\\[answer: [A-H]\\]\\]\n|Wait, let me recheck my solution\n|Let me try again\\.\n|<end>\n|Therefore, the answer is (in)?correct\\.\n|[a-z ]{0,12}\n){0,12}") {
        if let Ok(traj) = deserialize_trajectory(&text, "p") {
            let again = serialize_trajectory(&traj).unwrap();
            prop_assert_eq!(deserialize_trajectory(&again, "p").unwrap(), traj);
        }
    }
}
