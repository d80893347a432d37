use trialrl_core::environment::ParamKind;
use trialrl_core::trajectory::{validate_trajectory, ValidationResult};
use trialrl_core::{Action, AnswerToken, ProblemSpec, RandomSource, SyntheticPolicy, Verdict};

fn random_policy(rng: &mut RandomSource, bins: usize) -> SyntheticPolicy {
    let mut v = || (0..bins).map(|_| 4.0 * rng.uniform() - 2.0).collect::<Vec<_>>();
    let (s, tp, tn) = (v(), v(), v());
    SyntheticPolicy::new(s, tp, tn).unwrap()
}

#[test]
fn sampled_trajectories_validate_unless_truncated() {
    let mut rng = RandomSource::new(1);
    for trial in 0..200 {
        let policy = random_policy(&mut rng, 3);
        let problem = ProblemSpec::new("p", trial % 3, AnswerToken::new(trial % 5).unwrap(), 5).unwrap();
        for max_rounds in 1..=4 {
            let r = policy.sample_trajectory(&problem, &mut rng, max_rounds);
            let verdict = validate_trajectory(&r.trajectory, &problem, 2 * max_rounds + 1);
            assert_eq!(verdict == ValidationResult::Accepted, !r.truncated, "{:?}", r.trajectory);
        }
    }
}

/// Each outcome frequency must land within three standard errors of its
/// logistic probability.
#[test]
fn outcome_frequencies_match_the_logits() {
    let policy = SyntheticPolicy::new(vec![0.7], vec![-0.4], vec![1.3]).unwrap();
    let problem = ProblemSpec::new("p", 0, AnswerToken::new(2).unwrap(), 4).unwrap();
    let mut rng = RandomSource::new(2);
    let n = 10_000;
    let (mut solved, mut tp, mut tp_n, mut tn, mut tn_n) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for _ in 0..n {
        let r = policy.sample_trajectory(&problem, &mut rng, 1);
        let right = matches!(r.trajectory.actions[0], Action::Solve { answer } if answer == problem.golden_answer);
        let confirmed = r.trajectory.actions[1].verdict() == Some(Verdict::Correct);
        solved += right as usize;
        if right {
            tp_n += 1;
            tp += confirmed as usize;
        } else {
            tn_n += 1;
            tn += !confirmed as usize;
        }
    }
    let check = |hits: usize, total: usize, kind: ParamKind| {
        let p = policy.prob(kind, 0);
        let se = (p * (1.0 - p) / total as f64).sqrt();
        let freq = hits as f64 / total as f64;
        assert!((freq - p).abs() <= 3.0 * se, "{kind:?}: {freq} vs {p} (se {se})");
    };
    check(solved, n, ParamKind::Solve);
    check(tp, tp_n, ParamKind::VerifyTp);
    check(tn, tn_n, ParamKind::VerifyTn);
}

#[test]
fn log_prob_gradient_matches_finite_differences() {
    let mut rng = RandomSource::new(3);
    let h = 1e-6;
    for trial in 0..100 {
        let policy = random_policy(&mut rng, 2);
        let problem = ProblemSpec::new("p", trial % 2, AnswerToken::new(0).unwrap(), 2 + trial % 5).unwrap();
        let traj = policy.sample_trajectory(&problem, &mut rng, 4).trajectory;
        let (_, grad) = policy.trajectory_log_prob_grad(&traj, &problem).unwrap();
        let mut worst = 0.0f64;
        for (i, &g) in grad.iter().enumerate() {
            let mut up = policy.clone();
            up.params_mut()[i] += h;
            let mut down = policy.clone();
            down.params_mut()[i] -= h;
            let fd = (up.trajectory_log_prob(&traj, &problem).unwrap() - down.trajectory_log_prob(&traj, &problem).unwrap())
                / (2.0 * h);
            worst = worst.max((fd - g).abs() / g.abs().max(fd.abs()).max(1e-3));
        }
        assert!(worst < 1e-6, "trial {trial}: relative error {worst}");
    }
}
