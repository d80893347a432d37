#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::io::parse_jsonl;
use trialrl_core::offline::StoreRecord;
use trialrl_core::{AnswerToken, ProblemSpec};

fuzz_target!(|text: &str| {
    let Ok(records) = parse_jsonl::<StoreRecord>(text) else { return };
    let problem = ProblemSpec::new("p00000", 1, AnswerToken::new(0).unwrap(), 4).unwrap();
    for r in records {
        let _ = r.into_rollout(&problem);
    }
});
