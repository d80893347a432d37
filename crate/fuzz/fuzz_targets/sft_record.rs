#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::io::parse_jsonl;
use trialrl_core::sft::SftRecord;
use trialrl_core::{AnswerToken, ProblemSpec};

fuzz_target!(|text: &str| {
    let Ok(records) = parse_jsonl::<SftRecord>(text) else { return };
    let problem = ProblemSpec::new("p00000", 0, AnswerToken::new(2).unwrap(), 6).unwrap();
    for r in records {
        let _ = r.into_example(&problem);
    }
});
