#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::io::parse_jsonl;
use trialrl_core::ProblemSpec;

fuzz_target!(|text: &str| {
    let Ok(problems) = parse_jsonl::<ProblemSpec>(text) else { return };
    for p in problems {
        assert!(p.golden_answer.index() < p.alphabet_size);
    }
});
