#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::io::parse_jsonl;
use trialrl_core::Trajectory;

fuzz_target!(|text: &str| {
    if let Ok(trajs) = parse_jsonl::<Trajectory>(text) {
        for t in trajs {
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<Trajectory>(&json).unwrap(), t);
        }
    }
});
