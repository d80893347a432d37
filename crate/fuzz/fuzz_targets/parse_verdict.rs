#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::trajectory::{parse_verdict, render_verdict};

fuzz_target!(|text: &str| {
    if let Ok(v) = parse_verdict(text) {
        assert_eq!(parse_verdict(render_verdict(v)).unwrap(), v);
    }
});
