#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::offline::{BaselineMode, FilterRange};
use trialrl_core::runner::TrainMode;

fuzz_target!(|text: &str| {
    if let Ok(range) = text.parse::<FilterRange>() {
        assert!(range.lo <= range.hi);
        assert_eq!(range.to_string().parse::<FilterRange>().unwrap(), range);
    }
    let _ = text.parse::<BaselineMode>();
    if let Ok(mode) = text.parse::<TrainMode>() {
        assert_eq!(mode.to_string(), text);
    }
});
