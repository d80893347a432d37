#![no_main]
use libfuzzer_sys::fuzz_target;
use serde_json::{Map, Value};
use trialrl_core::runner::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(file) = serde_json::from_slice::<Value>(data) else { return };
    if let Ok(config) = RunConfig::resolve(Some(&file), &Map::new()) {
        let again = serde_json::to_value(&config).unwrap();
        assert_eq!(RunConfig::resolve(Some(&again), &Map::new()).unwrap(), config);
    }
});
