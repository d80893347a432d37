#![no_main]
use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;
use trialrl_core::SyntheticPolicy;

fuzz_target!(|data: &[u8]| {
    let Ok(map) = serde_json::from_slice::<BTreeMap<String, f64>>(data) else { return };
    if let Ok(policy) = SyntheticPolicy::from_checkpoint(&map) {
        assert_eq!(SyntheticPolicy::from_checkpoint(&policy.to_checkpoint()).unwrap(), policy);
    }
});
