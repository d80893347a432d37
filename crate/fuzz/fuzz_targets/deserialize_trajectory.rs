#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::trajectory::{deserialize_trajectory, serialize_trajectory};

fuzz_target!(|text: &str| {
    let Ok(traj) = deserialize_trajectory(text, "fuzz") else { return };
    // anything that parses must survive a render/parse cycle unchanged
    let rendered = serialize_trajectory(&traj).expect("parsed trajectories are representable");
    assert_eq!(deserialize_trajectory(&rendered, "fuzz").unwrap(), traj);
});
