//! Replays the checked-in fuzz seeds through the checks their targets make,
//! so a regression in any decoder shows up without a fuzzing toolchain.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use serde_json::{Map, Value};

use trialrl_core::io::parse_jsonl;
use trialrl_core::offline::{BaselineMode, FilterRange, StoreRecord};
use trialrl_core::runner::{merge_metric_tables, read_metrics_table, RunConfig, TrainMode};
use trialrl_core::sft::SftRecord;
use trialrl_core::trajectory::{deserialize_trajectory, parse_verdict, render_verdict, serialize_trajectory};
use trialrl_core::{AnswerToken, ProblemSpec, SyntheticPolicy, Trajectory};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn texts(target: &str) -> Vec<(String, String)> {
    seeds(target)
        .into_iter()
        .filter_map(|(n, b)| String::from_utf8(b).ok().map(|t| (n, t)))
        .collect()
}

#[test]
fn parse_verdict_seeds() {
    let mut parsed = 0;
    for (_, text) in texts("parse_verdict") {
        if let Ok(v) = parse_verdict(&text) {
            assert_eq!(parse_verdict(render_verdict(v)).unwrap(), v);
            parsed += 1;
        }
    }
    assert_eq!(parsed, 3);
}

#[test]
fn deserialize_trajectory_seeds() {
    let mut parsed = 0;
    for (name, text) in texts("deserialize_trajectory") {
        let Ok(traj) = deserialize_trajectory(&text, "fuzz") else { continue };
        let rendered = serialize_trajectory(&traj).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(deserialize_trajectory(&rendered, "fuzz").unwrap(), traj, "{name}");
        parsed += 1;
    }
    assert!(parsed >= 3);
}

#[test]
fn trajectory_jsonl_seeds() {
    for (name, text) in texts("trajectory_jsonl") {
        if let Ok(trajs) = parse_jsonl::<Trajectory>(&text) {
            for t in trajs {
                let json = serde_json::to_string(&t).unwrap();
                assert_eq!(serde_json::from_str::<Trajectory>(&json).unwrap(), t, "{name}");
            }
        }
    }
}

#[test]
fn problem_jsonl_seeds() {
    let ok: Vec<String> = texts("problem_jsonl")
        .into_iter()
        .filter(|(_, t)| parse_jsonl::<ProblemSpec>(t).is_ok())
        .map(|(n, _)| n)
        .collect();
    assert_eq!(ok, ["problems"]);
}

#[test]
fn policy_checkpoint_seeds() {
    let mut loaded = Vec::new();
    for (name, bytes) in seeds("policy_checkpoint") {
        let Ok(map) = serde_json::from_slice::<BTreeMap<String, f64>>(&bytes) else { continue };
        if let Ok(policy) = SyntheticPolicy::from_checkpoint(&map) {
            assert_eq!(SyntheticPolicy::from_checkpoint(&policy.to_checkpoint()).unwrap(), policy);
            loaded.push(name);
        }
    }
    assert_eq!(loaded, ["trained"]);
}

#[test]
fn sft_record_seeds() {
    let problem = ProblemSpec::new("p00000", 0, AnswerToken::new(2).unwrap(), 6).unwrap();
    for (_, text) in texts("sft_record") {
        if let Ok(records) = parse_jsonl::<SftRecord>(&text) {
            for r in records {
                let _ = r.into_example(&problem);
            }
        }
    }
}

#[test]
fn store_record_seeds() {
    let problem = ProblemSpec::new("p00000", 1, AnswerToken::new(0).unwrap(), 4).unwrap();
    for (_, text) in texts("store_record") {
        if let Ok(records) = parse_jsonl::<StoreRecord>(&text) {
            for r in records {
                let _ = r.into_rollout(&problem);
            }
        }
    }
}

#[test]
fn run_config_seeds() {
    let mut resolved = Vec::new();
    for (name, bytes) in seeds("run_config") {
        let Ok(file) = serde_json::from_slice::<Value>(&bytes) else { continue };
        if let Ok(config) = RunConfig::resolve(Some(&file), &Map::new()) {
            let again = serde_json::to_value(&config).unwrap();
            assert_eq!(RunConfig::resolve(Some(&again), &Map::new()).unwrap(), config);
            resolved.push(name);
        }
    }
    assert_eq!(resolved, ["offline", "partial", "process"]);
}

#[test]
fn cli_value_seeds() {
    for (_, text) in texts("cli_values") {
        if let Ok(range) = text.parse::<FilterRange>() {
            assert!(range.lo <= range.hi);
            assert_eq!(range.to_string().parse::<FilterRange>().unwrap(), range);
        }
        let _ = text.parse::<BaselineMode>();
        if let Ok(mode) = text.parse::<TrainMode>() {
            assert_eq!(mode.to_string(), text);
        }
    }
}

#[test]
fn metrics_table_seeds() {
    for (_, text) in texts("metrics_table") {
        let Ok(table) = read_metrics_table("fuzz", &text) else { continue };
        let (header, rows) = merge_metric_tables(&[table.clone(), table]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(header.len(), rows[0].len());
    }
}

fn decode_all(target: &str, data: &[u8]) {
    let text = String::from_utf8_lossy(data);
    match target {
        "parse_verdict" => {
            if let Ok(v) = parse_verdict(&text) {
                assert_eq!(parse_verdict(render_verdict(v)).unwrap(), v);
            }
        }
        "deserialize_trajectory" => {
            if let Ok(traj) = deserialize_trajectory(&text, "fuzz") {
                let rendered = serialize_trajectory(&traj).unwrap();
                assert_eq!(deserialize_trajectory(&rendered, "fuzz").unwrap(), traj);
            }
        }
        "trajectory_jsonl" => {
            for t in parse_jsonl::<Trajectory>(&text).unwrap_or_default() {
                let json = serde_json::to_string(&t).unwrap();
                assert_eq!(serde_json::from_str::<Trajectory>(&json).unwrap(), t);
            }
        }
        "problem_jsonl" => {
            for p in parse_jsonl::<ProblemSpec>(&text).unwrap_or_default() {
                assert!(p.golden_answer.index() < p.alphabet_size);
            }
        }
        "policy_checkpoint" => {
            if let Ok(map) = serde_json::from_slice::<BTreeMap<String, f64>>(data) {
                if let Ok(policy) = SyntheticPolicy::from_checkpoint(&map) {
                    assert_eq!(SyntheticPolicy::from_checkpoint(&policy.to_checkpoint()).unwrap(), policy);
                }
            }
        }
        "sft_record" => {
            let problem = ProblemSpec::new("p00000", 0, AnswerToken::new(2).unwrap(), 6).unwrap();
            for r in parse_jsonl::<SftRecord>(&text).unwrap_or_default() {
                let _ = r.into_example(&problem);
            }
        }
        "store_record" => {
            let problem = ProblemSpec::new("p00000", 1, AnswerToken::new(0).unwrap(), 4).unwrap();
            for r in parse_jsonl::<StoreRecord>(&text).unwrap_or_default() {
                let _ = r.into_rollout(&problem);
            }
        }
        "run_config" => {
            if let Ok(file) = serde_json::from_slice::<Value>(data) {
                if let Ok(config) = RunConfig::resolve(Some(&file), &Map::new()) {
                    let again = serde_json::to_value(&config).unwrap();
                    assert_eq!(RunConfig::resolve(Some(&again), &Map::new()).unwrap(), config);
                }
            }
        }
        "cli_values" => {
            if let Ok(range) = text.parse::<FilterRange>() {
                assert_eq!(range.to_string().parse::<FilterRange>().unwrap(), range);
            }
            let _ = text.parse::<BaselineMode>();
            let _ = text.parse::<TrainMode>();
        }
        "metrics_table" => {
            if let Ok(table) = read_metrics_table("fuzz", &text) {
                let (header, rows) = merge_metric_tables(&[table.clone(), table]).unwrap();
                assert_eq!(header.len(), rows[0].len());
            }
        }
        other => panic!("unknown target {other}"),
    }
}

const TARGETS: [&str; 10] = [
    "parse_verdict",
    "deserialize_trajectory",
    "trajectory_jsonl",
    "problem_jsonl",
    "policy_checkpoint",
    "sft_record",
    "store_record",
    "run_config",
    "cli_values",
    "metrics_table",
];

#[derive(Debug, Clone)]
enum Edit {
    Truncate(usize),
    Flip(usize, u8),
    Insert(usize, u8),
    Remove(usize),
    Splice(usize, usize),
}

fn edit() -> impl Strategy<Value = Edit> {
    prop_oneof![
        any::<usize>().prop_map(Edit::Truncate),
        (any::<usize>(), any::<u8>()).prop_map(|(i, b)| Edit::Flip(i, b)),
        (any::<usize>(), prop::sample::select(b"{}[]\":,\n0123456789-eE.ACnultrf ".to_vec())).prop_map(|(i, b)| Edit::Insert(i, b)),
        any::<usize>().prop_map(Edit::Remove),
        (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Edit::Splice(a, b)),
    ]
}

fn apply(data: &mut Vec<u8>, e: &Edit) {
    let n = data.len().max(1);
    match *e {
        Edit::Truncate(i) => data.truncate(i % n),
        Edit::Flip(i, b) if !data.is_empty() => data[i % n] ^= b,
        Edit::Insert(i, b) => data.insert(i % (data.len() + 1), b),
        Edit::Remove(i) if !data.is_empty() => {
            data.remove(i % n);
        }
        Edit::Splice(a, b) if !data.is_empty() => {
            let (a, b) = (a % n, b % n);
            let chunk: Vec<u8> = data[a.min(b)..a.max(b)].to_vec();
            data.splice(a..a, chunk);
        }
        _ => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mutated_seeds_never_break_a_decoder(
        target in prop::sample::select(TARGETS.to_vec()),
        pick in any::<prop::sample::Index>(),
        edits in prop::collection::vec(edit(), 1..6),
    ) {
        let all = seeds(target);
        let mut data = all[pick.index(all.len())].1.clone();
        for e in &edits {
            apply(&mut data, e);
        }
        decode_all(target, &data);
    }
}
