#![no_main]
use libfuzzer_sys::fuzz_target;
use trialrl_core::runner::{merge_metric_tables, read_metrics_table};

fuzz_target!(|text: &str| {
    let Ok(table) = read_metrics_table("fuzz", text) else { return };
    let (header, rows) = merge_metric_tables(&[table.clone(), table]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(header.len(), rows[0].len());
});
