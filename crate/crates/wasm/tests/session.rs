use flowstate_wasm::{discretize_values, parse_sequences, Session};

#[test]
fn parses_commas_and_whitespace_and_names_bad_tokens() {
    let seqs = parse_sequences("1, 2 3\n\n4\t5\n").unwrap();
    assert_eq!(seqs, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0]]);
    let err = parse_sequences("1 2\n3 x\n").unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("`x`"), "{err}");
    assert!(parse_sequences("inf").is_err());
}

#[test]
fn discretized_table_covers_every_distinct_value() {
    let text = "64 64 165 977 64 1224\n1540 2852 2852 2909 64\n3149 3169 3149 165 165 165 977\n";
    let d = discretize_values(text, 3, 10, 4, 7).unwrap();
    let values: Vec<f64> = d.table.iter().map(|p| p.0).collect();
    assert_eq!(values, [64.0, 165.0, 977.0, 1224.0, 1540.0, 2852.0, 2909.0, 3149.0, 3169.0]);
    assert_eq!(d.k, 3);
    assert!(d.table.iter().all(|p| p.1 < 3));
    assert_eq!(d.restart_silhouettes.len(), 4);
    assert_eq!(d.silhouette, d.restart_silhouettes.iter().cloned().fold(f64::MIN, f64::max));
    // more clusters than values is capped
    assert_eq!(discretize_values("1 2", 10, 4, 1, 0).unwrap().k, 2);
    assert!(discretize_values("\n", 3, 10, 1, 0).is_err());
}

#[test]
fn scenario_triage_loop() {
    let mut s = Session::train(8_000, 3, false).unwrap();
    let summary = s.summary();
    assert_eq!(summary.flows, 8_000);
    assert!(summary.states <= summary.prefix_tree_states);
    assert!(s.toggle_dismissed(0).is_err());

    let v = s.score_scenario(4_000, 500, 20.0, 3).unwrap();
    assert!((0.0..=1.0).contains(&v.auc) && (0.0..=1.0).contains(&v.markov_auc));
    assert!(v.series.len() <= 1500 && v.series.last().unwrap().0 == v.traces - 1);
    assert_eq!(v.roc.first(), Some(&(0.0, 0.0)));
    assert_eq!(v.roc.last(), Some(&(1.0, 1.0)));
    let total: usize = v.alerts;
    assert!(v.groups.windows(2).all(|w| w[0].size >= w[1].size));

    let top = v.groups[0].root_cause;
    let after = s.toggle_dismissed(top).unwrap();
    assert_eq!(after.alerts, total - v.groups[0].size);
    assert_eq!(after.alerts_malicious, v.alerts_malicious - v.groups[0].malicious);
    assert!(after.groups[0].dismissed);
    assert_eq!((after.auc, after.markov_auc), (v.auc, v.markov_auc));
    let back = s.toggle_dismissed(top).unwrap();
    assert_eq!(back.alerts, total);
}
