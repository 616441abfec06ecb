use fslab::config::RunConfig;

const FULL: &str = r#"{
    "schema_version": 1,
    "backend": "SL2C",
    "measure": {"kind": "explicit-atoms", "atoms": [
        {"matrix": [[[1, 0.2], 0], [0.1, [1, -0.2]]], "weight": 0.5},
        {"matrix": [[1, 0.3], [0, 1]], "weight": 0.5}
    ]},
    "cutoff": 12,
    "oversampling": 6,
    "self_check_tol": null,
    "lp_window": {"k_min": 2, "noise_floor": 1e-12},
    "gap_block": 2,
    "walk": {"steps": 5000, "trajectories": 2, "initial": {"kind": "sphere", "xyz": [0, 1, 0]}},
    "seed": 11,
    "output_dir": "runs/explicit"
}"#;

#[test]
fn parse_serialize_parse_is_identity() {
    let a = RunConfig::from_json(FULL).unwrap();
    let b = RunConfig::from_json(&a.to_json()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.self_check_tol, None);
    assert_eq!(a.lp_window.min_points, 3);
}

#[test]
fn overrides_are_validated() {
    let a = RunConfig::from_json(FULL).unwrap();
    assert_eq!(a.clone().with_overrides(Some(3), Some(16)).unwrap().seed, 3);
    assert!(a.clone().with_overrides(None, Some(200)).is_err());
    assert_ne!(a.clone().with_overrides(Some(12), None).unwrap().hash(), a.hash());
}

#[test]
fn out_of_range_fields_are_rejected() {
    for (from, to) in [
        ("\"oversampling\": 6", "\"oversampling\": 1"),
        ("\"gap_block\": 2", "\"gap_block\": 9"),
        ("\"schema_version\": 1", "\"schema_version\": 2"),
        ("\"weight\": 0.5}\n", "\"weight\": 0.25}\n"),
        ("\"xyz\": [0, 1, 0]", "\"xyz\": [0, 0, 0]"),
    ] {
        assert!(FULL.contains(from), "{from}");
        assert!(
            RunConfig::from_json(&FULL.replace(from, to)).and_then(|c| c.build_measure().map(|_| c)).is_err(),
            "{to}"
        );
    }
}
