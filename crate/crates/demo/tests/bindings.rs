use ncenter_demo::{check, scan, section, section_js, SectionRequest};

#[test]
fn check_matches_the_cli_wording() {
    let v = check("1", "1", 0.0);
    assert_eq!(v["satisfied"], true);
    assert_eq!(v["message"], "satisfied (3/2 ∈ 1/2+Z)");
    assert_eq!(v["radicand"], "9/4");

    let v = check("7/5", "1", 0.0);
    assert_eq!(v["excluded"], true);

    let v = check("1", "1.0000000001, 0", 1e-9);
    assert_eq!(v["satisfied"], true);
    assert!(v["root"].is_array());

    assert!(check("1/0", "1", 0.0)["error"].is_string());
    assert!(check("1", "abc", 0.0)["error"].is_string());
}

#[test]
fn scan_lists_the_seven_values() {
    let v = scan(5);
    let listed: Vec<&str> = v["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["criteria"] == true)
        .map(|e| e["alpha"].as_str().unwrap())
        .collect();
    assert_eq!(listed, ["1/2", "2/3", "4/5", "1", "4/3", "3/2", "8/5"]);
    assert!(scan(0)["error"].is_string());
}

#[test]
fn circular_orbit_section() {
    let request = SectionRequest {
        alpha: "1".into(),
        centers: vec![[0.0, 0.0]],
        masses: vec![1.0],
        energy: -0.5,
        points: vec![[1.0, 0.0]],
        t_final: 20.0,
        rel_tol: 1e-10,
        axis: 1,
        value: 0.0,
    };
    let v = section(&request);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    for p in points {
        assert!((p[1].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn section_from_json_reports_failures() {
    let out = section_js(
        r#"{"alpha": "3/2", "centers": [[-1, 0], [1, 0]], "masses": [1, 1], "energy": -1,
            "points": [[0.3, 0.1], [0.0, 40.0]], "t_final": 20}"#,
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let failures = v["failures"].as_array().unwrap();
    assert!(failures.iter().any(|f| f["seed"] == 1));
    assert!(serde_json::from_str::<serde_json::Value>(&section_js("{}")).unwrap()["error"].is_string());
}
