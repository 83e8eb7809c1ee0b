use edca_web::{simulate_json, solve_json, sweep_json};

const SCENARIO: &str = include_str!("../../../configs/two_class.toml");

#[test]
fn solve_returns_metrics() {
    let v: serde_json::Value = serde_json::from_str(&solve_json(SCENARIO).unwrap()).unwrap();
    assert_eq!(v["converged"], true);
    assert_eq!(v["metrics"]["acs"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_spans_the_range() {
    let v: serde_json::Value = serde_json::from_str(&sweep_json(SCENARIO, 0.5e6, 2e6, 4).unwrap()).unwrap();
    let loads: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["load_bps"].as_f64().unwrap()).collect();
    assert_eq!(loads, vec![0.5e6, 1e6, 1.5e6, 2e6]);
    assert!(sweep_json(SCENARIO, 2e6, 1e6, 4).is_err());
    assert!(sweep_json(SCENARIO, 0.0, 1e6, 1).is_err());
}

#[test]
fn simulation_is_bounded_and_reproducible() {
    let a = simulate_json(SCENARIO, 3, 0.5).unwrap();
    assert_eq!(a, simulate_json(SCENARIO, 3, 0.5).unwrap());
    assert!(simulate_json(SCENARIO, 3, 1e3).is_err());
}

#[test]
fn parse_errors_are_reported() {
    let err = solve_json("[[ac]]\naifsn = 2").unwrap_err();
    assert!(err.contains("missing field"), "{err}");
}
