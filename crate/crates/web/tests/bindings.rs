use delaynet_web::{cue_sample, memory_bound, network_view, simulate};
use serde_json::Value;

#[test]
fn memory_bound_rows_grow_with_bits() {
    let v: Value = serde_json::from_str(&memory_bound(12, 20.0, 1.0)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 12);
    let a: Vec<f64> = rows.iter().map(|r| r["analytical_ms"].as_f64().unwrap()).collect();
    assert!(a.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn cue_sample_json_is_consistent() {
    let v: Value = serde_json::from_str(&cue_sample(3, 300.0, 7)).unwrap();
    assert_eq!(v["cues"].as_array().unwrap().len(), 3);
    let steps = v["raster"]["steps"].as_u64().unwrap();
    assert!(v["recall_end"].as_u64().unwrap() <= steps);
    assert!(["left", "right"].contains(&v["label"].as_str().unwrap()));
    for e in v["raster"]["events"].as_array().unwrap() {
        assert!(e[0].as_u64().unwrap() < steps);
    }
    assert_eq!(cue_sample(3, 300.0, 7), cue_sample(3, 300.0, 7));
}

#[test]
fn bad_arguments_return_error_objects() {
    let v: Value = serde_json::from_str(&cue_sample(0, 300.0, 1)).unwrap();
    assert!(v["error"].is_string());
    let v: Value = serde_json::from_str(&memory_bound(4, -1.0, 1.0)).unwrap();
    assert!(v["error"].is_string());
    let v: Value = serde_json::from_str(&simulate(0, 1.0, 1.0, true, 200.0, 1)).unwrap();
    assert!(v["error"].is_string());
}

#[test]
fn network_view_reports_rate_and_half_spectrum() {
    let v = network_view(40, 10.0, 10.0, true, 200.0, 3).unwrap();
    assert_eq!(v.delays_ms.len(), 40);
    assert!(v.frequencies_hz.iter().all(|&f| f >= 0.0));
    assert_eq!(v.frequencies_hz.len(), v.magnitudes.len());
    let total = v.hidden.events.len() as f64;
    let expected = total / (40.0 * v.hidden.steps as f64 * v.hidden.dt_ms / 1000.0);
    assert!((v.rate_hz - expected).abs() < 1e-9);
    let flat = network_view(40, 10.0, 10.0, false, 200.0, 3).unwrap();
    assert!(flat.delays_ms.iter().all(|&d| d == 0.0));
}
